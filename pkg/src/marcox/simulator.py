"""Exact simulation of the latent and observed processes.

The latent process Y is simulated by time change: unit-rate exponential
arrivals pushed through the inverse cumulative intensity.  The observed
process X runs at the constant rate beta0 + w y between Y jumps; whenever Y
jumps, the X waiting time is redrawn at the incremented rate (exact because
the rate is piecewise constant and exponentials are memoryless).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .intensity import PolyIntensity, _cum_inverse_batch
from .paths import CountPath, ModelParams

# A latent path is structurally a count path; the alias keeps signatures honest.
LatentPath = CountPath

_CHUNK = 64


@dataclass(frozen=True)
class SimResult:
    x: CountPath
    y: LatentPath
    seed: int | None

    def __post_init__(self) -> None:
        if self.x.T != self.y.T:
            raise ValueError("observed and latent paths must share the horizon")


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_latent(gamma: PolyIntensity, T: float, seed=None) -> LatentPath:
    """Latent jump times: unit Poisson arrivals through the inverse of Gamma."""
    gamma.validate_nonneg(T)
    rng = _as_generator(seed)
    total = gamma.cum(T)
    arrivals: list[float] = []
    acc = 0.0
    while True:
        chunk = acc + np.cumsum(rng.exponential(size=_CHUNK))
        inside = chunk[chunk <= total]
        arrivals.extend(inside.tolist())
        if inside.size < _CHUNK:
            break
        acc = chunk[-1]
    if not arrivals:
        return CountPath(T=T, jumps=np.empty(0))
    jumps = _cum_inverse_batch(gamma, np.asarray(arrivals), T)
    # Distinct masses can collapse to the same time only on flat stretches of
    # Gamma, a probability-zero event; drop numerical ties defensively.
    jumps = np.unique(jumps[(jumps > 0.0) & (jumps <= T)])
    return CountPath(T=T, jumps=jumps)


def simulate(params: ModelParams, T: float, seed=None) -> SimResult:
    """Draw one (X, Y) pair on [0, T]; deterministic given the seed."""
    params.validate(T)
    rng = _as_generator(seed)
    gamma, beta0, w = params.gamma, params.beta0, params.w
    total = gamma.cum(T)

    u = rng.exponential()
    t_y = gamma.cum_inverse(u, T) if u <= total else math.inf
    t_x = 0.0
    y = 0
    x_jumps: list[float] = []
    y_jumps: list[float] = []
    while t_x < T:
        rate = beta0 + w * y
        r = rng.exponential() / rate if rate > 0.0 else math.inf
        if t_x + r < min(t_y, T):
            t_x = t_x + r
            x_jumps.append(t_x)
        elif t_y < T:
            # Y jumps: restart the X clock at the jump time with the new rate.
            t_x = t_y
            y += 1
            y_jumps.append(t_y)
            u += rng.exponential()
            t_y = gamma.cum_inverse(u, T) if u <= total else math.inf
        else:
            t_x = T
    seed_out = seed if isinstance(seed, (int, np.integer)) else None
    return SimResult(
        x=CountPath(T=T, jumps=np.asarray(x_jumps)),
        y=CountPath(T=T, jumps=np.asarray(y_jumps)),
        seed=None if seed_out is None else int(seed_out),
    )


def conditional_loglik(x: CountPath, y: LatentPath, params: ModelParams) -> float:
    """log p(x | y): sum of log pre-jump rates minus the integrated rate.

    The rate at an x-event uses the left limit y(t-), so a latent jump at the
    identical time does not count.  Returns -inf when any event sees rate 0.
    The integral is exact: beta0 T + w sum_j (T - s_j).
    """
    if x.T != y.T:
        raise ValueError("paths must share the horizon")
    T = x.T
    integral = params.beta0 * T + params.w * float(np.sum(T - y.jumps))
    if x.count == 0:
        return -integral
    counts = np.searchsorted(y.jumps, x.jumps, side="left")
    rates = params.beta0 + params.w * counts
    if np.any(rates <= 0.0):
        return -math.inf
    return float(np.sum(np.log(rates)) - integral)
