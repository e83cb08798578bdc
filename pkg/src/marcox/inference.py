"""Parameter fitting: random-walk Metropolis over the polynomial coefficients
of the latent rate, and a derivative-free maximum-likelihood counterpart.

The baseline rate and jump weight stay fixed; only the coefficients move.
Proposals are block Gaussian updates.  Coefficient vectors whose polynomial
dips below zero anywhere on [0, T] are outside the posterior support and are
rejected without evaluating the likelihood.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .intensity import PolyIntensity
from .marginal import marginal_loglik
from .paths import CountPath, ModelParams

_TARGET_ACCEPT = 0.25


def _as_vector(value, size: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(size, float(arr))
    if arr.shape != (size,):
        raise ValidationError(f"{name} must be scalar or length {size}")
    return arr


@dataclass(frozen=True)
class FitConfig:
    """Controls for the Metropolis sampler.

    Scalars for prior/proposal settings broadcast over all coefficients.
    ``adapt_proposals`` runs a discarded pilot phase that rescales the
    proposal widths toward 25% acceptance before the recorded run.
    """

    degree: int
    prior_mean: float | Sequence[float] = 0.0
    prior_sd: float | Sequence[float] = 100.0
    proposal_sd: float | Sequence[float] = 0.5
    iters: int = 5000
    burnin: int = 1000
    thin: int = 1
    seed: int = 0
    adapt_proposals: bool = True
    pilot_iters: int = 1000
    start: Sequence[float] | None = None
    use_likelihood: bool = True
    per_coordinate: bool = False

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValidationError("polynomial degree must be >= 0")
        if not (self.iters > self.burnin >= 0):
            raise ValidationError("need iters > burnin >= 0")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        d = self.degree + 1
        object.__setattr__(self, "prior_mean", _as_vector(self.prior_mean, d, "prior_mean"))
        object.__setattr__(self, "prior_sd", _as_vector(self.prior_sd, d, "prior_sd"))
        object.__setattr__(self, "proposal_sd", _as_vector(self.proposal_sd, d, "proposal_sd"))
        if np.any(self.prior_sd <= 0) or np.any(self.proposal_sd <= 0):
            raise ValidationError("prior_sd and proposal_sd must be positive")
        if self.start is not None:
            object.__setattr__(self, "start", _as_vector(self.start, d, "start"))


@dataclass(frozen=True)
class Chain:
    """Posterior draws of the coefficient vector with bookkeeping."""

    draws: np.ndarray          # (n_kept, degree + 1)
    logliks: np.ndarray        # marginal log-likelihood at each kept draw
    accepted: np.ndarray       # whether the iteration producing the draw moved
    accept_rate: float
    seed: int
    n_evals: int               # marginal-likelihood evaluations in the main run
    n_support_rejected: int
    proposal_sd: np.ndarray    # widths actually used (after any pilot tuning)
    diagnostics: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0.0 <= self.accept_rate <= 1.0:
            raise ValueError("acceptance rate must lie in [0, 1]")


def mh_fit(x: CountPath, params_fixed: tuple[float, float], cfg: FitConfig) -> Chain:
    """Block random-walk Metropolis on the coefficients, beta0 and w fixed.

    Target: marginal log-likelihood plus independent normal log-priors.
    Proposals leaving the nonnegativity support are rejected outright.
    Deterministic given (data, config, seed).
    """
    beta0, w = params_fixed
    T = x.T
    rng = np.random.default_rng(cfg.seed)
    d = cfg.degree + 1

    evals = 0

    def loglik(coeffs: np.ndarray) -> float:
        nonlocal evals
        if not cfg.use_likelihood:
            return 0.0
        evals += 1
        params = ModelParams(beta0=beta0, w=w, gamma=PolyIntensity(tuple(coeffs)))
        return marginal_loglik(x, params).loglik

    def log_prior(coeffs: np.ndarray) -> float:
        z = (coeffs - cfg.prior_mean) / cfg.prior_sd
        return float(-0.5 * np.dot(z, z))

    def in_support(coeffs: np.ndarray) -> bool:
        if not cfg.use_likelihood:
            return True  # support restriction belongs to the likelihood term
        return PolyIntensity(tuple(coeffs)).is_nonneg(T)

    if cfg.start is not None:
        current = np.array(cfg.start, dtype=float)
    elif cfg.use_likelihood:
        current = np.zeros(d)
        current[0] = max(x.count, 1) / T  # crude rate-matching start, feasible
    else:
        current = np.array(cfg.prior_mean, dtype=float)
    if not in_support(current):
        raise ValidationError("starting coefficients give a negative intensity")

    sd = np.array(cfg.proposal_sd, dtype=float)
    cur_ll = loglik(current)
    cur_post = cur_ll + log_prior(current)

    def try_move(prop: np.ndarray) -> tuple[bool, bool]:
        """Accept/reject one proposal; returns (accepted, support_rejected)."""
        nonlocal current, cur_ll, cur_post
        if not in_support(prop):
            rng.random()  # burn the decision draw to keep the stream aligned
            return False, True
        ll = loglik(prop)
        post = ll + log_prior(prop)
        if math.log(rng.random()) < post - cur_post:
            current, cur_ll, cur_post = prop, ll, post
            return True, False
        return False, False

    def step(scale: np.ndarray) -> tuple[bool, int]:
        """One MH iteration; returns (any move accepted, support rejections).

        Block mode moves every coefficient at once; per-coordinate mode sweeps
        the coordinates with individual accept tests.
        """
        if not cfg.per_coordinate:
            return try_move(current + scale * rng.standard_normal(d))
        moved = False
        rejected = 0
        for idx in range(d):
            prop = current.copy()
            prop[idx] += scale[idx] * rng.standard_normal()
            acc, sup = try_move(prop)
            moved |= acc
            rejected += sup
        return moved, rejected

    if cfg.adapt_proposals:
        log_width = 0.0
        for t in range(1, cfg.pilot_iters + 1):
            accepted, _ = step(sd * math.exp(log_width))
            log_width += (float(accepted) - _TARGET_ACCEPT) / (10 + t) ** 0.6
        sd = sd * math.exp(log_width)
        evals = 0  # pilot is discarded; the counter tracks the main run only

    n_kept = (cfg.iters - cfg.burnin) // cfg.thin
    draws = np.empty((n_kept, d))
    lls = np.empty(n_kept)
    acc_flags = np.zeros(n_kept, dtype=bool)
    n_accept = 0
    n_support = 0
    kept = 0
    for it in range(cfg.iters):
        accepted, support_rejected = step(sd)
        n_accept += int(accepted)
        n_support += int(support_rejected)
        if it >= cfg.burnin and (it - cfg.burnin) % cfg.thin == 0 and kept < n_kept:
            draws[kept] = current
            lls[kept] = cur_ll
            acc_flags[kept] = accepted
            kept += 1

    diagnostics: list[str] = []
    if n_accept == 0:
        msg = "chain never accepted a proposal; widen priors or shrink proposal_sd"
        diagnostics.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return Chain(
        draws=draws,
        logliks=lls,
        accepted=acc_flags,
        accept_rate=n_accept / cfg.iters,
        seed=cfg.seed,
        n_evals=evals,
        n_support_rejected=n_support,
        proposal_sd=sd,
        diagnostics=tuple(diagnostics),
    )


@dataclass(frozen=True)
class MleResult:
    coeffs: np.ndarray
    loglik: float
    converged: bool
    n_evals: int


def mle_fit(
    x: CountPath,
    params_fixed: tuple[float, float],
    degree: int,
    start: Sequence[float] | None = None,
    budget: int = 2000,
) -> MleResult:
    """Nelder-Mead maximization of the marginal log-likelihood.

    Coefficient vectors outside the nonnegativity support score -inf, which
    acts as a barrier keeping the simplex feasible.  Deterministic given the
    starting point.
    """
    beta0, w = params_fixed
    T = x.T
    d = degree + 1
    if start is None:
        x0 = np.zeros(d)
        x0[0] = max(x.count, 1) / T
    else:
        x0 = _as_vector(start, d, "start")
    if not PolyIntensity(tuple(x0)).is_nonneg(T):
        raise ValidationError("starting coefficients give a negative intensity")

    def objective(coeffs: np.ndarray) -> float:
        gamma = PolyIntensity(tuple(coeffs))
        if not gamma.is_nonneg(T):
            return math.inf
        params = ModelParams(beta0=beta0, w=w, gamma=gamma)
        return -marginal_loglik(x, params).loglik

    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxfev": budget, "xatol": 1e-9, "fatol": 1e-9},
    )
    return MleResult(
        coeffs=np.asarray(res.x, dtype=float),
        loglik=float(-res.fun),
        converged=bool(res.success),
        n_evals=int(res.nfev),
    )


@dataclass(frozen=True)
class ChainSummary:
    coeff_mean: np.ndarray
    coeff_sd: np.ndarray
    coeff_quantiles: np.ndarray  # rows: 2.5%, 50%, 97.5%
    grid: np.ndarray | None = None
    gamma_mean: np.ndarray | None = None
    gamma_lo: np.ndarray | None = None
    gamma_hi: np.ndarray | None = None
    cum_mean: np.ndarray | None = None
    cum_lo: np.ndarray | None = None
    cum_hi: np.ndarray | None = None


def summarize(chain: Chain, t_grid: Sequence[float] | None = None) -> ChainSummary:
    """Per-coefficient posterior summaries and, given a time grid, pointwise
    bands for the rate and its cumulative mass."""
    draws = np.asarray(chain.draws, dtype=float)
    if draws.size == 0:
        raise ValidationError("cannot summarize an empty chain")
    sd = (
        np.std(draws, axis=0, ddof=1)
        if draws.shape[0] > 1
        else np.zeros(draws.shape[1])
    )
    out = {
        "coeff_mean": np.mean(draws, axis=0),
        "coeff_sd": sd,
        "coeff_quantiles": np.quantile(draws, [0.025, 0.5, 0.975], axis=0),
    }
    if t_grid is not None:
        ts = np.asarray(t_grid, dtype=float)
        vals = np.empty((draws.shape[0], ts.size))
        cums = np.empty_like(vals)
        for i, coeffs in enumerate(draws):
            gamma = PolyIntensity(tuple(coeffs))
            vals[i] = gamma.eval_many(ts)
            cums[i] = gamma.cum_many(ts)
        out.update(
            grid=ts,
            gamma_mean=vals.mean(axis=0),
            gamma_lo=np.quantile(vals, 0.025, axis=0),
            gamma_hi=np.quantile(vals, 0.975, axis=0),
            cum_mean=cums.mean(axis=0),
            cum_lo=np.quantile(cums, 0.025, axis=0),
            cum_hi=np.quantile(cums, 0.975, axis=0),
        )
    return ChainSummary(**out)


def write_chain_csv(dest: str | Path | TextIO, chain: Chain) -> None:
    """Columns: iter, c0..cd, loglik, accepted(0/1)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_chain_csv(fh, chain)
        return
    d = chain.draws.shape[1]
    writer = csv.writer(dest)
    writer.writerow(["iter"] + [f"c{i}" for i in range(d)] + ["loglik", "accepted"])
    for i in range(chain.draws.shape[0]):
        row = [i]
        row += [repr(float(v)) for v in chain.draws[i]]
        row += [repr(float(chain.logliks[i])), int(chain.accepted[i])]
        writer.writerow(row)


def read_chain_csv(source: str | Path | TextIO) -> Chain:
    """Rebuild a Chain (draws, logliks, accepted flags) from its CSV form."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_chain_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0] != "iter" or header[-2:] != ["loglik", "accepted"]:
        raise ValidationError("not a chain CSV: expected iter, c0.., loglik, accepted")
    d = len(header) - 3
    draws, lls, acc = [], [], []
    for row in reader:
        if not row:
            continue
        draws.append([float(v) for v in row[1 : 1 + d]])
        lls.append(float(row[-2]))
        acc.append(bool(int(row[-1])))
    if not draws:
        raise ValidationError("chain CSV has no draws")
    acc_arr = np.asarray(acc, dtype=bool)
    return Chain(
        draws=np.asarray(draws, dtype=float),
        logliks=np.asarray(lls, dtype=float),
        accepted=acc_arr,
        accept_rate=float(np.mean(acc_arr)),
        seed=-1,
        n_evals=0,
        n_support_rejected=0,
        proposal_sd=np.zeros(d),
    )
