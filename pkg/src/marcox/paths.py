"""Count paths, model parameters, and the adaptation transform.

A count path records the jump times of a unit-jump counting process on
[0, T].  ``adapt_path`` converts an arbitrary count series into one whose
conditional intensity is non-decreasing: integrate the raw step path, scale
by w, read off the times where the scaled integral crosses each integer, and
place one jump per crossing so that the area under the adapted path matches
the area under the scaled integral at every crossing.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ValidationError
from .intensity import PolyIntensity


@dataclass(frozen=True)
class CountPath:
    """Ordered event times in (0, T] with horizon T."""

    T: float
    jumps: np.ndarray

    def __post_init__(self) -> None:
        T = float(self.T)
        if not (math.isfinite(T) and T > 0):
            raise ValidationError("horizon T must be finite and positive")
        jumps = np.asarray(self.jumps, dtype=float)
        if jumps.ndim != 1:
            raise ValidationError("event times must be one-dimensional")
        if jumps.size and not np.all(np.isfinite(jumps)):
            raise ValidationError("event times must be finite")
        if jumps.size and (jumps[0] <= 0.0 or jumps[-1] > T):
            raise ValidationError(f"event times must lie in (0, {T}]")
        if jumps.size > 1 and np.any(np.diff(jumps) <= 0.0):
            if np.any(np.diff(jumps) == 0.0):
                raise ValidationError("duplicate event time")
            raise ValidationError("event times must be strictly increasing")
        jumps.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "jumps", jumps)

    @property
    def count(self) -> int:
        return int(self.jumps.size)

    def value(self, t: float) -> int:
        """Path value x(t) = number of events at or before t (right-continuous)."""
        return int(np.searchsorted(self.jumps, t, side="right"))

    def integral(self, t: float) -> float:
        """int_0^t x(s) ds for the step path, exact from the jump structure."""
        upto = self.jumps[self.jumps <= t]
        return float(upto.size * t - upto.sum())


@dataclass(frozen=True)
class ModelParams:
    """Conditional intensity beta(t, y) = beta0 + w y with latent rate gamma."""

    beta0: float
    w: float
    gamma: PolyIntensity

    def __post_init__(self) -> None:
        beta0 = float(self.beta0)
        w = float(self.w)
        if not (math.isfinite(beta0) and beta0 >= 0.0):
            raise ValidationError("baseline rate beta0 must be finite and >= 0")
        if not (math.isfinite(w) and w > 0.0):
            raise ValidationError("jump weight w must be finite and positive")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "w", w)

    def validate(self, T: float) -> None:
        """Check gamma >= 0 on the working interval [0, T]."""
        self.gamma.validate_nonneg(T)


def load_path(events: Iterable[float], T: float) -> CountPath:
    """Sort event times ascending and validate containment in (0, T]."""
    arr = np.sort(np.asarray(list(events), dtype=float))
    return CountPath(T=T, jumps=arr)


def adapt_path(x_star: CountPath, w: float) -> CountPath:
    """Transform a raw count path into one compatible with a non-decreasing rate.

    Let xt(t) = w * int_0^t x*(s) ds (piecewise linear, slope w * x*(t)).  For
    each integer level i = 1..floor(xt(T)), the crossing time is
    t_i = inf{t : xt(t) = i}, and the adapted jump u_i in (t_{i-1}, t_i) is
    fixed by matching areas on [t_{i-1}, t_i]:

        (i-1)(u_i - t_{i-1}) + i (t_i - u_i) = int xt  on that interval,

    a linear equation giving u_i = i t_i - (i-1) t_{i-1} - (that integral).
    """
    if not w > 0:
        raise ValidationError("adaptation scale w must be positive")
    if x_star.count == 0:
        raise ValidationError("adaptation needs a nonempty path")
    T = x_star.T
    # Piecewise description of xt: nodes at 0, jump times, T; between nodes
    # the slope is w * (number of events so far).
    nodes = np.concatenate(([0.0], x_star.jumps, [T] if x_star.jumps[-1] < T else []))
    levels = np.arange(nodes.size)  # x*(t) on [nodes[k], nodes[k+1]) is levels[k]
    xt_nodes = np.concatenate(([0.0], np.cumsum(w * levels[:-1] * np.diff(nodes))))

    total = xt_nodes[-1]
    M = int(math.floor(total))
    if M == 0:
        raise ValidationError("adaptation scale too small: no events after transform")

    # Prefix areas under xt at the nodes; xt is linear between them, so each
    # segment contributes a trapezoid and partial segments are exact too.
    seg_areas = 0.5 * (xt_nodes[:-1] + xt_nodes[1:]) * np.diff(nodes)
    prefix = np.concatenate(([0.0], np.cumsum(seg_areas)))

    def xt_integral(t: float) -> float:
        k = int(np.searchsorted(nodes, t, side="right")) - 1
        k = min(max(k, 0), nodes.size - 2)
        dt = t - nodes[k]
        v = xt_nodes[k] + w * levels[k] * dt
        return float(prefix[k] + 0.5 * (xt_nodes[k] + v) * dt)

    # Crossing time of each integer level: invert the linear piece containing it.
    crossings = np.empty(M)
    for i in range(1, M + 1):
        k = int(np.searchsorted(xt_nodes, i, side="left")) - 1
        k = max(k, 0)
        slope = w * levels[k]
        if slope <= 0:  # xt flat below the level; crossing is at the next node
            crossings[i - 1] = nodes[k + 1]
        else:
            crossings[i - 1] = nodes[k] + (i - xt_nodes[k]) / slope

    jumps = np.empty(M)
    prev = 0.0
    prev_area = 0.0
    for i in range(1, M + 1):
        t_i = crossings[i - 1]
        area_i = xt_integral(t_i)
        jumps[i - 1] = i * t_i - (i - 1) * prev - (area_i - prev_area)
        prev, prev_area = t_i, area_i
    return CountPath(T=T, jumps=jumps)


def tune_w(x_star: CountPath) -> float:
    """Scale for ``adapt_path`` so the adapted path has exactly x_star.count jumps.

    w = M* / int_0^T x*(s) ds nudged up by 1e-9 relative, so the scaled
    integral ends strictly above M* instead of on the integer boundary where
    floating-point could tip the floor either way.
    """
    if x_star.count == 0:
        raise ValidationError("tuning needs a nonempty path")
    area = x_star.integral(x_star.T)
    return x_star.count / area * (1.0 + 1e-9)


def read_events_csv(source: str | Path | TextIO) -> list[float]:
    """One event time per line; optional 'time' header; '#' lines are comments."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return read_events_csv(fh)
    times: list[float] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if lineno <= 2 and line.lower() == "time":
            continue
        try:
            times.append(float(line))
        except ValueError as exc:
            raise ValidationError(f"bad event time on line {lineno}: {line!r}") from exc
    return times


def write_events_csv(
    dest: str | Path | TextIO, times: Sequence[float], comments: Sequence[str] = ()
) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_events_csv(fh, times, comments)
        return
    assert isinstance(dest, io.TextIOBase) or hasattr(dest, "write")
    for c in comments:
        dest.write(f"# {c}\n")
    dest.write("time\n")
    for t in times:
        dest.write(f"{t!r}\n")
