"""Exact marginal likelihood of the observed count path.

With the latent process integrated out, the likelihood factorizes as

    p(x) = ( sum_{j=0}^M c_j w^j beta0^(M-j) ) * exp(-beta0 T - int_0^T lambda)

where lambda(t) = (1 - e^{-w (T - t)}) gamma(t) and the coefficients c_j come
from a triangular recursion driven by the discounted kernel masses
A_m = int_0^{t_m} e^{-w (T - t)} gamma(t) dt, one per event, with the event
times relabeled in descending order (t_1 > t_2 > ... > t_M):

    c_0^(0) = 1
    c_0^(m) = c_0^(m-1)
    c_j^(m) = A_m * sum_{i<j} c_i^(m-1) C(m-i-1, j-i-1) + c_j^(m-1)

(the j = m case reads c_m^(m-1) as 0).  All terms are nonnegative, so rows
can only grow; each row is stored as mantissas times a power-of-two scale
tracked per row, which keeps the O(M^3) arithmetic in hardware floats.

Two row kernels implement the same update:

* a dense float path using a precomputed Pascal triangle, valid while the
  largest binomial fits in a double (rows up to ``_FLOAT_ROW_LIMIT``);
* a log-domain path (log-binomials via lgamma, log-sum-exp reductions) for
  longer paths, where binomial magnitudes exceed the double range.

Entries more than ~300 orders of magnitude below their row maximum flush to
zero in the stored float mantissas; the final row is also kept in log form so
the likelihood evaluation never loses dominant terms to that flush.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .intensity import alpha_integral, lambda_integral
from .paths import CountPath, ModelParams

# Largest row updated with raw binomials: C(959, 479) ~ 1e287 leaves headroom
# for the matrix-vector product before the row is rescaled.
_FLOAT_ROW_LIMIT = 960

_LN2 = math.log(2.0)

_pascal_cache: np.ndarray = np.ones((1, 1))
_log_factorial_cache: np.ndarray = np.zeros(1)


def _pascal(n: int) -> np.ndarray:
    """Float Pascal matrix P[a, b] = C(a, b) (zero above the diagonal)."""
    global _pascal_cache
    if _pascal_cache.shape[0] < n + 1:
        P = np.zeros((n + 1, n + 1))
        P[:, 0] = 1.0
        for a in range(1, n + 1):
            P[a, 1 : a + 1] = P[a - 1, 1 : a + 1] + P[a - 1, : a]
        _pascal_cache = P
    return _pascal_cache[: n + 1, : n + 1]


def _log_factorial(n: int) -> np.ndarray:
    """Table of log(i!) for i = 0..n."""
    global _log_factorial_cache
    if _log_factorial_cache.size < n + 1:
        _log_factorial_cache = np.concatenate(
            ([0.0], np.cumsum(np.log(np.arange(1.0, n + 1))))
        )
    return _log_factorial_cache[: n + 1]


def _log_matvec_numpy(p: np.ndarray, G: np.ndarray) -> np.ndarray:
    """u[a] = -log(a!) + logsumexp_{b >= a} (p[b] - log((b-a)!))."""
    m = p.size
    b = np.arange(m)
    d = b[None, :] - b[:, None]  # rows a, cols b
    terms = np.where(d >= 0, p[None, :] - G[np.maximum(d, 0)], -np.inf)
    return logsumexp(terms, axis=1) - G[:m]


try:  # the jitted kernel avoids the m x m temporaries of the numpy route
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _log_matvec_numba(p: np.ndarray, G: np.ndarray) -> np.ndarray:  # pragma: no cover
        m = p.size
        u = np.empty(m)
        for a in prange(m):
            mx = -np.inf
            for b in range(a, m):
                t = p[b] - G[b - a]
                if t > mx:
                    mx = t
            if mx == -np.inf:
                u[a] = -np.inf
                continue
            s = 0.0
            for b in range(a, m):
                s += np.exp(p[b] - G[b - a] - mx)
            u[a] = mx + np.log(s) - G[a]
        return u

    _log_matvec = _log_matvec_numba
except ImportError:  # pragma: no cover
    _log_matvec = _log_matvec_numpy


@dataclass(frozen=True)
class CoefficientTable:
    """Triangular coefficient array with per-row power-of-two rescaling.

    Row m holds mantissas of c_0^(m) .. c_m^(m); the true value of entry
    (m, j) is rows[m][j] * 2**pow2[m].  ``final_log`` carries the last row in
    log form, immune to mantissa underflow.
    """

    rows: tuple[np.ndarray, ...]
    pow2: np.ndarray
    final_log: np.ndarray

    @property
    def M(self) -> int:
        return len(self.rows) - 1

    @property
    def log_scale(self) -> np.ndarray:
        """Accumulated log rescaling factor per row."""
        return self.pow2 * _LN2

    def value(self, m: int, j: int) -> float:
        """Unscaled coefficient c_j^(m); may overflow to inf for huge rows."""
        return math.ldexp(float(self.rows[m][j]), int(self.pow2[m]))

    def log_value(self, m: int, j: int) -> float:
        mant = self.rows[m][j]
        return -math.inf if mant == 0.0 else math.log(mant) + self.pow2[m] * _LN2


@dataclass(frozen=True)
class MarginalResult:
    """loglik = polynomial_term_log + exponent_term."""

    loglik: float
    polynomial_term_log: float
    exponent_term: float


def _normalize(row: np.ndarray, pow2: int) -> tuple[np.ndarray, int]:
    """Rescale by a power of two so the max mantissa sits in [1, 2)."""
    vmax = float(row.max(initial=0.0))
    if vmax <= 0.0 or not math.isfinite(vmax):
        return row, pow2
    exp = math.frexp(vmax)[1]  # vmax in [2^(exp-1), 2^exp)
    if exp != 1:
        row = row * math.ldexp(1.0, 1 - exp)
        pow2 += exp - 1
    return row, pow2


def _float_row(mant: np.ndarray, A_m: float, m: int) -> np.ndarray:
    """Row update in mantissa units via a reversed matvec against Pascal.

    With C(m-1-i, j-1-i) = C(m-1-i, m-j), the inner sums over i become one
    product of the reversed row with the lower-triangular Pascal matrix.
    """
    P = _pascal(m - 1)
    u = mant[::-1] @ P
    new = np.empty(m + 1)
    new[0] = mant[0]
    new[1:] = A_m * u[::-1]
    new[1:m] += mant[1:]
    return new


def _log_row(log_row: np.ndarray, A_m: float, m: int) -> np.ndarray:
    """Same update on log values; handles rows whose range exceeds doubles.

    Folding the factorials into the reversed row turns the binomial sums into
    one kernel pass: with p_b = log c_(m-1-b) + log b!, the inner sums become
    logsumexp_{b >= a} (p_b - log (b-a)!) - log a!.
    """
    G = _log_factorial(m)
    logA = math.log(A_m) if A_m > 0.0 else -math.inf
    p = log_row[::-1] + G[:m]
    u = _log_matvec(p, G)
    new = np.empty(m + 1)
    new[0] = 0.0
    grown = logA + u[::-1]
    new[1:m] = np.logaddexp(grown[: m - 1], log_row[1:])
    new[m] = grown[m - 1]
    return new


def compute_coefficients(x: CountPath, params: ModelParams) -> CoefficientTable:
    """Run the triangular recursion over the events of x.

    The kernel mass A_m is computed once per event from the closed-form
    integral.  Rows run on the float kernel while binomials fit in doubles
    (and the row stays finite), then switch permanently to the log kernel.
    """
    params.validate(x.T)
    T = x.T
    ts_desc = x.jumps[::-1]  # stored ascending; the recursion wants descending
    M = x.count
    A = np.array([alpha_integral(params.gamma, params.w, T, 0.0, float(t)) for t in ts_desc])

    rows: list[np.ndarray] = [np.array([1.0])]
    pow2 = np.zeros(M + 1, dtype=np.int64)

    mant = np.array([1.0])
    k = 0
    log_row: np.ndarray | None = None
    for m in range(1, M + 1):
        if log_row is None and m <= _FLOAT_ROW_LIMIT:
            new = _float_row(mant, A[m - 1], m)
            if np.all(np.isfinite(new)):
                mant, k = _normalize(new, k)
                # Row head must stay exactly 2^-k so the unscaled c_0 is 1.
                assert mant[0] == 0.0 or mant[0] == math.ldexp(1.0, -k)
                rows.append(mant)
                pow2[m] = k
                continue
        if log_row is None:
            with np.errstate(divide="ignore"):
                log_row = np.log(mant) + k * _LN2
        log_row = _log_row(log_row, A[m - 1], m)
        k = int(math.floor(float(np.max(log_row)) / _LN2))
        mant = np.exp(log_row - k * _LN2)
        mant[0] = math.ldexp(1.0, -k)  # keep the unscaled c_0 = 1 exact
        rows.append(mant)
        pow2[m] = k

    if log_row is None:
        with np.errstate(divide="ignore"):
            final_log = np.log(mant) + k * _LN2
    else:
        final_log = log_row
    return CoefficientTable(rows=tuple(rows), pow2=pow2, final_log=final_log)


def marginal_loglik(x: CountPath, params: ModelParams) -> MarginalResult:
    """Log marginal likelihood of x under params.

    The polynomial factor is evaluated in log space from the final
    coefficient row.  At beta0 = 0 only the j = M term survives (0^0 := 1);
    a polynomial factor of exactly zero yields the -inf sentinel.
    """
    table = compute_coefficients(x, params)
    M = table.M
    exponent = -params.beta0 * x.T - lambda_integral(params.gamma, params.w, x.T)

    logs = table.final_log
    j = np.arange(M + 1)
    if params.beta0 == 0.0:
        poly_log = logs[M] + M * math.log(params.w) if M > 0 else logs[0]
    else:
        weights = j * math.log(params.w) + (M - j) * math.log(params.beta0)
        poly_log = float(logsumexp(logs + weights))
    return MarginalResult(
        loglik=float(poly_log + exponent),
        polynomial_term_log=float(poly_log),
        exponent_term=float(exponent),
    )


def batch_loglik(paths: list[CountPath], params: ModelParams) -> list[MarginalResult]:
    """Element-wise marginal_loglik; the first failing element is reported."""
    out: list[MarginalResult] = []
    for i, path in enumerate(paths):
        try:
            out.append(marginal_loglik(path, params))
        except (ValidationError, ValueError) as exc:
            raise ValidationError(f"path {i}: {exc}") from exc
    return out
