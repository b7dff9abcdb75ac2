"""Bounded polynomial approximations in the Chebyshev basis.

Polynomials are stored as ``P(x) = c[0]/2 + sum_{k>=1} c[k] T_k(x)``. The
constructions here cover the sign function, the normalized logarithm and
general functions given by a local Taylor series, all produced by averaged
(de La Vallee Poussin) truncation of a Chebyshev expansion.
"""

from __future__ import annotations

import ast
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit
from scipy import fft as sfft
from scipy import signal, special, stats

from ._validation import (
    DomainError,
    EvaluationError,
    ResourceError,
    ValidationError,
    as_real_vector,
    check_half_open,
    check_open_interval,
    check_positive_int,
    max_degree,
)

log = logging.getLogger(__name__)

PARITIES = ("odd", "even", "none")
MAX_QUADRATURE_INTERVALS = 2**24
# above this many table entries the Fourier route is replaced by direct evaluation
FOURIER_TABLE_BUDGET = 5 * 10**7


@dataclass(frozen=True)
class ApproxConstants:
    """Constants governing degree and norm of the constructed approximants.

    ``C_sgn`` is the error multiplier of the sign approximation. The others
    were fixed by the calibration sweep in ``scripts/calibrate_constants.py``.
    """

    C_sgn: float = 5.0
    C_hat_sgn: float = 5.7
    C_tilde_sgn: float = 6.8
    C_ln: float = 1.0
    C_hat_ln: float = 1.3
    C_tilde_ln: float = 52.4

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value >= 1:
                raise ValidationError(f"constant {name} must be >= 1, got {value}")


CONSTANTS = ApproxConstants()


@dataclass(frozen=True, eq=False)
class ChebyshevPoly:
    """Real polynomial in the Chebyshev basis.

    ``coeffs[0]`` enters with weight one half. ``l1_norm`` is the plain
    sum of absolute coefficients.
    """

    coeffs: np.ndarray
    parity: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        c = as_real_vector("coeffs", self.coeffs).copy()
        if c.size == 0:
            c = np.zeros(1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.parity not in PARITIES:
            raise ValidationError(f"parity must be one of {PARITIES}, got {self.parity!r}")
        if self.parity == "odd" and np.any(c[0::2] != 0):
            raise ValidationError("odd polynomial has nonzero even-index coefficients")
        if self.parity == "even" and np.any(c[1::2] != 0):
            raise ValidationError("even polynomial has nonzero odd-index coefficients")
        object.__setattr__(self, "l1_norm", float(np.sum(np.abs(c))))

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        return eval_cheb(self, x)

    def lcu_weight(self) -> float:
        """Sum of LCU weights, counting the constant term with its one-half factor."""
        return float(abs(self.coeffs[0]) / 2 + np.sum(np.abs(self.coeffs[1:])))

    def to_numpy(self) -> np.polynomial.Chebyshev:
        c = self.coeffs.copy()
        c[0] /= 2
        return np.polynomial.Chebyshev(c)


@dataclass(frozen=True)
class FourierSeries:
    """``sum_m c_even[m] cos(pi x m) + c_odd[m] sin(pi x (m + 1/2))`` for m in -M..M."""

    c_even: np.ndarray
    c_odd: np.ndarray
    M: int
    delta: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.M == 0 and not np.any(self.c_even) and not np.any(self.c_odd):
            return out
        # fold +-m pairs so the sums stay short: cos is even in m; the odd
        # family pairs m with -m-1
        ce = self.c_even[self.M:].copy()
        ce[1:] += self.c_even[: self.M][::-1]
        co = self.c_odd[self.M:].copy()
        co[: self.M] -= self.c_odd[: self.M][::-1]
        freq_e = np.pi * np.arange(self.M + 1)
        freq_o = np.pi * (np.arange(self.M + 1) + 0.5)
        flat = x.ravel()
        for start in range(0, flat.size, 2048):
            chunk = flat[start : start + 2048, None]
            out.ravel()[start : start + 2048] = np.cos(chunk * freq_e) @ ce + np.sin(chunk * freq_o) @ co
        return out

    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.c_even)) + np.sum(np.abs(self.c_odd)))


@dataclass(frozen=True)
class ArcsinPowerTable:
    """Rows ``b[k]`` hold Taylor coefficients of ``(2 arcsin(y) / pi)**k`` up to ``y**L``.

    ``tail[k]`` is the mass of row ``k`` beyond index ``L``, obtained from the
    escape probability of the truncated walk rather than by subtraction.
    """

    b: np.ndarray
    tail: np.ndarray

    @property
    def K(self) -> int:
        return self.b.shape[0] - 1

    @property
    def L(self) -> int:
        return self.b.shape[1] - 1


@dataclass(frozen=True)
class SubStochasticMatrix:
    """Upper-triangular non-negative matrix with every row sum below one."""

    entries: np.ndarray
    bit_precision: int | None = None

    def __post_init__(self):
        b = np.array(self.entries, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
            raise ValidationError(f"entries must be a non-empty square matrix, got shape {b.shape}")
        if self.bit_precision is not None:
            scale = 2.0 ** check_positive_int("bit_precision", self.bit_precision)
            b = np.floor(b * scale) / scale
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise ValidationError("entries must be finite and non-negative")
        if np.any(np.tril(b, -1) != 0):
            raise ValidationError("matrix must be upper-triangular")
        if np.any(b.sum(axis=1) >= 1):
            raise ValidationError("every row sum must be strictly below 1")
        b.setflags(write=False)
        object.__setattr__(self, "entries", b)


# ---------------------------------------------------------------------------
# Chebyshev coefficients and evaluation


def _checked(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationError("function returned a non-finite value")
    return values


def chebyshev_coeff(f: Callable, k: int, m: int) -> float:
    """Single Chebyshev coefficient by the composite trapezium rule.

    Approximates ``(2/pi) int_{-pi}^{0} cos(k t) f(cos t) dt`` using ``m``
    equal intervals.
    """
    k = check_positive_int("k", k, minimum=0)
    m = check_positive_int("m", m, minimum=2)
    theta = np.pi * np.arange(m + 1) / m - np.pi
    vals = _checked(f(np.cos(theta))) * np.cos(k * theta)
    h = np.pi / m
    return float((2 / np.pi) * h * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def _trapezium_all(f: Callable, m: int) -> np.ndarray:
    # the trapezium sums for every k at once form a type-I DCT of the samples
    g = _checked(f(np.cos(np.pi * np.arange(m + 1) / m)))
    return sfft.dct(g, type=1) / m


def chebyshev_coeffs(f: Callable, n: int, eps: float, m: int | None = None) -> tuple[np.ndarray, int]:
    """First ``n`` coefficients, doubling ``m`` until consecutive estimates agree.

    Stops once successive estimates differ by less than ``eps / (10 n)``.
    Returns the coefficients and the interval count used.
    """
    n = check_positive_int("n", n)
    m = max(64, 2 * n) if m is None else check_positive_int("m", m, minimum=2)
    m = 1 << (m - 1).bit_length()
    if m > MAX_QUADRATURE_INTERVALS:
        raise ResourceError(f"{n} coefficients need more than {MAX_QUADRATURE_INTERVALS} quadrature intervals")
    prev = _trapezium_all(f, m)[:n]
    while True:
        if 2 * m > MAX_QUADRATURE_INTERVALS:
            log.debug("quadrature interval cap reached at m=%d", m)
            return prev, m
        cur = _trapezium_all(f, 2 * m)[:n]
        m *= 2
        if np.max(np.abs(cur - prev)) < eps / (10 * n):
            return cur, m
        prev = cur


def averaged_truncation(c, d: int, parity: str = "none", params: dict | None = None) -> ChebyshevPoly:
    """Mean of the truncations of degrees ``d .. 2d-1``.

    ``c`` must hold exactly ``2d`` coefficients ``c_0 .. c_{2d-1}``.
    """
    d = check_positive_int("d", d)
    c = as_real_vector("c", c)
    if c.size != 2 * d:
        raise ValidationError(f"expected {2 * d} coefficients for d={d}, got {c.size}")
    k = np.arange(2 * d)
    w = np.where(k <= d, 1.0, (2 * d - k) / d)
    chat = c * w
    if parity == "odd":
        chat[0::2] = 0.0
    elif parity == "even":
        chat[1::2] = 0.0
    return ChebyshevPoly(chat, parity, dict(params or {}, d=d))


def eval_cheb(P: ChebyshevPoly, x):
    """Clenshaw evaluation of ``P`` at points in ``[-1, 1]``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12) or not np.all(np.isfinite(x)):
        raise DomainError("evaluation points must lie in [-1, 1]")
    c = P.coeffs
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    two_x = 2 * x
    for ck in c[:0:-1]:
        b1, b2 = ck + two_x * b1 - b2, b1
    return c[0] / 2 + x * b1 - b2


def cheb_grid_values(P: ChebyshevPoly, n_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``P`` on the extremal Chebyshev grid ``cos(pi j / N)``.

    Uses one DCT, so it stays cheap for very high degree.
    """
    d = P.coeffs.size
    N = max(n_points or 0, 4 * d, 16)
    a = np.zeros(N + 1)
    a[0] = P.coeffs[0] / 2
    a[1:d] = P.coeffs[1:] / 2
    vals = sfft.dct(a, type=1)
    return np.cos(np.pi * np.arange(N + 1) / N), vals


@njit(cache=True)
def _clenshaw_points(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.size)
    for i in range(x.size):
        b1 = 0.0
        b2 = 0.0
        two_x = 2.0 * x[i]
        for k in range(c.size - 1, 0, -1):
            b1, b2 = c[k] + two_x * b1 - b2, b1
        out[i] = c[0] / 2 + x[i] * b1 - b2
    return out


def _refined_peak(c: np.ndarray, lo: float, hi: float, rounds: int = 3, points: int = 33) -> float:
    """Max ``|P|`` on ``[lo, hi]``, zooming in on the best sample each round."""
    best = 0.0
    for _ in range(rounds):
        x = np.linspace(lo, hi, points)
        v = np.abs(_clenshaw_points(c, x))
        j = int(np.argmax(v))
        best = max(best, float(v[j]))
        lo, hi = x[max(j - 1, 0)], x[min(j + 1, points - 1)]
    return best


def max_abs_on_grid(P: ChebyshevPoly, n_uniform: int = 10_000, candidates: int = 8) -> float:
    """Max ``|P|`` over a dense Chebyshev grid, refined between nodes near the largest values.

    A uniform grid of ``n_uniform`` points is added when that is cheap.
    """
    x, vals = cheb_grid_values(P)
    a = np.abs(vals)
    peak = float(np.max(a))
    c = np.ascontiguousarray(P.coeffs, dtype=float)
    # local maxima of |P| on the grid bracket the true maxima between their neighbours
    inner = np.flatnonzero((a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:])) + 1
    top = inner[np.argsort(a[inner])[-candidates:]] if inner.size else np.array([], dtype=int)
    for j in top:
        peak = max(peak, _refined_peak(c, x[j + 1], x[j - 1]))
    if P.coeffs.size * n_uniform <= 5 * 10**8:
        peak = max(peak, float(np.max(np.abs(eval_cheb(P, np.linspace(-1, 1, n_uniform))))))
    return peak


# ---------------------------------------------------------------------------
# Degree selection helpers


def _tail_degree(c: np.ndarray, tol: float) -> int:
    """Smallest ``d`` with ``sum_{k > d} |c_k| <= tol``."""
    tails = np.cumsum(np.abs(c[::-1]))[::-1]
    ok = np.flatnonzero(np.append(tails[1:], 0.0) <= tol)
    return int(ok[0]) if ok.size else c.size - 1


def _resolved_coeffs(f: Callable, guess: int, tol: float, limit: int) -> np.ndarray:
    """Coefficients computed far enough out that the neglected tail is below ``tol / 100``."""
    n = max(64, guess)
    while True:
        c, _ = chebyshev_coeffs(f, n, tol)
        tail = np.sum(np.abs(c[int(0.8 * n):]))
        if tail <= tol / 100 or n >= limit:
            return c
        n *= 2


def _budgeted_degree(d: int, cap: int | None, what: str) -> None:
    cap = max_degree(cap)
    if 2 * d - 1 > cap:
        raise ResourceError(f"{what} needs degree {2 * d - 1}, above the cap {cap}")


def _normalize(P: ChebyshevPoly) -> tuple[ChebyshevPoly, float]:
    peak = max_abs_on_grid(P)
    if peak <= 1:
        return P, 0.0
    return ChebyshevPoly(P.coeffs / peak, P.parity, P.params), peak - 1


# ---------------------------------------------------------------------------
# Specific approximants


def erf_kappa(delta: float, eps: float) -> float:
    """Steepness for which ``erf(kappa x)`` is ``eps``-close to sgn outside ``[-delta, delta]``."""
    return (2 / delta) * math.sqrt(math.log(math.sqrt(2) / (math.sqrt(math.pi) * eps)))


def bounded_poly(f: Callable, d: int, eps: float, parity: str = "none", params=None) -> ChebyshevPoly:
    """Degree ``2d-1`` averaged truncation of a bounded function."""
    d = check_positive_int("d", d)
    c, m = chebyshev_coeffs(f, 2 * d, eps)
    return averaged_truncation(c, d, parity, dict(params or {}, m=m))


def erf_poly(kappa: float, eps: float, cap: int | None = None) -> ChebyshevPoly:
    """Odd averaged truncation of ``erf(kappa x)`` accurate to ``eps``."""
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    f = lambda x: special.erf(kappa * x)  # noqa: E731
    guess = int(2 * kappa * math.sqrt(max(math.log(1 / eps), 1.0))) + 16
    c = _resolved_coeffs(f, 2 * guess, eps, 8 * max_degree(cap) + 64)
    d = max(_tail_degree(c, eps), 1)
    _budgeted_degree(d, cap, "erf approximation")
    if c.size < 2 * d:
        c = np.pad(c, (0, 2 * d - c.size))
    return averaged_truncation(c[: 2 * d], d, "odd", {"kind": "erf_scaled", "kappa": kappa, "eps": eps})


def sign_poly(delta: float, eps: float, cap: int | None = None) -> ChebyshevPoly:
    """Odd bounded approximation of sgn, within ``5 eps`` outside ``[-delta, delta]``.

    Built from the averaged truncation of ``erf(kappa x)``, with the degree
    chosen so that the dropped Chebyshev tail is at most ``eps``, then
    rescaled if the grid maximum exceeds one.
    """
    delta = check_open_interval("delta", delta, 0, 1)
    eps = check_open_interval("eps", eps, 0, 0.5)
    kappa = erf_kappa(delta, eps)
    P = erf_poly(kappa, eps, cap)
    P, overshoot = _normalize(P)
    params = dict(P.params, kind="sign", delta=delta, eps=eps, kappa=kappa, overshoot=overshoot)
    return ChebyshevPoly(P.coeffs, "odd", params)


def rectangle_window(x0: float, r: float, delta: float, B: float, eps: float) -> Callable:
    """Smooth indicator of ``[x0 - r, x0 + r]`` built from two error functions."""
    kappa = (8 / delta) * math.sqrt(math.log(math.sqrt(18) * B / (math.sqrt(math.pi) * eps)))
    edge = r + delta / 4

    def R(x):
        return 0.5 * (special.erf(kappa * (x - x0 + edge)) - special.erf(kappa * (x - x0 - edge)))

    R.kappa = kappa
    return R


def arcsin_power_table(K: int, L: int) -> ArcsinPowerTable:
    """Coefficient rows ``b[k][l]`` for ``k = 0..K`` and ``l = 0..L``.

    Row 0 is the unit vector at ``l = 0``; row 1 comes from the arcsin series;
    later rows are truncated convolutions with row 1.
    """
    K = check_positive_int("K", K)
    L = check_positive_int("L", L)
    b1 = _arcsin_row(L)
    table = np.zeros((K + 1, L + 1))
    table[0, 0] = 1.0
    table[1] = b1
    for k in range(2, K + 1):
        table[k] = _truncated_conv(table[k - 1], b1)
    # escape mass: a step from l that overshoots L leaves the table
    below = np.concatenate(([0.0], np.cumsum(b1)))  # below[j] = sum_{i<j} b1_i
    b1_complement = 1.0 - below[L + 1 - np.arange(L + 1)]
    tail = np.zeros(K + 1)
    tail[1] = 1.0 - below[L + 1]
    for k in range(2, K + 1):
        tail[k] = tail[k - 1] + table[k - 1] @ b1_complement
    return ArcsinPowerTable(table, tail)


def _arcsin_row(L: int) -> np.ndarray:
    b1 = np.zeros(L + 1)
    n = np.arange((L - 1) // 2 + 1)
    l = 2 * n + 1
    # C(2n, n) 4^-n / (2n + 1), evaluated in log space
    logt = special.gammaln(2 * n + 1) - 2 * special.gammaln(n + 1) - 2 * n * math.log(2) - np.log(l)
    b1[l] = np.exp(logt) * 2 / np.pi
    return b1


def _truncated_conv(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = signal.fftconvolve(u, v)[: u.size]
    out[np.abs(out) < 1e-300] = 0.0
    return np.maximum(out, 0.0) if np.all(u >= 0) and np.all(v >= 0) else out


def substochastic_power(
    B: SubStochasticMatrix,
    k: int,
    s: int,
    t: int,
    mode: str = "exact",
    samples: int = 10**6,
    seed: int = 0,
) -> float:
    """Entry ``B^k[s, t]`` with 1-based indices.

    ``mode="walk"`` runs ``samples`` independent ``k``-step walks on the chain
    augmented with an absorbing state and returns the fraction ending at ``t``.
    """
    if not isinstance(B, SubStochasticMatrix):
        B = SubStochasticMatrix(B)
    l = B.entries.shape[0]
    k = check_positive_int("k", k)
    s = check_positive_int("s", s)
    t = check_positive_int("t", t)
    if s > l or t > l:
        raise ValidationError(f"indices must lie in 1..{l}")
    if mode == "exact":
        row = np.zeros(l)
        row[s - 1] = 1.0
        for _ in range(k):
            row = row @ B.entries
        return float(row[t - 1])
    if mode != "walk":
        raise ValidationError(f"mode must be 'exact' or 'walk', got {mode!r}")
    samples = check_positive_int("samples", samples)
    aug = np.zeros((l + 1, l + 1))
    aug[:l, :l] = B.entries
    aug[:l, l] = 1.0 - B.entries.sum(axis=1)
    aug[l, l] = 1.0
    cum = np.cumsum(aug, axis=1)
    cum[:, -1] = 1.0
    rng = np.random.Generator(np.random.Philox(seed))
    state = np.full(samples, s - 1)
    for _ in range(k):
        u = rng.random(samples)
        state = np.minimum((u[:, None] >= cum[state]).sum(axis=1), l)
    return float(np.mean(state == t - 1))


def _walk_weights(a: np.ndarray, L: int, samples: int, seed: int) -> np.ndarray:
    """Estimate ``w_l = sum_k a_k b^(k)_l`` from random walks with arcsin-row steps."""
    b1 = _arcsin_row(L)
    p = np.append(b1, max(0.0, 1.0 - b1.sum()))
    p /= p.sum()
    rng = np.random.Generator(np.random.Philox(seed))
    pos = np.zeros(samples, dtype=np.int64)
    w = np.zeros(L + 1)
    w[0] += a[0]
    for k in range(1, a.size):
        step = rng.choice(L + 2, size=samples, p=p)
        alive = pos <= L
        pos = np.where(alive & (step <= L), pos + step, L + 1)
        counts = np.bincount(pos[pos <= L], minlength=L + 1)[: L + 1]
        w += a[k] * counts / samples
    return w


def fourier_low_weight(
    a,
    delta: float,
    eps: float,
    parity: str = "none",
    mode: str = "exact",
    samples: int = 10**5,
    seed: int = 0,
) -> FourierSeries:
    """Low-weight Fourier series for ``sum_k a_k x^k`` on ``[-1 + delta, 1 - delta]``."""
    a = as_real_vector("a", a)
    delta = check_open_interval("delta", delta, 0, 1)
    eps = check_open_interval("eps", eps, 0, 1)
    if parity not in PARITIES:
        raise ValidationError(f"parity must be one of {PARITIES}")
    idx = np.arange(a.size)
    if parity == "odd" and np.any(a[idx % 2 == 0] != 0):
        raise ValidationError("odd parity declared but even-power coefficients are nonzero")
    if parity == "even" and np.any(a[idx % 2 == 1] != 0):
        raise ValidationError("even parity declared but odd-power coefficients are nonzero")
    norm = float(np.sum(np.abs(a)))
    if norm < eps / 2:
        return FourierSeries(np.zeros(1), np.zeros(1), 0, delta)
    logterm = math.log(4 * norm / eps)
    M = max(2 * math.ceil(logterm / delta), 0)
    L = math.ceil(logterm / delta**2)
    if (a.size + M) * L > FOURIER_TABLE_BUDGET:
        raise ResourceError(f"Fourier table with K={a.size - 1}, L={L}, M={M} exceeds the budget")
    if mode == "exact":
        b1 = _arcsin_row(L)
        w = np.zeros(L + 1)
        for ak in a[::-1]:  # Horner in the convolution algebra
            w = _truncated_conv(w, b1) if np.any(w) else w
            w[0] += ak
    elif mode == "walk":
        w = _walk_weights(a, L, check_positive_int("samples", samples), seed)
    else:
        raise ValidationError(f"mode must be 'exact' or 'walk', got {mode!r}")
    m = np.arange(-M, M + 1)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    lhat_e = np.arange(0, L // 2 + 1)
    lhat_o = np.arange(0, (L - 1) // 2 + 1)
    pe = stats.binom.pmf(m[None, :] + lhat_e[:, None], 2 * lhat_e[:, None], 0.5)
    c_even = sign * (w[2 * lhat_e] @ pe)
    po = stats.binom.pmf(m[None, :] + lhat_o[:, None] + 1, 2 * lhat_o[:, None] + 1, 0.5)
    c_odd = sign * (w[2 * lhat_o + 1] @ po)
    return FourierSeries(c_even, c_odd, M, delta)


def piecewise_smooth_poly(
    a,
    x0: float,
    r: float,
    delta: float,
    B: float,
    eps: float,
    *,
    evaluator: Callable | None = None,
    route: str = "auto",
    mode: str = "exact",
    seed: int = 0,
    cap: int | None = None,
) -> ChebyshevPoly:
    """Bounded approximation of a function known through its Taylor series at ``x0``.

    The result is close to ``f`` on ``[x0 - r, x0 + r]``, bounded by about
    ``B`` everywhere and close to zero outside ``[x0 - r - delta/2, x0 + r + delta/2]``.

    ``route="fourier"`` builds the low-weight Fourier series of the rescaled
    Taylor polynomial. ``route="direct"`` evaluates ``evaluator`` (or the
    truncated Taylor series) clamped to the disc of convergence instead.
    ``"auto"`` uses the Fourier route when its table fits the budget.
    """
    a = as_real_vector("a", a)
    x0 = float(x0)
    if not -1 <= x0 <= 1:
        raise ValidationError(f"x0 must lie in [-1, 1], got {x0}")
    r = check_half_open("r", r, 0, 2)
    delta = check_half_open("delta", delta, 0, r)
    if not B > 0:
        raise ValidationError(f"B must be positive, got {B}")
    eps = check_half_open("eps", eps, 0, 1 / (2 * B))
    rho = r + delta
    b = a * rho ** np.arange(a.size)
    if np.sum(np.abs(b)) > B * (1 + 1e-9):
        raise ValidationError("Taylor coefficients violate sum (r+delta)^l |a_l| <= B")
    dprime = delta / (2 * rho)
    J = math.ceil(math.log(12 * B / eps) / dprime)
    bt = b[:J]
    parity = _parity_of(bt)
    logterm = math.log(4 * max(np.sum(np.abs(bt)), 1e-300) / (eps / 3))
    table_size = (J + 2 * math.ceil(logterm / dprime)) * math.ceil(logterm / dprime**2)
    if route == "auto":
        route = "fourier" if table_size <= FOURIER_TABLE_BUDGET else "direct"
    if route == "fourier":
        series = fourier_low_weight(bt, dprime, eps / 3, parity, mode=mode, seed=seed)
        inner = lambda x: series((x - x0) / rho)  # noqa: E731
    elif route == "direct":
        lo, hi = x0 - rho, x0 + rho
        if evaluator is None:
            poly = np.polynomial.Polynomial(bt)
            inner = lambda x: poly(np.clip((x - x0) / rho, -1, 1))  # noqa: E731
        else:
            inner = lambda x: evaluator(np.clip(x, lo, hi))  # noqa: E731
        series = None
    else:
        raise ValidationError(f"route must be 'auto', 'fourier' or 'direct', got {route!r}")
    R = rectangle_window(x0, r, delta, B, eps)
    h = lambda x: inner(x) * R(x)  # noqa: E731
    guess = int(2 * R.kappa * math.sqrt(max(math.log(B / eps), 1.0))) + 16
    c = _resolved_coeffs(h, 2 * guess, eps, 8 * max_degree(cap) + 64)
    d = max(_tail_degree(c, eps), 1)
    _budgeted_degree(d, cap, "piecewise-smooth approximation")
    if c.size < 2 * d:
        c = np.pad(c, (0, 2 * d - c.size))
    params = {
        "kind": "piecewise_smooth",
        "x0": x0,
        "r": r,
        "delta": delta,
        "B": B,
        "eps": eps,
        "route": route,
        "J": J,
        "kappa": R.kappa,
        "fourier_M": series.M if series is not None else None,
    }
    return averaged_truncation(c[: 2 * d], d, "none", params)


def _parity_of(v: np.ndarray) -> str:
    idx = np.arange(v.size)
    if not np.any(v[idx % 2 == 0]):
        return "odd"
    if not np.any(v[idx % 2 == 1]):
        return "even"
    return "none"


def log_target(beta: float) -> Callable:
    """``ln(1/x) / (2 ln(2/beta))``."""
    scale = 1 / (2 * math.log(2 / beta))
    return lambda x: -np.log(x) * scale


def log_poly(beta: float, eps: float, cap: int | None = None, route: str = "auto") -> ChebyshevPoly:
    """Even approximation of ``ln(1/x) / (2 ln(2/beta))`` on ``[beta, 1]``, bounded by one."""
    beta = check_half_open("beta", beta, 0, 1)
    eps = check_open_interval("eps", eps, 0, 0.5)
    if beta == 1:
        # the target vanishes identically on [1, 1]
        return ChebyshevPoly(np.zeros(1), "even", {"kind": "log", "beta": beta, "eps": eps})
    J_guess = math.ceil(4 * math.log(12 / eps) / beta) + 8
    l = np.arange(1, J_guess + 1)
    a = np.concatenate(([0.0], (-1.0) ** l / l)) / (2 * math.log(2 / beta))
    # drop terms that underflow against (r + delta)^l; they do not affect B
    Pt = piecewise_smooth_poly(
        a, 1.0, 1 - beta, beta / 2, 0.5, eps / 2, evaluator=log_target(beta), route=route, cap=cap
    )
    c = Pt.coeffs.copy()
    c[1::2] = 0.0
    c *= 2
    sym = ChebyshevPoly(c, "even", Pt.params)
    peak = max_abs_on_grid(sym)
    eta = max(peak - 1, 0.0)
    params = dict(Pt.params, kind="log", beta=beta, eps=eps, eta=eta)
    return ChebyshevPoly(c / (1 + eta), "even", params)


# ---------------------------------------------------------------------------
# Target-function specifications (JSON facing)

_SAFE_NAMES = {
    "x": None,
    "pi": np.pi,
    "e": np.e,
    **{n: getattr(np, n) for n in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "arcsin", "arctan", "sign", "where", "zeros_like", "ones_like")},
    "erf": special.erf,
}


def parse_expression(expr: str) -> Callable:
    """Turn an arithmetic expression in ``x`` into a vectorized evaluator."""
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in _SAFE_NAMES:
            raise ValidationError(f"unknown name {node.id!r} in expression")
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda, ast.comprehension)):
            raise ValidationError("expression may only use arithmetic and whitelisted functions")
    code = compile(tree, "<expr>", "eval")

    def f(x):
        env = dict(_SAFE_NAMES, x=x)
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - names whitelisted above
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy()

    return f


@dataclass(frozen=True)
class TargetFunction:
    """A function to approximate plus its precision, as read from a JSON spec."""

    kind: str
    eps: float
    params: dict = field(default_factory=dict)

    KINDS = ("sign", "log", "normalized_log", "erf_scaled", "bounded_custom", "custom", "piecewise_smooth")

    @classmethod
    def from_dict(cls, spec: dict) -> "TargetFunction":
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValidationError("function spec must be an object with a 'kind' field")
        kind = spec["kind"]
        if kind not in cls.KINDS:
            raise ValidationError(f"unknown kind {kind!r}; expected one of {cls.KINDS}")
        if "eps" not in spec:
            raise ValidationError("function spec needs 'eps'")
        eps = check_open_interval("eps", spec["eps"], 0, 0.5)
        params = {k: v for k, v in spec.items() if k not in ("kind", "eps")}
        return cls(kind, eps, params)

    def build(self, cap: int | None = None) -> ChebyshevPoly:
        p = self.params
        try:
            if self.kind == "sign":
                return sign_poly(p["delta"], self.eps, cap)
            if self.kind in ("log", "normalized_log"):
                return log_poly(p["beta"], self.eps, cap)
            if self.kind == "erf_scaled":
                return erf_poly(float(p["kappa"]), self.eps, cap)
            if self.kind in ("bounded_custom", "custom"):
                f = parse_expression(str(p["expr"]))
                d = check_positive_int("d", p["d"])
                _budgeted_degree(d, cap, "custom approximation")
                return bounded_poly(f, d, self.eps, p.get("parity", "none"), {"kind": "custom", "expr": p["expr"]})
            return piecewise_smooth_poly(
                p["taylor"], p["x0"], p["r"], p["delta"], p["B"], self.eps, cap=cap
            )
        except KeyError as exc:
            raise ValidationError(f"spec of kind {self.kind!r} is missing field {exc.args[0]!r}") from exc

    def evaluator(self) -> Callable:
        """Exact target used by the error reports."""
        p = self.params
        if self.kind == "sign":
            return np.sign
        if self.kind in ("log", "normalized_log"):
            return log_target(p["beta"])
        if self.kind == "erf_scaled":
            return lambda x: special.erf(float(p["kappa"]) * x)
        if self.kind in ("bounded_custom", "custom"):
            return parse_expression(str(p["expr"]))
        taylor = np.polynomial.Polynomial(p["taylor"])
        return lambda x: taylor(np.asarray(x) - p["x0"])

    def interval(self) -> Callable:
        """Mask function selecting the points where the approximation guarantee applies."""
        p = self.params
        if self.kind == "sign":
            return lambda x: np.abs(x) >= p["delta"]
        if self.kind in ("log", "normalized_log"):
            return lambda x: x >= p["beta"]
        if self.kind == "piecewise_smooth":
            return lambda x: np.abs(x - p["x0"]) <= p["r"]
        return lambda x: np.ones_like(x, dtype=bool)
