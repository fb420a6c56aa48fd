"""Quadrature: Gauss rules, log-singular panel rules, Filon-Legendre
oscillatory integration, and an adaptive Gauss-Kronrod reference integrator.

Oscillatory integrals of the form

    I = int_{c1}^{c2} exp(i k t) f(t) dt

are evaluated by expanding f on the interval in Legendre polynomials and
integrating each term in closed form,

    int_{-1}^{1} P_n(x) exp(i w x) dx = 2 i^n j_n(w),

with j_n the spherical Bessel function (j_n(w) = sqrt(pi/2w) J_{n+1/2}(w)).
Writing the factor through j_n avoids the sqrt(2 pi/w) overflow as w -> 0.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import AccuracyFailure, InvalidArgument, NumericDomainError
from .specfun import spherical_jn_table

COEFF_RTOL = 1e-14
MAX_TERMS = 200


# ---------------------------------------------------------------------------
# Gauss-Legendre
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def on_interval(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


def _legendre_and_derivative(n: int, x: np.ndarray):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    if n == 0:
        return p0, np.zeros_like(x)
    return p1, n * (x * p1 - p0) / (x * x - 1.0)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> GaussRule:
    """n-point Gauss-Legendre rule on (-1, 1).

    Newton iteration on the three-term recurrence; numpy's leggauss loses
    about 1e-9 relative accuracy in the weights beyond a few hundred nodes.
    """
    if n < 1:
        raise InvalidArgument(f"Gauss order must be positive, got {n}")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = x[::-1].copy(), w[::-1].copy()
    if n % 2 == 1:
        x[n // 2] = 0.0
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussRule(n, x, w)


def legendre_table(nmax: int, x: np.ndarray) -> np.ndarray:
    """P_0..P_nmax at x, shape (nmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for n in range(1, nmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


# ---------------------------------------------------------------------------
# Log-singular rule on (0, 1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogRule:
    """Rule on (0,1) exact for p(x) + q(x) ln(x), deg p, q <= order - 1."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _shifted_legendre_moments(n: int) -> tuple[np.ndarray, np.ndarray]:
    plain, logm = [], []
    for j in range(n):
        coeffs = [(-1) ** (j + m) * math.comb(j, m) * math.comb(j + m, m) for m in range(j + 1)]
        plain.append(float(sum(Fraction(c, m + 1) for m, c in enumerate(coeffs))))
        logm.append(float(sum(Fraction(-c, (m + 1) ** 2) for m, c in enumerate(coeffs))))
    return np.array(plain), np.array(logm)


def _shifted_legendre_with_derivative(n: int, x: np.ndarray):
    t = 2.0 * x - 1.0
    p = np.zeros((n, x.size))
    dp = np.zeros((n, x.size))
    p[0] = 1.0
    if n > 1:
        p[1] = t
        dp[1] = 2.0
    for j in range(1, n - 1):
        p[j + 1] = ((2 * j + 1) * t * p[j] - j * p[j - 1]) / (j + 1)
        dp[j + 1] = ((2 * j + 1) * (2.0 * p[j] + t * dp[j]) - j * dp[j - 1]) / (j + 1)
    return p, dp


@lru_cache(maxsize=None)
def log_singular_panel_rule(order: int) -> LogRule:
    """Generalized Gaussian rule with ``order`` nodes for p + q ln x on (0,1).

    Nodes and weights solve the 2n moment equations by Newton's method,
    started from Gauss-Legendre nodes graded quadratically toward 0. The
    iteration is reliable up to order 10; higher orders are rejected.
    """
    n = int(order)
    if n < 2 or n > 10:
        raise InvalidArgument(f"log-singular rule order must be in [2, 10], got {order}")
    plain, logm = _shifted_legendre_moments(n)
    g = gauss_legendre(n)
    u = 0.5 * (g.nodes + 1.0)
    z = np.concatenate([u * u, g.weights * u])
    for _ in range(200):
        x, w = z[:n], z[n:]
        p, dp = _shifted_legendre_with_derivative(n, x)
        lx = np.log(x)
        resid = np.concatenate([p @ w - plain, (p * lx) @ w - logm])
        if np.max(np.abs(resid)) < 4e-16:
            break
        jac = np.zeros((2 * n, 2 * n))
        jac[:n, :n] = dp * w
        jac[:n, n:] = p
        jac[n:, :n] = (dp * lx + p / x) * w
        jac[n:, n:] = p * lx
        step = np.linalg.solve(jac, -resid)
        lam = 1.0
        while True:
            trial = z + lam * step
            if np.all(trial[:n] > 0) and np.all(trial[:n] < 1) and np.all(trial[n:] > 0):
                break
            lam *= 0.5
        z = trial
    else:  # pragma: no cover - guarded by the order range
        raise AccuracyFailure(f"log rule of order {n} did not converge")
    order_idx = np.argsort(z[:n])
    nodes = z[:n][order_idx].copy()
    weights = z[n:][order_idx].copy()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return LogRule(n, nodes, weights)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod reference integrator
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_KX = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * _KX), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError(f"integrand not finite on [{a}, {b}]")
    k = half * float(vals @ _KW)
    g = half * float(vals @ _GW)
    return k, abs(k - g)


def adaptive_oracle(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-12,
    singular: str | None = None,
    max_depth: int = 60,
    full_output: bool = False,
):
    """Globally adaptive bisection with G7/K15 error estimates.

    ``f`` must accept an array. ``singular`` declares an integrable endpoint
    singularity ("left", "right" or "both"); it is weakened by the
    substitution t = a + (b-a) u^2 (mirrored for the right end, smoothstep
    for both) before integrating.
    """
    if not b > a:
        raise InvalidArgument("need a < b")
    g = f
    lo, hi = a, b
    if singular == "left":
        width = b - a
        g = lambda u: f(a + width * u * u) * (2.0 * width * u)
        lo, hi = 0.0, 1.0
    elif singular == "right":
        width = b - a
        g = lambda u: f(b - width * u * u) * (2.0 * width * u)
        lo, hi = 0.0, 1.0
    elif singular == "both":
        width = b - a
        g = lambda u: f(a + width * u * u * (3.0 - 2.0 * u)) * (6.0 * width * u * (1.0 - u))
        lo, hi = 0.0, 1.0
    elif singular is not None:
        raise InvalidArgument(f"unknown singular endpoint spec {singular!r}")

    value, err = _gk15(g, lo, hi)
    heap = [(-err, lo, hi, value, err, 0)]
    total_v, total_e = value, err
    for _ in range(100000):
        if total_e <= tol:
            break
        neg, x0, x1, v, e, depth = heapq.heappop(heap)
        if depth >= max_depth:
            raise AccuracyFailure(
                f"adaptive quadrature exceeded depth {max_depth}", best_estimate=total_v, error=total_e
            )
        xm = 0.5 * (x0 + x1)
        v1, e1 = _gk15(g, x0, xm)
        v2, e2 = _gk15(g, xm, x1)
        total_v += v1 + v2 - v
        total_e += e1 + e2 - e
        heapq.heappush(heap, (-e1, x0, xm, v1, e1, depth + 1))
        heapq.heappush(heap, (-e2, xm, x1, v2, e2, depth + 1))
    else:
        raise AccuracyFailure("adaptive quadrature interval budget exhausted", total_v, total_e)
    # resum to shed accumulated rounding from the running updates
    total_v = math.fsum(item[3] for item in heap)
    if full_output:
        return total_v, total_e
    return total_v


# ---------------------------------------------------------------------------
# Legendre expansions and Filon plans
# ---------------------------------------------------------------------------


def legendre_coefficients(
    f: Callable[[np.ndarray], np.ndarray],
    c1: float,
    c2: float,
    count: int,
    sqrt_endpoint: bool = False,
    quad_order: int | None = None,
    with_noise: bool = False,
):
    """a_0..a_{count-1} of f(g(x)) = sum a_n P_n(x), g mapping (-1,1) to (c1,c2).

    With ``sqrt_endpoint`` the projection integrals are taken in u with
    x = 2u^2 - 1, which turns a square-root branch point of f at c1 into an
    analytic integrand.
    """
    if count < 1:
        raise InvalidArgument("need at least one coefficient")
    nq = quad_order or (2 * count + 40)
    rule = gauss_legendre(nq)
    if sqrt_endpoint:
        u, wu = rule.on_interval(0.0, 1.0)
        x = 2.0 * u * u - 1.0
        w = 4.0 * u * wu
    else:
        x, w = rule.nodes, rule.weights
    t = (x + 1.0) * (0.5 * (c2 - c1)) + c1
    vals = np.asarray(f(t), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("function not finite at a quadrature node")
    p = legendre_table(count - 1, x)
    scale = (2.0 * np.arange(count) + 1.0) / 2.0
    coeffs = scale * (p @ (w * vals))
    if with_noise:
        # rounding floor of each projection sum
        noise = 4.0 * np.finfo(float).eps * scale * (np.abs(p) @ np.abs(w * vals))
        return coeffs, noise
    return coeffs


@dataclass(frozen=True)
class FilonPlan:
    """Precomputed Legendre expansion of f on (c1, c2).

    ``converged`` is True when the coefficients fell below COEFF_RTOL of the
    largest one before the term cap; otherwise (square-root endpoint
    behaviour) the series is cut where the spherical Bessel factors make the
    remaining terms negligible for the wavenumbers it is used with.
    ``integrated_by_parts`` marks plans for the arccosh expansion used on
    intervals touching t = 1.
    """

    c1: float
    c2: float
    coeffs: np.ndarray
    converged: bool
    integrated_by_parts: bool = False
    label: str = ""

    @property
    def terms(self) -> int:
        return int(self.coeffs.size)

    @classmethod
    def build(
        cls,
        f: Callable[[np.ndarray], np.ndarray],
        c1: float,
        c2: float,
        max_terms: int = MAX_TERMS,
        sqrt_endpoint: bool = False,
        integrated_by_parts: bool = False,
        label: str = "",
    ) -> "FilonPlan":
        if not c2 > c1:
            raise InvalidArgument(f"need c1 < c2, got ({c1}, {c2})")
        a, noise = legendre_coefficients(f, c1, c2, max_terms, sqrt_endpoint=sqrt_endpoint, with_noise=True)
        peak = np.max(np.abs(a))
        small = np.abs(a) <= np.maximum(COEFF_RTOL * peak, noise)
        cut = None
        for n in range(1, a.size):
            if small[n] and small[n - 1]:
                cut = n + 1
                break
        if cut is None:
            coeffs, converged = a, False
        else:
            coeffs, converged = a[:cut], True
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        return cls(float(c1), float(c2), coeffs, converged, integrated_by_parts, label)

    def reconstruct(self, t: np.ndarray) -> np.ndarray:
        x = (2.0 * np.asarray(t, dtype=float) - self.c1 - self.c2) / (self.c2 - self.c1)
        return self.coeffs @ legendre_table(self.terms - 1, x)


@dataclass(frozen=True)
class OscillatoryIntegralResult:
    value: float
    error: float
    terms: int


def _inverse_sqrt(t):
    return 1.0 / np.sqrt((t - 1.0) * (t + 1.0))


def _arccosh(t):
    return np.arccosh(np.maximum(t, 1.0))


_plan_cache: dict[tuple, FilonPlan] = {}
_plan_lock = threading.Lock()


def _cached_plan(kind: str, c1: float, c2: float, max_terms: int = MAX_TERMS) -> FilonPlan:
    key = (kind, round(c1, 12), round(c2, 12), max_terms)
    plan = _plan_cache.get(key)
    if plan is None:
        if kind == "inverse_sqrt":
            plan = FilonPlan.build(_inverse_sqrt, c1, c2, max_terms, label=kind)
        elif kind == "arccosh":
            plan = FilonPlan.build(
                _arccosh, c1, c2, max_terms, sqrt_endpoint=(c1 == 1.0), integrated_by_parts=True, label=kind
            )
        else:  # pragma: no cover - internal
            raise InvalidArgument(kind)
        with _plan_lock:
            _plan_cache[key] = plan
    return plan


def mehler_sonine_plan(c1: float, c2: float) -> FilonPlan:
    """Cached plan for f(t) = 1/sqrt(t^2 - 1) on (c1, c2), c1 > 1."""
    if not c1 > 1.0:
        raise InvalidArgument("the 1/sqrt(t^2-1) expansion needs c1 > 1")
    return _cached_plan("inverse_sqrt", float(c1), float(c2))


def _filon_sum(plan: FilonPlan, k: np.ndarray, extra: int = 0):
    """Complex int_{c1}^{c2} exp(i k t) f(t) dt for an array of k >= 0.

    Returns (values, error_bound).
    """
    k = np.asarray(k, dtype=float)
    half = 0.5 * (plan.c2 - plan.c1)
    kp = k * half
    m = plan.terms
    jn = spherical_jn_table(m - 1 + extra, kp)
    phase_n = (1j) ** (np.arange(m) % 4)
    terms = (plan.coeffs * phase_n)[:, None] * (2.0 * jn[:m].reshape(m, -1))
    series = terms.sum(axis=0).reshape(k.shape)
    values = half * np.exp(1j * (kp + k * plan.c1)) * series
    absterm = np.abs(terms).sum(axis=0).reshape(k.shape)
    tail_a = float(np.max(np.abs(plan.coeffs[-2:])))
    if extra:
        tail_j = np.abs(jn[m:]).reshape(extra, -1).sum(axis=0).reshape(k.shape) * 2.0
    else:
        tail_j = 2.0
    err = half * (10.0 * tail_a * tail_j + 64.0 * np.finfo(float).eps * absterm)
    return values, err


def oscillatory_integral(plan: FilonPlan, k: float) -> OscillatoryIntegralResult:
    """Re int_{c1}^{c2} exp(i k t) f(t) dt for the function behind ``plan``."""
    if not (np.isfinite(k) and k >= 0):
        raise InvalidArgument(f"wavenumber must be finite and non-negative, got {k}")
    kp = 0.5 * k * (plan.c2 - plan.c1)
    if not plan.converged and plan.terms < kp + 60:
        raise InvalidArgument("plan has too few terms for this wavenumber; rebuild with more terms")
    vals, err = _filon_sum(plan, np.array([k]), extra=50)
    return OscillatoryIntegralResult(float(vals[0].real), float(err[0]), plan.terms)


def _endpoint_terms(kp_max: float) -> int:
    return max(MAX_TERMS, 100 * int(math.ceil((kp_max + 60.0) / 100.0)))


def _endpoint_integral(c1: float, c2: float, k: np.ndarray) -> np.ndarray:
    """int_{c1}^{c2} cos(k t)/sqrt(t^2-1) dt by parts, vectorized over k."""
    k = np.asarray(k, dtype=float)
    kp_max = 0.5 * float(np.max(k, initial=0.0)) * (c2 - c1)
    plan = _cached_plan("arccosh", c1, c2, _endpoint_terms(kp_max))
    vals, _ = _filon_sum(plan, k)
    boundary = np.cos(k * c2) * math.acosh(c2) - np.cos(k * c1) * math.acosh(c1)
    return boundary + k * vals.imag


def endpoint_singular_integral(c1: float, c2: float, k: float) -> float:
    """int_{c1}^{c2} cos(k t)/sqrt(t^2 - 1) dt for 1 <= c1 < c2 <= 2.

    Integration by parts moves the derivative onto arccosh(t), which is
    bounded at t = 1, and the remaining sin(k t) arccosh(t) integral goes
    through the Legendre expansion.
    """
    if c1 < 1.0:
        raise InvalidArgument(f"lower limit must be >= 1, got {c1}")
    if not c1 < c2 <= 2.0:
        raise InvalidArgument(f"need c1 < c2 <= 2, got ({c1}, {c2})")
    if not (np.isfinite(k) and k >= 0):
        raise InvalidArgument(f"wavenumber must be finite and non-negative, got {k}")
    return float(_endpoint_integral(float(c1), float(c2), np.array([k]))[0])


SPLIT_POINT = 2.0


def tail_panels(upper: float) -> list[tuple[float, float]]:
    """Doubling panels covering (2, upper)."""
    panels = []
    lo = SPLIT_POINT
    while lo < upper:
        hi = min(2.0 * lo, upper)
        if upper - hi < 0.25 * lo:
            hi = upper
        panels.append((lo, hi))
        lo = hi
    return panels


def mehler_sonine_tail(r, k: float, alpha: float):
    """int_1^{alpha/k} cos(k r t)/sqrt(t^2 - 1) dt, vectorized over r >= 0.

    (1, min(2, alpha/k)) goes through the integration-by-parts branch; the
    rest of the range is covered by Filon plans on doubling panels so each
    Legendre expansion converges in a few dozen terms.
    """
    if not (k > 0 and alpha > k):
        raise InvalidArgument(f"need 0 < k < alpha, got k={k}, alpha={alpha}")
    r_in = r
    r = np.atleast_1d(np.asarray(r, dtype=float))
    w = k * np.abs(r)
    upper = alpha / k
    total = _endpoint_integral(1.0, min(SPLIT_POINT, upper), w)
    if upper > SPLIT_POINT:
        for lo, hi in tail_panels(upper):
            vals, _ = _filon_sum(mehler_sonine_plan(lo, hi), w)
            total = total + vals.real
    if np.ndim(r_in) == 0:
        return float(total[0])
    return total.reshape(np.shape(r_in))
