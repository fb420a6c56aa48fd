"""Unfiltered and spectrally filtered 2D Green's functions.

Conventions: g = -(i/4) H0^(2)(k r) (time factor exp(+i w t)) and
g0 = -ln(r)/(2 pi). The filtered families remove the part of the radial
spectrum above the cutoff alpha, which also removes the log singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument, SingularityError
from .quadrature import gauss_legendre, mehler_sonine_tail
from .specfun import EULER_GAMMA, _hankel_coefficients, helmholtz_regular_part, j0, j0y0

TWO_PI = 2.0 * math.pi
FAMILIES = ("static", "dynamic", "static-filtered", "fourier-filtered", "ms-filtered")
_ALIASES = {
    "static-unfiltered": "static",
    "dynamic-unfiltered": "dynamic",
    "eq7": "static-filtered",
    "dynamic-fourier-filtered": "fourier-filtered",
    "eq8": "fourier-filtered",
    "dynamic-ms-filtered": "ms-filtered",
    "dynamic-mehler-sonine-filtered": "ms-filtered",
    "mehler-sonine-filtered": "ms-filtered",
    "eq9": "ms-filtered",
}

# Sign of the Mehler-Sonine tail term. +1 is the value that makes the
# filtered kernel tend to g as alpha grows; kept as a module constant so the
# verify suite can flip it and check that the consistency test notices.
MS_TAIL_SIGN = +1.0

# below this alpha*r the Fourier-filtered dynamic kernel uses its r^4 Taylor expansion
TAYLOR_SWITCH = 1e-3
_SERIES_SWITCH = 10.0
_TAIL_START = 40.0
_PANEL = 4.0
_PANEL_ORDER = 24


def canonical_family(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise InvalidArgument(f"unknown kernel family {name!r}")
    return key


@dataclass(frozen=True)
class KernelSpec:
    family: str
    k: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        k = float(self.k)
        object.__setattr__(self, "k", k)
        if not math.isfinite(k) or k < 0:
            raise InvalidArgument(f"wavenumber must be finite and >= 0, got {k}")
        if fam.startswith("static") and k != 0.0:
            raise InvalidArgument(f"{fam} kernel requires k = 0")
        if not fam.startswith("static") and not k > 0:
            raise InvalidArgument(f"{fam} kernel requires k > 0")
        if self.is_filtered:
            if self.alpha is None:
                raise InvalidArgument(f"{fam} kernel requires a cutoff alpha")
            a = float(self.alpha)
            object.__setattr__(self, "alpha", a)
            if not (math.isfinite(a) and a > k and a > 0):
                raise InvalidArgument(f"cutoff must satisfy alpha > k, got alpha={a}, k={k}")
        else:
            object.__setattr__(self, "alpha", None)

    @property
    def is_filtered(self) -> bool:
        return self.family.endswith("filtered")

    @property
    def is_static(self) -> bool:
        return self.family.startswith("static")

    def unfiltered(self) -> KernelSpec:
        return KernelSpec("static" if self.is_static else "dynamic", self.k)

    def label(self) -> str:
        if self.is_filtered:
            return f"{self.family}(k={self.k:g},alpha={self.alpha:g})"
        return f"{self.family}(k={self.k:g})"

    def evaluate(self, r):
        """Kernel value at distance(s) r as complex."""
        if self.family == "static":
            return np.asarray(g_static(r), dtype=complex)
        if self.family == "dynamic":
            return np.asarray(g_dynamic(r, self.k))
        if self.family == "static-filtered":
            return np.asarray(g_static_filtered(r, self.alpha), dtype=complex)
        if self.family == "fourier-filtered":
            return np.asarray(g_dynamic_fourier_filtered(r, self.k, self.alpha))
        return np.asarray(g_dynamic_ms_filtered(r, self.k, self.alpha))

    def regular_part(self, r):
        """g(r) + ln(r)/(2 pi) for the unfiltered families (finite at r = 0)."""
        if self.family == "static":
            return np.zeros(np.shape(r), dtype=complex)
        if self.family == "dynamic":
            return np.asarray(helmholtz_regular_part(r, self.k))
        raise InvalidArgument("regular part is defined for unfiltered kernels only")


def _positive(r, name="r"):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise SingularityError(f"unfiltered kernel is singular at {name} = 0")
    return r


def g_static(r):
    """-ln(r)/(2 pi)."""
    ra = _positive(r)
    out = -np.log(ra) / TWO_PI
    return float(out) if np.ndim(r) == 0 else out


def g_dynamic(r, k: float):
    """-(i/4) H0^(2)(k r)."""
    if not k > 0:
        raise InvalidArgument("dynamic kernel needs k > 0")
    ra = _positive(r)
    j, y = j0y0(k * ra)
    out = -0.25 * y - 0.25j * j
    return complex(out) if np.ndim(r) == 0 else out


def j0_integral_series(x):
    """int_0^x (1 - J0(u))/u du by its power series (x <= 10)."""
    x = np.asarray(x, dtype=float)
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.zeros_like(x)
    for n in range(1, 60):
        term = -term * q / (n * n)
        total -= term / (2 * n)
        if np.all(np.abs(term) < 1e-18 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


@lru_cache(maxsize=None)
def _tail_moment_coefficients(p: float, count: int = 60) -> np.ndarray:
    """c_n so that int_X^inf J0(u) u^-p du ~ sqrt(2/pi) Re[i e^{i(X-pi/4)} X^{-p-1/2} sum c_n X^-n].

    Combines the large-argument expansion of J0 with the repeated
    integration-by-parts expansion of int_X^inf u^-nu e^{iu} du.
    """
    a = _hankel_coefficients(0.0, count)
    c = np.zeros(count, dtype=complex)
    for m in range(count):
        nu = m + 0.5 + p
        poch = 1.0
        for ell in range(count - m):
            c[m + ell] += (1j) ** m * a[m] * (-1j) ** ell * poch
            poch *= nu + ell
    return c


def bessel_tail_moment(X, p: float):
    """int_X^inf J0(u) u^-p du for X >= 40 by asymptotic term extraction."""
    X = np.asarray(X, dtype=float)
    c = _tail_moment_coefficients(float(p))
    total = np.zeros(X.shape, dtype=complex)
    inv = 1.0 / X
    power = np.ones_like(X)
    prev = np.full(X.shape, np.inf)
    active = np.ones(X.shape, dtype=bool)
    for cn in c:
        term = cn * power
        mag = np.abs(term)
        active &= mag < prev
        total += np.where(active, term, 0.0)
        prev = np.where(active, mag, prev)
        if not np.any(active & (mag > 1e-19)):
            break
        power = power * inv
    pref = math.sqrt(2.0 / math.pi) * X ** (-p - 0.5)
    return (pref * (1j * np.exp(1j * (X - 0.25 * math.pi)) * total)).real


def _rational_tail(X, kappa):
    """int_X^inf J0(u) / (u (u^2 - kappa^2)) du for X >= max(40, 2 kappa)."""
    ratio = (kappa / X) ** 2
    total = np.zeros_like(X)
    weight = np.ones_like(X)
    for j in range(80):
        total += weight * bessel_tail_moment(X, 3.0 + 2.0 * j)
        weight = weight * kappa**2
        if np.all(weight * X ** (-3.0 - 2.0 * j) * ratio < 1e-20):
            break
    return total


def _panel_edges(x: float, X: float) -> np.ndarray:
    """Geometric panels near small x, then panels of width <= _PANEL."""
    edges = [x]
    while edges[-1] < min(_PANEL, X) and 4.0 * edges[-1] < min(_PANEL, X):
        edges.append(4.0 * edges[-1])
    start = edges[-1]
    count = max(1, int(math.ceil((X - start) / _PANEL)))
    edges.extend(np.linspace(start, X, count + 1)[1:])
    return np.array(edges)


def _fourier_tail_pieces(x: np.ndarray, kappa: np.ndarray):
    """Return (T1_or_None, K3) for the Fourier-filtered dynamic tail at u-lower-limit x.

    T1 = int_x^inf J0(u)/u du is only computed where x > 10 (NaN elsewhere);
    K3 = kappa^2 int_x^inf J0(u) / (u (u^2 - kappa^2)) du.
    """
    rule = gauss_legendre(_PANEL_ORDER)
    X = np.maximum(np.maximum(x, _TAIL_START), 2.0 * kappa)
    nodes, weights, owner, want_t1 = [], [], [], []
    for i, (xi, Xi) in enumerate(zip(x, X)):
        if Xi <= xi:
            continue
        e = _panel_edges(float(xi), float(Xi))
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        nodes.append((mid[:, None] + half[:, None] * rule.nodes).ravel())
        weights.append((half[:, None] * rule.weights).ravel())
        owner.append(np.full(e.size - 1, i).repeat(rule.order))
    j0k = j0(kappa)
    k2 = kappa * kappa
    middle3 = np.zeros_like(x)
    middle1 = np.zeros_like(x)
    if nodes:
        u = np.concatenate(nodes)
        w = np.concatenate(weights)
        idx = np.concatenate(owner)
        ju = j0(u)
        kk = k2[idx]
        diff = (ju - j0k[idx]) / (u * (u * u - kk))
        middle3 = np.bincount(idx, weights=w * diff, minlength=x.size)
        middle1 = np.bincount(idx, weights=w * ju / u, minlength=x.size)
    log_part = 0.5 * j0k * (np.log1p(-k2 / X**2) - np.log1p(-k2 / x**2))
    k3 = log_part + k2 * (middle3 + _rational_tail(X, kappa))
    t1 = np.where(x > _SERIES_SWITCH, middle1 + bessel_tail_moment(X, 1.0), np.nan)
    return t1, k3


def g_static_filtered(r, alpha: float):
    """Static kernel with radial spectrum truncated at alpha; finite at r = 0."""
    if not alpha > 0:
        raise InvalidArgument("cutoff alpha must be positive")
    ra = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
    x = alpha * ra
    out = np.empty_like(ra)
    lo = x <= _SERIES_SWITCH
    out[lo] = (EULER_GAMMA + math.log(0.5 * alpha) - j0_integral_series(x[lo])) / TWO_PI
    hi = ~lo
    if np.any(hi):
        xs = x[hi]
        X = np.maximum(xs, _TAIL_START)
        t1, _ = _fourier_tail_pieces(xs, np.zeros_like(xs))
        out[hi] = -(np.log(ra[hi]) + t1) / TWO_PI
    return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def _fourier_taylor(r, k, alpha):
    l0 = 0.5 * math.log((alpha / k) ** 2 - 1.0)
    r2 = r * r
    a2, k2 = alpha * alpha, k * k
    real = (l0 - 0.25 * r2 * (0.5 * a2 + k2 * l0) + r2 * r2 / 64.0 * (0.25 * a2 * a2 + 0.5 * k2 * a2 + k2 * k2 * l0)) / TWO_PI
    imag = -0.25 * (1.0 - 0.25 * k2 * r2 + k2 * k2 * r2 * r2 / 64.0)
    return real + 1j * imag


def g_dynamic_fourier_filtered(r, k: float, alpha: float):
    """Helmholtz kernel minus the part of its 2D Fourier spectrum above alpha."""
    if not (k > 0 and alpha > k):
        raise InvalidArgument(f"need 0 < k < alpha, got k={k}, alpha={alpha}")
    ra = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
    out = np.empty(ra.shape, dtype=complex)
    x = alpha * ra
    tiny = x < TAYLOR_SWITCH
    out[tiny] = _fourier_taylor(ra[tiny], k, alpha)
    rest = ~tiny
    if np.any(rest):
        rr = ra[rest]
        xs = x[rest]
        t1, k3 = _fourier_tail_pieces(xs, k * rr)
        # ln r + T1, written without the cancelling logarithms when x <= 10
        log_t1 = np.where(
            xs <= _SERIES_SWITCH,
            -EULER_GAMMA - math.log(0.5 * alpha) + j0_integral_series(np.minimum(xs, _SERIES_SWITCH)),
            np.log(rr) + np.nan_to_num(t1),
        )
        out[rest] = helmholtz_regular_part(rr, k) - (log_t1 + k3) / TWO_PI
    return complex(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def g_dynamic_ms_filtered(r, k: float, alpha: float):
    """Helmholtz kernel with the Mehler-Sonine representation of Y0 cut at alpha/k."""
    if not (k > 0 and alpha > k):
        raise InvalidArgument(f"need 0 < k < alpha, got k={k}, alpha={alpha}")
    ra = np.abs(np.asarray(r, dtype=float))
    tail = mehler_sonine_tail(ra, k, alpha)
    out = -0.25j * j0(k * ra) + MS_TAIL_SIGN * np.asarray(tail) / TWO_PI
    return complex(out) if np.ndim(r) == 0 else out


class RadialTable:
    """Piecewise Chebyshev interpolant of a smooth kernel on [0, r_max].

    Filtered kernels are costly to evaluate directly but are smooth in r
    with oscillation no faster than alpha, so assembly samples them once on
    Chebyshev panels of width <= 2/alpha and interpolates.
    """

    ORDER = 24

    def __init__(self, spec: KernelSpec, r_max: float):
        if not spec.is_filtered:
            raise InvalidArgument("radial tables are for filtered kernels")
        self.spec = spec
        self.r_max = float(r_max) * (1.0 + 1e-9) + 1e-300
        width = 2.0 / spec.alpha
        if spec.k > 0:
            width = min(width, 2.0 / spec.k)
        self.panels = max(4, int(math.ceil(self.r_max / width)))
        self.width = self.r_max / self.panels
        n = self.ORDER
        theta = math.pi * (np.arange(n) + 0.5) / n
        cheb = np.cos(theta)
        left = self.width * np.arange(self.panels)
        pts = left[:, None] + 0.5 * self.width * (cheb[::-1] + 1.0)
        vals = spec.evaluate(pts.ravel()).reshape(self.panels, n)[:, ::-1]
        # discrete Chebyshev transform on Chebyshev-Gauss points
        basis = np.cos(np.outer(np.arange(n), theta))
        coeffs = (2.0 / n) * vals @ basis.T
        coeffs[:, 0] *= 0.5
        self.coeffs = coeffs

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if np.any(r > self.r_max):
            raise InvalidArgument("distance outside the tabulated range")
        idx = np.minimum((r / self.width).astype(int), self.panels - 1)
        s = 2.0 * (r - idx * self.width) / self.width - 1.0
        c = self.coeffs[idx]
        b1 = np.zeros(r.shape, dtype=complex)
        b2 = np.zeros(r.shape, dtype=complex)
        for j in range(self.ORDER - 1, 0, -1):
            b1, b2 = 2.0 * s * b1 - b2 + c[..., j], b1
        return s * b1 - b2 + c[..., 0]
