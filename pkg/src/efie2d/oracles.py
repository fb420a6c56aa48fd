"""Slow reference values used to validate the fast code paths.

Nothing here reuses the in-repo special functions or kernel evaluators:
Bessel functions come from scipy.special and integrals from scipy.integrate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import AccuracyFailure, InvalidArgument

QUAD_TOL = 1e-12


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 2000)
    kw.setdefault("epsabs", QUAD_TOL)
    kw.setdefault("epsrel", QUAD_TOL)
    val, err = integrate.quad(f, a, b, **kw)
    return val, err


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def oracle_g_dynamic(r, k):
    return -0.25j * special.hankel2(0, k * r)


def oracle_g_static_filtered(r: float, alpha: float) -> float:
    """(1/2pi)[gamma + ln(alpha/2) + int_0^alpha (J0(s r) - 1)/s ds]."""
    f = lambda s: (special.j0(s * r) - 1.0) / s if s > 0 else 0.0
    val, _ = _quad(f, 0.0, alpha)
    return (np.euler_gamma + math.log(0.5 * alpha) + val) / (2.0 * math.pi)


def oracle_g_fourier_filtered(r: float, k: float, alpha: float) -> complex:
    """-(i/4)J0(kr) + (1/2pi) PV int_0^alpha J0(s r) s/(s^2 - k^2) ds."""
    if not alpha > k:
        raise InvalidArgument("need alpha > k")
    f = lambda s: special.j0(s * r) * s / (s + k)
    pv, _ = _quad(f, 0.0, alpha, weight="cauchy", wvar=k)
    return -0.25j * special.j0(k * r) + pv / (2.0 * math.pi)


def oracle_mehler_sonine_tail(r: float, k: float, alpha: float) -> float:
    """int_1^{alpha/k} cos(k r t)/sqrt(t^2-1) dt via t = cosh u."""
    top = math.acosh(alpha / k)
    val, _ = _quad(lambda u: math.cos(k * r * math.cosh(u)), 0.0, top)
    return val


def oracle_g_ms_filtered(r: float, k: float, alpha: float) -> complex:
    return -0.25j * special.j0(k * r) + oracle_mehler_sonine_tail(r, k, alpha) / (2.0 * math.pi)


def oracle_kernel(family: str, r: float, k: float, alpha: float | None):
    if family == "static":
        return -math.log(r) / (2.0 * math.pi)
    if family == "dynamic":
        return complex(oracle_g_dynamic(r, k))
    if family == "static-filtered":
        return oracle_g_static_filtered(r, alpha)
    if family == "fourier-filtered":
        return oracle_g_fourier_filtered(r, k, alpha)
    if family == "ms-filtered":
        return oracle_g_ms_filtered(r, k, alpha)
    raise InvalidArgument(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# circle symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleSymbol:
    radius: float
    m: int
    operator: str
    value: complex


def circle_symbol_S_static(a: float, m: int) -> float:
    if not a > 0:
        raise InvalidArgument("radius must be positive")
    m = abs(int(m))
    return -a * math.log(a) if m == 0 else a / (2.0 * m)


def _s_dynamic(a, m, k):
    ka = k * a
    return -0.5j * math.pi * a * special.jv(m, ka) * special.hankel2(m, ka)


def circle_symbol_dynamic(a: float, m: int, k: float, op: str = "S") -> complex:
    """Fourier symbol of the Galerkin S or N (weak form) on a circle."""
    if not (a > 0 and k > 0):
        raise InvalidArgument("need a > 0 and k > 0")
    m = abs(int(m))
    if op == "S":
        return complex(_s_dynamic(a, m, k))
    if op == "N":
        return complex((m / a) ** 2 * _s_dynamic(a, m, k) - 0.5 * k * k * (_s_dynamic(a, m + 1, k) + _s_dynamic(a, abs(m - 1), k)))
    raise InvalidArgument(f"unknown operator {op!r}")


def circle_symbol_N_static(a: float, m: int) -> float:
    m = abs(int(m))
    return 0.0 if m == 0 else m / (2.0 * a)


def circle_symbol_filtered(a: float, m: int, k: float, alpha: float, family: str, tol: float = 1e-10) -> complex:
    """Brute force: a int_0^{2pi} g^alpha(2a sin(phi/2)) cos(m phi) dphi."""
    m = abs(int(m))
    kern = lambda r: oracle_kernel(family, r, k, alpha)
    parts = []
    for take in (lambda z: z.real, lambda z: z.imag):
        f = lambda phi: take(complex(kern(2.0 * a * math.sin(0.5 * phi)))) * math.cos(m * phi)
        # symmetric about pi; subdivide so every piece holds a few oscillations
        pieces = max(4, 2 * m)
        edges = np.linspace(0.0, math.pi, pieces + 1)
        total, err = 0.0, 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = _quad(f, lo, hi, epsabs=tol * 1e-2, epsrel=tol)
            total += v
            err += e
        if err > 10 * tol * max(1.0, abs(total)):
            raise AccuracyFailure("circle symbol quadrature did not converge", total, err)
        parts.append(2.0 * a * total)
    return complex(parts[0], parts[1])


def circle_symbol_filtered_spectral(a: float, m: int, k: float, alpha: float, family: str) -> complex:
    """Filtered S symbols through Bessel-product (addition theorem) integrals."""
    m = abs(int(m))
    if family == "static-filtered":
        if m == 0:
            v, _ = _quad(lambda s: (special.jv(0, s * a) ** 2 - 1.0) / s if s > 0 else 0.0, 0.0, alpha)
            return complex(a * (np.euler_gamma + math.log(0.5 * alpha) + v))
        v, _ = _quad(lambda s: special.jv(m, s * a) ** 2 / s if s > 0 else 0.0, 0.0, alpha)
        return complex(a * v)
    if family == "fourier-filtered":
        f = lambda s: special.jv(m, s * a) ** 2 * s / (s + k)
        pv, _ = _quad(f, 0.0, alpha, weight="cauchy", wvar=k)
        return complex(a * pv, -0.5 * math.pi * a * special.jv(m, k * a) ** 2)
    if family == "ms-filtered":
        f = lambda t: special.jv(2 * m, 2.0 * k * a * t) / math.sqrt(t + 1.0)
        v, _ = _quad(f, 1.0, alpha / k, weight="alg", wvar=(-0.5, 0.0))
        return complex(a * v, -0.5 * math.pi * a * special.jv(m, k * a) ** 2)
    raise InvalidArgument(f"no spectral symbol for family {family!r}")


# ---------------------------------------------------------------------------
# circular cylinder TM scattering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MieSeries:
    """Surface current j(theta) = sum_n c_n exp(i n theta) on a PEC cylinder."""

    a: float
    k: float
    angle: float
    eta: float
    orders: np.ndarray
    coefficients: np.ndarray

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(theta, self.orders)) @ self.coefficients

    def scattering_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """(incident a_n, scattered b_n) of the cylindrical-wave expansions."""
        n = self.orders
        inc = (-1j) ** np.abs(n) * np.exp(-1j * n * self.angle) * np.where(n < 0, (-1.0) ** n, 1.0)
        ka = self.k * self.a
        sca = -inc * special.jv(n, ka) / special.hankel2(n, ka)
        return inc, sca

    def optical_theorem_residual(self) -> float:
        inc, sca = self.scattering_coefficients()
        scat = float(np.sum(np.abs(sca) ** 2))
        ext = -float(np.real(np.sum(sca * np.conj(inc))))
        return abs(scat - ext) / scat


def mie_series_current_tm(a: float, k: float, angle: float = 0.0, eta: float = 1.0) -> MieSeries:
    """Current solving eta i k S j = exp(-i k d.r) on a circle of radius a.

    d = (cos angle, sin angle). Truncated at ka + 10 (ka)^(1/3) + 10.
    """
    ka = k * a
    if not 0 < ka <= 20:
        raise InvalidArgument("ka must lie in (0, 20]")
    mmax = int(math.ceil(ka + 10.0 * ka ** (1.0 / 3.0) + 10.0))
    n = np.arange(-mmax, mmax + 1)
    # exp(-i x cos(th - phi)) = sum (-i)^n J_n(x) exp(i n (th - phi))
    coeff = 2.0 * (-1j) ** n * np.exp(-1j * n * angle) / (math.pi * eta * ka * special.hankel2(n, ka))
    return MieSeries(a, k, angle, eta, n, coeff)
