"""Bessel functions needed by the kernels, evaluated without scipy.special.

Three regimes for J0/Y0 on x >= 0:

* x <= 8: ascending series,
* 8 < x <= 25: Miller backward recurrence normalized by J0 + 2*sum J_2k = 1,
  with Y0 from the Neumann series,
* x > 25: Hankel asymptotic expansion (minimal term below 1e-20 there).

All routines are vectorized over numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209
SERIES_MAX = 8.0
MILLER_MAX = 25.0


def _out(x_in, arr):
    return float(arr) if np.ndim(x_in) == 0 else arr


def _ascending(x):
    """Return (J0, J0 - 1, R) where Y0 = 2/pi*((ln(x/2)+gamma)*J0 + R)."""
    q = 0.25 * x * x
    term = np.ones_like(x)
    j0m1 = np.zeros_like(x)
    rest = np.zeros_like(x)
    harmonic = 0.0
    for k in range(1, 40):
        term = -term * q / (k * k)
        harmonic += 1.0 / k
        j0m1 += term
        rest -= harmonic * term
    return 1.0 + j0m1, j0m1, rest


def _miller(x):
    """J0 and Y0 for moderate x by backward recurrence."""
    nstart = 2 * int(math.ceil((float(np.max(x)) + 40.0) / 2.0))
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    neumann = np.zeros_like(x)
    # j_cur holds J_n (unnormalized) for n = nstart, ..., 0
    for n in range(nstart, 0, -1):
        if n % 2 == 0:
            norm += 2.0 * j_cur
            kk = n // 2
            neumann += (-1.0) ** kk * j_cur / kk
        j_prev = (2.0 * n / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
    norm += j_cur
    j0 = j_cur / norm
    neumann /= norm
    y0 = (2.0 / math.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * j0 - 2.0 * neumann)
    return j0, y0


def _hankel_coefficients(nu: float, count: int) -> list[float]:
    """a_m(nu) of the large-argument expansion."""
    mu = 4.0 * nu * nu
    coeffs = [1.0]
    for m in range(1, count):
        coeffs.append(coeffs[-1] * (mu - (2 * m - 1) ** 2) / (m * 8.0))
    return coeffs


_A0 = _hankel_coefficients(0.0, 60)


def hankel_amplitude(x, coeffs=_A0):
    """P(x) + iQ(x) = sum_m i^m a_m x^-m, summed to the smallest term."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    inv = 1.0 / x
    power = np.ones_like(x)
    phase = 1.0 + 0.0j
    prev = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for a in coeffs:
        term = a * power
        mag = np.abs(term)
        active &= mag < prev
        total += np.where(active, phase * term, 0.0)
        prev = np.where(active, mag, prev)
        if not np.any(active & (mag > 1e-18)):
            break
        power = power * inv
        phase *= 1j
    return total


def _asymptotic(x):
    amp = hankel_amplitude(x) * np.exp(1j * (x - 0.25 * math.pi)) * np.sqrt(2.0 / (math.pi * x))
    return amp.real, amp.imag


def j0y0(x):
    """Return (J0(x), Y0(x)) for x > 0 (Y0 is -inf at 0)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    j0 = np.empty_like(xa)
    y0 = np.empty_like(xa)
    lo = xa <= SERIES_MAX
    mid = (xa > SERIES_MAX) & (xa <= MILLER_MAX)
    hi = xa > MILLER_MAX
    if np.any(lo):
        xs = xa[lo]
        j, _, rest = _ascending(xs)
        j0[lo] = j
        with np.errstate(divide="ignore"):
            y0[lo] = (2.0 / math.pi) * ((np.log(0.5 * xs) + EULER_GAMMA) * j + rest)
    if np.any(mid):
        j0[mid], y0[mid] = _miller(xa[mid])
    if np.any(hi):
        j0[hi], y0[hi] = _asymptotic(xa[hi])
    if np.ndim(x) == 0:
        return float(j0[0]), float(y0[0])
    return j0.reshape(np.shape(x)), y0.reshape(np.shape(x))


def j0(x):
    return j0y0(x)[0]


def y0(x):
    return j0y0(x)[1]


def hankel2_0(x):
    """H0^(2)(x) = J0(x) - i Y0(x)."""
    j, y = j0y0(x)
    return j - 1j * y


def helmholtz_regular_part(r, k: float):
    """-(i/4) H0^(2)(k r) + ln(r)/(2 pi), continuous at r = 0.

    The logarithm is cancelled analytically inside the series branch so the
    value stays accurate for tiny r.
    """
    ra = np.atleast_1d(np.asarray(r, dtype=float))
    x = k * ra
    out = np.empty(ra.shape, dtype=complex)
    lo = x <= SERIES_MAX
    if np.any(lo):
        j, j0m1, rest = _ascending(x[lo])
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = np.where(ra[lo] > 0, np.log(ra[lo]) * j0m1, 0.0)
        real = -((math.log(0.5 * k) + EULER_GAMMA) * j + logterm + rest) / (2.0 * math.pi)
        out[lo] = real - 0.25j * j
    hi = ~lo
    if np.any(hi):
        j, y = j0y0(x[hi])
        out[hi] = -0.25 * y - 0.25j * j + np.log(ra[hi]) / (2.0 * math.pi)
    return complex(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def spherical_jn_table(nmax: int, x):
    """Spherical Bessel j_n(x) for n = 0..nmax, shape (nmax+1,) + x.shape.

    Upward recurrence is used for n <= x where it is stable; above that the
    ratios j_n/j_{n-1} come from a downward continued-fraction sweep and are
    chained onto the last upward value j_{floor(x)}, which is never near a
    zero because the first zero of j_n lies beyond n + 1.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xs = x.reshape(-1)
    out = np.zeros((nmax + 1, xs.size))
    safe = np.where(xs > 0, xs, 1.0)
    small = xs < 1e-3
    sinc = np.where(small, 1.0 - xs * xs / 6.0 + xs**4 / 120.0, np.sin(safe) / safe)
    out[0] = sinc
    if nmax == 0:
        return out.reshape((1,) + shape)

    # upward part, only where x >= 1
    up = xs >= 1.0
    if np.any(up):
        xu = xs[up]
        prev = np.sin(xu) / xu
        cur = np.sin(xu) / xu**2 - np.cos(xu) / xu
        out[1, up] = cur
        top = np.minimum(np.floor(xu).astype(int), nmax)
        for n in range(1, int(top.max())):
            nxt = (2 * n + 1) / xu * cur - prev
            sel = n + 1 <= top
            col = np.flatnonzero(up)[sel]
            out[n + 1, col] = nxt[sel]
            prev, cur = cur, nxt
    # downward ratios where n > floor(x)
    base = np.where(up, np.minimum(np.floor(xs).astype(int), nmax), 0)
    need = base < nmax
    if np.any(need):
        xd = xs[need]
        bd = base[need]
        nstart = nmax + 30 + int(math.ceil(float(np.max(xd)) if xd.size else 0.0))
        ratio = np.zeros_like(xd)
        ratios = np.empty((nmax + 1, xd.size))
        for n in range(nstart, 0, -1):
            ratio = xd / (2 * n + 1 - xd * ratio)
            if n <= nmax:
                ratios[n] = ratio
        cols = np.flatnonzero(need)
        vals = out[bd, cols]
        for n in range(1, nmax + 1):
            sel = n > bd
            vals = np.where(sel, vals * ratios[n], vals)
            out[n, cols[sel]] = vals[sel]
    return out.reshape((nmax + 1,) + shape)
