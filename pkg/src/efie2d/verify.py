"""Oracle agreement checks behind the ``verify`` and ``quad-selftest`` commands."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from . import kernels, oracles
from .assembly import ExcitationSpec, assemble_G, assemble_rhs, assemble_S, assemble_S_and_N, solve_system
from .geometry import ParametricCurve, build_mesh
from .quadrature import (
    adaptive_oracle,
    endpoint_singular_integral,
    gauss_legendre,
    legendre_table,
    mehler_sonine_plan,
    mehler_sonine_tail,
    oscillatory_integral,
)
from .specfun import j0y0, spherical_jn_table
from .spectral import angular_index, build_lb_basis, calderon_product, order_by_lb_modes


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _timed(name, tol, fn):
    import time

    t0 = time.perf_counter()
    try:
        err = float(fn())
    except Exception:  # a crash is a failed check, reported as such
        err = math.inf
    return CheckResult(name, err, tol, time.perf_counter() - t0)


def _inv_sqrt(t):
    return 1.0 / np.sqrt(t * t - 1.0)


def _filon_vs_oracle():
    plan = mehler_sonine_plan(2.0, 40.0)
    worst = 0.0
    for k in (0.1, 1.0, 10.0, 100.0):
        ref = adaptive_oracle(lambda t: np.cos(k * t) * _inv_sqrt(t), 2.0, 40.0, tol=1e-14)
        worst = max(worst, abs(oscillatory_integral(plan, k).value - ref) / abs(ref))
    return worst


def _legendre_identity():
    rule = gauss_legendre(60)
    worst = 0.0
    for k in (0.5, 2.0, 20.0):
        p = legendre_table(10, rule.nodes)
        direct = (p * np.exp(1j * k * rule.nodes)) @ rule.weights
        jn = spherical_jn_table(10, np.array([k]))[:, 0]
        ident = (1j) ** np.arange(11) * 2.0 * jn
        worst = max(worst, float(np.max(np.abs(direct - ident))))
    return worst


def _endpoint_vs_oracle():
    worst = 0.0
    for c1, k in ((1.0, 1.0), (1.5, 10.0)):
        top = math.acosh(2.0)
        bottom = math.acosh(c1)
        ref = adaptive_oracle(lambda u: np.cos(k * np.cosh(u)), bottom, top, tol=1e-14)
        worst = max(worst, abs(endpoint_singular_integral(c1, 2.0, k) - ref))
    return worst


def _ms_tail_vs_oracle():
    val = mehler_sonine_tail(0.7, 1.0, 30.0)
    return abs(val - oracles.oracle_mehler_sonine_tail(0.7, 1.0, 30.0))


def _bessel_vs_scipy():
    x = np.concatenate([np.linspace(1e-3, 8, 50), np.linspace(8, 25, 50), np.geomspace(25, 1e4, 50)])
    j, y = j0y0(x)
    return max(np.max(np.abs(j - special.j0(x))), np.max(np.abs(y - special.y0(x))))


def quadrature_checks() -> list[CheckResult]:
    return [
        _timed("filon (2,40) vs adaptive oracle [rel]", 1e-9, _filon_vs_oracle),
        _timed("legendre/bessel identity n<=10", 1e-11, _legendre_identity),
        _timed("endpoint branch vs cosh oracle", 1e-10, _endpoint_vs_oracle),
        _timed("mehler-sonine tail vs oracle", 1e-9, _ms_tail_vs_oracle),
        _timed("log rule: int ln x, x ln x", 1e-13, _log_rule_check),
    ]


def _log_rule_check():
    from .quadrature import log_singular_panel_rule

    lr = log_singular_panel_rule(10)
    return max(abs(np.log(lr.nodes) @ lr.weights + 1.0), abs((lr.nodes * np.log(lr.nodes)) @ lr.weights + 0.25))


def _kernel_samples(count: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        k = rng.uniform(0.1, 10.0)
        alpha = k * rng.uniform(1.05, 50.0)
        r = rng.uniform(1e-3, 100.0) / alpha
        pairs = (
            (kernels.g_static_filtered(r, alpha), oracles.oracle_g_static_filtered(r, alpha)),
            (kernels.g_dynamic_fourier_filtered(r, k, alpha), oracles.oracle_g_fourier_filtered(r, k, alpha)),
            (kernels.g_dynamic_ms_filtered(r, k, alpha), oracles.oracle_g_ms_filtered(r, k, alpha)),
        )
        worst = max(worst, max(abs(a - b) for a, b in pairs))
    return worst


def _ms_consistency():
    # large-alpha limit of the Mehler-Sonine family must reproduce g
    k, r = 1.0, 1.0
    return abs(kernels.g_dynamic_ms_filtered(r, k, 1e4 * k) - complex(oracles.oracle_g_dynamic(r, k)))


def _static_circle_symbols(n_seg: int):
    a = 0.8
    mesh = build_mesh(ParametricCurve("circle", (a,)), n_seg)
    s = assemble_S(mesh, kernels.KernelSpec("static")).entries.real
    g = assemble_G(mesh).entries
    th = 2.0 * np.pi * np.arange(n_seg) / n_seg
    worst = 0.0
    for m in range(11):
        u = np.cos(m * th)
        rq = (u @ s @ u) / (u @ g @ u)
        ref = oracles.circle_symbol_S_static(a, m)
        worst = max(worst, abs(rq / ref - 1.0))
    return worst


def _mie(n_seg: int):
    a, k = 1.0, 1.0
    mesh = build_mesh(ParametricCurve("circle", (a,)), n_seg)
    s = assemble_S(mesh, kernels.KernelSpec("dynamic", k))
    b = assemble_rhs(mesh, ExcitationSpec("TM", (1.0, 0.0), k, 1.0))
    x = solve_system(s, b)
    ref = oracles.mie_series_current_tm(a, k, 0.0, 1.0)(2.0 * np.pi * np.arange(n_seg) / n_seg)
    g = assemble_G(mesh).entries
    e = x - ref
    return math.sqrt((e.conj() @ g @ e).real / (ref.conj() @ g @ ref).real)


def _optical_theorem():
    return oracles.mie_series_current_tm(1.0, 5.0).optical_theorem_residual()


def _filtered_symbols(family: str, n_seg: int = 256):
    a, k = 1.0, 10.0
    spec = kernels.KernelSpec(family, k, 3.0 * k)
    mesh = build_mesh(ParametricCurve("circle", (a,)), n_seg)
    s = assemble_S(mesh, spec)
    g = assemble_G(mesh)
    basis = build_lb_basis(mesh)
    rep = order_by_lb_modes(s, basis, g)
    worst = 0.0
    for m in (1, 5, 10, 20, 30):
        ref = abs(oracles.circle_symbol_filtered_spectral(a, m, k, 3.0 * k, family))
        worst = max(worst, abs(rep.sigma[2 * m - 1] - ref) / ref)
    return worst


def _calderon_median():
    a, k = 1.0, 10.0
    n_seg = 320
    mesh = build_mesh(ParametricCurve("circle", (a,)), n_seg)
    s, n = assemble_S_and_N(mesh, kernels.KernelSpec("dynamic", k))
    g = assemble_G(mesh)
    rep = order_by_lb_modes(calderon_product(s, n, g), build_lb_basis(mesh), g)
    resolved = angular_index(rep.n) < n_seg // 4
    return abs(np.median(rep.sigma[resolved]) / 0.25 - 1.0)


def run_suite(level: str = "quick") -> list[CheckResult]:
    results = quadrature_checks()
    results += [
        _timed("J0/Y0 vs scipy.special", 1e-12, _bessel_vs_scipy),
        _timed("filtered kernels vs oracles", 1e-8, lambda: _kernel_samples(5 if level == "quick" else 20)),
        _timed("ms-consistency (alpha/k=1e4 -> g)", 1e-4, _ms_consistency),
        _timed("static circle S symbols [rel]", 1e-2, lambda: _static_circle_symbols(128 if level == "quick" else 256)),
        _timed("TM current vs Mie series [L2 rel]", 2e-2, lambda: _mie(128 if level == "quick" else 256)),
        _timed("Mie optical theorem", 1e-8, _optical_theorem),
    ]
    if level == "full":
        results += [
            _timed("fourier-filtered S symbols [rel]", 2e-2, lambda: _filtered_symbols("fourier-filtered")),
            _timed("ms-filtered S symbols [rel]", 2e-2, lambda: _filtered_symbols("ms-filtered")),
            _timed("static-filtered kernel vs oracle", 1e-8, lambda: _kernel_samples(20, seed=11)),
            _timed("calderon median vs 1/4 [rel]", 0.2, _calderon_median),
        ]
    return results
