import math

import numpy as np
import pytest

from efie2d.assembly import (
    CSV_MAX_N,
    ExcitationSpec,
    OperatorMatrix,
    assemble_G,
    assemble_N,
    assemble_rhs,
    assemble_S,
    assemble_S_and_N,
    load_matrix,
    local_integrals,
    solve_system,
)
from efie2d.errors import InvalidArgument, SingularSystemError
from efie2d.geometry import ParametricCurve, build_mesh
from efie2d.kernels import KernelSpec
from efie2d.oracles import circle_symbol_S_static

from conftest import circle_lb, circle_mesh, circle_operators

SPECS = [
    KernelSpec("static"),
    KernelSpec("dynamic", 3.0),
    KernelSpec("static-filtered", 0.0, 12.0),
    KernelSpec("fourier-filtered", 3.0, 9.0),
    KernelSpec("ms-filtered", 3.0, 9.0),
]


def _rel_asym(a):
    return np.linalg.norm(a - a.T) / np.linalg.norm(a)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
def test_symmetry_all_kernels(spec):
    mesh = build_mesh(ParametricCurve("kite", (1.0,)), 32)
    s, n = assemble_S_and_N(mesh, spec)
    assert _rel_asym(s.entries) < 1e-10
    assert _rel_asym(n.entries) < 1e-10
    assert np.all(np.isfinite(s.entries)) and np.all(np.isfinite(n.entries))


@pytest.mark.parametrize("n_seg", [16, 32, 64, 128])
def test_symmetry_and_spd_across_meshes(n_seg):
    mesh = build_mesh(ParametricCurve("ellipse", (1.0, 0.6)), n_seg)
    s = assemble_S(mesh, KernelSpec("dynamic", 2.0))
    assert _rel_asym(s.entries) < 1e-10
    assert np.linalg.eigvalsh(assemble_G(mesh).entries).min() > 0


def test_static_N_annihilates_constants():
    mesh = circle_mesh(1.0, 64)
    n = assemble_N(mesh, KernelSpec("static")).entries
    assert np.linalg.norm(n @ np.ones(64)) / np.linalg.norm(n) < 1e-10


def test_gram_entries():
    mesh = circle_mesh(1.0, 40)
    g = assemble_G(mesh).entries
    h = mesh.lengths[0]
    assert np.allclose(np.diag(g), 2 * h / 3, rtol=1e-14)
    assert np.allclose(np.diag(np.roll(g, -1, axis=1)), h / 6, rtol=1e-14)
    assert g[0, -1] == pytest.approx(h / 6, rel=1e-14)
    assert np.allclose(g.sum(axis=1), h, rtol=1e-14)
    assert np.count_nonzero(g) == 3 * 40


def test_static_circle_constant_mode():
    a, n_seg = 0.8, 256
    mesh = circle_mesh(a, n_seg)
    s = assemble_S(mesh, KernelSpec("static")).entries.real
    g = assemble_G(mesh).entries
    one = np.ones(n_seg)
    assert (one @ s @ one) / (one @ g @ one) == pytest.approx(-a * math.log(a), abs=1e-3)
    th = 2 * np.pi * np.arange(n_seg) / n_seg
    u = np.cos(3 * th)
    assert (u @ s @ u) / (u @ g @ u) == pytest.approx(circle_symbol_S_static(a, 3), abs=1e-3)


def test_static_circle_richardson():
    # Rayleigh quotients converge like h^2; extrapolation removes most of the error
    a = 0.8
    vals = []
    for n_seg in (128, 256):
        s = assemble_S(circle_mesh(a, n_seg), KernelSpec("static")).entries.real
        g = assemble_G(circle_mesh(a, n_seg)).entries
        one = np.ones(n_seg)
        vals.append((one @ s @ one) / (one @ g @ one))
    extrap = (4 * vals[1] - vals[0]) / 3
    assert abs(extrap + a * math.log(a)) < 1e-5


def test_local_integrals_match_oracle():
    from scipy import integrate, special

    mesh = build_mesh(ParametricCurve("kite", (1.0,)), 24)
    spec = KernelSpec("dynamic", 2.0)
    loc = local_integrals(mesh, spec)
    x0, d = mesh.nodes, np.roll(mesh.nodes, -1, axis=0) - mesh.nodes

    def oracle(p, q, a, b):
        hp, hq = mesh.lengths[p], mesh.lengths[q]

        def f(t, s, part):
            r = np.hypot(*(x0[p] + s * d[p] - x0[q] - t * d[q]))
            g = -0.25j * special.hankel2(0, 2.0 * r)
            lam_a = 1 - s if a == 0 else s
            lam_b = 1 - t if b == 0 else t
            return getattr(g * lam_a * lam_b, part)

        pts = [0.0, 1.0] if abs(p - q) % 24 in (1, 23) else None
        re = integrate.dblquad(lambda t, s: f(t, s, "real"), 0, 1, 0, 1, epsabs=1e-12)[0]
        im = integrate.dblquad(lambda t, s: f(t, s, "imag"), 0, 1, 0, 1, epsabs=1e-12)[0]
        return hp * hq * complex(re, im)

    for p, q in ((3, 4), (3, 7), (3, 15)):
        for a in (0, 1):
            for b in (0, 1):
                got = getattr(loc, f"k{a}{b}")[p, q]
                assert abs(got - oracle(p, q, a, b)) < 1e-9 * mesh.lengths[p] * mesh.lengths[q] * 10


def test_rhs_tm_constant_field():
    mesh = circle_mesh(1.0, 32)
    b = assemble_rhs(mesh, ExcitationSpec("TM", (1.0, 0.0), 1.0, 1.0, field="constant"))
    h = mesh.lengths[0]
    assert np.allclose(b, -1j * h, atol=1e-15)


def test_rhs_te_reflection_symmetry():
    # tangent flips sign under y -> -y and the traversal reverses, so the tested field is even
    n_seg = 48
    mesh = circle_mesh(1.0, n_seg)
    b = assemble_rhs(mesh, ExcitationSpec("TE", (1.0, 0.0), 2.0, 1.0))
    perm = (-np.arange(n_seg)) % n_seg
    assert np.allclose(b[perm], b, atol=1e-14)
    assert not np.allclose(b[perm], b.conj(), atol=1e-3)


def test_rhs_scales_with_inverse_eta():
    mesh = circle_mesh(1.0, 32)
    for pol in ("TM", "TE"):
        b1 = assemble_rhs(mesh, ExcitationSpec(pol, (0.6, 0.8), 2.0, 1.0))
        b7 = assemble_rhs(mesh, ExcitationSpec(pol, (0.6, 0.8), 2.0, 7.0))
        assert np.allclose(b7 * 7.0, b1, rtol=1e-14, atol=0)


def test_excitation_validation():
    with pytest.raises(InvalidArgument):
        ExcitationSpec("TX")
    with pytest.raises(InvalidArgument):
        ExcitationSpec("TM", (0.0, 0.0))
    with pytest.raises(InvalidArgument):
        ExcitationSpec("TM", (1.0, 0.0), 0.0)
    exc = ExcitationSpec("te", (3.0, 4.0))
    assert exc.polarization == "TE"
    assert math.hypot(*exc.direction) == pytest.approx(1.0, abs=1e-12)


def test_solve_gram_constructed():
    g = assemble_G(circle_mesh(1.0, 64))
    x = solve_system(g.as_operator(), g.entries @ np.ones(64))
    assert np.max(np.abs(x - 1)) < 1e-12


def test_solve_static_S_constructed(rng):
    s = assemble_S(circle_mesh(0.8, 64), KernelSpec("static"))
    e = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    x = solve_system(s, s.entries @ e)
    assert np.max(np.abs(x - e)) < 1e-8
    assert np.linalg.norm(s.entries @ x - s.entries @ e) / np.linalg.norm(s.entries @ e) < 1e-10


def test_solve_singular():
    with pytest.raises(SingularSystemError):
        solve_system(np.ones((4, 4)), np.ones(4))
    with pytest.raises(InvalidArgument):
        solve_system(np.eye(3), np.ones(4))


def test_binary_and_csv_round_trip():
    s, _ = circle_operators(1.0, 32, "dynamic", 2.0)
    blob = s.to_bytes()
    assert np.array_equal(load_matrix(blob), s.entries)
    with pytest.raises(InvalidArgument):
        load_matrix(b"XXXX" + blob[4:])
    rows = [line.split(",") for line in s.to_csv().splitlines()[2:]]
    back = np.zeros((32, 32), dtype=complex)
    for i, j, re, im in rows:
        back[int(i), int(j)] = complex(float(re), float(im))
    assert np.array_equal(back, s.entries)
    big = OperatorMatrix(np.zeros((CSV_MAX_N + 1, CSV_MAX_N + 1), dtype=complex), "S", None, "x")
    with pytest.raises(InvalidArgument):
        big.to_csv()


@pytest.mark.parametrize("spec", [KernelSpec("dynamic", 4.0), KernelSpec("fourier-filtered", 4.0, 12.0)], ids=lambda s: s.family)
def test_assembly_deterministic_across_threads(spec):
    mesh = circle_mesh(1.0, 96)
    ref = assemble_S_and_N(mesh, spec, threads=1)
    for threads in (3, 8):
        s, n = assemble_S_and_N(mesh, spec, threads=threads)
        assert s.entries.tobytes() == ref[0].entries.tobytes()
        assert n.entries.tobytes() == ref[1].entries.tobytes()


@pytest.mark.parametrize("family", ["static-filtered", "fourier-filtered"])
def test_filtered_matrix_converges_monotonically(family):
    k = 2.0
    mesh = circle_mesh(1.0, 64)
    static = family.startswith("static")
    ref = assemble_S(mesh, KernelSpec("static") if static else KernelSpec("dynamic", k)).entries
    errs = []
    for mult in (2, 4, 8, 16):
        s = assemble_S(mesh, KernelSpec(family, 0.0 if static else k, mult * k)).entries
        errs.append(np.linalg.norm(s - ref) / np.linalg.norm(ref))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_calderon_circle_mode_products():
    from efie2d.oracles import circle_symbol_dynamic
    from efie2d.spectral import calderon_product, mode_responses

    a, k, n_seg = 1.0, 3.0, 128
    s, n = circle_operators(a, n_seg, "dynamic", k)
    basis, g = circle_lb(a, n_seg)
    prod = mode_responses(calderon_product(s, n, g), basis, g)
    rs = mode_responses(s, basis, g)
    rn = mode_responses(n, basis, g)
    for m in (1, 2, 5, 10):
        idx = 2 * m - 1
        assert prod[idx] == pytest.approx(rs[idx] * rn[idx], rel=2e-2)
        exact = abs(circle_symbol_dynamic(a, m, k, "S") * circle_symbol_dynamic(a, m, k, "N"))
        assert prod[idx] == pytest.approx(exact, rel=2e-2)


def test_filtered_assembly_on_small_curve():
    # curve diameter well below 1, coarse panels
    mesh = build_mesh(ParametricCurve("circle", (0.05,)), 12)
    s, n = assemble_S_and_N(mesh, KernelSpec("ms-filtered", 20.0, 60.0))
    assert np.all(np.isfinite(s.entries)) and _rel_asym(s.entries) < 1e-10
