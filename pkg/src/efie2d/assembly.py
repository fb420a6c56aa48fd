"""Galerkin matrices for the 2D TM/TE EFIE with P1 hats on chord panels.

Panel p runs from node p to node p+1 with local coordinate s in [0,1] and
local shape functions (1 - s, s). All operators are built from the 2x2
local integrals

    K_ab(p, q) = h_p h_q int int lam_a(s) g(|x_p(s) - x_q(t)|) lam_b(t) ds dt,

and N uses the weak form D_ab sum(K)/(h_p h_q) - k^2 (t_p . t_q) K_ab with
D = [[1, -1], [-1, 1]] coming from the constant arclength derivatives of
the hats.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import InvalidArgument, NumericError, SingularSystemError
from .geometry import CurveMesh
from .kernels import KernelSpec, RadialTable
from .quadrature import gauss_legendre, log_singular_panel_rule

FAR_ORDER = 8
NEAR_ORDER = 16
LOG_ORDER = 10
MAGIC = b"EF2D"
FORMAT_VERSION = 1
CSV_MAX_N = 256
_BLOCK_BUDGET = 1 << 20  # kernel evaluations per row block


def default_threads() -> int:
    env = os.environ.get("EFIE2D_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense matrix plus provenance.

    ``kind`` is "galerkin" for matrices of bilinear forms (S, N, G) and
    "primal" for maps between coefficient vectors (e.g. G^-1 S G^-1 N).
    """

    entries: np.ndarray
    label: str
    kernel: KernelSpec | None
    mesh_tag: str
    kind: str = "galerkin"

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def to_bytes(self) -> bytes:
        n = self.size
        data = np.ascontiguousarray(self.entries, dtype="<c16")
        return MAGIC + struct.pack("<II", FORMAT_VERSION, n) + data.tobytes()

    def to_csv(self) -> str:
        n = self.size
        if n > CSV_MAX_N:
            raise InvalidArgument(f"CSV export is limited to N <= {CSV_MAX_N}")
        a = np.asarray(self.entries, dtype=complex)
        lines = [f"# {self.label} kernel={self.kernel.label() if self.kernel else 'none'} mesh={self.mesh_tag}", "row,col,re,im"]
        for i in range(n):
            for j in range(n):
                lines.append(f"{i},{j},{a[i, j].real:.17g},{a[i, j].imag:.17g}")
        return "\n".join(lines) + "\n"


def load_matrix(blob: bytes) -> np.ndarray:
    """Read a matrix written by :meth:`OperatorMatrix.to_bytes`."""
    if blob[:4] != MAGIC:
        raise InvalidArgument("not an EF2D matrix file")
    version, n = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise InvalidArgument(f"unsupported EF2D version {version}")
    data = np.frombuffer(blob[12:], dtype="<c16")
    if data.size != n * n:
        raise InvalidArgument("EF2D payload size does not match header")
    return data.reshape(n, n).astype(complex)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    mesh_tag: str

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def as_operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.entries.astype(complex), "G", None, self.mesh_tag)


@dataclass(frozen=True)
class ExcitationSpec:
    """Incident field exp(-i k d.r) times a polarization unit vector.

    ``field="constant"`` replaces the plane wave by a unit amplitude, which
    is handy for checking scalings.
    """

    polarization: str
    direction: tuple[float, float] = (1.0, 0.0)
    k: float = 1.0
    eta: float = 1.0
    field: str = "plane-wave"

    def __post_init__(self):
        pol = self.polarization.upper()
        if pol not in ("TM", "TE"):
            raise InvalidArgument(f"polarization must be TM or TE, got {self.polarization!r}")
        object.__setattr__(self, "polarization", pol)
        d = np.asarray(self.direction, dtype=float)
        norm = float(np.hypot(*d))
        if d.shape != (2,) or norm == 0:
            raise InvalidArgument("direction must be a non-zero 2-vector")
        object.__setattr__(self, "direction", (float(d[0] / norm), float(d[1] / norm)))
        if self.field not in ("plane-wave", "constant"):
            raise InvalidArgument(f"unknown field kind {self.field!r}")
        if not (math.isfinite(self.k) and self.k > 0):
            raise InvalidArgument("excitation needs k > 0")
        if not self.eta > 0:
            raise InvalidArgument("impedance must be positive")


# ---------------------------------------------------------------------------
# local integrals
# ---------------------------------------------------------------------------


def _shape(s):
    return np.stack([1.0 - s, s])


class _KernelEval:
    """Kernel access for assembly: direct for unfiltered, tabulated for filtered."""

    def __init__(self, spec: KernelSpec, mesh: CurveMesh):
        self.spec = spec
        if spec.is_filtered:
            nodes = mesh.nodes
            diff = nodes[:, None, :] - nodes[None, :, :]
            r_max = float(np.sqrt((diff**2).sum(-1)).max())
            self.table = RadialTable(spec, r_max)
        else:
            self.table = None

    def __call__(self, r):
        if self.table is not None:
            return self.table(r)
        return self.spec.evaluate(r)


def _orders(spec: KernelSpec, mesh: CurveMesh) -> tuple[int, int]:
    if spec.is_filtered:
        far = max(FAR_ORDER, int(math.ceil(2.0 + spec.alpha * float(mesh.lengths.max()))))
        return far, max(NEAR_ORDER, far)
    return FAR_ORDER, NEAR_ORDER


def _tensor_gauss(mesh, kern, p_idx, q_idx, order, skip_zero=False):
    """K for explicit pair lists with an order x order Gauss rule; shape (P, 2, 2)."""
    rule = gauss_legendre(order)
    s = 0.5 * (rule.nodes + 1.0)
    w = 0.5 * rule.weights
    a = mesh.nodes
    d = np.roll(a, -1, axis=0) - a
    xp = a[p_idx, None, :] + s[None, :, None] * d[p_idx, None, :]
    xq = a[q_idx, None, :] + s[None, :, None] * d[q_idx, None, :]
    diff = xp[:, :, None, :] - xq[:, None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    if skip_zero:
        r = np.where(r == 0.0, 1.0, r)
    g = kern(r)
    wl = _shape(s) * w
    k_local = np.einsum("ai,pij,bj->pab", wl, g, wl, optimize=False)
    hh = mesh.lengths[p_idx] * mesh.lengths[q_idx]
    return k_local * hh[:, None, None]


def _self_unfiltered(mesh, spec):
    """Self-panel K by Duffy splitting and log rules in both directions."""
    lr = log_singular_panel_rule(LOG_ORDER)
    s = lr.nodes[:, None]
    ws = lr.weights[:, None]
    wv = 1.0 - lr.nodes[None, :]  # log rule reflected so ln(1 - w) is exact
    ww = lr.weights[None, :]
    la = _shape(s)
    lb = _shape(s * wv)
    out = np.empty((mesh.size, 2, 2), dtype=complex)
    for p, h in enumerate(mesh.lengths):
        r = h * s * (1.0 - wv)
        g = -(math.log(h) + np.log(s) + np.log(1.0 - wv)) / (2.0 * math.pi) + spec.regular_part(r)
        f = ws * ww * s * g
        t = np.einsum("aij,ij,bij->ab", la * np.ones_like(wv), f, lb, optimize=False)
        out[p] = h * h * (t + t.T)
    return out


def _adjacent_unfiltered(mesh, spec):
    """K for (p, p+1), singular at the shared node, by Duffy + log rule."""
    lr = log_singular_panel_rule(LOG_ORDER)
    gr = gauss_legendre(NEAR_ORDER)
    u = lr.nodes[:, None]  # radial Duffy variable, log rule
    wu = lr.weights[:, None]
    v = 0.5 * (gr.nodes[None, :] + 1.0)
    wv = 0.5 * gr.weights[None, :]
    a = mesh.nodes
    d = np.roll(a, -1, axis=0) - a
    n = mesh.size
    out = np.empty((n, 2, 2), dtype=complex)
    for p in range(n):
        q = (p + 1) % n
        dp, dq = d[p], d[q]
        total = np.zeros((2, 2), dtype=complex)
        # triangle A: t = sigma * v ; triangle B: sigma = t * v
        for sigma, t, rho in (
            (u * np.ones_like(v), u * v, np.hypot(dp[0] + v * dq[0], dp[1] + v * dq[1])),
            (u * v, u * np.ones_like(v), np.hypot(v * dp[0] + dq[0], v * dp[1] + dq[1])),
        ):
            r = u * rho
            g = -(np.log(u) + np.log(rho)) / (2.0 * math.pi) + spec.regular_part(r)
            f = wu * wv * u * g
            lp = _shape(1.0 - sigma)
            lq = _shape(t)
            total += np.einsum("aij,ij,bij->ab", lp, f, lq, optimize=False)
        out[p] = mesh.lengths[p] * mesh.lengths[q] * total
    return out


@dataclass(frozen=True, eq=False)
class LocalIntegrals:
    k00: np.ndarray
    k01: np.ndarray
    k10: np.ndarray
    k11: np.ndarray


def local_integrals(mesh: CurveMesh, spec: KernelSpec, threads: int | None = None) -> LocalIntegrals:
    """All 2x2 panel-pair integrals, as four N x N arrays indexed [p, q]."""
    n = mesh.size
    kern = _KernelEval(spec, mesh)
    far, near = _orders(spec, mesh)
    rows = max(1, min(n, _BLOCK_BUDGET // (n * far * far)))
    blocks = [np.arange(i, min(n, i + rows)) for i in range(0, n, rows)]
    q_all = np.arange(n)

    def work(block):
        p_idx = np.repeat(block, n)
        q_idx = np.tile(q_all, block.size)
        # unfiltered self pairs hit r = 0; those entries are replaced below
        return _tensor_gauss(mesh, kern, p_idx, q_idx, far, skip_zero=not spec.is_filtered).reshape(block.size, n, 2, 2)

    workers = threads or default_threads()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    k = np.concatenate(parts, axis=0)

    p = np.arange(n)
    nxt = (p + 1) % n
    if spec.is_filtered:
        k[p, p] = _tensor_gauss(mesh, kern, p, p, near)
        adj = _tensor_gauss(mesh, kern, p, nxt, near)
    else:
        k[p, p] = _self_unfiltered(mesh, spec)
        adj = _adjacent_unfiltered(mesh, spec)
        second = (p + 2) % n
        k2 = _tensor_gauss(mesh, kern, p, second, near)
        k[p, second] = k2
        k[second, p] = np.transpose(k2, (0, 2, 1))
    k[p, nxt] = adj
    k[nxt, p] = np.transpose(adj, (0, 2, 1))
    return LocalIntegrals(k[..., 0, 0], k[..., 0, 1], k[..., 1, 0], k[..., 1, 1])


def _scatter(l00, l01, l10, l11):
    # node(p, 0) = p, node(p, 1) = p + 1
    return (
        l00
        + np.roll(l01, 1, axis=1)
        + np.roll(l10, 1, axis=0)
        + np.roll(l11, (1, 1), axis=(0, 1))
    )


def _check(mesh, spec):
    if not isinstance(mesh, CurveMesh):
        raise InvalidArgument("mesh must be a CurveMesh")
    if not isinstance(spec, KernelSpec):
        raise InvalidArgument("kernel must be a KernelSpec")


def assemble_S(mesh: CurveMesh, kernel: KernelSpec, threads: int | None = None, local: LocalIntegrals | None = None) -> OperatorMatrix:
    _check(mesh, kernel)
    li = local or local_integrals(mesh, kernel, threads)
    s = _scatter(li.k00, li.k01, li.k10, li.k11)
    return OperatorMatrix(s, "S" if not kernel.is_filtered else "S_alpha", kernel, mesh.tag)


def assemble_N(mesh: CurveMesh, kernel: KernelSpec, threads: int | None = None, local: LocalIntegrals | None = None) -> OperatorMatrix:
    _check(mesh, kernel)
    li = local or local_integrals(mesh, kernel, threads)
    h = mesh.lengths
    total = (li.k00 + li.k01 + li.k10 + li.k11) / np.outer(h, h)
    t = mesh.tangents
    k2tt = kernel.k**2 * (t @ t.T)
    n = _scatter(total - k2tt * li.k00, -total - k2tt * li.k01, -total - k2tt * li.k10, total - k2tt * li.k11)
    return OperatorMatrix(n, "N" if not kernel.is_filtered else "N_alpha", kernel, mesh.tag)


def assemble_S_and_N(mesh: CurveMesh, kernel: KernelSpec, threads: int | None = None) -> tuple[OperatorMatrix, OperatorMatrix]:
    li = local_integrals(mesh, kernel, threads)
    return assemble_S(mesh, kernel, local=li), assemble_N(mesh, kernel, local=li)


def assemble_G(mesh: CurveMesh) -> GramMatrix:
    h = mesh.lengths
    n = mesh.size
    g = np.zeros((n, n))
    idx = np.arange(n)
    g[idx, idx] = (h + np.roll(h, 1)) / 3.0
    g[idx, (idx + 1) % n] += h / 6.0
    g[(idx + 1) % n, idx] += h / 6.0
    return GramMatrix(g, mesh.tag)


def assemble_rhs(mesh: CurveMesh, exc: ExcitationSpec, order: int = FAR_ORDER) -> np.ndarray:
    """Tested incident field, scaled by 1/(eta i k) for TM and i k/eta for TE."""
    rule = gauss_legendre(order)
    s = 0.5 * (rule.nodes + 1.0)
    w = 0.5 * rule.weights
    a = mesh.nodes
    d = np.roll(a, -1, axis=0) - a
    x = a[:, None, :] + s[None, :, None] * d[:, None, :]
    dhat = np.asarray(exc.direction)
    if exc.field == "constant":
        amp = np.ones(x.shape[:2], dtype=complex)
    else:
        amp = np.exp(-1j * exc.k * (x @ dhat))
    if exc.polarization == "TM":
        field = amp
        scale = 1.0 / (exc.eta * 1j * exc.k)
    else:
        pol = np.array([-dhat[1], dhat[0]])  # z x d
        field = amp * (mesh.tangents @ pol)[:, None]
        scale = 1j * exc.k / exc.eta
    seg = mesh.lengths[:, None] * (field * w)  # (N, n)
    lam = _shape(s)
    start = seg @ lam[0]
    end = seg @ lam[1]
    return scale * (start + np.roll(end, 1))


def solve_system(a, b) -> np.ndarray:
    """Dense LU solve with one step of iterative refinement."""
    mat = np.asarray(a.entries if isinstance(a, (OperatorMatrix, GramMatrix)) else a, dtype=complex)
    rhs = np.asarray(b, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidArgument("system matrix must be square")
    if rhs.shape[0] != mat.shape[0]:
        raise InvalidArgument("right-hand side does not conform")
    lu, piv, info = lapack.zgetrf(mat)
    if info > 0:
        raise SingularSystemError("matrix is exactly singular")
    anorm = float(np.abs(mat).sum(axis=0).max())
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0:
        raise NumericError("condition estimate failed")
    if rcond == 0 or 1.0 / rcond > 1e15:
        raise SingularSystemError(f"matrix is numerically singular (cond ~ {1.0 / max(rcond, 1e-300):.3g})")
    x = sla.lu_solve((lu, piv), rhs)
    x = x + sla.lu_solve((lu, piv), rhs - mat @ x)
    return x
