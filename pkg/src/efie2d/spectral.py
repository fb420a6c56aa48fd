"""Laplace-Beltrami mode orderings, singular spectra and the Calderon product."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .assembly import GramMatrix, OperatorMatrix, assemble_G
from .errors import InvalidArgument, NumericError
from .geometry import CurveMesh

DEGENERACY_RTOL = 1e-8
CSV_COLUMNS = ("n", "mu_n", "sqrt_mu_n", "sigma_n", "operator", "kernel_family", "k", "alpha")


def stiffness_matrix(mesh: CurveMesh) -> np.ndarray:
    """Cyclic P1 stiffness: L_ii = 1/h_{i-1} + 1/h_i, L_{i,i+1} = -1/h_i."""
    n = mesh.size
    inv = 1.0 / mesh.lengths
    idx = np.arange(n)
    lap = np.zeros((n, n))
    lap[idx, idx] = inv + np.roll(inv, 1)
    lap[idx, (idx + 1) % n] -= inv
    lap[(idx + 1) % n, idx] -= inv
    return lap


@dataclass(frozen=True, eq=False)
class LaplaceBeltramiBasis:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns, G-orthonormal
    parity: np.ndarray  # +1 symmetric, -1 antisymmetric, 0 unknown
    mesh_tag: str

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def _reflection(mesh: CurveMesh) -> np.ndarray | None:
    """Node permutation for the mirror y -> -y, if the mesh has that symmetry."""
    n = mesh.size
    perm = (-np.arange(n)) % n
    mirrored = mesh.nodes[perm] * np.array([1.0, -1.0])
    scale = float(np.abs(mesh.nodes).max())
    if np.max(np.abs(mirrored - mesh.nodes)) <= 1e-10 * scale:
        return perm
    return None


def build_lb_basis(mesh: CurveMesh) -> LaplaceBeltramiBasis:
    """Generalized eigenpairs of L u = mu G u with G-orthonormal vectors.

    Inside a degenerate pair the vectors are rotated to be even/odd under
    the y -> -y mirror when the mesh has it, even first.
    """
    lap = stiffness_matrix(mesh)
    gram = assemble_G(mesh).entries
    try:
        mu, vec = sla.eigh(lap, gram)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"Laplace-Beltrami eigensolve failed: {exc}") from exc
    mu = np.maximum(mu, 0.0)
    mu[0] = 0.0
    vec = vec.copy()
    n = mu.size
    parity = np.zeros(n)
    perm = _reflection(mesh)
    if perm is not None:
        i = 0
        while i < n:
            j = i + 1
            while j < n and abs(mu[j] - mu[i]) <= DEGENERACY_RTOL * max(1.0, mu[i]):
                j += 1
            block = vec[:, i:j]
            refl = block.T @ gram @ block[perm]
            refl = 0.5 * (refl + refl.T)
            w, rot = np.linalg.eigh(refl)
            order = np.argsort(-w, kind="stable")
            block = block @ rot[:, order]
            # fix the sign so the largest-magnitude entry is positive
            for c in range(block.shape[1]):
                col = block[:, c]
                if col[np.argmax(np.abs(col))] < 0:
                    block[:, c] = -col
            vec[:, i:j] = block
            parity[i:j] = np.sign(np.round(w[order], 6))
            i = j
    return LaplaceBeltramiBasis(mu, vec, parity, mesh.tag)


def angular_index(n) -> np.ndarray:
    """Circle: LB mode n belongs to angular index ceil(n/2)."""
    return (np.asarray(n) + 1) // 2


@dataclass
class SpectrumReport:
    n: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    operator: str
    kernel_family: str
    k: float
    alpha: float | None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.n.size == self.mu.size == self.sigma.size):
            raise InvalidArgument("report columns have different lengths")
        if np.any(self.sigma < 0):
            raise InvalidArgument("mode responses must be non-negative")

    @property
    def sqrt_mu(self) -> np.ndarray:
        return np.sqrt(self.mu)

    def __len__(self) -> int:
        return self.n.size

    def rows(self):
        alpha = "" if self.alpha is None else repr(float(self.alpha))
        for n, mu, smu, sig in zip(self.n, self.mu, self.sqrt_mu, self.sigma):
            yield (int(n), repr(float(mu)), repr(float(smu)), repr(float(sig)), self.operator, self.kernel_family, repr(float(self.k)), alpha)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "operator": self.operator,
            "kernel_family": self.kernel_family,
            "k": self.k,
            "alpha": self.alpha,
            "metadata": self.metadata,
            "modes": [dict(zip(CSV_COLUMNS[:4], (int(n), float(m), float(math.sqrt(m)), float(s)))) for n, m, s in zip(self.n, self.mu, self.sigma)],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _gram_factor(gram: GramMatrix | np.ndarray):
    g = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram)
    try:
        return sla.cholesky(g, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument("Gram matrix is not symmetric positive definite") from exc


def _entries(a):
    if isinstance(a, OperatorMatrix):
        return a.entries, a.kind
    if isinstance(a, GramMatrix):
        return a.entries, "galerkin"
    return np.asarray(a), "galerkin"


def mode_responses(a, basis: LaplaceBeltramiBasis, gram) -> np.ndarray:
    """sigma_n = ||G^-1 A u_n||_G / ||u_n||_G (no G^-1 for primal operators)."""
    mat, kind = _entries(a)
    u = basis.vectors
    if mat.shape != (u.shape[0], u.shape[0]):
        raise InvalidArgument("operator and basis dimensions differ")
    chol = _gram_factor(gram)
    au = mat @ u
    if kind == "primal":
        y = chol.T @ au
    else:
        y = sla.solve_triangular(chol, au, lower=True)
    unorm = np.linalg.norm(chol.T @ u, axis=0)
    return np.linalg.norm(y, axis=0) / unorm


def overlap_responses(a, basis: LaplaceBeltramiBasis, gram) -> np.ndarray:
    """Singular values assigned to LB modes by maximum singular-vector overlap."""
    mat, kind = _entries(a)
    chol = _gram_factor(gram)
    # G-orthonormal coordinates: x = C^T c
    if kind == "primal":
        rhs = chol.T @ mat
    else:
        rhs = sla.solve_triangular(chol, mat, lower=True)
    hat = sla.solve_triangular(chol, rhs.T, lower=True).T
    _, sv, vh = sla.svd(hat)
    modes = chol.T @ basis.vectors
    overlap = np.abs(vh.conj() @ modes) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    sigma = np.empty(basis.size)
    sigma[cols] = sv[rows]
    return sigma


def order_by_lb_modes(a, basis: LaplaceBeltramiBasis, gram, ordering: str = "response", kernel=None, operator: str | None = None) -> SpectrumReport:
    if ordering == "response":
        sigma = mode_responses(a, basis, gram)
    elif ordering == "overlap":
        sigma = overlap_responses(a, basis, gram)
    else:
        raise InvalidArgument(f"unknown ordering {ordering!r}")
    kernel = kernel if kernel is not None else getattr(a, "kernel", None)
    label = operator or getattr(a, "label", "A")
    return SpectrumReport(
        n=np.arange(basis.size),
        mu=basis.eigenvalues.copy(),
        sigma=sigma,
        operator=label,
        kernel_family=kernel.family if kernel is not None else "none",
        k=float(kernel.k) if kernel is not None else 0.0,
        alpha=kernel.alpha if kernel is not None else None,
        metadata={"ordering": ordering, "mesh": basis.mesh_tag},
    )


def calderon_product(s: OperatorMatrix, n: OperatorMatrix, gram: GramMatrix) -> OperatorMatrix:
    """G^-1 S G^-1 N via Cholesky solves against G."""
    g = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram)
    try:
        factor = sla.cho_factor(g, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument("Gram matrix is not symmetric positive definite") from exc
    smat, _ = _entries(s)
    nmat, _ = _entries(n)
    if smat.shape != nmat.shape or smat.shape != g.shape:
        raise InvalidArgument("operators do not conform")
    prod = sla.cho_solve(factor, smat @ sla.cho_solve(factor, nmat))
    kernel = getattr(s, "kernel", None)
    tag = getattr(s, "mesh_tag", "")
    return OperatorMatrix(np.asarray(prod, dtype=complex), "calderon", kernel, tag, kind="primal")


def full_svd_spectrum(a) -> np.ndarray:
    mat, _ = _entries(a)
    if mat.shape[0] > 4096:
        raise InvalidArgument("dense SVD is limited to N <= 4096")
    try:
        u, sv, vh = sla.svd(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    err = np.linalg.norm(mat - (u * sv) @ vh) / max(np.linalg.norm(mat), 1e-300)
    if err > 1e-10:
        raise NumericError(f"SVD reconstruction error {err:.2e}")
    return sv


def cutoff_estimate(report: SpectrumReport, alpha: float) -> int:
    """Smallest mode index with sqrt(mu_n) > alpha (report length if none)."""
    if len(report) == 0:
        raise InvalidArgument("empty report")
    above = np.flatnonzero(report.sqrt_mu > alpha)
    return int(report.n[above[0]]) if above.size else len(report)
