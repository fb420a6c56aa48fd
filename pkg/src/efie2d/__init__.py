"""Spectrally filtered boundary-element operators for the 2D EFIE."""

from __future__ import annotations

__version__ = "0.1.0"

from .assembly import (
    ExcitationSpec,
    GramMatrix,
    OperatorMatrix,
    assemble_G,
    assemble_N,
    assemble_rhs,
    assemble_S,
    assemble_S_and_N,
    solve_system,
)
from .errors import (
    AccuracyFailure,
    Efie2DError,
    InvalidArgument,
    NumericDomainError,
    NumericError,
    SingularityError,
    SingularSystemError,
    Unsupported,
)
from .geometry import BasisSet, CurveMesh, ParametricCurve, build_mesh, evaluate_basis
from .kernels import (
    KernelSpec,
    g_dynamic,
    g_dynamic_fourier_filtered,
    g_dynamic_ms_filtered,
    g_static,
    g_static_filtered,
)
from .spectral import (
    LaplaceBeltramiBasis,
    SpectrumReport,
    build_lb_basis,
    calderon_product,
    cutoff_estimate,
    full_svd_spectrum,
    order_by_lb_modes,
)
