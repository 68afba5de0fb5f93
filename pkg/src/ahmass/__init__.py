"""Mass functionals, normalized Ricci-DeTurck flow and cutoff constructions for
rotationally symmetric asymptotically hyperbolic metrics."""

from . import curvature, cutoffs, errors, flow, heatkernel, hypgeom, massfun, metrics
from .curvature import curvature_report, linearized_scalar, scalar_curvature
from .cutoffs import cancellation_residual, mass_drift, solve_cutoff, two_radius_gap
from .flow import flow_integrate, flow_rhs, theorem35_certificate, xt_yt_norms
from .heatkernel import gaussian_bound_fit, rescaled_kernel_identity, solve_kernel
from .hypgeom import RadialGrid, chart_point, make_grid, radial_laplacian
from .massfun import bump_cutoff, mass_aspect, mass_c0, mass_c2
from .metrics import RadialPerturbation, c0_kink, schwarzschild_ads, zero_perturbation

__version__ = "0.1.0"

__all__ = [
    "curvature", "cutoffs", "errors", "flow", "heatkernel", "hypgeom", "massfun", "metrics",
    "RadialGrid", "RadialPerturbation", "bump_cutoff", "c0_kink", "cancellation_residual", "chart_point",
    "curvature_report", "flow_integrate", "flow_rhs", "gaussian_bound_fit", "linearized_scalar", "make_grid",
    "mass_aspect", "mass_c0", "mass_c2", "mass_drift", "radial_laplacian", "rescaled_kernel_identity",
    "scalar_curvature", "schwarzschild_ads", "solve_cutoff", "solve_kernel", "theorem35_certificate",
    "two_radius_gap", "xt_yt_norms", "zero_perturbation",
]
