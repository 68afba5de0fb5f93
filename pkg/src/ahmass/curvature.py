"""Scalar curvature of warped radial metrics and its expansion around b.

For ``g = A(s) ds^2 + B(s) g_round`` write ``f = sqrt(B)`` and let sigma be
g-arclength in the radial direction.  Then ``df/dsigma = f_s / sqrt(A)`` and
``d^2f/dsigma^2 = f_ss / A - f_s A_s / (2 A^2)``, and in an orthonormal frame

    Ric(radial)     = -(n-1) f_oo / f
    Ric(tangential) = -f_oo / f + (n-2) (1 - f_o^2) / f^2
    R               = -2(n-1) f_oo / f + (n-1)(n-2) (1 - f_o^2) / f^2

with ``f_o = df/dsigma``, ``f_oo = d^2f/dsigma^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import RadialPerturbation, WarpedMetric

__all__ = [
    "WarpedGeometry",
    "ScalarCurvatureReport",
    "warped_geometry",
    "perturbation_geometry",
    "scalar_curvature",
    "linearized_scalar",
    "divdiv_radial",
    "gradient_norm_sq",
    "hessian_size",
    "remainder",
    "curvature_report",
]


@dataclass(frozen=True)
class WarpedGeometry:
    """Pointwise warped-product data on a grid (orthonormal-frame Ricci)."""

    n: int
    A: np.ndarray
    A_s: np.ndarray
    B: np.ndarray
    B_s: np.ndarray
    f_sigma: np.ndarray
    f_sigma2: np.ndarray
    ric_radial: np.ndarray
    ric_tangential: np.ndarray
    scalar: np.ndarray

    @property
    def ric_norm_sq(self) -> np.ndarray:
        return self.ric_radial**2 + (self.n - 1) * self.ric_tangential**2


def _geometry(n, A, A_s, B, B_s, B_ss) -> WarpedGeometry:
    f = np.sqrt(B)
    f_s = B_s / (2.0 * f)
    f_ss = B_ss / (2.0 * f) - B_s**2 / (4.0 * f**3)
    f_o = f_s / np.sqrt(A)
    f_oo = f_ss / A - f_s * A_s / (2.0 * A**2)
    shape = f_oo / f
    tangential_gauss = (1.0 - f_o**2) / B
    ric_r = -(n - 1) * shape
    ric_t = -shape + (n - 2) * tangential_gauss
    scal = -2.0 * (n - 1) * shape + (n - 1) * (n - 2) * tangential_gauss
    return WarpedGeometry(n, A, A_s, B, B_s, f_o, f_oo, ric_r, ric_t, scal)


def warped_geometry(g: WarpedMetric) -> WarpedGeometry:
    """Curvature of a sampled warped metric, differentiating p and q2 on the grid."""
    grid = g.grid
    A, B = np.asarray(g.p, dtype=float), np.asarray(g.q2, dtype=float)
    return _geometry(g.n, A, grid.derivative(A, 1), B, grid.derivative(B, 1), grid.derivative(B, 2))


def perturbation_geometry(e: RadialPerturbation, alpha=None, beta=None, derivs=None) -> WarpedGeometry:
    """Curvature of ``b + e`` computed from alpha, beta and their grid derivatives.

    Working with the perturbation profiles rather than p and q2 keeps the
    differentiated quantities small, which matters at large s.
    """
    s = e.s
    n = e.n
    a = e.alpha if alpha is None else alpha
    b = e.beta if beta is None else beta
    if derivs is None:
        if alpha is None and beta is None:
            da, db, dda, ddb = e.grid_derivatives(2)
        else:
            grid = e.grid
            da, db = grid.derivative(a, 1), grid.derivative(b, 1)
            dda, ddb = grid.derivative(a, 2), grid.derivative(b, 2)
    else:
        da, db, dda, ddb = derivs
    one_s2 = 1.0 + s * s
    A = (1.0 + a) / one_s2
    A_s = da / one_s2 - 2.0 * s * (1.0 + a) / one_s2**2
    B = (1.0 + b) * s * s
    B_s = db * s * s + 2.0 * s * (1.0 + b)
    B_ss = ddb * s * s + 4.0 * s * db + 2.0 * (1.0 + b)
    return _geometry(n, A, A_s, B, B_s, B_ss)


def scalar_curvature(g) -> np.ndarray:
    """Scalar curvature R(s) of a :class:`WarpedMetric` or of ``b + e``."""
    if isinstance(g, RadialPerturbation):
        g.require("C2")
        return perturbation_geometry(g).scalar
    if g.regularity == "C0":
        g.to_perturbation().require("C2")
    return warped_geometry(g).scalar


def divdiv_radial(psi, dpsi, ddpsi, s, n: int):
    """``div div (psi N (x) N)`` for a radial function psi and unit radial field N.

    Uses ``div N = (n-1) coth(d)``, ``D_N N = 0`` and ``coth(d) = sqrt(1+s^2)/s``.
    """
    one_s2 = 1.0 + s * s
    return (one_s2 * ddpsi + (s + 2.0 * (n - 1) * one_s2 / s) * dpsi
            + (n - 1) * ((n - 1) * one_s2 - 1.0) * psi / (s * s))


def linearized_scalar(e: RadialPerturbation) -> np.ndarray:
    """First variation of R at b in the direction e.

    ``(n-1) tr e + div div e - Laplacian(tr e)`` with ``e = beta b + (alpha - beta) N N``.
    """
    e.require("C2")
    s, n = e.s, e.n
    da, db, dda, ddb = e.grid_derivatives(2)
    one_s2 = 1.0 + s * s
    lap = lambda u, du, ddu: one_s2 * ddu + (n * s + (n - 1) / s) * du  # noqa: E731
    tr = e.alpha + (n - 1) * e.beta
    lap_tr = lap(tr, da + (n - 1) * db, dda + (n - 1) * ddb)
    lap_beta = lap(e.beta, db, ddb)
    psi = e.alpha - e.beta
    dd = divdiv_radial(psi, da - db, dda - ddb, s, n)
    return (n - 1) * tr + lap_beta + dd - lap_tr


def gradient_norm_sq(alpha, beta, dalpha, dbeta, s, n: int):
    """``|D e|_b^2`` for a radial perturbation.

    ``alpha_d^2 + (n-1) beta_d^2 + 2(n-1) coth^2(d) (alpha - beta)^2`` with
    ``partial_d = sqrt(1+s^2) partial_s``.
    """
    one_s2 = 1.0 + s * s
    return one_s2 * (dalpha**2 + (n - 1) * dbeta**2) + 2.0 * (n - 1) * one_s2 / (s * s) * (alpha - beta) ** 2


def hessian_size(alpha, beta, dalpha, dbeta, ddalpha, ddbeta, s, n: int):
    """Size proxy for ``|D^2 e|_b``: radial Hessians of alpha and beta plus the sphere terms.

    Not the exact norm; it dominates each component up to a dimensional constant.
    """
    one_s2 = 1.0 + s * s
    coth = np.sqrt(one_s2) / s
    hess_a = np.abs(one_s2 * ddalpha + s * dalpha) + (n - 1) * coth * np.sqrt(one_s2) * np.abs(dalpha)
    hess_b = np.abs(one_s2 * ddbeta + s * dbeta) + (n - 1) * coth * np.sqrt(one_s2) * np.abs(dbeta)
    psi = np.abs(alpha - beta)
    dpsi = np.sqrt(one_s2) * np.abs(dalpha - dbeta)
    return hess_a + np.sqrt(n - 1) * hess_b + 2.0 * np.sqrt(n - 1) * coth * (dpsi + coth * psi)


@dataclass(frozen=True)
class ScalarCurvatureReport:
    s: np.ndarray
    scalar: np.ndarray
    linear: np.ndarray
    remainder: np.ndarray
    c_q: float


def remainder(e: RadialPerturbation, floor: float = 1e-14):
    """Quadratic remainder ``q = R + n(n-1) - linear`` and ``c_q = sup |q| / (|e|^2 + |De|^2)``."""
    e.require("C2")
    n = e.n
    scal = perturbation_geometry(e).scalar
    lin = linearized_scalar(e)
    q = scal + n * (n - 1) - lin
    da, db = e.grid_derivatives(2)[:2]
    denom = e.norm_b**2 + gradient_norm_sq(e.alpha, e.beta, da, db, e.s, n)
    mask = denom > floor
    c_q = float(np.max(np.abs(q[mask]) / denom[mask])) if np.any(mask) else 0.0
    return q, c_q


def curvature_report(e: RadialPerturbation) -> ScalarCurvatureReport:
    n = e.n
    scal = perturbation_geometry(e).scalar
    lin = linearized_scalar(e)
    q, c_q = remainder(e)
    return ScalarCurvatureReport(e.s, scal, lin, q, c_q)
