"""Local mass functionals of a radial perturbation with the static potential V0.

Two functionals are evaluated:

* ``mass_c2(e, r)``: the surface flux on the geodesic sphere at s = r.  For
  ``e = beta b + (alpha - beta) N N`` and ``V0 = sqrt(1+s^2)`` it reduces to

      (n-1) omega [ s^(n-2) (1+s^2) (alpha - beta) - s^(n-1) (1+s^2) beta' + s^n beta ].

* ``mass_c0(e, phi, r)``: the derivative-free annulus functional obtained by
  integrating the flux against a cutoff and moving derivatives onto the weight.

The annulus form is written for a general radial weight ``w(s)``:

    numerator[w] = [omega s^(n-1) sqrt(1+s^2) w (alpha - tr e)]_{0.9r}^{1.1r}
                 + int ((1+s^2) w' + w (n s + (n-2)/s)) tr e   dmu_b
                 + int (w (1/s - s) - (1+s^2) w') alpha        dmu_b

and satisfies ``numerator[w] = int w(s) M_C2(s) (1+s^2)^(-1/2) ds`` exactly.
With ``w = phi(s/r)`` ("literal") the hyperbolic volume element leaves a factor
``1/sqrt(1+s^2)`` against the flux; with ``w = sqrt(1+s^2) phi(s/r)``
("averaged", the default) the functional equals the phi-average of M_C2 and
tends to the mass aspect.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import OptimizeWarning, curve_fit

from .curvature import gradient_norm_sq, hessian_size, perturbation_geometry
from .errors import DomainError, FitError, NormalizationError, OrderingError
from .hypgeom import radial_integral, unit_sphere_volume, volume_density
from .metrics import REGULARITY_LEVELS, RadialPerturbation

__all__ = [
    "CutoffFunction",
    "MassBreakdown",
    "MassAspect",
    "Lemma26Record",
    "bump_cutoff",
    "constant_cutoff",
    "sampled_cutoff",
    "mass_c2",
    "mass_c0",
    "c0_numerator",
    "averaged_mass_c2",
    "mass_aspect",
    "lemma26_defect",
    "VARIANTS",
]

VARIANTS = ("averaged", "literal")
ANNULUS = (0.9, 1.1)


@dataclass(frozen=True)
class CutoffFunction:
    """A cutoff phi(l) on [0.9, 1.1] with its derivative."""

    phi: Callable
    dphi: Callable
    a: float
    b: float
    integral: float
    label: str = ""
    knots: tuple = ()

    def __post_init__(self):
        if self.integral == 0 or not np.isfinite(self.integral):
            raise NormalizationError("cutoff integral over (0.9, 1.1) must be finite and nonzero")

    @property
    def d_ab(self) -> float:
        return min(self.a - ANNULUS[0], ANNULUS[1] - self.b)

    @property
    def compact(self) -> bool:
        return ANNULUS[0] < self.a < self.b < ANNULUS[1]


def bump_cutoff(center: float = 1.0, width: float = 0.05) -> CutoffFunction:
    """``exp(-1/(1-u^2))`` with ``u = (l - center)/width`` on |u| < 1, zero outside."""
    a, b = center - width, center + width
    if not (ANNULUS[0] < a and b < ANNULUS[1]):
        raise DomainError(f"bump support ({a}, {b}) must sit inside (0.9, 1.1)")

    def phi(l):
        u = (np.asarray(l, dtype=float) - center) / width
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        ui = u[inside]
        out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
        return out if out.ndim else float(out)

    def dphi(l):
        u = (np.asarray(l, dtype=float) - center) / width
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        ui = u[inside]
        q = 1.0 - ui * ui
        out[inside] = np.exp(-1.0 / q) * (-2.0 * ui / q**2) / width
        return out if out.ndim else float(out)

    integral = radial_integral(phi, a, b)
    return CutoffFunction(phi, dphi, a, b, integral, label=f"bump(c={center}, w={width})")


def constant_cutoff() -> CutoffFunction:
    """phi = 1 on [0.9, 1.1]; not compactly supported, so the boundary term survives."""
    one = lambda l: np.ones_like(np.asarray(l, dtype=float)) if np.ndim(l) else 1.0  # noqa: E731
    zero = lambda l: np.zeros_like(np.asarray(l, dtype=float)) if np.ndim(l) else 0.0  # noqa: E731
    return CutoffFunction(one, zero, ANNULUS[0], ANNULUS[1], ANNULUS[1] - ANNULUS[0], label="constant")


def sampled_cutoff(l, values, label: str = "sampled") -> CutoffFunction:
    """Cutoff interpolated by a cubic spline from samples on a superset of [0.9, 1.1]."""
    l = np.asarray(l, dtype=float)
    spline = CubicSpline(l, np.asarray(values, dtype=float))
    deriv = spline.derivative()
    lo, hi = max(l[0], ANNULUS[0]), min(l[-1], ANNULUS[1])
    if lo > ANNULUS[0] or hi < ANNULUS[1]:
        raise DomainError("samples must cover [0.9, 1.1]")
    integral = float(spline.integrate(*ANNULUS))
    inside = tuple(float(x) for x in l if ANNULUS[0] < x < ANNULUS[1])
    return CutoffFunction(spline, deriv, ANNULUS[0], ANNULUS[1], integral, label=label, knots=inside)


@dataclass(frozen=True)
class MassBreakdown:
    r: float
    boundary_term: float
    bulk_trace_term: float
    bulk_radial_term: float
    normalizer: float
    mass_c0: float
    mass_c2_samples: tuple = field(default_factory=tuple)
    variant: str = "averaged"

    @property
    def mass_c2_mid(self) -> float:
        if not self.mass_c2_samples:
            return float("nan")
        return self.mass_c2_samples[len(self.mass_c2_samples) // 2][1]


def mass_c2(e: RadialPerturbation, r) -> float:
    """Flux of the mass integrand with V = V0 through the sphere at s = r."""
    e.require("C1")
    n = e.n
    r = np.asarray(r, dtype=float)
    a = e.alpha_at(r)
    b = e.beta_at(r)
    db = e.beta_at(r, 1)
    omega = unit_sphere_volume(n)
    one_r2 = 1.0 + r * r
    val = (n - 1) * omega * (r ** (n - 2) * one_r2 * (a - b) - r ** (n - 1) * one_r2 * db + r**n * b)
    return float(val) if val.ndim == 0 else val


def _weight(phi: CutoffFunction, r: float, variant: str):
    if variant == "literal":
        w = lambda s: phi.phi(s / r)  # noqa: E731
        dw = lambda s: phi.dphi(s / r) / r  # noqa: E731
    elif variant == "averaged":
        def w(s):
            return np.hypot(1.0, s) * phi.phi(s / r)

        def dw(s):
            v = np.hypot(1.0, s)
            return s / v * phi.phi(s / r) + v * phi.dphi(s / r) / r
    else:
        raise DomainError(f"unknown mass variant {variant!r}; choose from {VARIANTS}")
    return w, dw


def _gauss_rule(lo: float, hi: float, breakpoints=(), panels: int = 96, order: int = 12):
    """Composite Gauss-Legendre nodes and weights on [lo, hi], panels split at breakpoints."""
    cuts = np.unique(np.concatenate([np.linspace(lo, hi, panels + 1),
                                     [p for p in breakpoints if lo < p < hi]]))
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = cuts[:-1, None], cuts[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def c0_numerator(e: RadialPerturbation, w, dw, r: float, breakpoints: Sequence[float] = (),
                 quadrature: str = "auto"):
    """(boundary, bulk_trace, bulk_radial) of the annulus functional for weight w(s).

    ``quadrature`` is ``"gauss"`` (composite Gauss-Legendre, split at the breakpoints),
    ``"adaptive"`` (scipy quad per panel) or ``"auto"``: adaptive for C0 profiles,
    whose corners sit between grid nodes, Gauss otherwise.
    """
    n = e.n
    lo, hi = ANNULUS[0] * r, ANNULUS[1] * r
    if lo < e.s[0] * (1 - 1e-12) or hi > e.s[-1] * (1 + 1e-12):
        raise DomainError(f"annulus [{lo}, {hi}] leaves the sampled hull of e")
    omega = unit_sphere_volume(n)

    def boundary(s):
        return -(n - 1) * omega * s ** (n - 1) * np.hypot(1.0, s) * w(s) * e.beta_at(s)

    def trace_integrand(s):
        tr = e.alpha_at(s) + (n - 1) * e.beta_at(s)
        coef = (1.0 + s * s) * dw(s) + w(s) * (n * s + (n - 2) / s)
        return coef * tr * volume_density(s, n)

    def radial_integrand(s):
        coef = w(s) * (1.0 / s - s) - (1.0 + s * s) * dw(s)
        return coef * e.alpha_at(s) * volume_density(s, n)

    pts = list(breakpoints)
    if quadrature == "auto":
        quadrature = "adaptive" if e.regularity == "C0" else "gauss"
    if e.regularity == "C0":
        pts += [x for x in e.s if lo < x < hi]
    bdry = float(boundary(hi) - boundary(lo))
    if quadrature == "gauss":
        x, wx = _gauss_rule(lo, hi, pts)
        t_term = float(np.dot(wx, trace_integrand(x)))
        r_term = float(np.dot(wx, radial_integrand(x)))
    elif quadrature == "adaptive":
        scale = hi ** (n + 1) * max(e.sup_norm(), 1e-300)
        t_term = radial_integral(trace_integrand, lo, hi, pts, epsabs=1e-15 * scale)
        r_term = radial_integral(radial_integrand, lo, hi, pts, epsabs=1e-15 * scale)
    else:
        raise DomainError(f"unknown quadrature {quadrature!r}")
    return bdry, t_term, r_term


def mass_c0(e: RadialPerturbation, phi: CutoffFunction, r: float, variant: str = "averaged",
            c2_samples: int = 5, quadrature: str = "auto") -> MassBreakdown:
    """Annulus mass on A(0.9r, 1.1r) against the cutoff phi(s/r)."""
    if r <= 0:
        raise DomainError("radius must be positive")
    w, dw = _weight(phi, r, variant)
    pts = [phi.a * r, phi.b * r] + [k * r for k in phi.knots]
    bdry, t_term, r_term = c0_numerator(e, w, dw, r, pts, quadrature)
    if phi.compact:
        bdry = 0.0
    normalizer = r * phi.integral
    total = (bdry + t_term + r_term) / normalizer
    samples = ()
    if REGULARITY_LEVELS[e.regularity] >= REGULARITY_LEVELS["C1"] and c2_samples:
        radii = r * np.linspace(ANNULUS[0], ANNULUS[1], c2_samples)
        samples = tuple((float(x), float(mass_c2(e, x))) for x in radii)
    return MassBreakdown(float(r), bdry, t_term, r_term, normalizer, float(total), samples, variant)


def averaged_mass_c2(e: RadialPerturbation, phi: CutoffFunction, r: float) -> float:
    """``int phi(l) M_C2(r l) dl / int phi(l) dl`` by adaptive quadrature."""
    val = radial_integral(lambda l: phi.phi(l) * mass_c2(e, r * l), max(phi.a, 0.9), min(phi.b, 1.1))
    return val / phi.integral


@dataclass(frozen=True)
class MassAspect:
    radii: np.ndarray
    values: np.ndarray
    extrapolated_limit: float
    convergence_order: float
    status: str


def mass_aspect(e: RadialPerturbation, radii: Sequence[float]) -> MassAspect:
    """M_C2 along increasing radii with a fitted limit ``L + c r^-p``."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise FitError("need at least three radii")
    if np.any(np.diff(radii) <= 0):
        raise OrderingError("radii must be increasing")
    values = np.array([mass_c2(e, r) for r in radii])
    scale = np.max(np.abs(values))
    if scale == 0:
        return MassAspect(radii, values, 0.0, float("nan"), "converged")
    absval = np.abs(values)
    if np.all(np.diff(absval) > 0) and absval[-1] > 10.0 * np.median(absval):
        return MassAspect(radii, values, float("inf"), float("nan"), "divergent")
    diffs = np.abs(np.diff(values))
    tail = diffs[-3:] if diffs.size >= 3 else diffs
    status = "converged"
    if tail.size >= 2 and tail[-1] >= 0.5 * tail[0] and tail[-1] > 1e-12 * scale:
        status = "oscillating"

    def model(x, lim, c, p):
        return lim + c * np.exp(-p * np.log(x))

    try:
        # only the point estimate is used; with three radii the covariance is undefined
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(model, radii, values,
                                p0=(values[-1], (values[0] - values[-1]) * radii[0] ** 2, 2.0), maxfev=20000)
        limit, order = float(popt[0]), float(popt[2])
    except RuntimeError:
        limit, order = float(values[-1]), float("nan")
        status = "oscillating"
    return MassAspect(radii, values, limit, order, status)


@dataclass(frozen=True)
class Lemma26Record:
    lhs: float
    scalar_integral: float
    defect: float
    bound_integral: float
    bound_ratio: float


def lemma26_defect(e: RadialPerturbation, r1: float, r2: float) -> Lemma26Record:
    """Compare the change of M_C2 between two spheres with the weighted scalar curvature integral."""
    e.require("C2")
    if not r1 < r2:
        raise OrderingError(f"need r1 < r2, got ({r1}, {r2})")
    s, n = e.s, e.n
    if r1 < s[0] or r2 > s[-1]:
        raise DomainError("radii outside the sampled hull")
    lhs = float(mass_c2(e, r2) - mass_c2(e, r1))
    geom = perturbation_geometry(e)
    v = np.hypot(1.0, s)
    dens = volume_density(s, n)
    scal = CubicSpline(s, v * (geom.scalar + n * (n - 1)) * dens).integrate(r1, r2)
    da, db, dda, ddb = e.grid_derivatives(2)
    de2 = gradient_norm_sq(e.alpha, e.beta, da, db, s, n)
    e_norm = e.norm_b
    d2 = hessian_size(e.alpha, e.beta, da, db, dda, ddb, s, n)
    bound = CubicSpline(s, ((v + s) * (de2 + e_norm**2) + v * e_norm * d2) * dens).integrate(r1, r2)
    defect = lhs - float(scal)
    ratio = defect / bound if bound else 0.0
    return Lemma26Record(lhs, float(scal), defect, float(bound), float(ratio))
