"""Time-dependent cutoffs for the annulus mass and the drift of that mass along the flow.

For a cutoff phi on (0.9, 1.1) and a radius r, ``phi1(s, t)`` solves the backward problem

    (d/dt + Laplacian) phi1 = f(s) phi1   on (0, theta),   phi1(s, theta) = sqrt(1+s^2) phi(s/r),

with ``f(s) = 2n-2 + (n-1)s^-2 - 2(1+s^2)^-1`` for ``s >= 0.9r``, blended below 0.9r to the
constant ``2n-3`` by a cosine smoothstep over [0.8r, 0.9r].  In the forward variable
``tau = theta - t`` this is the heat equation ``u_tau = Lap u - f u``.

The lift ``phi = sqrt(1+s^2) phi1`` then satisfies
``(d/dt + Lap) phi = 2 s phi' + phi (3n-4 + (n-1) s^-2)`` on the annulus, and the normalized
cutoff is ``varphi_theta(l, t) = phi(l r, t) / (1 + l^2 r^2) = phi1(l r, t) / sqrt(1 + l^2 r^2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .errors import ConfigError, DomainError, FitError, InstabilityError, SamplingError
from .flow import FlowHistory, flow_integrate, flow_rhs
from .hypgeom import RadialGrid, unit_sphere_volume, volume_density
from .massfun import ANNULUS, CutoffFunction, mass_c0, sampled_cutoff
from .metrics import RadialPerturbation

__all__ = [
    "CutoffProfile",
    "CancellationRecord",
    "DriftRecord",
    "BoundaryFit",
    "BoundTriplet",
    "potential",
    "check_cutoff_parameters",
    "solve_cutoff",
    "cancellation_residual",
    "cancellation_coefficients",
    "lifted_pde_residuals",
    "static_profile",
    "commutator_residual",
    "boundary_smallness",
    "bound_triplet",
    "mass_drift",
    "two_radius_gap",
    "write_cutoff_profile",
    "write_drift",
]

BLEND = (0.8, 0.9)
LEVELS = 512


def potential(s, r: float, n: int):
    """Zeroth-order coefficient f(s) of the cutoff equation, extended below 0.9r."""
    s = np.asarray(s, dtype=float)
    formula = 2.0 * n - 2.0 + (n - 1) / (s * s) - 2.0 / (1.0 + s * s)
    lo, hi = BLEND[0] * r, BLEND[1] * r
    x = np.clip((s - lo) / (hi - lo), 0.0, 1.0)
    step = 0.5 - 0.5 * np.cos(np.pi * x)
    return np.where(s >= hi, formula, (1.0 - step) * (2.0 * n - 3.0) + step * formula)


def check_cutoff_parameters(phi: CutoffFunction, r: float, theta: float, n: int):
    """Raise ConfigError unless ``0 < theta < 2 d_ab^2 / n`` and ``r > sqrt(n-1)/0.9``."""
    limit = 2.0 * phi.d_ab**2 / n
    if not (0.0 < theta < limit):
        raise ConfigError(f"theta = {theta:.6g} violates the cutoff range 0 < theta < 2 d_ab^2/n = {limit:.6g}")
    r0 = math.sqrt(n - 1) / 0.9
    if not r > r0:
        raise ConfigError(f"r = {r} must exceed sqrt(n-1)/0.9 = {r0:.6g}")


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """Space-time samples of phi1 on a log grid in s and the stored time levels."""

    theta: float
    r: float
    n: int
    grid: RadialGrid
    t: np.ndarray
    phi1: np.ndarray
    f: np.ndarray
    cutoff: CutoffFunction
    order: int
    steps: int
    metadata: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return self.grid.s

    @property
    def l(self) -> np.ndarray:
        return self.grid.s / self.r

    @cached_property
    def v0(self) -> np.ndarray:
        return np.hypot(1.0, self.grid.s)

    @property
    def phi(self) -> np.ndarray:
        """Lifted profile ``sqrt(1+s^2) phi1``."""
        return self.v0 * self.phi1

    @property
    def varphi_theta(self) -> np.ndarray:
        """Normalized cutoff ``phi(lr, t)/(1 + l^2 r^2)`` on the nodes ``l = s/r``."""
        return self.phi1 / self.v0

    def level(self, t: float) -> np.ndarray:
        """phi1 at time t, cubic in t between stored levels."""
        if not (-1e-15 <= t <= self.theta * (1 + 1e-12)):
            raise SamplingError(f"t = {t} outside [0, theta]")
        k = np.searchsorted(self.t, t)
        if k < self.t.size and math.isclose(self.t[k], t, rel_tol=0, abs_tol=1e-12 * self.theta):
            return self.phi1[k]
        return self._time_spline(t)

    @cached_property
    def _time_spline(self):
        return CubicSpline(self.t, self.phi1, axis=0)

    def cutoff_at(self, t: float) -> CutoffFunction:
        """``varphi_theta(., t)`` as a cutoff in l."""
        vals = self.level(t) / self.v0
        return sampled_cutoff(self.l, vals, label=f"varphi_theta(t={t:.6g})")


def _second_order_operator(grid: RadialGrid, f: np.ndarray):
    """Three-point ``Lap - f`` in x = ln s; an M-matrix when the grid resolves the drift."""
    s, n = grid.s, grid.n
    h = grid.h
    a = 1.0 + 1.0 / (s * s)
    b = (n - 1) + (n - 2) / (s * s)
    lower = a / h**2 - b / (2 * h)
    upper = a / h**2 + b / (2 * h)
    diag = -2.0 * a / h**2 - f
    if np.any(lower[1:-1] <= 0):
        raise ConfigError("grid too coarse for a monotone cutoff discretization")
    return sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], format="csr"), a


def solve_cutoff(phi: CutoffFunction, r: float, theta: float, n: int, num_nodes: int = 1601,
                 levels: int = LEVELS, order: int = 2, extent=(0.6, 1.4),
                 rannacher: bool = True) -> CutoffProfile:
    """Crank-Nicolson solve of the cutoff equation on ``[0.6 r, 1.4 r]`` with zero end values.

    ``order=2`` uses a monotone three-point operator and takes enough substeps per stored
    level that ``dt (a/h^2 + f/2) <= 1``, which makes every step positivity preserving.
    ``order=4`` uses the fourth-order grid Laplacian and ``levels`` steps; it is the
    accurate choice for drift experiments.
    """
    check_cutoff_parameters(phi, r, theta, n)
    if order not in (2, 4):
        raise ConfigError("order must be 2 or 4")
    nodes = np.exp(np.linspace(math.log(extent[0] * r), math.log(extent[1] * r), num_nodes))
    grid = RadialGrid(n=n, nodes=nodes, spacing="log")
    s = grid.s
    f = potential(s, r, n)
    u0 = np.hypot(1.0, s) * phi.phi(s / r)
    u0[0] = u0[-1] = 0.0
    if order == 2:
        op, a = _second_order_operator(grid, f)
        need = theta * (np.max(a) / grid.h**2 + 0.5 * np.max(f))
        substeps = max(1, math.ceil(need / levels))
    else:
        op = sp.csr_matrix(grid.laplacian_matrix - sp.diags(f))
        substeps = 1
    steps = levels * substeps
    dt = theta / steps
    interior = np.ones(num_nodes)
    interior[0] = interior[-1] = 0.0
    mask = sp.diags(interior)
    eye = sp.identity(num_nodes, format="csr")
    # Dirichlet rows are identity rows carrying the zero end values
    lhs = (mask @ (eye - 0.5 * dt * op) + sp.diags(1.0 - interior)).tocsc()
    rhs_op = mask @ (eye + 0.5 * dt * op)
    lu = splu(lhs)
    # Rannacher start: four implicit Euler half steps damp the stiff modes of the data
    start = splu((mask @ (eye - 0.5 * dt * op) + sp.diags(1.0 - interior)).tocsc()) if rannacher else None
    out = np.empty((levels + 1, num_nodes))
    out[0] = u0
    u = u0.copy()
    done = 0
    for k in range(1, levels + 1):
        for _ in range(substeps):
            if rannacher and done < 2:
                u = start.solve(mask @ start.solve(mask @ u))
            else:
                u = lu.solve(rhs_op @ u)
            done += 1
        out[k] = u
    if out.min() < -1e-10 * out.max():
        raise InstabilityError(f"cutoff lost positivity (min {out.min():.3e})", theta)
    # stored against tau; flip so row k is t_k = k theta / levels
    phi1 = out[::-1].copy()
    t = np.linspace(0.0, theta, levels + 1)
    meta = {"f_extension": f"cosine smoothstep from {2 * n - 3} over [{BLEND[0]}r, {BLEND[1]}r]",
            "extent": tuple(extent), "dt": dt, "min_phi1": float(phi1.min())}
    return CutoffProfile(theta, float(r), n, grid, t, phi1, f, phi, order, steps, meta)


# -- A = B = 0 -------------------------------------------------------------

@dataclass(frozen=True)
class CancellationRecord:
    A_residual: float
    B_residual: float
    phi_prime_pde_residual: float
    phi_pde_residual: float
    scale: float


def static_profile(profile: CutoffProfile) -> CutoffProfile:
    """Negative control: the final data frozen for all t."""
    frozen = np.broadcast_to(profile.phi1[-1], profile.phi1.shape).copy()
    return CutoffProfile(profile.theta, profile.r, profile.n, profile.grid, profile.t, frozen,
                         profile.f, profile.cutoff, profile.order, profile.steps,
                         dict(profile.metadata, static=True))


def _inv_s_laplacian(s, n):
    return (2.0 - n) / s + (3.0 - n) / s**3


def cancellation_coefficients(s, n, phi, dphi, P_phi, P_dphi):
    """The coefficients A and B of the mass drift, from ``phi``, ``phi'`` and ``P = d/dt + Lap`` of both.

    Plain arithmetic only, so the same code accepts arrays or symbolic expressions.
    """
    lap_inv = _inv_s_laplacian(s, n)
    A = (P_dphi + (n - 2) / s * P_phi
         + phi * (2 * (n - 2) * (1 - n) / s + (n - 2) * lap_inv + 2 / s**3)
         + dphi * (2 * (1 - n) - 2 * (n - 2) * (1 + 1 / s**2) - 2 / s**2))
    B = (-P_dphi + P_phi / s + phi * (lap_inv + 2 * (1 - n) / s - 2 * n / s**3)
         + dphi * (2 * (n - 1) + 2 * n / s**2 - 2 - 2 / s**2))
    return A, B


def lifted_pde_residuals(s, n, phi, dphi, P_phi, P_dphi):
    """Residuals of ``P phi = 2 s phi' + phi (3n-4 + (n-1) s^-2)`` and of its s-derivative form
    ``P phi' = phi' (2(n-1) + 2(n-1) s^-2) - 2(n-1) s^-3 phi``."""
    r_phi = P_phi - (2 * s * dphi + phi * (3 * n - 4 + (n - 1) / s**2))
    r_dphi = P_dphi - (dphi * (2 * (n - 1) + 2 * (n - 1) / s**2) - 2 * (n - 1) / s**3 * phi)
    return r_phi, r_dphi


def cancellation_residual(profile: CutoffProfile, annulus=ANNULUS, layer: float = 0.1) -> CancellationRecord:
    """Max-norm of the coefficients A and B multiplying tr e and alpha in the drift of the mass.

    With ``P = (d/dt + Lap)``:

        A = P phi' + (n-2) s^-1 P phi + phi [2(n-2)(1-n) s^-1 + (n-2) Lap(s^-1) + 2 s^-3]
            + phi' [2(1-n) - 2(n-2)(1+s^-2) - 2 s^-2]
        B = -P phi' + s^-1 P phi + phi [Lap(s^-1) + 2(1-n) s^-1 - 2n s^-3]
            + phi' [2(n-1) + 2n s^-2 - 2 - 2 s^-2]

    Space derivatives use the fourth-order grid stencils, time derivatives centered
    differences between stored levels.  The norm runs over the nodes of the annulus and
    the interior levels with ``t <= (1 - layer) theta``: next to ``t = theta`` the profile
    still carries the high derivatives of the final data, which no fixed time step
    resolves.  All residuals are divided by ``scale = max |phi'(., theta)|`` on the annulus.
    """
    grid = profile.grid
    s, n = grid.s, profile.n
    if profile.t.size < 3:
        raise SamplingError("need at least three time levels")
    d1, d2, d3 = grid.diff_matrix(1), grid.diff_matrix(2), grid.diff_matrix(3)
    phi = profile.phi.T
    p1 = d1 @ phi
    p2 = d2 @ phi
    p3 = d3 @ phi
    c, b1 = (1.0 + s * s)[:, None], (n * s + (n - 1) / s)[:, None]
    lap = c * p2 + b1 * p1
    lap_p1 = c * p3 + b1 * p2
    dt = np.diff(profile.t)
    if not np.allclose(dt, dt[0]):
        raise SamplingError("time levels must be uniform")
    dphi_t = (phi[:, 2:] - phi[:, :-2]) / (2.0 * dt[0])
    dp1_t = (p1[:, 2:] - p1[:, :-2]) / (2.0 * dt[0])
    sl = slice(1, -1)
    S = s[:, None]
    P_phi = dphi_t + lap[:, sl]
    P_p1 = dp1_t + lap_p1[:, sl]
    ph, ph1 = phi[:, sl], p1[:, sl]
    A, B = cancellation_coefficients(S, n, ph, ph1, P_phi, P_p1)
    pde_phi, pde_p1 = lifted_pde_residuals(S, n, ph, ph1, P_phi, P_p1)
    m = (s >= annulus[0] * profile.r) & (s <= annulus[1] * profile.r)
    keep = profile.t[1:-1] <= (1.0 - layer) * profile.theta
    if keep.sum() < 2:
        raise SamplingError("too few time levels outside the terminal layer")
    scale = float(np.max(np.abs(p1[m, -1])))
    norm = lambda x: float(np.max(np.abs(x[m][:, keep]))) / scale  # noqa: E731
    return CancellationRecord(norm(A), norm(B), norm(pde_p1), norm(pde_phi), scale)


def commutator_residual(u, grid: RadialGrid) -> float:
    """``max |Lap(u') - (Lap u)' + 2 s u'' + (n - (n-1) s^-2) u'|`` on the interior nodes."""
    s, n = grid.s, grid.n
    u = np.asarray(u, dtype=float)
    du = grid.derivative(u, 1)
    lhs = grid.laplacian_matrix @ du
    rhs = grid.derivative(grid.laplacian_matrix @ u, 1) - 2.0 * s * grid.derivative(u, 2) \
        - (n - (n - 1) / (s * s)) * du
    inner = slice(6, -6)
    return float(np.max(np.abs(lhs - rhs)[inner]))


# -- estimates -------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryFit:
    radii: tuple
    thetas: tuple
    values: np.ndarray
    C: float
    c: float
    per_radius_c: tuple
    per_radius_r2: tuple
    holds: bool


def boundary_smallness(phi: CutoffFunction, radii, thetas, n: int, num_nodes: int = 1601) -> BoundaryFit:
    """Fit ``sup_t |phi1(0.9r, t)| <= C theta^(-n/2) exp(-d_ab^2 r^2 / (c theta)) r^n``.

    For each r the exponent is fitted by least squares in ``1/theta``; the joint c is
    the largest per-radius value (a larger c only weakens the exponential) and C is
    the smallest constant making the bound hold at every sample.
    """
    radii, thetas = tuple(float(r) for r in radii), tuple(float(t) for t in thetas)
    d2 = phi.d_ab**2
    vals = np.empty((len(radii), len(thetas)))
    for i, r in enumerate(radii):
        for j, th in enumerate(thetas):
            prof = solve_cutoff(phi, r, th, n, num_nodes=num_nodes)
            spline = CubicSpline(prof.s, prof.phi1, axis=1)
            vals[i, j] = float(np.max(np.abs(spline(0.9 * r))))
    if np.any(vals <= 0):
        raise FitError("boundary values vanished; widen theta range")
    per_c, per_r2 = [], []
    th = np.array(thetas)
    for i, r in enumerate(radii):
        y = np.log(vals[i]) + 0.5 * n * np.log(th) - n * math.log(r)
        slope, icpt = np.polyfit(1.0 / th, y, 1)
        if slope >= 0:
            raise FitError(f"no exponential decay in 1/theta at r = {r}")
        pred = slope / th + icpt
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        per_c.append(d2 * r * r / -slope)
        per_r2.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)
    c = max(per_c)
    bound_shape = np.array([[th_ ** (-n / 2.0) * math.exp(-d2 * r * r / (c * th_)) * r**n for th_ in thetas]
                            for r in radii])
    C = float(np.max(vals / bound_shape))
    holds = bool(np.all(vals <= C * bound_shape * (1 + 1e-12)))
    return BoundaryFit(radii, thetas, vals, C, c, tuple(per_c), tuple(per_r2), holds)


@dataclass(frozen=True)
class BoundTriplet:
    radii: tuple
    ratios: np.ndarray
    C: float


def bound_triplet(phi: CutoffFunction, radii, theta: float, n: int, num_nodes: int = 1601) -> BoundTriplet:
    """Columns ``sup|phi1|/r``, ``sup|phi1'|``, ``r sup|phi1''|`` per radius; C is their max."""
    rows = []
    for r in radii:
        prof = solve_cutoff(phi, r, theta, n, num_nodes=num_nodes)
        g = prof.grid
        u = prof.phi1.T
        rows.append([np.max(np.abs(u)) / r, np.max(np.abs(g.diff_matrix(1) @ u)),
                     r * np.max(np.abs(g.diff_matrix(2) @ u))])
    ratios = np.array(rows)
    return BoundTriplet(tuple(float(r) for r in radii), ratios, float(ratios.max()))


# -- mass drift --------------------------------------------------------------

@dataclass(frozen=True)
class DriftRecord:
    r: float
    theta: float
    drift_integral: float
    normalized_drift_integral: float
    times: np.ndarray
    numerator: np.ndarray
    numerator_rate: np.ndarray
    mass_rate: np.ndarray
    method: str


def _bilinear(alpha, beta, w, dw, s, n, lo, hi):
    """Bulk plus boundary numerator of the literal annulus mass on ``[lo, hi]``.

    Profiles are sampled on a fine grid covering the annulus; the integrand is
    interpolated by a cubic spline and integrated exactly between the ends.
    """
    tr = alpha + (n - 1) * beta
    coef_t = (1.0 + s * s) * dw + w * (n * s + (n - 2) / s)
    coef_a = w * (1.0 / s - s) - (1.0 + s * s) * dw
    bulk = CubicSpline(s, volume_density(s, n) * (coef_t * tr + coef_a * alpha)).integrate(lo, hi)
    edge = CubicSpline(s, -(n - 1) * unit_sphere_volume(n) * s ** (n - 1) * np.hypot(1.0, s) * w * beta)
    return float(bulk + edge(hi) - edge(lo))


def mass_drift(e0: RadialPerturbation, phi: CutoffFunction, r: float, theta: float,
               history: FlowHistory | None = None, profile: CutoffProfile | None = None,
               method: str = "pde", num_times: int = 65, flow_kwargs=None) -> DriftRecord:
    """Time integrals of ``|d/dt N(t)|`` and ``|d/dt M(t)|`` along the flow.

    ``N(t)`` is the literal annulus numerator of ``g_t`` against ``varphi_theta(., t)`` and
    ``M(t) = N(t) / (r int varphi_theta(l, t) dl)``.  With ``method="pde"`` the rates come
    from the equations themselves (``d e/dt`` from the flow right-hand side and
    ``d phi1/dt = -Lap phi1 + f phi1``); ``method="centered"`` differences N in time.
    """
    n = e0.n
    if profile is None:
        profile = solve_cutoff(phi, r, theta, n)
    if not (math.isclose(profile.r, r) and math.isclose(profile.theta, theta)):
        raise ConfigError(f"cutoff profile built for (r, theta) = ({profile.r}, {profile.theta}), "
                          f"not ({r}, {theta})")
    if method not in ("pde", "centered"):
        raise ConfigError(f"unknown drift method {method!r}")
    lo, hi = ANNULUS[0] * r, ANNULUS[1] * r
    if not (e0.s[0] < lo and hi < e0.s[-1]):
        raise DomainError("perturbation grid must cover the annulus")
    if history is None:
        times = np.linspace(0.0, theta, num_times)
        kw = dict(window=(e0.s[0], 0.8 * e0.s[-1]))
        kw.update(flow_kwargs or {})
        history = flow_integrate(e0, theta, snapshot_times=times[1:], **kw)
    states = [st for st in history.states if st.t <= theta * (1 + 1e-12)]
    times = np.array([st.t for st in states])
    if times.size < 3:
        raise SamplingError("need at least three flow snapshots in [0, theta]")

    grid = profile.grid
    s = grid.s
    keep = (s > 0.85 * r) & (s < 1.15 * r)
    sk = s[keep]
    v = np.hypot(1.0, s)
    lap = grid.laplacian_matrix
    d1 = grid.diff_matrix(1)

    def weights(u):
        # literal weight varphi_theta(s/r) = phi1/V and its s-derivative
        du = d1 @ u
        return (u / v)[keep], ((du - s * u / (v * v)) / v)[keep]

    def sample(st, fa, fb):
        return CubicSpline(st.e_t.s, fa)(sk), CubicSpline(st.e_t.s, fb)(sk)

    def denominator(u):
        return float(CubicSpline(sk, (u / v)[keep]).integrate(lo, hi))

    num, den, num_rate, den_rate = [], [], [], []
    for st, t in zip(states, times):
        u = profile.level(t)
        w, dw = weights(u)
        a, b = sample(st, st.e_t.alpha, st.e_t.beta)
        num.append(_bilinear(a, b, w, dw, sk, n, lo, hi))
        den.append(denominator(u))
        if method == "pde":
            rate = flow_rhs(st)
            ra, rb = sample(st, rate.alpha, rate.beta)
            du = -(lap @ u) + profile.f * u
            wt, dwt = weights(du)
            num_rate.append(_bilinear(ra, rb, w, dw, sk, n, lo, hi) + _bilinear(a, b, wt, dwt, sk, n, lo, hi))
            den_rate.append(denominator(du))
    num, den = np.array(num), np.array(den)
    if method == "pde":
        dN, dD = np.array(num_rate), np.array(den_rate)
    else:
        dN, dD = np.gradient(num, times), np.gradient(den, times)
    dM = (dN * den - num * dD) / den**2
    drift = float(np.trapezoid(np.abs(dN), times))
    ndrift = float(np.trapezoid(np.abs(dM), times))
    return DriftRecord(float(r), float(theta), drift, ndrift, times, num, dN, dM, method)


def two_radius_gap(e0: RadialPerturbation, phi: CutoffFunction, phibar: CutoffFunction, r: float,
                   rprime: float, eta: float, variant: str = "averaged", num_nodes: int = 1601) -> float:
    """``M_C0(g, varphibar_{r'^-eta}(., 0), r') - M_C0(g, varphi_{r^-eta}(., 0), r)`` at the initial data."""
    n = e0.n
    tau = e0.tau
    lo_eta, hi_eta = (tau - 1.0) / 2.0, 2.0 * tau - n
    if not (lo_eta <= eta < hi_eta):
        raise ConfigError(f"eta = {eta} outside [{lo_eta}, {hi_eta})")
    if not ((1.1 / 0.9) * r * (1 - 1e-12) <= rprime <= 10.0 * r):
        raise ConfigError(f"r' = {rprime} outside [(1.1/0.9) r, 10 r]")
    masses = []
    for cut, rad in ((phibar, rprime), (phi, r)):
        prof = solve_cutoff(cut, rad, rad ** (-eta), n, num_nodes=num_nodes)
        masses.append(mass_c0(e0, prof.cutoff_at(0.0), rad, variant=variant, c2_samples=0).mass_c0)
    return float(masses[0] - masses[1])


# -- output ----------------------------------------------------------------

def write_cutoff_profile(profile: CutoffProfile, path, every: int = 1):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "t", "phi1", "phi", "varphi_theta"])
        for k in range(0, profile.t.size, every):
            for j, s in enumerate(profile.s):
                p1 = profile.phi1[k, j]
                w.writerow([repr(float(s)), repr(float(profile.t[k])), repr(float(p1)),
                            repr(float(profile.v0[j] * p1)), repr(float(p1 / profile.v0[j]))])


def write_drift(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "theta", "drift", "normalized_drift"])
        for rec in records:
            w.writerow([repr(rec.r), repr(rec.theta), repr(rec.drift_integral), repr(rec.normalized_drift_integral)])
