"""Normalized Ricci-DeTurck flow relative to b, reduced to the radial profiles (alpha, beta).

The flow is ``d/dt g = -2 Ric(g) - 2(n-1) g + L_W g`` with the DeTurck field
``W^k = g^pq (Gamma(g)^k_pq - Gamma(b)^k_pq)``.  For ``g = A ds^2 + B g_round`` the
only component of W is radial and, with ``P = 1+alpha``, ``Q = 1+beta``,

    W^s = (1+s^2) [ alpha'/(2P^2) - (n-1) beta'/(2PQ) + (n-1)(alpha-beta)/(s P Q) ].

The componentwise rates are

    d alpha/dt = (1+s^2) [ -2 A Ric_rad - 2(n-1) A + W^s A_s + 2 A (W^s)_s ]
    d beta/dt  = s^-2   [ -2 B Ric_tan - 2(n-1) B + W^s B_s ]

(orthonormal-frame Ricci from :mod:`ahmass.curvature`).  Both equations have the
principal part ``(1+s^2)/(1+alpha) d^2/ds^2``; the flow is integrated with a
linearly implicit Euler scheme that treats this part and the linearized
zeroth-order coupling implicitly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .curvature import gradient_norm_sq, hessian_size, perturbation_geometry
from .errors import AmplitudeError, ConfigError, DomainError, InstabilityError, MetricError, SamplingError
from .hypgeom import RadialGrid, unit_sphere_volume, volume_density
from .metrics import RadialPerturbation

__all__ = [
    "FlowRate",
    "FlowState",
    "FlowHistory",
    "NormReport",
    "SmoothingFit",
    "EvolutionResidual",
    "Theorem35Evaluation",
    "WeakBoundRecord",
    "flow_rhs",
    "linear_operator",
    "linearized_rhs",
    "flow_integrate",
    "xt_yt_norms",
    "smoothing_exponents",
    "scalar_evolution_residual",
    "reparametrization_residual",
    "theorem35_certificate",
    "weak_scalar_lower_bound",
    "write_flow_diag",
]

EPS_MAX = 0.1
T_MAX = 1.0
SCHEMES = ("euler", "ros2")
ROS2_GAMMA = 1.0 + 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class FlowRate:
    alpha: np.ndarray
    beta: np.ndarray
    deturck_w: np.ndarray


@dataclass(frozen=True)
class FlowState:
    t: float
    e_t: RadialPerturbation
    deturck_w: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _profile_derivs(e: RadialPerturbation):
    # The integrator feeds C0 data through here at t = 0; grid stencils are used regardless of tag.
    g = e.grid
    if e.regularity != "C0":
        return e.grid_derivatives(2)
    return (g.derivative(e.alpha, 1), g.derivative(e.beta, 1),
            g.derivative(e.alpha, 2), g.derivative(e.beta, 2))


def _rates(e: RadialPerturbation, derivs=None, normalized: bool = True):
    s, n = e.s, e.n
    a, b = e.alpha, e.beta
    da, db, dda, ddb = _profile_derivs(e) if derivs is None else derivs
    P, Q = 1.0 + a, 1.0 + b
    if np.any(P <= 0) or np.any(Q <= 0):
        raise MetricError("flow metric lost positivity")
    c = 1.0 + s * s
    PQ = P * Q
    psi = a - b
    w = da / (2.0 * P * P) - (n - 1) * db / (2.0 * PQ) + (n - 1) * psi / (s * PQ)
    dPQ = da * Q + P * db
    dw = (dda / (2.0 * P * P) - da * da / P**3
          - 0.5 * (n - 1) * (ddb / PQ - db * dPQ / PQ**2)
          + (n - 1) * ((da - db) / (s * PQ) - psi / (s * s * PQ) - psi * dPQ / (s * PQ**2)))
    W = c * w
    dW = 2.0 * s * w + c * dw
    geom = perturbation_geometry(e, derivs=(da, db, dda, ddb))
    A, A_s = geom.A, geom.A_s
    norm = 2.0 * (n - 1) if normalized else 0.0
    # -2 A Ric_rad - 2(n-1) A grouped so the O(1) parts cancel before scaling
    rate_a = c * (-2.0 * A * geom.ric_radial - norm * A + W * A_s + 2.0 * A * dW)
    rate_b = Q * (-2.0 * geom.ric_tangential - norm) + W * (db + 2.0 * Q / s)
    return rate_a, rate_b, W, geom


def flow_rhs(state, normalized: bool = True) -> FlowRate:
    """Rate of (alpha, beta) under the normalized (or, with ``normalized=False``, plain) b-flow."""
    e = state.e_t if isinstance(state, FlowState) else state
    ra, rb, W, _ = _rates(e, normalized=normalized)
    return FlowRate(ra, rb, W)


def _linear_blocks(grid: RadialGrid, principal=None):
    s, n = grid.s, grid.n
    c = 1.0 + s * s
    c2 = c / (s * s)
    coef2 = c if principal is None else principal
    lap = sp.diags(coef2) @ grid.diff_matrix(2) + sp.diags(n * s + (n - 1) / s) @ grid.diff_matrix(1)
    aa = lap + sp.diags(-2.0 * (n - 1) * c2 + 2.0 - 2.0)
    ab = sp.diags(2.0 * (n - 1) * c2 - 2.0 * (n - 1))
    ba = sp.diags(2.0 * c2 - 2.0)
    bb = lap + sp.diags(-2.0 * c2 + 2.0 - 2.0 * (n - 1))
    return sp.bmat([[aa, ab], [ba, bb]], format="csr")


def linear_operator(grid: RadialGrid) -> sp.csr_matrix:
    """Sparse matrix of ``-L`` on stacked ``[alpha; beta]``, ``L h = -Delta h - 2h + 2 (tr h) b``.

    Radial reduction of the rough Laplacian on ``h = beta b + (alpha - beta) N N``:
    the alpha row is ``Delta alpha - 2(n-1)(1+s^2)s^-2 (alpha-beta) + 2 alpha - 2 tr``
    and the beta row ``Delta beta + 2(1+s^2)s^-2 (alpha-beta) + 2 beta - 2 tr``.
    """
    return _linear_blocks(grid)


def linearized_rhs(e: RadialPerturbation):
    out = linear_operator(e.grid) @ np.concatenate([e.alpha, e.beta])
    return out[: e.grid.size], out[e.grid.size:]


# -- diagnostics ---------------------------------------------------------

def _diagnostics(e: RadialPerturbation, mask, derivs=None):
    s, n = e.s, e.n
    da, db, dda, ddb = _profile_derivs(e) if derivs is None else derivs
    dh = np.sqrt(gradient_norm_sq(e.alpha, e.beta, da, db, s, n))
    d2h = hessian_size(e.alpha, e.beta, da, db, dda, ddb, s, n)
    geom = perturbation_geometry(e, derivs=(da, db, dda, ddb))
    return {
        "sup_h": float(np.max(e.norm_b[mask])),
        "sup_Dh": float(np.max(dh[mask])),
        "sup_D2h": float(np.max(d2h[mask])),
        "inf_R": float(np.min(geom.scalar[mask])),
    }


@dataclass
class FlowHistory(Sequence):
    """Snapshots of one flow run together with the settings that produced them."""

    states: list
    e0: RadialPerturbation
    window: tuple
    settings: dict

    def __getitem__(self, i):
        return self.states[i]

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.states])

    @property
    def grid(self) -> RadialGrid:
        return self.e0.grid

    @property
    def mask(self) -> np.ndarray:
        s = self.grid.s
        return (s >= self.window[0]) & (s <= self.window[1])

    def restricted(self, t_lo: float, t_hi: float) -> "FlowHistory":
        """The snapshots with ``t_lo <= t <= t_hi``, same settings."""
        keep = [st for st in self.states if t_lo <= st.t <= t_hi]
        return FlowHistory(keep, self.e0, self.window, dict(self.settings))

    def at(self, t: float) -> FlowState:
        times = self.times
        k = int(np.argmin(np.abs(times - t)))
        if not math.isclose(times[k], t, rel_tol=1e-9, abs_tol=1e-15):
            raise SamplingError(f"no snapshot at t = {t}")
        return self.states[k]


def flow_integrate(e0: RadialPerturbation, T: float, snapshot_times=None, num_snapshots: int = 40,
                   dt0: float = 1e-8, growth: float = 1.05, dt_max: float = 1e-3,
                   eps_max: float = EPS_MAX, T_max: float = T_MAX, sponge: float = 0.95,
                   window=None, growth_limit: float = 4.0, scheme: str = "euler",
                   ros2_after: float = 0.0) -> FlowHistory:
    """Integrate the normalized b-flow from ``e0`` up to time ``T``.

    ``scheme="euler"`` (default): linearly implicit Euler,
    ``(I - dt P_k)(h_{k+1} - h_k) = dt F(h_k)``, where ``P_k`` is the linear operator with its
    second-order coefficient replaced by the frozen ``(1+s^2)/(1+alpha_k)``.  L-stable and
    first order; suited to C0 data.

    ``scheme="ros2"``: the two-stage Rosenbrock W-method with ``gamma = 1 + 1/sqrt(2)``,

        (I - gamma dt P_k) k1 = F(h_k)
        (I - gamma dt P_k) k2 = F(h_k + dt k1) - 2 k1
        h_{k+1} = h_k + dt (3 k1 + k2) / 2,

    second order for any approximate Jacobian P_k and still L-stable.  Its stages are
    increments, so the inner-node derivative keeps its value instead of being reset.  On
    rough (C0) data the gradient terms left out of P_k are stiff at first; Euler steps are
    then taken while ``t < ros2_after`` and the second-order scheme only afterwards.

    Rows at the inner node impose ``h' = 0`` (on the increments for ros2); nodes in the sponge
    ``s >= sponge * s_max``    are pinned to their initial values.
    """
    grid = e0.grid
    s, N, n = grid.s, grid.size, grid.n
    if not (0 < T <= T_max):
        raise ConfigError(f"flow horizon T = {T} outside (0, {T_max}]")
    sup0 = e0.sup_norm()
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown time scheme {scheme!r}; choose from {SCHEMES}")
    if sup0 >= eps_max:
        raise AmplitudeError(f"sup|e0| = {sup0:.4g} exceeds the smallness gate {eps_max}")
    if window is None:
        window = (s[0], 0.8 * s[-1])
    if window[1] > 0.8 * s[-1] * (1 + 1e-12):
        raise DomainError("diagnostic window must stay below 0.8 s_max")
    mask = (s >= window[0]) & (s <= window[1])

    if snapshot_times is None:
        snapshot_times = np.geomspace(T * 1e-4, T, num_snapshots)
    targets = sorted({float(x) for x in snapshot_times if 0 < x <= T} | {float(T)})

    pinned = s >= sponge * s[-1]
    free = ~pinned
    free[0] = False
    free2 = np.concatenate([free, free]).astype(float)
    h0 = np.concatenate([e0.alpha, e0.beta])
    bvals = np.concatenate([np.where(pinned, e0.alpha, 0.0), np.where(pinned, e0.beta, 0.0)])
    limit = growth_limit * max(sup0, 1e-8)

    # system matrix assembled in COO form from three fixed pieces:
    # identity/boundary rows, the coefficient-free linear part, and the second-derivative blocks
    fixed = sp.diags(free2) @ _linear_blocks(grid, principal=np.zeros(N))
    d2 = sp.diags(free2) @ sp.block_diag([grid.diff_matrix(2), grid.diff_matrix(2)])
    d1row = grid.diff_matrix(1).tocsr()[0].toarray().ravel()
    nz = np.flatnonzero(d1row)
    pin_idx = np.flatnonzero(np.concatenate([pinned, pinned]))
    b_rows = np.concatenate([np.zeros(nz.size, int), np.full(nz.size, N), pin_idx])
    b_cols = np.concatenate([nz, nz + N, pin_idx])
    b_vals = np.concatenate([d1row[nz], d1row[nz], np.ones(pin_idx.size)])
    fixed, d2 = fixed.tocoo(), d2.tocoo()
    diag_idx = np.flatnonzero(free2)
    rows = np.concatenate([b_rows, diag_idx, fixed.row, d2.row])
    cols = np.concatenate([b_cols, diag_idx, fixed.col, d2.col])

    def system(step, coef):
        data = np.concatenate([b_vals, np.ones(diag_idx.size), -step * fixed.data,
                               -step * coef[d2.row] * d2.data])
        return sp.csc_matrix((data, (rows, cols)), shape=(2 * N, 2 * N))

    pfix = _linear_blocks(grid, principal=np.zeros(N))
    d2full = sp.block_diag([grid.diff_matrix(2), grid.diff_matrix(2)]).tocsr()

    def make_state(t, e, derivs):
        ra, rb, W, _ = _rates(e, derivs)
        return FlowState(t, e, W, _diagnostics(e, mask, derivs))

    e = e0
    derivs = _profile_derivs(e)
    states = [make_state(0.0, e, derivs)]
    t, dt_nom = 0.0, dt0
    h = h0.copy()
    for target in targets:
        while t < target * (1 - 1e-13):
            step = min(dt_nom, target - t)
            ra, rb, _, _ = _rates(e, derivs)
            coef = np.tile((1.0 + s * s) / (1.0 + e.alpha), 2)
            if scheme == "euler" or t < ros2_after:
                ph = pfix @ h + coef * (d2full @ h)
                rhs = h + step * (np.concatenate([ra, rb]) - ph)
                h = splu(system(step, coef)).solve(np.where(free2 > 0, rhs, bvals))
            else:
                lu = splu(system(ROS2_GAMMA * step, coef))
                k1 = lu.solve(np.where(free2 > 0, np.concatenate([ra, rb]), 0.0))
                h1 = h + step * k1
                if np.any(1.0 + h1 <= 0):
                    raise InstabilityError("flow lost positivity in the first stage", t)
                e1 = RadialPerturbation(grid, h1[:N], h1[N:], tau=e0.tau, regularity="C2")
                ra1, rb1, _, _ = _rates(e1)
                k2 = lu.solve(np.where(free2 > 0, np.concatenate([ra1, rb1]) - 2.0 * k1, 0.0))
                h = h + step * (1.5 * k1 + 0.5 * k2)
            t = target if step == target - t else t + step
            alpha, beta = h[:N], h[N:]
            if not np.all(np.isfinite(h)) or np.any(1.0 + alpha <= 0) or np.any(1.0 + beta <= 0):
                raise InstabilityError("flow lost positivity", t)
            sup_now = float(np.max(np.sqrt(alpha**2 + (n - 1) * beta**2)))
            if sup_now > limit:
                raise InstabilityError(f"sup|h| grew to {sup_now:.4g} (> {growth_limit}x initial)", t)
            e = RadialPerturbation(grid, alpha, beta, tau=e0.tau, regularity="C2",
                                   label=f"{e0.label}@t")
            derivs = _profile_derivs(e)
            dt_nom = min(dt_nom * growth, dt_max)
        states.append(make_state(t, e, derivs))
    settings = dict(T=T, dt0=dt0, growth=growth, dt_max=dt_max, eps_max=eps_max, sponge=sponge, scheme=scheme,
                    ros2_after=ros2_after, n=n, num_nodes=N, s_min=float(s[0]), s_max=float(s[-1]))
    return FlowHistory(states, e0, tuple(float(x) for x in window), settings)


def write_flow_diag(history: FlowHistory, path):
    """``flow_diag.csv``: one row per snapshot; X_T_partial is the running sup of sup|h|."""
    running = 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "sup_h", "sup_Dh", "sup_D2h", "inf_R", "X_T_partial"])
        for st in history:
            d = st.diagnostics
            if st.t > 0:
                running = max(running, d["sup_h"])
            w.writerow([repr(float(st.t))] + [repr(float(d[k])) for k in ("sup_h", "sup_Dh", "sup_D2h", "inf_R")]
                       + [repr(float(running))])


# -- parabolic X_T / Y_T norms -------------------------------------------

@dataclass(frozen=True)
class NormReport:
    T: float
    sup_norm: float
    l2_gradient: float
    ln4_gradient: float
    x_t: float
    y0: float = float("nan")
    y1: float = float("nan")
    num_centers: int = 0
    radii: tuple = ()


def _ball_weights(n: int, nodes: int = 24):
    z, wz = np.polynomial.legendre.leggauss(nodes)
    # (n-1)-ball cross-section of a small geodesic ball, at unit radius
    area = unit_sphere_volume(n - 1) / (n - 1) * (1.0 - z * z) ** ((n - 1) / 2.0)
    return z, wz * area


def _lattice_sup(times, fields, d, centers, radii, n, p_full, p_late, exp_full, exp_late):
    """sup over (center, radius) of ``r^a ||F||_{L^p(B x (0,r^2))} + r^b ||F||_{L^q(B x (r^2/2, r^2))}``."""
    z, wz = _ball_weights(n)
    best = 0.0
    best_parts = (0.0, 0.0)
    for r in radii:
        pts = centers[:, None] + r * z[None, :]
        weights = wz * r**n
        sel_full = times <= r * r * (1 + 1e-12)
        sel_late = sel_full & (times >= 0.5 * r * r * (1 - 1e-12))
        vals_full, vals_late = [], []
        for F in (f for f, k in zip(fields, sel_full) if k):
            Fi = np.interp(pts, d, F)
            vals_full.append(np.sum(np.abs(Fi) ** p_full * weights, axis=1))
            vals_late.append(np.sum(np.abs(Fi) ** p_late * weights, axis=1))
        slab_late = np.zeros(centers.size)
        tf = times[sel_full]
        if tf.size < 2:
            continue
        vf = np.array(vals_full)
        # from 0 to the first snapshot the integrand is extended by its first value
        slab_full = np.trapezoid(vf, tf, axis=0) + tf[0] * vf[0]
        tl = times[sel_late]
        if tl.size >= 2:
            vl = np.array(vals_late)[np.isin(tf, tl)]
            slab_late = np.trapezoid(vl, tl, axis=0)
        part_a = r**exp_full * slab_full ** (1.0 / p_full)
        part_b = r**exp_late * slab_late ** (1.0 / p_late)
        tot = part_a + part_b
        k = int(np.argmax(tot))
        if tot[k] > best:
            best, best_parts = float(tot[k]), (float(part_a[k]), float(part_b[k]))
    return best, best_parts


def xt_yt_norms(history: FlowHistory, T: float | None = None, source=None, center_stride: int = 4,
                min_snapshots: int = 20) -> NormReport:
    """Lattice lower bound of the X_T norm of ``h`` (and of the Y_T norms of ``source``).

    Centers are grid nodes in the diagnostic window, radii are dyadic with ``r^2 < T``,
    balls are sampled with a Gauss rule across Euclidean slabs of geodesic width 2r and
    time integrals use the trapezoid rule over the snapshots.
    ``source`` is an optional pair ``(f0_list, f1_list)`` of scalar profiles per snapshot.
    """
    times_all = history.times
    T = float(times_all[-1]) if T is None else float(T)
    keep = (times_all > 0) & (times_all <= T * (1 + 1e-12))
    if np.count_nonzero(keep) < min_snapshots:
        raise SamplingError(f"need at least {min_snapshots} snapshots in (0, T]")
    states = [st for st, k in zip(history.states, keep) if k]
    times = times_all[keep]
    grid = history.grid
    n = grid.n
    d = np.arcsinh(grid.s)
    sup_norm = max(st.diagnostics["sup_h"] for st in states)
    grads = []
    for st in states:
        e = st.e_t
        da, db = _profile_derivs(e)[:2]
        grads.append(np.sqrt(gradient_norm_sq(e.alpha, e.beta, da, db, grid.s, n)))
    lo, hi = np.arcsinh(history.window[0]), np.arcsinh(history.window[1])
    radii = []
    r = math.sqrt(T) / 2.0
    while np.count_nonzero(times <= r * r) >= 3:
        radii.append(r)
        r /= 2.0
    radii = np.array(radii)
    rmax = radii[0] if radii.size else 0.0
    cand = d[(d - rmax >= lo) & (d + rmax <= hi)]
    centers = cand[::center_stride]
    if centers.size == 0 or radii.size == 0:
        raise SamplingError("no admissible (center, radius) pairs in the diagnostic window")
    q = n + 4
    xt_grad, (l2, lq) = _lattice_sup(times, grads, d, centers, radii, n, 2.0, q, -n / 2.0, 2.0 / q)
    y0 = y1 = float("nan")
    if source is not None:
        f0, f1 = source
        f0 = [f for f, k in zip(f0, keep) if k]
        f1 = [f for f, k in zip(f1, keep) if k]
        y0, _ = _lattice_sup(times, f0, d, centers, radii, n, 1.0, q / 2.0, -float(n), 4.0 / q)
        y1, _ = _lattice_sup(times, f1, d, centers, radii, n, 2.0, float(q), -n / 2.0, 2.0 / q)
    return NormReport(T, sup_norm, l2, lq, sup_norm + xt_grad, y0, y1, int(centers.size),
                      tuple(float(x) for x in radii))


# -- smoothing rates -----------------------------------------------------

@dataclass(frozen=True)
class SmoothingFit:
    slopes: dict
    constants: dict
    t_range: tuple


def smoothing_exponents(history: FlowHistory, t_range=None, min_decades: float = 1.5) -> SmoothingFit:
    """Least-squares slopes of ``log sup|D^k h|`` against ``log t`` for k = 1, 2.

    ``constants[k]`` is ``max_t t^(k/2) sup|D^k h|`` over the fitted window.
    """
    if history.e0.regularity != "C0":
        warnings.warn("smoothing rates are only informative for C0 initial data; "
                      "derivatives of smooth data stay bounded", stacklevel=2)
    times = history.times
    sel = times > 0
    if t_range is not None:
        sel &= (times >= t_range[0]) & (times <= t_range[1])
    t = times[sel]
    if t.size < 3 or math.log10(t[-1] / t[0]) < min_decades - 1e-9:
        raise SamplingError(f"fit window must span at least {min_decades} decades of t")
    slopes, consts = {}, {}
    for k, key in ((1, "sup_Dh"), (2, "sup_D2h")):
        y = np.array([st.diagnostics[key] for st, m in zip(history.states, sel) if m])
        slope, _ = np.polyfit(np.log(t), np.log(y), 1)
        slopes[k] = float(slope)
        consts[k] = float(np.max(y * t ** (k / 2.0)))
    return SmoothingFit(slopes, consts, (float(t[0]), float(t[-1])))


# -- evolution identities ------------------------------------------------

@dataclass(frozen=True)
class EvolutionResidual:
    times: np.ndarray
    residual: np.ndarray
    max_residual: float


def _centered_time_derivative(t_prev, t_mid, t_next, u_prev, u_mid, u_next):
    h1, h2 = t_mid - t_prev, t_next - t_mid
    return (-h2 / (h1 * (h1 + h2)) * u_prev + (h2 - h1) / (h1 * h2) * u_mid
            + h1 / (h2 * (h1 + h2)) * u_next)


def _weighted_rms(x, s, n, mask):
    w = volume_density(s, n) * np.gradient(s)
    return float(np.sqrt(np.sum(w[mask] * x[mask] ** 2) / np.sum(w[mask])))


def _triples(history: FlowHistory, min_states: int = 3):
    states = [st for st in history.states if st.t > 0]
    if len(states) < min_states:
        raise SamplingError("need at least three positive-time snapshots")
    return list(zip(states[:-2], states[1:-1], states[2:]))


def scalar_evolution_residual(history: FlowHistory) -> EvolutionResidual:
    """Residual of ``dR/dt = Lap_g R + 2(n-1) R + W^s R_s + 2 |Ric|^2`` along the history.

    ``dR/dt`` is a three-point difference across consecutive snapshots; the space
    norm is the volume-weighted RMS over the diagnostic window.
    """
    grid = history.grid
    s, n = grid.s, grid.n
    mask = history.mask
    out_t, out_r = [], []
    for prev, mid, nxt in _triples(history):
        R = [perturbation_geometry(st.e_t).scalar for st in (prev, mid, nxt)]
        dRdt = _centered_time_derivative(prev.t, mid.t, nxt.t, *R)
        geom = perturbation_geometry(mid.e_t)
        Rm = R[1]
        R_s, R_ss = grid.derivative(Rm, 1), grid.derivative(Rm, 2)
        A, A_s, B, B_s = geom.A, geom.A_s, geom.B, geom.B_s
        lap = R_ss / A + R_s * ((n - 1) * B_s / (2.0 * A * B) - A_s / (2.0 * A * A))
        rhs = lap + 2.0 * (n - 1) * Rm + mid.deturck_w * R_s + 2.0 * geom.ric_norm_sq
        out_t.append(mid.t)
        out_r.append(_weighted_rms(dRdt - rhs, s, n, mask))
    res = np.array(out_r)
    return EvolutionResidual(np.array(out_t), res, float(np.max(res)))


def reparametrization_residual(history: FlowHistory) -> EvolutionResidual:
    """Residual of the plain b-flow for ``gbar(t) = (1 + 2(n-1)t) g(tbar)``.

    ``tbar = ln(1 + 2(n-1)t) / (2(n-1))``.  The rescaled snapshots are rebuilt as
    perturbations of b, differentiated in t, and compared against the unnormalized
    right-hand side evaluated on gbar itself.
    """
    grid = history.grid
    s, n = grid.s, grid.n
    mask = history.mask
    k = 2.0 * (n - 1)
    out_t, out_r = [], []
    for trip in _triples(history):
        bars, tt = [], []
        for st in trip:
            lam = math.exp(k * st.t)
            tt.append((lam - 1.0) / k)
            e = st.e_t
            bars.append(RadialPerturbation(grid, lam * (1.0 + e.alpha) - 1.0, lam * (1.0 + e.beta) - 1.0,
                                           tau=e.tau, regularity="C2"))
        da = _centered_time_derivative(*tt, *(b.alpha for b in bars))
        db = _centered_time_derivative(*tt, *(b.beta for b in bars))
        rate = flow_rhs(bars[1], normalized=False)
        res = np.sqrt((da - rate.alpha) ** 2 + (n - 1) * (db - rate.beta) ** 2)
        out_t.append(tt[1])
        out_r.append(_weighted_rms(res, s, n, mask))
    res = np.array(out_r)
    return EvolutionResidual(np.array(out_t), res, float(np.max(res)))


# -- lower-bound certificate ----------------------------------------------

@dataclass(frozen=True)
class Theorem35Evaluation:
    t: float
    n: int
    beta: float
    a_inf: float
    C: float
    D: float
    t_seq: np.ndarray
    product: float
    prefactor: float
    tail_sum: float
    lower_bound: float

    @property
    def prefactor_product(self) -> float:
        return self.prefactor * self.product


def theorem35_certificate(t: float, n: int, beta: float, a_inf: float = 0.0, C: float = 1.0,
                          D: float = 4.0, floor: float = 1e-16) -> Theorem35Evaluation:
    """Evaluate the iterated heat-kernel lower bound for the scalar curvature at time t.

    ``t_k = ln((e^{2(n-1)t_{k-1}} + 1)/2) / (2(n-1))`` until ``t_k < floor``; then
    ``a_inf * e^{2(n-1) sum t_i} * prod ((e^{2(n-1)t_i}+1)/2)^-(1+n/2) - C * tail``.
    """
    k = 2.0 * (n - 1)
    if not (0.0 < beta < 0.5):
        raise DomainError(f"beta must lie in (0, 1/2), got {beta}")
    if not (0.0 < t <= math.log(1.5) / k):
        raise DomainError(f"t must lie in (0, ln(3/2)/(2(n-1))], got {t}")
    seq = [t]
    while seq[-1] >= floor:
        seq.append(math.log1p(math.expm1(k * seq[-1]) / 2.0) / k)
    seq = np.array(seq)
    log_terms = np.log1p(np.expm1(k * seq) / 2.0)
    product = float(np.exp(-(1.0 + n / 2.0) * np.sum(log_terms)))
    prefactor = float(np.exp(k * np.sum(seq)))
    base = math.expm1(k * t)
    tail = 0.0
    i = 1
    while True:
        expo = -(base ** (2.0 * beta - 1.0)) / (2.0 ** ((2.0 * beta - 1.0) * i) * D)
        term = 2.0**i / base * math.exp(expo)
        tail += term
        if term < 1e-300 or (i > 5 and term < 1e-17 * tail):
            break
        i += 1
    bound = a_inf * prefactor * product - C * tail
    return Theorem35Evaluation(t, n, beta, a_inf, C, D, seq, product, prefactor, tail, bound)


# -- weak scalar lower bound ---------------------------------------------

@dataclass(frozen=True)
class WeakBoundRecord:
    times: np.ndarray
    C_values: tuple
    inf_R_trajectory: np.ndarray
    liminf_estimates: np.ndarray
    kappa: float
    verdict: bool


def weak_scalar_lower_bound(history: FlowHistory, x_window, beta: float, C_values=(0.25, 0.5, 1.0, 2.0),
                            tol: float = 1e-6, fit_points: int = 4, min_decades: float = 2.0) -> WeakBoundRecord:
    """Infimum of R(g_t) over the shrinking neighbourhoods ``B(x, C t^beta)`` of an s-interval.

    For each C the small-t limit is extrapolated linearly in t from the ``fit_points``
    earliest snapshots; the verdict compares ``inf_C liminf`` with ``-n(n-1)``.
    """
    if not (0.0 < beta < 0.5):
        raise DomainError(f"beta must lie in (0, 1/2), got {beta}")
    grid = history.grid
    n = grid.n
    kappa = -float(n * (n - 1))
    states = [st for st in history.states if st.t > 0]
    times = np.array([st.t for st in states])
    if times.size < fit_points or math.log10(times[-1] / times[0]) < min_decades - 1e-9:
        raise SamplingError(f"history must span at least {min_decades} decades of positive t")
    d = np.arcsinh(grid.s)
    da_, db_ = np.arcsinh(x_window[0]), np.arcsinh(x_window[1])
    lo, hi = np.arcsinh(history.window[0]), np.arcsinh(history.window[1])
    traj = np.empty((len(C_values), times.size))
    curv = [perturbation_geometry(st.e_t).scalar for st in states]
    for i, C in enumerate(C_values):
        for j, (t, R) in enumerate(zip(times, curv)):
            rad = C * t**beta
            if da_ - rad < lo or db_ + rad > hi:
                raise DomainError(f"window B(x, {C} t^beta) leaves the trusted region at t = {t:.3g}")
            sel = (d >= da_ - rad) & (d <= db_ + rad)
            traj[i, j] = np.min(R[sel])
    est = np.empty(len(C_values))
    for i in range(len(C_values)):
        tt, yy = times[:fit_points], traj[i, :fit_points]
        _, icpt = np.polyfit(tt, yy, 1)
        est[i] = icpt
    verdict = bool(np.min(est) >= kappa - tol * abs(kappa))
    return WeakBoundRecord(times, tuple(C_values), traj, est, kappa, verdict)
