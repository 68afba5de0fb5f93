"""Invariant checks run by ``ahmass verify``.

Each check returns a :class:`Check` carrying the measured value and the threshold it was
held to.  Settings are desk scale; the acceptance tests run the same properties at the
resolutions stated for them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from decimal import Decimal, getcontext

import numpy as np
from scipy.special import gamma

from . import cutoffs, curvature, flow, heatkernel, hypgeom, massfun, metrics

__all__ = ["Check", "SUITE", "run_suite", "decimal_t_sequence", "smooth_perturbation"]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    relation: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _le(name, value, threshold, detail=""):
    value = float(value)
    return Check(name, value, float(threshold), "<=", bool(value <= threshold), detail)


def _ge(name, value, threshold, detail=""):
    value = float(value)
    return Check(name, value, float(threshold), ">=", bool(value >= threshold), detail)


def _in(name, value, lo, hi, detail=""):
    value = float(value)
    return Check(name, value, float(hi), f"in ({lo!r}, {hi!r})", bool(lo < value < hi), detail)


def decimal_t_sequence(t: float, n: int, count: int, digits: int = 40):
    """First ``count`` terms of ``t_k = ln((e^{2(n-1)t_{k-1}} + 1)/2) / (2(n-1))`` in decimal arithmetic."""
    getcontext().prec = digits
    k = Decimal(2 * (n - 1))
    seq = [Decimal(repr(t))]
    for _ in range(count):
        seq.append(((k * seq[-1]).exp() + 1).__truediv__(2).ln() / k)
    return [float(x) for x in seq]


def smooth_perturbation(grid, amp_a: float = 0.03, amp_b: float = 0.02) -> metrics.RadialPerturbation:
    """Smooth test data ``alpha = a sech^2(ln s)``, ``beta = b sech^2(ln(s/2))`` (decay rate 2)."""
    def sech2(x):
        return 1.0 / np.cosh(x) ** 2

    def alpha_fn(s):
        return amp_a * sech2(np.log(np.asarray(s, dtype=float)))

    def beta_fn(s):
        return amp_b * sech2(np.log(np.asarray(s, dtype=float) / 2.0))

    return metrics.RadialPerturbation(grid, alpha_fn(grid.s), beta_fn(grid.s), tau=2.0, regularity="C2",
                                      alpha_fn=alpha_fn, beta_fn=beta_fn, label="smooth")


# -- hypgeom -------------------------------------------------------------

def check_chart(rng):
    out = []
    xs = np.concatenate([[0.0, 0.5, 0.9], rng.uniform(0.0, 0.999, 5)])
    worst = 0.0
    for x in xs:
        p = hypgeom.chart_point(float(x))
        worst = max(worst, abs(p.v0 - (1.0 / p.rho - 1.0)) / p.v0,
                    abs(p.s - math.sinh(math.log((1 + x) / (1 - x)))) / max(p.s, 1.0))
    out.append(_le("hypgeom.chart_point_consistency", worst, 1e-12))
    for n in (3, 4, 5):
        g = hypgeom.make_grid(n, 0.5, 10.0, 32)
        exact = 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)
        out.append(_le(f"hypgeom.omega_n{n}", abs(g.omega - exact) / exact, 1e-12))
    return out


def check_laplacian():
    errs = []
    for num in (200, 400):
        g = hypgeom.make_grid(3, 0.5, 50.0, num)
        s = g.s
        inner = slice(4, -4)
        v = np.hypot(1.0, s)
        e1 = np.max(np.abs(hypgeom.radial_laplacian(v, g) - 3.0 * v)[inner] / v[inner])
        exact = (2.0 - 3) / s + (3.0 - 3) / s**3
        e2 = np.max(np.abs(hypgeom.radial_laplacian(1.0 / s, g) - exact)[inner] / np.abs(exact[inner]))
        errs.append(max(e1, e2))
    order = math.log2(errs[0] / errs[1])
    return [_le("hypgeom.laplacian_identities", errs[1], 1e-6),
            _ge("hypgeom.laplacian_order", order, 3.5)]


# -- metrics / curvature -------------------------------------------------

def check_curvature():
    g = hypgeom.make_grid(3, 1.0, 200.0, 1200)
    e = metrics.schwarzschild_ads(0.1, 3, g)
    R = curvature.scalar_curvature(e)
    inner = slice(8, -8)
    out = [_le("curvature.schwarzschild_scalar", np.max(np.abs(R[inner] + 6.0)), 1e-8)]
    ratios = []
    for eps in (1e-3, 1e-4):
        _, cq = curvature.remainder(metrics.constant_perturbation(g, eps))
        ratios.append(cq)
    out.append(_le("curvature.remainder_constant_limit", abs(ratios[-1] / 2.0 - 1.0), 0.05,
                   "c_q for e = eps b tends to n - 1"))
    return out


# -- massfun ---------------------------------------------------------------

def check_mass():
    n, m = 3, 0.1
    g = hypgeom.make_grid(n, 1.0, 2000.0, 1500)
    e = metrics.schwarzschild_ads(m, n, g)
    out = []
    worst = 0.0
    for cut in (massfun.bump_cutoff(1.0, 0.05), massfun.bump_cutoff(1.0, 0.08), massfun.bump_cutoff(0.98, 0.06)):
        for r in (50.0, 200.0):
            c0 = massfun.mass_c0(e, cut, r).mass_c0
            avg = massfun.averaged_mass_c2(e, cut, r)
            worst = max(worst, abs(c0 - avg) / abs(avg))
    out.append(_le("massfun.averaging_identity", worst, 1e-6))
    target = 2.0 * (n - 1) * hypgeom.unit_sphere_volume(n) * m
    val = massfun.mass_c2(e, 1000.0)
    out.append(_le("massfun.mass_limit_r1000", abs(val / target - 1.0), 5e-3))
    e2 = metrics.schwarzschild_ads(2 * m, n, g)
    out.append(_le("massfun.mass_doubling", abs(massfun.mass_c2(e2, 1000.0) / val - 2.0) / 2.0, 1e-3))
    z = metrics.zero_perturbation(g)
    out.append(_le("massfun.zero_metric_mass", abs(massfun.mass_c0(z, massfun.bump_cutoff(), 50.0).mass_c0), 1e-14))
    rec = massfun.lemma26_defect(e, 20.0, 200.0)
    half = massfun.lemma26_defect(e.scaled(0.5), 20.0, 200.0)
    out.append(_le("massfun.defect_scalar_integral", abs(rec.scalar_integral), 1e-6))
    out.append(_le("massfun.defect_quadratic_scaling", abs(rec.defect / half.defect / 4.0 - 1.0), 0.15))
    return out


# -- flow -----------------------------------------------------------------

def check_flow():
    out = []
    g = hypgeom.make_grid(3, 0.2, 40.0, 400)
    rate = flow.flow_rhs(metrics.zero_perturbation(g))
    out.append(_le("flow.fixed_point", max(np.max(np.abs(rate.alpha)), np.max(np.abs(rate.beta))), 1e-12))
    e = smooth_perturbation(g)
    ratios = []
    for lam in (1e-2, 1e-3, 1e-4):
        el = e.scaled(lam)
        full = flow.flow_rhs(el)
        lin_a, lin_b = flow.linearized_rhs(el)
        sel = slice(8, -8)
        defect = max(np.max(np.abs(full.alpha - lin_a)[sel]), np.max(np.abs(full.beta - lin_b)[sel]))
        ratios.append(defect / lam**2)
    out.append(_le("flow.linearization_ratio_spread", max(ratios) / min(ratios), 2.0))
    zero = flow.flow_integrate(metrics.zero_perturbation(g), 0.01, snapshot_times=np.linspace(0.002, 0.01, 5),
                               window=(0.5, 10.0))
    res = flow.scalar_evolution_residual(zero)
    out.append(_le("flow.scalar_identity_at_b", res.max_residual, 1e-10))
    levels = []
    for lev in (0, 1):
        gl = hypgeom.make_grid(3, 0.2, 40.0, 200 * 2**lev)
        dtm = 2e-4 / 2**lev
        snaps = [0.02 - 4 * dtm, 0.02, 0.02 + 4 * dtm]
        hist = flow.flow_integrate(smooth_perturbation(gl), 0.021, snapshot_times=snaps, dt_max=dtm,
                                   window=(0.5, 30.0))
        levels.append(flow.reparametrization_residual(hist).max_residual)
    out.append(_ge("flow.reparametrization_refinement_ratio", levels[0] / levels[1], 1.5))
    resid = []
    for lev in (0, 1):
        gl = hypgeom.make_grid(3, 0.2, 40.0, 200 * 2**lev)
        dtm = 2e-4 / 2**lev
        snaps = [0.02 - 4 * dtm, 0.02, 0.02 + 4 * dtm]
        hist = flow.flow_integrate(smooth_perturbation(gl), 0.02 + 4.04 * dtm, snapshot_times=snaps, dt_max=dtm,
                                   window=(0.5, 30.0), scheme="ros2")
        resid.append(flow.scalar_evolution_residual(hist).max_residual)
    out.append(_ge("flow.scalar_identity_order", math.log2(resid[0] / resid[1]), 1.0,
                   "joint (dt, h) halving with the second-order scheme"))
    return out


def check_certificate():
    out = []
    t1 = flow.theorem35_certificate(0.1, 3, 0.25).t_seq[1]
    oracle = decimal_t_sequence(0.1, 3, 1)[1]
    out.append(_le("flow.certificate_t1_oracle", abs(t1 - oracle), 1e-12))
    worst_sum, worst_ratio, inside = 0.0, 0.0, True
    for n in (3, 4, 5):
        for frac in (0.2, 0.6, 1.0):
            t = frac * math.log(1.5) / (2 * (n - 1))
            ev = flow.theorem35_certificate(t, n, 0.25)
            worst_sum = max(worst_sum, float(np.sum(ev.t_seq[1:])) / (4 * t))
            seq = ev.t_seq[ev.t_seq > 1e-300]
            worst_ratio = max(worst_ratio, float(np.max(seq[1:] / seq[:-1])))
            lo = math.exp((2 - 3 * n) * (n - 1) * t)
            inside &= lo < ev.prefactor_product < 1.0
    out.append(_le("flow.certificate_sum_over_4t", worst_sum, 1.0 - 1e-12))
    out.append(_le("flow.certificate_contraction", worst_ratio, 0.75))
    out.append(Check("flow.certificate_prefactor_window", float(inside), 1.0, "==", inside))
    return out


def check_smoothing():
    g = hypgeom.make_grid(3, 0.5, 30.0, 3000)
    e0 = metrics.c0_kink(0.03, 3.0, 2.0, 3, g, rise=1e-3)
    hist = flow.flow_integrate(e0, 3.2e-4, snapshot_times=np.geomspace(1e-5, 3.2e-4, 12), window=(1.0, 20.0))
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = flow.smoothing_exponents(hist, (1e-5, 3.2e-4))
    return [_in("flow.smoothing_slope_Dh", fit.slopes[1], -0.65, -0.35)]


# -- cutoffs ------------------------------------------------------------------

def check_cutoffs():
    out = []
    phi = massfun.bump_cutoff()
    prof = cutoffs.solve_cutoff(phi, 20.0, 1e-3, 3, num_nodes=801, levels=128)
    final = np.hypot(1.0, prof.s) * phi.phi(prof.l)
    out.append(_ge("cutoffs.positivity", float(prof.phi1.min()), 0.0))
    out.append(_le("cutoffs.final_data", float(np.max(np.abs(prof.phi1[-1, 1:-1] - final[1:-1]))), 1e-12))
    coarse = cutoffs.cancellation_residual(prof)
    fine = cutoffs.cancellation_residual(cutoffs.solve_cutoff(phi, 20.0, 1e-3, 3, num_nodes=1601, levels=256))
    static = cutoffs.cancellation_residual(cutoffs.static_profile(prof))
    out.append(_ge("cutoffs.cancellation_A_ratio", coarse.A_residual / fine.A_residual, 3.0))
    out.append(_ge("cutoffs.cancellation_B_ratio", coarse.B_residual / fine.B_residual, 3.0))
    out.append(_ge("cutoffs.static_control", static.A_residual / fine.A_residual, 100.0))
    g = hypgeom.make_grid(3, 1.5, 150.0, 600)
    e = metrics.schwarzschild_ads(0.1, 3, g)
    theta = 2e-5
    drifts = [cutoffs.mass_drift(e, phi, r, theta, num_times=17,
                                 flow_kwargs=dict(dt_max=theta / 32)).drift_integral for r in (20.0, 40.0)]
    out.append(_le("cutoffs.drift_log2_slope", math.log2(drifts[1] / drifts[0]), 3 - 2 * 3 + 0.7))
    return out


# -- heat kernel -------------------------------------------------------------

def check_kernel():
    out = []
    run = heatkernel.solve_kernel(3, 0.5, num_times=30)
    out.append(_le("heatkernel.mass_conservation", float(np.max(np.abs(run.mass - 1.0))), 1e-3))
    sel = run.times >= 0.05
    d = run.d
    m = (d >= 0.1) & (d <= 3.0)
    exact = heatkernel.hyperbolic_kernel_3d(d[m][None, :], run.times[sel][:, None] + run.time_offset)
    out.append(_le("heatkernel.closed_form", float(np.max(np.abs(run.K[sel][:, m] / exact - 1.0))), 0.02))
    bound = heatkernel.gaussian_bound_fit(run)
    out.append(_le("heatkernel.gaussian_D", bound.D, 8.0))
    out.append(Check("heatkernel.tail_bounds", float(all(c["holds"] for c in bound.tail_checks)), 1.0, "==",
                     all(c["holds"] for c in bound.tail_checks)))
    ident = heatkernel.rescaled_kernel_identity(3, 0.061, 0.06)
    out.append(_le("heatkernel.rescaled_identity", ident.error, 0.01))
    return out


SUITE = {
    "hypgeom": lambda rng: check_chart(rng) + check_laplacian(),
    "curvature": lambda rng: check_curvature(),
    "massfun": lambda rng: check_mass(),
    "flow": lambda rng: check_flow() + check_smoothing(),
    "certificate": lambda rng: check_certificate(),
    "cutoffs": lambda rng: check_cutoffs(),
    "heatkernel": lambda rng: check_kernel(),
}


def run_suite(names=None, seed: int = 0) -> list[Check]:
    names = list(SUITE) if names is None else list(names)
    out = []
    for name in names:
        rng = np.random.default_rng([seed, list(SUITE).index(name)])
        out.extend(SUITE[name](rng))
    return out
