"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line."""

import math
import os
import time
import warnings

import numpy as np

from ahmass import cli, cutoffs, flow, heatkernel, hypgeom, massfun, metrics
from ahmass.suite import smooth_perturbation

import oracles


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_01_laplacian_identities(acceptance):
    def measure():
        errs = []
        for num in (200, 400):
            g = hypgeom.make_grid(3, 0.5, 50.0, num)
            s, inner = g.s, slice(4, -4)
            v = np.hypot(1.0, s)
            e1 = np.max(np.abs(hypgeom.radial_laplacian(v, g) - 3.0 * v)[inner] / v[inner])
            exact = -1.0 / s
            e2 = np.max(np.abs(hypgeom.radial_laplacian(1.0 / s, g) - exact)[inner] / np.abs(exact[inner]))
            errs.append(max(e1, e2))
        return errs

    errs, secs = _timed(measure)
    order = math.log2(errs[0] / errs[1])
    ok = errs[1] <= 1e-6 and order >= 3.5 and secs < 1.0
    assert acceptance(1, "radial Laplacian identities", ok, f"err {errs[1]:.2e}, order {order:.2f}, {secs:.2f}s")


def test_02_mass_averaging_identity(acceptance):
    def measure():
        g = hypgeom.make_grid(3, 1.0, 2000.0, 1500)
        e = metrics.schwarzschild_ads(0.1, 3, g)
        worst = 0.0
        for cut in ((1.0, 0.05), (1.0, 0.08), (0.98, 0.06)):
            phi = massfun.bump_cutoff(*cut)
            for r in (50.0, 200.0):
                c0 = massfun.mass_c0(e, phi, r).mass_c0
                avg = massfun.averaged_mass_c2(e, phi, r)
                worst = max(worst, abs(c0 - avg) / abs(massfun.mass_c2(e, r)))
        return worst

    worst, secs = _timed(measure)
    ok = worst <= 1e-6 and secs < 10.0
    assert acceptance(2, "C0 mass equals averaged C2 mass", ok, f"rel {worst:.2e}, {secs:.1f}s")


def test_03_mass_limit(acceptance):
    n, m = 3, 0.1
    g = hypgeom.make_grid(n, 1.0, 2000.0, 1500)
    e = metrics.schwarzschild_ads(m, n, g)
    # the functional itself is validated against brute-force sphere quadrature first
    af = lambda s: 2 * m / s / (1 + s * s - 2 * m / s)  # noqa: E731
    oracle_err = max(abs(massfun.mass_c2(e, r) / oracles.mass_aspect_sphere(af, lambda s: 0.0, r) - 1.0)
                     for r in (5.0, 20.0))
    target = 2 * (n - 1) * hypgeom.unit_sphere_volume(n) * m
    val = massfun.mass_c2(e, 1000.0)
    lim_err = abs(val / target - 1.0)
    dbl = massfun.mass_c2(metrics.schwarzschild_ads(2 * m, n, g), 1000.0)
    dbl_err = abs(dbl / val - 2.0) / 2.0
    ok = oracle_err <= 5e-3 and lim_err <= 5e-3 and dbl_err <= 1e-3
    assert acceptance(3, "mass limit 16 pi m", ok,
                      f"oracle {oracle_err:.1e}, limit {lim_err:.1e}, doubling {dbl_err:.1e}")


def test_04_defect_bookkeeping(acceptance):
    g = hypgeom.make_grid(3, 1.0, 2000.0, 1500)
    e = metrics.schwarzschild_ads(0.1, 3, g)
    rec = massfun.lemma26_defect(e, 20.0, 200.0)
    half = massfun.lemma26_defect(e.scaled(0.5), 20.0, 200.0)
    ratio = rec.defect / half.defect
    ok = abs(rec.scalar_integral) < 1e-6 and abs(ratio / 4.0 - 1.0) <= 0.15
    assert acceptance(4, "scalar integral vanishes, defect quadratic", ok,
                      f"int R {rec.scalar_integral:.1e}, ratio {ratio:.3f}")


def test_05_fixed_point_and_linearization(acceptance):
    def measure():
        g = hypgeom.make_grid(3, 0.2, 40.0, 400)
        rate = flow.flow_rhs(metrics.zero_perturbation(g))
        fixed = max(np.max(np.abs(rate.alpha)), np.max(np.abs(rate.beta)))
        e = smooth_perturbation(g)
        ratios = []
        for lam in (1e-2, 1e-3, 1e-4):
            el = e.scaled(lam)
            full = flow.flow_rhs(el)
            lin_a, lin_b = flow.linearized_rhs(el)
            sel = slice(8, -8)
            ratios.append(max(np.max(np.abs(full.alpha - lin_a)[sel]),
                              np.max(np.abs(full.beta - lin_b)[sel])) / lam**2)
        return fixed, max(ratios) / min(ratios)

    (fixed, spread), secs = _timed(measure)
    ok = fixed <= 1e-12 and spread < 2.0 and secs < 5.0
    assert acceptance(5, "b is fixed, linearization defect is quadratic", ok,
                      f"rhs(b) {fixed:.1e}, spread {spread:.4f}, {secs:.2f}s")


def test_06_reparametrization(acceptance):
    levels = []
    for lev in (0, 1):
        g = hypgeom.make_grid(3, 0.2, 40.0, 200 * 2**lev)
        dt = 2e-4 / 2**lev
        hist = flow.flow_integrate(smooth_perturbation(g), 0.021, snapshot_times=[0.02 - 4 * dt, 0.02, 0.02 + 4 * dt],
                                   dt_max=dt, window=(0.5, 30.0))
        levels.append(flow.reparametrization_residual(hist).max_residual)
    ratio = levels[0] / levels[1]
    assert acceptance(6, "normalized/unnormalized conjugation", ratio >= 1.5, f"ratio {ratio:.3f}")


def test_07_smoothing_rates(acceptance):
    def measure():
        g = hypgeom.make_grid(3, 0.5, 30.0, 3000)
        hist = flow.flow_integrate(metrics.c0_kink(0.03, 3.0, 2.0, 3, g, rise=1e-3), 3.2e-4,
                                   snapshot_times=np.geomspace(1e-5, 3.2e-4, 12), window=(1.0, 20.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            slope = flow.smoothing_exponents(hist, (1e-5, 3.2e-4)).slopes[1]
        consts = []
        for amp in (0.01, 0.03, 0.1):
            e0 = metrics.c0_kink(amp, 3.0, 2.0, 3, g, rise=1e-3)
            h = flow.flow_integrate(e0, 0.01, snapshot_times=np.geomspace(1e-6, 0.01, 40), eps_max=0.25,
                                    window=(1.0, 20.0))
            consts.append(flow.xt_yt_norms(h).x_t / e0.sup_norm())
        return slope, max(consts) / min(consts)

    (slope, spread), secs = _timed(measure)
    ok = -0.65 <= slope <= -0.35 and spread < 2.0 and secs < 120.0
    assert acceptance(7, "smoothing slope and X_T amplitude bound", ok,
                      f"slope {slope:.3f}, C spread {spread:.4f}, {secs:.0f}s")


def test_08_scalar_evolution_identity(acceptance):
    def order_study(make, s_min, s_max, base, window, **kw):
        resid = []
        for lev in range(3):
            g = hypgeom.make_grid(3, s_min, s_max, base * 2**lev)
            dt = 2e-4 / 2**lev
            hist = flow.flow_integrate(make(g), 0.02 + 4.04 * dt, snapshot_times=[0.02 - 4 * dt, 0.02, 0.02 + 4 * dt],
                                       dt_max=dt, window=window, scheme="ros2", **kw)
            resid.append(flow.scalar_evolution_residual(hist).max_residual)
        return [math.log2(a / b) for a, b in zip(resid, resid[1:])]

    smooth = order_study(smooth_perturbation, 0.2, 40.0, 200, (0.5, 30.0))
    kink = order_study(lambda g: metrics.c0_kink(0.03, 3.0, 2.0, 3, g, rise=1e-3), 0.5, 30.0, 500, (1.0, 20.0),
                       ros2_after=1e-3)
    g = hypgeom.make_grid(3, 0.2, 40.0, 400)
    at_b = flow.scalar_evolution_residual(
        flow.flow_integrate(metrics.zero_perturbation(g), 0.01, snapshot_times=np.linspace(0.002, 0.01, 5),
                            window=(0.5, 10.0))).max_residual
    ok = min(smooth + kink) >= 1.0 and at_b <= 1e-10
    assert acceptance(8, "scalar evolution identity", ok,
                      "orders smooth " + " ".join(f"{o:.2f}" for o in smooth)
                      + ", kink " + " ".join(f"{o:.2f}" for o in kink) + f", at b {at_b:.1e}")


def test_09_certificate(acceptance):
    def measure():
        t1 = flow.theorem35_certificate(0.1, 3, 0.25).t_seq[1]
        sums_ok, window_ok = True, True
        for n in (3, 4, 5):
            for frac in (0.2, 0.6, 1.0):
                t = frac * math.log(1.5) / (2 * (n - 1))
                ev = flow.theorem35_certificate(t, n, 0.25)
                sums_ok &= float(np.sum(ev.t_seq[1:])) < 4 * t
                window_ok &= math.exp((2 - 3 * n) * (n - 1) * t) < ev.prefactor_product < 1.0
        return t1, sums_ok, window_ok

    (t1, sums_ok, window_ok), secs = _timed(measure)
    oracle = float(oracles.t_sequence_mpmath(0.1, 3, 1)[1])
    ok = abs(t1 - 0.0549741) <= 1e-6 and sums_ok and window_ok and secs < 1.0
    assert acceptance(9, "certificate t_1, sum and prefactor window", ok,
                      f"t1 {t1:.10f} (mpmath {oracle:.10f}, stated 0.0549741), sums {sums_ok}, "
                      f"window {window_ok}, {secs:.3f}s")


def test_10_cutoff_solver(acceptance):
    phi = massfun.bump_cutoff()
    prof = cutoffs.solve_cutoff(phi, 20.0, 1e-3, 3, num_nodes=801, levels=128)
    positive = prof.phi1.min() >= 0.0
    final = np.hypot(1.0, prof.s) * phi.phi(prof.l)
    final_err = float(np.max(np.abs(prof.phi1[-1, 1:-1] - final[1:-1])))
    thetas = np.array([0.4, 0.5, 0.6, 0.7, 0.8, 0.9]) * 2 * phi.d_ab**2 / 3
    fit = cutoffs.boundary_smallness(phi, (20.0, 40.0), thetas, 3)
    trip = cutoffs.bound_triplet(phi, (20.0, 40.0, 80.0), 1e-3, 3)
    # one C serves all radii when each column is flat in r
    col_spread = float(np.max(trip.ratios.max(axis=0) / trip.ratios.min(axis=0)))
    ok = (positive and final_err <= 1e-12 and fit.holds and min(fit.per_radius_r2) >= 0.99
          and col_spread <= 2.0)
    assert acceptance(10, "cutoff solver positivity, final data, boundary fit, bound triplet", ok,
                      f"final {final_err:.1e}, R2 {min(fit.per_radius_r2):.4f}, c {fit.c:.4g}, "
                      f"triplet C {trip.C:.4g} spread {col_spread:.4f}")


def test_11_cancellation(acceptance):
    phi = massfun.bump_cutoff()
    coarse_p = cutoffs.solve_cutoff(phi, 20.0, 1e-3, 3, num_nodes=801, levels=128)
    coarse = cutoffs.cancellation_residual(coarse_p)
    fine = cutoffs.cancellation_residual(cutoffs.solve_cutoff(phi, 20.0, 1e-3, 3, num_nodes=1601, levels=256))
    static = cutoffs.cancellation_residual(cutoffs.static_profile(coarse_p))
    ra, rb = coarse.A_residual / fine.A_residual, coarse.B_residual / fine.B_residual
    control = min(static.A_residual / coarse.A_residual, static.B_residual / coarse.B_residual)
    ok = ra >= 3.0 and rb >= 3.0 and control >= 100.0
    assert acceptance(11, "A = B = 0 cancellation", ok, f"ratios {ra:.2f} {rb:.2f}, static x{control:.3g}")


def test_12_mass_drift_scaling(acceptance):
    def measure():
        n, tau, theta = 3, 3.0, 2e-5
        phi = massfun.bump_cutoff()
        g = hypgeom.make_grid(n, 1.5, 150.0, 600)
        e = metrics.schwarzschild_ads(0.1, n, g)
        drifts = [cutoffs.mass_drift(e, phi, r, theta, num_times=17, flow_kwargs=dict(dt_max=theta / 32)).drift_integral
                  for r in (20.0, 40.0)]
        slope = math.log2(drifts[1] / drifts[0])
        eta = (tau - 1.0) / 2.0
        gg = hypgeom.make_grid(n, 1.5, 1e4, 2000)
        ge = metrics.schwarzschild_ads(0.1, n, gg)
        radii = (800.0, 1600.0, 3200.0)
        gaps = [cutoffs.two_radius_gap(ge, phi, phi, r, 2 * r, eta) for r in radii]
        # the envelope of |gap| bounds the negative part from below
        gap_slope = float(np.polyfit(np.log2(radii), np.log2(np.abs(gaps)), 1)[0])
        return slope, gap_slope, n - 2 * tau + 0.7, n - 2 * tau + eta + 0.7

    (slope, gap_slope, thr_d, thr_g), secs = _timed(measure)
    ok = slope <= thr_d and gap_slope <= thr_g and secs < 600.0
    assert acceptance(12, "drift and two-radius gap decay", ok,
                      f"drift slope {slope:.3f} <= {thr_d:.1f}, gap exponent {gap_slope:.3f} <= {thr_g:.1f}, "
                      f"{secs:.0f}s")


def test_13_heat_kernel(acceptance):
    run = heatkernel.solve_kernel(3, 0.5, num_times=30)
    mass_err = float(np.max(np.abs(run.mass - 1.0)))
    sel = run.times >= 0.05
    m = (run.d >= 0.1) & (run.d <= 3.0)
    exact = heatkernel.hyperbolic_kernel_3d(run.d[m][None, :], run.times[sel][:, None] + run.time_offset)
    closed_err = float(np.max(np.abs(run.K[sel][:, m] / exact - 1.0)))
    coarse = heatkernel.gaussian_bound_fit(run)
    fine = heatkernel.gaussian_bound_fit(heatkernel.solve_kernel(3, 0.5, num_times=30, h=5e-4))
    feasible = all(c["holds"] for c in coarse.tail_checks) and math.isfinite(coarse.C)
    drift = max(abs(fine.C / coarse.C - 1.0), abs(fine.D / coarse.D - 1.0))
    ident = max(heatkernel.rescaled_kernel_identity(3, tb, sb).error
                for tb, sb in ((0.01, 0.0), (0.061, 0.06), (0.1, 0.06)))
    ok = mass_err <= 1e-3 and closed_err <= 0.02 and feasible and drift <= 0.2 and ident <= 0.01
    assert acceptance(13, "heat kernel mass, closed form, Gaussian bound, identity", ok,
                      f"mass {mass_err:.1e}, closed {closed_err:.2%}, (C, D) = ({coarse.C:.4g}, {coarse.D:.3g}) "
                      f"refined {drift:.1%}, identity {ident:.2%}")


def test_14_determinism(acceptance, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    codes = (cli.run("verify", out_dir=a), cli.run("verify", out_dir=b))
    names = sorted(os.listdir(a))
    same = names == sorted(os.listdir(b)) and all(
        open(os.path.join(a, f), "rb").read() == open(os.path.join(b, f), "rb").read() for f in names)
    ok = same and codes == (0, 0)
    assert acceptance(14, "verify twice gives identical outputs", ok, f"exit codes {codes}, {len(names)} files")
