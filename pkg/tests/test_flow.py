import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ahmass import flow, hypgeom, metrics
from ahmass.errors import AmplitudeError, ConfigError, DomainError, SamplingError
from ahmass.suite import decimal_t_sequence, smooth_perturbation

import oracles

# t_1 for n = 3, t = 0.1 from a 30-digit evaluation of the recurrence
T1_N3_T01 = 0.0549670179600018286


@pytest.fixture(scope="module")
def grid():
    return hypgeom.make_grid(3, 0.2, 40.0, 400)


def test_b_is_fixed(grid):
    rate = flow.flow_rhs(metrics.zero_perturbation(grid))
    assert np.max(np.abs(rate.alpha)) < 1e-12 and np.max(np.abs(rate.beta)) < 1e-12
    assert np.max(np.abs(rate.deturck_w)) < 1e-12


@pytest.mark.parametrize("eps", [0.05, -0.1])
def test_constant_scaling_rate(grid, eps):
    rate = flow.flow_rhs(metrics.constant_perturbation(grid, eps))
    assert np.max(np.abs(rate.alpha + 4.0 * eps)) < 1e-10
    assert np.max(np.abs(rate.beta + 4.0 * eps)) < 1e-10
    assert np.max(np.abs(rate.deturck_w)) < 1e-12


def test_unnormalized_rate_of_b(grid):
    # Ric(b) = -(n-1) b drives the plain flow outward at rate 2(n-1) = 4 in both profiles
    rate = flow.flow_rhs(metrics.zero_perturbation(grid), normalized=False)
    assert np.max(np.abs(rate.alpha - 4.0)) < 1e-10 and np.max(np.abs(rate.beta - 4.0)) < 1e-10


def test_constant_scaling_solution_matches_ode(grid):
    eps0, T = 0.05, 0.05
    exact = oracles.constant_scaling_ode(eps0, 3, T)
    assert exact == pytest.approx(eps0 * math.exp(-4.0 * T), rel=1e-9)
    errs = []
    for dt in (1e-3, 5e-4):
        hist = flow.flow_integrate(metrics.constant_perturbation(grid, eps0), T, snapshot_times=[T], dt_max=dt,
                                   window=(0.5, 10.0))
        s = grid.s
        m = (s > 0.5) & (s < 10.0)
        errs.append(np.max(np.abs(hist.at(T).e_t.alpha[m] - exact)))
    assert errs[0] < 1e-3 * eps0
    assert errs[0] / errs[1] > 1.5


def test_linearization_defect_ratio(grid):
    e = smooth_perturbation(grid)
    ratios = []
    for lam in (1e-2, 1e-3, 1e-4):
        el = e.scaled(lam)
        full = flow.flow_rhs(el)
        lin_a, lin_b = flow.linearized_rhs(el)
        d = max(np.max(np.abs(full.alpha - lin_a)[8:-8]), np.max(np.abs(full.beta - lin_b)[8:-8]))
        ratios.append(d / lam**2)
    assert max(ratios) / min(ratios) < 2.0


def test_linear_operator_matches_linearized_rhs(grid):
    e = smooth_perturbation(grid).scaled(1e-3)
    stacked = flow.linear_operator(grid) @ np.concatenate([e.alpha, e.beta])
    lin_a, lin_b = flow.linearized_rhs(e)
    assert np.max(np.abs(stacked[: grid.size] - lin_a)) < 1e-12
    assert np.max(np.abs(stacked[grid.size:] - lin_b)) < 1e-12


def test_flow_guards(grid):
    with pytest.raises(ConfigError):
        flow.flow_integrate(metrics.zero_perturbation(grid), 2.0)
    with pytest.raises(AmplitudeError):
        flow.flow_integrate(metrics.constant_perturbation(grid, 0.5), 0.01)
    with pytest.raises(DomainError):
        flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, window=(0.5, 39.0))


def test_history_lookup(grid):
    hist = flow.flow_integrate(smooth_perturbation(grid), 0.01, snapshot_times=[0.005, 0.01], window=(0.5, 10.0))
    assert hist.at(0.005).t == pytest.approx(0.005)
    with pytest.raises(SamplingError):
        hist.at(0.007)


def test_scalar_identity_exact_at_b(grid):
    hist = flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, snapshot_times=np.linspace(0.002, 0.01, 5),
                               window=(0.5, 10.0))
    assert flow.scalar_evolution_residual(hist).max_residual < 1e-10


def test_reparametrization_refines():
    levels = []
    for lev in (0, 1):
        g = hypgeom.make_grid(3, 0.2, 40.0, 200 * 2**lev)
        dt = 2e-4 / 2**lev
        hist = flow.flow_integrate(smooth_perturbation(g), 0.021, snapshot_times=[0.02 - 4 * dt, 0.02, 0.02 + 4 * dt],
                                   dt_max=dt, window=(0.5, 30.0))
        levels.append(flow.reparametrization_residual(hist).max_residual)
    assert levels[0] / levels[1] >= 1.5


def test_smoothing_warns_on_smooth_data(grid):
    hist = flow.flow_integrate(smooth_perturbation(grid), 0.01, snapshot_times=np.geomspace(1e-4, 0.01, 6),
                               window=(0.5, 10.0))
    with pytest.warns(UserWarning):
        flow.smoothing_exponents(hist)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SamplingError):
            flow.smoothing_exponents(hist, (1e-3, 0.01))


def test_flow_diag_csv(tmp_path, grid):
    hist = flow.flow_integrate(smooth_perturbation(grid), 0.01, snapshot_times=[0.005, 0.01], window=(0.5, 10.0))
    path = tmp_path / "diag.csv"
    flow.write_flow_diag(hist, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + len(hist)


# -- certificate -------------------------------------------------------------

def test_t1_against_extended_precision():
    ev = flow.theorem35_certificate(0.1, 3, 0.25)
    oracle = oracles.t_sequence_mpmath(0.1, 3, 3)
    assert float(oracle[1]) == pytest.approx(T1_N3_T01, rel=1e-15)
    for k in range(1, 4):
        assert ev.t_seq[k] == pytest.approx(float(oracle[k]), rel=1e-13)


def test_decimal_and_mpmath_routes_agree():
    dec = decimal_t_sequence(0.05, 4, 5)
    mp_ = oracles.t_sequence_mpmath(0.05, 4, 5)
    assert all(a == pytest.approx(float(b), rel=1e-15) for a, b in zip(dec, mp_))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 6), frac=st.floats(0.01, 1.0), beta=st.floats(0.05, 0.45))
def test_certificate_properties(n, frac, beta):
    t = frac * math.log(1.5) / (2 * (n - 1))
    ev = flow.theorem35_certificate(t, n, beta)
    seq = ev.t_seq
    assert np.sum(seq[1:]) < 4 * t
    assert np.all(seq[1:] < seq[:-1])
    # each step at least halves minus the convexity correction
    assert np.all(seq[1:] <= 0.75 * seq[:-1])
    assert math.exp((2 - 3 * n) * (n - 1) * t) < ev.prefactor_product < 1.0
    assert ev.tail_sum > 0


def test_certificate_guards():
    with pytest.raises(DomainError):
        flow.theorem35_certificate(0.1, 3, 0.6)
    with pytest.raises(DomainError):
        flow.theorem35_certificate(1.0, 3, 0.25)


def test_certificate_lower_bound_monotone_in_C():
    a = flow.theorem35_certificate(0.05, 3, 0.25, a_inf=-6.0, C=1.0)
    b = flow.theorem35_certificate(0.05, 3, 0.25, a_inf=-6.0, C=2.0)
    assert b.lower_bound < a.lower_bound


# -- weak bound ------------------------------------------------------------------

def test_weak_bound_at_b(grid):
    hist = flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, snapshot_times=np.geomspace(1e-5, 0.01, 12),
                               window=(0.5, 10.0))
    rec = flow.weak_scalar_lower_bound(hist, (2.0, 3.0), 0.25)
    assert rec.verdict
    assert np.all(np.abs(rec.liminf_estimates + 6.0) < 1e-8)


def test_weak_bound_window_guard(grid):
    hist = flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, snapshot_times=np.geomspace(1e-5, 0.01, 12),
                               window=(0.5, 10.0))
    with pytest.raises(DomainError):
        flow.weak_scalar_lower_bound(hist, (0.6, 9.5), 0.25, C_values=(4.0,))


# -- time schemes ---------------------------------------------------------------

def test_unknown_scheme_rejected(grid):
    with pytest.raises(ConfigError):
        flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, window=(0.5, 10.0), scheme="rk4")


def _scalar_residual(num, dt, scheme):
    g = hypgeom.make_grid(3, 0.2, 40.0, num)
    T, k = 0.02, 4
    hist = flow.flow_integrate(smooth_perturbation(g), T + 1.01 * k * dt, snapshot_times=[T - k * dt, T, T + k * dt],
                               dt_max=dt, window=(0.5, 30.0), scheme=scheme)
    return flow.scalar_evolution_residual(hist).max_residual


def test_ros2_is_second_order_in_time():
    coarse, fine = (_scalar_residual(400, dt, "ros2") for dt in (2e-4, 1e-4))
    assert 3.0 < coarse / fine < 5.0
    # and it beats the Euler default at equal cost scale
    assert coarse < 0.1 * _scalar_residual(400, 2e-4, "euler")


def test_ros2_keeps_b_fixed_and_matches_constant_scaling(grid):
    hist = flow.flow_integrate(metrics.zero_perturbation(grid), 0.01, snapshot_times=[0.01], window=(0.5, 10.0),
                               scheme="ros2")
    assert np.max(np.abs(hist.at(0.01).e_t.alpha)) < 1e-12
    eps0, T = 0.05, 0.05
    hist = flow.flow_integrate(metrics.constant_perturbation(grid, eps0), T, snapshot_times=[T], dt_max=1e-3,
                               window=(0.5, 10.0), scheme="ros2")
    m = (grid.s > 0.5) & (grid.s < 10.0)
    assert np.max(np.abs(hist.at(T).e_t.alpha[m] - oracles.constant_scaling_ode(eps0, 3, T))) < 1e-5 * eps0


def test_ros2_identity_on_constant_scaling(grid):
    # e = eps b stays conformal, so the identity residual is pure time discretization error
    res = {}
    for scheme in ("euler", "ros2"):
        res[scheme] = []
        for dt in (2e-4, 1e-4):
            hist = flow.flow_integrate(metrics.constant_perturbation(grid, 0.05), 0.0201 + 4 * dt,
                                       snapshot_times=[0.02 - 4 * dt, 0.02, 0.02 + 4 * dt], dt_max=dt,
                                       window=(0.5, 30.0), scheme=scheme)
            res[scheme].append(flow.scalar_evolution_residual(hist).max_residual)
    assert res["euler"][0] / res["euler"][1] > 1.8
    assert res["ros2"][0] / res["ros2"][1] > 3.0
    assert res["ros2"][1] < 0.1 * res["euler"][1]


def test_scalar_identity_order_on_kink_data():
    # Euler start-up through the rough layer, then the second-order scheme
    res = []
    for lev in range(2):
        g = hypgeom.make_grid(3, 0.5, 30.0, 500 * 2**lev)
        dt = 2e-4 / 2**lev
        e0 = metrics.c0_kink(0.03, 3.0, 2.0, 3, g, rise=1e-3)
        hist = flow.flow_integrate(e0, 0.02 + 4.04 * dt, snapshot_times=[0.02 - 4 * dt, 0.02, 0.02 + 4 * dt],
                                   dt_max=dt, window=(1.0, 20.0), scheme="ros2", ros2_after=1e-3)
        res.append(flow.scalar_evolution_residual(hist).max_residual)
    assert math.log2(res[0] / res[1]) >= 1.0


# -- smoothing and norms ---------------------------------------------------------

def _kink_history(num, amp, T, times):
    g = hypgeom.make_grid(3, 0.5, 30.0, num)
    e0 = metrics.c0_kink(amp, 3.0, 2.0, 3, g, rise=1e-3)
    return e0, flow.flow_integrate(e0, T, snapshot_times=times, eps_max=0.25, window=(1.0, 20.0))


def test_xt_norm_refinement_stable():
    vals = []
    for num in (1500, 3000):
        _, hist = _kink_history(num, 0.03, 0.01, np.geomspace(1e-6, 0.01, 40))
        vals.append(flow.xt_yt_norms(hist).x_t)
    assert abs(vals[1] / vals[0] - 1.0) < 0.05


def test_smoothing_constant_linear_in_amplitude():
    consts = []
    for amp in (0.01, 0.05):
        _, hist = _kink_history(3000, amp, 3.2e-4, np.geomspace(1e-5, 3.2e-4, 12))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            consts.append(flow.smoothing_exponents(hist, (1e-5, 3.2e-4)).constants[1])
    assert consts[1] / consts[0] == pytest.approx(5.0, rel=0.3)


def test_smooth_schwarzschild_slope_flat():
    g = hypgeom.make_grid(3, 2.0, 40.0, 1500)
    hist = flow.flow_integrate(metrics.schwarzschild_ads(0.1, 3, g), 0.01, snapshot_times=np.geomspace(1e-4, 0.01, 12),
                               window=(3.0, 25.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        slope = flow.smoothing_exponents(hist, (1e-4, 1e-2)).slopes[1]
    assert -0.15 <= slope <= 0.05


def test_weak_bound_schwarzschild_holds():
    g = hypgeom.make_grid(3, 2.0, 40.0, 800)
    hist = flow.flow_integrate(metrics.schwarzschild_ads(0.1, 3, g), 1e-3, snapshot_times=np.geomspace(1e-6, 1e-3, 12),
                               window=(3.0, 25.0))
    assert flow.weak_scalar_lower_bound(hist, (5.0, 10.0), 0.25).verdict


def test_weak_bound_negative_control():
    # a conformal dip e = -a w b with a C2 bump w pushes R below -n(n-1)
    def w(s):
        x = np.clip((np.log(np.asarray(s, dtype=float)) - math.log(7.0)) / 0.5, -1.0, 1.0)
        return -0.05 * (1 - x * x) ** 3

    g = hypgeom.make_grid(3, 0.5, 40.0, 1600)
    e = metrics.RadialPerturbation(g, w(g.s), w(g.s), tau=3.0, regularity="C2", alpha_fn=w, beta_fn=w)
    hist = flow.flow_integrate(e, 1e-3, snapshot_times=np.geomspace(1e-6, 1e-3, 12), window=(1.0, 25.0))
    rec = flow.weak_scalar_lower_bound(hist, (5.0, 10.0), 0.25)
    assert not rec.verdict
    assert np.all(rec.liminf_estimates < rec.kappa)
