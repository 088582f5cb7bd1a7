import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmtdep.depmeasure import (ConstantTheta, DependenceProfile, GeometricTail, PowerLogTail,
                               Schedule, ThetaPowerLog, check_theorem_conditions, estimate_delta,
                               estimate_profile, fit_tail, little_o_diagnostic, min_over_l,
                               mk_schedule, projection_norm_linear, series_diagnostic, tau_p,
                               tau_residual, theta_tail, xi_alpha_p)
from kmtdep.innovations import InnovationLaw, Seed
from kmtdep.processes import ZOO, DoublingMapSpec, LagBudgetError, LinearSpec

NORMAL = InnovationLaw("standard_normal")


def test_delta_linear_geometric_coefficients():
    proc = LinearSpec(NORMAL, "lin", tuple(0.5**j for j in range(11)))
    d, se = estimate_delta(proc, 3, 2.0, N=100_000, L=20, seed=Seed(1))
    assert abs(d - math.sqrt(2) * 0.125) <= 3 * se
    assert proc.delta(3, 2) == pytest.approx(0.17677669529663687)


def test_delta_beyond_support_is_exactly_zero():
    proc = ZOO["ma1"]()
    for j in (2, 5):
        d, se = estimate_delta(proc, j, 2.0, N=5000, L=10, seed=Seed(2))
        assert d == 0.0 and se == 0.0


def test_delta_haar_mother_lower_bits_is_zero():
    proc = DoublingMapSpec(InnovationLaw("bernoulli_half"), "haar", haar={(0, 1): 1.0})
    for j in (1, 4):
        assert estimate_delta(proc, j, 2.0, N=5000, L=60, seed=Seed(3))[0] == 0.0
    assert estimate_delta(proc, 0, 2.0, N=5000, L=60, seed=Seed(3))[0] > 0


def test_delta_lag_beyond_budget_flagged():
    with pytest.raises(LagBudgetError, match="lag budget"):
        estimate_delta(ZOO["ar1"](), 20, 2.0, N=100, L=10)


def test_delta_rejects_p_above_moments():
    proc = LinearSpec(InnovationLaw("student_t", 3.0), "t3", (1.0,))
    with pytest.raises(ValueError):
        estimate_profile(proc, 4.0, 2, N=100)


def test_theta_ar1_from_estimate():
    prof = estimate_profile(ZOO["ar1"](), 2.0, 40, N=50_000, seed=Seed(4))
    assert abs(theta_tail(prof, 0) - math.sqrt(2) / 0.5) <= 3 * prof.theta0_se + 1e-3
    assert not prof.long_range


def test_theta_trivial_cases():
    prof = DependenceProfile(2.0, np.arange(5), np.ones(5), np.zeros(5))
    assert theta_tail(prof, 7) == 0.0
    iid = DependenceProfile.from_process(ZOO["iid_normal"](), 2.0, 10)
    assert theta_tail(iid, 1) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_theta_nonincreasing(deltas):
    prof = DependenceProfile(2.0, np.arange(len(deltas)), deltas, np.zeros(len(deltas)),
                             tail=GeometricTail(1.0, 0.5))
    th = [prof.theta(m) for m in range(len(deltas) + 3)]
    assert all(b <= a + 1e-12 for a, b in zip(th, th[1:]))


def test_xi_finite_linear_is_exact():
    proc = ZOO["ma1"]()
    prof = DependenceProfile.from_process(proc, 2.0, 5)
    expect = 1.0 ** (0.5 - 1 / 3) * (0.5 * math.sqrt(2)) ** (2 / 3)
    assert xi_alpha_p(prof, 3.0) == pytest.approx(expect)


@pytest.mark.parametrize("r,alpha", [(0.5, 3.0), (0.9, 2.5), (0.3, 8.0)])
def test_xi_geometric_matches_direct_series(r, alpha):
    p = 2.0
    prof = DependenceProfile.from_model(GeometricTail(1.0, r), p)
    j = np.arange(1, 200_000, dtype=float)
    direct = float(np.sum(j ** (0.5 - 1 / alpha) * (r**j) ** (p / alpha)))
    assert xi_alpha_p(prof, alpha) == pytest.approx(direct, rel=0.01)


def test_xi_power_decay_divergence_flag():
    p, alpha = 2.0, 3.0
    # net exponent 1/2 - 1/a - beta p / a = 1/6 - 2/3 = -1/2 >= -1
    prof = DependenceProfile.from_model(PowerLogTail(1.0, 1.0), p)
    assert math.isinf(xi_alpha_p(prof, alpha))
    prof = DependenceProfile.from_model(PowerLogTail(1.0, 4.0), p)
    assert math.isfinite(xi_alpha_p(prof, alpha))
    with pytest.raises(ValueError):
        xi_alpha_p(prof, 1.5)


def test_tau_p_examples():
    assert tau_p(4) == pytest.approx(1.0, abs=1e-15)
    assert tau_p(2) == 0.0
    assert tau_p(6) == pytest.approx((32 + 4 * math.sqrt(160)) / 48)
    assert tau_p(6) == pytest.approx(1.72076, abs=5e-6)
    with pytest.raises(ValueError):
        tau_p(1.5)


@pytest.mark.parametrize("p", [2.5, 3, 4, 5, 6, 8])
def test_tau_residual(p):
    assert abs(tau_residual(p)) < 1e-12


def test_mk_schedule_examples():
    assert mk_schedule("ii", 4, 6, 12) == 2
    assert mk_schedule("ii", 4, 6, 8) == 1
    assert mk_schedule("iii", 3, 4, 10) == 14


def test_mk_schedule_rejections_name_the_inequality():
    with pytest.raises(ValueError, match="p > 4"):
        mk_schedule("i", 3, 4, 5)
    with pytest.raises(ValueError, match="alpha"):
        mk_schedule("iii", 3, 6, 5)
    with pytest.raises(ValueError, match="k >= 2"):
        mk_schedule("ii", 4, 6, 1)
    with pytest.raises(ValueError):
        Schedule("constant", value=0)


def test_schedule_case_i_is_positive():
    s = Schedule("i", p=6, alpha=8)
    assert all(s(k) >= 1 for k in range(1, 40))


def test_conditions_geometric_all_pass():
    prof = DependenceProfile.from_model(GeometricTail(1.0, 0.5), 4.0)
    rep = check_theorem_conditions(prof, 6.0, Schedule("ii", 4, 6), 4.0, K=60)
    assert rep.all_passed, rep.to_text()
    assert all(math.isfinite(c.value) or c.name == "variance_rate" for c in rep.checks.values())


def test_conditions_constant_theta_fails_series():
    prof = DependenceProfile.from_model(ConstantTheta(0.3), 4.0)
    rep = check_theorem_conditions(prof, 6.0, Schedule("ii", 4, 6), 4.0, K=60)
    assert not rep.checks["theta_series"].passed
    assert rep.checks["theta_series"].summands


@pytest.mark.parametrize("A,ok", [(2.0, True), (1.0, False)])
def test_conditions_power_log_threshold(A, ok):
    prof = DependenceProfile.from_model(ThetaPowerLog(1.0, 1.0, A), 4.0)
    rep = check_theorem_conditions(prof, 6.0, Schedule("ii", 4, 6), 4.0, K=120)
    assert rep.all_passed is ok


def test_conditions_reject_alpha_not_above_p():
    prof = DependenceProfile.from_model(GeometricTail(1.0, 0.5), 4.0)
    with pytest.raises(ValueError):
        check_theorem_conditions(prof, 4.0, Schedule("ii", 4, 6))


def test_series_diagnostic_examples():
    k = np.arange(1, 61)
    assert series_diagnostic(0.5**k, k).converges
    assert not series_diagnostic(1.0 / k, k).converges
    assert series_diagnostic(1.0 / k**2, k).converges
    assert not series_diagnostic(np.ones(60), k).converges


def test_little_o_diagnostic():
    assert little_o_diagnostic(1.0 / np.arange(1, 20), range(1, 20)).passed
    v = little_o_diagnostic(np.ones(10), range(10))
    assert not v.passed and v.k0 is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-4, 1.0), st.integers(1, 300))
def test_min_over_l_matches_scan(r, slope, hi):
    theta = lambda l: r**l / (1 - r)
    val, arg = min_over_l(theta, slope, hi)
    brute = min(theta(l) + l * slope for l in range(hi + 1))
    assert val == pytest.approx(brute)
    assert 0 <= arg <= hi


def test_fit_tail_recovers_geometric():
    j = np.arange(20)
    prof = DependenceProfile(2.0, j, 0.6**j, np.full(20, 1e-4))
    t = fit_tail(prof)
    assert t.kind == "geometric"
    assert t.r == pytest.approx(0.6, rel=1e-6)


def test_crn_lowers_estimator_variance():
    proc = ZOO["ar1"]()
    crn, ind = [], []
    for s in range(100):
        crn.append(estimate_profile(proc, 2.0, 2, N=500, seed=Seed(s), fit=False).delta[2])
        ind.append(estimate_profile(proc, 2.0, 2, N=500, seed=Seed(s), fit=False,
                                    crn=False).delta[2])
    assert np.var(crn) <= np.var(ind)


def test_projection_dominated_by_delta():
    proc = LinearSpec(NORMAL, "ar_as_ma", tuple(0.5**j for j in range(30)))
    prof = estimate_profile(proc, 2.0, 6, N=50_000, seed=Seed(5), fit=False)
    for i in range(7):
        proj = projection_norm_linear(proc, i)
        assert proj == pytest.approx(0.5**i)
        assert proj <= prof.delta[i] + 3 * prof.se[i]


def test_profile_rows_columns():
    prof = estimate_profile(ZOO["ma1"](), 2.0, 3, N=1000, seed=Seed(6), fit=False)
    rows = prof.rows()
    assert [r[0] for r in rows] == [0, 1, 2, 3]
    assert all(r[3] == 1000 for r in rows)
