import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmtdep.depmeasure import estimate_delta, estimate_profile
from kmtdep.innovations import InnovationLaw, Seed, draw_panel
from kmtdep.processes import (ZOO, AR1Spec, DoublingMapSpec, IRFSpec, LagBudgetError, LinearSpec,
                              VolterraSpec, contraction_ratio, doubling_delta_formula,
                              doubling_delta_printed, evaluate_coupled, evaluate_path,
                              haar_delta_bound, load_process, make_process, volterra_delta_bound,
                              volterra_Qnk)

NORMAL = InnovationLaw("standard_normal")
BITS = InnovationLaw("bernoulli_half")


def _ar_step(x, e):
    return 0.5 * x + e


def test_identity_linear_path_is_the_innovations():
    proc = LinearSpec(NORMAL, "id", (1.0,))
    x = evaluate_path(proc, Seed(1), 4, 0)
    assert np.array_equal(x, draw_panel(Seed(1), NORMAL, 1, 5, 1)[0])


def test_irf_ar1_lag_one_autocorrelation():
    proc = IRFSpec(NORMAL, "irf_ar1", G=_ar_step, ell_p=0.5, burn_in=60)
    x = evaluate_path(proc, Seed(2), 1_000_000, 60)
    r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(r1 - 0.5) < 0.005


def test_irf_default_burn_in():
    proc = IRFSpec(NORMAL, "irf", G=_ar_step, ell_p=0.5)
    assert proc.burn_in == math.ceil(60 / math.log(2))


def test_haar_mother_path_recodes_bits():
    proc = DoublingMapSpec(BITS, "haar", haar={(0, 1): 1.0})
    eps = draw_panel(Seed(3), BITS, 1, 201, 1)
    x = evaluate_path(proc, Seed(3), 200, proc.min_lag)
    assert np.array_equal(x, np.where(eps[0] == 0, 1.0, -1.0))


def test_lag_budget_rejected_with_tail_bound():
    with pytest.raises(LagBudgetError, match="tail bound"):
        evaluate_path(ZOO["ar1"](), Seed(0), 10, 5)


def test_volterra_qnk_examples():
    spec = VolterraSpec(NORMAL, "v", {1: {(0,): 1.0, (1,): 0.5, (2,): 0.25},
                                      2: {(0, 1): 2.0, (1, 3): 1.0}})
    assert volterra_Qnk(spec, 1, 1) == 0.25
    assert volterra_Qnk(spec, 9, 1) == 0.0
    assert volterra_Qnk(spec, 1, 2) == 5.0


def test_volterra_rejects_unsorted_support():
    with pytest.raises(ValueError):
        VolterraSpec(NORMAL, "v", {2: {(1, 0): 1.0}})


def test_volterra_bound_linear_equality_and_zero():
    a = 0.7
    spec = VolterraSpec(NORMAL, "v", {1: {(2,): a}})
    assert volterra_delta_bound(spec, 2, 2, c_p=2.0) == pytest.approx(2 * a * a)
    assert spec.delta(2, 2) ** 2 == pytest.approx(2 * a * a) if spec.delta(2, 2) is not None else True
    assert volterra_delta_bound(VolterraSpec(NORMAL, "z", {1: {(0,): 0.0}}), 0, 2) == 0.0
    with pytest.raises(ValueError):
        volterra_delta_bound(spec, 2, 3)


def test_volterra_bound_dominates_monte_carlo():
    spec = ZOO["volterra2"]()
    for n in (0, 1, 3):
        d, se = estimate_delta(spec, n, 2.0, N=100_000, L=spec.min_lag + n, seed=Seed(40 + n))
        bound = volterra_delta_bound(spec, n, 2)
        assert bound >= d**2 - 3 * 2 * d * se


def test_doubling_formula_examples():
    haar = DoublingMapSpec(BITS, "haar", haar={(0, 1): 1.0})
    for i in (1, 2, 5):
        assert doubling_delta_formula(haar, i, 2.0) == 0.0
        x, xc = evaluate_coupled(haar, Seed(5), Seed(6), i, haar.min_lag + i, np.arange(2000))
        assert np.array_equal(x, xc)
    cos = ZOO["doubling_cos"]()
    for i in range(6):
        assert doubling_delta_formula(cos, i, 3.0) <= (2 * math.pi) ** 3 * 2.0 ** (-3 * i)
    zero = DoublingMapSpec(BITS, "zero", g=lambda u: np.zeros_like(u), lipschitz=0.0)
    assert doubling_delta_formula(zero, 3, 2.0) == 0.0


def test_doubling_formula_matches_bit_flip_monte_carlo():
    cos = ZOO["doubling_cos"]()
    for i in (0, 1, 3):
        d, se = estimate_delta(cos, i, 2.0, N=100_000, L=60, seed=Seed(70 + i))
        assert abs(d**2 - doubling_delta_formula(cos, i, 2.0)) <= 3 * 2 * d * se + 1e-9


def test_doubling_printed_reading_differs_from_coupling():
    cos = ZOO["doubling_cos"]()
    assert doubling_delta_printed(cos, 0, 2.0) == 0.0  # only the skipped cell exists
    assert doubling_delta_printed(cos, 2, 2.0) > 0


def test_haar_bound_examples():
    assert haar_delta_bound({(0, 1): 1.0}, 0, 2) == 1.0
    assert haar_delta_bound({(0, 1): 1.0, (2, 1): 0.0}, 2, 2) == 0.0
    i = 3
    coefs = {(i, j): 2.0**-i for j in range(1, 2**i + 1)}
    assert haar_delta_bound(coefs, i, 2) == pytest.approx(2.0**-i)


def test_haar_rejects_bad_index():
    with pytest.raises(ValueError):
        DoublingMapSpec(BITS, "bad", haar={(1, 3): 1.0})


def test_doubling_mean_check():
    assert abs(ZOO["doubling_cos"]().mean_check()) < 1e-6


@pytest.mark.parametrize("name", list(ZOO))
def test_stationarity_two_windows(name):
    proc = ZOO[name]()
    n, nb = 100_000, 50
    x = evaluate_path(proc, Seed(90), 2 * n, proc.min_lag)
    stats_ = []
    for w in (x[:n], x[n:]):
        b = w.reshape(nb, -1)
        c = b - b.mean()
        stats_.append(np.stack([b.mean(1), (c**2).mean(1), (c[:, :-1] * c[:, 1:]).mean(1)]))
    diff = stats_[0].mean(1) - stats_[1].mean(1)
    se = np.sqrt(stats_[0].var(1, ddof=1) / nb + stats_[1].var(1, ddof=1) / nb)
    assert np.all(np.abs(diff) <= 3 * se + 1e-12)


@pytest.mark.parametrize("name", ["ar1", "arch1", "tanh_ar"])
def test_contraction_certificate(name):
    proc = ZOO[name]()
    rng = np.random.default_rng(1)
    pairs = rng.normal(scale=3.0, size=(100, 2))
    worst = max(contraction_ratio(proc, a, b, proc.ell_order, 20_000, Seed(11))
                for a, b in pairs if abs(a - b) > 1e-6)
    assert worst <= proc.ell_p * 1.02


@pytest.mark.parametrize("name", ["ar1", "arch1", "tanh_ar", "ma1", "doubling_cos"])
def test_tail_bound_honesty(name):
    proc = ZOO[name]()
    full = proc.min_lag + 40
    eps = draw_panel(Seed(12), proc.law, -full, 1, 10_000)
    x = proc.run(eps)[:, -1]
    for L in (2, 5, 10):
        xl = proc.run(eps[:, -(L + 1):])[:, -1]
        d2 = (x - xl) ** 2
        est = math.sqrt(d2.mean())
        se = d2.std(ddof=1) / math.sqrt(d2.size) / (2 * est) if est > 0 else 0.0
        assert est - 3 * se <= proc.tail_bound(L) + 1e-12


def test_tail_bound_nonincreasing():
    for name in ZOO:
        proc = ZOO[name]()
        b = [proc.tail_bound(L) for L in range(0, 80, 5)]
        assert all(y <= x + 1e-15 for x, y in zip(b, b[1:]))


def test_geometric_delta_decay_for_contractive_irf():
    proc = IRFSpec(NORMAL, "irf_ar1", G=_ar_step, ell_p=0.5, burn_in=60)
    prof = estimate_profile(proc, 2.0, 10, N=20_000, seed=Seed(13), fit=False)
    slope = np.polyfit(np.arange(1, 11), np.log(prof.delta[1:]), 1)[0]
    assert abs(slope - math.log(0.5)) <= 0.1 * abs(math.log(0.5))


def test_ar1_oracles():
    proc = AR1Spec(NORMAL, "ar", rho=0.5)
    assert proc.delta(3, 2) == pytest.approx(math.sqrt(2) * 0.125)
    assert proc.sigma2 == pytest.approx(4.0)
    assert proc.gamma(2) == pytest.approx(0.25 / 0.75)


def test_sample_variance_matches_oracle():
    for name in ("ar1", "ma1", "arch1", "volterra2", "doubling_cos"):
        proc = ZOO[name]()
        x = evaluate_path(proc, Seed(14), 200_000, proc.min_lag)
        assert np.var(x) == pytest.approx(proc.gamma(0), rel=0.03)


def test_load_process_names_bad_key(tmp_path):
    with pytest.raises(KeyError, match="process.kind"):
        load_process({"rho": "0.5"})
    with pytest.raises(KeyError, match="process.colour"):
        load_process({"kind": "ar1", "colour": "red"})
    with pytest.raises(KeyError, match="process.rho"):
        load_process({"kind": "ar1", "rho": "half"})
    table = tmp_path / "k.csv"
    table.write_text("j1,j2,value\n0,1,0.5\n")
    lin = tmp_path / "l.csv"
    lin.write_text("j1,value\n0,1.0\n")
    proc = load_process({"kind": "volterra", "kernels": "k.csv"}, tmp_path)
    assert proc.kernels[2][(0, 1)] == 0.5


def test_make_process_kinds():
    assert make_process("ma1", theta=-1.0).sigma2 == 0.0
    with pytest.raises(ValueError):
        make_process("garch")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6), st.integers(0, 5))
def test_linear_delta_is_coefficient_times_coupling_norm(coefs, j):
    proc = LinearSpec(NORMAL, "lin", tuple(coefs))
    expect = abs(coefs[j]) * math.sqrt(2) if j < len(coefs) else 0.0
    assert proc.delta(j, 2) == pytest.approx(expect)
