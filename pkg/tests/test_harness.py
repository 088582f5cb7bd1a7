import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmtdep.harness import ConfigError, fit_rate, lemma_truncmoment_check, load_config, parse_n_grid
from kmtdep.harness.cli import main
from kmtdep.harness.experiments import resolve_workers
from kmtdep.innovations import InnovationLaw

GRID = [3**k for k in range(6, 11)]


def test_fit_rate_exact_power():
    f = fit_rate(GRID, [n**0.2 for n in GRID])
    assert f.slope == pytest.approx(0.2, abs=1e-9)
    assert f.r2 == pytest.approx(1.0)


def test_fit_rate_constant():
    assert fit_rate(GRID, [2.5] * 5).slope == pytest.approx(0.0, abs=1e-9)


def test_fit_rate_noisy_cube_root():
    noise = np.random.default_rng(0).uniform(-0.01, 0.01, size=5)
    f = fit_rate(GRID, [n ** (1 / 3) * (1 + e) for n, e in zip(GRID, noise)])
    assert abs(f.slope - 1 / 3) <= 0.02


def test_fit_rate_exact_coupling_sentinel():
    f = fit_rate(GRID, [0.0, 1.0, 1.0, 1.0, 1.0])
    assert f.slope == -math.inf and f.notes


def test_fit_rate_needs_four_points():
    with pytest.raises(ValueError):
        fit_rate(GRID[:3], [1.0, 2.0, 3.0])


def test_rate_rows_columns():
    rows = list(fit_rate(GRID, [1.0, 2.0, 3.0, 4.0, 5.0]).rows())
    assert len(rows) == 5 and len(rows[0]) == 5 and rows[0][0] == 729


def test_parse_n_grid_forms():
    assert parse_n_grid("3^6..3^10") == GRID
    assert parse_n_grid("729, 2187") == [729, 2187]
    assert parse_n_grid("3^6,3^8") == [729, 6561]
    for bad in ("", "3^8,3^6", "10..20", "1"):
        with pytest.raises(ValueError):
            parse_n_grid(bad)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 10**7), min_size=1, max_size=8, unique=True))
def test_parse_n_grid_roundtrip(ns):
    ns = sorted(ns)
    assert parse_n_grid(", ".join(str(n) for n in ns)) == ns


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 5))
def test_parse_n_grid_ranges(a, span):
    grid = parse_n_grid(f"3^{a}..3^{a + span}")
    assert grid == [3**k for k in range(a, a + span + 1)]


def _write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.parametrize("body,key", [
    ("[experiment]\np = 1.5\n", "experiment.p"),
    ("[experiment]\np = three\n", "experiment.p"),
    ("[experiment]\nalpha = 2.5\n", "experiment.alpha"),
    ("[experiment]\ncolour = red\n", "experiment.colour"),
    ("[experiment]\nmode = magic\n", "experiment.mode"),
    ("[experiment]\nn_grid = 3^8..3^6\n", "experiment.n_grid"),
    ("[experiment]\nschedule = ii\n", "experiment.schedule"),
    ("[extras]\nx = 1\n", "extras"),
])
def test_config_errors_name_the_key(tmp_path, body, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        load_config(_write(tmp_path, body))


def test_config_process_errors_name_the_key(tmp_path):
    cfg = load_config(_write(tmp_path, "[process]\nkind = ar1\nrho = half\n"))
    with pytest.raises(ConfigError, match="process.rho"):
        cfg.build_process()


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="--config"):
        load_config(tmp_path / "nope.ini")


def test_config_echo_roundtrip(tmp_path):
    cfg = load_config(_write(tmp_path, "[experiment]\np = 3\nalpha = 4  # inline\n"
                                        "n_grid = 3^6..3^8\n[process]\nkind = ma1\ntheta = 0.3\n"))
    again = load_config(_write(tmp_path, cfg.echo(), "echo.ini"))
    assert again.echo() == cfg.echo()
    assert again.n_grid == [729, 2187, 6561] and again.process["theta"] == "0.3"


def test_config_non_power_of_three_warns(tmp_path):
    with pytest.warns(UserWarning, match="not a power of 3"):
        load_config(_write(tmp_path, "[experiment]\nn_grid = 100, 3^6\n"))


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("KMT_DEP_WORKERS", raising=False)
    assert resolve_workers(None) == 1
    monkeypatch.setenv("KMT_DEP_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("KMT_DEP_WORKERS", "many")
    with pytest.raises(ValueError):
        resolve_workers(None)


def test_lemma_rademacher_first_sum_is_exact():
    rep = lemma_truncmoment_check(InnovationLaw("rademacher"), 3.0, 4.0)
    assert rep.tail_terms[0] == 1.0 and np.all(rep.tail_terms[1:] == 0)
    assert rep.tail_verdict.partial_sum == 1.0
    assert rep.converges


def test_lemma_normal_ratios_settle():
    rep = lemma_truncmoment_check(InnovationLaw("standard_normal"), 3.0, 4.0)
    t = rep.tail_terms
    live = t[5:-1] > 0
    assert np.all(t[6:][live] / t[5:-1][live] < 1)
    nz = t[5:][t[5:] > 0]
    assert np.all(np.diff(nz) < 0)
    assert rep.converges
    assert all(math.isfinite(x) for x in rep.ratios())


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_lemma_pareto_negative_control():
    rep = lemma_truncmoment_check(InnovationLaw("centered_pareto", 2.5), 3.0, 4.0)
    assert not rep.tail_verdict.converges
    assert math.isnan(rep.ratios()[0])
    assert "diverges" in rep.to_text()


def test_lemma_rejects_bad_orders():
    with pytest.raises(ValueError):
        lemma_truncmoment_check(InnovationLaw("standard_normal"), 4.0, 3.0)


SMALL = ("[experiment]\np = 3\nalpha = 4\nn_grid = 3^5..3^8\nreplications = 6\n"
         "N = 2000\njmax = 5\nblock_count = 500\ninner_R = 16\nK = 60\n")


def test_cli_check_conditions_ar1_passes(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL + "[process]\nkind = ar1\nrho = 0.5\n")
    assert main(["check-conditions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert capsys.readouterr().out.count("[PASS]") == 4
    assert (tmp_path / "o" / "conditions.csv").is_file()


def test_cli_constant_stub_exit_two(tmp_path):
    cfg = _write(tmp_path, SMALL + "[theta]\nmodel = constant\nc = 0.5\n")
    assert main(["check-conditions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_cli_usage_error_exit_one(tmp_path, capsys):
    cfg = _write(tmp_path, "[experiment]\np = 1\n")
    assert main(["check-conditions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "experiment.p" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["sip-experiment", "--n-grid", "3^9..3^2"])
    assert exc.value.code == 2  # argparse's own usage exit


def test_cli_sip_iid_slope(tmp_path):
    body = ("[experiment]\np = 3\nalpha = 4\nschedule = constant\nschedule_value = 1\n"
            "replications = 20\nblock_count = 2000\n[process]\nkind = iid\n")
    cfg = _write(tmp_path, body)
    out = tmp_path / "o"
    assert main(["sip-experiment", "--config", str(cfg), "--out", str(out),
                 "--n-grid", "3^6..3^10", "--seed", "5"]) == 0
    rows = (out / "rate.csv").read_text().splitlines()
    assert rows[0] == "n,median_D,q25,q75,fitted_slope"
    slope = float(rows[1].split(",")[-1])
    assert slope <= 1 / 3 + 0.1


def test_cli_report_is_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL + "[process]\nkind = ma1\ntheta = 0.5\n")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["report", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert "report.txt" in files and "config.echo.ini" in files
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    assert b"\r\n" in (outs[0] / "paths.csv").read_bytes()
