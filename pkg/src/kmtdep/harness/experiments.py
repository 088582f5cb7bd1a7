"""Experiment runners behind the CLI subcommands.

Every runner splits replications into fixed chunks keyed by replication id,
maps them through a caller-supplied ``mapper`` (builtin ``map`` or an
executor's ``map``) and reduces in chunk order, so outputs do not depend on
the worker count.
"""

from __future__ import annotations

import contextlib
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .. import gaussian_coupling as gc
from ..depmeasure import ConditionReport, DependenceProfile, check_theorem_conditions, estimate_profile
from ..innovations import Seed, draw_panel
from ..pipeline import decompose, layout
from ..processes import CausalProcess
from .config import ExperimentConfig
from .rates import RateFit, fit_rate

CHUNK = 10


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("KMT_DEP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"KMT_DEP_WORKERS: not an integer: {env!r}") from None
    return 1


@contextlib.contextmanager
def mapper_for(workers: int):
    """``map`` for one worker, else an ordered process-pool map."""
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield ex.map


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _chunks(reps: int, size: int = CHUNK):
    return [np.arange(a, min(a + size, reps), dtype=np.int64) for a in range(0, reps, size)]


# ---------------------------------------------------------------- simulate


def run_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    """One decomposition at the largest horizon: paths and blocks CSVs."""
    proc = cfg.build_process()
    n = cfg.n_grid[-1]
    lay = layout(n, cfg.schedule_obj())
    dec = decompose(proc, Seed(cfg.seed).derive("paths"), lay, cfg.p, 1, R=cfg.inner_R)
    write_csv(out / "paths.csv", ["i", "S", "S_dag", "S_tilde", "S_diamond"], dec.path_rows(0))
    write_csv(out / "blocks.csv", ["k", "j", "window_start", "window_end", "B_value"],
              dec.block_rows(0))
    return {"n": n, "K0": lay.K0, "blocks": int(lay.blocks.shape[0]), "notes": dec.notes}


# -------------------------------------------------------------- depmeasure


def run_depmeasure(cfg: ExperimentConfig, out: Path, mapper=map) -> DependenceProfile:
    proc = cfg.build_process()
    prof = estimate_profile(proc, 2.0 if cfg.p > proc.law.p_max else cfg.p, cfg.jmax, cfg.N,
                            seed=Seed(cfg.seed).derive("depmeasure"), mapper=mapper)
    write_csv(out / "depmeasure.csv", ["j", "delta_hat", "se", "n_reps"], prof.rows())
    return prof


# ------------------------------------------------------- check-conditions


def condition_profile(cfg: ExperimentConfig, mapper=map) -> tuple[DependenceProfile, str]:
    model = cfg.theta_model()
    if model is not None:
        return DependenceProfile.from_model(model, cfg.p), f"analytic stub {model.kind}"
    proc = cfg.build_process()
    if proc.delta(0, cfg.p) is not None:
        return DependenceProfile.from_process(proc, cfg.p, cfg.jmax), "process oracle"
    prof = estimate_profile(proc, cfg.p, cfg.jmax, cfg.N,
                            seed=Seed(cfg.seed).derive("depmeasure"), mapper=mapper)
    return prof, f"Monte Carlo estimate, N={cfg.N}"


def run_check(cfg: ExperimentConfig, out: Path, mapper=map) -> ConditionReport:
    prof, source = condition_profile(cfg, mapper)
    rep = check_theorem_conditions(prof, cfg.alpha, cfg.schedule_obj(), cfg.p, cfg.K)
    (out / "conditions.txt").write_text(f"dependence profile: {source}\n" + rep.to_text())
    write_csv(out / "conditions.csv", ["check", "k", "summand"], rep.summand_rows())
    return rep


# ---------------------------------------------------------- sip-experiment


@dataclass
class SipSetup:
    """Everything shared by all coupling replications."""

    cfg: ExperimentConfig
    proc: CausalProcess
    lay: object
    variance: gc.VarianceModel
    laws: dict


def sip_setup(cfg: ExperimentConfig) -> SipSetup:
    proc = cfg.build_process()
    lay = layout(cfg.n_grid[-1], cfg.schedule_obj())
    seed = Seed(cfg.seed)
    vm = gc.variance_model(proc, lay, cfg.p, seed=seed.derive("variance"))
    laws = gc.block_laws(proc, lay, cfg.p, seed.derive("block-laws"), cfg.block_count, vm)
    return SipSetup(cfg, proc, lay, vm, laws)


def _sip_chunk(args):
    setup, reps = args
    cfg = setup.cfg
    seed = Seed(cfg.seed).derive("coupling")
    dec = None
    if cfg.mode == "transform":
        dec = decompose(setup.proc, Seed(cfg.seed).derive("paths"), setup.lay, cfg.p, reps,
                        R=cfg.inner_R)
    cp = gc.couple_blocks(setup.lay, setup.variance, setup.laws, seed, reps, dec, cfg.mode)
    law, grid = cp.error_split()
    first = cp if reps[0] == 0 else None
    return (reps, cp.sup_at(cfg.n_grid, "G"), cp.sup_at(cfg.n_grid, "lin"), law, grid,
            list(first.rows(0)) if first is not None else None, cp.notes)


@dataclass
class SipResult:
    fit: RateFit
    fit_lin: RateFit
    D: np.ndarray
    D_lin: np.ndarray
    law_err: np.ndarray
    grid_err: np.ndarray
    setup: SipSetup
    notes: list = field(default_factory=list)


def run_sip(cfg: ExperimentConfig, out: Path | None, mapper=map) -> SipResult:
    setup = sip_setup(cfg)
    tasks = [(setup, reps) for reps in _chunks(cfg.replications)]
    D, Dl, law, grid, path_rows, notes = [], [], [], [], None, []
    for reps, d, dl, le, ge, rows, nt in mapper(_sip_chunk, tasks):
        D.append(d)
        Dl.append(dl)
        law.append(le)
        grid.append(ge)
        if rows is not None:
            path_rows = rows
        for x in nt:
            if x not in notes:
                notes.append(x)
    D, Dl = np.vstack(D), np.vstack(Dl)
    law, grid = np.concatenate(law), np.concatenate(grid)
    n = np.asarray(cfg.n_grid)

    def _fit(M):
        med = np.median(M, axis=0)
        q25, q75 = np.percentile(M, [25, 75], axis=0)
        if n.size >= 4:
            return fit_rate(n, med, q25, q75)
        return RateFit(math.nan, math.nan, math.nan, n, med, q25, q75,
                       ["fewer than 4 horizons: no slope fitted"])

    fit, fit_lin = _fit(D), _fit(Dl)
    res = SipResult(fit, fit_lin, D, Dl, law, grid, setup, notes + fit.notes)
    if out is not None:
        write_csv(out / "rate.csv", ["n", "median_D", "q25", "q75", "fitted_slope"], fit.rows())
        write_csv(out / "rate_linearized.csv", ["n", "median_D", "q25", "q75", "fitted_slope"],
                  fit_lin.rows())
        write_csv(out / "sup_errors.csv", ["replication", "n", "D", "D_lin"],
                  ((r, int(nn), D[r, c], Dl[r, c]) for r in range(D.shape[0])
                   for c, nn in enumerate(n)))
        write_csv(out / "coupled_paths.csv", ["i", "S_diamond", "B_phi", "sigma_Bddag", "abs_err"],
                  path_rows or [])
        vm = setup.variance
        write_csv(out / "variance.csv", ["k", "m_k", "nu_k", "block_law"],
                  ((k, setup.lay.m[k], vm.nu[k], type(setup.laws[k]).__name__
                    if k in setup.laws else "none") for k in range(1, setup.lay.h + 1)))
    return res


def sip_text(res: SipResult) -> str:
    cfg = res.setup.cfg
    vm = res.setup.variance
    lines = [f"horizons {', '.join(str(n) for n in cfg.n_grid)}; {cfg.replications} replications; "
             f"coupling mode {cfg.mode}",
             f"sigma^2 = {vm.sigma2:.6g}; K0 = {res.setup.lay.K0}",
             f"fitted slope of log median D_n: {res.fit.slope:.4f} (R^2 {res.fit.r2:.3f}); "
             f"target 1/p = {1 / cfg.p:.4f}",
             f"fitted slope against the linearised path: {res.fit_lin.slope:.4f}",
             f"median block-law mismatch {np.median(res.law_err):.4g}; "
             f"median variance-grid mismatch {np.median(res.grid_err):.4g}"]
    for n, med, a, b, _ in res.fit.rows():
        lines.append(f"  n = {n}: median D_n {med:.4g} (q25 {a:.4g}, q75 {b:.4g})")
    lines += [f"note: {x}" for x in res.notes]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ CLT check


def _clt_chunk(args):
    proc, seed, n, reps, L = args
    eps = draw_panel(seed, proc.law, 1 - L, n + 1, reps)
    x = proc.run(eps)[:, L:]
    return x.sum(axis=1), x


def clt_check(proc: CausalProcess, n: int, reps: int, seed: Seed, sigma2: float | None = None,
              chunk: int = 100, mapper=map):
    """KS distance of S_n / sqrt(n sigma^2) to N(0, 1) over independent replications.

    Without an oracle, sigma^2 comes from a flat-top estimate on the same paths.
    Returns (statistic, p-value, 1% critical value, sigma^2 used).
    """
    L = proc.min_lag
    tasks = [(proc, seed, n, np.arange(a, min(a + chunk, reps), dtype=np.int64), L)
             for a in range(0, reps, chunk)]
    sums, est = [], []
    s2 = sigma2 if sigma2 is not None else proc.sigma2
    for s, x in mapper(_clt_chunk, tasks):
        sums.append(s)
        if s2 is None:
            est.append(gc.sigma2_longrun(x=x, bandwidth=64, mean=proc.mean).value)
    if s2 is None:
        s2 = float(np.mean(est))
    z = (np.concatenate(sums) - n * proc.mean) / math.sqrt(n * s2)
    ks = stats.kstest(z, "norm")
    crit = stats.kstwo.ppf(0.99, z.size)
    return float(ks.statistic), float(ks.pvalue), float(crit), s2
