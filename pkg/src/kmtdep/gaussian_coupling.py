"""Variance bookkeeping for the blocked sums and a per-block quantile coupling.

Each released block (k, j) owns the variance-grid interval of 3 m_k indices
ending at its release index.  One uniform U per block drives both the block
value F_k^{-1}(U) and the Brownian increment sqrt(phi increment) Phi^{-1}(U)
over that interval; indices outside every block interval receive free
Brownian increments, and values inside an interval are filled by a Brownian
bridge on the phi clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from .depmeasure import little_o_diagnostic
from .innovations import InnovationLaw, Seed, draw_panel, uniforms
from .pipeline import (BlockDecomposition, TriadicLayout, gaussian_truncated_mean, h_of,
                       mdep_approx, truncated_mean)
from .processes import CausalProcess

__all__ = [
    "gamma_tilde",
    "nu_k",
    "nu_from_process",
    "sigma2_longrun",
    "LongRunVariance",
    "phi_path",
    "block_variance_path",
    "VarianceModel",
    "variance_model",
    "simulate_blocks",
    "BlockLaw",
    "GaussianBlockLaw",
    "EmpiricalBlockLaw",
    "ExactBlockLaw",
    "block_laws",
    "CoupledPaths",
    "couple_blocks",
    "linearize",
]

_GH_NODES = 64


# ------------------------------------------------------------- covariances


def _truncation_negligible(proc: CausalProcess, a: float, tol: float = 1e-12) -> bool:
    w = proc.gaussian_weights(0)
    if w is None:
        return False
    sd = math.sqrt(w[0][0] ** 2 + w[1])
    return 2 * special.ndtr(-a / sd) <= tol


def gamma_tilde(proc: CausalProcess, k: int, m: int, p: float, lags: int | None = None,
                seed: Seed | None = None, length: int = 200_000, R: int = 256) -> np.ndarray:
    """Autocovariances of the m-dependent summands at scale k, lags 0..``lags``.

    Linear Gaussian processes: X~_i = g(mu_i) with mu_i Gaussian, computed by
    two-dimensional Gauss-Hermite quadrature (or exactly when truncation at
    3^{k/p} is negligible).  Otherwise a sample estimate from one long stretch.
    """
    lags = 2 * m if lags is None else lags
    a = 3 ** (k / p)
    w = proc.gaussian_weights(m)
    out = np.zeros(lags + 1)
    if w is not None:
        weights, tail_var = w
        wt = weights[: m + 1]
        cov = np.array([float(np.dot(wt[: wt.size - h], wt[h:])) if h <= m else 0.0
                        for h in range(lags + 1)])
        if _truncation_negligible(proc, a):
            return cov
        s = math.sqrt(tail_var)
        v = cov[0]
        x, wq = special.roots_hermite(_GH_NODES)
        z = x * math.sqrt(2)
        wq = wq / math.sqrt(math.pi)
        g1 = gaussian_truncated_mean(math.sqrt(v) * z, s, a)
        center = float(np.dot(wq, g1))
        out[0] = float(np.dot(wq, g1 * g1)) - center**2
        for h in range(1, min(lags, m) + 1):
            r = cov[h] / v if v > 0 else 0.0
            r = min(max(r, -1.0), 1.0)
            z2 = r * z[:, None] + math.sqrt(1 - r * r) * z[None, :]
            g2 = gaussian_truncated_mean(math.sqrt(v) * z2, s, a)
            out[h] = float(wq @ (g1[:, None] * g2) @ wq) - center**2
        return out
    seed = seed or Seed(0)
    L = max(proc.min_lag, m)
    eps = draw_panel(seed.derive(f"gamma-{k}-{m}"), proc.law, 1 - L, length + 1, 1)
    x = proc.run(eps)[:, L:][0]
    c = truncated_mean(proc, a, seed)
    if proc.memory is not None and proc.memory <= m:
        xt = np.clip(x, -a, a) - c
    else:
        xt, _ = mdep_approx(proc, k, np.arange(1, length + 1), m, R,
                            seed.derive(f"gamma-{k}-{m}"), p, L, 0, c)
    nn = xt.size
    for h in range(lags + 1):
        out[h] = float(np.dot(xt[: nn - h], xt[h:]) / nn) if h <= m else 0.0
    return out


def nu_k(gt: np.ndarray, m: int) -> float:
    """sum_{|i|<=m} g_i + 2 sum_{i=1}^{m} (1 - i/m) g_{m+i}; ``gt`` holds lags 0..2m."""
    gt = np.asarray(gt, dtype=float)
    if gt.size < 2 * m + 1:
        gt = np.concatenate([gt, np.zeros(2 * m + 1 - gt.size)])
    head = gt[0] + 2 * float(np.sum(gt[1:m + 1]))
    i = np.arange(1, m + 1)
    return float(head + 2 * np.sum((1 - i / m) * gt[m + 1:2 * m + 1]))


def nu_from_process(proc: CausalProcess, k: int, m: int, p: float, **kw) -> float:
    return nu_k(gamma_tilde(proc, k, m, p, 2 * m, **kw), m)


@dataclass
class LongRunVariance:
    value: float
    se: float
    method: str
    bandwidth: int | None = None
    long_range: bool = False


def _flat_top(t):
    t = np.abs(t)
    return np.where(t <= 0.5, 1.0, np.where(t <= 1.0, 2 * (1 - t), 0.0))


def sigma2_longrun(proc: CausalProcess | None = None, x: np.ndarray | None = None,
                   profile=None, bandwidth: int | None = None,
                   mean: float | None = None) -> LongRunVariance:
    """Long-run variance sum_i gamma_i.

    The process oracle is used when available.  Otherwise a flat-top lag
    window estimate on the sample ``x`` (rows = independent replications),
    with bandwidth where the fitted Theta drops below 1% of Theta_0.  A known
    ``mean`` avoids the O(bandwidth / n) downward bias of sample-mean centering.
    """
    if profile is not None and profile.long_range:
        return LongRunVariance(math.inf, math.nan, "long-range", long_range=True)
    if proc is not None and proc.sigma2 is not None:
        return LongRunVariance(float(proc.sigma2), 0.0, "oracle")
    if x is None:
        raise ValueError("no oracle: supply sample paths")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    if bandwidth is None:
        if profile is not None and profile.theta(0) > 0:
            t0 = profile.theta(0)
            b = 1
            while b < n // 4 and profile.theta(b) > 0.01 * t0:
                b *= 2
            bandwidth = b
        else:
            bandwidth = max(4, int(round(n ** (1 / 3))))
    xc = x - (x.mean(axis=1, keepdims=True) if mean is None else mean)
    est = np.zeros(x.shape[0])
    for h in range(0, bandwidth + 1):
        lam = float(_flat_top(h / bandwidth))
        if lam == 0:
            continue
        g = np.sum(xc[:, : n - h] * xc[:, h:], axis=1) / n
        est += lam * g * (1 if h == 0 else 2)
    val = float(np.mean(est))
    if x.shape[0] > 1:
        se = float(np.std(est, ddof=1) / math.sqrt(x.shape[0]))
    else:
        lam2 = sum(float(_flat_top(h / bandwidth)) ** 2 for h in range(-bandwidth, bandwidth + 1))
        se = abs(val) * math.sqrt(2 * lam2 / n)
    return LongRunVariance(val, se, "flat-top", bandwidth)


def phi_path(n: int, nu) -> np.ndarray:
    """phi_1..phi_n: phi_1 = 0 and phi_i - phi_{i-1} = nu_{h_i} for i >= 2.

    ``nu`` is indexed by scale (entry 0 unused) or is a callable k -> nu_k.
    """
    get = nu if callable(nu) else (lambda k: nu[k])
    out = np.zeros(n)
    acc = 0.0
    h = 1
    top = 3
    step = get(1)
    for i in range(2, n + 1):
        if i > top:
            h += 1
            top *= 3
            step = get(h)
        acc += step
        out[i - 1] = acc
    return out


def block_variance_path(lay: TriadicLayout, nu) -> np.ndarray:
    """Variance of the blocked sum at each index: sum of 3 m_k nu_k over released blocks."""
    get = nu if callable(nu) else (lambda k: nu[k])
    inc = np.zeros(lay.n)
    for k, _, _, _, rel in lay.blocks:
        inc[rel - 1] += 3 * lay.m[k] * get(int(k))
    return np.cumsum(inc)


@dataclass
class VarianceModel:
    """Per-scale variances and the derived phi clock and linearisation residual."""

    layout: TriadicLayout
    p: float
    gamma_tilde: dict
    nu: np.ndarray
    sigma2: float
    phi: np.ndarray
    varsigma2: np.ndarray
    b: np.ndarray

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.sigma2, 0.0))


def _b_coeffs(n: int, nu: np.ndarray, sigma: float) -> np.ndarray:
    b = np.zeros(n)
    for i in range(2, n + 1):
        b[i - 1] = math.sqrt(max(nu[h_of(i)], 0.0)) - sigma
    return b


def variance_model(proc: CausalProcess, lay: TriadicLayout, p: float, sigma2: float | None = None,
                   seed: Seed | None = None) -> VarianceModel:
    gts = {}
    nu = np.zeros(lay.h + 1)
    for k in range(1, lay.h + 1):
        gts[k] = gamma_tilde(proc, k, lay.m[k], p, 2 * lay.m[k], seed=seed)
        nu[k] = max(nu_k(gts[k], lay.m[k]), 0.0)  # rounding can go slightly negative
    if sigma2 is None:
        lr = sigma2_longrun(proc)
        sigma2 = lr.value
    phi = phi_path(lay.n, nu)
    b = _b_coeffs(lay.n, nu, math.sqrt(max(sigma2, 0.0)))
    return VarianceModel(lay, p, gts, nu, float(sigma2), phi, np.cumsum(b * b), b)


# --------------------------------------------------------------- block laws


def simulate_blocks(proc: CausalProcess, k: int, m: int, p: float, count: int, seed: Seed,
                    R: int = 256) -> np.ndarray:
    """``count`` independent copies of the scale-k summands over one 3m-long block.

    Returns the X~ rows, shape (count, 3m); block sums are ``rows.sum(1)``.
    """
    a = 3 ** (k / p)
    L = max(proc.min_lag, m)
    T = 3 * m
    s = seed.derive(f"blocks-{k}-{m}")
    c = truncated_mean(proc, a, seed)
    eps = draw_panel(s, proc.law, 1 - L, T + 1, count)
    w = proc.gaussian_weights(m)
    if w is not None:
        mu = signal.lfilter(w[0][: m + 1], [1.0], eps[:, L - m:], axis=-1)[:, m:]
        return gaussian_truncated_mean(mu, math.sqrt(w[1]), a) - c
    if proc.memory is not None and proc.memory <= m:
        return np.clip(proc.run(eps)[:, L:], -a, a) - c
    rows = np.empty((count, T))
    for r in range(count):
        rows[r], _ = mdep_approx(proc, k, np.arange(1, T + 1), m, R, s, p, L, r, c)
    return rows


class BlockLaw:
    """Distribution of one block sum: ``ppf`` and ``cdf``."""

    exact = False

    def ppf(self, u):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    @property
    def var(self) -> float:
        raise NotImplementedError


@dataclass
class GaussianBlockLaw(BlockLaw):
    variance: float
    exact = True

    def ppf(self, u):
        return math.sqrt(self.variance) * special.ndtri(u)

    def cdf(self, x):
        if self.variance <= 0:
            return np.where(np.asarray(x) < 0, 0.0, 1.0)
        return special.ndtr(np.asarray(x) / math.sqrt(self.variance))

    @property
    def var(self):
        return self.variance


@dataclass
class ExactBlockLaw(BlockLaw):
    """Block law given by an innovation law (e.g. single Rademacher summands)."""

    law: InnovationLaw
    exact = True

    def ppf(self, u):
        return self.law.ppf(u)

    def cdf(self, x):
        return self.law.cdf(x)

    @property
    def var(self):
        return self.law.var


class EmpiricalBlockLaw(BlockLaw):
    """Interpolated empirical quantiles with exponential tails beyond the sample range.

    The tail scale beta matches the p-th moment of the top 1% exceedances,
    E e^p = Gamma(p + 1) beta^p for an exponential excess.
    """

    def __init__(self, sample, p: float = 2.0):
        x = np.sort(np.asarray(sample, dtype=float))
        if x.size < 100:
            raise ValueError("need at least 100 samples for an empirical block law")
        self.x = x
        N = x.size
        self.u = (np.arange(1, N + 1) - 0.5) / N
        k = max(5, int(0.01 * N))
        self.beta_hi = self._scale(x[-k:] - x[-k - 1], p)
        self.beta_lo = self._scale(x[k] - x[:k], p)
        self._var = float(np.var(x))

    @staticmethod
    def _scale(ex, p):
        ex = ex[ex > 0]
        if ex.size == 0:
            return 1e-12
        return float((np.mean(ex**p) / math.gamma(p + 1)) ** (1 / p))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        x, uu = self.x, self.u
        out = np.interp(u, uu, x)
        lo = u < uu[0]
        hi = u > uu[-1]
        out = np.where(lo, x[0] - self.beta_lo * np.log(uu[0] / np.where(lo, u, 1.0)), out)
        out = np.where(hi, x[-1] + self.beta_hi * np.log((1 - uu[-1]) / np.where(hi, 1 - u, 1.0)),
                       out)
        return out

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        x, uu = self.x, self.u
        out = np.interp(v, x, uu)
        lo = v < x[0]
        hi = v > x[-1]
        out = np.where(lo, uu[0] * np.exp(-(x[0] - v) / self.beta_lo), out)
        out = np.where(hi, 1 - (1 - uu[-1]) * np.exp(-(v - x[-1]) / self.beta_hi), out)
        return out

    @property
    def var(self):
        return self._var


def block_laws(proc: CausalProcess, lay: TriadicLayout, p: float, seed: Seed,
               count: int = 10_000, variance: VarianceModel | None = None) -> dict:
    """F_k for every scale carrying blocks: exact Gaussian when the block is Gaussian, else empirical."""
    laws = {}
    for k in sorted(set(int(k) for k in lay.blocks[:, 0])):
        m = lay.m[k]
        a = 3 ** (k / p)
        if proc.gaussian_weights(m) is not None and _truncation_negligible(proc, a):
            gt = (variance.gamma_tilde[k] if variance is not None
                  else gamma_tilde(proc, k, m, p, 3 * m))
            gt = np.concatenate([gt, np.zeros(max(0, 3 * m - gt.size))])
            T = 3 * m
            h = np.arange(1, T)
            var = T * gt[0] + 2 * float(np.sum((T - h) * gt[1:T]))
            laws[k] = GaussianBlockLaw(var)
        else:
            laws[k] = EmpiricalBlockLaw(simulate_blocks(proc, k, m, p, count, seed).sum(axis=1), p)
    return laws


# ----------------------------------------------------------------- coupling


@dataclass
class CoupledPaths:
    """Blocked path and Gaussian paths driven by the same per-block uniforms.

    Arrays have shape (reps, n); column i-1 is index i.
    """

    S_diamond: np.ndarray
    G: np.ndarray
    lin: np.ndarray
    U: np.ndarray
    block_values: np.ndarray
    block_gauss: np.ndarray
    law_part: np.ndarray
    replications: np.ndarray
    notes: list = field(default_factory=list)

    @property
    def D(self) -> np.ndarray:
        return np.max(np.abs(self.S_diamond - self.G), axis=1)

    @property
    def D_lin(self) -> np.ndarray:
        return np.max(np.abs(self.S_diamond - self.lin), axis=1)

    def sup_at(self, grid, which: str = "G") -> np.ndarray:
        """max_{i<=n} |S_i - target_i| for each n in ``grid``; shape (reps, len(grid))."""
        tgt = self.G if which == "G" else self.lin
        run = np.maximum.accumulate(np.abs(self.S_diamond - tgt), axis=1)
        return run[:, np.asarray(grid) - 1]

    def error_split(self) -> tuple[np.ndarray, np.ndarray]:
        """(block-law mismatch sup, variance-grid mismatch sup) per replication."""
        law = np.max(np.abs(self.law_part), axis=1)
        grid = np.max(np.abs(self.S_diamond - self.law_part - self.G), axis=1)
        return law, grid

    def rows(self, r: int = 0):
        for i in range(self.S_diamond.shape[1]):
            s, g, l = self.S_diamond[r, i], self.G[r, i], self.lin[r, i]
            yield (i + 1, float(s), float(g), float(l), float(abs(s - g)))


def _randomized_pit(law: BlockLaw, x, v):
    # atoms get a uniform spread so the transform is exactly uniform
    hi = law.cdf(x)
    lo = law.cdf(np.nextafter(x, -np.inf))
    return np.clip(lo + v * (hi - lo), 1e-300, 1 - 1e-16)


def couple_blocks(lay: TriadicLayout, variance: VarianceModel, laws: dict, seed: Seed,
                  replications, decomp: BlockDecomposition | None = None,
                  mode: str = "draw") -> CoupledPaths:
    """Quantile-couple every released block with a Brownian motion on the phi clock.

    ``mode="draw"``: fresh uniforms, block value F_k^{-1}(U).  ``mode="transform"``:
    U is the (randomised) probability transform of the simulated blocks in
    ``decomp``, so the blocked path is the simulated one.
    Uniforms and Gaussian draws are addressed by absolute index, so the paths
    on [1, n] do not depend on the horizon beyond n.
    """
    reps = (np.arange(int(replications), dtype=np.int64) if np.ndim(replications) == 0
            else np.asarray(replications, dtype=np.int64))
    n = lay.n
    blocks = lay.blocks
    nb = blocks.shape[0]
    phi = variance.phi
    dphi = np.diff(phi, prepend=0.0)
    rel = blocks[:, 4]
    if mode == "draw":
        U = uniforms(seed.derive("block-uniform"), reps[:, None], rel[None, :])
        vals = np.empty_like(U)
        for b in range(nb):
            vals[:, b] = laws[int(blocks[b, 0])].ppf(U[:, b])
    elif mode == "transform":
        if decomp is None:
            raise ValueError("transform mode needs the decomposition")
        V = uniforms(seed.derive("pit"), reps[:, None], rel[None, :])
        vals = decomp.B.copy()
        U = np.empty_like(vals)
        for b in range(nb):
            U[:, b] = _randomized_pit(laws[int(blocks[b, 0])], vals[:, b], V[:, b])
    else:
        raise ValueError(f"unknown coupling mode {mode!r}")
    zU = special.ndtri(U)

    # free increments for every index, then bridge-corrected on block intervals
    Z = special.ndtri(uniforms(seed.derive("brownian"), reps[:, None],
                               np.arange(1, n + 1)[None, :]))
    inc = Z * np.sqrt(dphi)[None, :]
    gauss_block = np.empty((reps.size, nb))
    law_inc = np.zeros((reps.size, n))
    dia_inc = np.zeros((reps.size, n))
    for b in range(nb):
        k = int(blocks[b, 0])
        r = int(rel[b])
        lo = r - 3 * lay.m[k]
        seg = slice(lo, r)  # indices lo+1..r
        tot = float(phi[r - 1] - phi[lo - 1])
        g = math.sqrt(max(tot, 0.0)) * zU[:, b]
        gauss_block[:, b] = g
        if tot > 0:
            wts = dphi[seg] / tot
            cur = inc[:, seg].sum(axis=1)
            inc[:, seg] -= wts[None, :] * (cur - g)[:, None]
        dia_inc[:, r - 1] += vals[:, b]
        sd_law = math.sqrt(max(laws[k].var, 0.0))
        law_inc[:, r - 1] += vals[:, b] - sd_law * zU[:, b]
    G = np.cumsum(inc, axis=1)
    S_dia = np.cumsum(dia_inc, axis=1)
    law_part = np.cumsum(law_inc, axis=1)
    sigma = variance.sigma
    notes = []
    nu_i = np.array([variance.nu[h_of(i)] if i >= 2 else 0.0 for i in range(1, n + 1)])
    with np.errstate(divide="ignore", invalid="ignore"):
        std_inc = np.where(nu_i > 0, inc / np.sqrt(nu_i)[None, :], Z)
    std_inc[:, 0] = 0.0
    lin = sigma * np.cumsum(std_inc, axis=1)
    if sigma == 0:
        notes.append("sigma = 0: the linearised target is the zero path")
    return CoupledPaths(S_dia, G, lin, U, vals, gauss_block, law_part, reps, notes)


def linearize(nu, sigma: float, n_grid, p: float):
    """varsigma_n^2 on ``n_grid`` and the evidence that varsigma_n^2 log log n = o(n^{2/p}).

    ``nu`` is a callable k -> nu_k or an array indexed by scale.
    """
    get = nu if callable(nu) else (lambda k: nu[k])
    vals = []
    for n in n_grid:
        h = h_of(int(n))
        s = sum((3**k - 3 ** (k - 1)) * (math.sqrt(get(k)) - sigma) ** 2 for k in range(1, h))
        s += (int(n) - 3 ** (h - 1)) * (math.sqrt(get(h)) - sigma) ** 2
        vals.append(s)
    vals = np.array(vals)
    q = vals * np.array([max(math.log(math.log(n)), 1.0) if n > 1 else 1.0 for n in n_grid]) \
        / np.array([float(n) ** (2 / p) for n in n_grid])
    return vals, little_o_diagnostic(q, list(n_grid))
