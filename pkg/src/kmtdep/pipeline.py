"""Truncation, m-dependent approximation and triadic blocking of a partial-sum path.

Time is split into scales (3^{k-1}, 3^k].  At scale k the summands are
clipped at 3^{k/p}, replaced by their conditional mean given the last m_k
innovations, and grouped into blocks of 3 m_k consecutive indices.  All block
windows are stored as half-open integer intervals in absolute time.

Arrays carry a leading replication axis; index 0 of the time axis is X_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal, special

from .innovations import Seed, draw_at, draw_panel
from .processes import CausalProcess, LagBudgetError

__all__ = [
    "truncate",
    "h_of",
    "TriadicLayout",
    "layout",
    "gaussian_truncated_mean",
    "truncated_mean",
    "mdep_approx",
    "BlockDecomposition",
    "decompose",
    "AuditReport",
    "block_independence_audit",
]


def truncate(w, a):
    """T_a(w) = max(min(w, a), -a)."""
    if not a > 0:
        raise ValueError("truncation level must be positive")
    if np.ndim(w) == 0:
        return max(min(float(w), a), -a)
    return np.clip(w, -a, a)


def h_of(n: int) -> int:
    """Smallest h with n <= 3^h, i.e. 3^{h-1} < n <= 3^h (integer arithmetic)."""
    if n < 1:
        raise ValueError("n must be positive")
    h, t = 0, 1
    while t < n:
        t *= 3
        h += 1
    return h


@dataclass(frozen=True)
class TriadicLayout:
    """Scale bookkeeping for horizon n.

    ``m[k]``, ``q[k]`` are indexed by scale k = 1..h (entry 0 unused).
    ``blocks`` rows are (k, j, start, stop, release): the block sums X~ over
    absolute indices start..stop-1 and enters the blocked path at index
    ``release``.
    """

    n: int
    h: int
    m: tuple
    q: tuple
    K0: int
    tau: int
    blocks: np.ndarray = field(repr=False)

    @property
    def N0(self) -> int:
        return 3**self.K0

    def scale_range(self, k: int) -> tuple[int, int]:
        """Absolute indices (3^{k-1}, min(3^k, n)] as a half-open [lo, hi)."""
        return 3 ** (k - 1) + 1, min(3**k, self.n) + 1

    def scale_of(self, i: int) -> int:
        """h_i for an absolute index i >= 2."""
        return h_of(int(i))

    def block_rows(self, k: int) -> np.ndarray:
        return self.blocks[self.blocks[:, 0] == k]


def _q(k: int, mk: int) -> int:
    if k < 2:
        return (2 // 3) // mk - 2
    return (2 * 3 ** (k - 2)) // mk - 2


def layout(n: int, schedule: Callable[[int], int]) -> TriadicLayout:
    """Build the triadic layout for horizon ``n`` under the block-length schedule.

    K0 is the first scale from which q_k >= 2 holds through the horizon;
    scales below K0 and a negative top-scale count tau_n contribute no blocks.
    """
    if n < 2:
        raise ValueError("n must be at least 2 (the n = 1 sums vanish by convention)")
    h = h_of(n)
    m = [0] + [int(schedule(k)) for k in range(1, h + 1)]
    if any(mk < 1 for mk in m[1:]):
        raise ValueError("block lengths m_k must be positive")
    q = [0] + [_q(k, m[k]) for k in range(1, h + 1)]
    K0 = h + 1
    for k in range(h, 0, -1):
        if q[k] >= 2:
            K0 = k
        else:
            break
    tau = (n - 3 ** (h - 1)) // (3 * m[h]) - 2
    rows = []
    for k in range(K0, h + 1):
        jmax = q[k] if k < h else tau
        base, mk = 3 ** (k - 1), m[k]
        for j in range(1, jmax + 1):
            start = base + 3 * j * mk + 1
            rows.append((k, j, start, start + 3 * mk, base + 3 * mk * (j + 2)))
    blocks = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return TriadicLayout(n, h, tuple(m), tuple(q), K0, tau, blocks)


# ------------------------------------------------------- conditional means


def gaussian_truncated_mean(mu, s, a):
    """E T_a(mu + s Z) for Z ~ N(0, 1)."""
    mu = np.asarray(mu, dtype=float)
    if s <= 0:
        return np.clip(mu, -a, a)
    al = (-a - mu) / s
    be = (a - mu) / s
    Pa, Pb = special.ndtr(al), special.ndtr(be)
    pdf = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return -a * Pa + a * (1 - Pb) + mu * (Pb - Pa) + s * (pdf(al) - pdf(be))


def truncated_mean(proc: CausalProcess, a: float, seed: Seed, draws: int = 1_000_000,
                   L: int | None = None) -> float:
    """E T_a(X) by closed form where possible, else from ``draws`` stationary values."""
    if proc.symmetric:
        return 0.0
    w = proc.gaussian_weights(0)
    if w is not None:
        return float(gaussian_truncated_mean(0.0, math.sqrt(w[0][0] ** 2 + w[1]), a))
    L = proc.min_lag if L is None else L
    rows = 1000
    per = -(-draws // rows)
    eps = draw_panel(seed.derive("truncated-mean"), proc.law, -L, per, rows)
    x = proc.run(eps)[:, L:]
    return float(np.mean(np.clip(x, -a, a)))


def _gaussian_mdep(proc, eps, L, m, a):
    w = proc.gaussian_weights(m)
    if w is None:
        return None
    weights, tail_var = w
    mu = signal.lfilter(weights[: m + 1], [1.0], eps, axis=-1)[..., L:]
    return gaussian_truncated_mean(mu, math.sqrt(tail_var), a)


def mdep_approx(proc: CausalProcess, k: int, i, m_k: int, R: int, seed: Seed, p: float,
                L: int | None = None, replication: int = 0, center: float | None = None):
    """X~_{k,i} = E[T_a(X_i) | eps_{i-m_k..i}] - E T_a(X), a = 3^{k/p}.

    The recent innovations come from the shared panel of ``seed``; older ones
    (lags m_k+1..L) are redrawn R times from an inner stream.  Linear
    Gaussian processes use the closed form instead and finite-memory
    processes with memory <= m_k need no averaging.  Returns (values, inner SE).
    """
    i = np.atleast_1d(np.asarray(i, dtype=np.int64))
    a = 3 ** (k / p)
    L = max(proc.min_lag, m_k) if L is None else L
    if L < m_k:
        raise LagBudgetError(f"lag budget L={L} below the window m_k={m_k}")
    if center is None:
        center = truncated_mean(proc, a, seed)
    times = i[:, None] + np.arange(-L, 1)[None, :]
    eps = draw_at(seed, proc.law, times, replication)
    g = _gaussian_mdep(proc, eps, L, m_k, a)
    if g is not None:
        return g[:, -1] - center, np.zeros(i.size)
    if proc.memory is not None and proc.memory <= m_k:
        return np.clip(proc.value_at_origin(eps), -a, a) - center, np.zeros(i.size)
    inner = seed.derive("inner").derive(int(replication))
    older = L - m_k
    vals = np.empty(i.size)
    ses = np.empty(i.size)
    for c0 in range(0, i.size, 64):
        sl = slice(c0, min(c0 + 64, i.size))
        ii = i[sl]
        rep_ids = ii[:, None] * R + np.arange(R)[None, :]
        w = np.broadcast_to(eps[sl, None, :], (ii.size, R, L + 1)).copy()
        if older > 0:
            old_t = ii[:, None, None] + np.arange(-L, -m_k)[None, None, :]
            w[:, :, :older] = draw_at(inner, proc.law, old_t, rep_ids[:, :, None])
        y = np.clip(proc.value_at_origin(w), -a, a)
        vals[sl] = y.mean(axis=1) - center
        ses[sl] = y.std(axis=1, ddof=1) / math.sqrt(R) if R > 1 else np.inf
    return vals, ses


# -------------------------------------------------------------- decomposition


@dataclass
class BlockDecomposition:
    """All approximating paths for a batch of replications.

    Time arrays have shape (reps, n) with column i-1 holding index i.
    """

    layout: TriadicLayout
    p: float
    levels: np.ndarray
    X: np.ndarray
    S: np.ndarray
    S_dag: np.ndarray
    Xtilde: np.ndarray
    S_tilde: np.ndarray
    B: np.ndarray
    S_diamond: np.ndarray
    replications: np.ndarray
    centers: np.ndarray
    inner_se: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.layout.n

    def _scale_cum(self, incr, k):
        lo, hi = self.layout.scale_range(k)
        return np.cumsum(incr[:, lo - 1:hi - 1], axis=1)

    def W(self, k: int) -> np.ndarray:
        """W_{k,l}, l = 1..(scale length), from the clipped centered summands."""
        return self._scale_cum(np.diff(self.S_dag, axis=1, prepend=0.0), k)

    def W_tilde(self, k: int) -> np.ndarray:
        return self._scale_cum(self.Xtilde, k)

    def block_values(self, k: int | None = None) -> np.ndarray:
        if k is None:
            return self.B
        return self.B[:, self.layout.blocks[:, 0] == k]

    def recompute_blocks(self) -> np.ndarray:
        """Block sums re-read from the stored windows."""
        out = np.empty_like(self.B)
        for b, (_, _, start, stop, _) in enumerate(self.layout.blocks):
            out[:, b] = self.Xtilde[:, start - 1:stop - 1].sum(axis=1)
        return out

    def replay_diamond(self) -> np.ndarray:
        """S^diamond rebuilt by adding stored blocks in release order."""
        n = self.n
        out = np.zeros_like(self.S_diamond)
        acc = np.zeros(self.B.shape[0])
        rel = self.layout.blocks[:, 4]
        b = 0
        for i in range(1, n + 1):
            while b < rel.size and rel[b] == i:
                acc = acc + self.B[:, b]
                b += 1
            out[:, i - 1] = acc
        return out

    def path_rows(self, r: int = 0):
        for i in range(self.n):
            yield (i + 1, float(self.S[r, i]), float(self.S_dag[r, i]),
                   float(self.S_tilde[r, i]), float(self.S_diamond[r, i]))

    def block_rows(self, r: int = 0):
        for b, (k, j, start, stop, _) in enumerate(self.layout.blocks):
            yield (int(k), int(j), int(start), int(stop), float(self.B[r, b]))


def _streamed_diamond(B: np.ndarray, lay: TriadicLayout) -> np.ndarray:
    """Running block total, each block added once at its release index."""
    out = np.zeros((B.shape[0], lay.n))
    acc = np.zeros(B.shape[0])
    rel = lay.blocks[:, 4]
    last = 0
    for idx in np.argsort(rel, kind="stable"):
        i = int(rel[idx])
        out[:, last:i - 1] = acc[:, None]
        acc = acc + B[:, idx]
        last = i - 1
    out[:, last:] = acc[:, None]
    return out


def decompose(proc: CausalProcess, seed: Seed, lay: TriadicLayout, p: float,
              replications=1, R: int = 256, L: int | None = None,
              projection: str = "conditional") -> BlockDecomposition:
    """Run truncation, m-dependent approximation and blocking on fresh paths.

    ``replications`` is a count (ids 0..r-1) or an array of replication ids.
    ``projection="none"`` skips the conditional mean (X~ = clipped centered X),
    which is what the block-independence negative control needs.
    """
    reps = (np.arange(int(replications), dtype=np.int64) if np.ndim(replications) == 0
            else np.asarray(replications, dtype=np.int64))
    n, h = lay.n, lay.h
    mmax = max(lay.m[1:])
    L = max(proc.min_lag, mmax) if L is None else L
    if L < mmax:
        raise LagBudgetError(f"lag budget L={L} below the largest window m_k={mmax}")
    eps = draw_panel(seed, proc.law, 1 - L, n + 1, reps)
    X = proc.run(eps)[:, L:]
    S = np.cumsum(X, axis=1)
    levels = np.array([3 ** (k / p) for k in range(h + 1)])
    centers = np.zeros(h + 1)
    dag_inc = np.zeros_like(X)
    Xt = np.zeros_like(X)
    worst_se = 0.0
    sd = float(np.std(X)) if X.size > 1 else 1.0
    for k in range(1, h + 1):
        lo, hi = lay.scale_range(k)
        a = levels[k]
        centers[k] = truncated_mean(proc, a, seed)
        dag_inc[:, lo - 1:hi - 1] = np.clip(X[:, lo - 1:hi - 1], -a, a) - centers[k]
        if projection == "none":
            Xt[:, lo - 1:hi - 1] = dag_inc[:, lo - 1:hi - 1]
            continue
        mk = lay.m[k]
        w = proc.gaussian_weights(mk)
        if w is not None:
            weights, tail_var = w
            seg = eps[:, lo - 1 + L - mk:hi - 1 + L]
            mu = signal.lfilter(weights[: mk + 1], [1.0], seg, axis=-1)[:, mk:]
            Xt[:, lo - 1:hi - 1] = gaussian_truncated_mean(mu, math.sqrt(tail_var), a) - centers[k]
        elif proc.memory is not None and proc.memory <= mk:
            Xt[:, lo - 1:hi - 1] = dag_inc[:, lo - 1:hi - 1]
        else:
            idx = np.arange(lo, hi)
            for r_pos, r in enumerate(reps):
                v, se = mdep_approx(proc, k, idx, mk, R, seed, p, L, int(r), centers[k])
                Xt[r_pos, lo - 1:hi - 1] = v
                worst_se = max(worst_se, float(np.max(se)) if se.size else 0.0)
    S_dag = np.cumsum(dag_inc, axis=1)
    S_tilde = np.cumsum(Xt, axis=1)
    B = np.empty((reps.size, lay.blocks.shape[0]))
    for b, (_, _, start, stop, _) in enumerate(lay.blocks):
        B[:, b] = Xt[:, start - 1:stop - 1].sum(axis=1)
    S_dia = _streamed_diamond(B, lay)
    notes = []
    if worst_se > 0.1 * sd:
        notes.append(f"inner replications too few: conditional-mean SE {worst_se:.3g} "
                     f"exceeds 10% of the path scale {sd:.3g}")
    return BlockDecomposition(lay, p, levels, X, S, S_dag, Xt, S_tilde, B, S_dia, reps,
                              centers, worst_se, notes)


# ------------------------------------------------------------------ audit


@dataclass
class AuditReport:
    reps: int
    band: float
    disjoint: bool
    scales: list
    adjacent: dict
    lag2: dict
    cross_scale: dict
    max_pair: dict

    @property
    def passed(self) -> bool:
        return self.disjoint and all(abs(v) <= self.band for v in self.adjacent.values())

    @property
    def detected(self) -> bool:
        return any(abs(v) > self.band for v in self.adjacent.values())


def _pooled_corr(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean(axis=0)
    y = y - y.mean(axis=0)
    den = math.sqrt(float(np.sum(x * x)) * float(np.sum(y * y)))
    return float(np.sum(x * y) / den) if den > 0 else 0.0


def _windows_disjoint(blocks: np.ndarray) -> bool:
    if blocks.shape[0] == 0:
        return True
    order = np.argsort(blocks[:, 2], kind="stable")
    b = blocks[order]
    if np.any(b[:, 3] - b[:, 2] <= 0):
        return False
    return bool(np.all(b[1:, 2] >= b[:-1, 3]))


def block_independence_audit(decomp: BlockDecomposition, min_reps: int = 200) -> AuditReport:
    """Correlation audit of neighbouring blocks plus an exact window-overlap check.

    Adjacent blocks B_{k,j}, B_{k,j+1} are pooled per scale and compared with
    the band 3/sqrt(reps); blocks two apart are exactly independent and
    reported separately.  Overlapping windows raise immediately.
    """
    lay = decomp.layout
    if not _windows_disjoint(lay.blocks):
        raise AssertionError("block windows overlap: layout bug")
    reps = decomp.B.shape[0]
    if reps < min_reps:
        raise ValueError(f"audit needs at least {min_reps} replications, got {reps}")
    band = 3 / math.sqrt(reps)
    adjacent, lag2, cross, max_pair = {}, {}, {}, {}
    scales = sorted(set(int(k) for k in lay.blocks[:, 0]))
    for k in scales:
        Bk = decomp.block_values(k)
        if Bk.shape[1] >= 2:
            adjacent[k] = _pooled_corr(Bk[:, :-1], Bk[:, 1:])
            pair = [abs(_pooled_corr(Bk[:, [j]], Bk[:, [j + 1]])) for j in range(Bk.shape[1] - 1)]
            max_pair[k] = max(pair)
        if Bk.shape[1] >= 3:
            lag2[k] = _pooled_corr(Bk[:, :-2], Bk[:, 2:])
        nxt = decomp.block_values(k + 1)
        if Bk.shape[1] and nxt.shape[1]:
            cross[k] = _pooled_corr(Bk[:, [-1]], nxt[:, [0]])
    return AuditReport(reps, band, True, scales, adjacent, lag2, cross, max_pair)
