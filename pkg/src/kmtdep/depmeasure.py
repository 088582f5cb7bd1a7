"""Dependence measures, their tail sums and the sufficient conditions for the KMT rate.

Estimation uses common random numbers: the coupled path shares every
innovation with the original except the one at time 0, so the difference
``X_j - X_{j,{0}}`` carries no sampling noise from the other coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .innovations import Seed, draw_at, draw_panel
from .processes import CausalProcess, LagBudgetError

__all__ = [
    "TailModel",
    "GeometricTail",
    "PowerLogTail",
    "ThetaPowerLog",
    "ConstantTheta",
    "DependenceProfile",
    "estimate_delta",
    "estimate_profile",
    "fit_tail",
    "theta_tail",
    "xi_alpha_p",
    "tau_p",
    "tau_residual",
    "mk_schedule",
    "Schedule",
    "series_diagnostic",
    "SeriesVerdict",
    "little_o_diagnostic",
    "LittleOVerdict",
    "min_over_l",
    "CheckResult",
    "ConditionReport",
    "check_theorem_conditions",
    "projection_norm_linear",
]

_DIRECT_TERMS = 200_000


def _log_sum_tail(start: int, expo: float, logpow: float, coef: float = 1.0):
    """sum_{j>=start} coef j^expo (log j)^(-logpow); ``inf`` when divergent."""
    if expo > -1 + 1e-12 or (abs(expo + 1) <= 1e-12 and logpow <= 1):
        return math.inf
    start = max(int(start), 2)
    n_direct = 0 if start > _DIRECT_TERMS else _DIRECT_TERMS
    j = np.arange(start, start + n_direct, dtype=float)
    head = float(np.sum(coef * j**expo * np.log(j) ** (-logpow)))
    top = start + n_direct - 0.5
    rest = integrate.quad(lambda x: coef * x**expo * math.log(x) ** (-logpow), top, np.inf,
                          limit=200)[0]
    return head + rest


class TailModel:
    """Parametric law for delta_j (and Theta_m) beyond the measured range."""

    kind = "none"

    def delta(self, j):
        raise NotImplementedError

    def theta(self, m: int) -> float:
        raise NotImplementedError

    def xi_tail(self, start: int, alpha: float, p: float) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class GeometricTail(TailModel):
    """delta_j = c r^j."""

    c: float
    r: float
    kind = "geometric"

    def delta(self, j):
        j = np.asarray(j, dtype=float)
        return self.c * self.r ** np.maximum(j, 0)

    def theta(self, m):
        return self.c * self.r ** max(m, 0) / (1 - self.r)

    def xi_tail(self, start, alpha, p):
        if self.c == 0 or self.r == 0:
            return 0.0
        e = p / alpha
        # terms decay like r^{je}; sum until negligible
        span = int(min(10**7, max(100, 40 / max(-e * math.log(self.r), 1e-6))))
        j = np.arange(max(start, 1), max(start, 1) + span, dtype=float)
        return float(np.sum(j ** (0.5 - 1 / alpha) * (self.c * self.r**j) ** e))

    def params(self):
        return {"c": self.c, "r": self.r}


@dataclass(frozen=True)
class PowerLogTail(TailModel):
    """delta_j = c j^{-beta} (log j)^{-A} for j >= 2."""

    c: float
    beta: float
    A: float = 0.0
    kind = "power_log"

    def delta(self, j):
        j = np.maximum(np.asarray(j, dtype=float), 2.0)
        return self.c * j ** (-self.beta) * np.log(j) ** (-self.A)

    def theta(self, m):
        return _log_sum_tail(m, -self.beta, self.A, self.c)

    def xi_tail(self, start, alpha, p):
        e = p / alpha
        return _log_sum_tail(start, 0.5 - 1 / alpha - self.beta * e, self.A * e, self.c**e)

    def params(self):
        return {"c": self.c, "beta": self.beta, "A": self.A}


@dataclass(frozen=True)
class ThetaPowerLog(TailModel):
    """Theta_m = c m^{-tau} (log m)^{-A}, held flat for m <= 3 so it stays finite."""

    c: float
    tau: float
    A: float = 0.0
    kind = "theta_power_log"

    def theta(self, m):
        m = max(float(m), 3.0)
        return self.c * m ** (-self.tau) * math.log(m) ** (-self.A)

    def delta(self, j):
        j = np.asarray(j, dtype=float)
        m0 = np.maximum(j, 3.0)
        m1 = np.maximum(j + 1, 3.0)
        f = lambda m: self.c * m ** (-self.tau) * np.log(m) ** (-self.A)
        return np.where(j < 0, 0.0, f(m0) - f(m1))

    def xi_tail(self, start, alpha, p):
        e = p / alpha
        expo = 0.5 - 1 / alpha - (1 + self.tau) * e
        if expo > -1 + 1e-12 or (abs(expo + 1) <= 1e-12 and self.A * e <= 1):
            return math.inf
        j = np.arange(max(start, 1), max(start, 1) + _DIRECT_TERMS, dtype=float)
        head = float(np.sum(j ** (0.5 - 1 / alpha) * self.delta(j) ** e))
        # beyond the direct range delta_j ~ c j^{-1-tau} (log j)^{-A} (tau + A/log j)
        # integrate in y = log x, where the integrand is a tame power of y
        y0 = math.log(j[-1] + 0.5)
        g = lambda y: math.exp(y * (expo + 1)) * (
            self.c * y ** (-self.A) * (self.tau + self.A / y)) ** e
        if abs(expo + 1) <= 1e-12:
            # leading order closed form of int y^{-A e} dy plus the correction term
            b = self.A * e
            lead = (self.c * self.tau) ** e * y0 ** (1 - b) / (b - 1)
            return head + lead
        return head + integrate.quad(g, y0, np.inf, limit=200)[0]

    def params(self):
        return {"c": self.c, "tau": self.tau, "A": self.A}


@dataclass(frozen=True)
class ConstantTheta(TailModel):
    """Theta_m = c for every m: a no-decay stub (long-range dependent)."""

    c: float
    kind = "constant"

    def theta(self, m):
        return self.c

    def delta(self, j):
        return np.zeros_like(np.asarray(j, dtype=float))

    def xi_tail(self, start, alpha, p):
        return math.inf if self.c > 0 else 0.0

    def params(self):
        return {"c": self.c}


@dataclass
class DependenceProfile:
    """delta_{j,p} for j = 0..L (measured or exact) plus an optional tail model beyond L."""

    p: float
    j: np.ndarray
    delta: np.ndarray
    se: np.ndarray
    n_reps: int = 0
    tail: TailModel | None = None
    theta0_se: float = float("nan")
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=int)
        self.delta = np.maximum(np.asarray(self.delta, dtype=float), 0.0)
        self.se = np.asarray(self.se, dtype=float)

    @property
    def L(self) -> int:
        return int(self.j[-1]) if self.j.size else -1

    @classmethod
    def from_model(cls, model: TailModel, p: float) -> "DependenceProfile":
        """Purely analytic profile: nothing measured, the model covers every lag."""
        return cls(p, np.zeros(0, dtype=int), np.zeros(0), np.zeros(0), tail=model)

    @classmethod
    def from_process(cls, proc: CausalProcess, p: float, L: int) -> "DependenceProfile":
        """Exact profile from a process oracle on 0..L, with its analytic remainder as tail."""
        j = np.arange(L + 1)
        d = np.array([proc.delta(int(i), p) for i in j], dtype=float)
        prof = cls(p, j, d, np.zeros(L + 1))
        beyond = proc.theta(L + 1, p)
        if beyond:
            r = getattr(proc, "ell_p", None)
            if r:
                prof.tail = GeometricTail(d[0], r)
        return prof

    def delta_at(self, j):
        j = np.asarray(j, dtype=int)
        out = np.zeros(j.shape, dtype=float)
        inside = (j >= 0) & (j <= self.L)
        out[inside] = self.delta[j[inside] - (self.j[0] if self.j.size else 0)]
        if self.tail is not None:
            outside = j > self.L
            out[outside] = self.tail.delta(j[outside])
        return out

    def measured_theta(self, m: int) -> float:
        if m > self.L:
            return 0.0
        return float(np.sum(self.delta[max(m, 0):]))

    def tail_theta(self, m: int) -> float:
        if self.tail is None:
            return 0.0
        if self.j.size == 0:
            return float(self.tail.theta(m))
        return float(self.tail.theta(max(m, self.L + 1)))

    def theta(self, m: int) -> float:
        return self.measured_theta(m) + self.tail_theta(m)

    @property
    def long_range(self) -> bool:
        return not math.isfinite(self.theta(0))

    def rows(self):
        return [(int(j), float(d), float(s), int(self.n_reps))
                for j, d, s in zip(self.j, self.delta, self.se)]


def _accumulate_chunk(args):
    """Sums of y_r = |X_j - X_{j,{0}}|^p and of y_r y_r^T over replications r0..r1-1."""
    proc, seed, coupling_seed, p, lags_hi, L, r0, r1, crn = args
    start, stop = -L, lags_hi + 1
    reps = np.arange(r0, r1, dtype=np.int64)
    eps = draw_panel(seed, proc.law, start, stop, reps)
    x = proc.run(eps)[:, L:]
    if crn:
        eps[:, L] = draw_at(coupling_seed, proc.law, 0, reps)
    else:
        eps = draw_panel(seed.derive("independent-copy"), proc.law, start, stop, reps)
    xc = proc.run(eps)[:, L:]
    y = np.abs(x - xc) ** p
    return y.sum(axis=0), np.einsum("ri,rj->ij", y, y)


def _accumulate(proc, seed, coupling_seed, p, lags_hi, L, N, chunk, crn=True, mapper=map):
    # fixed chunk boundaries and an ordered reduction keep the result independent of mapper
    tasks = [(proc, seed, coupling_seed, p, lags_hi, L, r0, min(r0 + chunk, N), crn)
             for r0 in range(0, N, chunk)]
    s1 = np.zeros(lags_hi + 1)
    s2 = np.zeros((lags_hi + 1, lags_hi + 1))
    for a, b in mapper(_accumulate_chunk, tasks):
        s1 += a
        s2 += b
    return s1, s2


def estimate_profile(proc: CausalProcess, p: float, jmax: int, N: int = 100_000,
                     L: int | None = None, seed: Seed | None = None, chunk: int = 4096,
                     fit: bool = True, crn: bool = True, mapper=map) -> DependenceProfile:
    """Estimate delta_{j,p}, j = 0..jmax, from one coupled panel per replication.

    The panel covers times -L..jmax; every X_j is computed from the same
    innovations and its coupled copy differs only at time 0.  ``mapper`` runs
    the replication chunks (e.g. ``executor.map``); results do not depend on it.
    """
    if p > proc.law.p_max:
        raise ValueError(f"p={p} exceeds the innovation moment bound {proc.law.p_max}")
    if L is None:
        L = max(proc.min_lag, 0)
    seed = seed or Seed(0)
    s1, s2 = _accumulate(proc, seed, seed.derive("coupling"), p, jmax, L, N, chunk, crn, mapper)
    mu = s1 / N
    cov = (s2 / N - np.outer(mu, mu)) * N / max(N - 1, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = np.where(mu > 0, mu ** (1 / p - 1) / p, 0.0)
    var = np.clip(np.diag(cov), 0, None) * grad**2 / N
    delta = mu ** (1 / p)
    prof = DependenceProfile(p, np.arange(jmax + 1), delta, np.sqrt(var), N)
    prof.theta0_se = float(math.sqrt(max(grad @ cov @ grad / N, 0.0)))
    if fit:
        prof.tail = fit_tail(prof)
    return prof


def estimate_delta(proc: CausalProcess, j: int, p: float, N: int = 100_000, L: int = 512,
                   seed: Seed | None = None) -> tuple[float, float]:
    """(delta_hat_{j,p}, SE) by the plug-in p-th power mean and the delta method."""
    if j > L:
        raise LagBudgetError(f"requested lag {j} exceeds the lag budget L={L}; "
                             "dependence beyond L is not measured")
    if j < 0:
        return 0.0, 0.0
    prof = estimate_profile(proc, p, j, N, L - j if L > j else 0, seed, fit=False)
    return float(prof.delta[j]), float(prof.se[j])


def _aicc(rss, n, k):
    if n - k - 1 <= 0 or rss <= 0:
        return math.inf if rss > 0 else -math.inf
    return n * math.log(rss / n) + 2 * k + 2 * k * (k + 1) / (n - k - 1)


def fit_tail(profile: DependenceProfile, min_points: int = 4) -> TailModel | None:
    """Fit geometric and power-log laws to the significant delta_hat and keep the AICc winner.

    Returns ``None`` when fewer than ``min_points`` lags are clearly nonzero;
    a profile whose tail is below its noise floor then gets no extrapolation.
    """
    j, d, se = profile.j, profile.delta, profile.se
    keep = (j >= 1) & (d > 0) & (d > 3 * se)
    if keep.sum() < min_points:
        return None
    jj, y = j[keep].astype(float), np.log(d[keep])
    n = y.size
    fits = []
    X = np.column_stack([np.ones(n), jj])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rss = float(np.sum((y - X @ coef) ** 2))
    if coef[1] < 0:
        fits.append((_aicc(rss, n, 2), GeometricTail(math.exp(coef[0]), math.exp(coef[1]))))
    if (jj >= 2).sum() >= min_points:
        sel = jj >= 2
        lj = np.log(jj[sel])
        X = np.column_stack([np.ones(sel.sum()), -lj, -np.log(lj)])
        c3, *_ = np.linalg.lstsq(X, y[sel], rcond=None)
        r3 = float(np.sum((y[sel] - X @ c3) ** 2))
        if c3[1] > 0:
            fits.append((_aicc(r3, int(sel.sum()), 3), PowerLogTail(math.exp(c3[0]), c3[1], c3[2])))
    if not fits:
        return None
    return min(fits, key=lambda t: t[0])[1]


def theta_tail(profile: DependenceProfile, m: int) -> float:
    """Theta_{m,p}: measured deltas from m to L plus the tail model beyond L."""
    return profile.theta(m)


def xi_alpha_p(profile: DependenceProfile, alpha: float) -> float:
    """sum_j j^{1/2-1/alpha} delta_j^{p/alpha}; ``inf`` when the fitted tail diverges."""
    p = profile.p
    if alpha <= p:
        raise ValueError(f"alpha={alpha} must exceed p={p}")
    e = p / alpha
    j = profile.j.astype(float)
    head = float(np.sum(j ** (0.5 - 1 / alpha) * profile.delta**e)) if j.size else 0.0
    if profile.tail is None:
        return head
    return head + profile.tail.xi_tail(profile.L + 1, alpha, p)


def tau_p(p: float) -> float:
    """(p^2 - 4 + (p - 2) sqrt(p^2 + 20p + 4)) / (8p); zero at the boundary p = 2."""
    if not p >= 2:
        raise ValueError(f"tau_p needs p >= 2, got {p}")
    return (p * p - 4 + (p - 2) * math.sqrt(p * p + 20 * p + 4)) / (8 * p)


def tau_residual(p: float, tau: float | None = None) -> float:
    """LHS - RHS of the relation tau_p solves: (tau-(1/2-1/p))/(tau/p-1/4+1/(2p)) = 2(1+p+p tau)/3."""
    if tau is None:
        tau = tau_p(p)
    lhs = (tau - (0.5 - 1 / p)) / (tau / p - 0.25 + 1 / (2 * p))
    return lhs - 2 * (1 + p + p * tau) / 3


def _log(x, base):
    return math.log(x) if base is None else math.log(x, base)


def mk_schedule(case: str, p: float, alpha: float, k: int, log_base: float | None = None) -> int:
    """The explicit m_k for each schedule case, floored and clamped to >= 1.

    ``log_base=None`` is the natural logarithm.
    """
    if k < 2:
        raise ValueError("schedules are defined for k >= 2")
    if alpha <= p:
        raise ValueError(f"need alpha > p, got alpha={alpha}, p={p}")
    if case == "i":
        if not p > 4:
            raise ValueError(f"case i needs p > 4, got p={p}")
        a2 = alpha / 2 - 1
        lg = k * (alpha / p - 1) / a2 * math.log(3) - math.log(k) / a2 \
            - math.log(_log(k, log_base)) / (p / 2 - 1)
        v = math.exp(lg)
    elif case == "ii":
        if p != 4:
            raise ValueError(f"case ii needs p = 4, got p={p}")
        if alpha != 6:
            raise ValueError(f"case ii uses alpha = 6, got alpha={alpha}")
        v = 3 ** (k / 4) / k
    elif case == "iii":
        if not 2 < p < 4:
            raise ValueError(f"case iii needs 2 < p < 4, got p={p}")
        lo, hi = (2 + p) / (3 - p / 2), (2 + 4 * p) / 3
        if not lo < alpha < hi:
            raise ValueError(f"case iii needs {lo:.6g} < alpha < {hi:.6g}, got alpha={alpha}")
        v = 3 ** (k * (0.5 - 1 / p)) * _log(k, log_base)
    else:
        raise ValueError(f"unknown schedule case {case!r}")
    if not math.isfinite(v):
        raise OverflowError(f"m_k overflows at k={k}")
    return max(1, math.floor(v))


@dataclass(frozen=True)
class Schedule:
    """Generator k -> m_k.  ``case`` is i, ii, iii or ``constant`` (m_k = ``value``)."""

    case: str
    p: float = 4.0
    alpha: float = 6.0
    value: int = 1
    log_base: float | None = None

    def __post_init__(self):
        if self.case == "constant":
            if self.value < 1:
                raise ValueError("constant schedule needs m >= 1")
        else:
            mk_schedule(self.case, self.p, self.alpha, 2, self.log_base)

    def __call__(self, k: int) -> int:
        if self.case == "constant":
            return int(self.value)
        return 1 if k < 2 else mk_schedule(self.case, self.p, self.alpha, k, self.log_base)

    @property
    def ident(self) -> str:
        if self.case == "constant":
            return f"constant(m={self.value})"
        base = "e" if self.log_base is None else f"{self.log_base:g}"
        return f"case-{self.case}(p={self.p:g}, alpha={self.alpha:g}, log={base})"


# ------------------------------------------------------------- diagnostics


@dataclass
class SeriesVerdict:
    converges: bool
    partial_sum: float
    horizon: int
    method: str
    statistic: float
    tail_bound: float

    def describe(self) -> str:
        tb = "inf" if not math.isfinite(self.tail_bound) else f"{self.tail_bound:.4g}"
        return (f"partial sum to k={self.horizon}: {self.partial_sum:.6g}; {self.method} "
                f"statistic {self.statistic:.4g}; tail bound {tb}")


def series_diagnostic(a, ks=None, window: int | None = None) -> SeriesVerdict:
    """Evidence of convergence for a positive series from its first terms.

    Ratio test on the tail window; when the ratio tends to one, Raabe's test
    and then Bertrand's refinement decide.  ``tail_bound`` is the geometric
    remainder bound when the ratio test applies.
    """
    a = np.asarray(a, dtype=float)
    ks = np.arange(1, a.size + 1) if ks is None else np.asarray(ks)
    K = int(ks[-1])
    total = float(np.sum(a))
    if not math.isfinite(total):
        return SeriesVerdict(False, total, K, "infinite term", math.inf, math.inf)
    nz = np.flatnonzero(a > 0)
    if nz.size == 0:
        return SeriesVerdict(True, 0.0, K, "all terms zero", 0.0, 0.0)
    if nz[-1] < a.size - 1 and np.all(a[nz[-1] + 1:] == 0):
        # series terminated
        tail = a[nz[-1] + 1:]
        if tail.size >= 3:
            return SeriesVerdict(True, total, K, "terms vanish", 0.0, 0.0)
    w = window or max(4, a.size // 4)
    t = a[-w:]
    kt = ks[-w:].astype(float)
    if np.any(t <= 0):
        return SeriesVerdict(False, total, K, "sign change in tail", math.nan, math.inf)
    ratios = t[1:] / t[:-1]
    rmax = float(np.max(ratios))
    if rmax < 0.98:
        return SeriesVerdict(True, total, K, "ratio", rmax, float(t[-1] * rmax / (1 - rmax)))
    rmed = float(np.median(ratios[-max(3, ratios.size // 2):]))
    if rmed > 1.02:
        return SeriesVerdict(False, total, K, "ratio", rmed, math.inf)
    raabe = kt[:-1] * (t[:-1] / t[1:] - 1)
    r = float(np.median(raabe[-max(3, raabe.size // 2):]))
    if r > 1.05:
        return SeriesVerdict(True, total, K, "Raabe", r, math.nan)
    if r < 0.95:
        return SeriesVerdict(False, total, K, "Raabe", r, math.inf)
    bert = (raabe - 1) * np.log(kt[:-1])
    b = float(np.median(bert[-max(3, bert.size // 2):]))
    return SeriesVerdict(b > 1, total, K, "Bertrand", b, math.nan if b > 1 else math.inf)


@dataclass
class LittleOVerdict:
    passed: bool
    k0: int | None
    q_k0: float
    q_last: float
    trace: list

    def describe(self) -> str:
        if self.k0 is None:
            return "quotient never settles into a strictly decreasing run"
        return (f"quotient strictly decreasing from k0={self.k0} "
                f"(q={self.q_k0:.4g}) to q={self.q_last:.4g}")


def little_o_diagnostic(q, ks, min_run: int = 3, factor: float = 0.5) -> LittleOVerdict:
    """Evidence that q_k -> 0: strictly decreasing from some k0 and ending below factor * q_{k0}."""
    q = np.asarray(q, dtype=float)
    ks = [int(k) for k in ks]
    trace = list(zip(ks, q.tolist()))
    if np.all(q == 0):
        return LittleOVerdict(True, ks[0], 0.0, 0.0, trace)
    i0 = q.size - 1
    while i0 > 0 and q[i0 - 1] > q[i0]:
        i0 -= 1
    if q.size - i0 < min_run:
        return LittleOVerdict(False, None, math.nan, float(q[-1]), trace)
    ok = bool(q[-1] < factor * q[i0])
    return LittleOVerdict(ok, ks[i0], float(q[i0]), float(q[-1]), trace)


def min_over_l(theta: Callable[[int], float], slope: float, hi: int) -> tuple[float, int]:
    """min_{0<=l<=hi} theta(l) + l * slope for nonincreasing theta.

    Ternary search on the integer range, then an exhaustive scan of the
    endpoints and a neighbourhood of the located minimum.
    """
    f = lambda l: theta(l) + l * slope
    lo, hi0 = 0, int(hi)
    a, b = lo, hi0
    while b - a > 8:
        m1 = a + (b - a) // 3
        m2 = b - (b - a) // 3
        if f(m1) <= f(m2):
            b = m2
        else:
            a = m1
    cand = set(range(a, b + 1)) | {lo, min(lo + 1, hi0), hi0}
    best = min(cand, key=lambda l: (f(l), l))
    return float(f(best)), int(best)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    horizon: int
    detail: str
    summands: list = field(default_factory=list)


@dataclass
class ConditionReport:
    p: float
    alpha: float
    xi: float
    schedule: str
    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_text(self) -> str:
        lines = [f"p = {self.p:g}, alpha = {self.alpha:g}, schedule {self.schedule}",
                 f"Xi_alpha_p = {self.xi:.6g}"]
        for c in self.checks.values():
            lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        lines.append("little-o and series verdicts are finite-horizon evidence, not proofs")
        return "\n".join(lines) + "\n"

    def summand_rows(self):
        for c in self.checks.values():
            for k, v in c.summands:
                yield (c.name, int(k), float(v))


def check_theorem_conditions(profile: DependenceProfile, alpha: float, schedule: Schedule | Callable,
                             p: float | None = None, K: int = 120) -> ConditionReport:
    """Evaluate the four sufficient conditions on k = 1..K.

    ``xi_finite``: Xi_{alpha,p} < inf.  ``mk_series``: sum 3^{k(1-alpha/p)}
    m_k^{alpha/2-1} converges.  ``theta_series``: sum 3^{k(p/2-1)}
    Theta_{m_k}^p converges.  ``variance_rate``: [Theta_{m_k} + min_l(Theta_l
    + l 3^{k(2/p-1)})] sqrt(log k) / 3^{k(1/p-1/2)} tends to zero.
    """
    p = profile.p if p is None else p
    if alpha <= p:
        raise ValueError(f"alpha={alpha} must exceed p={p}")
    ks = np.arange(1, K + 1)
    m = [int(schedule(int(k))) for k in ks]
    checks = {}

    xi = xi_alpha_p(profile, alpha)
    checks["xi_finite"] = CheckResult(
        "xi_finite", math.isfinite(xi), xi, profile.L,
        f"Xi = {xi:.6g} (measured to L={profile.L}, tail "
        f"{profile.tail.kind if profile.tail else 'none'})")

    log3 = math.log(3)
    a = np.array([math.exp(k * (1 - alpha / p) * log3 + (alpha / 2 - 1) * math.log(mk))
                  for k, mk in zip(ks, m)])
    v = series_diagnostic(a, ks)
    checks["mk_series"] = CheckResult("mk_series", v.converges, v.partial_sum, K, v.describe(),
                                      list(zip(ks.tolist(), a.tolist())))

    th = np.array([profile.theta(mk) for mk in m])
    with np.errstate(divide="ignore", over="ignore"):
        b = np.exp(ks * (p / 2 - 1) * log3 + p * np.log(th))
    v = series_diagnostic(b, ks)
    checks["theta_series"] = CheckResult("theta_series", v.converges, v.partial_sum, K,
                                         v.describe(), list(zip(ks.tolist(), b.tolist())))

    qk, qs = [], []
    for k, mk in zip(ks[1:], m[1:]):
        slope = 3.0 ** (k * (2 / p - 1))
        # f(l) >= l * slope > f(0) once l > Theta_0 / slope
        th0 = profile.theta(0)
        hi = 3**int(k) if not math.isfinite(th0) else min(3**int(k), math.ceil(th0 / slope) + 1)
        mn, _ = min_over_l(profile.theta, slope, hi)
        num = profile.theta(mk) + mn
        den = 3.0 ** (k * (1 / p - 0.5)) / math.sqrt(math.log(k))
        qk.append(int(k))
        qs.append(num / den)
    lv = little_o_diagnostic(qs, qk)
    checks["variance_rate"] = CheckResult("variance_rate", lv.passed, lv.q_last, K,
                                          lv.describe(), list(zip(qk, qs)))
    ident = schedule.ident if isinstance(schedule, Schedule) else repr(schedule)
    return ConditionReport(p, alpha, xi, ident, checks)


def projection_norm_linear(proc: CausalProcess, i: int) -> float | None:
    """||E(X_i|F_0) - E(X_i|F_{-1})||_2 = |a_i| sd(eps) for linear processes."""
    w = proc.gaussian_weights(i) if proc.law.kind == "standard_normal" else None
    if w is None:
        coefs = getattr(proc, "coefficients", None)
        if coefs is None:
            return None
        a_i = coefs[i] if 0 <= i < len(coefs) else 0.0
        return abs(a_i) * math.sqrt(proc.law.var)
    return abs(float(w[0][i])) * math.sqrt(proc.law.var)
