"""Log-log rate fits for coupling errors and the truncated-moment series check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..depmeasure import SeriesVerdict, series_diagnostic
from ..innovations import InnovationLaw

__all__ = ["RateFit", "fit_rate", "TruncMomentReport", "lemma_truncmoment_check"]


@dataclass
class RateFit:
    """Least-squares fit of log median error on log n."""

    slope: float
    intercept: float
    r2: float
    n: np.ndarray
    median: np.ndarray
    q25: np.ndarray | None = None
    q75: np.ndarray | None = None
    notes: list = field(default_factory=list)

    def rows(self):
        q25 = self.q25 if self.q25 is not None else self.median
        q75 = self.q75 if self.q75 is not None else self.median
        for n, med, a, b in zip(self.n, self.median, q25, q75):
            yield (int(n), float(med), float(a), float(b), float(self.slope))


def fit_rate(n, errors, q25=None, q75=None) -> RateFit:
    """OLS of log(errors) on log(n); needs at least 4 points.

    Nonpositive medians mean an exact coupling at that horizon; the slope is
    then reported as ``-inf`` with a note instead of a fit.
    """
    n = np.asarray(n, dtype=float)
    e = np.asarray(errors, dtype=float)
    if n.size < 4 or n.size != e.size:
        raise ValueError("fit_rate needs at least 4 (n, error) pairs")
    if np.any(e <= 0):
        return RateFit(-math.inf, math.nan, math.nan, n, e, q25, q75,
                       ["nonpositive median error: exact coupling at some horizon"])
    x, y = np.log(n), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / tss if tss > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, n, e, q25, q75)


@dataclass
class TruncMomentReport:
    p: float
    alpha: float
    tail_terms: np.ndarray
    moment_terms: np.ndarray
    tail_verdict: SeriesVerdict
    moment_verdict: SeriesVerdict
    moment_p: float

    @property
    def converges(self) -> bool:
        return self.tail_verdict.converges and self.moment_verdict.converges

    def ratios(self) -> tuple[float, float]:
        """Partial sums divided by E|X|^p (nan when the moment is infinite)."""
        if not math.isfinite(self.moment_p) or self.moment_p == 0:
            return math.nan, math.nan
        return (self.tail_verdict.partial_sum / self.moment_p,
                self.moment_verdict.partial_sum / self.moment_p)

    def to_text(self) -> str:
        r1, r2 = self.ratios()
        return (f"p = {self.p:g}, alpha = {self.alpha:g}, E|X|^p = {self.moment_p:.6g}\n"
                f"tail series: {'converges' if self.tail_verdict.converges else 'diverges'}; "
                f"{self.tail_verdict.describe()}; ratio to E|X|^p {r1:.4g}\n"
                f"truncated-moment series: "
                f"{'converges' if self.moment_verdict.converges else 'diverges'}; "
                f"{self.moment_verdict.describe()}; ratio to E|X|^p {r2:.4g}\n")


def lemma_truncmoment_check(law: InnovationLaw, p: float, alpha: float, I: int = 40) -> TruncMomentReport:
    """Partial sums of sum_i 3^i P(|X| >= 3^{i/p}) and sum_i 3^i E min(|X/c_i|^alpha, |X/c_i|^2).

    ``c_i = 3^{i/p}``, i = 0..I, each with the series convergence diagnostic.
    """
    if not (alpha > p > 2):
        raise ValueError("need alpha > p > 2")
    i = np.arange(I + 1)
    c = 3.0 ** (i / p)
    tail = np.array([3.0**k * law.abs_tail(ck) for k, ck in zip(i, c)])
    mom = np.empty(I + 1)
    for k, ck in zip(i, c):
        f = lambda x, ck=ck: min((x / ck) ** alpha, (x / ck) ** 2)
        mom[k] = 3.0**k * law.expect_abs(f, breakpoints=tuple(sorted({1.0, 10.0, float(ck)})))
    ks = i + 1
    return TruncMomentReport(p, alpha, tail, mom, series_diagnostic(tail, ks),
                             series_diagnostic(mom, ks), law.abs_moment(p))
