"""Counter-based i.i.d. innovation streams.

Every innovation is a pure function of ``(master, stream_id, replication_id,
time)``: the four words are fed through Philox4x32-10 (Salmon et al., 2011),
so a value at absolute time ``t`` never depends on which other values were
drawn, in which order, or by how many workers.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special, stats

__all__ = [
    "Seed",
    "InnovationLaw",
    "InnovationWindow",
    "philox4x32",
    "uniforms",
    "draw_window",
    "draw_panel",
    "draw_at",
    "couple_at",
]

_MASK32 = np.uint64(0xFFFFFFFF)
_MASK64 = (1 << 64) - 1
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85
_TIME_OFFSET = 1 << 63


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class Seed:
    """Address of one innovation stream.

    Distinct triples give independent streams; the same triple always gives
    the same numbers.
    """

    master: int
    stream_id: int = 0
    replication_id: int = 0

    def __post_init__(self):
        for name in ("master", "stream_id", "replication_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def with_replication(self, replication_id: int) -> "Seed":
        return Seed(self.master, self.stream_id, replication_id)

    def derive(self, tag: str | int) -> "Seed":
        """Child stream keyed by ``tag``; deterministic and collision-resistant."""
        if isinstance(tag, str):
            tag = zlib.crc32(tag.encode()) | (len(tag) << 32)
        sid = _splitmix64(self.stream_id ^ _splitmix64(int(tag) & _MASK64))
        return Seed(self.master, sid, self.replication_id)

    @property
    def key(self) -> tuple[int, int]:
        k = _splitmix64(self.master ^ _splitmix64(self.stream_id))
        return k & 0xFFFFFFFF, k >> 32


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Vectorised Philox4x32 block function.

    ``counter`` has shape ``(..., 4)`` of 32-bit words and ``key`` is a pair
    of 32-bit words (or arrays broadcastable against ``counter[..., 0]``).
    Returns the four output words with the same leading shape.
    """
    c = np.asarray(counter, dtype=np.uint64)
    c0, c1, c2, c3 = (c[..., i] & _MASK32 for i in range(4))
    k0 = np.asarray(key[0], dtype=np.uint64) & _MASK32
    k1 = np.asarray(key[1], dtype=np.uint64) & _MASK32
    for r in range(rounds):
        if r:
            k0 = (k0 + np.uint64(_PHILOX_W0)) & _MASK32
            k1 = (k1 + np.uint64(_PHILOX_W1)) & _MASK32
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> np.uint64(32)) ^ c1 ^ k0,
            p1 & _MASK32,
            (p0 >> np.uint64(32)) ^ c3 ^ k1,
            p0 & _MASK32,
        )
    return np.stack([c0, c1, c2, c3], axis=-1)


def uniforms(seed: Seed, replications, times) -> np.ndarray:
    """Open-interval uniforms with 53-bit resolution at each (replication, time).

    ``replications`` and ``times`` broadcast against each other.
    """
    reps = np.asarray(replications, dtype=np.int64)
    t = np.asarray(times, dtype=np.int64)
    reps, t = np.broadcast_arrays(reps, t)
    tu = t.astype(np.uint64) ^ np.uint64(_TIME_OFFSET)
    ru = reps.astype(np.uint64)
    ctr = np.stack(
        [tu & _MASK32, tu >> np.uint64(32), ru & _MASK32, ru >> np.uint64(32)], axis=-1
    )
    w = philox4x32(ctr, seed.key)
    k = ((w[..., 0] >> np.uint64(5)) << np.uint64(26)) | (w[..., 1] >> np.uint64(6))
    return (k.astype(np.float64) + 0.5) * 2.0**-53


_KINDS = ("standard_normal", "rademacher", "uniform01", "bernoulli_half",
          "student_t", "centered_pareto")


@dataclass(frozen=True)
class InnovationLaw:
    """Law of the i.i.d. innovations.

    ``param`` is the degrees of freedom for ``student_t`` and the tail index
    for ``centered_pareto`` (Pareto(1, a) shifted to mean zero).
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown innovation law {self.kind!r}; choose from {_KINDS}")
        if self.kind == "student_t" and (self.param is None or self.param <= 2):
            raise ValueError("student_t needs df > 2")
        if self.kind == "centered_pareto" and (self.param is None or self.param <= 1):
            raise ValueError("centered_pareto needs tail_index > 1")

    @classmethod
    def parse(cls, text: str) -> "InnovationLaw":
        """``"student_t(5)"`` -> InnovationLaw("student_t", 5.0)."""
        text = text.strip()
        if "(" in text:
            name, arg = text.rstrip(")").split("(", 1)
            return cls(name.strip(), float(arg))
        return cls(text)

    def __str__(self):
        return self.kind if self.param is None else f"{self.kind}({self.param:g})"

    @property
    def p_max(self) -> float:
        if self.kind in ("student_t", "centered_pareto"):
            return float(self.param)
        return math.inf

    @property
    def centered(self) -> bool:
        return self.kind not in ("uniform01", "bernoulli_half")

    @property
    def symmetric(self) -> bool:
        return self.kind in ("standard_normal", "rademacher", "student_t")

    @property
    def discrete(self) -> bool:
        return self.kind in ("rademacher", "bernoulli_half")

    @cached_property
    def _dist(self):
        if self.kind == "standard_normal":
            return stats.norm()
        if self.kind == "student_t":
            return stats.t(self.param)
        if self.kind == "uniform01":
            return stats.uniform()
        if self.kind == "centered_pareto":
            a = self.param
            return stats.pareto(a, loc=-a / (a - 1.0))
        return None

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "standard_normal":
            return special.ndtri(u)
        if self.kind == "rademacher":
            return np.where(u < 0.5, -1.0, 1.0)
        if self.kind == "bernoulli_half":
            return np.where(u < 0.5, 0.0, 1.0)
        if self.kind == "uniform01":
            return u.copy()
        if self.kind == "student_t":
            return special.stdtrit(self.param, u)
        a = self.param
        return np.exp(-np.log1p(-u) / a) - a / (a - 1.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "rademacher":
            return np.where(x < -1, 0.0, np.where(x < 1, 0.5, 1.0))
        if self.kind == "bernoulli_half":
            return np.where(x < 0, 0.0, np.where(x < 1, 0.5, 1.0))
        return self._dist.cdf(x)

    @property
    def mean(self) -> float:
        return 0.5 if self.kind in ("uniform01", "bernoulli_half") else 0.0

    @property
    def var(self) -> float:
        if self.kind in ("standard_normal", "rademacher"):
            return 1.0
        if self.kind == "uniform01":
            return 1.0 / 12.0
        if self.kind == "bernoulli_half":
            return 0.25
        if self.kind == "student_t":
            return self.param / (self.param - 2.0)
        a = self.param
        return math.inf if a <= 2 else a / ((a - 1.0) ** 2 * (a - 2.0))

    def abs_tail(self, x: float) -> float:
        """P(|X| >= x)."""
        if x <= 0:
            return 1.0
        if self.kind == "rademacher":
            return 1.0 if x <= 1 else 0.0
        if self.kind == "bernoulli_half":
            return 0.5 if x <= 1 else 0.0
        if self.kind == "uniform01":
            return max(0.0, 1.0 - x)
        d = self._dist
        return float(d.sf(x) + d.cdf(-x))

    def expect_abs(self, fn, breakpoints=()) -> float:
        """E fn(|X|) for a scalar function ``fn`` of the absolute value."""
        if self.kind == "rademacher":
            return float(fn(1.0))
        if self.kind == "bernoulli_half":
            return 0.5 * float(fn(0.0)) + 0.5 * float(fn(1.0))
        if self.kind == "uniform01":
            return integrate.quad(fn, 0, 1, limit=200)[0]
        d = self._dist
        if self.symmetric:
            pts = sorted(b for b in breakpoints if b > 0)
            edges = [0.0, *pts, math.inf]
            return sum(2.0 * integrate.quad(lambda x: fn(x) * d.pdf(x), lo, hi, limit=200)[0]
                       for lo, hi in zip(edges[:-1], edges[1:]))
        lo_support = float(d.support()[0])
        pts = sorted({b for b in breakpoints if b > 0} | {-b for b in breakpoints if b > 0}
                     | {0.0})
        pts = [b for b in pts if b > lo_support]
        edges = [lo_support, *pts, math.inf]
        return sum(integrate.quad(lambda x: fn(abs(x)) * d.pdf(x), lo, hi, limit=200)[0]
                   for lo, hi in zip(edges[:-1], edges[1:]))

    def abs_moment(self, p: float) -> float:
        """E|X|^p, ``inf`` when p reaches the tail index."""
        if p >= self.p_max:
            return math.inf
        if self.kind == "standard_normal":
            return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "bernoulli_half":
            return 0.5
        if self.kind == "uniform01":
            return 1.0 / (p + 1.0)
        if self.kind == "student_t":
            nu = self.param
            return (nu ** (p / 2) * math.gamma((p + 1) / 2) * math.gamma((nu - p) / 2)
                    / (math.sqrt(math.pi) * math.gamma(nu / 2)))
        return self.expect_abs(lambda x: x**p, breakpoints=(1.0,))

    def pnorm(self, p: float) -> float:
        return self.abs_moment(p) ** (1.0 / p)

    def coupling_norm(self, p: float) -> float:
        """||eps - eps'||_p for an independent copy eps'."""
        if p >= self.p_max:
            return math.inf
        if self.kind == "standard_normal":
            return math.sqrt(2.0) * self.pnorm(p)
        if self.kind == "rademacher":
            return 2.0 * 0.5 ** (1.0 / p)
        if self.kind == "bernoulli_half":
            return 0.5 ** (1.0 / p)
        if self.kind == "uniform01":
            return (2.0 / ((p + 1.0) * (p + 2.0))) ** (1.0 / p)
        if p == 2:
            return math.sqrt(2.0 * self.var)
        # Quantile-grid approximation of the double integral.
        u = (np.arange(4000) + 0.5) / 4000
        x = self.ppf(u)
        acc = 0.0
        for chunk in np.array_split(x, 8):
            acc += np.sum(np.abs(chunk[:, None] - x[None, :]) ** p)
        return float(acc / x.size**2) ** (1.0 / p)


@dataclass(frozen=True)
class InnovationWindow:
    """Innovations at absolute times ``origin - L .. origin``."""

    seed: Seed
    law: InnovationLaw
    origin: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.size - 1

    @property
    def start(self) -> int:
        return self.origin - self.L

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.start, self.origin + 1)

    def __getitem__(self, t: int) -> float:
        if not self.start <= t <= self.origin:
            raise IndexError(f"time {t} outside window [{self.start}, {self.origin}]")
        return float(self.values[t - self.start])

    def __len__(self):
        return self.values.size


def draw_at(seed: Seed, law: InnovationLaw, times, replications=None) -> np.ndarray:
    """Innovations at arbitrary (replication, time) addresses."""
    if replications is None:
        replications = seed.replication_id
    return law.ppf(uniforms(seed, replications, times))


def draw_window(seed: Seed, law: InnovationLaw, origin: int, L: int) -> InnovationWindow:
    if L < 0:
        raise ValueError("lag budget L must be nonnegative")
    times = np.arange(origin - L, origin + 1)
    return InnovationWindow(seed, law, origin, draw_at(seed, law, times))


def draw_panel(seed: Seed, law: InnovationLaw, start: int, stop: int,
               replications: int | np.ndarray = 1) -> np.ndarray:
    """Innovations for times ``start .. stop - 1``, one row per replication.

    An integer ``replications`` means ids ``seed.replication_id + 0..r-1``;
    an array gives absolute replication ids.
    """
    if np.ndim(replications) == 0:
        reps = seed.replication_id + np.arange(int(replications), dtype=np.int64)
    else:
        reps = np.asarray(replications, dtype=np.int64)
    times = np.arange(start, stop, dtype=np.int64)
    return draw_at(seed, law, times[None, :], reps[:, None])


def couple_at(window: InnovationWindow, j: int, seed: Seed) -> InnovationWindow:
    """Replace the innovation at absolute time ``j`` with an independent draw."""
    if not window.start <= j <= window.origin:
        raise IndexError(f"coupling index {j} outside window [{window.start}, {window.origin}]")
    vals = window.values.copy()
    vals[j - window.start] = float(draw_at(seed, window.law, j))
    return InnovationWindow(window.seed, window.law, window.origin, vals)
