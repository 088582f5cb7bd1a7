"""Causal processes X_i = G(..., eps_{i-1}, eps_i) driven by counter-based innovations.

Every process exposes one primitive, :meth:`CausalProcess.run`, mapping an
innovation panel (times along the last axis) to the process values at the same
times, with innovations before the panel treated as absent (zero for
moving-average type maps, the starting value ``x0`` for recursions).  Paths,
coupled windows and lag-truncated values are all built from it.
"""

from __future__ import annotations

import configparser
import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, signal

from .innovations import InnovationLaw, Seed, draw_at, draw_panel

__all__ = [
    "CausalProcess",
    "LinearSpec",
    "IRFSpec",
    "AR1Spec",
    "VolterraSpec",
    "DoublingMapSpec",
    "LagBudgetError",
    "evaluate_path",
    "evaluate_coupled",
    "volterra_Qnk",
    "volterra_delta_bound",
    "doubling_delta_formula",
    "doubling_delta_printed",
    "haar_delta_bound",
    "haar_function",
    "contraction_ratio",
    "make_process",
    "load_process",
    "ZOO",
]


class LagBudgetError(ValueError):
    """Lag budget below the process minimum."""


@dataclass(frozen=True)
class CausalProcess:
    """Base class.  Subclasses implement :meth:`run` and declare ``min_lag``."""

    law: InnovationLaw
    name: str = "process"

    @property
    def min_lag(self) -> int:
        return 0

    def tail_bound(self, L: int) -> float:
        """Upper bound on ||X_i - X_i^{(L)}||_2 where X_i^{(L)} sees lags <= L only."""
        return 0.0

    def run(self, eps: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value_at_origin(self, windows: np.ndarray) -> np.ndarray:
        """X at the last time of each innovation window (rows along the last axis)."""
        return self.run(windows)[..., -1]

    # optional oracles; ``None`` means unknown
    def delta(self, j: int, p: float) -> float | None:
        return None

    def gamma(self, h: int) -> float | None:
        return None

    @property
    def sigma2(self) -> float | None:
        return None

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def memory(self) -> int | None:
        """Largest lag X_i actually depends on; ``None`` for infinite memory."""
        return None

    @property
    def symmetric(self) -> bool:
        """Whether X_i has a law symmetric about zero (then E T_a(X) = 0)."""
        return False

    def gaussian_weights(self, n: int):
        """Moving-average weights ``a_0..a_n`` and the variance carried by lags > n.

        Only linear processes with normal innovations return a value; the
        pipeline then uses closed-form conditional means.
        """
        return None

    def theta(self, m: int, p: float) -> float | None:
        """Analytic tail sum of the dependence measure, when available."""
        return None


def _check_lag(proc: CausalProcess, L: int):
    if L < proc.min_lag:
        raise LagBudgetError(
            f"lag budget L={L} below the minimum {proc.min_lag} for {proc.name}; "
            f"tail bound at L is {proc.tail_bound(L):.3g}"
        )


def evaluate_path(proc: CausalProcess, seed: Seed, n: int, L: int,
                  replications: int | np.ndarray | None = None) -> np.ndarray:
    """X_1..X_n from one shared innovation panel covering times 1-L..n.

    With ``replications`` the result has one row per replication id.
    """
    if n < 1:
        raise ValueError("n must be positive")
    _check_lag(proc, L)
    reps = 1 if replications is None else replications
    eps = draw_panel(seed, proc.law, 1 - L, n + 1, reps)
    x = proc.run(eps)[:, L:]
    return x[0] if replications is None else x


def evaluate_coupled(proc: CausalProcess, seed: Seed, coupling_seed: Seed, j: int, L: int,
                     replications) -> tuple[np.ndarray, np.ndarray]:
    """(X_j, X_{j,{0}}) per replication: the pair shares every innovation except eps_0."""
    if j > L:
        raise LagBudgetError(f"lag {j} exceeds the lag budget L={L}")
    reps = np.asarray(replications, dtype=np.int64)
    eps = draw_panel(seed, proc.law, j - L, j + 1, reps)
    x = proc.value_at_origin(eps)
    if j < 0:
        return x, x.copy()
    eps[:, L - j] = draw_at(coupling_seed, proc.law, 0, reps)
    return x, proc.value_at_origin(eps)


# ---------------------------------------------------------------- linear


@dataclass(frozen=True)
class LinearSpec(CausalProcess):
    """Finite-order linear process X_i = sum_{j<=J} a_j eps_{i-j}."""

    coefficients: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        if not self.coefficients:
            raise ValueError("at least one coefficient required")

    @property
    def J(self) -> int:
        return len(self.coefficients) - 1

    @property
    def min_lag(self) -> int:
        return self.J

    @property
    def memory(self):
        return self.J

    @property
    def symmetric(self):
        return self.law.symmetric

    def tail_bound(self, L):
        a = np.asarray(self.coefficients[L + 1:])
        return float(math.sqrt(self.law.var * np.sum(a**2))) if a.size else 0.0

    def run(self, eps):
        return signal.lfilter(self.coefficients, [1.0], eps, axis=-1)

    @property
    def mean(self):
        return self.law.mean * sum(self.coefficients)

    def delta(self, j, p):
        if j < 0 or j > self.J:
            return 0.0
        return abs(self.coefficients[j]) * self.law.coupling_norm(p)

    def theta(self, m, p):
        return sum(self.delta(j, p) for j in range(max(m, 0), self.J + 1))

    def gamma(self, h):
        a = np.asarray(self.coefficients)
        h = abs(h)
        if h > self.J:
            return 0.0
        return float(self.law.var * np.dot(a[: a.size - h], a[h:]))

    @property
    def sigma2(self):
        return self.law.var * sum(self.coefficients) ** 2

    def gaussian_weights(self, n):
        if self.law.kind != "standard_normal":
            return None
        a = np.zeros(n + 1)
        k = min(n, self.J) + 1
        a[:k] = self.coefficients[:k]
        return a, float(np.sum(np.asarray(self.coefficients[k:]) ** 2))


# ------------------------------------------------------ iterated random functions


@dataclass(frozen=True)
class IRFSpec(CausalProcess):
    """Recursion X_i = G(X_{i-1}, eps_i) started at ``x0`` before the panel.

    ``G`` must be vectorised.  ``ell_p`` is the declared L^p contraction
    coefficient, ``ell_order`` the p it refers to.
    """

    G: Callable = None
    ell_p: float | None = None
    ell_order: float = 2.0
    x0: float = 0.0
    burn_in: int | None = None

    def __post_init__(self):
        if self.G is None:
            raise ValueError("IRFSpec needs a map G")
        if self.ell_p is not None and not 0 <= self.ell_p < 1:
            raise ValueError("contraction coefficient must lie in [0, 1)")
        if self.burn_in is None:
            b = 60 if not self.ell_p else math.ceil(60 / abs(math.log(self.ell_p)))
            object.__setattr__(self, "burn_in", int(b))

    @property
    def min_lag(self):
        return self.burn_in

    def _start_scale(self) -> float:
        # ||G(x0, eps) - x0||_2 by quantile quadrature
        u = (np.arange(20000) + 0.5) / 20000
        d = self.G(np.full(u.size, self.x0), self.law.ppf(u)) - self.x0
        return float(np.sqrt(np.mean(d**2)))

    def tail_bound(self, L):
        if not self.ell_p:
            return math.inf if L < self.burn_in else 0.0
        ell = self.ell_p
        return ell ** (L + 1) * self._start_scale() / (1 - ell)

    def run(self, eps):
        eps = np.asarray(eps, dtype=float)
        out = np.empty_like(eps)
        x = np.full(eps.shape[:-1], self.x0, dtype=float)
        for t in range(eps.shape[-1]):
            x = self.G(x, eps[..., t])
            out[..., t] = x
        return out

    def theta(self, m, p):
        if self.ell_p is None or p > self.ell_order:
            return None
        d0 = self.delta(0, p)
        if d0 is None:
            return None
        return d0 * self.ell_p ** m / (1 - self.ell_p)


def _ar1_step(x, e, rho):
    return rho * x + e


@dataclass(frozen=True)
class AR1Spec(IRFSpec):
    """X_i = rho X_{i-1} + eps_i; linear recursion evaluated with a direct filter."""

    rho: float = 0.5

    def __post_init__(self):
        rho = self.rho
        object.__setattr__(self, "G", functools.partial(_ar1_step, rho=rho))
        object.__setattr__(self, "ell_p", abs(rho))
        object.__setattr__(self, "ell_order", math.inf)
        super().__post_init__()

    @property
    def symmetric(self):
        return self.law.symmetric and self.x0 == 0

    def tail_bound(self, L):
        return abs(self.rho) ** (L + 1) * math.sqrt(
            self.law.var / (1 - self.rho**2) + self.x0**2)

    def run(self, eps):
        eps = np.asarray(eps, dtype=float)
        zi = np.full(eps.shape[:-1] + (1,), self.rho * self.x0)
        y, _ = signal.lfilter([1.0], [1.0, -self.rho], eps, axis=-1, zi=zi)
        return y

    def delta(self, j, p):
        return 0.0 if j < 0 else abs(self.rho) ** j * self.law.coupling_norm(p)

    def theta(self, m, p):
        return self.law.coupling_norm(p) * abs(self.rho) ** max(m, 0) / (1 - abs(self.rho))

    def gamma(self, h):
        return self.rho ** abs(h) * self.law.var / (1 - self.rho**2)

    @property
    def sigma2(self):
        return self.law.var / (1 - self.rho) ** 2

    def gaussian_weights(self, n):
        if self.law.kind != "standard_normal":
            return None
        a = self.rho ** np.arange(n + 1)
        return a, self.rho ** (2 * (n + 1)) / (1 - self.rho**2)


def contraction_ratio(spec: IRFSpec, x, x2, p: float, N: int, seed: Seed) -> float:
    """Monte Carlo ||G(x, eps) - G(x', eps)||_p / |x - x'|."""
    eps = draw_at(seed, spec.law, np.arange(N))
    d = spec.G(np.full(N, float(x)), eps) - spec.G(np.full(N, float(x2)), eps)
    if math.isinf(p):
        return float(np.max(np.abs(d)) / abs(x - x2))
    return float(np.mean(np.abs(d) ** p) ** (1 / p) / abs(x - x2))


# ---------------------------------------------------------------- Volterra


@dataclass(frozen=True)
class VolterraSpec(CausalProcess):
    """X_n = sum_k sum_{j_1<...<j_k} g_k(j_1..j_k) eps_{n-j_1} ... eps_{n-j_k}.

    ``kernels`` maps order k to ``{(j_1, ..., j_k): value}`` with finite support.
    """

    kernels: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, table in self.kernels.items():
            k = int(k)
            entries = {}
            for idx, v in table.items():
                idx = tuple(int(i) for i in idx)
                if len(idx) != k:
                    raise ValueError(f"kernel of order {k} has index {idx}")
                if idx[0] < 0 or any(b <= a for a, b in zip(idx, idx[1:])):
                    raise ValueError(f"support must satisfy 0 <= j_1 < ... < j_k, got {idx}")
                if v != 0:
                    entries[idx] = float(v)
            clean[k] = entries
        object.__setattr__(self, "kernels", clean)
        if abs(self.law.mean) > 0:
            raise ValueError("Volterra processes need mean-zero innovations")

    @property
    def K_max(self) -> int:
        return max((k for k, t in self.kernels.items() if t), default=0)

    @property
    def min_lag(self):
        return max((idx[-1] for t in self.kernels.values() for idx in t), default=0)

    @property
    def memory(self):
        return self.min_lag

    @property
    def symmetric(self):
        # odd polynomial in symmetric innovations
        return self.law.symmetric and all(k % 2 == 1 for k, t in self.kernels.items() if t)

    def run(self, eps):
        eps = np.asarray(eps, dtype=float)
        T = eps.shape[-1]
        out = np.zeros_like(eps)
        cache = {}

        def lagged(j):
            if j not in cache:
                z = np.zeros_like(eps)
                if j < T:
                    z[..., j:] = eps[..., : T - j]
                cache[j] = z
            return cache[j]

        for table in self.kernels.values():
            for idx, v in table.items():
                term = v * lagged(idx[0])
                for j in idx[1:]:
                    term = term * lagged(j)
                out += term
        return out

    def _pair_sum(self, h: int) -> float:
        # sum over tuples J of g_k(J) g_k(J + h), weighted by var^k
        tot = 0.0
        var = self.law.var
        for k, table in self.kernels.items():
            for idx, v in table.items():
                w = table.get(tuple(i + h for i in idx))
                if w is not None:
                    tot += v * w * var**k
        return tot

    def gamma(self, h):
        return self._pair_sum(abs(h))

    @property
    def sigma2(self):
        L = self.min_lag
        return self._pair_sum(0) + 2 * sum(self._pair_sum(h) for h in range(1, L + 1))

    def gaussian_weights(self, n):
        if self.K_max > 1 or self.law.kind != "standard_normal":
            return None
        a = np.zeros(max(n, self.min_lag) + 1)
        for idx, v in self.kernels.get(1, {}).items():
            a[idx[0]] = v
        return a[: n + 1], float(np.sum(a[n + 1:] ** 2))


def volterra_Qnk(spec: VolterraSpec, n: int, k: int) -> float:
    """Sum of g_k^2 over support tuples that contain index ``n``."""
    if not 1 <= k:
        raise ValueError("order k must be positive")
    return float(sum(v * v for idx, v in spec.kernels.get(k, {}).items() if n in idx))


def volterra_delta_bound(spec: VolterraSpec, n: int, p: int, c_p: float | None = None) -> float:
    """c_p sum_k ||eps_0||_p^{2k} Q_{n,k}; bounds delta_{n,p}^2 for even p."""
    if p != int(p) or int(p) % 2:
        raise ValueError(f"p must be an even integer, got {p}")
    p = int(p)
    if c_p is None:
        c_p = 2.0**p * math.factorial(p)
    norm = spec.law.pnorm(p)
    return float(c_p * sum(norm ** (2 * k) * volterra_Qnk(spec, n, k)
                           for k in spec.kernels))


# ------------------------------------------------------------- doubling map


def haar_mother(u):
    u = np.asarray(u, dtype=float)
    return np.where((u >= 0) & (u < 0.5), 1.0, np.where((u >= 0.5) & (u < 1), -1.0, 0.0))


def haar_function(coefs: Mapping) -> Callable:
    """g(u) = sum c_{i,j} 2^{i/2} phi(2^i u - (j - 1)), j = 1..2^i."""
    items = [(int(i), int(j), float(c)) for (i, j), c in coefs.items()]
    for i, j, _ in items:
        if not 1 <= j <= 2**i:
            raise ValueError(f"Haar index ({i}, {j}) outside 1 <= j <= 2^i")

    def g(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for i, j, c in items:
            out += c * 2 ** (i / 2) * haar_mother(2**i * u - (j - 1))
        return out

    return g


@dataclass(frozen=True)
class DoublingMapSpec(CausalProcess):
    """X_i = g(U_i) with U_i = sum_{l>=0} eps_{i-l} 2^{-1-l} and Bernoulli(1/2) bits.

    Give either ``g`` with a Lipschitz constant or Haar coefficients
    ``{(i, j): c_ij}``.  Time runs causally: U_{i-1} = 2 U_i mod 1.
    """

    g: Callable | None = None
    lipschitz: float | None = None
    haar: Mapping | None = None
    bit_depth: int = 53

    def __post_init__(self):
        if self.law.kind != "bernoulli_half":
            raise ValueError("the doubling map needs bernoulli_half innovations")
        if self.haar is not None:
            object.__setattr__(self, "haar", {(int(i), int(j)): float(c)
                                              for (i, j), c in self.haar.items()})
            object.__setattr__(self, "g", haar_function(self.haar))
        if self.g is None:
            raise ValueError("give g or Haar coefficients")
        if not 1 <= self.bit_depth <= 53:
            raise ValueError("bit_depth must lie in 1..53")

    @property
    def haar_depth(self) -> int | None:
        if self.haar is None:
            return None
        return max((i for (i, _), c in self.haar.items() if c), default=0)

    @property
    def memory(self):
        d = self.haar_depth
        return None if d is None else d

    @property
    def min_lag(self):
        d = self.haar_depth
        return min(d, self.bit_depth - 1) if d is not None else self.bit_depth - 1

    def tail_bound(self, L):
        if self.haar is not None and L >= self.haar_depth:
            return 0.0
        if self.lipschitz is not None:
            return self.lipschitz * 2.0 ** (-(L + 1))
        return math.inf

    def mean_check(self) -> float:
        """Integral of g over [0, 1]."""
        return integrate.quad(lambda u: float(self.g(np.array([u]))[0]), 0, 1, limit=400,
                              points=[k / 64 for k in range(1, 64)])[0]

    def run(self, eps):
        bits = (np.asarray(eps) > 0.5).astype(np.uint64)
        T = bits.shape[-1]
        state = np.zeros(bits.shape, dtype=np.uint64)
        D = self.bit_depth
        for l in range(min(D, T)):
            state[..., l:] |= bits[..., : T - l] << np.uint64(D - 1 - l)
        u = state.astype(np.float64) * 2.0**-D
        return self.g(u)

    def delta(self, j, p):
        if j < 0 or j >= self.bit_depth:
            return 0.0
        return doubling_delta_formula(self, j, p) ** (1 / p)

    def theta(self, m, p):
        return sum(self.delta(j, p) for j in range(max(m, 0), self.bit_depth))


def _cell_points(i: int, resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / resolution


def doubling_delta_formula(spec: DoublingMapSpec, i: int, p: float, resolution: int = 4096) -> float:
    """delta_i^p for the bit at lag ``i`` by cell integration (coupling-consistent reading).

    Resampling bit i flips it with probability 1/2, moving U by half a cell of
    width 2^{-i}; hence delta^p = 2^{-i-1} sum_c int_0^1 |g(c/2^i + u/2^{i+1})
    - g(c/2^i + (1+u)/2^{i+1})|^p du.
    """
    u = _cell_points(i, resolution)
    cells = 2**i
    acc = 0.0
    for c0 in range(0, cells, 256):
        c = np.arange(c0, min(c0 + 256, cells))[:, None]
        lo = spec.g(c / cells + u / (2 * cells))
        hi = spec.g(c / cells + (1 + u) / (2 * cells))
        acc += float(np.sum(np.mean(np.abs(lo - hi) ** p, axis=1)))
    return acc / (2 * cells)


def doubling_delta_printed(spec: DoublingMapSpec, i: int, p: float, resolution: int = 4096) -> float:
    """The cell sum read literally with unit-cell shifts; the cell leaving [0, 1] is skipped."""
    u = _cell_points(i, resolution)
    cells = 2**i
    acc = 0.0
    for j in range(1, cells):
        a = spec.g(j / cells + u / (2 * cells))
        b = spec.g((j - 1) / cells + u / (2 * cells))
        acc += float(np.mean(np.abs(a - b) ** p))
    return acc / 2


def haar_delta_bound(spec_or_coefs, i: int, p: float) -> float:
    """2^{i(p/2-1)} sum_j |c_{i,j}|^p."""
    coefs = spec_or_coefs.haar if isinstance(spec_or_coefs, DoublingMapSpec) else spec_or_coefs
    s = sum(abs(c) ** p for (lvl, _), c in (coefs or {}).items() if lvl == i)
    return float(2 ** (i * (p / 2 - 1)) * s)


# ---------------------------------------------------------------------- zoo


def _arch_step(x, e, omega, a):
    return e * np.sqrt(omega + a * x * x)


def _arch_map(omega, a):
    return functools.partial(_arch_step, omega=omega, a=a)


def _tanh_step(x, e, lam):
    return lam * np.tanh(x) + e


def _tanh_map(lam):
    return functools.partial(_tanh_step, lam=lam)


@dataclass(frozen=True)
class ARCHSpec(IRFSpec):
    """X_i = eps_i sqrt(omega + a X_{i-1}^2), a martingale difference sequence."""

    omega: float = 1.0
    a: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "G", _arch_map(self.omega, self.a))
        # |sqrt(w + a x^2) - sqrt(w + a y^2)| <= sqrt(a)|x - y|
        object.__setattr__(self, "ell_p", math.sqrt(self.a) * self.law.pnorm(self.ell_order))
        super().__post_init__()

    @property
    def symmetric(self):
        return self.law.symmetric

    def gamma(self, h):
        return self.sigma2 if h == 0 else 0.0

    @property
    def sigma2(self):
        return self.law.var * self.omega / (1 - self.law.var * self.a)


@dataclass(frozen=True)
class TanhARSpec(IRFSpec):
    """X_i = lam tanh(X_{i-1}) + eps_i."""

    lam: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "G", _tanh_map(self.lam))
        object.__setattr__(self, "ell_p", abs(self.lam))
        object.__setattr__(self, "ell_order", math.inf)
        super().__post_init__()

    @property
    def symmetric(self):
        return self.law.symmetric and self.x0 == 0


def _cos_g(u):
    return np.cos(2 * np.pi * np.asarray(u, dtype=float))


@dataclass(frozen=True)
class CosDoublingSpec(DoublingMapSpec):
    """g(u) = cos(2 pi u); the Fourier modes at u and 2u are orthogonal."""

    def __post_init__(self):
        object.__setattr__(self, "g", _cos_g)
        object.__setattr__(self, "lipschitz", 2 * math.pi)
        super().__post_init__()

    @property
    def symmetric(self):
        # U -> U + 1/2 maps cos(2 pi U) to its negative
        return True

    def gamma(self, h):
        return 0.5 if h == 0 else 0.0

    @property
    def sigma2(self):
        return 0.5


_NORMAL = InnovationLaw("standard_normal")

ZOO = {
    "iid_normal": lambda: LinearSpec(_NORMAL, "iid_normal", (1.0,)),
    "ar1": lambda: AR1Spec(_NORMAL, "ar1", rho=0.5),
    "ma1": lambda: LinearSpec(_NORMAL, "ma1", (1.0, 0.5)),
    "arch1": lambda: ARCHSpec(_NORMAL, "arch1", omega=1.0, a=0.25, ell_order=3.0),
    "tanh_ar": lambda: TanhARSpec(_NORMAL, "tanh_ar", lam=0.6),
    "volterra2": lambda: VolterraSpec(
        _NORMAL, "volterra2",
        {1: {(0,): 1.0, (1,): 0.5, (2,): 0.25}, 2: {(0, 1): 0.5, (1, 3): 0.25}}),
    "doubling_cos": lambda: CosDoublingSpec(InnovationLaw("bernoulli_half"), "doubling_cos"),
}


def make_process(kind: str, law: InnovationLaw | None = None, **params) -> CausalProcess:
    """Build a process by kind name with keyword parameters."""
    law = law or _NORMAL
    if kind == "linear":
        return LinearSpec(law, params.pop("name", "linear"), tuple(params.pop("coefficients")))
    if kind == "iid":
        return LinearSpec(law, params.pop("name", "iid"), (1.0,))
    if kind == "ma1":
        return LinearSpec(law, params.pop("name", "ma1"), (1.0, float(params.pop("theta", 0.5))))
    if kind == "ar1":
        return AR1Spec(law, params.pop("name", "ar1"), rho=float(params.pop("rho", 0.5)),
                       **params)
    if kind == "arch1":
        return ARCHSpec(law, params.pop("name", "arch1"), **params)
    if kind == "tanh_ar":
        return TanhARSpec(law, params.pop("name", "tanh_ar"), **params)
    if kind == "volterra":
        return VolterraSpec(law, params.pop("name", "volterra"), params.pop("kernels"))
    if kind == "doubling":
        law = InnovationLaw("bernoulli_half")
        if params.get("g") == "cos" or "haar" not in params:
            return CosDoublingSpec(law, params.pop("name", "doubling_cos"))
        return DoublingMapSpec(law, params.pop("name", "doubling_haar"), haar=params.pop("haar"),
                               bit_depth=int(params.pop("bit_depth", 53)))
    raise ValueError(f"unknown process kind {kind!r}")


# ------------------------------------------------------------------- config


def _read_table(path: Path) -> list[tuple[tuple[int, ...], float]]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                *idx, v = rec
                rows.append((tuple(int(i) for i in idx), float(v)))
            except ValueError:
                if rows:
                    raise
                continue  # header row
    return rows


_FLOAT_KEYS = {"rho", "theta", "omega", "a", "lam", "x0", "ell_order"}
_INT_KEYS = {"burn_in", "bit_depth"}


def load_process(section: configparser.SectionProxy | Mapping, base_dir: str | Path = ".") -> CausalProcess:
    """Process from a ``[process]`` config section.

    Keys: ``kind`` plus kind-specific parameters; ``law`` such as
    ``student_t(5)``; ``coefficients`` as a comma list; ``kernels`` /
    ``haar`` as CSV paths with columns (indices..., value).
    Raises ``KeyError`` naming the offending key.
    """
    base = Path(base_dir)
    sec = dict(section)
    if "kind" not in sec:
        raise KeyError("process.kind")
    kind = sec.pop("kind").strip()
    try:
        law = InnovationLaw.parse(sec.pop("law", "standard_normal"))
    except ValueError as exc:
        raise KeyError(f"process.law: {exc}") from None
    params: dict = {}
    for key, raw in sec.items():
        try:
            if key in _FLOAT_KEYS:
                params[key] = float(raw)
            elif key in _INT_KEYS:
                params[key] = int(raw)
            elif key == "coefficients":
                params[key] = [float(x) for x in raw.split(",") if x.strip()]
            elif key == "kernels":
                table: dict = {}
                for idx, v in _read_table(base / raw.strip()):
                    table.setdefault(len(idx), {})[idx] = v
                params[key] = table
            elif key == "haar":
                params[key] = {idx: v for idx, v in _read_table(base / raw.strip())}
            elif key in ("name", "g"):
                params[key] = raw.strip()
            else:
                raise KeyError(f"process.{key}: unknown key")
        except (ValueError, OSError) as exc:
            raise KeyError(f"process.{key}: {exc}") from None
    try:
        return make_process(kind, law, **params)
    except (TypeError, ValueError) as exc:
        raise KeyError(f"process.kind: {exc}") from None
