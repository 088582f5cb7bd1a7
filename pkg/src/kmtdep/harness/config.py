"""Plain-text experiment configuration: ``key = value`` lines under ``[section]`` headers."""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..depmeasure import ConstantTheta, GeometricTail, PowerLogTail, Schedule, ThetaPowerLog
from ..processes import CausalProcess, load_process


class ConfigError(ValueError):
    """Malformed configuration; the message starts with the offending key."""


def parse_n_grid(text: str) -> list[int]:
    """``3^6..3^10``, ``729, 2187`` or ``3^6, 3^8`` -> sorted list of horizons."""
    text = text.strip()
    if ".." in text:
        lo, hi = (t.strip() for t in text.split("..", 1))
        if not (lo.startswith("3^") and hi.startswith("3^")):
            raise ValueError("ranges must be written 3^a..3^b")
        a, b = int(lo[2:]), int(hi[2:])
        grid = [3**k for k in range(a, b + 1)]
    else:
        grid = []
        for tok in text.split(","):
            tok = tok.strip()
            if not tok:
                continue
            grid.append(3 ** int(tok[2:]) if tok.startswith("3^") else int(tok))
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be nonempty and strictly increasing")
    if grid[0] < 2:
        raise ValueError("horizons must be at least 2")
    return grid


@dataclass
class ExperimentConfig:
    """One experiment: a process, moment order, schedule, horizon grid and seed."""

    process: dict = field(default_factory=lambda: {"kind": "ar1", "rho": "0.5"})
    p: float = 3.0
    alpha: float = 4.0
    schedule: str = "iii"
    schedule_value: int = 1
    log_base: str = "e"
    n_grid: list = field(default_factory=lambda: [3**k for k in range(6, 11)])
    replications: int = 50
    seed: int = 20240601
    mode: str = "draw"
    block_count: int = 10_000
    inner_R: int = 256
    jmax: int = 30
    N: int = 100_000
    K: int = 120
    theta: dict | None = None
    base_dir: str = "."
    warnings: list = field(default_factory=list)

    def validate(self):
        if not self.p > 2:
            raise ConfigError(f"experiment.p: must exceed 2, got {self.p}")
        if not self.alpha > self.p:
            raise ConfigError(f"experiment.alpha: must exceed p={self.p}, got {self.alpha}")
        if self.replications < 1:
            raise ConfigError("experiment.replications: must be positive")
        if self.mode not in ("draw", "transform"):
            raise ConfigError(f"experiment.mode: unknown coupling mode {self.mode!r}")
        try:
            self.schedule_obj()
        except ValueError as exc:
            raise ConfigError(f"experiment.schedule: {exc}") from None
        for n in self.n_grid:
            k = round(math.log(n, 3))
            if 3**k != n:
                self.warnings.append(f"n={n} is not a power of 3; the top scale is partial")
        return self

    def schedule_obj(self) -> Schedule:
        base = None if self.log_base in ("e", "") else float(self.log_base)
        return Schedule(self.schedule, self.p, self.alpha, self.schedule_value, base)

    def build_process(self) -> CausalProcess:
        try:
            return load_process(self.process, self.base_dir)
        except KeyError as exc:
            raise ConfigError(str(exc).strip("'\"")) from None

    def theta_model(self):
        """Analytic stub replacing the estimated profile, from the ``[theta]`` section."""
        if not self.theta:
            return None
        t = dict(self.theta)
        kind = t.pop("model", None)
        if kind is None:
            raise ConfigError("theta.model: missing")
        try:
            vals = {k: float(v) for k, v in t.items()}
            if kind == "constant":
                return ConstantTheta(vals.get("c", 1.0))
            if kind == "geometric":
                return GeometricTail(vals.get("c", 1.0), vals["r"])
            if kind == "powerlog":
                return PowerLogTail(vals.get("c", 1.0), vals["beta"], vals.get("A", vals.get("a", 0.0)))
            if kind == "theta_powerlog":
                return ThetaPowerLog(vals.get("c", 1.0), vals["tau"], vals.get("A", vals.get("a", 0.0)))
        except KeyError as exc:
            raise ConfigError(f"theta.{exc.args[0]}: missing") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"theta: {exc}") from None
        raise ConfigError(f"theta.model: unknown model {kind!r}")

    def echo(self) -> str:
        """All effective settings in the config format, for provenance."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        d = asdict(self)
        exp = {k: v for k, v in d.items() if k not in ("process", "theta", "base_dir", "warnings")}
        exp["n_grid"] = ", ".join(str(n) for n in self.n_grid)
        cp["experiment"] = {k: str(v) for k, v in exp.items()}
        cp["process"] = {k: str(v) for k, v in self.process.items()}
        if self.theta:
            cp["theta"] = {k: str(v) for k, v in self.theta.items()}
        from io import StringIO
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


_FIELDS = {
    "p": float, "alpha": float, "schedule": str, "schedule_value": int, "log_base": str,
    "replications": int, "seed": int, "mode": str, "block_count": int, "inner_R": int,
    "jmax": int, "N": int, "K": int,
}


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``path`` (or defaults when None) and apply CLI overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"--config: no such file {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"config: {exc}") from None
        cfg.base_dir = str(path.parent)
        if cp.has_section("experiment"):
            for key, raw in cp["experiment"].items():
                if key == "n_grid":
                    try:
                        cfg.n_grid = parse_n_grid(raw)
                    except ValueError as exc:
                        raise ConfigError(f"experiment.n_grid: {exc}") from None
                elif key in _FIELDS:
                    try:
                        setattr(cfg, key, _FIELDS[key](raw.strip()))
                    except ValueError:
                        raise ConfigError(f"experiment.{key}: cannot parse {raw!r}") from None
                else:
                    raise ConfigError(f"experiment.{key}: unknown key")
        if cp.has_section("process"):
            cfg.process = dict(cp["process"])
        if cp.has_section("theta"):
            cfg.theta = dict(cp["theta"])
        extra = set(cp.sections()) - {"experiment", "process", "theta"}
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: unknown section")
    for key, val in (overrides or {}).items():
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    for w in cfg.warnings:
        warnings.warn(w, stacklevel=2)
    return cfg
