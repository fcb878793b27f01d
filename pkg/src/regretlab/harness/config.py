"""Flat ``key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment. Dotted keys group settings:
``problem.kind``, ``problem.dim``, ``opt.<label>.eta`` and so on. Every
problem found is reported at once through a single ``ConfigError``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any

from ..errors import ConfigError
from ..optimizers import ALGORITHMS, OptimizerConfig

PROBLEM_KINDS = {
    "quadratic": {"dim", "seed", "ridge", "l1"},
    "least_squares": {"dim", "n", "seed", "batch_count", "l1"},
    "logistic": {"dim", "n", "seed", "l2", "batch_count"},
    "sparse": {"dim", "density", "seed", "n", "batch_count", "l1"},
    "file": {"path"},
}
PROBLEM_REQUIRED = {
    "quadratic": {"dim"},
    "least_squares": {"dim", "n"},
    "logistic": {"dim", "n"},
    "sparse": {"dim", "density"},
    "file": {"path"},
}
TOP_KEYS = {"T", "batch", "seed", "certify", "plot", "theta0", "tol", "out"}
OPT_KEYS = {"algo", "eta", "gamma", "beta1", "beta2", "lambda", "epsilon", "delta",
            "sqrt_t_decay", "T", "batch", "eta_grid"}

_RATIO = re.compile(r"^\s*([0-9.eE+-]*)\s*/\s*L\s*$")


@dataclass(frozen=True)
class StepSize:
    """A step size that may be relative to the objective's Lipschitz constant."""

    value: float | None = None     # absolute
    over_L: float | None = None    # eta = over_L / L
    auto: bool = False             # largest step the theorem allows

    def resolve(self, algo: str, gamma: float, L: float | None) -> float:
        if self.value is not None:
            return self.value
        if L is None or not L > 0:
            raise ConfigError("a step size relative to L needs an objective with known L")
        if self.auto:
            if algo in ("sgd", "nag"):
                return 1.0 / L
            if algo == "momentum":
                return (1.0 - gamma) / L
            raise ConfigError(f"eta = auto is only defined for sgd, momentum and nag, not {algo}")
        return self.over_L / L

    def __str__(self):
        if self.value is not None:
            return format(self.value, ".17g")
        return "auto" if self.auto else f"{self.over_L:.17g}/L"


@dataclass
class OptimizerSpec:
    label: str
    settings: dict[str, Any]
    eta: StepSize
    eta_grid: tuple[StepSize, ...] = ()

    def build(self, L: float | None, eta: StepSize | None = None) -> OptimizerConfig:
        kw = dict(self.settings)
        step = self.eta if eta is None else eta
        kw["eta"] = step.resolve(kw["algo"], float(kw.get("gamma", 0.0)), L)
        return OptimizerConfig.from_mapping(kw)


@dataclass
class ExperimentConfig:
    problem: dict[str, Any]
    optimizers: list[OptimizerSpec]
    T: int = 1000
    batch: str = "full"
    seed: int = 0
    certify: bool = False
    plot: bool = False
    theta0: str = "zeros"
    tol: float = 1e-6
    out: str | None = None
    source: dict[str, Any] = field(default_factory=dict)


def _parse_value(raw: str) -> Any:
    s = raw.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _parse_step(raw: Any) -> StepSize:
    if isinstance(raw, bool):
        raise ValueError("not a step size")
    if isinstance(raw, (int, float)):
        return StepSize(value=float(raw))
    s = str(raw).strip()
    if s == "auto":
        return StepSize(auto=True)
    m = _RATIO.match(s)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        return StepSize(over_L=coef)
    raise ValueError("not a step size")


def _check_step(step: StepSize, errors: list[str], where: str) -> None:
    v = step.value if step.value is not None else step.over_L
    if v is not None and not (math.isfinite(v) and v > 0):
        errors.append(f"{where} must be positive")


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, Any] = {}
    errors: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append(f"line {lineno}: empty key")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _parse_value(value)

    top: dict[str, Any] = {}
    problem: dict[str, Any] = {}
    opts: dict[str, dict[str, Any]] = {}
    for key, value in raw.items():
        parts = key.split(".")
        if parts[0] == "problem" and len(parts) == 2:
            problem[parts[1]] = value
        elif parts[0] == "opt" and len(parts) == 3:
            opts.setdefault(parts[1], {})[parts[2]] = value
        elif len(parts) == 1 and key in TOP_KEYS:
            top[key] = value
        else:
            errors.append(f"unknown key {key!r}")

    kind = problem.get("kind")
    if kind is None:
        errors.append("missing required key 'problem.kind'")
    elif kind not in PROBLEM_KINDS:
        errors.append(f"unknown problem.kind {kind!r} (expected one of {', '.join(PROBLEM_KINDS)})")
    else:
        for k in sorted(set(problem) - PROBLEM_KINDS[kind] - {"kind"}):
            errors.append(f"unknown key 'problem.{k}' for kind {kind}")
        for k in sorted(PROBLEM_REQUIRED[kind] - set(problem)):
            errors.append(f"missing required key 'problem.{k}'")
        for k in ("dim", "n", "batch_count"):
            if k in problem and (not isinstance(problem[k], int) or problem[k] < 1):
                errors.append(f"problem.{k} must be a positive integer")
        if "density" in problem:
            dens = problem["density"]
            if not isinstance(dens, (int, float)) or not 0 < dens <= 1:
                errors.append("problem.density must be in (0,1]")
        for k in ("l1", "l2", "ridge"):
            if k in problem and (not isinstance(problem[k], (int, float)) or problem[k] < 0):
                errors.append(f"problem.{k} must be non-negative")

    T = top.get("T", 1000)
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        errors.append("T must be a positive integer")
    batch = top.get("batch", "full")
    if batch not in ("full", "minibatch"):
        errors.append("batch must be 'full' or 'minibatch'")
    seed = top.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append("seed must be a non-negative integer")
    for k in ("certify", "plot"):
        if k in top and not isinstance(top[k], bool):
            errors.append(f"{k} must be true or false")
    theta0 = top.get("theta0", "zeros")
    if theta0 not in ("zeros", "ones", "random"):
        errors.append("theta0 must be zeros, ones or random")
    tol = top.get("tol", 1e-6)
    if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not tol > 0:
        errors.append("tol must be positive")

    specs: list[OptimizerSpec] = []
    if not opts:
        errors.append("no optimizer configured (expected opt.<label>.<key> entries)")
    for label, settings in opts.items():
        where = f"opt.{label}"
        settings = dict(settings)
        for k in sorted(set(settings) - OPT_KEYS):
            errors.append(f"unknown key '{where}.{k}'")
            settings.pop(k)
        algo = settings.setdefault("algo", label if label in ALGORITHMS else None)
        if algo is None:
            errors.append(f"missing required key '{where}.algo'")
            continue
        if algo not in ALGORITHMS:
            errors.append(f"{where}.algo: unknown algorithm {algo!r}")
            continue
        grid: tuple[StepSize, ...] = ()
        if "eta_grid" in settings:
            try:
                grid = tuple(_parse_step(_parse_value(x)) for x in str(settings.pop("eta_grid")).split(","))
            except ValueError:
                errors.append(f"{where}.eta_grid must be a comma-separated list of step sizes")
            for g in grid:
                _check_step(g, errors, f"{where}.eta_grid entries")
        if "eta" not in settings and not grid:
            errors.append(f"missing required key '{where}.eta'")
            continue
        try:
            eta = _parse_step(settings.pop("eta")) if "eta" in settings else grid[0]
        except ValueError:
            errors.append(f"{where}.eta must be a number, 'c/L' or 'auto'")
            continue
        _check_step(eta, errors, f"{where}.eta")
        settings.setdefault("T", T if isinstance(T, int) else None)
        settings.setdefault("batch", batch)
        # validate everything except eta, which may depend on L
        probe = dict(settings, eta=1.0)
        try:
            OptimizerConfig.from_mapping(probe)
        except ConfigError as exc:
            errors.extend(f"{where}: {e}" for e in exc.errors)
        specs.append(OptimizerSpec(label, settings, eta, grid))

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(problem=problem, optimizers=specs, T=T, batch=batch, seed=seed,
                            certify=top.get("certify", False), plot=top.get("plot", False),
                            theta0=theta0, tol=float(tol), out=top.get("out"), source=raw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
