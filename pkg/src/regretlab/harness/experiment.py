"""Single runs, optimizer comparisons and certificate files."""
from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bounds import RegretCertificate, certify, check_preconditions, checkpoints, regret_curve
from ..core import STREAM_PROBLEM, STREAM_THETA0, Rng, Trace, dumps, write_trace
from ..errors import ConfigError, DivergenceError, PreconditionError
from ..optimizers import OptimizerConfig, run
from ..problems import (
    LeastSquaresObjective,
    Objective,
    QuadraticObjective,
    RegularizerSpec,
    make_random_least_squares,
    make_random_logistic,
    make_random_quadratic,
    make_sparse_problem,
    objective_from_json,
    objective_to_json,
)
from .config import ExperimentConfig, OptimizerSpec, StepSize
from .plot import emit_svg_plot

SUMMARY_COLUMNS = ["label", "algo", "eta", "T", "final_loss", "final_regret", "steps_to_tol",
                   "certificate"]


def build_problem(cfg: ExperimentConfig, seed: int | None = None) -> Objective:
    """The objective described by ``cfg.problem``; randomness comes from the root seed."""
    p = cfg.problem
    kind = p["kind"]
    root = cfg.seed if seed is None else seed
    pseed = p["seed"] if "seed" in p else Rng(root, (STREAM_PROBLEM,))
    reg = RegularizerSpec("l1", float(p["l1"])) if p.get("l1") else RegularizerSpec()
    try:
        if kind == "file":
            return objective_from_json(Path(p["path"]).read_text(encoding="utf-8"))
        d = p["dim"]
        if kind == "quadratic":
            obj = make_random_quadratic(d, pseed, p.get("ridge", 0.1))
            if reg.active:
                obj = QuadraticObjective(obj.spec, regularizer=reg)
            return obj
        if kind == "least_squares":
            obj = make_random_least_squares(p["n"], d, pseed, p.get("batch_count", 1))
            if reg.active:
                obj = LeastSquaresObjective(obj.X, obj.y, reg, obj.batch_count, obj.batch_seed)
            return obj
        if kind == "logistic":
            return make_random_logistic(p["n"], d, pseed, p.get("l2", 0.1), p.get("batch_count", 1))
        return make_sparse_problem(d, p["density"], pseed, n_rows=p.get("n"),
                                   batch_count=p.get("batch_count"), regularizer=reg)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError([f"cannot build problem: {exc}"]) from exc


def initial_point(cfg: ExperimentConfig, dim: int, seed: int | None = None) -> np.ndarray:
    if cfg.theta0 == "zeros":
        return np.zeros(dim)
    if cfg.theta0 == "ones":
        return np.ones(dim)
    return Rng(cfg.seed if seed is None else seed, (STREAM_THETA0,)).normal(dim)


def steps_to_tolerance(trace: Trace, optimal_value: float, tol: float = 1e-6) -> int | None:
    """First t with J(theta_t) - J* <= tol * (J(theta_1) - J*), or None."""
    gap = np.asarray(trace.losses) - optimal_value
    hit = np.flatnonzero(gap <= tol * gap[0])
    return int(hit[0]) + 1 if hit.size else None


def empirical_certificate(trace: Trace, obj: Objective, note: str) -> RegretCertificate:
    """Regret curve with no bound attached; used for plots of uncertified runs."""
    regret = regret_curve(trace, obj.optimal_value)
    return RegretCertificate(trace.meta.get("algo", "?"), trace.T, regret, checkpoints(trace.T),
                             np.array([]), float(regret[-1]), None, None, None, {}, note)


@dataclass
class RunOutcome:
    label: str
    config: OptimizerConfig | None
    eta: StepSize
    trace: Trace | None = None
    certificate: RegretCertificate | None = None
    status: str = "not requested"
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None or (self.certificate is not None
                                          and self.certificate.holds is False)


@dataclass
class ExperimentResult:
    outcomes: list[RunOutcome]
    rows: list[dict]
    out_dir: Path
    files: list[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if any(o.failed for o in self.outcomes) else 0


def _run_one(spec: OptimizerSpec, obj: Objective, theta0, cfg: ExperimentConfig, seed: int,
             eta: StepSize | None = None) -> RunOutcome:
    step = spec.eta if eta is None else eta
    try:
        ocfg = spec.build(obj.lipschitz, step)
    except ConfigError as exc:
        return RunOutcome(spec.label, None, step, status="error", error="; ".join(exc.errors))
    try:
        trace = run(ocfg, obj, theta0, seed=seed, meta={"label": spec.label})
    except DivergenceError as exc:
        return RunOutcome(spec.label, ocfg, step, exc.partial_trace, status="diverged",
                          error=str(exc))
    return RunOutcome(spec.label, ocfg, step, trace)


def _certify(outcome: RunOutcome, obj: Objective, batch: str) -> None:
    if outcome.config is None:
        return
    try:
        check_preconditions(obj, outcome.config, batch)
    except PreconditionError as exc:
        # the gate wins over whatever the run did with an out-of-theorem step
        detail = f"precondition: {exc}"
        if outcome.status == "diverged":
            detail += f" ({outcome.error})"
        outcome.status, outcome.error = "error", detail
        return
    if outcome.trace is None or outcome.error is not None:
        return
    try:
        outcome.certificate = certify(outcome.trace, obj, outcome.config)
    except PreconditionError as exc:
        outcome.status = "error"
        outcome.error = f"precondition: {exc}"
        return
    holds = outcome.certificate.holds
    outcome.status = "n/a" if holds is None else ("holds" if holds else "violated")


def _summary_row(o: RunOutcome, obj: Objective, tol: float) -> dict:
    row = {"label": o.label, "algo": o.config.algo if o.config else "",
           "eta": "" if o.config is None else format(o.config.eta, ".17g"),
           "T": "", "final_loss": "", "final_regret": "", "steps_to_tol": "",
           "certificate": o.status if o.error is None else f"{o.status}: {o.error}"}
    if o.trace is not None and o.trace.final_theta is not None:
        row["T"] = o.trace.T
        row["final_loss"] = format(float(o.trace.losses[-1]), ".17g")
        Jstar = obj.optimal_value
        if Jstar is not None:
            row["final_regret"] = format(float(regret_curve(o.trace, Jstar)[-1]), ".17g")
            s = steps_to_tolerance(o.trace, Jstar, tol)
            row["steps_to_tol"] = "" if s is None else s
    return row


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str, files: list[Path]) -> None:
    path.write_text(text, encoding="utf-8")
    files.append(path)


def _persist(outcomes: list[RunOutcome], obj: Objective, cfg: ExperimentConfig, out: Path,
             plot: bool) -> ExperimentResult:
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    _write(out / "problem.json", objective_to_json(obj) + "\n", files)
    for o in outcomes:
        if o.trace is not None:
            path = out / f"trace_{o.label}.jsonl"
            write_trace(o.trace, path)
            files.append(path)
        if cfg.certify:
            if o.certificate is not None:
                _write(out / f"certificate_{o.label}.json", o.certificate.to_json(), files)
                _write(out / f"certificate_{o.label}.csv", o.certificate.to_csv(), files)
            elif o.error is not None:
                doc = {"algorithm": o.config.algo if o.config else None, "holds": False,
                       "error": o.error}
                _write(out / f"certificate_{o.label}.json", dumps(doc) + "\n", files)
        complete = o.trace is not None and o.trace.final_theta is not None
        if plot and complete and obj.optimal_value is not None:
            cert = o.certificate or empirical_certificate(o.trace, obj, "regret only")
            path = out / f"regret_{o.label}.svg"
            emit_svg_plot(cert, path, title=o.label)
            files.append(path)
    rows = [_summary_row(o, obj, cfg.tol) for o in outcomes]
    _write(out / "summary.csv", summary_csv(rows), files)
    for o in outcomes:
        if o.error is not None:
            print(f"{o.label}: {o.error}", file=sys.stderr)
    return ExperimentResult(outcomes, rows, out, files)


def run_experiment(cfg: ExperimentConfig, out_dir=None, seed: int | None = None,
                   plot: bool | None = None) -> ExperimentResult:
    """Run every configured optimizer once and write its artifacts.

    The exit code is 0 iff every run finished and every requested certificate holds.
    """
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir or cfg.out or ".")
    obj = build_problem(cfg, seed)
    theta0 = initial_point(cfg, obj.dim, seed)
    outcomes = []
    for spec in cfg.optimizers:
        o = _run_one(spec, obj, theta0, cfg, seed)
        if cfg.certify:
            _certify(o, obj, o.config.batch if o.config else cfg.batch)
        outcomes.append(o)
    return _persist(outcomes, obj, cfg, out, cfg.plot if plot is None else plot)


def _tune(spec: OptimizerSpec, obj: Objective, theta0, cfg: ExperimentConfig,
          seed: int) -> RunOutcome:
    """Best step size on the grid: fewest steps to tolerance, then lowest final gap."""
    if not spec.eta_grid:
        return _run_one(spec, obj, theta0, cfg, seed)
    Jstar = obj.optimal_value
    best, best_key = None, None
    for step in spec.eta_grid:
        o = _run_one(spec, obj, theta0, cfg, seed, step)
        if o.error is not None or Jstar is None:
            key = (math.inf, math.inf)
        else:
            s = steps_to_tolerance(o.trace, Jstar, cfg.tol)
            key = (math.inf if s is None else s, float(o.trace.losses[-1]) - Jstar)
        if best is None or key < best_key:
            best, best_key = o, key
    return best


def compare_optimizers(cfg: ExperimentConfig, out_dir=None, seed: int | None = None,
                       plot: bool | None = None) -> ExperimentResult:
    """Run each optimizer on one problem from a shared start; tune over ``eta_grid`` if given."""
    if len(cfg.optimizers) < 2:
        raise ConfigError(["compare needs at least two optimizers"])
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir or cfg.out or ".")
    obj = build_problem(cfg, seed)
    theta0 = initial_point(cfg, obj.dim, seed)
    outcomes = []
    for spec in cfg.optimizers:
        o = _tune(spec, obj, theta0, cfg, seed)
        if cfg.certify:
            _certify(o, obj, o.config.batch if o.config else cfg.batch)
        outcomes.append(o)
    return _persist(outcomes, obj, cfg, out, cfg.plot if plot is None else plot)


def certify_trace(trace: Trace, cfg: ExperimentConfig, out_dir=None,
                  seed: int | None = None) -> tuple[RegretCertificate | None, str | None, int]:
    """Certify a stored trace against the config's problem; returns (cert, error, exit code)."""
    obj = build_problem(cfg, seed if seed is not None else trace.meta.get("seed", cfg.seed))
    label = trace.meta.get("label")
    specs = {s.label: s for s in cfg.optimizers}
    if label in specs:
        spec = specs[label]
    elif len(specs) == 1:
        spec = next(iter(specs.values()))
    else:
        raise ConfigError([f"trace label {label!r} matches no configured optimizer"])
    out = Path(out_dir or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    try:
        cert = certify(trace, obj, spec.build(obj.lipschitz))
    except PreconditionError as exc:
        doc = {"algorithm": trace.meta.get("algo"), "holds": False, "error": f"precondition: {exc}"}
        (out / f"certificate_{spec.label}.json").write_text(dumps(doc) + "\n", encoding="utf-8")
        return None, str(exc), 1
    (out / f"certificate_{spec.label}.json").write_text(cert.to_json(), encoding="utf-8")
    (out / f"certificate_{spec.label}.csv").write_text(cert.to_csv(), encoding="utf-8")
    return cert, None, 0 if cert.holds is not False else 1
