"""Seeded campaigns that run every lemma checker over random instances.

Trial ``j`` of checker ``c`` draws from its own stream ``(LEMMA, c, j)`` of the
root seed, so campaigns are reproducible and checkers are independent.
Hypothesis failures (``PreconditionError``) are counted as errors, never as
violations.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .. import lemma_lab
from ..core import STREAM_LEMMA, GradientHistory, Rng
from ..errors import PreconditionError
from ..problems import make_random_least_squares, make_random_logistic, make_random_quadratic

CAMPAIGN_COLUMNS = ["name", "trial", "lhs", "rhs", "slack", "holds", "seed", "detail"]
MAX_DIM = 5
MAX_T = 50
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999


def trial_objective(rng: Rng, trial: int):
    """Quadratic, least squares and logistic objectives in rotation."""
    d = int(rng.integers(1, MAX_DIM + 1))
    family = trial % 3
    if family == 0:
        return make_random_quadratic(d, rng.child(0))
    if family == 1:
        return make_random_least_squares(int(rng.integers(1, 21)), d, rng.child(0))
    return make_random_logistic(int(rng.integers(1, 31)), d, rng.child(0), l2_weight=0.1)


def trial_history(rng: Rng) -> GradientHistory:
    d = int(rng.integers(1, MAX_DIM + 1))
    T = int(rng.integers(1, MAX_T + 1))
    return GradientHistory(rng.child(0).normal((T, d)))


def _realized(h: GradientHistory) -> float:
    return float(np.max(np.abs(h.array)))


def _pair_check(fn):
    def check(rng: Rng, trial: int, scale: float):
        obj = trial_objective(rng, trial)
        x = 2.0 * rng.child(1).normal(obj.dim)
        y = 2.0 * rng.child(2).normal(obj.dim)
        return fn(obj, x, y, scale * obj.lipschitz)
    return check


def _lemma4(rng, trial, scale):
    return lemma_lab.check_duchi_lemma4(trial_history(rng))


def _lemma103(rng, trial, scale):
    h = trial_history(rng)
    return lemma_lab.check_kingma_lemma103(h, scale * _realized(h))


def _lemma104(rng, trial, scale):
    h = trial_history(rng)
    return lemma_lab.check_kingma_lemma104(h, ADAM_BETA1, ADAM_BETA2, scale * _realized(h))


def _vhat(rng, trial, scale):
    return lemma_lab.check_vhat_dominance(trial_history(rng), ADAM_BETA2)


CHECKERS: dict[str, Callable] = {
    "convexity_sandwich": _pair_check(lemma_lab.check_convexity_sandwich),
    "cocoercivity": _pair_check(lemma_lab.check_cocoercivity),
    "duchi_lemma4": _lemma4,
    "kingma_lemma103": _lemma103,
    "kingma_lemma104": _lemma104,
    "vhat_dominance": _vhat,
}


@dataclass
class CampaignResult:
    rows: list[dict]
    violations: int
    errors: int
    path: Path | None = None

    @property
    def exit_code(self) -> int:
        if self.violations:
            return 1
        return 2 if self.errors else 0

    def counts(self) -> dict[str, tuple[int, int, int]]:
        """name -> (trials, violations, errors)."""
        out: dict[str, list[int]] = {}
        for r in self.rows:
            c = out.setdefault(r["name"], [0, 0, 0])
            c[0] += 1
            c[1] += r["holds"] == "false"
            c[2] += r["holds"] == "error"
        return {k: tuple(v) for k, v in out.items()}


def campaign_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CAMPAIGN_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_lemma_campaign(seed: int, trials: int, out_dir=None, lipschitz_scale: float = 1.0,
                       checkers: dict[str, Callable] | None = None) -> CampaignResult:
    """Run ``trials`` seeded instances of every checker; write lemma_campaign.csv if ``out_dir``.

    ``lipschitz_scale`` multiplies the L (or L_inf) handed to the checkers; values
    below one understate it and must surface as errors.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    checkers = CHECKERS if checkers is None else checkers
    rows = []
    violations = errors = 0
    for c, (name, check) in enumerate(checkers.items()):
        for j in range(trials):
            rng = Rng(seed, (STREAM_LEMMA, c, j))
            row = {"name": name, "trial": j, "seed": seed, "lhs": "", "rhs": "", "slack": "",
                   "detail": ""}
            try:
                rep = check(rng, j, lipschitz_scale)
            except PreconditionError as exc:
                errors += 1
                row.update(holds="error", detail=str(exc))
            else:
                violations += not rep.holds
                row.update(lhs=format(rep.lhs, ".17g"), rhs=format(rep.rhs, ".17g"),
                           slack=format(rep.slack, ".17g"), holds=str(rep.holds).lower())
            rows.append(row)
    result = CampaignResult(rows, violations, errors)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.path = out / "lemma_campaign.csv"
        result.path.write_text(campaign_csv(rows), encoding="utf-8")
    return result
