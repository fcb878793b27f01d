"""Executable supporting inequalities, each returning an :class:`InequalityReport`.

A report holds when ``rhs - lhs >= -1e-9 * max(1, |rhs|)``. Checkers raise
``PreconditionError`` when their hypotheses are not met (for instance an
understated Lipschitz constant), so a failing report is a genuine violation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .bounds import regret_curve
from .core import GradientHistory, frozen
from .errors import PreconditionError
from .problems import Objective

REL_SLACK = 1e-9
LIPSCHITZ_REL_TOL = 1e-9


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    witness: Any = None
    parts: tuple["InequalityReport", ...] = field(default=(), repr=False)


def report(name: str, lhs: float, rhs: float, witness=None, parts=()) -> InequalityReport:
    lhs = float(lhs)
    rhs = float(rhs)
    slack = rhs - lhs
    return InequalityReport(name, lhs, rhs, slack, slack >= -REL_SLACK * max(1.0, abs(rhs)),
                            witness, tuple(parts))


def combine(name: str, parts: Sequence[InequalityReport], witness=None) -> InequalityReport:
    """All-of report; lhs/rhs/slack are those of the tightest part."""
    worst = min(parts, key=lambda r: r.slack / max(1.0, abs(r.rhs)))
    return InequalityReport(name, worst.lhs, worst.rhs, worst.slack,
                            all(p.holds for p in parts), witness, tuple(parts))


def _as_history(h) -> GradientHistory:
    return h if isinstance(h, GradientHistory) else GradientHistory(h)


def _check_lipschitz(obj: Objective, L: float) -> None:
    if not L > 0:
        raise PreconditionError("L must be positive")
    known = obj.lipschitz
    if known is not None and L < known * (1.0 - LIPSCHITZ_REL_TOL):
        raise PreconditionError(f"L={L!r} understates the Lipschitz constant {known!r}")


def check_convexity_sandwich(obj: Objective, x, y, L: float) -> InequalityReport:
    """0 <= J(y) - J(x) - <grad J(x), y - x> <= (L/2) ||x - y||^2."""
    _check_lipschitz(obj, L)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gap = obj.value(y) - obj.value(x) - float(obj.gradient(x) @ (y - x))
    diff = x - y
    upper = 0.5 * L * float(diff @ diff)
    lower_part = report("convexity_lower", 0.0, gap)
    upper_part = report("smoothness_upper", gap, upper)
    return combine("convexity_sandwich", [lower_part, upper_part], (x, y, L))


def check_cocoercivity(obj: Objective, x, y, L: float) -> InequalityReport:
    """J(x) + <grad J(x), y - x> + ||grad J(x) - grad J(y)||^2 / (2L) <= J(y)."""
    _check_lipschitz(obj, L)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gx = obj.gradient(x)
    dg = gx - obj.gradient(y)
    lhs = obj.value(x) + float(gx @ (y - x)) + float(dg @ dg) / (2.0 * L)
    return report("cocoercivity", lhs, obj.value(y), (x, y, L))


@dataclass(frozen=True)
class BregmanMetric:
    """Diagonal quadratic psi(x) = <x, (delta I + diag(s)) x>."""

    s: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        s = np.array(self.s, dtype=np.float64).reshape(-1)
        if np.any(s < 0) or self.delta < 0:
            raise ValueError("metric weights must be non-negative")
        object.__setattr__(self, "s", frozen(s))

    @property
    def weights(self) -> np.ndarray:
        return self.delta + self.s

    def psi(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ (self.weights * x))

    def grad_psi(self, x) -> np.ndarray:
        return 2.0 * self.weights * np.asarray(x, dtype=np.float64)

    def dual_sq_norm(self, g) -> float:
        """<g, (delta I + diag(s))^{-1} g>; zero-weight coordinates need g_i = 0 and add nothing."""
        g = np.asarray(g, dtype=np.float64)
        w = self.weights
        live = w > 0
        if np.any(~live & (g != 0)):
            raise PreconditionError("dual norm undefined: zero metric weight with non-zero gradient")
        return float((g[live] ** 2 / w[live]).sum())


def bregman(metric: BregmanMetric, x, y) -> float:
    """B_psi(x, y) = <x - y, (delta I + diag(s)) (x - y)> for the quadratic psi."""
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(diff @ (metric.weights * diff))


def metrics_from_trace(trace, delta: float) -> list[BregmanMetric]:
    """psi_t built from s_t = ||g_{1:t,i}||_2 of the trace's gradient history."""
    S = _kernels.prefix_sq_norms(trace.grads)
    return [BregmanMetric(S[k], delta) for k in range(trace.T)]


def check_duchi_prop3(trace, obj: Objective, metrics: Sequence[BregmanMetric],
                      eta: float) -> InequalityReport:
    """Regret against Bregman telescoping plus dual-norm gradient terms.

    R(T) <= B_1(theta*, theta_1)/eta
            + sum_{t<T} [B_{t+1}(theta*, theta_{t+1}) - B_t(theta*, theta_{t+1})]/eta
            + (eta/2) sum_t ||g_t||^2_{psi_t*}
    """
    if len(metrics) != trace.T:
        raise PreconditionError(f"{len(metrics)} metrics for a trace of {trace.T} steps")
    if not eta > 0:
        raise ValueError("eta must be positive")
    theta_star = obj.optimum
    if theta_star is None:
        raise PreconditionError("objective has no known optimum")
    lhs = float(regret_curve(trace, obj.optimal_value)[-1])
    first = bregman(metrics[0], theta_star, trace.thetas[0]) / eta
    tele = 0.0
    for t in range(trace.T - 1):
        nxt = trace.thetas[t + 1]
        tele += bregman(metrics[t + 1], theta_star, nxt) - bregman(metrics[t], theta_star, nxt)
    dual = sum(metrics[t].dual_sq_norm(trace.grads[t]) for t in range(trace.T))
    rhs = first + tele / eta + 0.5 * eta * dual
    return report("duchi_prop3", lhs, rhs, {"T": trace.T, "eta": eta})


def check_duchi_lemma4(h) -> InequalityReport:
    """sum_t <g_t, diag(s_t)^{-1} g_t> <= 2 sum_i ||g_{1:T,i}||_2."""
    h = _as_history(h)
    if h.T == 0:
        raise ValueError("empty gradient history")
    lhs = float(_kernels.lemma4_terms(h.array).sum())
    rhs = 2.0 * float(np.sqrt((h.array ** 2).sum(axis=0)).sum())
    return report("duchi_lemma4", lhs, rhs, h)


def _realized_linf(h: GradientHistory) -> float:
    return float(np.max(np.abs(h.array))) if h.array.size else 0.0


def check_kingma_lemma103(h, L_inf: float) -> InequalityReport:
    """Per coordinate: sum_t sqrt(g_{t,i}^2 / t) <= 2 L_inf ||g_{1:T,i}||_2."""
    h = _as_history(h)
    realized = _realized_linf(h)
    if L_inf < realized:
        raise PreconditionError(f"L_inf={L_inf!r} is below the realized max |g| = {realized!r}")
    lhs = _kernels.lemma103_terms(h.array)
    rhs = 2.0 * L_inf * np.sqrt((h.array ** 2).sum(axis=0))
    parts = [report(f"kingma_lemma103[{i}]", lhs[i], rhs[i]) for i in range(h.dim)]
    return combine("kingma_lemma103", parts, h)


def check_kingma_lemma104(h, beta1: float, beta2: float, L_inf: float) -> InequalityReport:
    """Per coordinate: sum_t mhat^2/sqrt(t vhat) <= 2 L_inf ||g_{1:T,i}||_2 / ((1-gamma)^2 sqrt(1-beta2))."""
    h = _as_history(h)
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise PreconditionError("beta1 and beta2 must be in [0,1)")
    gamma = beta1 ** 2 / math.sqrt(beta2) if beta2 > 0 else (0.0 if beta1 == 0 else math.inf)
    if not gamma < 1:
        raise PreconditionError(f"gamma = beta1^2/sqrt(beta2) = {gamma!r} must be below 1")
    realized = _realized_linf(h)
    if L_inf < realized:
        raise PreconditionError(f"L_inf={L_inf!r} is below the realized max |g| = {realized!r}")
    lhs = _kernels.lemma104_terms(h.array, beta1, beta2)
    coef = 2.0 * L_inf / ((1.0 - gamma) ** 2 * math.sqrt(1.0 - beta2))
    rhs = coef * np.sqrt((h.array ** 2).sum(axis=0))
    parts = [report(f"kingma_lemma104[{i}]", lhs[i], rhs[i]) for i in range(h.dim)]
    return combine("kingma_lemma104", parts, h)


def check_vhat_dominance(h, beta2: float) -> InequalityReport:
    """vhat_{t,i} <= ||g_{1:t,i}||_2^2 for every t and i."""
    h = _as_history(h)
    if not 0 <= beta2 < 1:
        raise PreconditionError("beta2 must be in [0,1)")
    _, vhat = _kernels.adam_moments(h.array, 0.0, beta2)
    bound = np.cumsum(h.array ** 2, axis=0)
    scaled = (bound - vhat) / np.maximum(1.0, np.abs(bound))
    k = np.unravel_index(np.argmin(scaled), scaled.shape)
    parts = [report("vhat_dominance", vhat[k], bound[k], {"t": int(k[0]) + 1, "i": int(k[1])})]
    return combine("vhat_dominance", parts, h)
