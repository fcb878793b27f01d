"""Cumulative regret and closed-form regret bounds, bound together as certificates.

Bounds are the explicit final inequalities of each convergence argument:

* gradient descent      R(T) <= ||theta_1 - theta*||^2 / (2 eta)
* heavy-ball momentum   R(T) <= gamma/(1-gamma) (J_1 - J*) + (1-gamma)/(2 eta) ||theta_1 - theta*||^2
* Nesterov (NAG)        same expression, under eta <= 1/L
* Adagrad (diagonal)    R(T) <= max_t ||theta* - theta_t||_inf^2 S / (2 eta) + eta S,
                        with S = sum_i ||g_{1:T,i}||_2
* Adam (theorem mode)   see :func:`adam_bound`

A certificate refuses (raises ``PreconditionError``) when the hypotheses are
not met, so ``holds=False`` always means the inequality itself failed.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import _kernels
from .core import dumps, norm2
from .errors import PreconditionError
from .optimizers import OptimizerConfig
from .problems import Objective, validate_step_size

REL_SLACK = 1e-9
MAX_CURVE_POINTS = 1000


def tolerance(scale: float) -> float:
    return REL_SLACK * max(1.0, abs(scale))


def regret_curve(trace, optimal_value: float) -> np.ndarray:
    """R(1..T): cumulative sums of J(theta_t) - J*."""
    losses = np.asarray(trace.losses if hasattr(trace, "losses") else trace, dtype=np.float64)
    if losses.size == 0:
        raise ValueError("regret of an empty trace")
    below = np.nonzero(losses < optimal_value - tolerance(optimal_value))[0]
    if below.size:
        t = int(below[0]) + 1
        raise PreconditionError(
            f"optimal value {optimal_value!r} exceeds the loss at step {t} "
            f"({losses[below[0]]!r}); it is not the optimum")
    return np.cumsum(losses - optimal_value)


def sgd_bound(theta1, theta_star, eta: float) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    diff = np.asarray(theta1, dtype=np.float64) - np.asarray(theta_star, dtype=np.float64)
    return float(diff @ diff) / (2.0 * eta)


def momentum_bound(theta1, theta_star, J1: float, Jstar: float, eta: float,
                   gamma: float) -> float:
    if not 0 <= gamma < 1:
        raise ValueError("gamma must be in [0,1)")
    if not eta > 0:
        raise ValueError("eta must be positive")
    diff = np.asarray(theta1, dtype=np.float64) - np.asarray(theta_star, dtype=np.float64)
    dist2 = float(diff @ diff)
    if gamma == 0:
        return dist2 / (2.0 * eta)
    return gamma / (1.0 - gamma) * (J1 - Jstar) + (1.0 - gamma) / (2.0 * eta) * dist2


def nag_bound(theta1, theta_star, J1: float, Jstar: float, eta: float, gamma: float) -> float:
    # identical closed form; the two theorems differ in their step-size range
    return momentum_bound(theta1, theta_star, J1, Jstar, eta, gamma)


def column_norms(grads) -> np.ndarray:
    """||g_{1:T,i}||_2 for each coordinate i."""
    G = np.asarray(grads, dtype=np.float64)
    return np.sqrt((G * G).sum(axis=0))


def adagrad_bound(trace, theta_star, eta: float) -> float:
    if trace.T == 0:
        raise ValueError("empty trace")
    if not eta > 0:
        raise ValueError("eta must be positive")
    dist = float(np.max(np.abs(trace.thetas - np.asarray(theta_star)[None, :])))
    total = float(column_norms(trace.grads).sum())
    return dist * dist * total / (2.0 * eta) + eta * total


def trace_diameters(thetas) -> tuple[float, float]:
    """(D, D_inf) for the iterates.

    D_inf (max pairwise sup-norm distance) is exact: the widest per-coordinate
    range. D over-approximates the max pairwise 2-norm distance in O(T) by
    2 max_t ||theta_t - mean||_2, which bounds it by the triangle inequality.
    """
    X = np.asarray(thetas, dtype=np.float64)
    d_inf = float(np.max(X.max(axis=0) - X.min(axis=0)))
    centred = X - X.mean(axis=0)
    d2 = 2.0 * float(np.sqrt(np.max((centred * centred).sum(axis=1))))
    return d2, d_inf


def adam_bound_terms(trace, eta0: float, beta1: float, beta2: float, lam: float) -> dict:
    if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
        raise PreconditionError("beta1 and beta2 must be in [0,1)")
    gamma = beta1 ** 2 / math.sqrt(beta2) if beta2 > 0 else math.inf
    if not gamma < 1:
        raise PreconditionError(f"beta1^2/sqrt(beta2) = {gamma!r} must be below 1")
    if not 0 < lam < 1:
        raise PreconditionError(f"lambda = {lam!r} must be in (0,1)")
    if not eta0 > 0:
        raise ValueError("eta must be positive")
    T = trace.T
    D, D_inf = trace_diameters(trace.thetas)
    L_inf = float(np.max(np.abs(trace.grads))) if trace.grads.size else 0.0
    _, vhat = _kernels.adam_moments(trace.grads, beta1, beta2)
    vhat_T = vhat[-1]
    gnorms = column_norms(trace.grads)
    d = trace.dim
    first = D * D / (2.0 * eta0 * (1.0 - beta1)) * float(np.sqrt(T * vhat_T).sum())
    middle = d * D_inf ** 2 * L_inf / (2.0 * eta0 * (1.0 - beta1) * (1.0 - lam) ** 2)
    last = (eta0 * (beta1 + 1.0) * L_inf
            / ((1.0 - beta1) * math.sqrt(1.0 - beta2) * (1.0 - gamma) ** 2)) * float(gnorms.sum())
    return {"D": D, "D_inf": D_inf, "L_inf": L_inf, "gamma": gamma, "first": first,
            "middle": middle, "last": last, "bound": first + middle + last}


def adam_bound(trace, eta0: float, beta1: float, beta2: float, lam: float) -> float:
    """Regret bound for Adam with eta_t = eta0/sqrt(t) and beta1 decayed by lam^(t-1).

    R(T) <= D^2/(2 eta (1-beta1)) sum_i sqrt(T vhat_{T,i})
            + sum_i D_inf^2 L_inf / (2 eta (1-beta1) (1-lam)^2)
            + eta (beta1+1) L_inf / ((1-beta1) sqrt(1-beta2) (1-gamma)^2) sum_i ||g_{1:T,i}||_2
    with gamma = beta1^2/sqrt(beta2); D, D_inf and L_inf are measured on the trace.
    """
    return adam_bound_terms(trace, eta0, beta1, beta2, lam)["bound"]


# ---------------------------------------------------------------------------
# Certificates


def checkpoints(T: int, max_points: int = MAX_CURVE_POINTS) -> np.ndarray:
    """Log-spaced 1-based step counts, always including 1 and T, at most ``max_points``."""
    if T <= max_points:
        return np.arange(1, T + 1)
    pts = np.unique(np.round(np.logspace(0, math.log10(T), max_points)).astype(np.int64))
    pts = pts[(pts >= 1) & (pts <= T)]
    if pts[-1] != T:
        pts = np.append(pts, T)
    while pts.size > max_points:
        pts = np.delete(pts, pts.size - 2)
    return pts


@dataclass(frozen=True)
class RegretCertificate:
    algorithm: str
    T: int
    regret_curve: np.ndarray
    bound_points: np.ndarray
    bound_curve: np.ndarray
    regret_final: float
    bound_final: float | None
    slack: float | None
    holds: bool | None
    inputs: Mapping[str, Any] = field(default_factory=dict)
    note: str = ""

    @property
    def applicable(self) -> bool:
        return self.holds is not None

    def curve_table(self) -> list[tuple[int, float, float | None, float | None, bool | None]]:
        rows = []
        for k, T in enumerate(self.bound_points):
            regret = float(self.regret_curve[T - 1])
            if self.bound_curve.size:
                bound = float(self.bound_curve[k])
                slack = bound - regret
                rows.append((int(T), regret, bound, slack, slack >= -tolerance(bound)))
            else:
                rows.append((int(T), regret, None, None, None))
        return rows

    def to_dict(self) -> dict:
        pts = self.bound_points
        return {
            "algorithm": self.algorithm,
            "T": self.T,
            "holds": self.holds,
            "note": self.note,
            "regret_final": self.regret_final,
            "bound_final": self.bound_final,
            "slack": self.slack,
            "inputs": dict(self.inputs),
            "curve": {
                "T": [int(t) for t in pts],
                "regret": [float(self.regret_curve[t - 1]) for t in pts],
                "bound": [float(b) for b in self.bound_curve] if self.bound_curve.size else None,
            },
        }

    def to_json(self) -> str:
        return dumps(self.to_dict()) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "regret", "bound", "slack", "holds"])
        for T, regret, bound, slack, ok in self.curve_table():
            fmt = lambda x: "" if x is None else format(x, ".17g")
            w.writerow([T, fmt(regret), fmt(bound), fmt(slack),
                        "" if ok is None else str(ok).lower()])
        return buf.getvalue()


def check_preconditions(obj: Objective, cfg: OptimizerConfig, batch: str = "full") -> None:
    """Raise PreconditionError if the certificate for ``cfg`` on ``obj`` cannot apply.

    Callable before a run, so a step size outside the theorem is reported as
    such rather than as whatever the run does with it.
    """
    if obj.optimum is None or obj.optimal_value is None:
        raise PreconditionError("objective has no known optimum")
    if batch != "full":
        return
    algo = cfg.algo
    if algo in ("sgd", "momentum", "nag"):
        if not obj.smooth:
            raise PreconditionError(f"{algo} certificate needs a smooth objective (no l1 term)")
        L = obj.lipschitz
        if L is None:
            raise PreconditionError("objective has no Lipschitz constant")
        verdict = validate_step_size(algo, cfg.eta, cfg.gamma, L)
        if not verdict:
            raise PreconditionError("; ".join(verdict.violations))
    elif algo == "adam":
        if not cfg.sqrt_t_decay:
            raise PreconditionError("Adam certificate needs eta_t = eta/sqrt(t) (sqrt_t_decay)")
        gamma = cfg.beta1 ** 2 / math.sqrt(cfg.beta2) if cfg.beta2 > 0 else math.inf
        if not gamma < 1:
            raise PreconditionError(f"beta1^2/sqrt(beta2) = {gamma!r} must be below 1")
        if not 0 < cfg.lam < 1:
            raise PreconditionError(f"lambda = {cfg.lam!r} must be in (0,1)")


def certify(trace, obj: Objective, cfg: OptimizerConfig | Mapping) -> RegretCertificate:
    """Evaluate the regret of ``trace`` against its algorithm's bound."""
    if not isinstance(cfg, OptimizerConfig):
        cfg = OptimizerConfig.from_mapping(cfg)
    algo = cfg.algo
    meta_algo = trace.meta.get("algo")
    if meta_algo is not None and meta_algo != algo:
        raise PreconditionError(f"trace was produced by {meta_algo!r}, config says {algo!r}")
    for key, val in (("eta", cfg.eta), ("gamma", cfg.gamma)):
        if key in trace.meta and not math.isclose(float(trace.meta[key]), val, rel_tol=1e-15):
            raise PreconditionError(f"trace {key}={trace.meta[key]!r} disagrees with config {val!r}")
    check_preconditions(obj, cfg, trace.meta.get("batch", "full"))
    theta_star = obj.optimum
    Jstar = obj.optimal_value
    regret = regret_curve(trace, Jstar)
    T = trace.T
    pts = checkpoints(T)
    batch = trace.meta.get("batch", "full")
    base = dict(algorithm=algo, T=T, regret_curve=regret, bound_points=pts,
                regret_final=float(regret[-1]))

    if batch != "full":
        return RegretCertificate(**base, bound_curve=np.array([]), bound_final=None, slack=None,
                                 holds=None, inputs={"batch": batch},
                                 note="stochastic run: empirical regret only, no certificate")

    theta1 = trace.thetas[0]
    J1 = float(trace.losses[0])
    inputs: dict[str, Any] = {"eta": cfg.eta, "theta1_dist": norm2(theta1 - theta_star),
                              "optimal_value": Jstar}
    const = None
    if algo in ("sgd", "momentum", "nag"):
        L = obj.lipschitz
        inputs.update(L=L, gamma=cfg.gamma, J1=J1)
        if algo == "sgd":
            const = sgd_bound(theta1, theta_star, cfg.eta)
        elif algo == "momentum":
            const = momentum_bound(theta1, theta_star, J1, Jstar, cfg.eta, cfg.gamma)
        else:
            const = nag_bound(theta1, theta_star, J1, Jstar, cfg.eta, cfg.gamma)
        bound_curve = np.full(pts.size, const)
    elif algo in ("adagrad", "adagrad_prox"):
        dist = float(np.max(np.abs(trace.thetas - theta_star[None, :])))
        inputs.update(max_dist_inf=dist, epsilon=cfg.epsilon, delta=cfg.delta,
                      grad_column_norms=column_norms(trace.grads).tolist())
        bound_curve = _adagrad_bound_curve(trace, theta_star, cfg.eta, pts)
    else:
        terms = adam_bound_terms(trace, cfg.eta, cfg.beta1, cfg.beta2, cfg.lam)
        inputs.update(beta1=cfg.beta1, beta2=cfg.beta2, lam=cfg.lam, epsilon=cfg.epsilon,
                      **{k: v for k, v in terms.items() if k != "bound"},
                      grad_column_norms=column_norms(trace.grads).tolist())
        bound_curve = _adam_bound_curve(trace, cfg, pts)
    bound_final = float(bound_curve[-1])
    slack = bound_final - float(regret[-1])
    slacks = bound_curve - regret[pts - 1]
    inputs["min_curve_slack"] = float(slacks.min())
    return RegretCertificate(**base, bound_curve=bound_curve, bound_final=bound_final,
                             slack=slack, holds=bool(slack >= -tolerance(bound_final)),
                             inputs=inputs)


def _adagrad_bound_curve(trace, theta_star, eta, pts) -> np.ndarray:
    dist = np.maximum.accumulate(np.max(np.abs(trace.thetas - theta_star[None, :]), axis=1))
    S = _kernels.prefix_sq_norms(trace.grads).sum(axis=1)
    d = dist[pts - 1]
    s = S[pts - 1]
    return d * d * s / (2.0 * eta) + eta * s


def _adam_bound_curve(trace, cfg, pts) -> np.ndarray:
    """adam_bound evaluated on every prefix in ``pts`` (moments are causal, so one pass)."""
    beta1, beta2, lam, eta0 = cfg.beta1, cfg.beta2, cfg.lam, cfg.eta
    gamma = beta1 ** 2 / math.sqrt(beta2)
    G = trace.grads
    _, vhat = _kernels.adam_moments(G, beta1, beta2)
    S = _kernels.prefix_sq_norms(G).sum(axis=1)
    L_inf = np.maximum.accumulate(np.abs(G).max(axis=1))
    d_inf = np.max(np.maximum.accumulate(trace.thetas, axis=0)
                   - np.minimum.accumulate(trace.thetas, axis=0), axis=1)
    d = trace.dim
    out = np.empty(pts.size)
    for k, T in enumerate(pts):
        D, _ = trace_diameters(trace.thetas[:T])
        first = D * D / (2.0 * eta0 * (1.0 - beta1)) * float(np.sqrt(T * vhat[T - 1]).sum())
        middle = d * d_inf[T - 1] ** 2 * L_inf[T - 1] / (2.0 * eta0 * (1.0 - beta1) * (1.0 - lam) ** 2)
        last = (eta0 * (beta1 + 1.0) * L_inf[T - 1]
                / ((1.0 - beta1) * math.sqrt(1.0 - beta2) * (1.0 - gamma) ** 2)) * float(S[T - 1])
        out[k] = first + middle + last
    return out
