"""Update rules as pure state transitions, plus the run loop that records a Trace.

Each ``*_step`` takes a frozen state and a gradient and returns a new state;
inputs are never modified. ``run`` wires a configuration, an objective and a
starting point into a :class:`~regretlab.core.Trace`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .core import STREAM_BATCH, Rng, Trace, check_same_dim, frozen, vector
from .errors import ConfigError, DivergenceError, NonFiniteError
from .problems import NO_REGULARIZER, Objective, RegularizerSpec, soft_threshold

ALGORITHMS = ("sgd", "momentum", "nag", "adagrad", "adagrad_prox", "adam")
DEFAULT_EPSILON = 1e-8


def _grad(g, theta) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    check_same_dim(g, theta)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("gradient has non-finite entries")
    return g


@dataclass(frozen=True)
class SgdState:
    theta: np.ndarray
    eta: float
    t: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")


@dataclass(frozen=True)
class MomentumState:
    theta: np.ndarray
    velocity: np.ndarray
    gamma: float
    eta: float
    t: int = 0

    @classmethod
    def initial(cls, theta, gamma, eta):
        theta = vector(theta)
        return cls(theta, frozen(np.zeros_like(theta)), gamma, eta)


@dataclass(frozen=True)
class NagState:
    y: np.ndarray
    y_prev: np.ndarray
    theta: np.ndarray
    gamma: float
    eta: float
    t: int = 0

    @classmethod
    def initial(cls, theta, gamma, eta):
        theta = vector(theta)
        return cls(theta, theta, theta, gamma, eta)


@dataclass(frozen=True)
class AdagradState:
    theta: np.ndarray
    accum: np.ndarray
    eta: float
    epsilon: float = DEFAULT_EPSILON
    t: int = 0

    @classmethod
    def initial(cls, theta, eta, epsilon=DEFAULT_EPSILON):
        theta = vector(theta)
        return cls(theta, frozen(np.zeros_like(theta)), eta, epsilon)


@dataclass(frozen=True)
class AdamState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    beta1: float
    beta2: float
    lam: float
    eta0: float
    epsilon: float = DEFAULT_EPSILON
    t: int = 0
    sqrt_t_decay: bool = False

    @classmethod
    def initial(cls, theta, eta0, beta1=0.9, beta2=0.999, lam=1.0,
                epsilon=DEFAULT_EPSILON, sqrt_t_decay=False):
        theta = vector(theta)
        z = frozen(np.zeros_like(theta))
        return cls(theta, z, z, beta1, beta2, lam, eta0, epsilon, 0, sqrt_t_decay)

    @property
    def gamma(self) -> float:
        """beta1^2 / sqrt(beta2); the Adam regret theorem needs it below 1."""
        return self.beta1 ** 2 / math.sqrt(self.beta2) if self.beta2 > 0 else math.inf


def sgd_step(s: SgdState, g) -> SgdState:
    g = _grad(g, s.theta)
    return replace(s, theta=frozen(s.theta - s.eta * g), t=s.t + 1)


def momentum_step(s: MomentumState, g) -> MomentumState:
    g = _grad(g, s.theta)
    v = s.gamma * s.velocity - s.eta * g
    return replace(s, theta=frozen(s.theta + v), velocity=frozen(v), t=s.t + 1)


def momentum_oneline_step(theta_t, theta_prev, g, gamma: float, eta: float) -> np.ndarray:
    """theta_t + gamma (theta_t - theta_{t-1}) - eta g, the two-term recurrence."""
    theta_t = np.asarray(theta_t, dtype=np.float64)
    theta_prev = np.asarray(theta_prev, dtype=np.float64)
    check_same_dim(theta_t, theta_prev)
    g = _grad(g, theta_t)
    return frozen(theta_t + gamma * (theta_t - theta_prev) - eta * g)


def nag_step(s: NagState, grad_at: Callable[[np.ndarray], np.ndarray]) -> NagState:
    """Gradient step from theta, then extrapolate along y_{t+1} - y_t."""
    g = _grad(grad_at(s.theta), s.theta)
    y_next = s.theta - s.eta * g
    theta_next = y_next + s.gamma * (y_next - s.y)
    return replace(s, y=frozen(y_next), y_prev=s.y, theta=frozen(theta_next), t=s.t + 1)


def nag_lookahead_step(y, v, gamma: float, eta: float,
                       grad_at: Callable[[np.ndarray], np.ndarray]):
    """Velocity form: evaluate the gradient at the look-ahead point y + gamma v."""
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    check_same_dim(y, v)
    look = y + gamma * v
    g = _grad(grad_at(look), y)
    v_next = gamma * v - eta * g
    return frozen(y + v_next), frozen(v_next)


def adagrad_step(s: AdagradState, g) -> AdagradState:
    """Per-coordinate step eta g_i / sqrt(G_ii + eps).

    A coordinate whose accumulator and epsilon are both zero has only seen
    zero gradients; it is left where it is.
    """
    g = _grad(g, s.theta)
    theta, accum = _kernels.adagrad_update(s.theta, s.accum, g, s.eta, s.epsilon)
    return replace(s, theta=frozen(theta), accum=frozen(accum), t=s.t + 1)


def adagrad_prox_step(s: AdagradState, g, reg: RegularizerSpec = NO_REGULARIZER,
                      delta: float = 0.0) -> AdagradState:
    """Composite step under the diagonal metric w = delta + s_t, s_t = sqrt(accum).

    Solves argmin eta <g, x> + eta phi(x) + 1/2 ||x - theta||_w^2 coordinatewise;
    with an l1 term that is soft-thresholding at eta * weight / w_i.
    """
    if reg.kind not in ("none", "l1"):
        raise ValueError(f"unsupported regularizer {reg.kind!r}")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    g = _grad(g, s.theta)
    accum = s.accum + g * g
    w = delta + np.sqrt(accum)
    dead = w == 0
    if np.any(dead & (g != 0)):
        raise ValueError("zero metric weight on a coordinate with non-zero gradient")
    safe_w = np.where(dead, 1.0, w)
    z = s.theta - s.eta * g / safe_w
    if reg.active:
        # a zero-weight coordinate has no proximity term: argmin of |x| is 0
        z = np.where(dead, 0.0, soft_threshold(z, s.eta * reg.weight / safe_w))
    else:
        z = np.where(dead, s.theta, z)
    return replace(s, theta=frozen(z), accum=frozen(accum), t=s.t + 1)


def adam_step(s: AdamState, g) -> AdamState:
    g = _grad(g, s.theta)
    t = s.t + 1
    bc1 = 1.0 - s.beta1 ** t
    bc2 = 1.0 - s.beta2 ** t
    if bc1 == 0.0 or bc2 == 0.0:
        raise ValueError("bias correction vanishes: beta1 and beta2 must be below 1")
    beta1_t = s.beta1 * s.lam ** (t - 1)
    eta_t = s.eta0 / math.sqrt(t) if s.sqrt_t_decay else s.eta0
    theta, m, v = _kernels.adam_update(s.theta, s.m, s.v, g, beta1_t, s.beta2, bc1, bc2,
                                       eta_t, s.epsilon)
    return replace(s, theta=frozen(theta), m=frozen(m), v=frozen(v), t=t)


# ---------------------------------------------------------------------------
# Configuration


_KEYS = {"algo", "eta", "gamma", "beta1", "beta2", "lambda", "epsilon", "delta",
         "sqrt_t_decay", "T", "batch"}


@dataclass(frozen=True)
class OptimizerConfig:
    algo: str
    eta: float
    gamma: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    lam: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    delta: float = 0.0
    sqrt_t_decay: bool = False
    T: int | None = None
    batch: str = "full"

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ConfigError(errors)

    def problems(self) -> list[str]:
        errs = []
        if self.algo not in ALGORITHMS:
            errs.append(f"unknown algorithm {self.algo!r} (expected one of {', '.join(ALGORITHMS)})")
        if not (isinstance(self.eta, (int, float)) and math.isfinite(self.eta) and self.eta > 0):
            errs.append("eta must be a positive finite number")
        if self.algo in ("momentum", "nag") and not 0 <= self.gamma < 1:
            errs.append("gamma must be in [0,1)")
        if self.algo == "adam":
            if not 0 <= self.beta1 < 1:
                errs.append("beta1 must be in [0,1)")
            if not 0 <= self.beta2 < 1:
                errs.append("beta2 must be in [0,1)")
            if not 0 < self.lam <= 1:
                errs.append("lambda must be in (0,1]")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            errs.append("epsilon must be non-negative")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            errs.append("delta must be non-negative")
        if self.T is not None and self.T < 1:
            errs.append("T must be at least 1")
        if self.batch not in ("full", "minibatch"):
            errs.append("batch must be 'full' or 'minibatch'")
        return errs

    @classmethod
    def from_mapping(cls, record: Mapping) -> "OptimizerConfig":
        unknown = sorted(set(record) - _KEYS)
        if unknown:
            raise ConfigError([f"unknown optimizer key {k!r}" for k in unknown])
        kw = dict(record)
        if "lambda" in kw:
            kw["lam"] = kw.pop("lambda")
        if "algo" not in kw or "eta" not in kw:
            raise ConfigError([f"missing required optimizer key {k!r}"
                               for k in ("algo", "eta") if k not in kw])
        return cls(**kw)

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def init_state(cfg: OptimizerConfig, theta0):
    theta0 = vector(theta0)
    if cfg.algo == "sgd":
        return SgdState(theta0, cfg.eta)
    if cfg.algo == "momentum":
        return MomentumState.initial(theta0, cfg.gamma, cfg.eta)
    if cfg.algo == "nag":
        return NagState.initial(theta0, cfg.gamma, cfg.eta)
    if cfg.algo in ("adagrad", "adagrad_prox"):
        return AdagradState.initial(theta0, cfg.eta, cfg.epsilon)
    return AdamState.initial(theta0, cfg.eta, cfg.beta1, cfg.beta2, cfg.lam, cfg.epsilon,
                             cfg.sqrt_t_decay)


class _BatchSchedule:
    """Fresh seeded permutation of the batch indices at the start of every epoch."""

    def __init__(self, batch_count: int, seed: int):
        self.batch_count = batch_count
        self.rng = Rng(seed, (STREAM_BATCH,))
        self.order: list[int] = []

    def next(self) -> int:
        if not self.order:
            self.order = [int(k) for k in self.rng.permutation(self.batch_count)][::-1]
        return self.order.pop()


def run(cfg: OptimizerConfig, obj: Objective, theta0, T: int | None = None,
        batch: str | None = None, seed: int = 0, meta: Mapping | None = None) -> Trace:
    """Run ``T`` updates from ``theta0`` and record every iterate.

    Step t records theta_t, the gradient actually fed to the update, and the
    full objective J(theta_t). ``batch='minibatch'`` feeds one mini-batch
    gradient per step following a seeded per-epoch permutation.
    """
    T = cfg.T if T is None else T
    if T is None or T < 1:
        raise ValueError("T must be at least 1")
    batch = cfg.batch if batch is None else batch
    if batch not in ("full", "minibatch"):
        raise ValueError(f"unknown batch mode {batch!r}")
    state = init_state(cfg, theta0)
    if state.theta.size != obj.dim:
        raise ValueError(f"theta0 has dimension {state.theta.size}, objective has {obj.dim}")

    composite = cfg.algo == "adagrad_prox"
    schedule = _BatchSchedule(obj.batch_count, seed) if batch == "minibatch" else None

    def oracle(theta, k):
        if k is None:
            return obj.gradient(theta) if composite else obj.subgradient(theta)
        return obj.batch_gradient(theta, k) if composite else obj.batch_subgradient(theta, k)

    thetas = np.empty((T, obj.dim))
    grads = np.empty((T, obj.dim))
    losses = np.empty(T)
    run_meta = {"algo": cfg.algo, **cfg.to_mapping(), "T": T, "batch": batch, "seed": seed}
    run_meta.update(meta or {})

    def partial(n):
        return Trace(thetas[:n], grads[:n], losses[:n], run_meta)

    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            theta = state.theta
            batch_index = schedule.next() if schedule else None
            thetas[k] = theta
            losses[k] = obj.value(theta)
            g = oracle(theta, batch_index)
            grads[k] = g
            if cfg.algo == "sgd":
                state = sgd_step(state, g)
            elif cfg.algo == "momentum":
                state = momentum_step(state, g)
            elif cfg.algo == "nag":
                state = nag_step(state, lambda _x, _g=g: _g)
            elif cfg.algo == "adagrad":
                state = adagrad_step(state, g)
            elif cfg.algo == "adagrad_prox":
                state = adagrad_prox_step(state, g, obj.regularizer, cfg.delta)
            else:
                state = adam_step(state, g)
            if not (np.all(np.isfinite(state.theta)) and math.isfinite(losses[k])):
                # keep only fully finite records so the partial trace stays serializable
                n = k + 1 if math.isfinite(losses[k]) and np.all(np.isfinite(g)) else k
                raise DivergenceError(f"{cfg.algo} diverged at step {k + 1}", partial(n))
    return Trace(thetas, grads, losses, run_meta, state.theta)
