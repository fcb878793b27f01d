"""Convex test objectives with hand-coded gradients.

Every objective exposes the full loss J = f + phi, the gradient of the smooth
part f, a subgradient of J, an optional optimum and the Lipschitz constant of
grad f. Data-backed objectives are split into mini-batches whose average
reproduces the full loss and gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .core import Rng, as_rng, frozen, norm2
from .errors import ConvergenceError, DimensionError, PreconditionError

SYMMETRY_TOL = 1e-12
EIGEN_TOL = 1e-10
LIPSCHITZ_TOL = 1e-13
OPTIMUM_GRAD_TOL = 1e-10


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str = "none"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "l1"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ValueError("regularizer weight must be finite and non-negative")

    @property
    def active(self) -> bool:
        return self.kind == "l1" and self.weight > 0

    def value(self, theta) -> float:
        return self.weight * float(np.abs(theta).sum()) if self.active else 0.0

    def subgradient(self, theta) -> np.ndarray:
        if not self.active:
            return np.zeros_like(theta)
        return self.weight * np.sign(theta)


NO_REGULARIZER = RegularizerSpec()


@dataclass(frozen=True)
class QuadraticSpec:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise DimensionError("quadratic needs a square A matching b")
        if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(A))):
            raise ValueError("A is not symmetric")
        if np.linalg.eigvalsh(A).min() < -EIGEN_TOL:
            raise ValueError("A is not positive semidefinite")
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "b", frozen(b))


def lipschitz_power_iteration(matvec: Callable[[np.ndarray], np.ndarray], dim: int,
                              tol: float = LIPSCHITZ_TOL, max_iter: int = 100_000,
                              seed: int = 0) -> float:
    """Dominant eigenvalue of a symmetric PSD operator by power iteration.

    Stops when successive Rayleigh quotients differ by less than ``tol``
    relative. Raises ``ConvergenceError`` carrying the last estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = Rng(seed).normal(dim) + 1.0
    x /= norm2(x)
    prev = None
    rq = 0.0
    for _ in range(max_iter):
        y = np.asarray(matvec(x), dtype=np.float64)
        rq = float(np.dot(x, y))
        ny = norm2(y)
        if ny == 0.0:
            return 0.0
        if prev is not None and abs(rq - prev) < tol * max(abs(rq), np.finfo(float).tiny):
            return rq
        prev = rq
        x = y / ny
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", rq)


class Objective:
    """Base class; subclasses implement ``smooth_value``/``smooth_gradient``."""

    kind = "objective"

    def __init__(self, dim: int, regularizer: RegularizerSpec = NO_REGULARIZER,
                 batch_count: int = 1):
        if dim < 1:
            raise ValueError("dimension must be positive")
        if batch_count < 1:
            raise ValueError("batch_count must be at least 1")
        self.dim = int(dim)
        self.regularizer = regularizer
        self.batch_count = int(batch_count)

    # smooth part -----------------------------------------------------------
    def smooth_value(self, theta) -> float:
        raise NotImplementedError

    def smooth_gradient(self, theta) -> np.ndarray:
        raise NotImplementedError

    def batch_smooth_value(self, theta, k: int) -> float:
        self._check_batch(k)
        return self.smooth_value(theta)

    def batch_smooth_gradient(self, theta, k: int) -> np.ndarray:
        self._check_batch(k)
        return self.smooth_gradient(theta)

    # full objective --------------------------------------------------------
    def value(self, theta) -> float:
        theta = self._arg(theta)
        return self.smooth_value(theta) + self.regularizer.value(theta)

    def gradient(self, theta) -> np.ndarray:
        """Gradient of the smooth part f (equal to grad J without a regularizer)."""
        return frozen(self.smooth_gradient(self._arg(theta)))

    def subgradient(self, theta) -> np.ndarray:
        theta = self._arg(theta)
        return frozen(self.smooth_gradient(theta) + self.regularizer.subgradient(theta))

    def batch_value(self, theta, k: int) -> float:
        theta = self._arg(theta)
        return self.batch_smooth_value(theta, k) + self.regularizer.value(theta)

    def batch_gradient(self, theta, k: int) -> np.ndarray:
        return frozen(self.batch_smooth_gradient(self._arg(theta), k))

    def batch_subgradient(self, theta, k: int) -> np.ndarray:
        theta = self._arg(theta)
        return frozen(self.batch_smooth_gradient(theta, k) + self.regularizer.subgradient(theta))

    @property
    def smooth(self) -> bool:
        return not self.regularizer.active

    @property
    def lipschitz(self) -> float | None:
        return None

    @property
    def optimum(self) -> np.ndarray | None:
        return None

    @property
    def optimal_value(self) -> float | None:
        opt = self.optimum
        return None if opt is None else self.value(opt)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _arg(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise DimensionError(f"expected a {self.dim}-vector, got shape {theta.shape}")
        return theta

    def _check_batch(self, k: int) -> None:
        if not 0 <= k < self.batch_count:
            raise IndexError(f"batch index {k} outside 0..{self.batch_count - 1}")

    def _reg_dict(self) -> dict:
        return {"kind": self.regularizer.kind, "weight": self.regularizer.weight}


class QuadraticObjective(Objective):
    """J(theta) = 1/2 <theta, A theta> - <b, theta>."""

    kind = "quadratic"

    def __init__(self, spec: QuadraticSpec, with_optimum: bool = True,
                 regularizer: RegularizerSpec = NO_REGULARIZER):
        super().__init__(spec.b.size, regularizer)
        self.spec = spec
        self.A = spec.A
        self.b = spec.b
        self.with_optimum = with_optimum
        if with_optimum:
            eig = np.linalg.eigvalsh(self.A)
            if eig.min() <= EIGEN_TOL * max(1.0, eig.max()):
                raise PreconditionError("A is singular; the optimum is not unique")
            if regularizer.active:
                self._optimum = _prox_gradient_optimum(self)
            else:
                self._optimum = frozen(np.linalg.solve(self.A, self.b))
        else:
            self._optimum = None

    def smooth_value(self, theta):
        return 0.5 * float(theta @ (self.A @ theta)) - float(self.b @ theta)

    def smooth_gradient(self, theta):
        return self.A @ theta - self.b

    @cached_property
    def _lipschitz(self):
        return lipschitz_power_iteration(lambda x: self.A @ x, self.dim)

    @property
    def lipschitz(self):
        return self._lipschitz

    @property
    def optimum(self):
        return self._optimum

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist(),
                "with_optimum": self.with_optimum, "regularizer": self._reg_dict()}


def make_quadratic(spec: QuadraticSpec, with_optimum: bool = True,
                   regularizer: RegularizerSpec = NO_REGULARIZER) -> QuadraticObjective:
    return QuadraticObjective(spec, with_optimum, regularizer)


def random_spd(dim: int, seed, ridge: float = 0.1) -> np.ndarray:
    """Gram matrix B^T B / dim plus ``ridge`` times the identity."""
    rng = as_rng(seed)
    B = rng.normal((dim, dim))
    A = B.T @ B / dim + ridge * np.eye(dim)
    return 0.5 * (A + A.T)


def make_random_quadratic(dim: int, seed, ridge: float = 0.1) -> QuadraticObjective:
    rng = as_rng(seed)
    A = random_spd(dim, rng.child(0), ridge)
    b = rng.child(1).normal(dim)
    return make_quadratic(QuadraticSpec(A, b))


def _batch_partition(n: int, batch_count: int, seed) -> list[np.ndarray]:
    """Contiguous chunks of a seeded permutation of 0..n-1."""
    if not 1 <= batch_count <= n:
        raise ValueError(f"batch_count must be in 1..{n}")
    perm = as_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, batch_count)]


class _DataObjective(Objective):
    """Shared plumbing for objectives defined by a data matrix X (n x d)."""

    def __init__(self, X, targets, regularizer, batch_count, batch_seed):
        X = np.array(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError("X must be a non-empty n x d matrix")
        targets = np.array(targets, dtype=np.float64).reshape(-1)
        if targets.size != X.shape[0]:
            raise DimensionError("X and targets disagree on the number of rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(targets))):
            raise ValueError("data must be finite")
        super().__init__(X.shape[1], regularizer, batch_count)
        self.X = frozen(X)
        self.n = X.shape[0]
        self.batch_seed = int(batch_seed)
        self.batches = _batch_partition(self.n, self.batch_count, self.batch_seed)

    @cached_property
    def gram_lambda_max(self) -> float:
        return lipschitz_power_iteration(lambda v: self.X.T @ (self.X @ v), self.dim)


class LeastSquaresObjective(_DataObjective):
    """J(theta) = 1/2 ||X theta - y||^2 (a sum over rows, not a mean)."""

    kind = "least_squares"

    def __init__(self, X, y, regularizer=NO_REGULARIZER, batch_count=1, batch_seed=0):
        super().__init__(X, y, regularizer, batch_count, batch_seed)
        self.y = frozen(np.array(y, dtype=np.float64).reshape(-1))

    def smooth_value(self, theta):
        r = self.X @ theta - self.y
        return 0.5 * float(r @ r)

    def smooth_gradient(self, theta):
        return self.X.T @ (self.X @ theta - self.y)

    # batch k carries weight batch_count so the batch average is the full sum
    def batch_smooth_value(self, theta, k):
        self._check_batch(k)
        idx = self.batches[k]
        r = self.X[idx] @ theta - self.y[idx]
        return 0.5 * self.batch_count * float(r @ r)

    def batch_smooth_gradient(self, theta, k):
        self._check_batch(k)
        idx = self.batches[k]
        Xk = self.X[idx]
        return self.batch_count * (Xk.T @ (Xk @ theta - self.y[idx]))

    @property
    def lipschitz(self):
        return self.gram_lambda_max

    @cached_property
    def _optimum(self):
        if np.linalg.matrix_rank(self.X) < self.dim:
            return None
        if self.regularizer.active:
            return _prox_gradient_optimum(self)
        return frozen(np.linalg.solve(self.X.T @ self.X, self.X.T @ self.y))

    @property
    def optimum(self):
        return self._optimum

    def to_dict(self):
        return {"kind": self.kind, "X": self.X.tolist(), "y": self.y.tolist(),
                "regularizer": self._reg_dict(), "batch_count": self.batch_count,
                "batch_seed": self.batch_seed}


def make_least_squares(X, y, regularizer=NO_REGULARIZER, batch_count=1,
                       batch_seed=0) -> LeastSquaresObjective:
    return LeastSquaresObjective(X, y, regularizer, batch_count, batch_seed)


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


class LogisticObjective(_DataObjective):
    """Mean logistic loss plus (l2_weight / 2) ||theta||^2; labels are +-1."""

    kind = "logistic"

    def __init__(self, X, labels, l2_weight=0.0, regularizer=NO_REGULARIZER,
                 batch_count=1, batch_seed=0):
        labels = np.array(labels, dtype=np.float64).reshape(-1)
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not math.isfinite(l2_weight) or l2_weight < 0:
            raise ValueError("l2_weight must be finite and non-negative")
        super().__init__(X, labels, regularizer, batch_count, batch_seed)
        self.labels = frozen(labels)
        self.l2_weight = float(l2_weight)

    def _loss_rows(self, theta, idx=slice(None)):
        return _log1pexp(-self.labels[idx] * (self.X[idx] @ theta))

    def _grad_rows(self, theta, idx=slice(None)):
        Xi = self.X[idx]
        yi = self.labels[idx]
        coef = -yi * _sigmoid(-yi * (Xi @ theta))
        return Xi.T @ coef

    def smooth_value(self, theta):
        return float(self._loss_rows(theta).sum()) / self.n + 0.5 * self.l2_weight * float(theta @ theta)

    def smooth_gradient(self, theta):
        return self._grad_rows(theta) / self.n + self.l2_weight * theta

    def batch_smooth_value(self, theta, k):
        self._check_batch(k)
        rows = float(self._loss_rows(theta, self.batches[k]).sum())
        return self.batch_count * rows / self.n + 0.5 * self.l2_weight * float(theta @ theta)

    def batch_smooth_gradient(self, theta, k):
        self._check_batch(k)
        return (self.batch_count * self._grad_rows(theta, self.batches[k]) / self.n
                + self.l2_weight * theta)

    @property
    def lipschitz(self):
        # sigmoid' <= 1/4
        return self.gram_lambda_max / (4.0 * self.n) + self.l2_weight

    @cached_property
    def _optimum(self):
        return reference_optimum(self)

    @property
    def optimum(self):
        return self._optimum

    def to_dict(self):
        return {"kind": self.kind, "X": self.X.tolist(), "labels": self.labels.tolist(),
                "l2_weight": self.l2_weight, "regularizer": self._reg_dict(),
                "batch_count": self.batch_count, "batch_seed": self.batch_seed}


def make_logistic(X, labels, l2_weight=0.0, regularizer=NO_REGULARIZER, batch_count=1,
                  batch_seed=0) -> LogisticObjective:
    return LogisticObjective(X, labels, l2_weight, regularizer, batch_count, batch_seed)


def reference_optimum(obj: Objective, grad_tol: float = OPTIMUM_GRAD_TOL,
                      max_iter: int = 1_000_000) -> np.ndarray:
    """High-accuracy full-batch solve used where no closed form exists.

    Smooth objectives: gradient descent with step 1/L until ||grad J|| <= grad_tol.
    With an l1 term: proximal gradient until the gradient mapping is that small.
    """
    if obj.regularizer.active:
        return _prox_gradient_optimum(obj, grad_tol, max_iter)
    L = obj.lipschitz
    if L is None or L <= 0:
        if L == 0:
            return frozen(np.zeros(obj.dim))
        raise PreconditionError("reference solver needs a positive Lipschitz constant")
    eta = 1.0 / L
    theta = np.zeros(obj.dim)
    for _ in range(max_iter):
        g = obj.smooth_gradient(theta)
        if norm2(g) <= grad_tol:
            return frozen(theta)
        theta = theta - eta * g
    raise ConvergenceError("reference solver did not reach the gradient tolerance", theta)


def soft_threshold(z, tau):
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def _prox_gradient_optimum(obj: Objective, tol: float = OPTIMUM_GRAD_TOL,
                           max_iter: int = 1_000_000) -> np.ndarray:
    L = obj.lipschitz
    eta = 1.0 / L
    lam = obj.regularizer.weight
    theta = np.zeros(obj.dim)
    for _ in range(max_iter):
        nxt = soft_threshold(theta - eta * obj.smooth_gradient(theta), eta * lam)
        if norm2(nxt - theta) * L <= tol:
            return frozen(nxt)
        theta = nxt
    raise ConvergenceError("proximal reference solver did not converge", theta)


def make_sparse_problem(d: int, density: float, seed, n_rows: int | None = None,
                        noise: float = 0.1, batch_count: int | None = None,
                        regularizer: RegularizerSpec = NO_REGULARIZER) -> LeastSquaresObjective:
    """Least squares whose rows each touch ceil(density * d) coordinates.

    Coordinates are drawn with power-law frequencies (weight 1/(i+1)) so some
    features are common and others rare; the first rows cover every coordinate
    once so X has full column rank with high probability. By default each row
    is its own mini-batch, so batch gradients are as sparse as the rows.
    """
    if d < 2:
        raise ValueError("sparse problems need d >= 2")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = as_rng(seed)
    k = min(d, math.ceil(density * d - 1e-12))
    n = 4 * d if n_rows is None else int(n_rows)
    layout = rng.child(0)
    weights = 1.0 / np.arange(1, d + 1)
    weights /= weights.sum()
    cover = layout.permutation(d)
    n_cover = math.ceil(d / k)
    if n < n_cover:
        raise ValueError(f"need at least {n_cover} rows to touch every coordinate")
    support = []
    for r in range(n):
        if r < n_cover:
            cols = cover[r * k:(r + 1) * k]
            if cols.size < k:
                rest = np.setdiff1d(np.arange(d), cols)
                cols = np.concatenate([cols, layout.choice(rest, k - cols.size, replace=False)])
        else:
            cols = layout.choice(d, k, replace=False, p=weights)
        support.append(np.sort(cols))
    values = rng.child(1).normal((n, k))
    X = np.zeros((n, d))
    for r, cols in enumerate(support):
        X[r, cols] = values[r]
    theta_true = rng.child(2).normal(d)
    y = X @ theta_true + noise * rng.child(3).normal(n)
    return LeastSquaresObjective(X, y, regularizer, n if batch_count is None else batch_count,
                                 batch_seed=int(rng.child(4).integers(0, 2**31)))


def check_gradient(obj: Objective, theta, h: float = 1e-5) -> float:
    """Max coordinate error between central differences of J and its subgradient."""
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.array(theta, dtype=np.float64)
    g = obj.subgradient(theta)
    worst = 0.0
    for i in range(obj.dim):
        e = np.zeros(obj.dim)
        e[i] = h
        fd = (obj.value(theta + e) - obj.value(theta - e)) / (2 * h)
        worst = max(worst, abs(fd - g[i]))
    return worst


@dataclass(frozen=True)
class StepSizeVerdict:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok


def validate_step_size(algorithm: str, eta: float, gamma: float, L: float) -> StepSizeVerdict:
    """Step-size hypotheses of the GD, heavy-ball and NAG regret theorems."""
    if not L > 0:
        raise ValueError("L must be positive")
    bad = []
    if algorithm == "sgd":
        if not 0 < eta <= 1.0 / L:
            bad.append(f"step size {eta!r} outside (0,1/L] = (0,{1.0 / L!r}]")
    elif algorithm in ("momentum", "nag"):
        if not 0 <= gamma < 1:
            bad.append(f"gamma {gamma!r} must be in [0,1)")
        limit = (1.0 - gamma) / L if algorithm == "momentum" else 1.0 / L
        label = "(1-gamma)/L" if algorithm == "momentum" else "1/L"
        if not 0 < eta <= limit:
            bad.append(f"step size {eta!r} outside (0,{label}] = (0,{limit!r}]")
    else:
        raise ValueError(f"no step-size condition for algorithm {algorithm!r}")
    return StepSizeVerdict(not bad, tuple(bad))


# ---------------------------------------------------------------------------
# JSON round trip


def objective_from_dict(doc: dict) -> Objective:
    reg = RegularizerSpec(**doc.get("regularizer", {"kind": "none", "weight": 0.0}))
    kind = doc.get("kind")
    if kind == "quadratic":
        return QuadraticObjective(QuadraticSpec(np.array(doc["A"]), np.array(doc["b"])),
                                  doc.get("with_optimum", True), reg)
    if kind == "least_squares":
        return LeastSquaresObjective(np.array(doc["X"]), np.array(doc["y"]), reg,
                                     doc.get("batch_count", 1), doc.get("batch_seed", 0))
    if kind == "logistic":
        return LogisticObjective(np.array(doc["X"]), np.array(doc["labels"]),
                                 doc.get("l2_weight", 0.0), reg, doc.get("batch_count", 1),
                                 doc.get("batch_seed", 0))
    raise ValueError(f"unknown objective kind {kind!r}")


def objective_to_json(obj: Objective) -> str:
    from .core import dumps
    return dumps(obj.to_dict())


def objective_from_json(text: str) -> Objective:
    import json
    return objective_from_dict(json.loads(text))


def make_random_logistic(n: int, d: int, seed, l2_weight: float = 0.1,
                         batch_count: int = 1) -> LogisticObjective:
    rng = as_rng(seed)
    X = rng.child(0).normal((n, d))
    w = rng.child(1).normal(d)
    flip = rng.child(2).uniform(size=n) < 0.1
    labels = np.where((X @ w > 0) ^ flip, 1.0, -1.0)
    return make_logistic(X, labels, l2_weight, batch_count=batch_count,
                         batch_seed=int(rng.child(3).integers(0, 2**31)))


def make_random_least_squares(n: int, d: int, seed, batch_count: int = 1) -> LeastSquaresObjective:
    rng = as_rng(seed)
    X = rng.child(0).normal((n, d))
    y = rng.child(1).normal(n)
    return make_least_squares(X, y, batch_count=batch_count,
                              batch_seed=int(rng.child(2).integers(0, 2**31)))
