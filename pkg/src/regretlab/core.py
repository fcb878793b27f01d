"""Vectors, norms, gradient histories, traces and seeded randomness.

Parameter vectors are plain 1-D ``float64`` numpy arrays marked read-only.
Every function here returns new arrays; nothing mutates its inputs.

Randomness uses numpy's ``PCG64`` bit generator seeded through
``SeedSequence``. Sub-streams are derived with ``spawn_key`` so a single root
seed deterministically feeds problem generation, batch shuffling and lemma
trials.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, NonFiniteError

ParamVector = np.ndarray

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence"

# Named sub-streams of a root seed.
STREAM_PROBLEM = 1
STREAM_BATCH = 2
STREAM_LEMMA = 3
STREAM_THETA0 = 4


def vector(values, dim: int | None = None) -> ParamVector:
    """Validate ``values`` as a finite 1-D vector and return a read-only copy."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("vector has non-finite entries")
    arr.flags.writeable = False
    return arr


def zeros(dim: int) -> ParamVector:
    return vector(np.zeros(dim))


def frozen(arr: np.ndarray) -> np.ndarray:
    """Mark an array we just built as read-only and return it."""
    arr.flags.writeable = False
    return arr


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dot(a: ParamVector, b: ParamVector) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_dim(a, b)
    return float(np.dot(a, b))


def norm2(a: ParamVector) -> float:
    a = np.asarray(a, dtype=np.float64)
    return math.sqrt(float(np.dot(a, a)))


def norm_inf(a: ParamVector) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.max(np.abs(a))) if a.size else 0.0


def mahalanobis_norm(a: ParamVector, weights: ParamVector) -> float:
    """Norm induced by the diagonal metric ``diag(weights)``."""
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    check_same_dim(a, w)
    if np.any(w < 0):
        raise ValueError("Mahalanobis weights must be non-negative")
    return math.sqrt(float(np.dot(w, a * a)))


class GradientHistory:
    """The gradient columns g_1..g_T stacked as a read-only ``(T, d)`` array."""

    __slots__ = ("array",)

    def __init__(self, columns: Iterable[Sequence[float]] | np.ndarray):
        arr = np.array(columns, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DimensionError("gradient history must be a sequence of equal-length vectors")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("gradient history has non-finite entries")
        self.array = frozen(np.ascontiguousarray(arr))

    @property
    def T(self) -> int:
        return self.array.shape[0]

    @property
    def dim(self) -> int:
        return self.array.shape[1]

    def __len__(self) -> int:
        return self.T

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.array)

    def __repr__(self) -> str:
        return f"GradientHistory(T={self.T}, dim={self.dim})"


def prefix_column_norms(h: GradientHistory) -> np.ndarray:
    """Row t holds s_t, with s_{t,i} = ||g_{1:t,i}||_2."""
    if not isinstance(h, GradientHistory):
        h = GradientHistory(h)
    if h.T == 0:
        raise ValueError("prefix norms of an empty gradient history")
    return frozen(_kernels.prefix_sq_norms(h.array))


# ---------------------------------------------------------------------------
# Traces


@dataclass(frozen=True)
class StepRecord:
    t: int
    theta: ParamVector
    grad: ParamVector
    loss: float


@dataclass(frozen=True)
class Trace:
    """Immutable record of one optimizer run.

    Row ``k`` of ``thetas``/``grads``/``losses`` is step ``t = k + 1``: the
    iterate theta_t, the gradient fed to the update at that iterate, and the
    full objective J(theta_t). ``final_theta`` is the iterate produced by the
    last update (theta_{T+1}).
    """

    thetas: np.ndarray
    grads: np.ndarray
    losses: np.ndarray
    meta: Mapping[str, Any] = field(default_factory=dict)
    final_theta: ParamVector | None = None

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=np.float64)
        grads = np.array(self.grads, dtype=np.float64)
        losses = np.array(self.losses, dtype=np.float64).reshape(-1)
        if thetas.ndim != 2 or grads.shape != thetas.shape or losses.shape[0] != thetas.shape[0]:
            raise DimensionError("trace arrays must share one length and one dimension")
        object.__setattr__(self, "thetas", frozen(thetas))
        object.__setattr__(self, "grads", frozen(grads))
        object.__setattr__(self, "losses", frozen(losses))
        object.__setattr__(self, "meta", dict(self.meta))
        if self.final_theta is not None:
            object.__setattr__(self, "final_theta", vector(self.final_theta, thetas.shape[1]))

    @property
    def T(self) -> int:
        return self.thetas.shape[0]

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    def __len__(self) -> int:
        return self.T

    @property
    def steps(self) -> list[StepRecord]:
        return [
            StepRecord(k + 1, self.thetas[k], self.grads[k], float(self.losses[k]))
            for k in range(self.T)
        ]

    def gradient_history(self) -> GradientHistory:
        return GradientHistory(self.grads)

    def prefix(self, T: int) -> "Trace":
        """The first ``T`` steps; ``final_theta`` becomes theta_{T+1} when known."""
        if not 1 <= T <= self.T:
            raise ValueError(f"prefix length {T} outside 1..{self.T}")
        final = self.thetas[T] if T < self.T else self.final_theta
        return Trace(self.thetas[:T], self.grads[:T], self.losses[:T], self.meta, final)


def format_float(x: float) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"cannot serialize non-finite value {x}")
    text = format(x, ".17g")
    # JSON reads a bare "-0" as the integer 0 and drops the sign
    return "-0.0" if text == "-0" else text


def dumps(obj: Any) -> str:
    """Compact JSON where every float is written with 17 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, Mapping):
        items = (f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items())
        return "{" + ",".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def trace_to_jsonl(trace: Trace) -> str:
    header = {"meta": trace.meta}
    if trace.final_theta is not None:
        header["final_theta"] = trace.final_theta
    lines = [dumps(header)]
    for k in range(trace.T):
        lines.append(
            dumps({"t": k + 1, "theta": trace.thetas[k], "grad": trace.grads[k],
                   "loss": float(trace.losses[k])})
        )
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trace file")
    header = json.loads(lines[0])
    if "meta" not in header:
        raise ValueError("trace header line must carry 'meta'")
    thetas, grads, losses = [], [], []
    for expected_t, line in enumerate(lines[1:], start=1):
        rec = json.loads(line)
        if rec["t"] != expected_t:
            raise ValueError(f"trace step {rec['t']} out of order (expected {expected_t})")
        thetas.append(rec["theta"])
        grads.append(rec["grad"])
        losses.append(rec["loss"])
    if not thetas:
        raise ValueError("trace has no steps")
    return Trace(np.array(thetas), np.array(grads), np.array(losses), header["meta"],
                 header.get("final_theta"))


def write_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace_to_jsonl(trace))


def read_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return trace_from_jsonl(fh.read())


# ---------------------------------------------------------------------------
# Randomness


class Rng:
    """Seeded generator; identical seeds give identical streams everywhere."""

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "Rng":
        """Independent stream for a named sub-task (does not consume this stream)."""
        return Rng(self.seed, self.spawn_key + tuple(key))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, spawn_key={self.spawn_key})"

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)


def as_rng(seed) -> Rng:
    return seed if isinstance(seed, Rng) else Rng(seed)
