"""Shared currency for every algorithm in the package.

Parameters are a single flat float64 vector; structured models are
flattened through a recorded :class:`ParamLayout`.  Randomness comes from
counter-based Philox streams keyed by ``(seed, stream_id)`` so that
parallel chains never need to coordinate.  Log posteriors follow one
convention everywhere: a minibatch estimate is the mean per-sample
log-likelihood plus ``1/N`` times the log prior, so its expectation over
uniformly drawn batches equals ``log_posterior(theta) / N`` up to an
additive constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np

Array = np.ndarray


class NonFiniteError(RuntimeError):
    """A NaN or Inf appeared where finite values are required.

    ``index`` is the offending coordinate when it can be identified,
    otherwise None.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DivergenceError(RuntimeError):
    """A trajectory left the finite region; ``step`` is the failing step."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


def as_params(values) -> Array:
    """Coerce to a flat float64 parameter vector, rejecting non-finite entries."""
    theta = np.atleast_1d(np.asarray(values, dtype=float))
    if theta.ndim != 1:
        raise ValueError(f"parameter vector must be 1-d, got shape {theta.shape}")
    check_finite(theta, "parameter vector")
    return theta


def check_finite(theta: Array, context: str = "values") -> None:
    """Raise :class:`NonFiniteError` (with coordinate index) on NaN/Inf."""
    finite = np.isfinite(theta)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise NonFiniteError(f"non-finite {context} at index {idx}", index=idx)


def axpy(a: float, x: Array, y: Array) -> Array:
    """Return ``a * x + y`` elementwise.

    Dimensions must match; a non-finite result raises rather than
    propagating silently.
    """
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    out = a * x + y
    check_finite(out, "axpy result")
    return out


@dataclass(frozen=True)
class RngStream:
    """A reproducible, splittable random stream.

    Distinct ``(seed, stream_id)`` pairs yield statistically independent
    Philox streams; identical pairs reproduce bit-identical draws.
    ``child`` derives further independent sub-streams (one per draw site)
    without any cross-stream coordination.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, *self.path)
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + keys)

    def integer(self) -> int:
        """A deterministic 63-bit integer, e.g. for epoch shuffle seeds."""
        return int(self.generator().integers(0, 2**63 - 1))


def gaussian_noise(dim: int, rng: np.random.Generator | RngStream) -> Array:
    """``dim`` independent standard-normal draws; advances ``rng`` if a Generator."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    return rng.standard_normal(dim)


@dataclass(frozen=True)
class Batch:
    """A minibatch plus the size N of the full dataset it was drawn from."""

    inputs: Array
    targets: Array
    total_data_size: int

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")
        if self.batch_size > self.total_data_size:
            raise ValueError("batch_size cannot exceed total_data_size")

    @property
    def batch_size(self) -> int:
        return len(self.inputs)


class LogPosteriorResult(NamedTuple):
    value: float
    aux: Any = None


LogPosteriorFn = Callable[[Array, Batch], LogPosteriorResult]


def normalized_log_posterior(
    model: LogPosteriorFn, params: Array, batch: Batch
) -> LogPosteriorResult:
    """Evaluate a batch-normalised log-posterior estimate.

    The model must return ``mean_i log p(y_i | theta) + log p(theta) / N``;
    this wrapper only enforces finiteness, raising with the offending
    parameter index when one exists.
    """
    finite = np.isfinite(params)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise NonFiniteError(f"non-finite parameter at index {idx}", index=idx)
    result = model(params, batch)
    if not np.isfinite(result.value):
        raise NonFiniteError("non-finite log-posterior value")
    return result


class Transform(NamedTuple):
    """The functional contract every algorithm implements.

    ``init`` maps a parameter vector to an algorithm state and never
    consumes randomness; ``update`` maps (state, batch, rng) to a new
    state and is deterministic given the rng stream position.  States are
    immutable values, safe to share across threads.
    """

    init: Callable
    update: Callable


@dataclass(frozen=True)
class ParamLayout:
    """Recorded flattening of structured parameters into one flat vector.

    ``shapes`` lists the leaf tensors in order; ``split``/``flatten``
    convert between the flat vector and the leaf list.
    """

    shapes: tuple[tuple[int, ...], ...]
    offsets: tuple[int, ...] = field(init=False)
    size: int = field(init=False)

    def __post_init__(self):
        sizes = [int(np.prod(s, dtype=int)) for s in self.shapes]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))
        object.__setattr__(self, "size", int(offsets[-1]))

    @classmethod
    def flat(cls, dim: int) -> "ParamLayout":
        return cls(((dim,),))

    def split(self, theta: Array) -> list[Array]:
        if theta.size != self.size:
            raise ValueError(f"expected {self.size} parameters, got {theta.size}")
        return [
            theta[a:b].reshape(shape)
            for a, b, shape in zip(self.offsets[:-1], self.offsets[1:], self.shapes)
        ]

    def flatten(self, leaves) -> Array:
        parts = []
        for leaf, shape in zip(leaves, self.shapes):
            if leaf is None:
                parts.append(np.zeros(int(np.prod(shape, dtype=int))))
            else:
                parts.append(np.asarray(leaf, dtype=float).ravel())
        return np.concatenate(parts) if parts else np.zeros(0)
