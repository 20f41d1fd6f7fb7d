"""Core types: validated vectors, diagonal metrics, and problem interfaces.

Everything downstream works with plain float64 numpy arrays for vectors and
with positive-definite diagonal (or block-diagonal) metrics U.  The metric
induces the inner product <x, y>_U = x' U y and the norm ||x||_U.
"""

import abc

import numpy as np

# Metric diagonals below this are rejected outright: their inverses overflow
# double precision and every downstream formula divides by u.
METRIC_FLOOR = 1e-300


def as_vector(x, dim=None, name="vector"):
    """Coerce to a 1-D float64 array and validate finiteness.

    Raises ValueError on NaN/Inf entries or on a dimension mismatch.
    """
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise ValueError(f"{name} has a non-finite entry at index {bad}")
    return v


class DiagonalMetric:
    """Positive-definite diagonal metric U = diag(u).

    Entries are validated strictly positive (floor ``METRIC_FLOOR``);
    constructing a metric with a nonpositive or non-finite entry is an
    error, never a silent clamp.
    """

    __slots__ = ("diag",)

    def __init__(self, diag):
        d = np.asarray(diag, dtype=float)
        if d.ndim != 1:
            raise ValueError(f"metric diagonal must be 1-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("metric diagonal has non-finite entries")
        if np.any(d < METRIC_FLOOR):
            raise ValueError(
                f"metric diagonal entries must be >= {METRIC_FLOOR:g} "
                f"(min was {d.min():g})"
            )
        self.diag = d

    @classmethod
    def identity(cls, dim):
        return cls(np.ones(dim))

    @classmethod
    def uniform(cls, dim, value):
        """Scalar metric value * I."""
        return cls(np.full(dim, float(value)))

    @property
    def dim(self):
        return self.diag.shape[0]

    def apply(self, z):
        """U z."""
        return self.diag * z

    def apply_inverse(self, z):
        """U^{-1} z (exact for diagonal U)."""
        return z / self.diag

    def norm(self, z):
        """||z||_U = sqrt(z' U z)."""
        return float(np.sqrt(np.dot(self.diag * z, z)))

    def inner(self, a, b):
        return float(np.dot(self.diag * a, b))

    def scaled(self, factor):
        """A new metric factor * U (used by line-search rescaling)."""
        return DiagonalMetric(self.diag * factor)

    @property
    def u_min(self):
        return float(self.diag.min())

    @property
    def u_max(self):
        return float(self.diag.max())

    def __repr__(self):
        return f"DiagonalMetric(dim={self.dim}, u_min={self.u_min:g}, u_max={self.u_max:g})"


class BlockDiagonalMetric:
    """Concatenation of per-block diagonal metrics.

    Behaves exactly like the DiagonalMetric over the stacked space; the block
    structure is retained for per-block access (consensus, separable proxes).
    """

    __slots__ = ("blocks", "diag", "offsets")

    def __init__(self, blocks):
        if not blocks:
            raise ValueError("need at least one block")
        self.blocks = [
            b if isinstance(b, DiagonalMetric) else DiagonalMetric(b) for b in blocks
        ]
        self.diag = np.concatenate([b.diag for b in self.blocks])
        sizes = [b.dim for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])

    @property
    def dim(self):
        return self.diag.shape[0]

    @property
    def n_blocks(self):
        return len(self.blocks)

    def block_slice(self, j):
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))

    def apply(self, z):
        return self.diag * z

    def apply_inverse(self, z):
        return z / self.diag

    def norm(self, z):
        return float(np.sqrt(np.dot(self.diag * z, z)))

    def inner(self, a, b):
        return float(np.dot(self.diag * a, b))

    def scaled(self, factor):
        return BlockDiagonalMetric([b.scaled(factor) for b in self.blocks])

    @property
    def u_min(self):
        return float(self.diag.min())

    @property
    def u_max(self):
        return float(self.diag.max())

    def __repr__(self):
        return f"BlockDiagonalMetric(blocks={self.n_blocks}, dim={self.dim})"


def unorm(z, metric):
    """||z||_U for a diagonal or block-diagonal metric."""
    return metric.norm(np.asarray(z, dtype=float))


def apply_inverse(metric, z):
    """U^{-1} z."""
    return metric.apply_inverse(np.asarray(z, dtype=float))


class SmoothObjective(abc.ABC):
    """Differentiable term f of the composite objective F = f + g.

    Implementations may expose the optional attributes ``smoothness`` (an L
    such that grad f is L-Lipschitz), ``strong_convexity`` (m), ``minimizer``
    and ``optimal_value`` when they are known; None means unknown.
    """

    smoothness = None
    strong_convexity = None
    minimizer = None
    optimal_value = None

    @property
    @abc.abstractmethod
    def dim(self):
        """Ambient dimension."""

    @abc.abstractmethod
    def value(self, x):
        """f(x)."""

    @abc.abstractmethod
    def gradient(self, x):
        """grad f(x)."""


class ProxRegularizer(abc.ABC):
    """Convex (possibly nonsmooth) term g with a metric-scaled prox.

    ``prox(v, metric)`` returns argmin_x g(x) + (1/2) ||v - x||_U^2.
    ``separable`` marks g that splits into a sum of per-coordinate terms.
    """

    separable = False

    @abc.abstractmethod
    def value(self, x):
        """g(x); may be +inf outside the domain."""

    @abc.abstractmethod
    def prox(self, v, metric):
        """Scaled proximal map of g at v under the metric U."""
