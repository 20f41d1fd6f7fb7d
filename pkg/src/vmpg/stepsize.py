"""Barzilai-Borwein stepsize rules, scalar and diagonal.

Given a step pair s = x^k - x^{k-1}, y = grad f(x^k) - grad f(x^{k-1}),
the two classical BB values are

    alpha_bb1 = ||s||^2 / <s, y>,      alpha_bb2 = <s, y> / ||y||^2.

For L-smooth, m-strongly convex f both lie in [1/L, 1/m] with
alpha_bb2 <= alpha_bb1.  ``hybrid_bb`` blends them into a single scalar;
``diagonal_bb`` builds a full diagonal metric by matching the secant
equation coordinate-wise inside the interval the scalar rules span.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import DiagonalMetric, as_vector


@dataclass
class StepPair:
    """Iterate difference s and gradient difference y of equal dimension."""

    s: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.s = as_vector(self.s, name="s")
        self.y = as_vector(self.y, dim=self.s.shape[0], name="y")


@dataclass
class BBConfig:
    delta: float = 2.0        # hybrid switching threshold
    mu: float = 1e-6          # diagonal proximity weight, must be > 0
    alpha_min: float = 1e-10  # global stepsize safeguard (lower)
    alpha_max: float = 1e10   # global stepsize safeguard (upper)

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not (0 < self.alpha_min < self.alpha_max):
            raise ValueError("need 0 < alpha_min < alpha_max")
        if self.delta <= 1:
            raise ValueError("delta must exceed 1")


def _default_metric():
    return DiagonalMetric(np.ones(1))


@dataclass
class StepsizeState:
    """Memory carried between iterations by the stepsize rules.

    prev_alpha is the last scalar hybrid output (clamped); prev_metric is the
    metric accepted at the previous iteration (identity before the first).
    """

    prev_alpha: float = 1.0
    prev_metric: DiagonalMetric = field(default_factory=_default_metric)

    @classmethod
    def initial(cls, dim):
        return cls(prev_alpha=1.0, prev_metric=DiagonalMetric.identity(dim))


def bb1(pair):
    """First BB stepsize ||s||^2 / <s, y>, or None when <s, y> <= 0."""
    sy = float(np.dot(pair.s, pair.y))
    if sy <= 0.0:
        return None
    return float(np.dot(pair.s, pair.s)) / sy


def bb2(pair):
    """Second BB stepsize <s, y> / ||y||^2, or None when <s, y> <= 0."""
    sy = float(np.dot(pair.s, pair.y))
    if sy <= 0.0:
        return None
    yy = float(np.dot(pair.y, pair.y))
    if yy == 0.0:
        return None
    return sy / yy


def hybrid_bb(pair, config, state):
    """Hybrid scalar BB stepsize.

    Takes alpha_bb2 when the two values are close (alpha_bb1 < delta *
    alpha_bb2), otherwise the gap-corrected alpha_bb1 - alpha_bb2 / delta.
    Degenerate curvature or a nonpositive result falls back to the previous
    stepsize.  The result is clamped to [alpha_min, alpha_max].
    """
    a1 = bb1(pair)
    a2 = bb2(pair)
    if a1 is None or a2 is None:
        alpha = state.prev_alpha
    elif a1 < config.delta * a2:
        alpha = a2
    else:
        alpha = a1 - a2 / config.delta
    if alpha <= 0.0:
        alpha = state.prev_alpha
    return float(min(max(alpha, config.alpha_min), config.alpha_max))


def diagonal_bb(pair, config, state):
    """Diagonal BB metric.

    Minimizes ||U s - y||^2 + mu ||U - U_prev||_F^2 over diagonal U with
    (alpha_bb1)^{-1} I <= U <= (alpha_bb2)^{-1} I, which has the closed-form
    coordinate solution

        u_i = clip((s_i y_i + mu u_prev_i) / (s_i^2 + mu), lo, hi).

    The BB values are safeguarded into [alpha_min, alpha_max] before the
    bounds are formed; degenerate curvature widens the bounds to the full
    safeguard interval.  Never returns NaN/Inf for finite inputs and mu > 0.
    """
    a1 = bb1(pair)
    a2 = bb2(pair)
    if a1 is None or a2 is None:
        lo = 1.0 / config.alpha_max
        hi = 1.0 / config.alpha_min
    else:
        a1 = min(max(a1, config.alpha_min), config.alpha_max)
        a2 = min(max(a2, config.alpha_min), config.alpha_max)
        lo = 1.0 / a1
        hi = 1.0 / a2
        if lo > hi:  # float noise can invert the ordering of eq-close values
            lo, hi = hi, lo
    u_prev = state.prev_metric.diag
    if u_prev.shape[0] != pair.s.shape[0]:
        raise ValueError(
            f"previous metric has dimension {u_prev.shape[0]}, "
            f"step pair has {pair.s.shape[0]}"
        )
    candidates = (pair.s * pair.y + config.mu * u_prev) / (pair.s**2 + config.mu)
    return DiagonalMetric(np.clip(candidates, lo, hi))
