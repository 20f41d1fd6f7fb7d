"""Variable-metric proximal gradient solvers.

The driver iterates

    y^{k+1} = x^k - (U^k)^{-1} grad f(x^k)
    x^{k+1} = prox_{g, U^k}(y^{k+1})

where the metric U^k comes from a scalar hybrid BB rule (``pg-bb``), the
diagonal BB subproblem (``vmpg-dbb``), or is held fixed (``pg-fixed``).
Steps are accepted under a nonmonotone sufficient-decrease test and the
metric is rescaled by beta until acceptance.  ``fista`` provides the usual
accelerated baseline with the same trace schema.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import DiagonalMetric, as_vector
from .stepsize import BBConfig, StepPair, StepsizeState, diagonal_bb, hybrid_bb

METHODS = ("vmpg-dbb", "pg-bb", "pg-fixed", "fista")
LINE_SEARCH_MODES = ("nonmonotone", "monotone", "off")
STOP_RULES = ("forward-step", "grad-map")

CONVERGED = "converged"
MAX_ITER = "max-iter"
LINE_SEARCH_FAILURE = "line-search-failure"


@dataclass
class SolverConfig:
    method: str = "vmpg-dbb"
    mu: float = 1e-6            # diagonal BB proximity weight
    delta: float = 2.0          # hybrid BB switching threshold
    m_ls: int = 15              # nonmonotone window length
    beta: float = 2.0           # metric rescale factor on rejection
    eps_tol: float = 1e-4       # stopping tolerance
    max_iter: int = 5000
    max_backtracks: int = 60
    fixed_stepsize: float = None  # required by pg-fixed unless f exposes L
    line_search: str = "nonmonotone"
    stop_rule: str = "forward-step"
    alpha_min: float = 1e-10
    alpha_max: float = 1e10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.line_search not in LINE_SEARCH_MODES:
            raise ValueError(f"unknown line search mode {self.line_search!r}")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"unknown stop rule {self.stop_rule!r}")
        if self.beta <= 1:
            raise ValueError("beta must exceed 1")
        if self.m_ls < 1:
            raise ValueError("m_ls must be at least 1")
        if self.eps_tol <= 0 or self.max_iter < 1 or self.max_backtracks < 0:
            raise ValueError("invalid solver limits")

    def bb_config(self):
        return BBConfig(
            delta=self.delta,
            mu=self.mu,
            alpha_min=self.alpha_min,
            alpha_max=self.alpha_max,
        )


@dataclass
class TraceRecord:
    """One accepted iteration; field order matches the trace CSV columns."""

    iter: int
    objective: float
    grad_map_norm: float   # ||G_{U^k}(x^k)|| in the (U^k)^{-1} norm
    step_norm_u: float     # ||x^{k+1} - x^k|| in the U^k norm
    backtracks: int
    u_min: float
    u_max: float
    wall_ms: float


@dataclass
class SolverState:
    x: np.ndarray
    x_prev: np.ndarray
    grad: np.ndarray
    grad_prev: np.ndarray
    metric: DiagonalMetric
    f_history: list          # F(x^j) for the most recent iterates
    iteration: int            # index k of the current iterate x^k
    stepsize_state: StepsizeState
    forward: np.ndarray       # accepted forward point y^k
    f_x: float                # F(x^k)


@dataclass
class SolveResult:
    x: np.ndarray
    status: str
    trace: list
    iterations: int
    final_objective: float


class LineSearchError(RuntimeError):
    """Backtracking exhausted max_backtracks without sufficient decrease."""

    def __init__(self, iteration, backtracks, candidate_value, reference, u_max):
        self.iteration = iteration
        self.backtracks = backtracks
        self.candidate_value = candidate_value
        self.reference = reference
        self.u_max = u_max
        super().__init__(
            f"line search stalled at iteration {iteration}: "
            f"{backtracks} backtracks, candidate objective {candidate_value:.6g} "
            f"vs reference {reference:.6g}, u_max {u_max:.3g}"
        )


def composite_value(f, g, x):
    """F(x) = f(x) + g(x)."""
    return f.value(x) + g.value(x)


def gradient_mapping(f, g, x, metric):
    """G_U(x) = U (x - prox_{g,U}(x - U^{-1} grad f(x)))."""
    step = g.prox(x - metric.apply_inverse(f.gradient(x)), metric)
    return metric.apply(x - step)


def proximal_step(f, g, x, grad, metric):
    """One forward-backward step; returns (x_new, forward_point)."""
    y = x - metric.apply_inverse(grad)
    return g.prox(y, metric), y


def line_search(f, g, x, grad, metric, f_ref, config):
    """Backtrack the metric until the sufficient-decrease test holds.

    Accepts x_new once F(x_new) <= f_ref - (1/2) ||x_new - x||_U^2, rescaling
    U by beta on each rejection.  With line search off (f_ref None) the first
    candidate is returned unconditionally.

    Returns (x_new, forward_point, metric, backtracks, F(x_new)).
    """
    backtracks = 0
    while True:
        x_new, y = proximal_step(f, g, x, grad, metric)
        f_new = composite_value(f, g, x_new)
        if f_ref is None:
            return x_new, y, metric, backtracks, f_new
        decrease = 0.5 * metric.norm(x_new - x) ** 2
        if f_new <= f_ref - decrease:
            return x_new, y, metric, backtracks, f_new
        if backtracks >= config.max_backtracks:
            raise LineSearchError(
                iteration=None,
                backtracks=backtracks,
                candidate_value=f_new,
                reference=f_ref - decrease,
                u_max=metric.u_max,
            )
        metric = metric.scaled(config.beta)
        backtracks += 1


def _reference_value(state, config):
    if config.line_search == "off":
        return None
    if config.line_search == "monotone":
        return state.f_x
    window = min(config.m_ls, state.iteration - 1) + 1
    return max(state.f_history[-window:])


def _resolve_fixed_stepsize(f, config):
    if config.fixed_stepsize is not None:
        return float(config.fixed_stepsize)
    if f.smoothness is not None:
        return 1.0 / f.smoothness
    raise ValueError(
        "pg-fixed needs fixed_stepsize in the config or an objective "
        "exposing its smoothness constant"
    )


def vmpg_step(f, g, state, config):
    """Advance one iteration from x^k; returns (new_state, TraceRecord).

    The metric is chosen by the configured rule from the step pair
    (x^k - x^{k-1}, grad change), then backtracked until the nonmonotone
    criterion accepts.  Raises LineSearchError after max_backtracks.
    """
    t0 = time.perf_counter()
    pair = StepPair(state.x - state.x_prev, state.grad - state.grad_prev)
    bb_cfg = config.bb_config()
    ss = state.stepsize_state
    alpha = ss.prev_alpha
    if config.method == "vmpg-dbb":
        metric = diagonal_bb(pair, bb_cfg, ss)
    elif config.method == "pg-bb":
        alpha = hybrid_bb(pair, bb_cfg, ss)
        metric = DiagonalMetric.uniform(state.x.shape[0], 1.0 / alpha)
    elif config.method == "pg-fixed":
        metric = DiagonalMetric.uniform(
            state.x.shape[0], 1.0 / _resolve_fixed_stepsize(f, config)
        )
    else:
        raise ValueError(f"vmpg_step does not drive method {config.method!r}")

    f_ref = _reference_value(state, config)
    try:
        x_new, y_new, metric, backtracks, f_new = line_search(
            f, g, state.x, state.grad, metric, f_ref, config
        )
    except LineSearchError as err:
        err.iteration = state.iteration
        raise

    diff = x_new - state.x
    mapping = metric.apply(-diff)  # G_{U^k}(x^k) = U^k (x^k - x^{k+1})
    grad_map_norm = float(np.sqrt(np.dot(mapping**2, 1.0 / metric.diag)))
    record = TraceRecord(
        iter=state.iteration,
        objective=f_new,
        grad_map_norm=grad_map_norm,
        step_norm_u=metric.norm(diff),
        backtracks=backtracks,
        u_min=metric.u_min,
        u_max=metric.u_max,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    history = state.f_history + [f_new]
    if len(history) > config.m_ls + 1:
        history = history[-(config.m_ls + 1):]
    new_state = SolverState(
        x=x_new,
        x_prev=state.x,
        grad=f.gradient(x_new),
        grad_prev=state.grad,
        metric=metric,
        f_history=history,
        iteration=state.iteration + 1,
        stepsize_state=StepsizeState(prev_alpha=alpha, prev_metric=metric),
        forward=y_new,
        f_x=f_new,
    )
    return new_state, record


def warmup_step(f, g, x0, config):
    """Produce x^1 by one proximal-gradient step with a conservative stepsize.

    Uses alpha0 = min(1, 1 / ||grad f(x^0)||) and a monotone acceptance test
    against F(x^0); the BB rules take over from the resulting step pair.
    """
    t0 = time.perf_counter()
    x0 = as_vector(x0, dim=f.dim, name="x0")
    grad0 = f.gradient(x0)
    gnorm = float(np.linalg.norm(grad0))
    alpha0 = min(1.0, 1.0 / gnorm) if gnorm > 0 else 1.0
    metric = DiagonalMetric.uniform(x0.shape[0], 1.0 / alpha0)
    f0 = composite_value(f, g, x0)
    f_ref = None if config.line_search == "off" else f0
    x1, y1, metric, backtracks, f1 = line_search(
        f, g, x0, grad0, metric, f_ref, config
    )
    diff = x1 - x0
    mapping = metric.apply(-diff)
    record = TraceRecord(
        iter=0,
        objective=f1,
        grad_map_norm=float(np.sqrt(np.dot(mapping**2, 1.0 / metric.diag))),
        step_norm_u=metric.norm(diff),
        backtracks=backtracks,
        u_min=metric.u_min,
        u_max=metric.u_max,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    state = SolverState(
        x=x1,
        x_prev=x0,
        grad=f.gradient(x1),
        grad_prev=grad0,
        metric=metric,
        f_history=[f1],
        iteration=1,
        stepsize_state=StepsizeState.initial(x0.shape[0]),
        forward=y1,
        f_x=f1,
    )
    return state, record


def _stopped(state, prev_forward, config):
    if config.stop_rule == "forward-step":
        return float(np.linalg.norm(state.forward - prev_forward)) <= config.eps_tol
    mapping = state.metric.apply(state.x_prev - state.x)
    rel = float(np.linalg.norm(mapping)) / max(1.0, float(np.linalg.norm(state.x)))
    return rel <= config.eps_tol


def solve(f, g, x0, config=None):
    """Run the configured method from x0 until the stopping test or max_iter.

    Parameters
    ----------
    f : SmoothObjective
    g : ProxRegularizer
    x0 : array_like
        Starting point.
    config : SolverConfig, optional

    Returns
    -------
    SolveResult with the final iterate, status, and per-iteration trace.
    """
    config = config or SolverConfig()
    if config.method == "fista":
        return fista(f, g, x0, stepsize=config.fixed_stepsize, config=config)
    t0 = time.perf_counter()
    try:
        state, record = warmup_step(f, g, x0, config)
    except LineSearchError:
        x0 = as_vector(x0, dim=f.dim, name="x0")
        return SolveResult(
            x=x0,
            status=LINE_SEARCH_FAILURE,
            trace=[],
            iterations=0,
            final_objective=composite_value(f, g, x0),
        )
    record.wall_ms = (time.perf_counter() - t0) * 1e3
    trace = [record]
    status = MAX_ITER
    while len(trace) < config.max_iter:
        prev_forward = state.forward
        try:
            state, record = vmpg_step(f, g, state, config)
        except LineSearchError:
            status = LINE_SEARCH_FAILURE
            break
        record.wall_ms = (time.perf_counter() - t0) * 1e3
        trace.append(record)
        if _stopped(state, prev_forward, config):
            status = CONVERGED
            break
    return SolveResult(
        x=state.x,
        status=status,
        trace=trace,
        iterations=len(trace),
        final_objective=state.f_x,
    )


def fista(f, g, x0, stepsize=None, config=None):
    """Accelerated proximal gradient (no restart), same trace schema.

    The stepsize must satisfy alpha <= 1/L unless backtracking is active
    (any line_search mode except "off"), in which case alpha shrinks under
    the standard quadratic upper-bound test.
    """
    config = config or SolverConfig(method="fista")
    x0 = as_vector(x0, dim=f.dim, name="x0")
    if stepsize is None:
        if f.smoothness is not None:
            alpha = 1.0 / f.smoothness
        elif config.line_search != "off":
            alpha = 1.0
        else:
            raise ValueError("fista needs a stepsize or an objective exposing L")
    else:
        alpha = float(stepsize)
    t0 = time.perf_counter()
    backtrack = config.line_search != "off"
    x_prev = x0
    z = x0
    t_momentum = 1.0
    w_prev = x0
    trace = []
    status = MAX_ITER
    final_x = x0
    while len(trace) < config.max_iter:
        grad_z = f.gradient(z)
        f_z = f.value(z)
        backtracks = 0
        failed = False
        while True:
            w = z - alpha * grad_z
            metric = DiagonalMetric.uniform(x0.shape[0], 1.0 / alpha)
            x = g.prox(w, metric)
            if not backtrack:
                break
            diff = x - z
            bound = f_z + float(np.dot(grad_z, diff)) + np.dot(diff, diff) / (2 * alpha)
            if f.value(x) <= bound:
                break
            if backtracks >= config.max_backtracks:
                failed = True
                break
            alpha /= config.beta
            backtracks += 1
        if failed:
            status = LINE_SEARCH_FAILURE
            break
        grad_map = float(np.linalg.norm(z - x)) / np.sqrt(alpha)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2))
        z = x + ((t_momentum - 1.0) / t_next) * (x - x_prev)
        obj = composite_value(f, g, x)
        trace.append(
            TraceRecord(
                iter=len(trace),
                objective=obj,
                grad_map_norm=grad_map,
                step_norm_u=float(np.linalg.norm(x - x_prev)) / np.sqrt(alpha),
                backtracks=backtracks,
                u_min=1.0 / alpha,
                u_max=1.0 / alpha,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        final_x = x
        converged = float(np.linalg.norm(w - w_prev)) <= config.eps_tol
        x_prev = x
        t_momentum = t_next
        w_prev = w
        if converged:
            status = CONVERGED
            break
    return SolveResult(
        x=final_x,
        status=status,
        trace=trace,
        iterations=len(trace),
        final_objective=composite_value(f, g, final_x),
    )
