"""Bulk-synchronous consensus optimization over node-local objectives.

Each of m nodes holds a private smooth f_j over a shared variable.  A round
takes one forward step per node under a node metric U_j, aggregates the
metric-weighted average

    z = (sum_j U_j)^{-1} (sum_j U_j y_j),

broadcasts z back, and accepts or rescales all metrics under the global
nonmonotone test on sum_j f_j.  Metrics come from per-node BB pairs (local
modes) or from the concatenated pair across nodes (global modes).

The execution here is a deterministic sequential simulation: node updates
are independent within a round and the reduction is summed in node order.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import BlockDiagonalMetric, DiagonalMetric, SmoothObjective, as_vector
from .prox import Consensus
from .solver import (
    CONVERGED,
    LINE_SEARCH_FAILURE,
    MAX_ITER,
    LineSearchError,
    SolverConfig,
    TraceRecord,
    line_search,
    warmup_step,
)
from .stepsize import StepPair, StepsizeState, diagonal_bb, hybrid_bb
from .problems import LeastSquaresObjective, LogisticObjective, RegressionProblem

MODES = ("local-bb", "local-dbb", "global-bb", "global-dbb")


@dataclass
class ConsensusTraceRecord(TraceRecord):
    bytes_exchanged: int = 0


class _Stacked(SmoothObjective):
    """sum_j f_j(x_j) over the stacked variable (x_1, ..., x_m)."""

    def __init__(self, objectives, block_dim):
        self.objectives = list(objectives)
        self.block_dim = int(block_dim)

    @property
    def dim(self):
        return self.block_dim * len(self.objectives)

    def _blocks(self, x):
        return x.reshape(len(self.objectives), self.block_dim)

    def value(self, x):
        xb = self._blocks(np.asarray(x))
        return sum(f.value(xb[j]) for j, f in enumerate(self.objectives))

    def gradient(self, x):
        xb = self._blocks(np.asarray(x))
        return np.concatenate(
            [f.gradient(xb[j]) for j, f in enumerate(self.objectives)]
        )


@dataclass
class ConsensusProblem:
    """Node objectives over a shared variable of dimension dim."""

    objectives: list
    dim: int

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("need at least one node")
        for j, f in enumerate(self.objectives):
            if f.dim != self.dim:
                raise ValueError(f"node {j} has dimension {f.dim}, expected {self.dim}")

    @property
    def n_nodes(self):
        return len(self.objectives)

    def stacked(self):
        return _Stacked(self.objectives, self.dim)

    def bytes_per_round(self):
        # each node uploads its forward point and downloads z, 8 bytes/coord
        return 2 * self.dim * self.n_nodes * 8


@dataclass
class ConsensusResult:
    z: np.ndarray
    status: str
    trace: list
    iterations: int
    final_objective: float


def split_regression(problem, n_nodes, ridge):
    """Shard a RegressionProblem across nodes, sizes proportional to index.

    Node j (1-based) receives ~ N * j / sum(1..m) contiguous rows; sizes are
    nondecreasing and sum to N.  The l2^2 penalty ridge * ||x||^2 is folded
    into each node objective, and every node keeps the global 1/N loss scale.
    """
    if not isinstance(problem, RegressionProblem):
        raise TypeError("split_regression expects a RegressionProblem")
    n_total = problem.A.shape[0]
    if n_nodes < 1 or n_nodes > n_total:
        raise ValueError(f"cannot split {n_total} rows across {n_nodes} nodes")
    weight_sum = n_nodes * (n_nodes + 1) // 2
    sizes = [n_total * (j + 1) // weight_sum for j in range(n_nodes)]
    shortfall = n_total - sum(sizes)
    for j in range(n_nodes - shortfall, n_nodes):
        sizes[j] += 1
    while 0 in sizes:  # tiny N: steal a row from the largest shard
        sizes[sizes.index(0)] += 1
        sizes[int(np.argmax(sizes))] -= 1
        sizes.sort()
    objectives = []
    offset = 0
    for size in sizes:
        rows = slice(offset, offset + size)
        if problem.loss == "ls":
            f = LeastSquaresObjective(
                problem.A[rows], problem.b[rows], scale=1.0 / n_total, ridge=ridge
            )
        else:
            f = LogisticObjective(
                problem.A[rows], problem.b[rows], scale=1.0 / n_total, ridge=ridge
            )
        objectives.append(f)
        offset += size
    return ConsensusProblem(objectives=objectives, dim=problem.A.shape[1])


def local_metric(pair, mode, bb_config, state):
    """Metric for one node from its own step pair (local modes)."""
    if mode == "local-bb":
        alpha = hybrid_bb(pair, bb_config, state)
        state.prev_alpha = alpha
        return DiagonalMetric.uniform(pair.s.shape[0], 1.0 / alpha)
    if mode == "local-dbb":
        return diagonal_bb(pair, bb_config, state)
    raise ValueError(f"local_metric does not handle mode {mode!r}")


def _round_metric(mode, pairs, bb_config, node_states):
    """Assemble the per-node metrics for one round as a block metric."""
    m = len(pairs)
    dim = pairs[0].s.shape[0]
    if mode in ("local-bb", "local-dbb"):
        return BlockDiagonalMetric(
            [local_metric(pairs[j], mode, bb_config, node_states[j]) for j in range(m)]
        )
    stacked = StepPair(
        np.concatenate([p.s for p in pairs]), np.concatenate([p.y for p in pairs])
    )
    if mode == "global-bb":
        shared = StepsizeState(
            prev_alpha=node_states[0].prev_alpha,
            prev_metric=DiagonalMetric.identity(1),
        )
        alpha = hybrid_bb(stacked, bb_config, shared)
        for st in node_states:
            st.prev_alpha = alpha
        return BlockDiagonalMetric(
            [DiagonalMetric.uniform(dim, 1.0 / alpha) for _ in range(m)]
        )
    if mode == "global-dbb":
        shared = StepsizeState(
            prev_alpha=node_states[0].prev_alpha,
            prev_metric=DiagonalMetric(
                np.concatenate([st.prev_metric.diag for st in node_states])
            ),
        )
        full = diagonal_bb(stacked, bb_config, shared)
        return BlockDiagonalMetric(
            [DiagonalMetric(full.diag[j * dim:(j + 1) * dim]) for j in range(m)]
        )
    raise ValueError(f"unknown consensus mode {mode!r}; choose from {MODES}")


def consensus_round(problem, state, node_states, mode="local-dbb", config=None):
    """Advance one synchronous round; returns (state, ConsensusTraceRecord).

    Each node takes a forward step under its metric, the scaled consensus
    prox aggregates the metric-weighted average z, and z is broadcast back,
    so after the round every node copy in state.x equals z.  The nonmonotone
    acceptance test runs on the summed objective and rescales all blocks on
    rejection.  Raises LineSearchError after max_backtracks.
    """
    if mode not in MODES:
        raise ValueError(f"unknown consensus mode {mode!r}; choose from {MODES}")
    config = config or SolverConfig()
    f = problem.stacked()
    g = Consensus(problem.n_nodes)
    m, n = problem.n_nodes, problem.dim
    t0 = time.perf_counter()
    xb = state.x.reshape(m, n)
    xpb = state.x_prev.reshape(m, n)
    gb = state.grad.reshape(m, n)
    gpb = state.grad_prev.reshape(m, n)
    pairs = [StepPair(xb[j] - xpb[j], gb[j] - gpb[j]) for j in range(m)]
    metric = _round_metric(mode, pairs, config.bb_config(), node_states)
    window = min(config.m_ls, state.iteration - 1) + 1
    if config.line_search == "off":
        f_ref = None
    elif config.line_search == "monotone":
        f_ref = state.f_x
    else:
        f_ref = max(state.f_history[-window:])
    x_new, y_new, metric, backtracks, f_new = line_search(
        f, g, state.x, state.grad, metric, f_ref, config
    )
    diff = x_new - state.x
    mapping = metric.apply(-diff)
    rec = ConsensusTraceRecord(
        iter=state.iteration,
        objective=f_new,
        grad_map_norm=float(np.sqrt(np.dot(mapping**2, 1.0 / metric.diag))),
        step_norm_u=metric.norm(diff),
        backtracks=backtracks,
        u_min=metric.u_min,
        u_max=metric.u_max,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        bytes_exchanged=problem.bytes_per_round(),
    )
    history = state.f_history + [f_new]
    if len(history) > config.m_ls + 1:
        history = history[-(config.m_ls + 1):]
    for j in range(m):
        node_states[j].prev_metric = DiagonalMetric(metric.diag[j * n:(j + 1) * n])
    state.x_prev = state.x
    state.x = x_new
    state.grad_prev = state.grad
    state.grad = f.gradient(x_new)
    state.metric = metric
    state.f_history = history
    state.iteration += 1
    state.forward = y_new
    state.f_x = f_new
    return state, rec


def solve_consensus(problem, x0, mode="local-dbb", config=None):
    """Run consensus rounds from a shared starting point x0.

    Every node starts at x0; rounds proceed until the stacked forward
    iterates stop moving (||y^{k+1} - y^k|| <= eps_tol) or max_iter.
    Returns the consensus point z with a per-round trace that includes the
    bytes-exchanged cost metric.
    """
    if mode not in MODES:
        raise ValueError(f"unknown consensus mode {mode!r}; choose from {MODES}")
    config = config or SolverConfig()
    x0 = as_vector(x0, dim=problem.dim, name="x0")
    f = problem.stacked()
    g = Consensus(problem.n_nodes)
    m, n = problem.n_nodes, problem.dim
    stacked0 = np.tile(x0, m)
    t0 = time.perf_counter()
    bytes_per_round = problem.bytes_per_round()

    def consensus_record(rec):
        return ConsensusTraceRecord(
            **{k: getattr(rec, k) for k in rec.__dataclass_fields__},
            bytes_exchanged=bytes_per_round,
        )

    try:
        state, rec = warmup_step(f, g, stacked0, config)
    except LineSearchError:
        return ConsensusResult(
            z=x0,
            status=LINE_SEARCH_FAILURE,
            trace=[],
            iterations=0,
            final_objective=f.value(stacked0) + g.value(stacked0),
        )
    rec = consensus_record(rec)
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    trace = [rec]
    node_states = [StepsizeState.initial(n) for _ in range(m)]
    status = MAX_ITER

    while len(trace) < config.max_iter:
        prev_forward = state.forward
        try:
            state, rec = consensus_round(problem, state, node_states, mode, config)
        except LineSearchError:
            status = LINE_SEARCH_FAILURE
            break
        rec.wall_ms = (time.perf_counter() - t0) * 1e3
        trace.append(rec)
        if float(np.linalg.norm(state.forward - prev_forward)) <= config.eps_tol:
            status = CONVERGED
            break

    return ConsensusResult(
        z=state.x[:n].copy(),
        status=status,
        trace=trace,
        iterations=len(trace),
        final_objective=state.f_x,
    )
