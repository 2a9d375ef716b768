"""Self-supervised online training of the attentive BP model, plus the
plain BP / damped BP baselines that share its loop.

Loss
----
Each variable gets the distribution ``p_i = softmax(-b_i)`` of its belief
``b_i``; the per-iteration loss is the exact expected total cost when
variables are drawn independently from these distributions.  Every
``t_upd`` iterations the ``t_eff`` lowest-cost iterations of the window are
averaged into the training objective, one Adam step is taken, and the
computation history is cut so gradients never span more than one window.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import bp
from .autodiff import Tensor
from .factor_graph import COPInstance, FactorGraph, build_factor_graph, split_scfg, total_cost
from .model import DABPModel, ModelConfig

log = logging.getLogger(__name__)

_PAD_BELIEF = 1e30
BASELINES = ("bp", "dbp", "dbp-scfg")


@dataclass
class TrainConfig:
    restarts: int = 20
    t_max: int = 1000
    t_upd: int = 20
    t_eff: int = 2
    lr: float = 1e-4
    weight_decay: float = 5e-5
    eps: float = bp.DEFAULT_EPS
    seed: int = 0
    split_ratio: float | None = 0.95

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if not 1 <= self.t_upd <= self.t_max:
            raise ValueError(f"need 1 <= t_upd <= t_max, got t_upd={self.t_upd}, t_max={self.t_max}")
        if not 1 <= self.t_eff <= self.t_upd:
            raise ValueError(f"need 1 <= t_eff <= t_upd, got t_eff={self.t_eff}, t_upd={self.t_upd}")
        if self.split_ratio is not None and not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split ratio must lie in (0, 1), got {self.split_ratio}")


@dataclass
class IterationRecord:
    restart: int
    iteration: int
    cost: float
    best_cost: float
    loss: float
    converged: bool


@dataclass
class RunTrace:
    algo: str
    num_functions: int
    records: list[IterationRecord] = field(default_factory=list)
    best_assignment: np.ndarray | None = None
    best_cost: float = math.inf
    restart_convergence: list[int | None] = field(default_factory=list)
    updates: int = 0
    aborted: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def converged_at(self) -> int | None:
        """Fewest iterations any restart needed to converge, or ``None``."""
        hits = [t for t in self.restart_convergence if t is not None]
        return min(hits) if hits else None

    @property
    def normalized_cost(self) -> float:
        return self.best_cost / self.num_functions if self.num_functions else self.best_cost

    def best_cost_series(self) -> list[float]:
        return [r.best_cost for r in self.records]

    def summary(self) -> dict:
        return {
            "algo": self.algo,
            "best_cost": self.best_cost,
            "normalized_cost": self.normalized_cost,
            "num_functions": self.num_functions,
            "converged_at": self.converged_at,
            "restart_convergence": self.restart_convergence,
            "iterations": len(self.records),
            "updates": self.updates,
            "aborted": self.aborted,
            "wall_time": self.wall_time,
            "best_assignment": None if self.best_assignment is None else self.best_assignment.tolist(),
        }


# ---------------------------------------------------------------------------
# loss pieces


def _as_graph(obj) -> FactorGraph:
    return obj if isinstance(obj, FactorGraph) else build_factor_graph(obj)


def _pad_beliefs(belief, graph: FactorGraph):
    if isinstance(belief, (list, tuple)):
        arr = np.zeros((graph.num_vars, graph.dmax))
        for i, b in enumerate(belief):
            arr[i, : len(b)] = b
        return arr
    return belief


def assignment_probs(belief, graph) -> Tensor:
    """Row-wise ``softmax(-b)`` over each variable's own domain, shape ``(n, dmax)``."""
    graph = _as_graph(graph)
    b = ad.as_tensor(_pad_beliefs(belief, graph))
    logits = -b
    if not graph.uniform_domains:
        logits = logits - _PAD_BELIEF * (1.0 - graph.var_valid)
    return ad.softmax(logits, axis=1)


def smoothed_loss(graph, probs) -> Tensor:
    """Expected total cost under independent per-variable distributions.

    For each function this is the table contracted with the outer product
    of its scope variables' probability vectors.
    """
    graph = _as_graph(graph)
    probs = ad.as_tensor(probs)
    total = ad.Tensor(0.0)
    for group in graph.groups:
        shape = group.shape
        k = len(group.func_ids)
        term = ad.Tensor(group.tables)
        for j, d in enumerate(shape):
            p = ad.take(probs, graph.edge_var[group.edges[:, j]])
            if d < p.shape[1]:
                p = ad.getitem(p, (slice(None), slice(0, d)))
            bshape = [k] + [1] * len(shape)
            bshape[1 + j] = d
            term = term * ad.reshape(p, tuple(bshape))
        total = total + ad.sum_(term)
    return total


def theorem1_gap(instance: COPInstance, belief, graph: FactorGraph | None = None) -> tuple[float, float]:
    """Distance between the smoothed loss and the cost of the belief decision,
    with its worst-case bound ``sum_l range(f_l) * (1 - prod_i 1/|D_i|)``."""
    graph = graph or build_factor_graph(instance)
    b = _pad_beliefs(belief, graph)
    loss = smoothed_loss(graph, assignment_probs(b, graph)).item()
    cost = total_cost(instance, bp.decide(b, graph.domains))
    bound = 0.0
    for f in instance.functions:
        uniform_mass = float(np.prod([1.0 / instance.domains[v] for v in f.scope]))
        bound += f.cost_range() * (1.0 - uniform_mass)
    return abs(loss - cost), bound


def select_effective(costs: Sequence[float], t_eff: int) -> list[int]:
    """Positions of the ``t_eff`` lowest costs; earlier positions win ties."""
    order = sorted(range(len(costs)), key=lambda j: (costs[j], j))
    return sorted(order[: min(t_eff, len(costs))])


def window_objective(losses: Sequence[Tensor], costs: Sequence[float], t_eff: int) -> Tensor:
    """Mean loss over the effective iterations of one update window."""
    chosen = select_effective(costs, t_eff)
    total = losses[chosen[0]]
    for j in chosen[1:]:
        total = total + losses[j]
    return total / float(len(chosen))


# ---------------------------------------------------------------------------
# iteration helpers


@dataclass
class _Step:
    msgs: bp.MessageSet
    belief: Tensor
    assignment: np.ndarray
    hp: bp.HyperParams | None = None


def _attentive_step(model: DABPModel, graph: FactorGraph, state, msgs: bp.MessageSet):
    hp, state = model.step(state, msgs, graph)
    v2f = bp.v2f_step(graph, msgs, hp)
    f2v = bp.f2v_step(graph, msgs.v2f)
    belief = bp.beliefs(graph, f2v)
    step = _Step(bp.MessageSet(v2f, f2v, msgs.t + 1), belief, bp.decide(belief, graph.domains), hp)
    return step, state


def window_loss(
    model: DABPModel,
    instance: COPInstance,
    t_upd: int,
    t_eff: int,
    split_ratio: float | None = None,
) -> Tensor:
    """Training objective of the first update window after a reset.

    Runs ``t_upd`` attentive iterations from zero messages and returns the
    differentiable mean loss of the ``t_eff`` best iterations.
    """
    bp_instance = split_scfg(instance, split_ratio) if split_ratio else instance
    graph = build_factor_graph(bp_instance)
    msgs = bp.MessageSet.zeros(graph)
    state = model.initial_state(graph)
    losses, costs = [], []
    for _ in range(t_upd):
        step, state = _attentive_step(model, graph, state, msgs)
        losses.append(smoothed_loss(graph, assignment_probs(step.belief, graph)))
        costs.append(total_cost(instance, step.assignment))
        msgs = step.msgs
    return window_objective(losses, costs, t_eff)


TraceSink = Callable[[IterationRecord], None]


def _record(trace: RunTrace, sink: TraceSink | None, rec: IterationRecord) -> None:
    trace.records.append(rec)
    if sink is not None:
        sink(rec)


def run_online(
    instance: COPInstance,
    model: DABPModel | None = None,
    cfg: TrainConfig | None = None,
    model_cfg: ModelConfig | None = None,
    sink: TraceSink | None = None,
    algo: str = "dabp",
) -> tuple[np.ndarray, RunTrace]:
    """Solve ``instance`` with attentive BP while training the model online.

    The model parameters persist across restarts; messages and encoder
    state are reset at the start of each restart.  Returns the best
    assignment found and the full trace.
    """
    cfg = cfg or TrainConfig()
    start = time.perf_counter()
    bp_instance = split_scfg(instance, cfg.split_ratio) if cfg.split_ratio else instance
    graph = build_factor_graph(bp_instance)
    if model is None:
        model_cfg = model_cfg or ModelConfig(msg_width=graph.dmax)
        model = DABPModel(model_cfg, seed=cfg.seed)
    trace = RunTrace(algo, instance.num_functions)

    def update(losses, costs, restart):
        objective = window_objective(losses, costs, cfg.t_eff)
        model.params.zero_grad()
        ad.backward(objective)
        grads = model.params.grads()
        if not all(np.all(np.isfinite(g)) for g in grads.values()):
            return False
        ad.adam_step(model.params, grads, cfg.lr, cfg.weight_decay)
        trace.updates += 1
        return True

    for restart in range(cfg.restarts):
        msgs = bp.MessageSet.zeros(graph)
        state = model.initial_state(graph)
        losses: list[Tensor] = []
        costs: list[float] = []
        converged_at = None
        for t in range(1, cfg.t_max + 1):
            step, state = _attentive_step(model, graph, state, msgs)
            cost = total_cost(instance, step.assignment)
            if cost < trace.best_cost:
                trace.best_cost = cost
                trace.best_assignment = step.assignment.copy()
            loss = smoothed_loss(graph, assignment_probs(step.belief, graph))
            done = bp.converged(step.msgs, msgs, cfg.eps)
            msgs = step.msgs
            _record(trace, sink, IterationRecord(restart, t, cost, trace.best_cost, loss.item(), done))
            if not (math.isfinite(loss.item()) and msgs.is_finite()):
                reason = f"restart {restart}: non-finite loss or messages at iteration {t}"
                log.warning(reason)
                trace.aborted.append(reason)
                break
            losses.append(loss)
            costs.append(cost)
            if t % cfg.t_upd == 0 or done or t == cfg.t_max:
                if losses and not update(losses, costs, restart):
                    reason = f"restart {restart}: non-finite gradient at iteration {t}"
                    log.warning(reason)
                    trace.aborted.append(reason)
                    break
                losses, costs = [], []
                msgs = msgs.detach()
                state = state.detach()
            if done:
                converged_at = t
                break
        trace.restart_convergence.append(converged_at)
    trace.wall_time = time.perf_counter() - start
    return trace.best_assignment, trace


def run_baseline(
    instance: COPInstance,
    algo: str,
    cfg: TrainConfig | None = None,
    lam: float = 0.9,
    rho: float = 0.95,
    sink: TraceSink | None = None,
) -> RunTrace:
    """Vanilla BP (``bp``), damped BP (``dbp``) or damped BP on the split
    factor graph (``dbp-scfg``).  These are deterministic, so a single pass
    of ``cfg.t_max`` iterations is run regardless of ``cfg.restarts``."""
    cfg = cfg or TrainConfig()
    if algo not in BASELINES:
        raise ValueError(f"unknown baseline {algo!r}; choose from {BASELINES}")
    if algo != "bp" and not 0.0 <= lam <= 1.0:
        raise ValueError(f"damping factor must lie in [0, 1], got {lam}")
    start = time.perf_counter()
    bp_instance = split_scfg(instance, rho) if algo == "dbp-scfg" else instance
    graph = build_factor_graph(bp_instance)
    trace = RunTrace(algo, instance.num_functions)
    msgs = bp.MessageSet.zeros(graph)
    converged_at = None
    for t in range(1, cfg.t_max + 1):
        if algo == "bp":
            v2f = bp.v2f_step_vanilla(graph, msgs)
        else:
            v2f = bp.v2f_step_damped(graph, msgs, lam)
        f2v = bp.f2v_step(graph, msgs.v2f)
        belief = bp.beliefs(graph, f2v)
        assignment = bp.decide(belief, graph.domains)
        cost = total_cost(instance, assignment)
        if cost < trace.best_cost:
            trace.best_cost = cost
            trace.best_assignment = assignment.copy()
        loss = smoothed_loss(graph, assignment_probs(belief, graph)).item()
        new = bp.MessageSet(v2f, f2v, t)
        done = bp.converged(new, msgs, cfg.eps)
        msgs = new
        _record(trace, sink, IterationRecord(0, t, cost, trace.best_cost, loss, done))
        if done:
            converged_at = t
            break
    trace.restart_convergence.append(converged_at)
    trace.wall_time = time.perf_counter() - start
    return trace


def record_dict(rec: IterationRecord) -> dict:
    return asdict(rec)
