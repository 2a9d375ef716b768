"""Synchronous min-sum message passing.

Messages live in ``(r, dmax)`` arrays, one row per edge of the
:class:`~attentive_bp.factor_graph.FactorGraph`; entries beyond a variable's
domain are kept at zero.  Every update reads only the previous iteration's
messages, so results do not depend on edge order.

All functions accept plain arrays or autodiff :class:`Tensor` values and
return tensors; gradients flow whenever an input requires them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .factor_graph import FactorGraph

DEFAULT_EPS = 1e-5
_PAD_COST = 1e30


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


@dataclass
class MessageSet:
    """Variable->function (``v2f``) and function->variable (``f2v``) messages at iteration ``t``."""

    v2f: Tensor
    f2v: Tensor
    t: int = 0

    def __post_init__(self):
        self.v2f = ad.as_tensor(self.v2f)
        self.f2v = ad.as_tensor(self.f2v)
        if self.v2f.shape != self.f2v.shape:
            raise ValueError(f"v2f shape {self.v2f.shape} differs from f2v shape {self.f2v.shape}")

    @classmethod
    def zeros(cls, graph: FactorGraph) -> "MessageSet":
        shape = (graph.num_edges, graph.dmax)
        return cls(np.zeros(shape), np.zeros(shape), 0)

    def detach(self) -> "MessageSet":
        return MessageSet(self.v2f.detach(), self.f2v.detach(), self.t)

    def v2f_of(self, graph: FactorGraph, e: int) -> np.ndarray:
        return self.v2f.data[e, : graph.edge_domain[e]].copy()

    def f2v_of(self, graph: FactorGraph, e: int) -> np.ndarray:
        return self.f2v.data[e, : graph.edge_domain[e]].copy()

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.v2f.data)) and np.all(np.isfinite(self.f2v.data)))


@dataclass
class HyperParams:
    """Per-edge damping factors and per-pair neighbour weights for one iteration.

    ``weights[p]`` is the weight of message ``f_m -> x_i`` (edge
    ``graph.pair_source[p]``) when composing ``x_i -> f_l`` (edge
    ``graph.pair_target[p]``).
    """

    lam: Tensor
    weights: Tensor
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lam = ad.as_tensor(self.lam)
        self.weights = ad.as_tensor(self.weights)

    @classmethod
    def uniform(cls, graph: FactorGraph, lam: float = 0.0) -> "HyperParams":
        deg = graph.edge_degree[graph.pair_target].astype(np.float64)
        return cls(np.full(graph.num_edges, float(lam)), 1.0 / (deg - 1.0))

    def weight_vector(self, graph: FactorGraph, i: int, l: int) -> dict[int, float]:
        """Weights over ``N_i \\ {f_l}`` as ``{function id: weight}``."""
        e = graph.edge_id(i, l)
        return {int(graph.edge_func[graph.pair_source[p]]): float(self.weights.data[p])
                for p in graph.pairs_of(e)}

    def violations(self, graph: FactorGraph, tol: float = 1e-6) -> list[str]:
        problems = []
        lam = self.lam.data
        if lam.shape != (graph.num_edges,):
            return [f"lambda has shape {lam.shape}, expected ({graph.num_edges},)"]
        if self.weights.shape != graph.pair_target.shape:
            return [f"weights have shape {self.weights.shape}, expected {graph.pair_target.shape}"]
        bad = np.flatnonzero(~((lam >= 0.0) & (lam <= 1.0)))
        problems += [f"edge {e}: lambda {lam[e]} outside [0, 1]" for e in bad]
        w = self.weights.data
        bad_w = np.flatnonzero(~((w >= 0.0) & (w <= 1.0)))
        problems += [f"pair {p}: weight {w[p]} outside [0, 1]" for p in bad_w]
        sums = np.bincount(graph.pair_target, weights=w, minlength=graph.num_edges)
        has_pairs = graph.edge_degree > 1
        bad_s = np.flatnonzero(has_pairs & (np.abs(sums - 1.0) > tol))
        problems += [f"edge {e}: weights sum to {sums[e]}" for e in bad_s]
        return problems


def _check_finite(x: Tensor, what: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise FloatingPointError(f"{what} contains non-finite entries")


def normalize_v2f(graph: FactorGraph, msgs) -> Tensor:
    """Subtract each row's minimum over valid entries; padding stays zero."""
    msgs = ad.as_tensor(msgs)
    if graph.uniform_domains:
        return msgs - ad.reshape(ad.min_select(msgs, axis=1), (-1, 1))
    masked = msgs + _PAD_COST * (1.0 - graph.valid)
    shifted = msgs - ad.reshape(ad.min_select(masked, axis=1), (-1, 1))
    return shifted * graph.valid


def _neighbour_sum(graph: FactorGraph, f2v: Tensor, weights=None) -> Tensor:
    incoming = ad.take(f2v, graph.pair_source)
    if weights is not None:
        incoming = incoming * ad.reshape(weights, (-1, 1))
    return ad.segment_sum(incoming, graph.pair_target, graph.num_edges)


def v2f_step(graph: FactorGraph, prev: MessageSet, hp: HyperParams, normalize: bool = True) -> Tensor:
    """Weighted damped variable->function update.

    ``mu_{i->l} = lam * mu_prev + (1 - lam) * (|N_i| - 1) * sum_m w_m mu_{m->i}``
    """
    if hp.lam.shape != (graph.num_edges,):
        raise ValueError(f"damping factors cover {hp.lam.shape} edges, graph has {graph.num_edges}")
    if hp.weights.shape != graph.pair_target.shape:
        raise ValueError(
            f"neighbour weights cover {hp.weights.shape} pairs, graph has {graph.pair_target.shape}"
        )
    _check_finite(prev.f2v, "previous f2v messages")
    _check_finite(prev.v2f, "previous v2f messages")
    scale = (graph.edge_degree - 1).astype(np.float64).reshape(-1, 1)
    lam = ad.reshape(hp.lam, (-1, 1))
    combined = _neighbour_sum(graph, prev.f2v, hp.weights) * scale
    out = lam * prev.v2f + (1.0 - lam) * combined
    return normalize_v2f(graph, out) if normalize else out


def v2f_step_vanilla(graph: FactorGraph, prev: MessageSet, normalize: bool = True) -> Tensor:
    """Plain min-sum: ``mu_{i->l} = sum_{m != l} mu_{m->i}``."""
    _check_finite(prev.f2v, "previous f2v messages")
    out = _neighbour_sum(graph, prev.f2v)
    return normalize_v2f(graph, out) if normalize else out


def v2f_step_damped(graph: FactorGraph, prev: MessageSet, lam: float, normalize: bool = True) -> Tensor:
    """Homogeneous damping: ``lam * mu_prev + (1 - lam) * sum_{m != l} mu_{m->i}``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"damping factor must lie in [0, 1], got {lam}")
    _check_finite(prev.f2v, "previous f2v messages")
    _check_finite(prev.v2f, "previous v2f messages")
    out = lam * prev.v2f + (1.0 - lam) * _neighbour_sum(graph, prev.f2v)
    return normalize_v2f(graph, out) if normalize else out


def f2v_step(graph: FactorGraph, v2f) -> Tensor:
    """Function->variable update: minimise the table plus the other scope
    variables' incoming messages, separately for every target value.
    Ties in the minimum resolve to the lowest joint index."""
    v2f = ad.as_tensor(v2f)
    if v2f.shape != (graph.num_edges, graph.dmax):
        raise ValueError(f"v2f messages have shape {v2f.shape}, expected {(graph.num_edges, graph.dmax)}")
    pieces = []
    for group in graph.groups:
        shape = group.shape
        arity = len(shape)
        if arity == 0:
            continue
        k = len(group.func_ids)
        incoming = []
        for j, d in enumerate(shape):
            m = ad.take(v2f, group.edges[:, j])
            if d < graph.dmax:
                m = ad.getitem(m, (slice(None), slice(0, d)))
            bshape = [k] + [1] * arity
            bshape[1 + j] = d
            incoming.append(ad.reshape(m, tuple(bshape)))
        for j, d in enumerate(shape):
            total = ad.Tensor(group.tables)
            for jj in range(arity):
                if jj != j:
                    total = total + incoming[jj]
            if arity > 1:
                if j != 0:
                    axes = [0, 1 + j] + [1 + a for a in range(arity) if a != j]
                    total = ad.transpose(total, axes)
                total = ad.reshape(total, (k, d, -1))
                out = ad.min_select(total, axis=2)
            else:
                out = total
            pieces.append(ad.pad_last(out, graph.dmax))
    if not pieces:
        return ad.Tensor(np.zeros((graph.num_edges, graph.dmax)))
    return ad.take(ad.concat(pieces, axis=0), graph.group_inverse)


def beliefs(graph: FactorGraph, f2v) -> Tensor:
    """Per-variable sum of incoming function->variable messages, shape ``(n, dmax)``."""
    return ad.segment_sum(ad.as_tensor(f2v), graph.edge_var, graph.num_vars)


def decide(belief, domains=None) -> np.ndarray:
    """Lowest-belief value of every variable; ties go to the lowest index.

    ``belief`` is an ``(n, dmax)`` array (entries past ``domains[i]`` are
    ignored) or a sequence of per-variable vectors.
    """
    if isinstance(belief, (list, tuple)):
        return np.array([int(np.argmin(np.asarray(b, dtype=np.float64))) for b in belief], dtype=np.intp)
    b = _data(belief)
    if domains is not None:
        cols = np.arange(b.shape[1])
        b = np.where(cols[None, :] < np.asarray(domains)[:, None], b, np.inf)
    return b.argmin(axis=1).astype(np.intp) if b.size else np.zeros(b.shape[0], dtype=np.intp)


def converged(curr: MessageSet, prev: MessageSet, eps: float = DEFAULT_EPS) -> bool:
    """True when no message entry moved by more than ``eps``."""
    if curr.v2f.shape != prev.v2f.shape or curr.f2v.shape != prev.f2v.shape:
        raise ValueError(
            f"message sets differ in shape: {curr.v2f.shape}/{curr.f2v.shape} vs "
            f"{prev.v2f.shape}/{prev.f2v.shape}"
        )
    if curr.v2f.size == 0:
        return True
    delta = max(np.max(np.abs(curr.v2f.data - prev.v2f.data)),
                np.max(np.abs(curr.f2v.data - prev.f2v.data)))
    return bool(delta <= eps)
