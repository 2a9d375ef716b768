"""Neural inference of damping factors and neighbour weights.

Pipeline for one BP iteration:

1. two GRUs update a hidden vector per directed edge from the latest
   messages (one GRU per direction);
2. the factor graph is augmented with one node per directed message, fed
   with those hiddens, and embedded by a stack of graph-attention layers;
3. for every variable ``x_i`` and target function ``f_l``, a multi-head
   attention readout over the function embeddings of ``N_i`` yields the
   neighbour weights (softmax over ``N_i \\ {f_l}``) and the damping factor
   (two-way softmax of ``f_l``'s own score against the mean of the others),
   averaged across heads.

Parameter names
---------------
``gru_v2f.*``, ``gru_f2v.*``     the two GRUs
``gat{g}.*``                      graph-attention layer ``g`` (1-based)
``att.W1/W2/W3``                  readout heads, stacked along axis 0
``embed.var``, ``embed.func``     shared initial features of variable/function nodes
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adjacency, ParameterStore, Tensor
from .bp import HyperParams, MessageSet
from .factor_graph import FactorGraph

MODES = ("full", "heter_lambda", "homo_lambda")


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 8
    gat_layers: int = 4
    gat_heads: int = 4
    gat_channels: int = 8
    att_heads: int = 4
    att_width: int = 8
    msg_width: int = 15
    mode: str = "full"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown model mode {self.mode!r}; choose from {MODES}")
        for name in ("hidden", "gat_layers", "gat_heads", "gat_channels", "att_heads", "att_width", "msg_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def init_params(cfg: ModelConfig, seed: int = 0) -> ParameterStore:
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    for direction in ("v2f", "f2v"):
        for k, v in ad.init_gru(rng, cfg.msg_width, cfg.hidden).items():
            store.add(f"gru_{direction}.{k}", v)
    width = cfg.hidden
    for g in range(1, cfg.gat_layers + 1):
        for k, v in ad.init_gat(rng, width, cfg.gat_channels, cfg.gat_heads).items():
            store.add(f"gat{g}.{k}", v)
        width = cfg.gat_heads * cfg.gat_channels
    c, w, heads = cfg.gat_channels, cfg.att_width, cfg.att_heads
    store.add("att.W1", ad.uniform_init(rng, (heads, 2 * w, 1), 2 * w))
    store.add("att.W2", ad.uniform_init(rng, (heads, c, w), c))
    store.add("att.W3", ad.uniform_init(rng, (heads, c, w), c))
    store.add("embed.var", ad.uniform_init(rng, (cfg.hidden,), cfg.hidden))
    store.add("embed.func", ad.uniform_init(rng, (cfg.hidden,), cfg.hidden))
    return store


def parameter_groups(cfg: ModelConfig) -> dict[str, list[tuple[str, object]]]:
    """Named parameter groups as ``(parameter name, index)`` slices.

    Readout heads share stacked arrays, so each head is addressed by its
    leading index.
    """
    groups: dict[str, list[tuple[str, object]]] = {
        "phi1": [(f"gru_v2f.{k}", ...) for k in ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")],
        "phi2": [(f"gru_f2v.{k}", ...) for k in ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")],
    }
    for g in range(1, cfg.gat_layers + 1):
        groups[f"psi{g}"] = [(f"gat{g}.{k}", ...) for k in ("W", "a_src", "a_dst")]
    for k in range(cfg.att_heads):
        groups[f"zeta{k + 1}"] = [(f"att.{m}", k) for m in ("W1", "W2", "W3")]
    groups["embed"] = [("embed.var", ...), ("embed.func", ...)]
    return groups


@dataclass
class EncoderState:
    """GRU hidden vector per directed edge, ``(r, q)`` for each direction."""

    h_v2f: Tensor
    h_f2v: Tensor

    @classmethod
    def zeros(cls, graph: FactorGraph, hidden: int) -> "EncoderState":
        return cls(Tensor(np.zeros((graph.num_edges, hidden))), Tensor(np.zeros((graph.num_edges, hidden))))

    def detach(self) -> "EncoderState":
        return EncoderState(self.h_v2f.detach(), self.h_f2v.detach())


class AugmentedGraph:
    """Factor graph plus one node per directed message.

    Node ids: variables ``[0, n)``, functions ``[n, n+F)``, v2f message
    nodes ``[n+F, n+F+r)``, f2v message nodes ``[n+F+r, n+F+2r)``.  Edges
    follow the message direction (``x -> m_{x->f} -> f`` and
    ``f -> m_{f->x} -> x``); every node also gets a self-loop.
    """

    def __init__(self, graph: FactorGraph):
        n, F, r = graph.num_vars, graph.num_funcs, graph.num_edges
        self.graph = graph
        self.num_nodes = n + F + 2 * r
        self.func_nodes = n + np.arange(F)
        v2f_nodes = n + F + np.arange(r)
        f2v_nodes = n + F + r + np.arange(r)
        var_of_edge = graph.edge_var
        func_of_edge = n + graph.edge_func
        src = np.concatenate([var_of_edge, v2f_nodes, func_of_edge, f2v_nodes])
        dst = np.concatenate([v2f_nodes, func_of_edge, f2v_nodes, var_of_edge])
        self.adj = Adjacency.with_self_loops(src, dst, self.num_nodes)
        self._var_ones = np.ones((n, 1))
        self._func_ones = np.ones((F, 1))

    def features(self, params: ParameterStore, state: EncoderState) -> Tensor:
        var_feat = self._var_ones * ad.reshape(params["embed.var"], (1, -1))
        func_feat = self._func_ones * ad.reshape(params["embed.func"], (1, -1))
        return ad.concat([var_feat, func_feat, state.h_v2f, state.h_f2v], axis=0)


def _pad_messages(x: Tensor, width: int) -> Tensor:
    if x.shape[1] > width:
        raise ad.ShapeError(f"messages are {x.shape[1]} wide, model accepts at most {width}")
    return ad.pad_last(x, width)


def encode_messages(params: ParameterStore, cfg: ModelConfig, state: EncoderState, msgs: MessageSet) -> EncoderState:
    h_v2f = ad.gru_cell(params.group("gru_v2f"), state.h_v2f, _pad_messages(msgs.v2f, cfg.msg_width))
    h_f2v = ad.gru_cell(params.group("gru_f2v"), state.h_f2v, _pad_messages(msgs.f2v, cfg.msg_width))
    return EncoderState(h_v2f, h_f2v)


def embed_graph(params: ParameterStore, cfg: ModelConfig, aug: AugmentedGraph, state: EncoderState) -> Tensor:
    """Final-layer embedding of every function node, shape ``(F, gat_channels)``."""
    x = aug.features(params, state)
    for g in range(1, cfg.gat_layers + 1):
        last = g == cfg.gat_layers
        x = ad.gat_layer(params.group(f"gat{g}"), x, aug.adj, cfg.gat_heads, concat_heads=not last)
    return ad.take(x, aug.func_nodes)


def attention_scores(params: ParameterStore, embeddings, graph: FactorGraph) -> tuple[Tensor, Tensor]:
    """Per-head sigmoid scores ``a_m(l)``.

    Returns ``(self_scores, pair_scores)`` of shapes ``(r, K)`` and
    ``(P, K)``: the score of ``f_l`` for the message along edge ``(i, l)``,
    and of ``f_m`` (pair source) w.r.t. target ``f_l`` (pair target).
    """
    emb = ad.reshape(ad.as_tensor(embeddings), (1,) + ad.as_tensor(embeddings).shape)
    w1 = params["att.W1"]
    w = params["att.W2"].shape[2]
    w1_query = ad.getitem(w1, (slice(None), slice(0, w), slice(None)))
    w1_key = ad.getitem(w1, (slice(None), slice(w, 2 * w), slice(None)))
    query = ad.matmul(ad.matmul(emb, params["att.W2"]), w1_query)  # (K, F, 1)
    key = ad.matmul(ad.matmul(emb, params["att.W3"]), w1_key)
    heads = query.shape[0]
    query = ad.transpose(ad.reshape(query, (heads, -1)), (1, 0))  # (F, K)
    key = ad.transpose(ad.reshape(key, (heads, -1)), (1, 0))
    target_func = graph.edge_func
    self_scores = ad.sigmoid(ad.take(query, target_func) + ad.take(key, target_func))
    pair_scores = ad.sigmoid(ad.take(query, graph.edge_func[graph.pair_target])
                             + ad.take(key, graph.edge_func[graph.pair_source]))
    return self_scores, pair_scores


def hyperparams_from_scores(self_scores, pair_scores, graph: FactorGraph, mode: str = "full") -> HyperParams:
    """Turn per-head scores into head-averaged damping factors and weights."""
    r = graph.num_edges
    self_scores, pair_scores = ad.as_tensor(self_scores), ad.as_tensor(pair_scores)
    weights = ad.segment_softmax(pair_scores, graph.pair_target, r)
    others = np.maximum(graph.edge_degree - 1, 1).astype(np.float64).reshape(-1, 1)
    # degree-1 variables have no other neighbours; their mean term is 0
    mean_others = ad.segment_sum(pair_scores, graph.pair_target, r) / others
    lam_heads = ad.sigmoid(self_scores - mean_others)
    lam = ad.mean(lam_heads, axis=1)
    w = ad.mean(weights, axis=1)
    extras = {"lam_heads": lam_heads, "weight_heads": weights}
    if mode != "full":
        w = HyperParams.uniform(graph).weights
    if mode == "homo_lambda":
        lam = ad.mean(lam) * np.ones(r)
    return HyperParams(lam, w, extras)


def infer_hyperparams(params: ParameterStore, cfg: ModelConfig, embeddings, graph: FactorGraph) -> HyperParams:
    self_scores, pair_scores = attention_scores(params, embeddings, graph)
    return hyperparams_from_scores(self_scores, pair_scores, graph, cfg.mode)


def model_step(
    params: ParameterStore,
    cfg: ModelConfig,
    state: EncoderState,
    msgs: MessageSet,
    graph: FactorGraph,
    aug: AugmentedGraph | None = None,
) -> tuple[HyperParams, EncoderState]:
    """Hyperparameters for the next iteration from the latest messages.

    The encoder state carries the message history, so only the most
    recent messages are passed in.
    """
    aug = aug if aug is not None else AugmentedGraph(graph)
    state = encode_messages(params, cfg, state, msgs)
    emb = embed_graph(params, cfg, aug, state)
    return infer_hyperparams(params, cfg, emb, graph), state


class DABPModel:
    """Bundles a configuration, its parameters and per-graph caches."""

    def __init__(self, cfg: ModelConfig | None = None, params: ParameterStore | None = None, seed: int = 0):
        self.cfg = cfg or ModelConfig()
        self.params = params if params is not None else init_params(self.cfg, seed)
        self._aug: dict[int, AugmentedGraph] = {}

    def augmented(self, graph: FactorGraph) -> AugmentedGraph:
        key = id(graph)
        if key not in self._aug:
            self._aug = {key: AugmentedGraph(graph)}
        return self._aug[key]

    def initial_state(self, graph: FactorGraph) -> EncoderState:
        return EncoderState.zeros(graph, self.cfg.hidden)

    def step(self, state: EncoderState, msgs: MessageSet, graph: FactorGraph) -> tuple[HyperParams, EncoderState]:
        return model_step(self.params, self.cfg, state, msgs, graph, self.augmented(graph))
