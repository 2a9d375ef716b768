"""Gated recurrent cell and graph-attention layer built on :mod:`tensor`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

GAT_SCORE_SLOPE = 0.2
OUTPUT_SLOPE = 0.01


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_gru(rng: np.random.Generator, input_size: int, hidden_size: int) -> dict[str, np.ndarray]:
    """Parameter arrays for :func:`gru_cell`, keyed by gate."""
    params = {}
    for gate in ("z", "r", "h"):
        params[f"W_{gate}"] = uniform_init(rng, (input_size, hidden_size), input_size)
        params[f"U_{gate}"] = uniform_init(rng, (hidden_size, hidden_size), hidden_size)
        params[f"b_{gate}"] = uniform_init(rng, (hidden_size,), hidden_size)
    return params


def gru_cell(params: dict[str, Tensor], h_prev, x) -> Tensor:
    """One GRU update applied row-wise to a batch.

    ``h_prev`` has shape ``(n, q)`` and ``x`` shape ``(n, input_size)``.

        z  = sigmoid(x W_z + h U_z + b_z)
        r  = sigmoid(x W_r + h U_r + b_r)
        h~ = tanh(x W_h + (r * h) U_h + b_h)
        h' = (1 - z) * h + z * h~
    """
    h_prev, x = T.as_tensor(h_prev), T.as_tensor(x)
    q = params["U_z"].shape[0]
    if h_prev.ndim != 2 or h_prev.shape[1] != q:
        raise ShapeError(f"gru_cell: hidden state shape {h_prev.shape}, expected (n, {q})")
    if x.ndim != 2 or x.shape[1] != params["W_z"].shape[0] or x.shape[0] != h_prev.shape[0]:
        raise ShapeError(
            f"gru_cell: input shape {x.shape}, expected ({h_prev.shape[0]}, {params['W_z'].shape[0]})"
        )
    z = T.sigmoid(x @ params["W_z"] + h_prev @ params["U_z"] + params["b_z"])
    r = T.sigmoid(x @ params["W_r"] + h_prev @ params["U_r"] + params["b_r"])
    cand = T.tanh(x @ params["W_h"] + (r * h_prev) @ params["U_h"] + params["b_h"])
    return (1.0 - z) * h_prev + z * cand


@dataclass(frozen=True)
class Adjacency:
    """Directed edge list ``src -> dst`` over ``num_nodes`` nodes, self-loops included."""

    src: np.ndarray
    dst: np.ndarray
    num_nodes: int

    @classmethod
    def with_self_loops(cls, src, dst, num_nodes: int) -> "Adjacency":
        loops = np.arange(num_nodes)
        src = np.concatenate([np.asarray(src, dtype=np.intp), loops])
        dst = np.concatenate([np.asarray(dst, dtype=np.intp), loops])
        return cls(src, dst, num_nodes)


def init_gat(
    rng: np.random.Generator, in_features: int, channels: int, heads: int
) -> dict[str, np.ndarray]:
    return {
        "W": uniform_init(rng, (in_features, heads * channels), in_features),
        "a_src": uniform_init(rng, (heads, channels), channels),
        "a_dst": uniform_init(rng, (heads, channels), channels),
    }


def gat_layer(
    params: dict[str, Tensor],
    features,
    adj: Adjacency,
    heads: int,
    concat_heads: bool = True,
    return_attention: bool = False,
):
    """Graph attention layer with additive scoring.

    For every head, node ``i`` aggregates its in-neighbours ``j`` as
    ``sum_j alpha_ij W e_j`` where ``alpha`` is the softmax over ``j`` of
    ``LeakyReLU_0.2(a_dst . W e_i + a_src . W e_j)``.  Heads are concatenated
    (or averaged when ``concat_heads`` is false) and passed through
    ``LeakyReLU_0.01``.
    """
    features = T.as_tensor(features)
    if features.ndim != 2 or features.shape[0] != adj.num_nodes:
        raise ShapeError(f"gat_layer: features {features.shape} for {adj.num_nodes} nodes")
    if features.shape[1] != params["W"].shape[0]:
        raise ShapeError(
            f"gat_layer: feature width {features.shape[1]}, weight expects {params['W'].shape[0]}"
        )
    channels = params["a_src"].shape[1]
    n = adj.num_nodes
    wh = T.reshape(features @ params["W"], (n, heads, channels))
    score_src = T.sum_(wh * params["a_src"], axis=2)  # (n, heads)
    score_dst = T.sum_(wh * params["a_dst"], axis=2)
    scores = T.leaky_relu(T.take(score_src, adj.src) + T.take(score_dst, adj.dst), GAT_SCORE_SLOPE)
    alpha = T.segment_softmax(scores, adj.dst, n)  # (edges, heads)
    messages = T.take(wh, adj.src) * T.reshape(alpha, (len(adj.src), heads, 1))
    agg = T.segment_sum(messages, adj.dst, n)  # (n, heads, channels)
    if concat_heads:
        out = T.reshape(agg, (n, heads * channels))
    else:
        out = T.mean(agg, axis=1)
    out = T.leaky_relu(out, OUTPUT_SLOPE)
    if return_attention:
        return out, alpha
    return out
