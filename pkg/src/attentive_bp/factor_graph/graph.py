from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import COPInstance


@dataclass(frozen=True)
class FunctionGroup:
    """Functions sharing one table shape, stacked for vectorised message updates.

    ``edges[k, j]`` is the edge id joining function ``func_ids[k]`` to its
    ``j``-th scope variable.
    """

    func_ids: np.ndarray
    tables: np.ndarray
    edges: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tables.shape[1:]


class FactorGraph:
    """Bipartite variable/function graph with a dense edge index.

    Edge ``e`` joins variable ``edge_var[e]`` and function ``edge_func[e]``; the
    same id names both the variable->function and the function->variable
    message.  Ids are assigned by function index, then scope position.

    Attributes
    ----------
    pair_target, pair_source : ndarray
        For every edge ``e = (i, l)`` and every other edge ``e' = (i, m)`` of
        the same variable, one pair ``(e, e')``.  These drive the weighted
        neighbour sums of the variable->function update.
    valid : ndarray, shape (r, dmax)
        1.0 where the message entry lies inside the variable's domain.
    """

    def __init__(self, instance: COPInstance):
        self.instance = instance
        self.num_vars = instance.num_variables
        self.num_funcs = instance.num_functions
        self.domains = np.asarray(instance.domains, dtype=np.intp)
        self.dmax = int(self.domains.max()) if self.num_vars else 1

        edge_var, edge_func, edge_pos = [], [], []
        self.func_edges: list[np.ndarray] = []
        for l, f in enumerate(instance.functions):
            start = len(edge_var)
            for pos, v in enumerate(f.scope):
                edge_var.append(v)
                edge_func.append(l)
                edge_pos.append(pos)
            self.func_edges.append(np.arange(start, len(edge_var)))
        self.edge_var = np.asarray(edge_var, dtype=np.intp)
        self.edge_func = np.asarray(edge_func, dtype=np.intp)
        self.edge_pos = np.asarray(edge_pos, dtype=np.intp)
        self.num_edges = len(edge_var)

        self.var_edges: list[np.ndarray] = [[] for _ in range(self.num_vars)]
        for e, v in enumerate(edge_var):
            self.var_edges[v].append(e)
        self.var_edges = [np.asarray(es, dtype=np.intp) for es in self.var_edges]
        self.degree = np.array([len(es) for es in self.var_edges], dtype=np.intp)
        self.edge_degree = self.degree[self.edge_var]

        targets, sources = [], []
        for e in range(self.num_edges):
            for other in self.var_edges[self.edge_var[e]]:
                if other != e:
                    targets.append(e)
                    sources.append(other)
        self.pair_target = np.asarray(targets, dtype=np.intp)
        self.pair_source = np.asarray(sources, dtype=np.intp)

        self.edge_domain = self.domains[self.edge_var] if self.num_edges else np.zeros(0, np.intp)
        cols = np.arange(self.dmax)
        self.valid = (cols[None, :] < self.edge_domain[:, None]).astype(np.float64)
        self.var_valid = (cols[None, :] < self.domains[:, None]).astype(np.float64)
        self.uniform_domains = bool(np.all(self.domains == self.dmax))

        self.groups = self._build_groups(instance)
        order = np.concatenate([g.edges.T.reshape(-1) for g in self.groups]) if self.groups else np.zeros(0, np.intp)
        # groups emit f2v messages position-major; this permutation restores edge order
        self._group_inverse = np.empty(self.num_edges, dtype=np.intp)
        self._group_inverse[order] = np.arange(len(order))

    def _build_groups(self, instance: COPInstance) -> list[FunctionGroup]:
        by_shape: dict[tuple[int, ...], list[int]] = {}
        for l, f in enumerate(instance.functions):
            by_shape.setdefault(f.table.shape, []).append(l)
        groups = []
        for shape in sorted(by_shape, key=lambda s: (len(s), s)):
            ids = np.asarray(by_shape[shape], dtype=np.intp)
            tables = np.stack([instance.functions[l].table for l in ids]) if len(ids) else None
            edges = np.stack([self.func_edges[l] for l in ids]).reshape(len(ids), len(shape))
            groups.append(FunctionGroup(ids, tables, edges))
        return groups

    @property
    def group_inverse(self) -> np.ndarray:
        return self._group_inverse

    def var_neighbors(self, i: int) -> list[int]:
        """Functions whose scope contains variable ``i``, in edge order."""
        return [int(self.edge_func[e]) for e in self.var_edges[i]]

    def func_neighbors(self, l: int) -> list[int]:
        return [int(self.edge_var[e]) for e in self.func_edges[l]]

    def edge_id(self, i: int, l: int) -> int:
        for e in self.var_edges[i]:
            if self.edge_func[e] == l:
                return int(e)
        raise KeyError(f"no edge between variable {i} and function {l}")

    def pairs_of(self, e: int) -> np.ndarray:
        """Indices into the pair arrays whose target edge is ``e``."""
        return np.flatnonzero(self.pair_target == e)

    def adjacency_edges(self) -> set[tuple[int, int]]:
        return {(int(v), int(f)) for v, f in zip(self.edge_var, self.edge_func)}


def build_factor_graph(instance: COPInstance) -> FactorGraph:
    return FactorGraph(instance)
