"""Exact reference computations for small instances.

Everything here enumerates the joint assignment space explicitly, so it is
only usable when the product of domain sizes stays below ``cap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factor_graph import COPInstance, total_cost

DEFAULT_CAP = 10_000_000


class SearchSpaceTooLarge(RuntimeError):
    pass


@dataclass
class OracleResult:
    assignment: np.ndarray
    cost: float
    enumerated: int


def _check_cap(instance: COPInstance, cap: int) -> int:
    size = instance.search_space_size()
    if size > cap:
        raise SearchSpaceTooLarge(f"joint space has {size} assignments, cap is {cap}")
    return int(size)


def cost_tensor(instance: COPInstance, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Total cost of every joint assignment, as an array shaped by the domains."""
    _check_cap(instance, cap)
    n = instance.num_variables
    out = np.zeros(tuple(instance.domains))
    for f in instance.functions:
        shape = [1] * n
        for v in f.scope:
            shape[v] = instance.domains[v]
        # order the table axes by variable id before broadcasting
        order = np.argsort(f.scope)
        out = out + np.transpose(f.table, order).reshape(shape)
    return out


def solve_exact(instance: COPInstance, cap: int = DEFAULT_CAP) -> OracleResult:
    """Minimum-cost assignment; ties go to the lexicographically smallest one."""
    size = _check_cap(instance, cap)
    costs = cost_tensor(instance, cap)
    flat = int(np.argmin(costs)) if costs.size else 0
    best = np.array(np.unravel_index(flat, costs.shape), dtype=np.intp).reshape(-1)
    return OracleResult(best, total_cost(instance, best), size)


def enumerate_expected_cost(instance: COPInstance, probs, cap: int = DEFAULT_CAP) -> float:
    """Expected total cost when each variable is drawn independently from ``probs[i]``.

    Sums cost times probability over every joint assignment.
    """
    _check_cap(instance, cap)
    costs = cost_tensor(instance, cap)
    weight = np.ones(())
    for i in range(instance.num_variables):
        p = np.asarray(probs[i], dtype=np.float64)[: instance.domains[i]]
        weight = np.multiply.outer(weight, p)
    return float(np.sum(costs * weight))


def solve_tree(instance: COPInstance) -> OracleResult:
    """Exact min-sum dynamic programming for instances whose functions are
    unary or binary and whose constraint graph is a forest.

    Each tree is rooted at its smallest variable; children are eliminated
    bottom-up and values are read off top-down.  Ties resolve to the lowest
    value index of each variable in root-to-leaf order, which is not
    necessarily the lexicographic tie-break of :func:`solve_exact`.
    """
    n = instance.num_variables
    unary = [np.zeros(d) for d in instance.domains]
    pair: dict[tuple[int, int], np.ndarray] = {}
    for f in instance.functions:
        if f.arity == 0:
            continue
        if f.arity == 1:
            unary[f.scope[0]] = unary[f.scope[0]] + f.table
        elif f.arity == 2:
            u, v = f.scope
            table = f.table if u < v else f.table.T
            key = (min(u, v), max(u, v))
            pair[key] = pair.get(key, 0) + table
        else:
            raise ValueError("solve_tree handles unary and binary functions only")

    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in pair:
        adj[u].append(v)
        adj[v].append(u)

    def table(u, v):  # rows indexed by u
        return pair[(u, v)] if u < v else pair[(v, u)].T

    parent = [-1] * n
    order: list[int] = []
    seen = [False] * n
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for w in sorted(adj[u]):
                if w == parent[u]:
                    continue
                if seen[w]:
                    raise ValueError("constraint graph contains a cycle")
                seen[w] = True
                parent[w] = u
                stack.append(w)

    # upward pass: msg[u] = cost of u's subtree as a function of u's value
    subtree = [unary[u].copy() for u in range(n)]
    best_child: dict[int, np.ndarray] = {}
    for u in reversed(order):
        p = parent[u]
        if p < 0:
            continue
        combined = table(p, u) + subtree[u][None, :]
        best_child[u] = combined.argmin(axis=1)
        subtree[p] = subtree[p] + combined.min(axis=1)

    assignment = np.zeros(n, dtype=np.intp)
    for u in order:
        p = parent[u]
        assignment[u] = int(subtree[u].argmin()) if p < 0 else int(best_child[u][assignment[p]])
    return OracleResult(assignment, total_cost(instance, assignment), 0)
