"""Random instance builders shared by the test modules."""

import itertools

import numpy as np

from attentive_bp import autodiff as ad
from attentive_bp.factor_graph import COPInstance, CostFunction


def random_instance(rng, n, dmax=3, p=0.5, unary=0.3, ternary=0.0, vary_domains=False, low=0.0, high=10.0):
    """Binary constraints on pairs with probability ``p``, plus optional unary and ternary ones."""
    domains = [int(rng.integers(2, dmax + 1)) if vary_domains else dmax for _ in range(n)]
    funcs = []
    for u, v in itertools.combinations(range(n), 2):
        if rng.random() < p:
            funcs.append(CostFunction((u, v), rng.uniform(low, high, (domains[u], domains[v]))))
    for i in range(n):
        if rng.random() < unary:
            funcs.append(CostFunction((i,), rng.uniform(low, high, domains[i])))
    if n >= 3 and rng.random() < ternary:
        scope = tuple(int(x) for x in rng.choice(n, 3, replace=False))
        funcs.append(CostFunction(scope, rng.uniform(low, high, tuple(domains[v] for v in scope))))
    return COPInstance(domains, funcs)


def random_cyclic_instance(rng, n=6, d=3):
    """Ring plus random chords, so the constraint graph always has a cycle."""
    pairs = {(i, (i + 1) % n) for i in range(n)}
    for u, v in itertools.combinations(range(n), 2):
        if rng.random() < 0.3:
            pairs.add((u, v))
    funcs = [CostFunction(e, rng.uniform(0, 10, (d, d))) for e in sorted(pairs)]
    return COPInstance([d] * n, funcs)


def random_tree(rng, n=10, d=4, unary=0.3):
    """Random spanning tree (each vertex attaches to an earlier one) with optional unary terms."""
    perm = rng.permutation(n)
    funcs = []
    for k in range(1, n):
        parent = perm[int(rng.integers(0, k))]
        child = perm[k]
        scope = (int(parent), int(child)) if rng.random() < 0.5 else (int(child), int(parent))
        funcs.append(CostFunction(scope, rng.uniform(0, 10, (d, d))))
    for i in range(n):
        if rng.random() < unary:
            funcs.append(CostFunction((i,), rng.uniform(0, 10, d)))
    return COPInstance([d] * n, funcs)


def numeric_grad(f, x, h=1e-5):
    """Central differences of scalar ``f`` w.r.t. every entry of array ``x`` (modified in place, then restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def max_rel_error(analytic, numeric, floor=1e-6):
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all entries."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def analytic_grads(loss_fn, store):
    store.zero_grad()
    ad.backward(loss_fn())
    return store.grads()
