"""Random benchmark families: random COPs, weighted graph colouring,
Barabasi-Albert scale-free and Newman-Watts-Strogatz small-world networks.

Every generator is a pure function of its :class:`GeneratorConfig`; the
seed feeds a fresh ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .instance import COPInstance, CostFunction, InvalidInstanceError

FAMILIES = ("random-cop", "wgcp", "scale-free", "small-world")

DEFAULT_DOMAIN = {"random-cop": 15, "wgcp": 5, "scale-free": 15, "small-world": 15}
DEFAULT_COSTS = {"random-cop": (0.0, 100.0), "wgcp": (1.0, 100.0),
                 "scale-free": (0.0, 100.0), "small-world": (0.0, 100.0)}


@dataclass
class GeneratorConfig:
    family: str
    n: int
    domain_size: int | None = None
    p1: float = 0.25
    m0: int = 10
    m1: int = 10
    k: int = 10
    p: float = 0.3
    cost_low: float | None = None
    cost_high: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInstanceError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.domain_size is None:
            self.domain_size = DEFAULT_DOMAIN[self.family]
        low, high = DEFAULT_COSTS[self.family]
        self.cost_low = low if self.cost_low is None else float(self.cost_low)
        self.cost_high = high if self.cost_high is None else float(self.cost_high)
        if self.n < 1:
            raise InvalidInstanceError(f"need at least one variable, got n={self.n}")
        if self.domain_size < 1:
            raise InvalidInstanceError(f"domain size must be positive, got {self.domain_size}")
        if self.cost_high < self.cost_low:
            raise InvalidInstanceError(f"empty cost range [{self.cost_low}, {self.cost_high}]")
        if self.family in ("random-cop", "wgcp") and not 0.0 < self.p1 <= 1.0:
            raise InvalidInstanceError(f"density p1 must lie in (0, 1], got {self.p1}")
        if self.family == "scale-free":
            if not self.m0 >= self.m1 >= 1:
                raise InvalidInstanceError(f"need m0 >= m1 >= 1, got m0={self.m0}, m1={self.m1}")
            if self.n <= self.m0:
                raise InvalidInstanceError(f"need n > m0, got n={self.n}, m0={self.m0}")
        if self.family == "small-world":
            if self.k < 2 or self.k % 2 or self.k >= self.n:
                raise InvalidInstanceError(f"k must be even with 2 <= k < n, got k={self.k}, n={self.n}")
            if not 0.0 <= self.p <= 1.0:
                raise InvalidInstanceError(f"shortcut probability must lie in [0, 1], got {self.p}")

    def family_params(self) -> dict:
        keys = {"random-cop": ("p1",), "wgcp": ("p1",), "scale-free": ("m0", "m1"),
                "small-world": ("k", "p")}[self.family]
        return {k: getattr(self, k) for k in keys}

    def with_seed(self, seed: int) -> "GeneratorConfig":
        return GeneratorConfig(**{**asdict(self), "seed": seed})


def _meta(cfg: GeneratorConfig) -> dict:
    return {
        "family": cfg.family,
        "n": cfg.n,
        "domain_size": cfg.domain_size,
        "params": cfg.family_params(),
        "costs": {"distribution": "uniform-continuous", "low": cfg.cost_low, "high": cfg.cost_high},
        "seed": cfg.seed,
    }


def _random_tables(rng, edges, cfg: GeneratorConfig) -> list[CostFunction]:
    d = cfg.domain_size
    return [CostFunction((u, v), rng.uniform(cfg.cost_low, cfg.cost_high, size=(d, d)))
            for u, v in edges]


def _density_edges(rng, n: int, p1: float) -> list[tuple[int, int]]:
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p1:
                edges.append((u, v))
    return edges


def gen_random_cop(cfg: GeneratorConfig) -> COPInstance:
    """Each unordered pair is constrained independently with probability ``p1``."""
    if cfg.family != "random-cop":
        raise InvalidInstanceError(f"gen_random_cop called with family {cfg.family!r}")
    rng = np.random.default_rng(cfg.seed)
    edges = _density_edges(rng, cfg.n, cfg.p1)
    return COPInstance([cfg.domain_size] * cfg.n, _random_tables(rng, edges, cfg), _meta(cfg))


def gen_wgcp(cfg: GeneratorConfig) -> COPInstance:
    """Weighted graph colouring: one cost ``u ~ U[low, high]`` per constraint on
    equal-colour assignments, zero elsewhere."""
    if cfg.family != "wgcp":
        raise InvalidInstanceError(f"gen_wgcp called with family {cfg.family!r}")
    rng = np.random.default_rng(cfg.seed)
    edges = _density_edges(rng, cfg.n, cfg.p1)
    d = cfg.domain_size
    functions = [CostFunction((u, v), np.eye(d) * rng.uniform(cfg.cost_low, cfg.cost_high))
                 for u, v in edges]
    return COPInstance([d] * cfg.n, functions, _meta(cfg))


def ba_edges(rng: np.random.Generator, n: int, m0: int, m1: int) -> list[tuple[int, int]]:
    """Preferential attachment grown from a ring of ``m0`` vertices."""
    edges: list[tuple[int, int]] = []
    if m0 == 2:
        edges.append((0, 1))
    elif m0 > 2:
        edges.extend((i, (i + 1) % m0) for i in range(m0))
    degree = np.zeros(n)
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    for new in range(m0, n):
        weights = degree[:new]
        total = weights.sum()
        probs = weights / total if total > 0 else np.full(new, 1.0 / new)
        chosen: list[int] = []
        while len(chosen) < m1:
            target = int(rng.choice(new, p=probs))
            if target not in chosen:
                chosen.append(target)
        for target in chosen:
            edges.append((target, new))
            degree[target] += 1
            degree[new] += 1
    return edges


def gen_scale_free(cfg: GeneratorConfig) -> COPInstance:
    if cfg.family != "scale-free":
        raise InvalidInstanceError(f"gen_scale_free called with family {cfg.family!r}")
    rng = np.random.default_rng(cfg.seed)
    edges = ba_edges(rng, cfg.n, cfg.m0, cfg.m1)
    return COPInstance([cfg.domain_size] * cfg.n, _random_tables(rng, edges, cfg), _meta(cfg))


def nws_edges(rng: np.random.Generator, n: int, k: int, p: float) -> list[tuple[int, int]]:
    """Ring lattice joining each vertex to its ``k`` nearest neighbours, plus one
    random shortcut per lattice edge with probability ``p``.  Nothing is removed."""
    half = k // 2
    lattice = [(u, (u + j) % n) for j in range(1, half + 1) for u in range(n)]
    neighbours = [set() for _ in range(n)]
    for u, v in lattice:
        neighbours[u].add(v)
        neighbours[v].add(u)
    edges = list(lattice)
    for u, _ in lattice:
        if rng.random() >= p:
            continue
        if len(neighbours[u]) >= n - 1:
            continue
        w = int(rng.integers(n))
        while w == u or w in neighbours[u]:
            w = int(rng.integers(n))
        neighbours[u].add(w)
        neighbours[w].add(u)
        edges.append((u, w))
    return edges


def gen_small_world(cfg: GeneratorConfig) -> COPInstance:
    if cfg.family != "small-world":
        raise InvalidInstanceError(f"gen_small_world called with family {cfg.family!r}")
    rng = np.random.default_rng(cfg.seed)
    edges = nws_edges(rng, cfg.n, cfg.k, cfg.p)
    return COPInstance([cfg.domain_size] * cfg.n, _random_tables(rng, edges, cfg), _meta(cfg))


_DISPATCH = {
    "random-cop": gen_random_cop,
    "wgcp": gen_wgcp,
    "scale-free": gen_scale_free,
    "small-world": gen_small_world,
}


def generate(cfg: GeneratorConfig) -> COPInstance:
    return _DISPATCH[cfg.family](cfg)
