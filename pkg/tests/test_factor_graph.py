import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attentive_bp import oracle
from attentive_bp.factor_graph import (
    COPInstance,
    CostFunction,
    GeneratorConfig,
    InstanceFormatError,
    InvalidInstanceError,
    build_factor_graph,
    deserialize,
    generate,
    load_instance,
    save_instance,
    serialize,
    serialize_bytes,
    split_scfg,
    total_cost,
)
from attentive_bp.factor_graph.generators import ba_edges, nws_edges

from helpers import random_instance

# ---------------------------------------------------------------- instances


def test_total_cost_table_lookup():
    inst = COPInstance([2, 2], [CostFunction((0, 1), [[1, 5], [3, 2]])])
    assert total_cost(inst, (0, 0)) == 1
    assert total_cost(inst, (1, 0)) == 3


def test_total_cost_of_empty_instance_is_zero():
    assert total_cost(COPInstance([3, 2, 4]), (2, 1, 3)) == 0


def test_total_cost_matches_enumerated_cost_tensor():
    rng = np.random.default_rng(0)
    inst = random_instance(rng, 6, dmax=3, p=0.6, unary=0.5, ternary=1.0, vary_domains=True)
    costs = oracle.cost_tensor(inst)
    for a in itertools.product(*[range(d) for d in inst.domains]):
        assert total_cost(inst, a) == pytest.approx(costs[a], abs=1e-12)


def test_flat_tables_are_reshaped_row_major():
    inst = COPInstance([2, 3], [CostFunction((0, 1), np.arange(6.0))])
    assert inst.functions[0].table[1, 0] == 3.0


@pytest.mark.parametrize(
    "domains, funcs, fragment",
    [
        ([2, 2], [((0, 5), np.zeros((2, 2)))], "function 0: scope references unknown variable 5"),
        ([2, 2], [((0,), np.zeros(2)), ((1, 1), np.zeros((2, 2)))], "function 1: duplicate variable"),
        ([2, 2], [((0, 1), np.zeros(3))], "function 0: table has 3 entries"),
        ([2], [((0,), [0.0, np.inf])], "non-finite"),
        ([0], [], "domain size must be positive"),
    ],
)
def test_invalid_instances_are_rejected(domains, funcs, fragment):
    with pytest.raises(InvalidInstanceError, match=fragment):
        COPInstance(domains, funcs)


def test_assignment_checks():
    inst = COPInstance([2, 3], [CostFunction((0, 1), np.zeros((2, 3)))])
    with pytest.raises(InvalidInstanceError):
        total_cost(inst, (0,))
    with pytest.raises(InvalidInstanceError):
        total_cost(inst, (0, 3))


def test_split_scalar_example():
    inst = COPInstance([1, 2], [CostFunction((0, 1), [[10, 20]])])
    split = split_scfg(inst, 0.95)
    np.testing.assert_allclose(split.functions[0].table, [[9.5, 19]])
    np.testing.assert_allclose(split.functions[1].table, [[0.5, 1]])
    assert split.functions[0].scope == split.functions[1].scope == (0, 1)


def test_split_preserves_totals_and_doubles_functions():
    rng = np.random.default_rng(1)
    inst = random_instance(rng, 7, dmax=4, p=0.5, unary=0.4, ternary=1.0, vary_domains=True)
    split = split_scfg(inst, 0.95)
    assert split.num_functions == 2 * inst.num_functions
    for _ in range(100):
        a = [int(rng.integers(d)) for d in inst.domains]
        assert total_cost(split, a) == pytest.approx(total_cost(inst, a), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.1, 1.5])
def test_split_ratio_must_be_open_interval(rho):
    with pytest.raises(InvalidInstanceError):
        split_scfg(COPInstance([2]), rho)


# ---------------------------------------------------------------- factor graph


def test_factor_graph_single_binary_function():
    g = build_factor_graph(COPInstance([2, 2], [CostFunction((0, 1), np.zeros((2, 2)))]))
    assert g.num_edges == 2
    assert g.adjacency_edges() == {(0, 0), (1, 0)}


def test_factor_graph_neighbourhoods():
    inst = COPInstance([2, 2, 2], [CostFunction((0, 1), np.zeros((2, 2))), CostFunction((1, 2), np.zeros((2, 2)))])
    g = build_factor_graph(inst)
    assert g.var_neighbors(1) == [0, 1]
    assert g.func_neighbors(1) == [1, 2]
    assert g.degree.tolist() == [1, 2, 1]
    with pytest.raises(KeyError):
        g.edge_id(0, 1)


def test_factor_graph_edges_and_pairs():
    rng = np.random.default_rng(2)
    inst = random_instance(rng, 8, dmax=3, p=0.4, unary=0.5, ternary=1.0, vary_domains=True)
    g = build_factor_graph(inst)
    assert g.num_edges == sum(f.arity for f in inst.functions)
    assert sorted(set(range(g.num_edges))) == sorted(np.concatenate(g.func_edges).tolist())
    for e in range(g.num_edges):
        assert inst.functions[g.edge_func[e]].scope[g.edge_pos[e]] == g.edge_var[e]
        sources = g.pair_source[g.pairs_of(e)]
        expected = [x for x in g.var_edges[g.edge_var[e]] if x != e]
        assert sorted(sources.tolist()) == sorted(expected)
    np.testing.assert_array_equal(g.valid.sum(axis=1), g.edge_domain)


# ---------------------------------------------------------------- generators


def test_random_cop_count_within_binomial_band():
    cfg = GeneratorConfig("random-cop", 60, p1=0.25, seed=3)
    inst = generate(cfg)
    trials = math.comb(60, 2)
    mean, sigma = trials * 0.25, math.sqrt(trials * 0.25 * 0.75)
    assert abs(inst.num_functions - mean) <= 4 * sigma
    assert inst.domains == [15] * 60
    for f in inst.functions:
        assert f.table.min() >= 0 and f.table.max() <= 100


def test_random_cop_complete_graph_at_density_one():
    inst = generate(GeneratorConfig("random-cop", 9, domain_size=2, p1=1.0, seed=0))
    assert {f.scope for f in inst.functions} == set(itertools.combinations(range(9), 2))


def test_generator_is_deterministic():
    for family in ("random-cop", "wgcp", "scale-free", "small-world"):
        cfg = GeneratorConfig(family, 30, m0=4, m1=2, k=4, seed=11)
        assert serialize_bytes(generate(cfg)) == serialize_bytes(generate(cfg))
        assert serialize_bytes(generate(cfg)) != serialize_bytes(generate(cfg.with_seed(12)))


def test_wgcp_tables_and_proper_colouring():
    inst = generate(GeneratorConfig("wgcp", 40, p1=0.25, seed=5))
    assert inst.domains == [5] * 40
    for f in inst.functions:
        off = f.table[~np.eye(5, dtype=bool)]
        np.testing.assert_array_equal(off, 0.0)
        diag = np.diag(f.table)
        assert np.all((diag >= 1) & (diag <= 100))
    # a tiny instance with a proper colouring costs zero
    small = generate(GeneratorConfig("wgcp", 5, p1=1.0, seed=1))
    assert total_cost(small, [0, 1, 2, 3, 4]) == 0.0
    assert oracle.solve_exact(small).cost == 0.0


def test_scale_free_edge_count_and_degrees():
    inst = generate(GeneratorConfig("scale-free", 100, m0=10, m1=10, seed=4))
    assert inst.num_functions == 910
    scopes = [tuple(sorted(f.scope)) for f in inst.functions]
    assert len(set(scopes)) == len(scopes)
    deg = np.bincount(np.array(scopes).ravel(), minlength=100)
    assert np.all(deg[10:] >= 10)


def test_ba_small_seed_graphs():
    rng = np.random.default_rng(0)
    assert len(ba_edges(rng, 10, 2, 1)) == 1 + 8
    assert len(ba_edges(rng, 10, 1, 1)) == 9


def test_small_world_counts_and_connectivity():
    lattice = generate(GeneratorConfig("small-world", 100, k=10, p=0.0, seed=0))
    assert lattice.num_functions == 500
    adj = {i: set() for i in range(100)}
    for f in lattice.functions:
        u, v = f.scope
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()] - seen:
            seen.add(w)
            stack.append(w)
    assert len(seen) == 100
    for seed in range(5):
        inst = generate(GeneratorConfig("small-world", 100, k=10, p=0.3, seed=seed))
        assert inst.num_functions >= 500
        scopes = [tuple(sorted(f.scope)) for f in inst.functions]
        assert len(set(scopes)) == len(scopes)


def test_nws_shortcuts_avoid_existing_neighbours():
    edges = nws_edges(np.random.default_rng(1), 8, 6, 1.0)
    assert len({tuple(sorted(e)) for e in edges}) == len(edges)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="nope", n=5),
        dict(family="random-cop", n=0),
        dict(family="random-cop", n=5, p1=0.0),
        dict(family="scale-free", n=5, m0=10, m1=2),
        dict(family="scale-free", n=20, m0=3, m1=5),
        dict(family="small-world", n=20, k=3),
        dict(family="small-world", n=20, k=4, p=1.5),
    ],
)
def test_generator_config_validation(kwargs):
    with pytest.raises(InvalidInstanceError):
        GeneratorConfig(**kwargs)


# ---------------------------------------------------------------- file format


def test_round_trip_generated_wgcp(tmp_path):
    inst = generate(GeneratorConfig("wgcp", 20, seed=2))
    save_instance(inst, tmp_path / "a.json")
    assert load_instance(tmp_path / "a.json") == inst


def test_round_trip_empty_instance():
    inst = COPInstance([3, 1])
    assert deserialize(serialize(inst)) == inst


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_round_trip_is_exact_for_random_costs(seed):
    inst = random_instance(np.random.default_rng(seed), 5, dmax=3, p=0.5, unary=0.5, ternary=0.5,
                           vary_domains=True, low=-1e6, high=1e6)
    back = deserialize(serialize_bytes(inst))
    assert back == inst


def test_corrupt_scope_names_function_index():
    doc = json.loads(serialize(COPInstance([2, 2], [CostFunction((0,), [1, 2]), CostFunction((0, 1), np.zeros(4))])))
    doc["functions"][1]["scope"] = [0, 7]
    with pytest.raises(InstanceFormatError, match="function 1 references unknown variable 7"):
        deserialize(json.dumps(doc))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("{not json", "line 1 column 2"),
        ('{"version": 2, "domains": [], "functions": []}', "unsupported version"),
        ('{"version": 1, "domains": [2], "functions": [{"scope": [0], "table": [1]}]}', "scope needs 2"),
        ('{"version": 1, "domains": [0], "functions": []}', "positive integer"),
        ('{"version": 1, "domains": [2]}', "missing field"),
    ],
)
def test_malformed_files(text, fragment):
    with pytest.raises(InstanceFormatError, match=fragment):
        deserialize(text)


def test_load_error_names_path(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("[]", encoding="utf-8")
    with pytest.raises(InstanceFormatError, match="bad.json"):
        load_instance(p)
