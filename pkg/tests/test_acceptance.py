"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also repeated in the pytest terminal summary so they show up
without ``-s``.
"""

import json
import math
import time

import numpy as np
import pytest

from attentive_bp import bp, cli, oracle, trainer
from attentive_bp.factor_graph import (
    GeneratorConfig,
    build_factor_graph,
    generate,
    split_scfg,
    total_cost,
)
from attentive_bp.model import DABPModel, ModelConfig

import conftest
from helpers import (
    analytic_grads,
    max_rel_error,
    numeric_grad,
    random_cyclic_instance,
    random_instance,
    random_tree,
)
from test_bp import factor_graph_diameter


def report(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    return ok


# ---------------------------------------------------------------- 1


def test_c01_tree_exactness():
    start = time.perf_counter()
    late, wrong = [], []
    for seed in range(50):
        inst = random_tree(np.random.default_rng(seed), 10, 4)
        g = build_factor_graph(inst)
        limit = factor_graph_diameter(g) + 2
        msgs = bp.MessageSet.zeros(g)
        done_at = None
        for t in range(1, limit + 1):
            new = bp.MessageSet(bp.v2f_step_vanilla(g, msgs), bp.f2v_step(g, msgs.v2f), t)
            done = bp.converged(new, msgs)
            msgs = new
            if done:
                done_at = t
                break
        if done_at is None:
            late.append(seed)
        cost = total_cost(inst, bp.decide(bp.beliefs(g, msgs.f2v), g.domains))
        if abs(cost - oracle.solve_exact(inst).cost) > 1e-9:
            wrong.append(seed)
    elapsed = time.perf_counter() - start
    ok = not late and not wrong and elapsed < 5.0
    report(1, ok, f"50 trees: not converged by diameter+2 {len(late)}, non-optimal {len(wrong)}, {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- 2


def test_c02_reduction_identities():
    worst = 0.0
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = build_factor_graph(random_cyclic_instance(rng, int(rng.integers(4, 9)), int(rng.integers(2, 5))))
        prev = bp.MessageSet(rng.normal(0, 10, (g.num_edges, g.dmax)), rng.normal(0, 10, (g.num_edges, g.dmax)))
        lam = float(rng.uniform())
        weighted = bp.v2f_step(g, prev, bp.HyperParams.uniform(g, lam), normalize=False).data
        damped = bp.v2f_step_damped(g, prev, lam, normalize=False).data
        worst = max(worst, np.max(np.abs(weighted - damped)))
        w0 = bp.v2f_step(g, prev, bp.HyperParams.uniform(g, 0.0), normalize=False).data
        d0 = bp.v2f_step_damped(g, prev, 0.0, normalize=False).data
        vanilla = bp.v2f_step_vanilla(g, prev, normalize=False).data
        worst = max(worst, np.max(np.abs(w0 - vanilla)), np.max(np.abs(d0 - vanilla)))
    ok = worst <= 1e-12
    report(2, ok, f"20 cyclic instances: max elementwise difference {worst:.2e} (limit 1e-12)")
    assert ok


# ---------------------------------------------------------------- 3


def test_c03_scfg_invariance():
    worst, counts_ok = 0.0, True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, 8, dmax=4, p=0.4, unary=0.3, ternary=0.5, vary_domains=True)
        split = split_scfg(inst, 0.95)
        counts_ok &= split.num_functions == 2 * inst.num_functions
        for _ in range(100):
            a = [int(rng.integers(d)) for d in inst.domains]
            c, cs = total_cost(inst, a), total_cost(split, a)
            worst = max(worst, abs(c - cs) / max(abs(c), 1e-300))
    ok = worst <= 1e-9 and counts_ok
    report(3, ok, f"20 instances x 100 assignments: max relative difference {worst:.2e}, counts doubled {counts_ok}")
    assert ok


# ---------------------------------------------------------------- 4


def test_c04_loss_oracle_equivalence():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        inst = random_instance(rng, n, dmax=int(rng.integers(2, 5)), p=0.6, unary=0.4, ternary=0.4,
                               vary_domains=bool(seed % 2))
        probs = trainer.assignment_probs(rng.normal(0, 2, (n, max(inst.domains))), inst).data
        ref = oracle.enumerate_expected_cost(inst, probs)
        got = trainer.smoothed_loss(inst, probs).item()
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    ok = worst <= 1e-9
    report(4, ok, f"100 instances: max relative difference {worst:.2e} (limit 1e-9)")
    assert ok


# ---------------------------------------------------------------- 5


def test_c05_loss_gap_bound():
    violations, pairs, tightest = 0, 0, 0.0
    for seed in range(250):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, int(rng.integers(2, 7)), dmax=4, p=0.5, unary=0.4, ternary=0.3,
                               vary_domains=True, low=-20, high=50)
        g = build_factor_graph(inst)
        for scale in (0.1, 1.0, 10.0, 100.0):
            gap, bound = trainer.theorem1_gap(inst, rng.normal(0, scale, (g.num_vars, g.dmax)), g)
            pairs += 1
            violations += gap > bound + 1e-9
            if bound > 0:
                tightest = max(tightest, gap / bound)
    ok = pairs >= 1000 and violations == 0
    report(5, ok, f"{pairs} (instance, belief) pairs: {violations} violations, max gap/bound {tightest:.3f}")
    assert ok


# ---------------------------------------------------------------- 6


def test_c06_gradient_fidelity():
    rng = np.random.default_rng(0)
    from attentive_bp.factor_graph import COPInstance, CostFunction

    inst = COPInstance([2, 2, 2], [CostFunction(s, rng.uniform(0, 10, (2, 2))) for s in [(0, 1), (1, 2), (0, 2)]])
    cfg = ModelConfig(hidden=2, gat_layers=1, gat_heads=1, gat_channels=2, att_heads=1, att_width=2, msg_width=2)
    model = DABPModel(cfg, seed=1)
    # every iteration of the window enters the objective, so parameters reach it
    # through iterations 3 onwards
    loss = lambda: trainer.window_loss(model, inst, 5, 5)  # noqa: E731
    grads = analytic_grads(loss, model.params)
    worst = 0.0
    for k in model.params:
        num = numeric_grad(lambda: loss().item(), model.params[k].data, h=1e-4)
        worst = max(worst, max_rel_error(grads[k], num))
    nonzero = sum(float(np.abs(g).max()) > 0 for g in grads.values())
    ok = worst <= 1e-4 and nonzero > 0
    report(6, ok, f"{model.params.num_values()} parameters, {nonzero}/{len(grads)} with nonzero gradient: "
                  f"max relative error {worst:.2e} (limit 1e-4)")
    assert ok


# ---------------------------------------------------------------- 7


def test_c07_hyperparams_validity():
    sets, bad_lam, bad_sum = 0, 0, 0
    cfg = ModelConfig(hidden=4, gat_layers=2, gat_heads=2, gat_channels=4, att_heads=3, att_width=4, msg_width=4)
    seed = 0
    while sets < 10_000:
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, 10, dmax=4, p=0.4, unary=0.3, ternary=0.5, vary_domains=True,
                               low=-100, high=100)
        g = build_factor_graph(inst)
        model = DABPModel(cfg, seed=seed)
        for k in model.params:
            model.params[k].data *= 1 + 4 * rng.uniform()
        state, msgs = model.initial_state(g), bp.MessageSet.zeros(g)
        for _ in range(5):
            hp, state = model.step(state, msgs, g)
            lam, w = hp.lam.data, hp.weights.data
            bad_lam += int(np.sum(~((lam >= 0) & (lam <= 1))))
            sums = np.bincount(g.pair_target, weights=w, minlength=g.num_edges)
            bad_sum += int(np.sum((g.edge_degree > 1) & (np.abs(sums - 1) > 1e-6)))
            sets += g.num_edges
            msgs = bp.MessageSet(bp.v2f_step(g, msgs, hp), bp.f2v_step(g, msgs.v2f), msgs.t + 1)
        seed += 1
    ok = bad_lam == 0 and bad_sum == 0
    report(7, ok, f"{sets} edge hyperparameter sets: {bad_lam} lambdas outside [0,1], {bad_sum} weight sums off")
    assert ok


# ---------------------------------------------------------------- 8 and 9


@pytest.fixture(scope="module")
def desk_runs():
    rows = []
    start = time.process_time()
    for s in range(10):
        inst = generate(GeneratorConfig("random-cop", n=20, domain_size=5, p1=0.25, seed=1000 + s))
        base = trainer.TrainConfig(restarts=1, t_max=200)
        traces = {
            "bp": trainer.run_baseline(inst, "bp", base),
            "dbp": trainer.run_baseline(inst, "dbp", base, lam=0.9),
            "dbp-scfg": trainer.run_baseline(inst, "dbp-scfg", base, lam=0.9, rho=0.95),
        }
        _, traces["dabp"] = trainer.run_online(
            inst, cfg=trainer.TrainConfig(restarts=5, t_max=200, t_upd=20, t_eff=2, seed=s))
        rows.append(traces)
    return rows, time.process_time() - start


def test_c08_desk_scale_trend(desk_runs):
    rows, cpu = desk_runs
    cost = {a: np.array([r[a].best_cost for r in rows]) for a in rows[0]}
    wins = int(np.sum(cost["dabp"] <= cost["bp"] + 1e-9))
    means = {a: float(v.mean()) for a, v in cost.items()}
    ok = wins >= 8 and means["dabp"] <= means["dbp"] and cpu < 15 * 60
    report(8, ok, f"DABP <= BP on {wins}/10; mean best cost DABP {means['dabp']:.2f}, DBP {means['dbp']:.2f}, "
                  f"BP {means['bp']:.2f}, DBP-SCFG {means['dbp-scfg']:.2f} (informative); CPU {cpu:.0f}s")
    assert ok


def test_c09_anytime_property(desk_runs):
    rows, _ = desk_runs
    violations, runs = 0, 0
    for traces in rows:
        for trace in traces.values():
            runs += 1
            series = trace.best_cost_series()
            violations += sum(b > a for a, b in zip(series, series[1:]))
            violations += any(rec.best_cost > rec.cost for rec in trace.records)
    ok = violations == 0
    report(9, ok, f"{runs} runs from criterion 8: {violations} increases of the best-cost trace")
    assert ok


# ---------------------------------------------------------------- 10


def test_c10_generator_properties():
    problems = []
    for seed in range(100):
        w = generate(GeneratorConfig("wgcp", 30, p1=0.25, seed=seed))
        for f in w.functions:
            off = f.table[~np.eye(5, dtype=bool)]
            diag = np.diag(f.table)
            if np.any(off != 0) or np.any((diag < 1) | (diag > 100)):
                problems.append(f"wgcp seed {seed}")
                break
        ba = generate(GeneratorConfig("scale-free", 100, m0=10, m1=10, seed=seed))
        if ba.num_functions != 10 + 90 * 10:
            problems.append(f"scale-free seed {seed}: {ba.num_functions}")
        nws = generate(GeneratorConfig("small-world", 100, k=10, p=0.0, seed=seed))
        if nws.num_functions != 100 * 10 // 2:
            problems.append(f"small-world seed {seed}: {nws.num_functions}")
        rc = generate(GeneratorConfig("random-cop", 60, p1=0.25, seed=seed))
        trials = math.comb(60, 2)
        if abs(rc.num_functions - trials * 0.25) > 4 * math.sqrt(trials * 0.25 * 0.75):
            problems.append(f"random-cop seed {seed}: {rc.num_functions}")
    ok = not problems
    report(10, ok, f"4 families x 100 seeds: {len(problems)} violations {problems[:3]}")
    assert ok


# ---------------------------------------------------------------- 11


def test_c11_convergence_rate_report(tmp_path):
    data = tmp_path / "data"
    cli.main(["gen", "random-cop", "--n", "8", "--domain", "3", "--p1", "0.4", "--count", "6", "--seed", "11",
              "--out", str(data)])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"restarts": 1, "tmax": 1000}), encoding="utf-8")
    out = tmp_path / "report"
    code = cli.main(["bench", str(data / "manifest.json"), "--algos", "bp,dbp", "--config", str(cfg),
                     "--out", str(out)])
    import csv

    with open(out / "summary.csv", newline="", encoding="utf-8") as fh:
        summary = list(csv.DictReader(fh))
    limits = [125, 250, 500, 1000]
    fractions = {s["algo"]: [float(s[f"converged@{k}"]) for k in limits] for s in summary}
    present = all(len(v) == 4 for v in fractions.values()) and set(fractions) == {"bp", "dbp"}
    monotone = all(v == sorted(v) for v in fractions.values())
    ok = code == 0 and present and monotone
    report(11, ok, f"bench convergence fractions at {limits}: {fractions}, non-decreasing {monotone}")
    assert ok
