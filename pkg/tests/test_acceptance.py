"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The trajectory reproduction (criterion 1) always runs its reduced CI
profile; the full-scale profile (10^3 trajectories to 10^6 steps, a few
minutes) runs when RWDE_ACCEPTANCE_FULL=1 is set.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import beta as beta_dist

from oracles import brute_min_beta, random_valid_graph
from rwde import dirichlet
from rwde.digraph import (
    LatticeSpec,
    WeightedDigraph,
    beta_edges,
    build_lattice_box,
    edge_tails,
    is_strongly_connected,
    quotient,
)
from rwde.environment import (
    Environment,
    absorption_probability,
    escape_probability,
    expected_exit_time,
    green,
    hit_probability,
    quotient_environment,
    sample_environment,
)
from rwde.experiments import fit_power_law, green_tail, simulate_zd, trap_probability
from rwde.integrability import lattice_report, min_beta_at, zero_speed_check
from rwde.kalikow import ballisticity_report, drift_identity_check, kalikow_transitions

PAPER_ALPHA = (0.5, 0.2, 0.1, 0.1)
BOX3 = tuple((i, j) for i in range(3) for j in range(3))


def _report(criterion: str, parts: dict) -> None:
    status = "PASS" if all(parts.values()) else "FAIL"
    print(f"\n[acceptance] {criterion}: {status}")
    for name, ok in parts.items():
        print(f"    {'ok  ' if ok else 'FAIL'} {name}")
    assert all(parts.values()), f"{criterion}: {[k for k, v in parts.items() if not v]}"


def test_criterion_1_figure_reproduction():
    parts = {}
    t0 = time.time()
    run = simulate_zd(PAPER_ALPHA, 100, 10**5, seed=20260809)
    fit = fit_power_law(run)
    elapsed = time.time() - t0
    parts[f"CI profile minimizer {fit.alpha} in [0.80, 1.00]"] = 0.80 <= fit.alpha <= 1.00
    parts[f"CI profile runtime {elapsed:.1f}s < 60s"] = elapsed < 60.0
    if os.environ.get("RWDE_ACCEPTANCE_FULL") == "1":
        run = simulate_zd(PAPER_ALPHA, 1000, 10**6, seed=20260809)
        fit = fit_power_law(run)
        parts[f"full minimizer {fit.alpha} in [0.85, 0.95]"] = 0.85 <= fit.alpha <= 0.95
        parts[f"full objective {fit.objective:.4f} <= 0.02"] = fit.objective <= 0.02
    else:
        print("    (full 10^3 x 10^6 profile skipped; set RWDE_ACCEPTANCE_FULL=1)")
    _report("criterion 1 (trajectory power-law reproduction)", parts)


def test_criterion_2_tail_exponents():
    graphs = {
        1.0: WeightedDigraph(
            "∂", ["o", "x"],
            [("o", "x", 1.0), ("x", "o", 1.0), ("o", "∂", 0.5), ("x", "∂", 0.5)],
        ),
        1.5: WeightedDigraph(
            "∂", ["o", "x"],
            [("o", "x", 1.0), ("x", "o", 1.0), ("o", "∂", 0.75), ("x", "∂", 0.75)],
        ),
    }
    parts = {}
    for target, g in graphs.items():
        oracle_value, _ = brute_min_beta(g, "o")
        parts[f"edge-subset oracle confirms min beta {target}"] = oracle_value == target
        t0 = time.time()
        est = green_tail(g, "o", 100_000, np.random.default_rng(123))
        elapsed = time.time() - t0
        parts[f"hill {est.hill_exponent:.3f} within 0.15 of {target}"] = (
            abs(est.hill_exponent - target) <= 0.15
        )
        parts[f"regression {est.regression_exponent:.3f} within 0.15 of {target}"] = (
            abs(est.regression_exponent - target) <= 0.15
        )
        parts[f"runtime {elapsed:.1f}s < 30s (beta {target})"] = elapsed < 30.0
    _report("criterion 2 (tail exponent vs min beta)", parts)


def test_criterion_3_paper_arithmetic():
    spec = LatticeSpec(2, PAPER_ALPHA, ((0, 0), (1, 0)))
    ball = ballisticity_report(PAPER_ALPHA)
    parts = {
        "lattice criterion at s=1 integrable (1.8 > 1.7)": lattice_report(spec, 1.0).verdict(1.0)
        is True,
        "lattice criterion at s=1.1 fails (strict inequality)": lattice_report(spec, 1.1).verdict(
            1.1
        )
        is False,
        "ballisticity value 0.3 exactly": ball.criterion_value
        == abs(0.5 - 0.2) + abs(0.1 - 0.1),
        "ballistic criterion not met": ball.ballistic is False,
        "zero-speed criterion false": zero_speed_check(PAPER_ALPHA) is False,
    }
    _report("criterion 3 (criterion arithmetic on the reference weights)", parts)


def _five_test_graphs():
    triangle = WeightedDigraph(
        "∂",
        ["o", "x", "y"],
        [
            ("o", "x", 1.0), ("x", "y", 0.5), ("y", "o", 0.7),
            ("o", "∂", 0.4), ("x", "∂", 0.6), ("y", "∂", 0.5),
        ],
    )
    multi = WeightedDigraph(
        "∂",
        ["o", "x"],
        [
            ("o", "x", 0.5), ("o", "x", 0.25), ("x", "o", 1.0),
            ("o", "∂", 0.5), ("x", "∂", 0.5), ("o", "o", 0.25),
        ],
    )
    two_cycle = WeightedDigraph(
        "∂", ["o", "x"],
        [("o", "x", 1.0), ("x", "o", 1.0), ("o", "∂", 0.5), ("x", "∂", 0.5)],
    )
    loop = WeightedDigraph("∂", ["o"], [("o", "o", 1.0), ("o", "∂", 0.4)])
    box = build_lattice_box(LatticeSpec(2, PAPER_ALPHA, ((0, 0), (0, 1), (1, 0), (1, 1))))
    return [two_cycle, loop, triangle, multi, box]


def test_criterion_4_green_identities():
    rng = np.random.default_rng(77)
    parts = {}
    worst = 0.0
    for g in _five_test_graphs():
        for _ in range(200):
            env = sample_environment(g, rng)
            o = g.vertices[0]
            product = green(g, env, sources=[o]).value(o, o) * escape_probability(g, env, o)
            worst = max(worst, abs(product - 1.0))
    parts[f"G(o,o) * escape = 1 within 1e-10 (worst {worst:.2e}, 1000 draws)"] = worst <= 1e-10

    worst_decomp = 0.0
    for g in _five_test_graphs()[:3]:
        for _ in range(100):
            env = sample_environment(g, rng)
            x = g.vertices[0]
            lhs = expected_exit_time(g, env, x, g.vertices)
            table = green(g, env)
            rhs = sum(hit_probability(g, env, x, y) * table.value(y, y) for y in g.vertices)
            worst_decomp = max(worst_decomp, abs(lhs - rhs) / max(1.0, abs(lhs)))
    parts[f"exit-time decomposition within 1e-9 (worst {worst_decomp:.2e})"] = (
        worst_decomp <= 1e-9
    )

    g = build_lattice_box(LatticeSpec(2, PAPER_ALPHA, BOX3))
    env = sample_environment(g, rng)
    monotone = True
    prev = None
    for delta in [round(0.1 * k, 1) for k in range(1, 10)]:
        vals = green(g, env, delta=delta).values
        if prev is not None and not np.all(vals >= prev - 1e-12):
            monotone = False
        prev = vals
    parts["killed Green monotone in delta on 3x3 box"] = monotone
    _report("criterion 4 (Green identities)", parts)


def test_criterion_5_quotient_identity(contraction_fixture):
    g = contraction_fixture
    c = frozenset({0, 1})
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(1000):
        env = sample_environment(g, rng)
        qe = quotient_environment(g, env, c)  # raises beyond 1e-9 internally
        tails = edge_tails(g, c)
        cont = absorption_probability(g, env, win={g.cemetery}, lose=tails)
        lhs = 0.0
        for x in sorted(tails):
            for eid in g.out_edges(x):
                e = g.edge(eid)
                if e.head == g.cemetery:
                    lhs += env.probs[eid]
                elif e.head not in tails:
                    lhs += env.probs[eid] * cont[e.head]
        rhs = qe.sigma * escape_probability(qe.result.graph, qe.environment, qe.result.new_vertex)
        worst = max(worst, abs(lhs - rhs))
    parts = {f"path-counting identity within 1e-9 (worst {worst:.2e}, 1000 draws)": worst <= 1e-9}

    qr = quotient(g, c)
    checked = 0
    exact = True
    for mask in range(1, 1 << qr.graph.n_edges):
        qa = frozenset(i for i in range(qr.graph.n_edges) if mask >> i & 1)
        if not is_strongly_connected(qr.graph, qa):
            continue
        if qr.new_vertex not in edge_tails(qr.graph, qa):
            continue
        checked += 1
        if beta_edges(qr.graph, qa) != beta_edges(g, qr.original_edges(qa) | c):
            exact = False
    parts[f"beta correspondence exact on all {checked} enumerated sets"] = exact and checked > 0
    _report("criterion 5 (quotient identity)", parts)


def test_criterion_6_drift_identity():
    spec = LatticeSpec(2, PAPER_ALPHA, BOX3)
    res = drift_identity_check(spec, BOX3, (1, 1), 0.9, 100_000, np.random.default_rng(99))
    sigmas = res.max_sigmas()
    l1_ok = bool(np.all(np.abs(res.d_tilde[res.valid]).sum(axis=1) <= 1.0 + 1e-9))
    parts = {
        f"per-site residual within 4 standard errors (max {sigmas:.2f})": sigmas <= 4.0,
        "|d_tilde|_1 <= 1 on every estimate": l1_ok,
    }
    res0 = drift_identity_check(spec, BOX3, (1, 1), 0.0, 50_000, np.random.default_rng(100))
    i = res0.sites.index((1, 1))
    d_m = np.array([(0.5 - 0.2) / 0.9, 0.0])
    close = bool(np.all(np.abs(res0.residual[i]) <= 4 * res0.stderr[i]))
    parts["delta=0 closed form within sampling error"] = close and bool(
        np.all(np.abs(res0.d_hat[i] - d_m) < 0.02)
    )
    _report("criterion 6 (generalized Kalikow drift identity)", parts)


def test_criterion_7_oracle_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = 0
    graphs = 0
    while graphs < 50:
        g = random_valid_graph(rng, max_edges=12)
        graphs += 1
        production = min_beta_at(g, "o")
        oracle_value, _ = brute_min_beta(g, "o")
        if production.min_beta != oracle_value:
            mismatches += 1
            continue
        for s in (0.25, 0.5, 1.0, 2.0, oracle_value):
            if production.verdict(s) != (s < oracle_value):
                mismatches += 1
                break
    _report(
        "criterion 7 (integrability oracle equivalence)",
        {f"50 random digraphs, exact equality ({mismatches} mismatches)": mismatches == 0},
    )


def test_criterion_8_trap_scaling(two_cycle):
    rng = np.random.default_rng(31)
    res = trap_probability(two_cycle, {0, 1}, [0.3, 0.2, 0.1, 0.05], 50_000, rng)
    rel = abs(res.slope - res.beta_a) / res.beta_a
    parts = {f"log-log slope {res.slope:.3f} within 15% of beta {res.beta_a}": rel <= 0.15}

    single = WeightedDigraph(
        "∂", ["o", "x"], [("o", "x", 1.3), ("x", "o", 0.8), ("o", "∂", 0.5)]
    )
    eps = np.array([0.3, 0.2, 0.1, 0.05])
    res2 = trap_probability(single, {0, 1}, eps, 50_000, rng)
    reference = beta_dist.cdf(eps, 0.5, 1.3)
    dev = np.abs(res2.exact - reference).max()
    parts[f"closed-form Beta CDF cross-check (max dev {dev:.2e})"] = dev <= 1e-9
    _report("criterion 8 (trap-event scaling)", parts)


def test_criterion_9_dirichlet_structure():
    n = 100_000
    rng = np.random.default_rng(41)
    p = dirichlet.params([1.0, 2.0, 3.0])
    draws = dirichlet.sample_batch(p, rng, n)
    summed = dirichlet.aggregate_vector(p, [[0, 1], [2]], draws)
    se = summed[:, 0].std(ddof=1) / math.sqrt(n)
    mean_ok = abs(summed[:, 0].mean() - 0.5) < 3 * se
    var_target = 3.0 * 3.0 / (36.0 * 7.0)
    centered = (summed[:, 0] - summed[:, 0].mean()) ** 2
    var_ok = abs(summed[:, 0].var(ddof=1) - var_target) < 3 * centered.std(ddof=1) / math.sqrt(n)
    parts = {"associativity moments at 3 standard errors": mean_ok and var_ok}

    q = dirichlet.params([1.0, 1.0, 2.0])
    draws = dirichlet.sample_batch(q, rng, n)
    restricted = dirichlet.restrict(q, [0, 1], draws)
    mass = draws[:, 0] + draws[:, 1]
    se = restricted[:, 0].std(ddof=1) / math.sqrt(n)
    rest_mean_ok = abs(restricted[:, 0].mean() - 0.5) < 3 * se
    corr = np.corrcoef(restricted[:, 0], mass)[0, 1]
    parts["restriction moments and independence at 3 standard errors"] = rest_mean_ok and abs(
        corr
    ) < 3 / math.sqrt(n)

    d23 = dirichlet.params([2.0, 3.0])
    val, _ = quad(lambda t: math.exp(dirichlet.log_density(d23, [t, 1 - t])), 0.0, 1.0)
    parts[f"density quadrature integrates to 1 within 1e-6 (got {val:.8f})"] = abs(val - 1.0) < 1e-6
    _report("criterion 9 (Dirichlet structure)", parts)
