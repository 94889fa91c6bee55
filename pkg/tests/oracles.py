"""Independent brute-force oracles used across the test suite.

These deliberately avoid the production code paths: strong connectivity by
all-pairs path search, min-beta by exhaustive edge-subset scan, visit
counts by literal walk simulation. Weights in generated corpora are dyadic
rationals so that sums are exact and order-independent, which lets the
oracle comparisons demand exact equality.
"""

from __future__ import annotations

import math

import numpy as np

from rwde.digraph import WeightedDigraph, beta_edges, edge_heads, edge_tails, validate


def strongly_connected_bruteforce(g: WeightedDigraph, a) -> bool:
    """All-pairs oriented-path search (paths of length >= 1) within a."""
    a = frozenset(a)
    verts = edge_tails(g, a) | edge_heads(g, a)
    step = {v: set() for v in verts}
    for eid in a:
        e = g.edge(eid)
        step[e.tail].add(e.head)
    for x in verts:
        reach = set(step[x])
        frontier = list(reach)
        while frontier:
            v = frontier.pop()
            for w in step[v]:
                if w not in reach:
                    reach.add(w)
                    frontier.append(w)
        if not verts <= reach:
            return False
    return True


def brute_min_beta(g: WeightedDigraph, o: str | None = None):
    """Exhaustive scan over all non-empty edge subsets (graphs <= ~14 edges).

    Returns (min beta, argmin edge set); (inf, None) when no strongly
    connected subset qualifies. With o given, only subsets with o among
    their tails count.
    """
    best = math.inf
    arg = None
    m = g.n_edges
    for mask in range(1, 1 << m):
        a = frozenset(i for i in range(m) if mask >> i & 1)
        if o is not None and o not in edge_tails(g, a):
            continue
        if not strongly_connected_bruteforce(g, a):
            continue
        b = beta_edges(g, a)
        if b < best:
            best = b
            arg = a
    return best, arg


def random_valid_graph(
    rng: np.random.Generator,
    max_vertices: int = 4,
    max_edges: int = 12,
    dyadic: bool = True,
) -> WeightedDigraph:
    """A small random graph passing validate(), with 'o' among its vertices."""
    names = ["o", "a", "b", "c", "d", "f"]
    while True:
        nv = int(rng.integers(1, max_vertices + 1))
        verts = names[:nv]
        edges = []
        for v in verts:
            for _ in range(int(rng.integers(1, 4))):
                r = rng.random()
                head = "∂" if r < 0.3 else verts[int(rng.integers(0, nv))]
                if dyadic:
                    alpha = float(rng.integers(1, 33)) / 16.0
                else:
                    alpha = float(rng.uniform(0.05, 2.0))
                edges.append((v, head, alpha))
        if len(edges) > max_edges:
            continue
        g = WeightedDigraph("∂", verts, edges)
        try:
            validate(g)
        except Exception:
            continue
        return g


def simulate_visit_counts(g, env, start, n_walks, rng: np.random.Generator):
    """Literal walk simulation; returns per-vertex mean visit counts before
    absorption at the cemetery (one row of the Green function, empirically)."""
    totals = {v: 0 for v in g.vertices}
    sq = {v: 0 for v in g.vertices}
    rows = {
        v: (list(g.out_edges(v)), np.cumsum(env.row(v))) for v in g.vertices
    }
    for _ in range(n_walks):
        counts = {v: 0 for v in g.vertices}
        pos = start
        while pos != g.cemetery:
            counts[pos] += 1
            eids, cum = rows[pos]
            k = int(np.searchsorted(cum, rng.random(), side="right"))
            k = min(k, len(eids) - 1)
            pos = g.edge(eids[k]).head
        for v in g.vertices:
            totals[v] += counts[v]
            sq[v] += counts[v] ** 2
    mean = {v: totals[v] / n_walks for v in g.vertices}
    stderr = {
        v: math.sqrt(max(sq[v] / n_walks - mean[v] ** 2, 0.0) / n_walks) for v in g.vertices
    }
    return mean, stderr
