"""Quenched environments and absorbing-chain linear algebra.

An environment assigns each non-cemetery vertex a probability vector over
its out-edges. Green functions, escape and hitting probabilities and exit
times are computed by dense linear solves (graphs here are small, and the
integrability tests need exactness more than scale). Residuals are checked
at 1e-10.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import dirichlet
from .digraph import (
    EdgeSet,
    WeightedDigraph,
    boundary_edges,
    edge_heads,
    edge_tails,
    is_strongly_connected,
    quotient,
)

RESIDUAL_TOL = 1e-10


class SingularSystem(ArithmeticError):
    """The absorbing-chain system could not be solved reliably."""


class InconsistentSolvers(AssertionError):
    """Two independent computations of the same probability disagree."""


class IdentityViolation(AssertionError):
    """The quotient path-counting identity failed beyond tolerance."""


class Environment:
    """One environment ω: a probability vector over out-edges at each vertex.

    Stored as a flat array indexed by edge id. Treated as immutable.
    """

    def __init__(self, graph: WeightedDigraph, probs, normalize: bool = True):
        self.graph = graph
        probs = np.asarray(probs, dtype=float).copy()
        if probs.shape != (graph.n_edges,):
            raise ValueError("need one probability per edge")
        if np.any(probs < 0.0):
            raise ValueError("edge probabilities must be nonnegative")
        for v in graph.vertices:
            eids = list(graph.out_edges(v))
            if not eids:
                continue
            total = probs[eids].sum()
            if abs(total - 1.0) > dirichlet.SIMPLEX_TOL:
                raise ValueError(f"probabilities at {v!r} sum to {total}, not 1")
            if normalize:
                probs[eids] /= total
        self.probs = probs

    def prob(self, eid: int) -> float:
        return float(self.probs[eid])

    def row(self, v: str) -> np.ndarray:
        """Probabilities over out_edges(v), in edge order."""
        return self.probs[list(self.graph.out_edges(v))]

    def to_json(self) -> str:
        data = {
            v: {str(eid): self.probs[eid] for eid in self.graph.out_edges(v)}
            for v in self.graph.vertices
        }
        return json.dumps(data, ensure_ascii=False)

    @classmethod
    def from_json(cls, graph: WeightedDigraph, text: str) -> "Environment":
        data = json.loads(text)
        probs = np.zeros(graph.n_edges)
        for v, row in data.items():
            for eid, p in row.items():
                probs[int(eid)] = float(p)
        return cls(graph, probs)


def sample_environment(g: WeightedDigraph, rng: np.random.Generator) -> Environment:
    """One draw from the product Dirichlet law on environments."""
    return Environment(g, sample_environment_batch(g, rng, 1)[0], normalize=False)


def sample_environment_batch(g: WeightedDigraph, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent environments, shape (n, n_edges), vertex by vertex."""
    out = np.empty((n, g.n_edges))
    for v in g.vertices:
        eids = list(g.out_edges(v))
        if not eids:
            continue
        p = dirichlet.params([g.edge(eid).alpha for eid in eids])
        out[:, eids] = dirichlet.sample_batch(p, rng, n)
    return out


@dataclass(frozen=True)
class GreenTable:
    """G(x, y) for the requested sources over a vertex domain.

    ``delta`` is the per-step survival factor; delta=1 with the full vertex
    set gives the plain Green function. Entries for targets outside the
    domain are zero.
    """

    sources: tuple
    domain: tuple
    delta: float
    values: np.ndarray

    def value(self, x, y) -> float:
        if y not in self.domain:
            return 0.0
        return float(self.values[self.sources.index(x), self.domain.index(y)])

    def row(self, x) -> np.ndarray:
        return self.values[self.sources.index(x)]

    def to_csv(self) -> str:
        lines = ["source,target,value"]
        for i, x in enumerate(self.sources):
            for j, y in enumerate(self.domain):
                lines.append(f"{x},{y},{float(self.values[i, j])!r}")
        return "\n".join(lines) + "\n"


def _sub_stochastic_matrix(
    g: WeightedDigraph,
    env: Environment,
    domain: Sequence[str],
    delta: float,
    edges: frozenset | None,
) -> np.ndarray:
    idx = {v: i for i, v in enumerate(domain)}
    q = np.zeros((len(domain), len(domain)))
    for v in domain:
        for eid in g.out_edges(v):
            if edges is not None and eid not in edges:
                continue
            head = g.edge(eid).head
            if head in idx:
                q[idx[v], idx[head]] += delta * env.probs[eid]
    return q


def _fundamental_matrix(a: np.ndarray) -> np.ndarray:
    """(I - Q)^-1 with residual and positivity checks."""
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    try:
        inv = np.linalg.solve(a, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(inv)):
        raise SingularSystem("non-finite entries in the fundamental matrix")
    residual = np.abs(a @ inv - np.eye(n)).max()
    if residual > RESIDUAL_TOL:
        raise SingularSystem(f"solver residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return inv


def green(
    g: WeightedDigraph,
    env: Environment,
    sources: Iterable[str] | None = None,
    delta: float = 1.0,
    domain: Iterable[str] | None = None,
    edges: Iterable[int] | None = None,
) -> GreenTable:
    """Green function by absorbing-chain solve: G = (I - Q)^-1.

    Q is the sub-stochastic transition matrix over ``domain`` restricted to
    edges interior to the domain (and to ``edges`` when given, killing the
    walk on the first edge outside that set), scaled by ``delta``. G(x, y)
    is the expected delta-discounted number of visits to y starting from x
    before leaving the domain / edge set or being absorbed.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    domain = tuple(domain) if domain is not None else g.vertices
    sources = tuple(sources) if sources is not None else domain
    if any(x not in domain for x in sources):
        raise ValueError("sources must lie inside the domain")
    edges = frozenset(edges) if edges is not None else None
    q = _sub_stochastic_matrix(g, env, domain, delta, edges)
    inv = _fundamental_matrix(np.eye(len(domain)) - q)
    rows = [domain.index(x) for x in sources]
    values = np.clip(inv[rows, :], 0.0, None)
    diag = values[np.arange(len(rows)), rows]
    if np.any(diag < 1.0 - RESIDUAL_TOL):  # the walk counts its start
        raise SingularSystem(f"diagonal entry {diag.min()!r} below 1")
    return GreenTable(sources, domain, delta, values)


def absorption_probability(
    g: WeightedDigraph,
    env: Environment,
    win: Iterable[str],
    lose: Iterable[str],
    edges: Iterable[int] | None = None,
) -> dict:
    """P_x(reach ``win`` before ``lose``), for every vertex x.

    Both sets absorb; the cemetery absorbs too and counts as a loss unless
    listed in ``win``. When ``edges`` is given, the walk additionally loses
    as soon as it takes an edge outside that set.
    """
    win = set(win)
    lose = set(lose)
    allowed = frozenset(edges) if edges is not None else None
    transient = [v for v in g.vertices if v not in win and v not in lose]
    idx = {v: i for i, v in enumerate(transient)}
    n = len(transient)
    q = np.zeros((n, n))
    b = np.zeros(n)
    for v in transient:
        for eid in g.out_edges(v):
            if allowed is not None and eid not in allowed:
                continue
            e = g.edge(eid)
            p = env.probs[eid]
            if e.head in win:
                b[idx[v]] += p
            elif e.head in idx:
                q[idx[v], idx[e.head]] += p
    f = _fundamental_matrix(np.eye(n) - q) @ b if n else np.zeros(0)
    out = {v: float(f[idx[v]]) for v in transient}
    for v in win:
        out[v] = 1.0
    for v in lose:
        out[v] = 0.0
    out[g.cemetery] = 1.0 if g.cemetery in win else 0.0
    return out


def hit_probability(g: WeightedDigraph, env: Environment, x: str, y: str) -> float:
    """P_x(H_y < H_cemetery)."""
    if x == y:
        return 1.0
    return absorption_probability(g, env, win={y}, lose=set())[x]


def _first_step(
    g: WeightedDigraph,
    env: Environment,
    x: str,
    continuation: dict,
    win: set,
    lose: set,
    edges: frozenset | None = None,
) -> float:
    """One explicit step from x, then the given continuation values."""
    total = 0.0
    for eid in g.out_edges(x):
        if edges is not None and eid not in edges:
            continue
        head = g.edge(eid).head
        if head in win:
            total += env.probs[eid]
        elif head not in lose:
            total += env.probs[eid] * continuation[head]
    return total


def escape_probability(g: WeightedDigraph, env: Environment, o: str) -> float:
    """P_o(H_cemetery < first return to o), computed two independent ways.

    Route one inverts the Markov chain identity G(o,o) = 1 / escape; route
    two solves the first-step hitting system directly. The two must agree to
    1e-10 in relative terms.
    """
    via_green = 1.0 / green(g, env, sources=[o]).value(o, o)
    cont = absorption_probability(g, env, win={g.cemetery}, lose={o})
    via_system = _first_step(g, env, o, cont, win={g.cemetery}, lose={o})
    if abs(via_green - via_system) > 1e-10 * max(via_system, via_green, 1e-300):
        raise InconsistentSolvers(
            f"escape probability mismatch: {via_green!r} vs {via_system!r}"
        )
    return via_system


def expected_exit_time(g: WeightedDigraph, env: Environment, x: str, u: Iterable[str]) -> float:
    """E_x[T_U] = sum over y in U of G_U(x, y)."""
    u = tuple(u)
    if x not in u:
        raise ValueError(f"start {x!r} must belong to the domain")
    return float(green(g, env, sources=[x], domain=u).values.sum())


@dataclass(frozen=True)
class CConstruction:
    """Greedy edge sequence maximizing exit probabilities, started at o.

    ``edges`` is e_1..e_n in construction order; ``heads`` the corresponding
    y_1..y_n; ``prefixes`` the sets C_1..C_{n+1} (so prefixes[-1] is C(ω)).
    ``terminal`` is 'origin' or 'cemetery' according to where y_n landed.
    """

    origin: str
    edges: tuple
    heads: tuple
    prefixes: tuple
    terminal: str

    @property
    def edge_set(self) -> frozenset:
        return self.prefixes[-1]


def construct_c(g: WeightedDigraph, env: Environment, o: str) -> CConstruction:
    """Iteratively pick the edge maximizing the exit distribution out of the
    already-picked set, until an edge heads at o or the cemetery.

    Exit distributions are computed exactly: the chance of exiting C_k via
    edge e from y is N(y, tail(e)) * ω_e with N the fundamental matrix of
    the walk restricted to C_k. Ties are broken by smallest edge id (they
    carry zero Lebesgue measure in ω but occur in crafted tests). The only
    candidates with positive exit probability are the edges exiting the set
    of vertices already reachable, so the argmax is restricted there.
    """
    picked: list[int] = []
    heads: list[str] = []
    prefixes: list[frozenset] = [frozenset()]
    vindex = {v: i for i, v in enumerate(g.vertices)}
    y = o
    for _ in range(g.n_edges):
        current = frozenset(picked)
        visits = green(g, env, sources=[y], edges=current).row(y)
        best_eid = -1
        best_p = -1.0
        for e in g.edges:
            if e.eid in current:
                continue
            p = visits[vindex[e.tail]] * env.probs[e.eid] if e.tail in vindex else 0.0
            if p > best_p:
                best_p = p
                best_eid = e.eid
        if best_eid < 0 or best_p <= 0.0:
            raise SingularSystem("no exit edge found; graph fails the cemetery assumptions")
        picked.append(best_eid)
        heads.append(g.edge(best_eid).head)
        prefixes.append(frozenset(picked))
        y = heads[-1]
        if y == o or y == g.cemetery:
            terminal = "origin" if y == o else "cemetery"
            return CConstruction(o, tuple(picked), tuple(heads), tuple(prefixes), terminal)
    raise AssertionError("construction did not terminate within |E| steps")


def hit_before_return_within(
    g: WeightedDigraph, env: Environment, o: str, x: str, edges: Iterable[int]
) -> float:
    """P_o(H_x < first return to o, walking only on the given edge set).

    Taking any edge outside the set counts as failure. This is the quantity
    bounded below by (1/|E|)^|E| for the construction above.
    """
    edges = frozenset(edges)
    cont = absorption_probability(g, env, win={x}, lose={o}, edges=edges)
    return _first_step(g, env, o, cont, win={x}, lose={o}, edges=edges)


@dataclass(frozen=True)
class QuotientEnvironment:
    """Environment on the quotient graph after contracting a trap set C.

    Off the boundary of C the probabilities are untouched; on it they are
    renormalized by the total escape mass Σ.
    """

    result: "object"  # QuotientResult
    environment: Environment
    sigma: float


def quotient_environment(g: WeightedDigraph, env: Environment, c: Iterable[int]) -> QuotientEnvironment:
    """Contract the strongly connected edge set c and renormalize its exits.

    Verifies the path-counting identity
    sum_{x in C̲} P_x(H_∂ < H̃_{C̲}) = Σ * P_õ(H_∂ < H̃_õ)
    by computing both sides with independent solves; a mismatch beyond 1e-9
    signals a quotient bug.
    """
    c = frozenset(c)
    qr = quotient(g, c)
    bnd = boundary_edges(g, c)
    sigma = float(env.probs[list(bnd)].sum())
    # one simplex per tail vertex contributes, so 0 < sigma <= |C̲|
    if not 0.0 < sigma <= len(edge_tails(g, c)) + 1e-9:
        raise IdentityViolation(f"escape mass Σ = {sigma!r} out of range")
    probs = np.empty(qr.graph.n_edges)
    for qeid, eid in qr.edge_map.items():
        probs[qeid] = env.probs[eid] / sigma if eid in bnd else env.probs[eid]
    qenv = Environment(qr.graph, probs)

    tails = edge_tails(g, c)
    cont = absorption_probability(g, env, win={g.cemetery}, lose=tails)
    lhs = sum(
        _first_step(g, env, x, cont, win={g.cemetery}, lose=tails) for x in sorted(tails)
    )
    rhs = sigma * escape_probability(qr.graph, qenv, qr.new_vertex)
    if abs(lhs - rhs) > 1e-9:
        raise IdentityViolation(f"quotient identity violated: {lhs!r} vs {rhs!r}")
    return QuotientEnvironment(qr, qenv, sigma)
