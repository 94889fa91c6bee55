"""Finite directed multigraphs with a cemetery (absorbing) vertex.

Vertex ids are opaque strings at the interface and dense integer indices
internally. Edges carry integer ids (their position in the edge list) and
positive weights. Multi-edges and loops are permitted. Graphs are immutable
after construction; every operation returns a new graph or a plain value,
so instances are safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

EdgeSet = frozenset  # of edge ids (ints)
VertexSet = frozenset  # of vertex ids (strings)

DEFAULT_CEMETERY = "∂"


class GraphError(ValueError):
    """Base class for structural graph errors."""


class CemeteryHasExit(GraphError):
    def __init__(self, edge: "Edge"):
        self.edge = edge
        super().__init__(
            f"edge {edge.eid} ({edge.tail!r} -> {edge.head!r}) exits the cemetery"
        )


class NotConnectedToCemetery(GraphError):
    def __init__(self, vertex: str):
        self.vertex = vertex
        super().__init__(f"vertex {vertex!r} has no oriented path to the cemetery")


class EmptySet(GraphError):
    pass


class NotStronglyConnected(GraphError):
    pass


@dataclass(frozen=True)
class Edge:
    eid: int
    tail: str
    head: str
    alpha: float


class WeightedDigraph:
    """Directed multigraph G = (V ∪ {cemetery}, E) with positive edge weights.

    Parameters
    ----------
    cemetery : str
        Id of the absorbing dead-end vertex.
    vertices : iterable of str
        Non-cemetery vertex ids (the cemetery may be listed; it is filtered).
    edges : iterable of (tail, head, alpha)
        Edge triples; ids are assigned in order, starting at 0.

    Construction only checks local well-formedness (known endpoints, positive
    weights). The two cemetery assumptions are checked by :func:`validate`.
    """

    def __init__(self, cemetery: str, vertices: Iterable[str], edges: Iterable[tuple]):
        self.cemetery = cemetery
        seen = {}
        for v in vertices:
            if v != cemetery and v not in seen:
                seen[v] = len(seen)
        self.vertices: tuple[str, ...] = tuple(seen)
        self._vindex = seen
        known = set(self.vertices) | {cemetery}
        edge_list = []
        for tail, head, alpha in edges:
            if tail not in known:
                raise GraphError(f"edge tail {tail!r} is not a declared vertex")
            if head not in known:
                raise GraphError(f"edge head {head!r} is not a declared vertex")
            alpha = float(alpha)
            if not alpha > 0.0:
                raise GraphError(f"edge ({tail!r} -> {head!r}) has weight {alpha}, must be > 0")
            edge_list.append(Edge(len(edge_list), tail, head, alpha))
        self.edges: tuple[Edge, ...] = tuple(edge_list)
        out: dict[str, list[int]] = {v: [] for v in known}
        for e in self.edges:
            out[e.tail].append(e.eid)
        self._out = {v: tuple(eids) for v, eids in out.items()}

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def all_vertices(self) -> tuple[str, ...]:
        return self.vertices + (self.cemetery,)

    def vertex_index(self, v: str) -> int:
        """Dense index of a non-cemetery vertex."""
        return self._vindex[v]

    def out_edges(self, v: str) -> tuple[int, ...]:
        """Edge ids exiting v, in construction order."""
        return self._out[v]

    def edge(self, eid: int) -> Edge:
        return self.edges[eid]

    def out_alpha(self, v: str) -> float:
        return sum(self.edges[eid].alpha for eid in self._out[v])

    def __eq__(self, other):
        return (
            isinstance(other, WeightedDigraph)
            and self.cemetery == other.cemetery
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __repr__(self):
        return (
            f"WeightedDigraph({len(self.vertices)} vertices + cemetery, "
            f"{self.n_edges} edges)"
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "cemetery": self.cemetery,
                "vertices": list(self.vertices),
                "edges": [
                    {"tail": e.tail, "head": e.head, "alpha": e.alpha} for e in self.edges
                ],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "WeightedDigraph":
        data = json.loads(text)
        return cls(
            data["cemetery"],
            data["vertices"],
            [(e["tail"], e["head"], e["alpha"]) for e in data["edges"]],
        )


def validate(g: WeightedDigraph) -> None:
    """Check the two cemetery assumptions; raise a structured error if violated.

    (i) no edge exits the cemetery, (ii) every vertex has an oriented path
    to the cemetery.
    """
    for eid in g.out_edges(g.cemetery):
        raise CemeteryHasExit(g.edge(eid))
    # reverse reachability from the cemetery
    reached = {g.cemetery}
    frontier = [g.cemetery]
    into: dict[str, list[str]] = {v: [] for v in g.all_vertices}
    for e in g.edges:
        into[e.head].append(e.tail)
    while frontier:
        v = frontier.pop()
        for u in into[v]:
            if u not in reached:
                reached.add(u)
                frontier.append(u)
    for v in g.vertices:
        if v not in reached:
            raise NotConnectedToCemetery(v)


def simplify_multi_edges(g: WeightedDigraph):
    """Merge parallel edges into single edges carrying the summed weight.

    Returns (simplified graph, aggregation map) where the map sends each new
    edge id to the tuple of original edge ids it replaces. The annealed law
    is unchanged (Dirichlet associativity).
    """
    groups: dict[tuple[str, str], list[int]] = {}
    order = []
    for e in g.edges:
        key = (e.tail, e.head)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(e.eid)
    new_edges = []
    agg = {}
    for new_eid, key in enumerate(order):
        eids = groups[key]
        new_edges.append((key[0], key[1], sum(g.edge(i).alpha for i in eids)))
        agg[new_eid] = tuple(eids)
    return WeightedDigraph(g.cemetery, g.vertices, new_edges), agg


def edge_tails(g: WeightedDigraph, a: Iterable[int]) -> frozenset:
    """A̲ : tails of the edges in a."""
    return frozenset(g.edge(eid).tail for eid in a)


def edge_heads(g: WeightedDigraph, a: Iterable[int]) -> frozenset:
    """A̅ : heads of the edges in a."""
    return frozenset(g.edge(eid).head for eid in a)


def _tarjan_scc(n: int, adj: Sequence[Sequence[int]]) -> list[list[int]]:
    """Strongly connected components (iterative Tarjan) of an indexed digraph."""
    UNVISITED = -1
    index = [UNVISITED] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != UNVISITED:
            continue
        work = [(root, 0)]
        while work:
            v, ei = work.pop()
            if ei == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            while ei < len(adj[v]):
                w = adj[v][ei]
                ei += 1
                if index[w] == UNVISITED:
                    work.append((v, ei))
                    work.append((w, 0))
                    descended = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def is_strongly_connected(g: WeightedDigraph, a: Iterable[int]) -> bool:
    """True iff every ordered pair of incident vertices is joined by an
    oriented path using only edges of a.

    Evaluated as: the sub-multigraph (A̲ ∪ A̅, A) has a single SCC covering
    all incident vertices. A lone vertex necessarily carries a loop then,
    so self-connectivity holds in that case too.
    """
    a = frozenset(a)
    if not a:
        raise EmptySet("strong connectivity of the empty edge set is undefined")
    verts = sorted(edge_tails(g, a) | edge_heads(g, a))
    vid = {v: i for i, v in enumerate(verts)}
    adj: list[list[int]] = [[] for _ in verts]
    for eid in a:
        e = g.edge(eid)
        adj[vid[e.tail]].append(vid[e.head])
    comps = _tarjan_scc(len(verts), adj)
    return len(comps) == 1


def boundary_edges(g: WeightedDigraph, a: Iterable[int]) -> frozenset:
    """∂_E A = {e ∈ E \\ A : tail(e) ∈ A̲}."""
    a = frozenset(a)
    if not a:
        raise EmptySet("boundary of the empty edge set is undefined")
    tails = edge_tails(g, a)
    return frozenset(e.eid for e in g.edges if e.eid not in a and e.tail in tails)


def beta_edges(g: WeightedDigraph, a: Iterable[int]) -> float:
    """β_A : total weight of the edges exiting A."""
    return sum(g.edge(eid).alpha for eid in sorted(boundary_edges(g, a)))


@dataclass(frozen=True)
class QuotientResult:
    """Contraction of a strongly connected edge set to a single vertex.

    ``edge_map`` is the bijection from surviving quotient edge ids to the
    original ids in E \\ A; weights are carried through it unchanged.
    """

    graph: WeightedDigraph
    new_vertex: str
    edge_map: dict

    def original_edges(self, quotient_edges: Iterable[int]) -> frozenset:
        return frozenset(self.edge_map[eid] for eid in quotient_edges)


def quotient(g: WeightedDigraph, a: Iterable[int], new_vertex: str | None = None) -> QuotientResult:
    """Contract the strongly connected edge set a to one new vertex.

    Edges of a are deleted; all other edges survive (with endpoints mapped
    through the projection), so multi-edges may appear; they are preserved.
    """
    a = frozenset(a)
    if not is_strongly_connected(g, a):
        raise NotStronglyConnected("can only contract a strongly connected edge set")
    contracted = edge_tails(g, a) | edge_heads(g, a)
    if new_vertex is None:
        new_vertex = "~a"
        taken = set(g.all_vertices)
        while new_vertex in taken:
            new_vertex += "'"
    elif new_vertex in set(g.all_vertices) - contracted:
        raise GraphError(f"quotient vertex id {new_vertex!r} already in use")

    def project(v: str) -> str:
        return new_vertex if v in contracted else v

    survivors = sorted(set(g.vertices) - contracted, key=g.vertex_index)
    new_edges = []
    edge_map = {}
    for e in g.edges:
        if e.eid in a:
            continue
        edge_map[len(new_edges)] = e.eid
        new_edges.append((project(e.tail), project(e.head), e.alpha))
    qg = WeightedDigraph(g.cemetery, [new_vertex] + survivors, new_edges)
    return QuotientResult(qg, new_vertex, edge_map)


def unit_vectors(d: int) -> list[tuple[int, ...]]:
    """The 2d unit vectors of Z^d in the order e1, -e1, e2, -e2, ..."""
    dirs = []
    for i in range(d):
        plus = tuple(1 if j == i else 0 for j in range(d))
        dirs.append(plus)
        dirs.append(tuple(-c for c in plus))
    return dirs


def site_id(site: Sequence[int]) -> str:
    return ",".join(str(int(c)) for c in site)


@dataclass(frozen=True)
class LatticeSpec:
    """Translation invariant weights on Z^d plus an optional finite box.

    ``alpha`` is ordered like :func:`unit_vectors`: (a1, a-1, a2, a-2, ...).
    ``box`` may be None for operations that do not need a concrete site set.
    """

    d: int
    alpha: tuple[float, ...]
    box: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if len(self.alpha) != 2 * self.d:
            raise ValueError(f"need {2 * self.d} weights for d={self.d}, got {len(self.alpha)}")
        if any(not a > 0 for a in self.alpha):
            raise ValueError("all direction weights must be positive")
        if self.box is not None and len(self.box) == 0:
            raise ValueError("box must be non-empty when given")

    @property
    def sigma(self) -> float:
        """Σ = total weight over the 2d directions."""
        return float(sum(self.alpha))

    def to_json(self) -> str:
        data = {"d": self.d, "alpha": list(self.alpha)}
        if self.box is not None:
            data["box"] = [list(s) for s in self.box]
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "LatticeSpec":
        data = json.loads(text)
        box = data.get("box")
        if box is not None:
            box = tuple(tuple(int(c) for c in s) for s in box)
        return cls(int(data["d"]), tuple(float(a) for a in data["alpha"]), box)


def build_lattice_box(spec: LatticeSpec, cemetery: str = DEFAULT_CEMETERY) -> WeightedDigraph:
    """Box graph: one edge per (site, direction); targets outside the box
    point to the cemetery.

    Out-edges of every site appear in direction order, so out-edge k of a
    site corresponds to direction k of :func:`unit_vectors`. Every site has
    out-degree 2d and the result passes :func:`validate`.
    """
    if spec.box is None:
        raise ValueError("build_lattice_box needs a concrete box")
    sites = list(dict.fromkeys(tuple(int(c) for c in s) for s in spec.box))
    in_box = set(sites)
    dirs = unit_vectors(spec.d)
    edges = []
    for site in sites:
        for k, e in enumerate(dirs):
            target = tuple(site[j] + e[j] for j in range(spec.d))
            head = site_id(target) if target in in_box else cemetery
            edges.append((site_id(site), head, spec.alpha[k]))
    return WeightedDigraph(cemetery, [site_id(s) for s in sites], edges)
