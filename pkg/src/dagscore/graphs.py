"""DAGs, Markov equivalence fingerprints and decomposable (chordal) graphs.

Vertices are 0-based internally; the text formats and error messages use
1-based numbering. Vertex sets are Python ints used as bitmasks, which keeps
them hashable and cheap to compare for any q.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import CycleError, DagscoreError, NotChordalError


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def members(mask: int) -> tuple[int, ...]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


@dataclass(frozen=True)
class Dag:
    """DAG on q vertices stored as parent sets.

    Build through :func:`validate_dag`; equality and hashing use the parent
    bitmasks only.
    """

    q: int
    parent_masks: tuple[int, ...]
    order: tuple[int, ...]
    labels: Optional[tuple[str, ...]] = None

    def __eq__(self, other):
        return isinstance(other, Dag) and self.parent_masks == other.parent_masks

    def __hash__(self):
        return hash(self.parent_masks)

    @property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        return tuple(members(m) for m in self.parent_masks)

    def family_mask(self, j: int) -> int:
        return self.parent_masks[j] | (1 << j)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for j in range(self.q) for i in members(self.parent_masks[j])]

    @property
    def n_edges(self) -> int:
        return sum(bin(m).count("1") for m in self.parent_masks)

    def to_text(self) -> str:
        lines = []
        for j, pa in enumerate(self.parents):
            lines.append(f"{j + 1}: " + ",".join(str(i + 1) for i in pa))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "type": "dag",
            "q": self.q,
            "parents": [[i + 1 for i in pa] for pa in self.parents],
        }


def _find_cycle(q: int, parent_masks: Sequence[int]) -> list[int]:
    children = [[] for _ in range(q)]
    for j in range(q):
        for i in members(parent_masks[j]):
            children[i].append(j)
    color = [0] * q
    stack_pos: dict[int, int] = {}
    path: list[int] = []

    def dfs(u):
        color[u] = 1
        stack_pos[u] = len(path)
        path.append(u)
        for w in children[u]:
            if color[w] == 1:
                return path[stack_pos[w]:] + [w]
            if color[w] == 0:
                found = dfs(w)
                if found:
                    return found
        color[u] = 2
        path.pop()
        del stack_pos[u]
        return None

    for s in range(q):
        if color[s] == 0:
            found = dfs(s)
            if found:
                return found
    return []


def validate_dag(parents: Sequence[Iterable[int]], labels: Optional[Sequence[str]] = None) -> Dag:
    """Check parent sets for range, self-loops and cycles; return a Dag.

    The stored topological order is Kahn's algorithm with the smallest ready
    vertex first.
    """
    q = len(parents)
    masks = []
    for j, pa in enumerate(parents):
        pa = list(pa)
        for i in pa:
            if not 0 <= i < q:
                raise DagscoreError(f"parent {i + 1} of vertex {j + 1} out of range 1..{q}")
            if i == j:
                raise CycleError([j, j])
        masks.append(mask_of(pa))
    indeg = [bin(m).count("1") for m in masks]
    children = [[] for _ in range(q)]
    for j in range(q):
        for i in members(masks[j]):
            children[i].append(j)
    ready = [j for j in range(q) if indeg[j] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for w in children[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) < q:
        raise CycleError(_find_cycle(q, masks))
    return Dag(q, tuple(masks), tuple(order), tuple(labels) if labels else None)


def empty_dag(q: int) -> Dag:
    return validate_dag([()] * q)


def complete_dag(q: int) -> Dag:
    return validate_dag([tuple(range(j)) for j in range(q)])


@dataclass(frozen=True)
class EquivalenceFingerprint:
    """Skeleton plus v-structures; equal fingerprints <=> Markov equivalent DAGs."""

    skeleton: frozenset
    v_structures: frozenset


def fingerprint(d: Dag) -> EquivalenceFingerprint:
    skel = frozenset((min(i, j), max(i, j)) for i, j in d.edges())
    vs = set()
    for k in range(d.q):
        pa = members(d.parent_masks[k])
        for a, b in itertools.combinations(pa, 2):
            if (a, b) not in skel:
                vs.add((a, k, b))
    return EquivalenceFingerprint(skel, frozenset(vs))


def all_dags(q: int) -> Iterator[Dag]:
    """Every labelled DAG on q vertices (25 for q=3, 543 for q=4, 29281 for q=5)."""
    pairs = list(itertools.combinations(range(q), 2))
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        masks = [0] * q
        for (i, j), s in zip(pairs, states):
            if s == 1:
                masks[j] |= 1 << i
            elif s == 2:
                masks[i] |= 1 << j
        if _is_acyclic(q, masks):
            yield validate_dag([members(m) for m in masks])


def _is_acyclic(q: int, masks: Sequence[int]) -> bool:
    remaining = (1 << q) - 1
    while remaining:
        sources = 0
        for j in members(remaining):
            if not masks[j] & remaining:
                sources |= 1 << j
        if not sources:
            return False
        remaining &= ~sources
    return True


# -- undirected / decomposable ------------------------------------------------


@dataclass(frozen=True)
class DecomposableGraph:
    """Chordal undirected graph with its junction-tree cliques and separators.

    ``peo`` is a perfect elimination ordering: every vertex's neighbours that
    come after it in ``peo`` form a clique. ``separators`` is a multiset (a
    list), one entry per junction-tree edge.
    """

    q: int
    neighbor_masks: tuple[int, ...]
    cliques: tuple[tuple[int, ...], ...]
    separators: tuple[tuple[int, ...], ...]
    peo: tuple[int, ...]

    def __eq__(self, other):
        return isinstance(other, DecomposableGraph) and self.neighbor_masks == other.neighbor_masks

    def __hash__(self):
        return hash(self.neighbor_masks)

    @property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.q, self.q), dtype=bool)
        for i in range(self.q):
            for j in members(self.neighbor_masks[i]):
                a[i, j] = True
        return a

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.q) for j in members(self.neighbor_masks[i]) if i < j]

    @property
    def n_edges(self) -> int:
        return sum(bin(m).count("1") for m in self.neighbor_masks) // 2

    def to_text(self) -> str:
        return "".join(f"{i + 1} -- {j + 1}\n" for i, j in self.edges())

    def to_json(self) -> dict:
        return {
            "type": "undirected",
            "q": self.q,
            "edges": [[i + 1, j + 1] for i, j in self.edges()],
            "cliques": [[v + 1 for v in c] for c in self.cliques],
            "separators": [[v + 1 for v in s] for s in self.separators],
        }


def _neighbor_masks(adjacency) -> tuple[int, ...]:
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DagscoreError("adjacency must be a square matrix")
    a = a.astype(bool)
    if not np.array_equal(a, a.T):
        raise DagscoreError("adjacency must be symmetric")
    if np.any(np.diag(a)):
        raise DagscoreError("adjacency must have a zero diagonal")
    return tuple(mask_of(np.flatnonzero(a[i])) for i in range(a.shape[0]))


def adjacency_from_edges(q: int, edges: Iterable[tuple[int, int]]) -> np.ndarray:
    a = np.zeros((q, q), dtype=bool)
    for i, j in edges:
        if i == j or not (0 <= i < q and 0 <= j < q):
            raise DagscoreError(f"bad edge ({i + 1}, {j + 1}) for q={q}")
        a[i, j] = a[j, i] = True
    return a


def mcs_order(nbrs: Sequence[int]) -> list[int]:
    """Maximum cardinality search visit order, ties to the lowest index."""
    q = len(nbrs)
    weight = [0] * q
    visited = 0
    order = []
    for _ in range(q):
        best = -1
        for v in range(q):
            if not visited >> v & 1 and (best < 0 or weight[v] > weight[best]):
                best = v
        order.append(best)
        visited |= 1 << best
        for w in members(nbrs[best] & ~visited):
            weight[w] += 1
    return order


def _chordless_cycle(nbrs: Sequence[int]) -> list[int]:
    # For a vertex v with non-adjacent neighbours a, b, a shortest a-b path
    # avoiding v's closed neighbourhood (except a, b) closes a chordless cycle.
    q = len(nbrs)
    for v in range(q):
        nv = members(nbrs[v])
        for a, b in itertools.combinations(nv, 2):
            if nbrs[a] >> b & 1:
                continue
            blocked = (nbrs[v] | (1 << v)) & ~((1 << a) | (1 << b))
            prev = {a: None}
            frontier = [a]
            while frontier and b not in prev:
                nxt = []
                for u in frontier:
                    for w in members(nbrs[u] & ~blocked):
                        if w not in prev:
                            prev[w] = u
                            nxt.append(w)
                frontier = nxt
            if b in prev:
                path = []
                u = b
                while u is not None:
                    path.append(u)
                    u = prev[u]
                return [v] + path[::-1]
    return []


def _check_masks(nbrs: tuple[int, ...]) -> Optional[DecomposableGraph]:
    q = len(nbrs)
    order = mcs_order(nbrs)
    pos = {v: k for k, v in enumerate(order)}
    earlier = []
    for v in order:
        before = 0
        for w in members(nbrs[v]):
            if pos[w] < pos[v]:
                before |= 1 << w
        for u in members(before):
            if (before & ~(1 << u)) & ~nbrs[u]:
                return None
        earlier.append(before)
    # clique candidates {v} + earlier-visited neighbours, in visit order
    cands = [earlier[k] | (1 << v) for k, v in enumerate(order)]
    cliques = []
    for k, c in enumerate(cands):
        if any(c & other == c and c != other for other in cands):
            continue
        if c in cliques:
            continue
        cliques.append(c)
    # in MCS order the cliques have the running intersection property
    separators = []
    seen = 0
    for c in cliques:
        s = c & seen
        if s:
            separators.append(s)
        seen |= c
    return DecomposableGraph(
        q,
        nbrs,
        tuple(members(c) for c in cliques),
        tuple(members(s) for s in separators),
        tuple(reversed(order)),
    )


def check_decomposable(adjacency) -> DecomposableGraph:
    """Certify chordality via maximum cardinality search and build the junction tree."""
    nbrs = _neighbor_masks(adjacency)
    g = _check_masks(nbrs)
    if g is None:
        raise NotChordalError(_chordless_cycle(nbrs))
    return g


def is_chordal(adjacency) -> bool:
    return _check_masks(_neighbor_masks(adjacency)) is not None


def decomposable_from_masks(nbrs: Sequence[int]) -> Optional[DecomposableGraph]:
    """Like check_decomposable on neighbour bitmasks, returning None if not chordal."""
    return _check_masks(tuple(nbrs))


def directed_version(g: DecomposableGraph) -> Dag:
    """A DAG Markov equivalent to g.

    Vertices are numbered by the MCS visit order (the reversed PEO) and each
    edge points from the lower to the higher number, so every parent set is
    a clique and there are no v-structures.
    """
    order = tuple(reversed(g.peo))
    pos = {v: k for k, v in enumerate(order)}
    parents = []
    for v in range(g.q):
        parents.append([w for w in members(g.neighbor_masks[v]) if pos[w] < pos[v]])
    return validate_dag(parents)


def skeleton_adjacency(d: Dag) -> np.ndarray:
    return adjacency_from_edges(d.q, d.edges())


def all_undirected(q: int) -> Iterator[tuple[int, ...]]:
    pairs = list(itertools.combinations(range(q), 2))
    for bits in range(1 << len(pairs)):
        nbrs = [0] * q
        for k, (i, j) in enumerate(pairs):
            if bits >> k & 1:
                nbrs[i] |= 1 << j
                nbrs[j] |= 1 << i
        yield tuple(nbrs)


def all_decomposable(q: int) -> Iterator[DecomposableGraph]:
    """Every labelled decomposable graph on q vertices (61 for q=4)."""
    for nbrs in all_undirected(q):
        g = _check_masks(nbrs)
        if g is not None:
            yield g


# -- text formats -------------------------------------------------------------


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_dag_text(text: str, q: Optional[int] = None) -> Dag:
    """Parse lines ``j: parent,parent,...`` (1-based). Missing vertices have no parents."""
    entries: dict[int, list[int]] = {}
    for lineno, line in _content_lines(text):
        if ":" not in line:
            raise DagscoreError(f"graph line {lineno}: expected 'j: parents', got {line!r}")
        head, tail = line.split(":", 1)
        try:
            j = int(head) - 1
            pa = [int(t) - 1 for t in tail.replace(" ", "").split(",") if t]
        except ValueError:
            raise DagscoreError(f"graph line {lineno}: vertex ids must be integers") from None
        if j in entries:
            raise DagscoreError(f"graph line {lineno}: vertex {j + 1} listed twice")
        entries[j] = pa
    top = max([j + 1 for j in entries] + [i + 1 for pa in entries.values() for i in pa], default=0)
    if q is None:
        q = top
    elif top > q:
        raise DagscoreError(f"graph mentions vertex {top} but there are only {q} responses")
    if min(entries, default=0) < 0:
        raise DagscoreError("vertex ids are 1-based")
    return validate_dag([entries.get(j, []) for j in range(q)])


def parse_ug_text(text: str, q: Optional[int] = None) -> np.ndarray:
    """Parse an edge list of ``j -- k`` lines (1-based); a bare ``j`` declares a vertex."""
    edges = []
    top = 0
    for lineno, line in _content_lines(text):
        parts = [t.strip() for t in line.split("--")]
        try:
            ids = [int(t) - 1 for t in parts]
        except ValueError:
            raise DagscoreError(f"graph line {lineno}: expected 'j -- k', got {line!r}") from None
        if len(ids) == 2:
            edges.append((ids[0], ids[1]))
        elif len(ids) != 1:
            raise DagscoreError(f"graph line {lineno}: expected 'j -- k', got {line!r}")
        if min(ids) < 0:
            raise DagscoreError(f"graph line {lineno}: vertex ids are 1-based")
        top = max(top, max(ids) + 1)
    if q is None:
        q = top
    elif top > q:
        raise DagscoreError(f"graph mentions vertex {top} but there are only {q} responses")
    return adjacency_from_edges(q, edges)
