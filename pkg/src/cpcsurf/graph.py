"""Combinatorics: full 3-ary oriented trees, trivalent graphs and covering maps.

A :class:`SurfaceGraph` stores, for every vertex, the ordered tuple of its
neighbours.  Non-leaf vertices carry an ordered triple ``(x1, x2, x3)``;
leaves carry a single neighbour.  The order of the triple is the local
orientation used by every curvature formula downstream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence


class GraphError(ValueError):
    """Raised for malformed graphs or invalid combinatorial requests."""


class LeafVertexError(GraphError):
    """An operation needing an ordered triple was given a leaf."""


@dataclass(frozen=True)
class SurfaceGraph:
    neighbors: tuple[tuple[int, ...], ...]
    root: int | None = None
    _partners: tuple[tuple[tuple[int, int], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        nbrs = tuple(tuple(int(u) for u in row) for row in self.neighbors)
        object.__setattr__(self, "neighbors", nbrs)
        n = len(nbrs)
        for v, row in enumerate(nbrs):
            if len(row) not in (1, 3):
                raise GraphError(
                    f"vertex {v} has {len(row)} incident edges; expected 3 (node) or 1 (leaf)"
                )
            for u in row:
                if not 0 <= u < n:
                    raise GraphError(f"vertex {v} references missing vertex {u}")
                if u == v:
                    raise GraphError(f"vertex {v} has a loop")
        if self.root is not None:
            if not 0 <= self.root < n:
                raise GraphError(f"root {self.root} is not a vertex")
            if len(nbrs[self.root]) != 3:
                raise GraphError(f"root {self.root} is a leaf")
        object.__setattr__(self, "_partners", _pair_slots(nbrs))

    # -- basic queries -------------------------------------------------
    def __len__(self) -> int:
        return len(self.neighbors)

    @property
    def vertices(self) -> range:
        return range(len(self.neighbors))

    def is_leaf(self, v: int) -> bool:
        return len(self.neighbors[v]) == 1

    def kind(self, v: int) -> str:
        if v == self.root:
            return "root"
        return "leaf" if self.is_leaf(v) else "node"

    def triple(self, v: int) -> tuple[int, int, int]:
        row = self.neighbors[v]
        if len(row) != 3:
            raise LeafVertexError(f"vertex {v} is a leaf and has no ordered triple")
        return row  # type: ignore[return-value]

    def non_leaves(self) -> list[int]:
        return [v for v in self.vertices if not self.is_leaf(v)]

    def slot_partner(self, v: int, slot: int) -> tuple[int, int]:
        """Return ``(u, j)`` such that edge slot ``slot`` at ``v`` is slot ``j`` at ``u``."""
        return self._partners[v][slot]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges, one entry per edge (multi-edges repeated), sorted."""
        out = []
        for v, row in enumerate(self.neighbors):
            for i, u in enumerate(row):
                w, j = self._partners[v][i]
                if (v, i) < (w, j):
                    out.append((min(v, u), max(v, u)))
        return sorted(out)

    def is_tree(self) -> bool:
        if len(self.edges()) != len(self) - 1:
            return False
        return len(self._component(0)) == len(self) if len(self) else True

    def _component(self, start: int) -> set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in self.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen

    def iter_paths(self, start: int, length: int) -> Iterator[tuple[int, ...]]:
        """Non-backtracking walks of ``length`` edges (by slot, so multi-edges count)."""

        def walk(path: tuple[int, ...], back_slot: int | None) -> Iterator[tuple[int, ...]]:
            if len(path) == length + 1:
                yield path
                return
            v = path[-1]
            for i, u in enumerate(self.neighbors[v]):
                if i == back_slot:
                    continue
                yield from walk(path + (u,), self._partners[v][i][1])

        yield from walk((start,), None)


def _pair_slots(nbrs: Sequence[Sequence[int]]) -> tuple[tuple[tuple[int, int], ...], ...]:
    # k-th occurrence of u in v's row pairs with the k-th occurrence of v in u's row
    partners: list[list[tuple[int, int] | None]] = [[None] * len(row) for row in nbrs]
    for v, row in enumerate(nbrs):
        for i, u in enumerate(row):
            if partners[v][i] is not None:
                continue
            k = sum(1 for w in row[:i] if w == u)
            back = [j for j, w in enumerate(nbrs[u]) if w == v]
            fwd_count = sum(1 for w in row if w == u)
            if len(back) != fwd_count:
                raise GraphError(f"edge {v}-{u} is not listed symmetrically")
            j = back[k]
            partners[v][i] = (u, j)
            partners[u][j] = (v, i)
    return tuple(tuple(p for p in row) for row in partners)  # type: ignore[misc]


@dataclass(frozen=True)
class CoveringMap:
    source: SurfaceGraph
    target: SurfaceGraph
    vertex_map: tuple[int, ...]

    def __call__(self, v: int) -> int:
        return self.vertex_map[v]

    def violations(self) -> list[int]:
        """Non-leaf source vertices whose ordered triple is not sent onto the target's."""
        bad = []
        for s in self.source.non_leaves():
            image = tuple(self.vertex_map[u] for u in self.source.triple(s))
            t = self.vertex_map[s]
            if self.target.is_leaf(t) or image != self.target.triple(t):
                bad.append(s)
        return bad

    def is_label_compatible(self) -> bool:
        return not self.violations()


def build_full_ternary_tree(depth: int) -> SurfaceGraph:
    """Full 3-ary oriented tree with all leaves at distance ``depth`` from the root.

    The root's triple lists its three children; every other internal vertex
    has triple ``(child1, child2, parent)``.  Ids are assigned breadth first.
    """
    if depth < 0:
        raise GraphError("depth must be non-negative")
    if depth == 0:
        # a lone vertex: no edges, and it cannot be a root with three edges
        return _SingleVertex()
    rows: list[list[int]] = [[]]
    level = [0]
    for d in range(1, depth + 1):
        nxt = []
        for v in level:
            n_children = 3 if v == 0 else 2
            kids = []
            for _ in range(n_children):
                c = len(rows)
                rows.append([v])
                kids.append(c)
            if v == 0:
                rows[v] = kids
            else:
                rows[v] = kids + rows[v]
            nxt.extend(kids)
        level = nxt
    return SurfaceGraph(tuple(tuple(r) for r in rows), root=0)


class _SingleVertex(SurfaceGraph):
    """Depth-0 tree: one vertex and no edges (the only edgeless graph allowed)."""

    def __init__(self) -> None:
        object.__setattr__(self, "neighbors", ((),))
        object.__setattr__(self, "root", None)
        object.__setattr__(self, "_partners", ((),))

    def is_leaf(self, v: int) -> bool:
        return True

    def kind(self, v: int) -> str:
        return "root"

    def is_tree(self) -> bool:
        return True


def tree_size(depth: int) -> int:
    return 1 + 3 * (2**depth - 1)


def unroll_covering(graph: SurfaceGraph, root: int, depth: int) -> CoveringMap:
    """Unroll ``graph`` from ``root`` into a full 3-ary tree of the given depth.

    Each tree vertex copies the ordered triple of its image, so the map is a
    label-compatible local isomorphism at every internal tree vertex.
    """
    if depth < 0:
        raise GraphError("depth must be non-negative")
    if graph.is_leaf(root):
        raise LeafVertexError(f"root {root} is a leaf")
    if depth == 0:
        return CoveringMap(_SingleVertex(), graph, (root,))

    rows: list[list[int] | None] = [None]
    vmap = [root]
    # queue entries: (tree id, level, slot at the image leading back to the parent)
    queue: deque[tuple[int, int, int | None, int | None]] = deque([(0, 0, None, None)])
    while queue:
        t, level, back_slot, parent = queue.popleft()
        g = vmap[t]
        if level == depth:
            rows[t] = [parent]  # type: ignore[list-item]
            continue
        if graph.is_leaf(g):
            raise GraphError(
                f"graph vertex {g} is a leaf at distance {level} < {depth}; not locally trivalent"
            )
        row: list[int] = []
        for i, u in enumerate(graph.triple(g)):
            if i == back_slot:
                row.append(parent)  # type: ignore[arg-type]
                continue
            c = len(rows)
            rows.append(None)
            vmap.append(u)
            row.append(c)
            queue.append((c, level + 1, graph.slot_partner(g, i)[1], t))
        rows[t] = row
    tree = SurfaceGraph(tuple(tuple(r) for r in rows), root=0)  # type: ignore[arg-type]
    return CoveringMap(tree, graph, tuple(vmap))


def relabel(graph: SurfaceGraph, vertex: int, permutation: Sequence[int]) -> SurfaceGraph:
    """Permute the ordered triple at ``vertex``.

    ``permutation`` is ``(s(1), s(2), s(3))``: the edge labelled ``i`` gets
    label ``s(i)``.  So ``(2, 1, 3)`` turns ``(e1, e2, e3)`` into ``(e2, e1, e3)``.
    """
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != [1, 2, 3]:
        raise GraphError(f"{perm} is not a permutation of (1, 2, 3)")
    old = graph.triple(vertex)
    new = [0, 0, 0]
    for i, s in enumerate(perm):
        new[s - 1] = old[i]
    rows = list(graph.neighbors)
    rows[vertex] = tuple(new)
    return SurfaceGraph(tuple(rows), root=graph.root)


def permutation_sign(permutation: Sequence[int]) -> int:
    p = [int(x) - 1 for x in permutation]
    sign = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def invert_permutation(permutation: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(permutation)
    for i, s in enumerate(permutation):
        inv[int(s) - 1] = i + 1
    return tuple(inv)
