"""Per-vertex discrete curvature of a map from a trivalent graph into R^3.

At a non-leaf vertex ``x`` with ordered neighbours ``(x1, x2, x3)`` the
tangent vectors are ``v1 = p(x1) - p(x3)`` and ``v2 = p(x2) - p(x3)``, the
normal is ``v1 x v2`` normalised, and

    I  = [[<v1,v1>, <v1,v2>], [<v2,v1>, <v2,v2>]]
    II = -[[<v1,dn>, <v1,d'n>], [<v2,dn>, <v2,d'n>]]

with ``dn = n(x1) - n(x3)`` and ``d'n = n(x2) - n(x3)``.  The Weingarten map is
``W = I^-1 II``; ``H = tr W`` and ``K = det W`` (no factor 1/2), and
``k1 >= k2`` are the roots of ``k^2 - H k + K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .config import DEFAULT, Tolerances
from .graph import LeafVertexError, SurfaceGraph


class ImmersionError(ValueError):
    """Invalid immersion data (shape, non-unit prescribed normals, ...)."""


class DegenerateVertexError(ValueError):
    """The tangent plane at a vertex is rank deficient."""


class MissingNormalError(ValueError):
    """A neighbour normal is needed but neither geometry nor a prescription gives one."""


class SingularFormError(ValueError):
    """The first fundamental form is (numerically) singular."""


@dataclass(frozen=True)
class Immersion:
    graph: SurfaceGraph
    positions: np.ndarray
    prescribed_normals: Mapping[int, np.ndarray] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)
    tol: Tolerances = DEFAULT

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        if pos.shape != (len(self.graph), 3):
            raise ImmersionError(
                f"positions must have shape ({len(self.graph)}, 3), got {pos.shape}"
            )
        if not np.all(np.isfinite(pos)):
            bad = int(np.argwhere(~np.isfinite(pos))[0][0])
            raise ImmersionError(f"vertex {bad} has a non-finite position")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        normals = {}
        for v, nv in self.prescribed_normals.items():
            v = int(v)
            if not 0 <= v < len(self.graph):
                raise ImmersionError(f"prescribed normal for missing vertex {v}")
            arr = np.array(nv, dtype=float)
            if arr.shape != (3,):
                raise ImmersionError(f"prescribed normal at vertex {v} is not a 3-vector")
            if abs(np.linalg.norm(arr) - 1.0) > self.tol.unit:
                raise ImmersionError(
                    f"prescribed normal at vertex {v} has norm {np.linalg.norm(arr):.6g}, not 1"
                )
            arr.setflags(write=False)
            normals[v] = arr
        object.__setattr__(self, "prescribed_normals", normals)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @cached_property
    def mean_edge_length(self) -> float:
        edges = self.graph.edges()
        if not edges:
            return 1.0
        e = np.array(edges)
        lengths = np.linalg.norm(self.positions[e[:, 0]] - self.positions[e[:, 1]], axis=1)
        mean = float(lengths.mean())
        return mean if mean > 0 else 1.0

    @property
    def eps_rank(self) -> float:
        return self.tol.rank * self.mean_edge_length**2

    def edge_lengths(self) -> np.ndarray:
        e = np.array(self.graph.edges()).reshape(-1, 2)
        return np.linalg.norm(self.positions[e[:, 0]] - self.positions[e[:, 1]], axis=1)

    def with_positions(self, positions: np.ndarray, **metadata: Any) -> "Immersion":
        return Immersion(
            self.graph,
            positions,
            self.prescribed_normals,
            {**self.metadata, **metadata},
            self.tol,
        )

    def with_graph(self, graph: SurfaceGraph) -> "Immersion":
        return Immersion(graph, self.positions, self.prescribed_normals, self.metadata, self.tol)

    def degenerate_vertices(self) -> list[int]:
        """Non-leaf vertices violating the rank condition."""
        out = []
        for v in self.graph.non_leaves():
            v1, v2 = tangent_vectors(self, v)
            if np.linalg.norm(np.cross(v1, v2)) <= self.eps_rank:
                out.append(v)
        return out

    def interior_vertices(self) -> list[int]:
        """Non-leaf vertices whose three neighbours are non-leaf as well."""
        g = self.graph
        return [
            v for v in g.non_leaves() if not any(g.is_leaf(u) for u in g.triple(v))
        ]


@dataclass(frozen=True)
class Curvatures:
    H: float
    K: float
    k1: float | None
    k2: float | None

    @property
    def real(self) -> bool:
        return self.k1 is not None


@dataclass(frozen=True)
class VertexCurvature:
    vertex: int
    v1: np.ndarray
    v2: np.ndarray
    n: np.ndarray
    I: np.ndarray
    II: np.ndarray
    W: np.ndarray
    H: float
    K: float
    k1: float | None
    k2: float | None
    alpha: np.ndarray
    beta: np.ndarray
    dn: np.ndarray
    dpn: np.ndarray
    normal_sources: tuple[str, str, str]

    @property
    def real_principal(self) -> bool:
        return self.k1 is not None


def tangent_vectors(imm: Immersion, x: int) -> tuple[np.ndarray, np.ndarray]:
    x1, x2, x3 = imm.graph.triple(x)
    p = imm.positions
    return p[x1] - p[x3], p[x2] - p[x3]


def unit_normal(imm: Immersion, x: int) -> np.ndarray:
    v1, v2 = tangent_vectors(imm, x)
    c = np.cross(v1, v2)
    norm = np.linalg.norm(c)
    if norm <= imm.eps_rank:
        raise DegenerateVertexError(f"tangent plane at vertex {x} is degenerate (|v1 x v2| = {norm:.3g})")
    return c / norm


def symmetric_normal(imm: Immersion, x: int) -> np.ndarray:
    """The same normal written with the three edge vectors symmetrically."""
    p = imm.positions
    e1, e2, e3 = (p[u] - p[x] for u in imm.graph.triple(x))
    c = np.cross(e1, e2) + np.cross(e2, e3) + np.cross(e3, e1)
    norm = np.linalg.norm(c)
    if norm <= imm.eps_rank:
        raise DegenerateVertexError(f"tangent plane at vertex {x} is degenerate")
    return c / norm


def vertex_normal(imm: Immersion, y: int) -> tuple[np.ndarray, str]:
    """Normal at ``y`` and where it came from: ``"geometric"`` or ``"prescribed"``."""
    if not imm.graph.is_leaf(y):
        try:
            return unit_normal(imm, y), "geometric"
        except DegenerateVertexError:
            pass
    if y in imm.prescribed_normals:
        return np.asarray(imm.prescribed_normals[y]), "prescribed"
    raise MissingNormalError(f"no normal available at vertex {y}")


def neighbor_normals(imm: Immersion, x: int) -> tuple[list[np.ndarray], tuple[str, str, str]]:
    normals, sources = [], []
    for u in imm.graph.triple(x):
        nu, src = vertex_normal(imm, u)
        normals.append(nu)
        sources.append(src)
    return normals, tuple(sources)  # type: ignore[return-value]


def normal_differences(imm: Immersion, x: int) -> tuple[np.ndarray, np.ndarray]:
    (n1, n2, n3), _ = neighbor_normals(imm, x)
    return n1 - n3, n2 - n3


def fundamental_forms(imm: Immersion, x: int) -> tuple[np.ndarray, np.ndarray]:
    v1, v2 = tangent_vectors(imm, x)
    dn, dpn = normal_differences(imm, x)
    I = np.array([[v1 @ v1, v1 @ v2], [v2 @ v1, v2 @ v2]])
    II = -np.array([[v1 @ dn, v1 @ dpn], [v2 @ dn, v2 @ dpn]])
    return I, II


def _inverse_2x2(I: np.ndarray, tol: float, x: int) -> np.ndarray:
    det = I[0, 0] * I[1, 1] - I[0, 1] * I[1, 0]
    scale = float(np.max(np.abs(I))) ** 2
    if det <= tol * scale or scale == 0.0:
        raise SingularFormError(f"first fundamental form at vertex {x} is singular (det = {det:.3g})")
    return np.array([[I[1, 1], -I[0, 1]], [-I[1, 0], I[0, 0]]]) / det


def weingarten(imm: Immersion, x: int) -> np.ndarray:
    I, II = fundamental_forms(imm, x)
    return _inverse_2x2(I, imm.tol.num, x) @ II


def curvatures_from_weingarten(W: np.ndarray) -> Curvatures:
    H = float(W[0, 0] + W[1, 1])
    K = float(W[0, 0] * W[1, 1] - W[0, 1] * W[1, 0])
    disc = H * H - 4.0 * K
    # tiny negative discriminants are round-off of a double root
    if disc < 0.0 and disc > -1e-12 * max(H * H, abs(K), 1e-300):
        disc = 0.0
    if disc < 0.0:
        return Curvatures(H, K, None, None)
    s = np.sqrt(disc)
    return Curvatures(H, K, (H + s) / 2.0, (H - s) / 2.0)


def curvatures(imm: Immersion, x: int) -> Curvatures:
    return curvatures_from_weingarten(weingarten(imm, x))


def decompose_normal_differences(imm: Immersion, x: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``dn`` and ``d'n`` in the frame ``(v1, v2, n)``."""
    v1, v2 = tangent_vectors(imm, x)
    n = unit_normal(imm, x)
    dn, dpn = normal_differences(imm, x)
    frame = np.column_stack([v1, v2, n])
    coeffs = np.linalg.solve(frame, np.column_stack([dn, dpn]))
    return coeffs[:, 0], coeffs[:, 1]


def analyze_vertex(imm: Immersion, x: int) -> VertexCurvature:
    if imm.graph.is_leaf(x):
        raise LeafVertexError(f"vertex {x} is a leaf")
    v1, v2 = tangent_vectors(imm, x)
    n = unit_normal(imm, x)
    (n1, n2, n3), sources = neighbor_normals(imm, x)
    dn, dpn = n1 - n3, n2 - n3
    I = np.array([[v1 @ v1, v1 @ v2], [v2 @ v1, v2 @ v2]])
    II = -np.array([[v1 @ dn, v1 @ dpn], [v2 @ dn, v2 @ dpn]])
    W = _inverse_2x2(I, imm.tol.num, x) @ II
    curv = curvatures_from_weingarten(W)
    coeffs = np.linalg.solve(np.column_stack([v1, v2, n]), np.column_stack([dn, dpn]))
    return VertexCurvature(
        vertex=x,
        v1=v1,
        v2=v2,
        n=n,
        I=I,
        II=II,
        W=W,
        H=curv.H,
        K=curv.K,
        k1=curv.k1,
        k2=curv.k2,
        alpha=coeffs[:, 0],
        beta=coeffs[:, 1],
        dn=dn,
        dpn=dpn,
        normal_sources=sources,
    )
