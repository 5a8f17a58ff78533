"""Discrete principal directions, CPC verdicts, parallel transforms and degeneration.

``v_i`` is a discrete principal direction when the matching normal difference
is a multiple of it: ``dn = -k1 v1`` (resp. ``d'n = -k2 v2``).  Under that
hypothesis the curvature attached to the direction is

    k = 2 <v_i, n(x3)> / |v_i|^2,

which never looks at ``n(x1)`` (or ``n(x2)``).  We use this value as the
direction-tagged curvature and measure how far ``dn + k v`` is from zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import Tolerances
from .curvature import (
    Immersion,
    analyze_vertex,
    neighbor_normals,
    tangent_vectors,
    vertex_normal,
)


class NotPrincipalError(ValueError):
    pass


class FlatDirectionError(ValueError):
    """Curvature is (numerically) zero, so the curvature-sphere center is at infinity."""


@dataclass(frozen=True)
class PrincipalReport:
    vertex: int
    k_along_v1: float
    k_along_v2: float
    residual1: float
    residual2: float
    is_principal1: bool
    is_principal2: bool
    c_vector: np.ndarray
    c_residual: float
    eigen_match1: float  # distance from k_along_v1 to the nearest Weingarten eigenvalue
    eigen_match2: float


@dataclass(frozen=True)
class CPCVerdict:
    direction: int
    constant_value: float
    max_deviation: float
    vertices_checked: int
    pass_: bool
    failing: tuple[int, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "direction": self.direction,
            "constant_value": self.constant_value,
            "max_deviation": self.max_deviation,
            "vertices_checked": self.vertices_checked,
            "pass": self.pass_,
            "failing": list(self.failing),
        }


@dataclass(frozen=True)
class Degeneration:
    classification: str  # "points-merge" | "curve-like" | "surface-like" | "none"
    n_points: int
    n_clusters: int
    max_cluster_degree: int
    max_spread: float
    t: float


def _tol(imm: Immersion, tol: Tolerances | None) -> Tolerances:
    return imm.tol if tol is None else tol


def direction_residual(d: np.ndarray, k: float, v: np.ndarray, floor: float = 1.0) -> float:
    """``|d + k v| / max(|v||k| + |d|, floor)``.

    Both terms are normal differences, so the floor (in unit-normal units)
    keeps round-off in nearly flat directions from reading as a 0/0 ratio.
    """
    num = float(np.linalg.norm(d + k * v))
    den = max(float(np.linalg.norm(v) * abs(k) + np.linalg.norm(d)), floor)
    return 0.0 if den == 0.0 else num / den


def corollary_k1(imm: Immersion, x: int, direction: int = 1) -> float:
    """Curvature attached to ``v_direction`` via ``2 <v, n(x3)> / |v|^2``."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    v = tangent_vectors(imm, x)[direction - 1]
    vv = float(v @ v)
    if vv == 0.0:
        raise ValueError(f"tangent vector v{direction} vanishes at vertex {x}")
    n3, _ = vertex_normal(imm, imm.graph.triple(x)[2])
    return 2.0 * float(v @ n3) / vv


def principal_report(imm: Immersion, x: int, tol: Tolerances | None = None) -> PrincipalReport:
    tol = _tol(imm, tol)
    v1, v2 = tangent_vectors(imm, x)
    (n1, n2, n3), _ = neighbor_normals(imm, x)
    dn, dpn = n1 - n3, n2 - n3
    ka = 2.0 * float(v1 @ n3) / float(v1 @ v1)
    kb = 2.0 * float(v2 @ n3) / float(v2 @ v2)
    r1 = direction_residual(dn, ka, v1, tol.residual_floor)
    r2 = direction_residual(dpn, kb, v2, tol.residual_floor)

    p = imm.positions
    x1, x2, x3 = imm.graph.triple(x)
    # the three equations n(xi) = -k1 p(.) - k2 p(.) + c, solved for c in least squares
    estimates = np.array(
        [
            n1 + ka * p[x1] + kb * p[x3],
            n2 + ka * p[x3] + kb * p[x2],
            n3 + ka * p[x3] + kb * p[x3],
        ]
    )
    c = estimates.mean(axis=0)
    scale = (
        abs(ka) * np.linalg.norm(v1)
        + abs(kb) * np.linalg.norm(v2)
        + np.linalg.norm(dn)
        + np.linalg.norm(dpn)
    )
    spread = float(np.max(np.linalg.norm(estimates - c, axis=1)))
    c_res = 0.0 if scale == 0.0 else spread / scale

    try:
        vc = analyze_vertex(imm, x)
        eig = [vc.k1, vc.k2] if vc.k1 is not None else None
    except ValueError:
        eig = None
    if eig is None:
        m1 = m2 = float("nan")
    else:
        m1 = min(abs(ka - e) for e in eig)
        m2 = min(abs(kb - e) for e in eig)
    return PrincipalReport(
        vertex=x,
        k_along_v1=ka,
        k_along_v2=kb,
        residual1=r1,
        residual2=r2,
        is_principal1=r1 < tol.tau_dir,
        is_principal2=r2 < tol.tau_dir,
        c_vector=c,
        c_residual=c_res,
        eigen_match1=m1,
        eigen_match2=m2,
    )


def analysis_vertices(imm: Immersion) -> list[int]:
    """Default vertex set for aggregate checks.

    Generators may name it in ``metadata["analysis_vertices"]``; otherwise the
    interior vertices (all neighbours non-leaf) are used.
    """
    chosen = imm.metadata.get("analysis_vertices")
    if chosen is not None:
        return [int(v) for v in chosen]
    return imm.interior_vertices()


def cpc_verdict(
    imm: Immersion,
    direction: int = 1,
    tol: Tolerances | None = None,
    vertices: list[int] | None = None,
) -> CPCVerdict:
    tol = _tol(imm, tol)
    verts = analysis_vertices(imm) if vertices is None else list(vertices)
    if not verts:
        raise ValueError("no analyzable vertices")
    ks, failing = [], []
    for x in verts:
        rep = principal_report(imm, x, tol)
        k = rep.k_along_v1 if direction == 1 else rep.k_along_v2
        ok = rep.is_principal1 if direction == 1 else rep.is_principal2
        ks.append(k)
        if not ok:
            failing.append(x)
    ks_arr = np.array(ks)
    const = float(np.median(ks_arr))
    dev = float(np.max(np.abs(ks_arr - const)))
    passed = not failing and dev < tol.tau_cpc * max(1.0, abs(const))
    if dev >= tol.tau_cpc * max(1.0, abs(const)):
        worst = [x for x, k in zip(verts, ks) if abs(k - const) >= tol.tau_cpc * max(1.0, abs(const))]
        failing = sorted(set(failing) | set(worst))
    return CPCVerdict(direction, const, dev, len(verts), passed, tuple(failing))


def curvature_sphere_center(imm: Immersion, x: int, tol: Tolerances | None = None) -> np.ndarray:
    """Common point ``p(x3) + n(x3)/k1 = p(x1) + n(x1)/k1`` of a direction-1 principal vertex."""
    tol = _tol(imm, tol)
    rep = principal_report(imm, x, tol)
    if not rep.is_principal1:
        raise NotPrincipalError(f"v1 is not a principal direction at vertex {x} (residual {rep.residual1:.3g})")
    k = rep.k_along_v1
    if abs(k) <= tol.tau_zero:
        raise FlatDirectionError(f"k1 = {k:.3g} at vertex {x}: center at infinity")
    x1, _, x3 = imm.graph.triple(x)
    (n1, _, n3), _ = neighbor_normals(imm, x)
    p3 = imm.positions[x3] + n3 / k
    p1 = imm.positions[x1] + n1 / k
    if np.linalg.norm(p1 - p3) > tol.tau_dir * (imm.mean_edge_length + 1.0 / abs(k)):
        raise NotPrincipalError(f"center expressions disagree at vertex {x}")
    return p3


def curvature_sphere_centers_both(imm: Immersion, x: int) -> tuple[np.ndarray, np.ndarray]:
    """Both center expressions, without the principal precondition (for checks)."""
    k = corollary_k1(imm, x, 1)
    x1, _, x3 = imm.graph.triple(x)
    (n1, _, n3), _ = neighbor_normals(imm, x)
    return imm.positions[x1] + n1 / k, imm.positions[x3] + n3 / k


def parallel_transform(imm: Immersion, t: float) -> Immersion:
    """Move every vertex by ``t`` along its normal.

    Non-leaf vertices use their geometric normal, leaves their prescribed one;
    prescribed normals are carried over unchanged.  A degenerate result is
    returned, with the offending vertices listed in
    ``metadata["degenerate_vertices"]``.
    """
    normals = np.array([vertex_normal(imm, v)[0] for v in imm.graph.vertices])
    out = imm.with_positions(imm.positions + t * normals, parallel_t=float(t))
    deg = out.degenerate_vertices()
    return Immersion(
        out.graph,
        out.positions,
        out.prescribed_normals,
        {**out.metadata, "degenerate_vertices": deg},
        out.tol,
    )


def classify_degeneration(imm: Immersion, t: float, tol: Tolerances | None = None) -> Degeneration:
    """Cluster the non-leaf image points of the transform at ``t`` and read off the quotient.

    ``"none"`` is reserved for ``t = 0``.  For ``t != 0`` the quotient graph decides:
    no edges left gives ``"points-merge"``, at most two neighbouring clusters
    everywhere gives ``"curve-like"``, anything else ``"surface-like"``.
    """
    tol = _tol(imm, tol)
    moved = parallel_transform(imm, t)
    nodes = imm.graph.non_leaves()
    index = {v: i for i, v in enumerate(nodes)}
    pts = moved.positions[nodes]
    radius = tol.tau_merge * imm.mean_edge_length
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    n = len(nodes)
    adj = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])),
        shape=(n, n),
    )
    n_clusters, labels = connected_components(adj, directed=False)

    nbr_clusters: list[set[int]] = [set() for _ in range(n_clusters)]
    for a, b in imm.graph.edges():
        if a in index and b in index:
            ca, cb = labels[index[a]], labels[index[b]]
            if ca != cb:
                nbr_clusters[ca].add(cb)
                nbr_clusters[cb].add(ca)
    spread = 0.0
    for c in range(n_clusters):
        members = pts[labels == c]
        if len(members) > 1:
            spread = max(spread, float(np.max(np.linalg.norm(members - members.mean(axis=0), axis=1))))
    max_deg = max((len(s) for s in nbr_clusters), default=0)

    # the identity transform is not a degeneration; otherwise read the quotient
    if abs(t) <= tol.tau_zero:
        kind = "none"
    elif max_deg == 0:
        kind = "points-merge"
    elif max_deg <= 2:
        kind = "curve-like"
    else:
        kind = "surface-like"
    return Degeneration(kind, n, int(n_clusters), max_deg, spread, float(t))
