"""Closed-form example surfaces.

All generators return an :class:`~cpcsurf.curvature.Immersion`.  Periodic
patterns are assembled from integer-indexed lattice sites; a site outside the
generated range that is still needed as a neighbour becomes a *leaf copy*
(one per requesting slot) carrying the analytic normal as a prescribed normal.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .curvature import Immersion
from .graph import SurfaceGraph

Site = Hashable


class GalleryError(ValueError):
    pass


def _assemble(
    sites: Sequence[Site],
    position: Callable[[Site], np.ndarray],
    triple: Callable[[Site], tuple[Site, Site, Site]],
    normal: Callable[[Site], np.ndarray] | None,
    metadata: dict,
) -> Immersion:
    index = {s: i for i, s in enumerate(sites)}
    if len(index) != len(sites):
        raise GalleryError("duplicate lattice sites")
    rows: list[tuple[int, ...]] = []
    pos = [np.asarray(position(s), dtype=float) for s in sites]
    leaf_rows: list[tuple[int]] = []
    prescribed = {}
    for s in sites:
        row = []
        for u in triple(s):
            if u in index:
                row.append(index[u])
            else:
                leaf = len(sites) + len(leaf_rows)
                leaf_rows.append((index[s],))
                pos.append(np.asarray(position(u), dtype=float))
                if normal is not None:
                    prescribed[leaf] = np.asarray(normal(u), dtype=float)
                row.append(leaf)
        rows.append(tuple(row))
    graph = SurfaceGraph(tuple(rows) + tuple(leaf_rows))
    sites_meta = [list(s) if isinstance(s, tuple) else s for s in sites]
    return Immersion(graph, np.array(pos), prescribed, {**metadata, "sites": sites_meta})


def _orient(triple: list[Site], position: Callable[[Site], np.ndarray], want: np.ndarray) -> tuple:
    """Swap the first two labels if ``(v1 x v2)`` points against ``want``."""
    p1, p2, p3 = (np.asarray(position(s)) for s in triple)
    if np.cross(p1 - p3, p2 - p3) @ want < 0:
        triple = [triple[1], triple[0], triple[2]]
    return tuple(triple)


# -- flat honeycomb ------------------------------------------------------------

def hexagonal_plane(bond: float = 1.0, depth: int = 3) -> Immersion:
    """Honeycomb patch in the plane z = 0, labelled so every normal is +z.

    Node sites are those within graph distance ``depth`` of the central site.
    """
    if bond <= 0:
        raise GalleryError("bond must be positive")
    if depth < 1:
        raise GalleryError("depth must be >= 1")
    a1 = bond * np.array([math.sqrt(3.0), 0.0, 0.0])
    a2 = bond * np.array([math.sqrt(3.0) / 2.0, 1.5, 0.0])
    up = np.array([0.0, bond, 0.0])

    def position(s: Site) -> np.ndarray:
        kind, i, j = s  # type: ignore[misc]
        p = i * a1 + j * a2
        return p + up if kind == "B" else p

    def triple(s: Site) -> tuple:
        kind, i, j = s  # type: ignore[misc]
        if kind == "A":
            return ("B", i, j), ("B", i, j - 1), ("B", i + 1, j - 1)
        return ("A", i, j), ("A", i, j + 1), ("A", i - 1, j + 1)

    start = ("A", 0, 0)
    seen = {start: 0}
    queue = deque([start])
    order = [start]
    while queue:
        s = queue.popleft()
        if seen[s] == depth:
            continue
        for u in triple(s):
            if u not in seen:
                seen[u] = seen[s] + 1
                order.append(u)
                queue.append(u)
    return _assemble(
        order,
        position,
        triple,
        lambda s: np.array([0.0, 0.0, 1.0]),
        {"generator": "hexplane", "bond": bond, "depth": depth, "orientation": "+z"},
    )


# -- chiral cylinder -------------------------------------------------------------

@dataclass(frozen=True)
class ChiralParams:
    r: float = 1.0
    theta: float = math.pi / 4
    h: float = 0.5
    rings: int = 3
    turns: int | None = None

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise GalleryError("r must be positive")
        if self.h == 0:
            raise GalleryError("h must be nonzero")
        if not 0 < self.theta < math.pi:
            raise GalleryError("theta must lie in (0, pi)")
        if self.rings < 1 or (self.turns is not None and self.turns < 1):
            raise GalleryError("rings and turns must be positive")

    @property
    def bond_squared(self) -> float:
        return 2.0 * self.r**2 * (1.0 - math.cos(self.theta)) + self.h**2

    @property
    def columns_to_close(self) -> int | None:
        m = math.pi / self.theta
        mi = round(m)
        return mi if abs(m - mi) < 1e-9 else None


def chiral_cell(r: float, theta: float, h: float) -> np.ndarray:
    """Root ``x0`` and its neighbours ``x1, x2, x3`` of the chiral cylinder (rows)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [r, 0.0, 0.0],
            [r * c, r * s, -h],
            [r * c, -r * s, h],
            [r * c, -r * s, -h],
        ]
    )


def chiral_cylinder(params: ChiralParams | None = None, **kwargs) -> Immersion:
    """Chiral-type hexagonal tube with k = -1/r along v1 and 0 along v2.

    Sites ``A(i, j)`` sit at angle ``2 theta i`` and height ``2 h j``; ``B(i, j)``
    at angle ``2 theta i + theta`` and height ``2 h j - h``.  The root cell is
    ``chiral_cell``; every other vertex is its image under a screw motion or a
    half-turn about a radial line, so all vertices see the same geometry.
    When ``pi / theta`` is an integer M the angular index is taken mod M and
    the tube closes up.  For ``h < 0`` the normal points inward and the
    curvature along ``v1`` is ``+1/r``.
    """
    p = params if params is not None else ChiralParams(**kwargs)
    r, th, h = p.r, p.theta, p.h
    close = p.columns_to_close
    closed = close is not None and (p.turns is None or p.turns >= close)
    cols = close if closed else (p.turns if p.turns is not None else 3)

    def wrap(i: int) -> int:
        return i % cols if closed else i

    def position(s: Site) -> np.ndarray:
        kind, i, j = s  # type: ignore[misc]
        if kind == "A":
            ang, z = 2 * th * i, 2 * h * j
        else:
            ang, z = 2 * th * i + th, 2 * h * j - h
        return np.array([r * math.cos(ang), r * math.sin(ang), z])

    def triple(s: Site) -> tuple:
        kind, i, j = s  # type: ignore[misc]
        if kind == "A":
            return ("B", i, j), ("B", wrap(i - 1), j + 1), ("B", wrap(i - 1), j)
        return ("A", i, j), ("A", wrap(i + 1), j - 1), ("A", wrap(i + 1), j)

    # the labels induce the outward normal for h > 0 and the inward one for h < 0
    side = 1.0 if h > 0 else -1.0

    def normal(s: Site) -> np.ndarray:
        q = position(s)
        return side * np.array([q[0], q[1], 0.0]) / r

    sites = [(k, i, j) for j in range(p.rings) for i in range(cols) for k in ("A", "B")]
    return _assemble(
        sites,
        position,
        triple,
        normal,
        {
            "generator": "chiral",
            "r": r,
            "theta": th,
            "h": h,
            "rings": p.rings,
            "columns": cols,
            "closed": closed,
            "bond_length": math.sqrt(p.bond_squared),
            "orientation": "outward" if h > 0 else "inward",
        },
    )


def screw_motion(theta: float, h: float) -> Callable[[np.ndarray], np.ndarray]:
    """Rotation by ``2 theta`` about the z axis composed with translation ``2 h``."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    shift = np.array([0.0, 0.0, 2 * h])
    return lambda pts: np.asarray(pts) @ rot.T + shift


# -- armchair cylinder -------------------------------------------------------------

def solve_armchair_steps(r: float, m: int, bond: float, tol: float = 1e-14, max_iter: int = 100) -> tuple[float, float, float]:
    """Angular steps ``(d1, d2)`` and axial step ``z`` giving equal bonds on the tube.

    ``d1`` is the angle spanned by a circumferential bond, ``d2 = pi/m - d1`` the
    angle spanned by an oblique bond of axial rise ``z``.  Two equations in
    ``(d1, z)`` are solved by damped Newton from the rolled flat-lattice guess.
    """
    period = math.pi / m

    def residual(u: np.ndarray) -> np.ndarray:
        d1, z = u
        d2 = period - d1
        return np.array(
            [
                2 * r * math.sin(d1 / 2) - bond,
                math.sqrt(4 * r * r * math.sin(d2 / 2) ** 2 + z * z) - bond,
            ]
        )

    def jacobian(u: np.ndarray) -> np.ndarray:
        d1, z = u
        d2 = period - d1
        chord = math.sqrt(4 * r * r * math.sin(d2 / 2) ** 2 + z * z)
        return np.array(
            [
                [r * math.cos(d1 / 2), 0.0],
                [-r * r * math.sin(d2) / chord, z / chord],
            ]
        )

    u = np.array([bond / r, bond * math.sqrt(3.0) / 2.0])
    f = residual(u)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol * bond:
            break
        step = np.linalg.solve(jacobian(u), -f)
        lam = 1.0
        while lam > 1e-6:
            cand = u + lam * step
            if 0 < cand[0] < period and cand[1] > 0:
                fc = residual(cand)
                if np.linalg.norm(fc) < np.linalg.norm(f):
                    break
            lam /= 2
        else:
            raise GalleryError(f"equal-bond system has no solution for m={m} (residual {np.linalg.norm(f):.3g})")
        u, f = cand, fc
    if np.max(np.abs(f)) >= 1e-10 * bond:
        raise GalleryError(f"equal-bond system did not converge for m={m} (residual {np.linalg.norm(f):.3g})")
    return float(u[0]), period - float(u[0]), float(u[1])


def armchair_cylinder(r: float = 1.0, m: int = 6, levels: int = 4, bond: float | None = None) -> Immersion:
    """Armchair hexagonal tube with all bonds of equal length.

    Per cell ``(i, j)`` there are four sites ``a, b`` (joined by a
    circumferential bond) at height ``2 z j`` and ``c, d`` at ``2 z j + z``.
    ``v1`` pairs the circumferential neighbour with an oblique one; ``v2``
    joins the two oblique neighbours and is parallel to the axis.
    """
    if m < 3:
        raise GalleryError("m must be >= 3")
    if levels < 1:
        raise GalleryError("levels must be >= 1")
    d = bond if bond is not None else 2 * math.pi * r / (3 * m)
    d1, d2, z = solve_armchair_steps(r, m, d)
    period = 2 * (d1 + d2)
    offset = {"a": (0.0, 0.0), "b": (d1, 0.0), "c": (d1 + d2, z), "d": (2 * d1 + d2, z)}

    def position(s: Site) -> np.ndarray:
        k, i, j = s  # type: ignore[misc]
        ang = period * i + offset[k][0]
        return np.array([r * math.cos(ang), r * math.sin(ang), 2 * z * j + offset[k][1]])

    def triple(s: Site) -> tuple:
        k, i, j = s  # type: ignore[misc]
        if k == "a":
            return ("b", i, j), ("d", (i - 1) % m, j), ("d", (i - 1) % m, j - 1)
        if k == "b":
            return ("a", i, j), ("c", i, j - 1), ("c", i, j)
        if k == "c":
            return ("d", i, j), ("b", i, j + 1), ("b", i, j)
        return ("c", i, j), ("a", (i + 1) % m, j), ("a", (i + 1) % m, j + 1)

    def normal(s: Site) -> np.ndarray:
        # geometric normal of a site; all sites of one letter share it up to rotation
        trip = triple(s)
        p1, p2, p3 = (position(u) for u in trip)
        c = np.cross(p1 - p3, p2 - p3)
        return c / np.linalg.norm(c)

    sites = [(k, i, j) for j in range(levels) for i in range(m) for k in "abcd"]
    return _assemble(
        sites,
        position,
        triple,
        normal,
        {
            "generator": "armchair",
            "r": r,
            "m": m,
            "levels": levels,
            "bond_length": d,
            "steps": {"circumferential_angle": d1, "oblique_angle": d2, "axial": z},
            "orientation": "outward",
        },
    )


# -- CPC torus ------------------------------------------------------------------

@dataclass(frozen=True)
class TorusParams:
    r1: float = 1.0
    r2: float = 3.0
    N: int = 4

    def __post_init__(self) -> None:
        if not self.r2 > self.r1 > 0:
            raise GalleryError("need r2 > r1 > 0")
        if self.N < 2:
            raise GalleryError("N must be >= 2 for the tiling to close")


def torus_point(r1: float, r2: float, u: float, v: float) -> np.ndarray:
    return np.array(
        [(r1 * math.cos(u) + r2) * math.cos(v), (r1 * math.cos(u) + r2) * math.sin(v), r1 * math.sin(u)]
    )


def torus_normal(u: float, v: float) -> np.ndarray:
    return np.array([math.cos(u) * math.cos(v), math.cos(u) * math.sin(v), math.sin(u)])


def closing_angles(p1: float, p2: float, q1: float, q2: float) -> tuple[float, float]:
    """Angles ``(p0, q0)`` at which the node normal equals the torus normal."""
    q0 = (q1 + q2) / 2.0
    p0 = math.atan(math.tan((p1 + p2) / 2.0) * math.cos((q1 - q2) / 2.0))
    return p0, q0


def cpc_torus(params: TorusParams | None = None, **kwargs) -> Immersion:
    """Closed trivalent torus on which every node has k = 1/r1 along v1.

    Rows: outer equator ``O_j`` (u = 0), inner equator ``I_j`` (u = pi), both at
    ``v = j pi / N``; top nodes ``T_s`` (u = pi/2) and bottom nodes ``B_s``
    (u = -pi/2) at ``v = (s + 1/2) pi / N``, for ``j, s`` in ``Z_{2N}``.

    ``T_s`` has neighbours ``(I_{s+1}, O_s, O_{s+1})`` and ``B_s`` has
    ``(O_{s+1}, I_s, I_{s+1})``: two neighbours on one equator row, the third
    on the other row straight across the tube from the shared one.  Node
    normals are the outward torus normal; equator vertices are labelled so
    their normal points into the tube, which is what gives ``+1/r1``.
    """
    p = params if params is not None else TorusParams(**kwargs)
    r1, r2, N = p.r1, p.r2, p.N
    M = 2 * N
    row_u = {"O": 0.0, "I": math.pi, "T": math.pi / 2, "B": -math.pi / 2}

    def angle(s: Site) -> float:
        k, i = s  # type: ignore[misc]
        return (i + 0.5) * math.pi / N if k in "TB" else i * math.pi / N

    def position(s: Site) -> np.ndarray:
        return torus_point(r1, r2, row_u[s[0]], angle(s))  # type: ignore[index]

    trip: dict = {}
    for s in range(M):
        trip[("T", s)] = (("I", (s + 1) % M), ("O", s), ("O", (s + 1) % M))
        trip[("B", s)] = (("O", (s + 1) % M), ("I", s), ("I", (s + 1) % M))
    for j in range(M):
        eq = torus_normal(0.0, j * math.pi / N)
        trip[("O", j)] = _orient(
            [("T", (j - 1) % M), ("T", j), ("B", (j - 1) % M)], position, -eq
        )
        trip[("I", j)] = _orient(
            [("T", (j - 1) % M), ("B", (j - 1) % M), ("B", j)], position, eq
        )

    sites = (
        [("T", s) for s in range(M)]
        + [("B", s) for s in range(M)]
        + [("O", j) for j in range(M)]
        + [("I", j) for j in range(M)]
    )
    imm = _assemble(
        sites,
        position,
        lambda s: trip[s],
        None,
        {
            "generator": "torus",
            "r1": r1,
            "r2": r2,
            "N": N,
            "analysis_vertices": list(range(2 * M)),
            "node_angles": [[row_u[s[0]], angle(s)] for s in sites[: 2 * M]],
            "orientation": "nodes: outward torus normal; equator rows: into the tube",
        },
    )
    lengths = imm.edge_lengths()
    return Immersion(
        imm.graph,
        imm.positions,
        {},
        {**imm.metadata, "bond_lengths": sorted({round(float(x), 12) for x in lengths})},
    )


# -- truncated icosahedron ---------------------------------------------------------

def truncated_icosahedron_coordinates() -> np.ndarray:
    """The 60 vertices (edge length 2): cyclic permutations of
    ``(0, +-1, +-3g)``, ``(+-1, +-(2+g), +-2g)``, ``(+-g, +-2, +-(2g+1))``."""
    g = (1 + math.sqrt(5)) / 2
    bases = [(0.0, 1.0, 3 * g), (1.0, 2 + g, 2 * g), (g, 2.0, 2 * g + 1)]
    pts = set()
    for b in bases:
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    v = (sx * b[0], sy * b[1], sz * b[2])
                    for k in range(3):
                        pts.add(tuple(round(c, 12) + 0.0 for c in v[k:] + v[:k]))
    return np.array(sorted(pts))


def truncated_icosahedron(rho: float = 1.0) -> Immersion:
    """Truncated icosahedron with circumradius ``rho``; ``p(x) = rho n(x)`` everywhere."""
    if rho <= 0:
        raise GalleryError("rho must be positive")
    raw = truncated_icosahedron_coordinates()
    pts = raw * (rho / np.linalg.norm(raw[0]))
    edge = 2.0 * rho / np.linalg.norm(raw[0])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    rows = []
    for v in range(len(pts)):
        nb = [int(u) for u in np.flatnonzero(np.abs(dist[v] - edge) < 1e-9 * edge)]
        if len(nb) != 3:
            raise GalleryError("truncated icosahedron edge detection failed")
        out = pts[v] / rho
        e1 = pts[nb[0]] - pts[v]
        e1 -= (e1 @ out) * out
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(out, e1)
        nb.sort(key=lambda u: math.atan2((pts[u] - pts[v]) @ e2, (pts[u] - pts[v]) @ e1) % (2 * math.pi))
        rows.append(tuple(nb))
    return Immersion(
        SurfaceGraph(tuple(rows)),
        pts,
        {},
        {"generator": "trunc-icosa", "rho": rho, "edge_length": edge, "orientation": "outward"},
    )


def fit_proportionality(imm: Immersion, normals: Iterable[np.ndarray]) -> float:
    """Least-squares ``rho`` in ``p(x) = rho n(x)``."""
    n = np.array(list(normals))
    return float(np.sum(imm.positions * n) / np.sum(n * n))
