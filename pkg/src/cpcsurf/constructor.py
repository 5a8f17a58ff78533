"""Step-by-step construction of a surface with prescribed k1, k2 and bond length r.

Every vertex ``c`` is placed together with a unit normal ``n_c``.  Its
unknown neighbours lie on the circle

    C = {X : <X - p_parent, n_c> = 0, |X - p_c| = r},

and the curvature condition attached to a neighbour ``X`` with base point
``b`` (the neighbour in slot 3 of ``c``) reads

    g(X) = 2 <X - b, n_b> - k |X - b|^2 = 0,

i.e. ``X`` lies on the sphere through ``b`` centred at ``b + n_b / k`` (a plane
when ``k = 0``).  The normal at ``X`` then follows from ``n(X) = n_b - k (X - b)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .config import DEFAULT, Tolerances
from .curvature import Immersion
from .graph import SurfaceGraph

Curvature = Union[float, Callable[[int], float]]

N_SCAN = 4096
_FLAT_OFFSET = 2.0 * np.pi / 3.0


class BuildError(ValueError):
    """A construction step failed; ``vertex`` is the frontier vertex, ``partial`` the state so far."""

    def __init__(self, message: str, vertex: int | None = None, partial: "PartialBuild | None" = None):
        super().__init__(message)
        self.vertex = vertex
        self.partial = partial


@dataclass(frozen=True)
class BuildParams:
    r: float = 1.0
    k1: Curvature = -1.0
    k2: Curvature = 0.0
    theta1: float = 0.0
    phi1: float = 0.0
    theta2: float = 0.0
    phi2: float = 0.0
    depth: int = 3
    branch_policy: tuple[int, ...] = (3, 1, 2)

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise ValueError("bond length r must be positive")
        if int(self.depth) < 1:
            raise ValueError("depth must be at least 1")
        policy = tuple(int(s) for s in self.branch_policy)
        if not policy or any(s not in (1, 2, 3) for s in policy) or len(set(policy)) != len(policy):
            raise ValueError(f"branch_policy must list distinct slots from 1..3, got {policy}")
        object.__setattr__(self, "branch_policy", policy)
        object.__setattr__(self, "depth", int(self.depth))

    def k(self, i: int, vertex: int) -> float:
        value = self.k1 if i == 1 else self.k2
        return float(value(vertex)) if callable(value) else float(value)

    @classmethod
    def from_dict(cls, data: dict) -> "BuildParams":
        known = {"r", "k1", "k2", "theta1", "phi1", "theta2", "phi2", "depth", "branch_policy"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown build parameters: {sorted(extra)}")
        kw = dict(data)
        if "branch_policy" in kw:
            kw["branch_policy"] = tuple(kw["branch_policy"])
        return cls(**kw)

    def as_dict(self) -> dict:
        if callable(self.k1) or callable(self.k2):
            raise ValueError("curvature functions cannot be serialized")
        return {
            "r": self.r,
            "k1": self.k1,
            "k2": self.k2,
            "theta1": self.theta1,
            "phi1": self.phi1,
            "theta2": self.theta2,
            "phi2": self.phi2,
            "depth": self.depth,
            "branch_policy": list(self.branch_policy),
        }


@dataclass
class FrontierEntry:
    vertex: int
    parent: int | None
    level: int


@dataclass
class PartialBuild:
    """Positions and normals placed so far (unplaced rows are NaN)."""

    neighbors: list[list[int]]
    positions: np.ndarray
    normals: np.ndarray

    @property
    def placed(self) -> np.ndarray:
        return np.all(np.isfinite(self.positions), axis=1)


@dataclass
class BuildLog:
    params: dict | None
    decisions: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"params": self.params, "decisions": self.decisions}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def spherical(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)])


def seed_frame(params: BuildParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(p(x0), p(x3), n(x0), n(x3))`` with ``x0`` at the origin and ``x3`` on the z-axis."""
    p0 = np.zeros(3)
    p3 = np.array([0.0, 0.0, params.r])
    return p0, p3, spherical(params.theta1, params.phi1), spherical(params.theta2, params.phi2)


@dataclass(frozen=True)
class Circle:
    center: np.ndarray
    radius: float
    e1: np.ndarray
    e2: np.ndarray

    def point(self, s: float | np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.center + self.radius * (
            np.multiply.outer(np.cos(s), self.e1) + np.multiply.outer(np.sin(s), self.e2)
        )

    def angle(self, x: np.ndarray) -> float:
        d = x - self.center
        return float(np.arctan2(d @ self.e2, d @ self.e1)) % (2.0 * np.pi)


def neighbor_circle(p_c: np.ndarray, n_c: np.ndarray, p_parent: np.ndarray, r: float, tol: Tolerances = DEFAULT) -> Circle:
    """Plane through ``p_parent`` normal to ``n_c``, cut with the sphere of radius ``r`` about ``p_c``."""
    offset = float((p_c - p_parent) @ n_c)
    rho2 = r * r - offset * offset
    if rho2 <= (tol.tau_merge * r) ** 2:
        raise BuildError(
            f"plane/sphere intersection is empty or a point (plane at distance {abs(offset):.6g}, r = {r:.6g})"
        )
    center = p_c - offset * n_c
    e1 = p_parent - center
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n_c, e1)
    return Circle(center, float(np.sqrt(rho2)), e1, e2)


@dataclass(frozen=True)
class RootSet:
    angles: tuple[float, ...]
    underdetermined: bool


def curvature_roots(
    circle: Circle, base: np.ndarray, n_base: np.ndarray, k: float, r: float, tol: Tolerances = DEFAULT
) -> RootSet:
    """Circle angles where ``g`` vanishes, excluding the base point itself."""
    s = np.linspace(0.0, 2.0 * np.pi, N_SCAN, endpoint=False)

    def g(angle):
        d = circle.point(angle) - base
        return 2.0 * (d @ n_base) - k * np.einsum("...i,...i->...", d, d)

    vals = g(s)
    if np.max(np.abs(vals)) <= tol.tau_zero * max(1.0, r * r) * (1.0 + abs(k) * r):
        return RootSet((), True)
    roots = []
    for j in range(N_SCAN):
        a, b = s[j], s[j] + 2.0 * np.pi / N_SCAN
        ga, gb = vals[j], vals[(j + 1) % N_SCAN]
        if ga == 0.0:
            roots.append(a)
            continue
        if ga * gb > 0.0 or gb == 0.0:
            continue
        while b - a > tol.tau_solve:
            mid = 0.5 * (a + b)
            gm = g(mid)
            if gm == 0.0:
                a = b = mid
                break
            if (gm > 0.0) == (ga > 0.0):
                a, ga = mid, gm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    keep = []
    for angle in roots:
        if np.linalg.norm(circle.point(angle) - base) <= tol.tau_merge * r:
            continue
        angle = float(angle) % (2.0 * np.pi)
        if not any(abs(angle - q) <= 1e3 * tol.tau_solve for q in keep):
            keep.append(angle)
    return RootSet(tuple(sorted(keep)), False)


def propagate_normal(n_base: np.ndarray, k: float, x: np.ndarray, base: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``n(x) = n(base) - k (x - base)``; unit by construction, asserted."""
    n = n_base - k * (x - base)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12 * max(1.0, abs(k) * np.linalg.norm(x - base)):
        raise BuildError(f"propagated normal has norm {np.linalg.norm(n):.15g}")
    return n


def propagate_normals(
    p3: np.ndarray, n3: np.ndarray, p1: np.ndarray, p2: np.ndarray, k1: float, k2: float, tol: Tolerances = DEFAULT
) -> tuple[np.ndarray, np.ndarray]:
    """Normals at ``x1``, ``x2`` of a cell with ``v_i = p_i - p3``."""
    return propagate_normal(n3, k1, p1, p3, tol), propagate_normal(n3, k2, p2, p3, tol)


@dataclass(frozen=True)
class CellSolution:
    slot: int
    positions: tuple[np.ndarray, np.ndarray]  # the two new neighbours, in slot order
    normals: tuple[np.ndarray, np.ndarray]
    triple_slots: tuple[int, int]  # slots (1..3) the new neighbours occupy
    multiplicity: tuple[int, int]
    underdetermined: tuple[bool, bool]


def _pick(circle: Circle, roots: RootSet, avoid: float, sign: int) -> tuple[float, int]:
    if roots.underdetermined:
        return (avoid + sign * _FLAT_OFFSET) % (2.0 * np.pi), 0
    if not roots.angles:
        raise BuildError("curvature equation has no real root on the neighbour circle")
    return roots.angles[0], len(roots.angles)


def _orientation(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray, n_c: np.ndarray) -> float:
    return float(np.cross(p1 - p3, p2 - p3) @ n_c)


def solve_adjacent(
    p_c: np.ndarray,
    n_c: np.ndarray,
    p_parent: np.ndarray,
    n_parent: np.ndarray,
    k1: float,
    k2: float,
    r: float,
    slot: int = 3,
    tol: Tolerances = DEFAULT,
) -> CellSolution:
    """Place the two missing neighbours of ``c`` given the parent in ``slot``.

    Slot 3 is the direct case: both new neighbours use the parent as base.
    With the parent in slot 1 (resp. 2) the new slot-3 neighbour ``b`` is
    found first from the k1 (resp. k2) condition with base at the parent,
    and the remaining neighbour then uses ``b`` as base.
    """
    circle = neighbor_circle(p_c, n_c, p_parent, r, tol)
    s_parent = 0.0
    if slot == 3:
        ra = curvature_roots(circle, p_parent, n_parent, k1, r, tol)
        rb = curvature_roots(circle, p_parent, n_parent, k2, r, tol)
        sa, ma = _pick(circle, ra, s_parent, +1)
        sb, mb = _pick(circle, rb, s_parent, -1)
        x1, x2 = circle.point(sa), circle.point(sb)
        if ra.underdetermined and rb.underdetermined and _orientation(x1, x2, p_parent, n_c) < 0:
            x1, x2 = x2, x1
        if np.linalg.norm(x1 - x2) <= tol.tau_merge * r:
            raise BuildError("the two new neighbours coincide")
        n1, n2 = propagate_normals(p_parent, n_parent, x1, x2, k1, k2, tol)
        return CellSolution(3, (x1, x2), (n1, n2), (1, 2), (ma, mb), (ra.underdetermined, rb.underdetermined))
    if slot not in (1, 2):
        raise ValueError("slot must be 1, 2 or 3")
    k_first, k_second = (k1, k2) if slot == 1 else (k2, k1)
    rb = curvature_roots(circle, p_parent, n_parent, k_first, r, tol)
    sb, mb = _pick(circle, rb, s_parent, -1 if slot == 1 else +1)
    b = circle.point(sb)
    n_b = propagate_normal(n_parent, k_first, b, p_parent, tol)
    # n(parent) = n(b) - k (parent - b) holds by symmetry of the relation
    ro = curvature_roots(circle, b, n_b, k_second, r, tol)
    so, mo = _pick(circle, ro, sb, -1 if slot == 1 else +1)
    if ro.underdetermined:
        # the third point of the flat cell: opposite the other two
        so = (s_parent + (-1 if slot == 1 else +1) * 2.0 * _FLAT_OFFSET) % (2.0 * np.pi)
    other = circle.point(so)
    if np.linalg.norm(other - b) <= tol.tau_merge * r or np.linalg.norm(other - p_parent) <= tol.tau_merge * r:
        raise BuildError("the two new neighbours coincide")
    n_other = propagate_normal(n_b, k_second, other, b, tol)
    other_slot = 2 if slot == 1 else 1
    return CellSolution(
        slot,
        (other, b),
        (n_other, n_b),
        (other_slot, 3),
        (mo, mb),
        (ro.underdetermined, rb.underdetermined),
    )


def _cell_orientation(sol: CellSolution, p_parent: np.ndarray, n_c: np.ndarray) -> float:
    pts = {sol.slot: p_parent}
    for s, x in zip(sol.triple_slots, sol.positions):
        pts[s] = x
    return _orientation(pts[1], pts[2], pts[3], n_c)


def build(params: BuildParams, tol: Tolerances = DEFAULT) -> tuple[Immersion, BuildLog]:
    """Breadth-first construction to ``params.depth``.

    Leaves carry their propagated normals as prescribed normals.  Each
    non-root vertex tries the parent slots of ``branch_policy`` in order and
    keeps the first cell with positive orientation ``<v1 x v2, n> > 0``.
    """
    try:
        log_params = params.as_dict()
    except ValueError:
        log_params = None
    log = BuildLog(log_params)
    p0, p3, n0, n3 = seed_frame(params)

    rows: list[list[int]] = [[0, 0, 0]]
    pos: list[np.ndarray] = [p0]
    nrm: list[np.ndarray] = [n0]

    def partial() -> PartialBuild:
        return PartialBuild([list(r) for r in rows], np.array(pos), np.array(nrm))

    def add(p, n, parent) -> int:
        rows.append([parent])
        pos.append(p)
        nrm.append(n)
        return len(rows) - 1

    def place_cell(c: int, parent: int) -> list[int]:
        kc1, kc2 = params.k(1, c), params.k(2, c)
        sol, errors = None, []
        for slot in params.branch_policy:
            try:
                cand = solve_adjacent(pos[c], nrm[c], pos[parent], nrm[parent], kc1, kc2, params.r, slot, tol)
            except BuildError as exc:
                errors.append(f"slot {slot}: {exc}")
                continue
            if _cell_orientation(cand, pos[parent], nrm[c]) > 0:
                sol = cand
                break
            errors.append(f"slot {slot}: negative orientation")
        if sol is None:
            raise BuildError(f"vertex {c}: no admissible cell ({'; '.join(errors)})", c, partial())
        triple = [0, 0, 0]
        triple[sol.slot - 1] = parent
        kids = []
        for s, x, n in zip(sol.triple_slots, sol.positions, sol.normals):
            child = add(x, n, c)
            triple[s - 1] = child
            kids.append(child)
        rows[c] = triple
        log.decisions.append(_decision(c, None if c == 0 else parent, sol))
        return sorted(kids)

    # the root treats its seeded neighbour like a parent
    seeded = add(p3, n3, 0)
    first = place_cell(0, seeded)
    queue = deque(FrontierEntry(c, 0, 1) for c in sorted(first + [seeded]))
    while queue:
        item = queue.popleft()
        if item.level < params.depth:
            kids = place_cell(item.vertex, item.parent)
            queue.extend(FrontierEntry(k, item.vertex, item.level + 1) for k in kids)

    graph = SurfaceGraph(tuple(tuple(r) for r in rows), root=0)
    leaves = {v: nrm[v] for v in graph.vertices if graph.is_leaf(v)}
    imm = Immersion(
        graph,
        np.array(pos),
        leaves,
        {"model": "build", "build_params": log_params, "propagated_normals": np.array(nrm).tolist()},
        tol,
    )
    return imm, log


def _decision(vertex: int, parent: int | None, sol: CellSolution) -> dict:
    return {
        "vertex": vertex,
        "parent": parent,
        "parent_slot": sol.slot,
        "new_slots": list(sol.triple_slots),
        "multiplicity": list(sol.multiplicity),
        "underdetermined": list(sol.underdetermined),
    }


def chiral_seed(r_cyl: float, theta: float, h: float) -> BuildParams:
    """Seed angles reproducing the chiral cylinder cell up to a rigid motion.

    Uses the gallery cell ``x0 = (r, 0, 0)``, ``x3 = (r cos t, -r sin t, -h)``
    with outward normals, expressed in a frame with ``x3 - x0`` along z and
    ``n(x0)`` in the xz-plane.
    """
    from .gallery import chiral_cell

    cell = chiral_cell(r_cyl, theta, h)
    x0, x3 = cell[0], cell[3]
    n0 = np.array([x0[0], x0[1], 0.0]) / r_cyl
    n3 = np.array([x3[0], x3[1], 0.0]) / r_cyl
    ez = x3 - x0
    d = float(np.linalg.norm(ez))
    ez = ez / d
    ex = n0 - (n0 @ ez) * ez
    ex = ex / np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    return BuildParams(
        r=d,
        k1=-1.0 / r_cyl,
        k2=0.0,
        theta1=float(np.arcsin(np.clip(n0 @ ez, -1.0, 1.0))),
        phi1=0.0,
        theta2=float(np.arcsin(np.clip(n3 @ ez, -1.0, 1.0))),
        phi2=float(np.arctan2(n3 @ ey, n3 @ ex)),
    )


def max_bond_deviation(imm: Immersion, r: float) -> float:
    return float(np.max(np.abs(imm.edge_lengths() - r)) / r)


def propagated_vs_geometric(imm: Immersion, vertices: Sequence[int] | None = None) -> float:
    """Largest ``|n_geometric - n_propagated|`` over the given (default: interior) vertices."""
    from .curvature import unit_normal

    prop = np.asarray(imm.metadata["propagated_normals"])
    verts = imm.interior_vertices() if vertices is None else vertices
    return max((float(np.linalg.norm(unit_normal(imm, v) - prop[v])) for v in verts), default=0.0)
