"""Surface files (JSON), OBJ wireframes and analysis reports."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .config import Tolerances
from .curvature import Immersion, analyze_vertex
from .graph import GraphError, SurfaceGraph
from .principal import analysis_vertices, cpc_verdict, principal_report

FORMAT_VERSION = "1.0"


class SurfaceFileError(ValueError):
    """Schema violation in a surface file."""


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return x
    return obj


def to_document(imm: Immersion) -> dict:
    g = imm.graph
    vertices = []
    for v in g.vertices:
        row: dict[str, Any] = {"id": v, "position": [float(c) for c in imm.positions[v]]}
        if g.is_leaf(v):
            row["leaf"] = g.neighbors[v][0]
        else:
            row["neighbors"] = list(g.triple(v))
        if v in imm.prescribed_normals:
            row["normal"] = [float(c) for c in imm.prescribed_normals[v]]
        vertices.append(row)
    return {
        "format_version": FORMAT_VERSION,
        "metadata": _plain(dict(imm.metadata)),
        "root": g.root,
        "vertices": vertices,
    }


def dumps(imm: Immersion) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly
    return json.dumps(to_document(imm), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _vector(value: Any, what: str, vid: Any) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3:
        raise SurfaceFileError(f"vertex {vid}: {what} must be a list of 3 numbers")
    try:
        arr = np.array([float(c) for c in value])
    except (TypeError, ValueError):
        raise SurfaceFileError(f"vertex {vid}: {what} has non-numeric entries") from None
    if not np.all(np.isfinite(arr)):
        raise SurfaceFileError(f"vertex {vid}: {what} has non-finite entries")
    return arr


def from_document(doc: Any, tol: Tolerances | None = None) -> Immersion:
    if not isinstance(doc, dict):
        raise SurfaceFileError("top level must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SurfaceFileError(f"unsupported format_version {version!r}")
    rows = doc.get("vertices")
    if not isinstance(rows, list):
        raise SurfaceFileError("'vertices' must be a list")
    n = len(rows)
    neighbors: list[tuple[int, ...] | None] = [None] * n
    positions = np.zeros((n, 3))
    normals: dict[int, np.ndarray] = {}
    for k, row in enumerate(rows):
        if not isinstance(row, dict) or "id" not in row:
            raise SurfaceFileError(f"vertex entry {k} has no id")
        vid = row["id"]
        if not isinstance(vid, int) or isinstance(vid, bool) or not 0 <= vid < n:
            raise SurfaceFileError(f"vertex {vid!r}: id must be an integer in 0..{n - 1}")
        if neighbors[vid] is not None:
            raise SurfaceFileError(f"vertex {vid}: duplicate id")
        positions[vid] = _vector(row.get("position"), "position", vid)
        if ("leaf" in row) == ("neighbors" in row):
            raise SurfaceFileError(f"vertex {vid}: give exactly one of 'neighbors' (3 ids) or 'leaf' (1 id)")
        if "leaf" in row:
            nb = [row["leaf"]]
        else:
            nb = row["neighbors"]
            if not isinstance(nb, list) or len(nb) != 3:
                count = len(nb) if isinstance(nb, list) else "?"
                raise SurfaceFileError(f"vertex {vid}: non-leaf vertex must list 3 neighbors, got {count}")
        for u in nb:
            if not isinstance(u, int) or isinstance(u, bool) or not 0 <= u < n:
                raise SurfaceFileError(f"vertex {vid}: neighbor {u!r} is not an existing id")
        neighbors[vid] = tuple(nb)
        if "normal" in row:
            normals[vid] = _vector(row["normal"], "normal", vid)
    root = doc.get("root")
    try:
        graph = SurfaceGraph(tuple(neighbors), root=root)  # type: ignore[arg-type]
    except GraphError as exc:
        raise SurfaceFileError(str(exc)) from exc
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SurfaceFileError("'metadata' must be an object")
    kwargs = {} if tol is None else {"tol": tol}
    return Immersion(graph, positions, normals, metadata, **kwargs)


def write_surface(imm: Immersion, path: str | Path) -> None:
    Path(path).write_text(dumps(imm))


def read_surface(path: str | Path, tol: Tolerances | None = None) -> Immersion:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SurfaceFileError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_document(doc, tol)


def to_obj(imm: Immersion) -> str:
    lines = [f"# {len(imm.graph)} vertices, {len(imm.graph.edges())} edges"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in imm.positions.tolist()]
    lines += [f"l {a + 1} {b + 1}" for a, b in imm.graph.edges()]
    return "\n".join(lines) + "\n"


# -- analysis report ----------------------------------------------------------

TABLE_COLUMNS = ("k1-principal", "k2-principal", "alpha3", "beta3", "constant bond")


def bond_spread(imm: Immersion) -> float:
    lengths = imm.edge_lengths()
    return float((lengths.max() - lengths.min()) / lengths.mean())


def analyze(imm: Immersion, tol: Tolerances | None = None) -> dict:
    """Per-vertex rows, CPC verdicts and the condition matrix.

    Aggregates are computed from the rows flagged ``in_aggregate`` (the
    analysis vertex set).
    """
    tol = imm.tol if tol is None else tol
    chosen = set(analysis_vertices(imm))
    rows = []
    for x in imm.graph.non_leaves():
        row: dict[str, Any] = {"vertex": x, "in_aggregate": x in chosen}
        try:
            vc = analyze_vertex(imm, x)
            pr = principal_report(imm, x, tol)
        except ValueError as exc:
            row["error"] = str(exc)
            rows.append(row)
            continue
        row.update(
            H=vc.H,
            K=vc.K,
            k1=vc.k1,
            k2=vc.k2,
            normal=vc.n,
            alpha=vc.alpha,
            beta=vc.beta,
            k_along_v1=pr.k_along_v1,
            k_along_v2=pr.k_along_v2,
            residual1=pr.residual1,
            residual2=pr.residual2,
            principal1=pr.is_principal1,
            principal2=pr.is_principal2,
            c_vector=pr.c_vector,
            c_residual=pr.c_residual,
        )
        rows.append(row)
    agg = [r for r in rows if r["in_aggregate"]]
    failed = [r["vertex"] for r in agg if "error" in r]
    good = [r for r in agg if "error" not in r]
    alpha3 = max((abs(r["alpha"][2]) for r in good), default=0.0)
    beta3 = max((abs(r["beta"][2]) for r in good), default=0.0)
    spread = bond_spread(imm)
    table = {
        "k1-principal": bool(good) and not failed and all(r["principal1"] for r in good),
        "k2-principal": bool(good) and not failed and all(r["principal2"] for r in good),
        "alpha3": "0" if alpha3 < tol.tau_dir else "nonzero",
        "beta3": "0" if beta3 < tol.tau_dir else "nonzero",
        "constant bond": spread < tol.bond,
    }
    verdicts = []
    if good:
        for d in (1, 2):
            verdicts.append(cpc_verdict(imm, d, tol, [r["vertex"] for r in good]).as_dict())
    return _plain(
        {
            "model": imm.metadata.get("generator", imm.metadata.get("model")),
            "vertices": rows,
            "aggregate": {
                "vertices_checked": len(good),
                "failed_vertices": failed,
                "max_abs_alpha3": alpha3,
                "max_abs_beta3": beta3,
                "bond_spread": spread,
                "cpc": verdicts,
                "table": table,
            },
        }
    )


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


def format_table(reports: dict[str, dict]) -> str:
    """Fixed-width yes/no condition matrix, one row per named report."""
    width = max([len("model")] + [len(k) for k in reports]) + 2
    cols = [max(len(c), 7) + 2 for c in TABLE_COLUMNS]
    out = ["model".ljust(width) + "".join(c.ljust(w) for c, w in zip(TABLE_COLUMNS, cols))]
    for name, rep in reports.items():
        table = rep["aggregate"]["table"]
        out.append(name.ljust(width) + "".join(_cell(table[c]).ljust(w) for c, w in zip(TABLE_COLUMNS, cols)))
    return "\n".join(line.rstrip() for line in out) + "\n"
