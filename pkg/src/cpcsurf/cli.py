"""Command-line driver: ``cpcsurf <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import gallery
from .constructor import BuildError, BuildParams, build, chiral_seed, max_bond_deviation, propagated_vs_geometric
from .curvature import Immersion, ImmersionError, unit_normal
from .graph import GraphError
from .io import SurfaceFileError, analyze, dumps, format_table, read_surface, to_obj
from .principal import analysis_vertices, classify_degeneration, parallel_transform, principal_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
MODELS = ("hexplane", "chiral", "armchair", "torus", "trunc-icosa")
VERIFY_MODELS = MODELS + ("build",)


class UsageError(Exception):
    pass


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- generate -----------------------------------------------------------------

def generate_model(name: str, args: argparse.Namespace | None = None) -> Immersion:
    a = vars(args) if args is not None else {}

    def get(key: str, default: Any) -> Any:
        value = a.get(key)
        return default if value is None else value

    if name == "hexplane":
        return gallery.hexagonal_plane(bond=get("bond", 1.0), depth=get("depth", 3))
    if name == "chiral":
        return gallery.chiral_cylinder(
            gallery.ChiralParams(
                r=get("r", 1.0), theta=get("theta", math.pi / 4), h=get("h", 0.5),
                rings=get("rings", 3), turns=a.get("turns"),
            )
        )
    if name == "armchair":
        return gallery.armchair_cylinder(r=get("r", 1.0), m=get("m", 6), levels=get("levels", 4), bond=a.get("bond"))
    if name == "torus":
        return gallery.cpc_torus(gallery.TorusParams(r1=get("r1", 1.0), r2=get("r2", 3.0), N=get("N", 4)))
    if name == "trunc-icosa":
        return gallery.truncated_icosahedron(rho=get("rho", 1.0))
    raise UsageError(f"unknown model {name!r}")


def _cmd_generate(args: argparse.Namespace) -> int:
    _emit(dumps(generate_model(args.model, args)), args.output)
    return EXIT_OK


# -- build --------------------------------------------------------------------

def _build_params(args: argparse.Namespace) -> BuildParams:
    data: dict[str, Any] = {}
    if args.chiral_seed is not None:
        data = chiral_seed(*args.chiral_seed).as_dict()
    if args.config is not None:
        data.update(json.loads(Path(args.config).read_text()))
    for key in ("r", "k1", "k2", "theta1", "phi1", "theta2", "phi2", "depth"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    return BuildParams.from_dict(data)


def _cmd_build(args: argparse.Namespace) -> int:
    params = _build_params(args)
    imm, log = build(params)
    if args.log:
        Path(args.log).write_text(log.to_json() + "\n")
    _emit(dumps(imm), args.output)
    return EXIT_OK


# -- analysis commands --------------------------------------------------------

def _cmd_analyze(args: argparse.Namespace) -> int:
    imm = read_surface(args.input)
    report = analyze(imm)
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    name = str(report.get("model") or Path(args.input).stem)
    sys.stdout.write(format_table({name: report}))
    return EXIT_OK


def _cmd_transform(args: argparse.Namespace) -> int:
    imm = read_surface(args.input)
    _emit(dumps(parallel_transform(imm, args.t)), args.output)
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    imm = read_surface(args.input)
    d = classify_degeneration(imm, args.t)
    _emit(json.dumps(d.__dict__, sort_keys=True) + "\n", args.output)
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    imm = read_surface(args.input)
    _emit(dumps(imm) if args.format == "json" else to_obj(imm), args.output)
    return EXIT_OK


# -- verify -------------------------------------------------------------------

Check = tuple[str, Any, Any, bool]


def _close(name: str, expected: float, actual: float, tol: float) -> Check:
    return name, expected, actual, bool(abs(actual - expected) <= tol)


def _direction_checks(imm: Immersion, k1: float | None, k2: float | None, tol: float = 1e-9) -> list[Check]:
    verts = analysis_vertices(imm)
    reps = [principal_report(imm, x) for x in verts]
    out: list[Check] = [
        ("principal along v1", True, all(r.is_principal1 for r in reps), all(r.is_principal1 for r in reps)),
        ("principal along v2", True, all(r.is_principal2 for r in reps), all(r.is_principal2 for r in reps)),
    ]
    for label, target, vals in (("k_along_v1", k1, [r.k_along_v1 for r in reps]), ("k_along_v2", k2, [r.k_along_v2 for r in reps])):
        if target is not None:
            worst = max(vals, key=lambda v: abs(v - target))
            out.append(_close(f"{label} (worst vertex)", target, worst, tol))
    return out


def _table_checks(imm: Immersion, expected: dict[str, Any]) -> list[Check]:
    table = analyze(imm)["aggregate"]["table"]
    return [(f"table: {k}", v, table[k], table[k] == v) for k, v in expected.items()]


def verify_checks(model: str, imm: Immersion) -> list[Check]:
    m = imm.metadata
    if model == "hexplane":
        return _direction_checks(imm, 0.0, 0.0, 1e-12)
    if model == "chiral":
        r = float(m.get("r", 1.0))
        checks = _direction_checks(imm, -1.0 / r, 0.0)
        return checks + _table_checks(imm, {"alpha3": "0", "beta3": "0", "constant bond": True})
    if model == "armchair":
        return _table_checks(
            imm,
            {"k1-principal": False, "k2-principal": True, "alpha3": "nonzero", "beta3": "0", "constant bond": True},
        )
    if model == "torus":
        return _direction_checks(imm, 1.0 / float(m.get("r1", 1.0)), None)
    if model == "trunc-icosa":
        normals = [unit_normal(imm, v) for v in imm.graph.vertices]
        rho = gallery.fit_proportionality(imm, normals)
        fit = float(np.max(np.linalg.norm(imm.positions - rho * np.array(normals), axis=1)))
        return _direction_checks(imm, -1.0 / rho, -1.0 / rho) + [_close("max |p - rho n|", 0.0, fit, 1e-9)]
    if model == "build":
        params = m.get("build_params")
        if not params:
            raise SurfaceFileError("built surface lacks build_params metadata")
        r = float(params["r"])
        return _direction_checks(imm, float(params["k1"]), float(params["k2"]), 1e-8) + [
            _close("max relative bond deviation", 0.0, max_bond_deviation(imm, r), 1e-8),
            _close("propagated vs geometric normal", 0.0, propagated_vs_geometric(imm), 1e-9),
        ]
    raise UsageError(f"unknown model {model!r}")


def _cmd_verify(args: argparse.Namespace) -> int:
    if args.input:
        imm = read_surface(args.input)
        model = args.model or imm.metadata.get("generator") or imm.metadata.get("model")
        if model is None:
            raise UsageError("cannot infer the model; pass --model")
    else:
        if args.model is None:
            raise UsageError("verify needs --model or an input file")
        model = args.model
        imm = build(BuildParams(theta2=0.3, phi2=0.4))[0] if model == "build" else generate_model(model)
    if model not in VERIFY_MODELS:
        raise UsageError(f"unknown model {model!r}")
    checks = verify_checks(model, imm)
    failed = [c for c in checks if not c[3]]
    for name, expected, actual, ok in checks:
        status = "ok  " if ok else "FAIL"
        print(f"{status} {name}: expected {expected!r}, got {actual!r}")
    print(f"{model}: {'PASS' if not failed else 'FAIL'} ({len(checks) - len(failed)}/{len(checks)} checks)")
    return EXIT_FAIL if failed else EXIT_OK


# -- parser -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cpcsurf", description="Discrete surfaces on trivalent graphs: curvature and CPC tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a gallery surface as JSON")
    gsub = gen.add_subparsers(dest="model", required=True, parser_class=_Parser)
    specs: dict[str, list[tuple[str, Callable]]] = {
        "hexplane": [("bond", float), ("depth", int)],
        "chiral": [("r", float), ("theta", float), ("h", float), ("rings", int), ("turns", int)],
        "armchair": [("r", float), ("m", int), ("levels", int), ("bond", float)],
        "torus": [("r1", float), ("r2", float), ("N", int)],
        "trunc-icosa": [("rho", float)],
    }
    for name, flags in specs.items():
        g = gsub.add_parser(name)
        for flag, typ in flags:
            g.add_argument(f"--{flag}", type=typ)
        g.add_argument("-o", "--output")
        g.set_defaults(func=_cmd_generate)

    b = sub.add_parser("build", help="run the step-by-step constructor")
    b.add_argument("--config", help="JSON file with build parameters")
    b.add_argument("--chiral-seed", nargs=3, type=float, metavar=("R", "THETA", "H"))
    for flag, typ in (("r", float), ("k1", float), ("k2", float), ("theta1", float), ("phi1", float),
                      ("theta2", float), ("phi2", float), ("depth", int)):
        b.add_argument(f"--{flag}", type=typ)
    b.add_argument("--log", help="write the build log (JSON) here")
    b.add_argument("-o", "--output")
    b.set_defaults(func=_cmd_build)

    an = sub.add_parser("analyze", help="curvature report and condition table")
    an.add_argument("input")
    an.add_argument("-o", "--output", help="write the JSON report here")
    an.set_defaults(func=_cmd_analyze)

    for name, func, helptext in (
        ("transform", _cmd_transform, "parallel transform by t"),
        ("classify", _cmd_classify, "classify the degeneration at t"),
    ):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("input")
        c.add_argument("--t", type=float, required=True)
        c.add_argument("-o", "--output")
        c.set_defaults(func=func)

    v = sub.add_parser("verify", help="check a model's expected verdicts")
    v.add_argument("input", nargs="?")
    v.add_argument("--model", choices=VERIFY_MODELS)
    v.set_defaults(func=_cmd_verify)

    e = sub.add_parser("export", help="re-emit a surface as JSON or OBJ")
    e.add_argument("input")
    e.add_argument("--format", choices=("json", "obj"), default="json")
    e.add_argument("-o", "--output")
    e.set_defaults(func=_cmd_export)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"cpcsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SurfaceFileError, ImmersionError, GraphError, BuildError, gallery.GalleryError) as exc:
        print(f"cpcsurf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"cpcsurf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
