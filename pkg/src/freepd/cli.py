"""Command line surface tying the library to files.

One binary, seven subcommands: ``check`` validates a stored function,
``random`` emits one, ``extend`` pushes a function out to a larger ball,
``energy`` prints relative energies, ``solve`` runs the configuration
driver, ``surgery`` rewires a labeled graph, and ``toeplitz`` runs the
scalar one-step extension.  Every command is a pure function of its input
files and flags; all randomness sits behind an explicit ``--seed``.

Exit codes: 0 when every requested check or solve succeeded, 1 when a
verdict, tolerance or solve failed (a JSON report is still written), 2
when an input file is malformed (the first offending key is named).
Numbers are printed with 12 significant digits and machine-readable JSON
reports are written next to the inputs they describe.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .energysolver import configuration_from_dict, encost_report, solve_configuration
from .errors import FormatError, FreePDError
from .extend import central_extension, toeplitz_step
from .pdcore import (
    check_pd,
    load_function,
    random_nspd,
    save_function,
    write_json_atomic,
)
from .surgery import LabeledGraph, perform_surgery, verify_conditions
from .transport import relative_energy
from .words import word_to_str

__all__ = ["CommandResult", "dispatch", "main"]


@dataclass(frozen=True)
class CommandResult:
    """Exit code, one-line summary, and the JSON report path (if any)."""

    code: int
    summary: str
    report_path: str = ""


def _fmt(x) -> str:
    return f"{float(x):#.12g}"


def _fmt_complex(z) -> str:
    z = complex(z)
    return f"{z.real:#.12g}{z.imag:+#.12g}i"


def _report_path(input_path) -> Path:
    p = Path(input_path)
    stem = p.name[: -len(".json")] if p.name.endswith(".json") else p.name
    return p.with_name(stem + ".report.json")


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise FormatError(str(path), f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(str(path), f"{path} is not valid JSON: {exc}") from exc


def _cmd_check(args) -> CommandResult:
    C = load_function(args.pdf)
    verdict = check_pd(C, tol=args.tol, brute_force=args.brute_force)
    report = {
        "input": str(args.pdf),
        "status": verdict.status,
        "min_eigenvalue": float(verdict.min_eigenvalue),
        "tol": args.tol,
    }
    if verdict.status != "strict" and verdict.witness_indices:
        report["witness"] = [[word_to_str(w), j] for w, j in verdict.witness_indices]
    path = _report_path(args.pdf)
    write_json_atomic(report, path)
    summary = (
        f"{args.pdf}: {verdict.status}"
        f" (min eigenvalue {_fmt(verdict.min_eigenvalue)})"
    )
    return CommandResult(0 if verdict.status == "strict" else 1, summary, str(path))


def _cmd_random(args) -> CommandResult:
    C = random_nspd(args.r, args.d, seed=args.seed, margin=args.margin)
    save_function(C, args.out)
    summary = f"wrote a d={args.d} function on Ball({args.r}) to {args.out}"
    return CommandResult(0, summary, str(args.out))


def _cmd_extend(args) -> CommandResult:
    C = load_function(args.pdf)
    out = central_extension(C, args.radius)
    save_function(out, args.out)
    summary = f"extended {args.pdf} to Ball({args.radius}) at {args.out}"
    return CommandResult(0, summary, str(args.out))


def _cmd_energy(args) -> CommandResult:
    A = load_function(args.a)
    B = load_function(args.b)
    if args.radii:
        try:
            radii = [int(x) for x in args.radii.split(",") if x.strip()]
        except ValueError:
            raise FormatError("radii", f"--radii must be integers, got {args.radii!r}")
    else:
        radii = list(range(1, min(A.domain.r, B.domain.r) // 2 + 1)) or [None]
    lines = []
    values = {}
    for r in radii:
        rep = relative_energy(A, B, r=r)
        key = min(A.domain.r, B.domain.r) // 2 if r is None else r
        values[str(key)] = rep.energy
        lines.append(f"r={key}: {_fmt(rep.energy)}")
    path = _report_path(args.a)
    write_json_atomic({"a": str(args.a), "b": str(args.b), "energies": values}, path)
    return CommandResult(0, "\n".join(lines), str(path))


def _cmd_solve(args) -> CommandResult:
    cfg_path = Path(args.config)
    obj = _load_json(cfg_path)
    if not isinstance(obj, dict):
        raise FormatError("configuration", "the configuration must be a JSON object")
    sources = obj.get("vertices")
    if not isinstance(sources, dict) or not sources:
        raise FormatError("vertices", "vertices must map names to function files")
    functions = {}
    for name, src in sources.items():
        if not isinstance(src, str):
            raise FormatError("vertices", f"vertex {name!r} must name a file")
        functions[name] = load_function(cfg_path.parent / src)
    config = configuration_from_dict(obj, functions)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        extensions, report = solve_configuration(
            config, args.radius, args.epsilon, seed=args.seed
        )
    except FreePDError as exc:
        write_json_atomic(
            {"config": str(cfg_path), "error": str(exc), "type": type(exc).__name__},
            outdir / "report.json",
        )
        return CommandResult(
            1, f"solve failed: {exc}", str(outdir / "report.json")
        )
    for name, fn in extensions.items():
        save_function(fn, outdir / f"{name}.json")
    cost = encost_report(config, extensions, args.epsilon)
    payload = report.to_dict()
    payload["config"] = str(cfg_path)
    payload["encost_recomputed"] = cost
    write_json_atomic(payload, outdir / "report.json")
    summary = (
        f"solved {cfg_path} to Ball({args.radius}): encost {_fmt(report.encost)}"
        f" over {len(extensions)} vertices"
    )
    return CommandResult(0, summary, str(outdir / "report.json"))


def _cmd_surgery(args) -> CommandResult:
    g = LabeledGraph.from_dict(_load_json(args.graph))
    result = perform_surgery(g, args.R, args.r)
    payload = result.to_dict()
    code = 0
    inserted = result.graph.n - g.n
    summary = f"rewired {args.graph}: {inserted} vertices inserted, |B|={len(result.B)}"
    if args.verify:
        report = verify_conditions(g, result, args.r, args.R)
        payload["conditions"] = report
        failed = sorted(k for k, v in report.items() if not v["pass"])
        if failed:
            code = 1
            summary += "; FAILED " + ", ".join(failed)
        else:
            summary += "; all conditions pass"
    write_json_atomic(payload, args.out)
    return CommandResult(code, summary, str(args.out))


def _cmd_toeplitz(args) -> CommandResult:
    try:
        seq = [complex(x) for x in args.seq.split(",") if x.strip()]
    except ValueError:
        raise FormatError("seq", f"--seq must be comma-separated numbers, got {args.seq!r}")
    parts = args.zeta.split(",")
    if len(parts) != 2:
        raise FormatError("zeta", "--zeta takes re,im")
    try:
        zeta = complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise FormatError("zeta", f"--zeta must be two numbers, got {args.zeta!r}")
    value = toeplitz_step(seq, zeta)
    return CommandResult(0, f"c_{len(seq)} = {_fmt_complex(value)}", "")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freepd",
        description="matrix-valued positive definite functions on the free group",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="verify positive definiteness of a stored function")
    p.add_argument("pdf", help="function JSON file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(run=_cmd_check)

    p = sub.add_parser("random", help="emit a random strictly positive definite function")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(run=_cmd_random)

    p = sub.add_parser("extend", help="extend a function to a larger ball")
    p.add_argument("pdf", help="function JSON file")
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--policy", choices=["central"], default="central")
    p.add_argument("--out", required=True)
    p.set_defaults(run=_cmd_extend)

    p = sub.add_parser("energy", help="relative energies of two stored functions")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--radii", default="", help="comma-separated radii (default: all)")
    p.set_defaults(run=_cmd_energy)

    p = sub.add_parser("solve", help="extend a configuration with controlled energies")
    p.add_argument("--config", required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(run=_cmd_solve)

    p = sub.add_parser("surgery", help="three-stage rewiring of a labeled graph")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(run=_cmd_surgery)

    p = sub.add_parser("toeplitz", help="one scalar extension step")
    p.add_argument("--seq", required=True, help="c_0,c_1,... with c_0 = 1")
    p.add_argument("--zeta", required=True, help="re,im inside the unit disk")
    p.set_defaults(run=_cmd_toeplitz)

    return parser


def dispatch(argv=None) -> CommandResult:
    """Parse arguments and run one subcommand, catching library errors."""
    args = _build_parser().parse_args(argv)
    try:
        return args.run(args)
    except FormatError as exc:
        return CommandResult(2, f"malformed input at {exc.key!r}: {exc}", "")
    except (OSError, json.JSONDecodeError) as exc:
        return CommandResult(2, f"cannot load input: {exc}", "")
    except FreePDError as exc:
        return CommandResult(1, f"{type(exc).__name__}: {exc}", "")


def main(argv=None) -> int:
    result = dispatch(argv)
    stream = sys.stdout if result.code == 0 else sys.stderr
    print(result.summary, file=stream)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
