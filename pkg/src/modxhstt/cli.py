"""Command-line entry point: ``modxhstt <command> ...``.

Exit codes: 0 success, 1 validation or parse failure, 2 I/O failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import model as m
from .evaluator import InvalidSolutionError, evaluate
from .expansion import ExpansionError, expand_courses, load_specs
from .heuristic import SearchBudget, default_workers, solve
from .ilp import (BuildOptions, DecodeError, ModelError, build_model, decode_solution, emit_lp, emit_mps,
                  read_values, registry_json, stats_json)
from .stats import format_table, instance_stats
from .xmlio import XhsttError, parse_instance, parse_solution, serialize_instance, serialize_solution

log = logging.getLogger("modxhstt")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, lines: Sequence[str]):
        super().__init__("\n".join(lines))
        self.code = code
        self.lines = list(lines)


def _read(path: str, binary: bool = True):
    try:
        return Path(path).read_bytes() if binary else Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_IO, [f"cannot read {path}: {exc.strerror or exc}"])


def _write(path: str, data: bytes | str) -> None:
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True)
        if isinstance(data, str):
            p.write_text(data)
        else:
            p.write_bytes(data)
    except OSError as exc:
        raise CliError(EXIT_IO, [f"cannot write {path}: {exc.strerror or exc}"])


def _load_instance(path: str, resolve: bool = True) -> m.Instance:
    warnings: list = []
    try:
        inst = parse_instance(_read(path), warnings=warnings)
    except XhsttError as exc:
        raise CliError(EXIT_INVALID, [f"{path}: {d}" for d in exc.diagnostics])
    for w in warnings:
        print(f"{path}: {w}", file=sys.stderr)
    if resolve:
        res = m.resolve_references(inst)
        if not res.ok:
            raise CliError(EXIT_INVALID, [f"{path}: {p}" for p in res.problems])
    return inst


def _load_solution(path: str, inst: m.Instance) -> m.Solution:
    try:
        sol = parse_solution(_read(path), inst)
    except XhsttError as exc:
        raise CliError(EXIT_INVALID, [f"{path}: {d}" for d in exc.diagnostics])
    res = m.validate_solution(inst, sol)
    if not res.ok:
        raise CliError(EXIT_INVALID, [f"{path}: {p}" for p in res.problems])
    return sol


def _pair(pair: tuple[int, int]) -> str:
    return f"({pair[0]}, {pair[1]})"


# --- commands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    inst = _load_instance(args.instance)
    if args.solution:
        _load_solution(args.solution, inst)
    print("ok")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst = _load_instance(args.instance)
    sol = _load_solution(args.solution, inst)
    report = evaluate(inst, sol, workers=default_workers())
    if args.format == "json":
        print(report.to_json())
    else:
        sys.stdout.write(report.to_text(nonzero_only=not args.all))
    return EXIT_OK


def cmd_stats(args) -> int:
    records = [instance_stats(_load_instance(p, resolve=False)) for p in args.instances]
    if args.format == "json":
        print(json.dumps([r.to_dict() for r in records], indent=2))
    else:
        sys.stdout.write(format_table(records))
    return EXIT_OK


def cmd_expand(args) -> int:
    inst = _load_instance(args.instance)
    try:
        specs = load_specs(_read(args.spec, binary=False))
        out = expand_courses(inst, specs)
    except ExpansionError as exc:
        raise CliError(EXIT_INVALID, [f"{args.spec}: {exc}"])
    _write(args.output, serialize_instance(out))
    n_min = sum(s.s_min for s in specs)
    n_max = sum(s.s_max - s.s_min for s in specs)
    print(f"expanded {len(specs)} course(s)")
    print(f"+{n_min} min events")
    print(f"+{n_max} max events")
    print(f"+{len(out.constraints) - len(inst.constraints)} constraints")
    return EXIT_OK


def _options(args) -> BuildOptions:
    return BuildOptions(reduce=args.reduce, tighten=args.tighten,
                        hard_mode="pin" if args.pin_hard else "penalty", hard_weight=args.hard_weight)


def cmd_emit_ilp(args) -> int:
    inst = _load_instance(args.instance)
    try:
        model = build_model(inst, _options(args))
    except ModelError as exc:
        raise CliError(EXIT_INVALID, [str(exc)])
    prefix = args.output
    text = emit_lp(model) if args.format == "lp" else emit_mps(model, inst.id or "MODXHSTT")
    _write(f"{prefix}.{args.format}", text)
    _write(f"{prefix}.registry.json", registry_json(model))
    _write(f"{prefix}.stats.json", stats_json(model))
    print(model.stats_line())
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        registry = json.loads(_read(args.registry, binary=False))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INVALID, [f"{args.registry}: not JSON ({exc})"])
    inst = _load_instance(args.instance)
    if registry.get("instance") not in (None, inst.id):
        raise CliError(EXIT_INVALID, [f"registry is for instance {registry['instance']!r}, not {inst.id!r}"])
    try:
        model = build_model(inst, BuildOptions.from_dict(registry.get("options") or {}))
    except ModelError as exc:
        raise CliError(EXIT_INVALID, [str(exc)])
    if set(registry.get("variables", {})) != set(model.vars):
        raise CliError(EXIT_INVALID, ["registry variables do not match the model rebuilt from the instance"])
    try:
        values = read_values(_read(args.solution, binary=False), model, mst=True if args.mst else None)
        sol = decode_solution(model, values, inst, verify=args.verify)
    except DecodeError as exc:
        raise CliError(EXIT_INVALID, [f"{args.solution}: {p}" for p in exc.problems])
    _write(args.output, serialize_solution(sol, inst))
    print(_pair(evaluate(inst, sol).pair))
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    try:
        budget = SearchBudget(args.iterations, args.seconds, args.seed)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, [str(exc)])
    info: dict = {}
    sol, pair = solve(inst, budget, restarts=args.restarts, workers=args.threads, info=info)
    _write(args.output, serialize_solution(sol, inst))
    print(_pair(pair))
    print(f"iterations={info['iterations']}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modxhstt", description="Extended XHSTT toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="parse and check an instance (and optionally a solution)")
    s.add_argument("instance")
    s.add_argument("solution", nargs="?")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("evaluate", help="per-constraint cost report and (hard, soft) pair")
    s.add_argument("instance")
    s.add_argument("solution")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--all", action="store_true", help="list zero-cost points too")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("stats", help="resource and modularity counts")
    s.add_argument("instances", nargs="+")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("expand", help="add requirement events for modular courses")
    s.add_argument("instance")
    s.add_argument("spec", help="course-spec JSON")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("emit-ilp", help="write an LP or MPS model with registry and stats sidecars")
    s.add_argument("instance")
    s.add_argument("--format", choices=("lp", "mps"), default="lp")
    s.add_argument("--reduce", action="store_true", help="model-size reductions")
    s.add_argument("--tighten", action="store_true", help="exact-objective selector variables")
    s.add_argument("--pin-hard", action="store_true", help="force hard deviations to zero instead of weighting")
    s.add_argument("--hard-weight", type=int, default=None, help="weight of the hard cost in the objective")
    s.add_argument("-o", "--output", required=True, help="output prefix")
    s.set_defaults(func=cmd_emit_ilp)

    s = sub.add_parser("decode", help="turn a solver solution into an XHSTT solution")
    s.add_argument("registry")
    s.add_argument("solution", help="solver output: 'name value' lines or MST XML")
    s.add_argument("instance")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--mst", action="store_true", help="force MST XML parsing")
    s.add_argument("--verify", choices=("full", "structural", "none"), default="full")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("solve", help="greedy construction plus local search")
    s.add_argument("instance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--iterations", type=int, default=10_000)
    s.add_argument("--seconds", type=float, default=None)
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--threads", type=int, default=None, help="default from MODXHSTT_THREADS")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_solve)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        for line in exc.lines:
            print(line, file=sys.stderr)
        return exc.code
    except InvalidSolutionError as exc:
        for p in exc.problems:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
