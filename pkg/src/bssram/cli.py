"""Command-line front end.

Exit codes: 0 ok / agree / accepted, 1 disagree / rejected / invalid,
2 usage errors, 3 internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import analysis, transforms
from .fixtures import FIXTURES
from .program import ParseError, Program, ProgramError, parse_program, print_program, validate
from .runtime import (
    ExplorationBudget, MachineError, default_budget, explore, resolve_oracle, run_deterministic,
    trace_configurations, trace_to_json, trace_to_text,
)
from .structures import StructureError, StructureModel, builtin_names, builtin_structure, corpus, \
    load_structure_file, with_identity

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument plumbing


def _model(args: argparse.Namespace) -> StructureModel:
    if getattr(args, "structure_file", None):
        m = load_structure_file(args.structure_file)
    else:
        m = builtin_structure(args.structure or _fixture_structure(args))
    return with_identity(m) if getattr(args, "identity", False) else m


def _fixture_structure(args: argparse.Namespace) -> str:
    """Structure of the first ``fixture:`` program named on the command line, else A2."""
    for value in vars(args).values():
        for ref in value if isinstance(value, list) else [value]:
            if isinstance(ref, str) and ref.startswith("fixture:") and ref[8:] in FIXTURES:
                return FIXTURES[ref[8:]].structure
    return "A2"


def _program_text(ref: str) -> str:
    """A path, or ``fixture:NAME`` for a bundled program."""
    if ref.startswith("fixture:"):
        name = ref.split(":", 1)[1]
        if name not in FIXTURES:
            raise UsageError(f"unknown fixture {name!r}")
        return FIXTURES[name].source
    try:
        return Path(ref).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {ref}: {exc.strerror}") from None


def _program(ref: str, model: StructureModel, machine_class: str | None = None) -> Program:
    p = parse_program(_program_text(ref), model.signature)
    if machine_class:
        p = Program(p.instructions, p.signature, p.registers, machine_class,
                    p.oracle or ("c1c2_inf" if machine_class == "NU" else None), p.dialect, p.name)
    return p


def _inputs(args: argparse.Namespace, model: StructureModel) -> list[tuple]:
    items = list(args.input or [])
    if getattr(args, "input_file", None):
        items += [ln.strip() for ln in Path(args.input_file).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not items:
        raise UsageError("no input given (use --input or --input-file)")
    return [model.parse_tuple(s) for s in items]


def _budget(args: argparse.Namespace) -> ExplorationBudget:
    steps = args.budget if args.budget is not None else default_budget()
    try:
        return ExplorationBudget(max_steps=steps, max_nodes=args.max_nodes, guess_length_bound=args.guess_bound)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _oracle(args: argparse.Namespace, p: Program, model: StructureModel):
    name = getattr(args, "oracle", None) or (p.oracle if p.machine_class == "NU" else None)
    if name and p.machine_class != "NU":
        raise UsageError("--oracle only applies to NU programs")
    return resolve_oracle(name, model) if name else None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_run(args: argparse.Namespace) -> int:
    model = _model(args)
    p = _program(args.program, model, args.machine_class)
    budget = _budget(args)
    oracle = _oracle(args, p, model)
    code = EXIT_OK
    docs = []
    for x in _inputs(args, model):
        if p.machine_class == "DET":
            r = run_deterministic(p, model, x, budget.max_steps)
            status = {"halted": "HALT", "looping": "LOOP"}.get(r.status, "BUDGET")
            doc = {"input": model.format_tuple(x), "status": status, "steps": r.steps, "path": list(r.path.labels),
                   "output": model.format_tuple(r.output) if r.output is not None else None}
            accepted = r.halted
        else:
            r = explore(p, model, x, budget, oracle, collect=args.collect)
            status = "HALT" if r.accepted else ("REJECT" if r.complete else "BUDGET")
            doc = {"input": model.format_tuple(x), "status": status, "nodes": r.nodes, "depth": r.max_depth,
                   "path": list(r.accepting.labels) if r.accepted else None,
                   "outputs": [model.format_tuple(o) for o in r.outputs]}
            accepted = r.accepted
        if not accepted:
            code = EXIT_NO
        docs.append(doc)
    if args.format == "json":
        sys.stdout.write(json.dumps(docs, indent=1) + "\n")
    else:
        for d in docs:
            sys.stdout.write(f"{d['input']}: {d['status']}\n")
            if d.get("path"):
                sys.stdout.write("  path: " + " ".join(map(str, d["path"])) + "\n")
            if d.get("output"):
                sys.stdout.write(f"  output: {d['output']}\n")
            if d.get("outputs"):
                sys.stdout.write("  outputs: " + " ".join(d["outputs"]) + "\n")
    return code


def cmd_trace(args: argparse.Namespace) -> int:
    model = _model(args)
    p = _program(args.program, model)
    if p.machine_class != "DET":
        raise UsageError("trace needs a deterministic program")
    (x,) = _inputs(args, model)[:1]
    tr = trace_configurations(p, model, x, args.budget if args.budget is not None else default_budget())
    _emit(trace_to_json(tr, model) + "\n" if args.format == "json" else trace_to_text(tr, model), args.output)
    return EXIT_OK if tr[-1].label == p.stop_label else EXIT_NO


def cmd_validate(args: argparse.Namespace) -> int:
    model = _model(args)
    try:
        p = _program(args.program, model)
    except ParseError as exc:
        sys.stdout.write(f"parse error: {exc}\n")
        return EXIT_NO
    findings = validate(p)
    for f in findings:
        sys.stdout.write(f"{f}\n")
    if not findings:
        sys.stdout.write(f"ok: {p.length} labels, class {p.machine_class}, dialect {p.dialect}\n")
    return EXIT_NO if findings else EXIT_OK


def cmd_transform(args: argparse.Namespace) -> int:
    if args.name not in transforms.TRANSFORMS:
        raise UsageError(f"unknown transform {args.name!r}; known: {', '.join(transforms.TRANSFORMS)}")
    fn, arity, _ = transforms.TRANSFORMS[args.name]
    model = _model(args)
    progs = [_program(ref, model) for ref in args.program or []]
    if len(progs) != arity:
        raise UsageError(f"{args.name} takes {arity} program(s), got {len(progs)}")
    kw: dict = {}
    if args.name in ("co-semi-from-singleton", "chi-from-singleton-path"):
        if not args.x0:
            raise UsageError(f"{args.name} needs --x0")
        kw = {"model": model, "x0": model.parse_tuple(args.x0),
              "budget": args.budget if args.budget is not None else default_budget()}
    elif args.name == "chi-from-singleton-counter":
        if args.s0 is None:
            raise UsageError("chi-from-singleton-counter needs --s0")
        kw = {"s0": args.s0}
    elif args.name == "chi-const-from-semi":
        kw = {"const_index": args.const_index}
    elif args.name == "compose-chi-then-recognizer":
        kw = {"which": args.which}
    elif args.name == "chi-id-from-semi-2tape":
        kw = {"co": args.co}
    elif args.name == "determinize-ndb":
        kw = {"max_rounds": args.max_rounds}
    elif args.name == "dnd-to-nu" and args.guess_bound is not None:
        kw = {"guess_bound": args.guess_bound}
    report = fn(*progs, **kw)
    _emit(print_program(report.output), args.output)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    model = _model(args)
    left, right = _program(args.left, model), _program(args.right, model)
    if args.input or args.input_file:
        inputs = _inputs(args, model)
    else:
        inputs = corpus(model, args.max_len, args.size)
    budget = _budget(args)
    right_budget = None
    if args.right_budget is not None:
        right_budget = ExplorationBudget(args.right_budget, budget.max_nodes, budget.guess_length_bound)
    check = analysis.bounded_result_equiv if args.mode == "result" else analysis.bounded_halting_equiv
    report = check(left, right, model, inputs, budget, right_budget=right_budget)
    sys.stdout.write(report.to_json(model) if args.format == "json" else report.to_text(model))
    return EXIT_NO if report.verdict == "disagree" else EXIT_OK


def cmd_flow(args: argparse.Namespace) -> int:
    model = _model(args)
    _emit(analysis.flowchart_dot(_program(args.program, model)), args.output)
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    model = _model(args)
    for x in corpus(model, args.max_len, args.size):
        sys.stdout.write(",".join(model.format_value(v) for v in x) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bssram", description="Run and transform machine programs over first-order structures.")
    sub = ap.add_subparsers(dest="command", required=True)

    def structure(p: argparse.ArgumentParser) -> None:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--structure", choices=builtin_names(),
                       help="builtin structure (default: the fixture's own, else A2)")
        g.add_argument("--structure-file", help="JSON description of a finite structure")
        p.add_argument("--identity", action="store_true", help="add the identity relation to the structure")

    def budget(p: argparse.ArgumentParser) -> None:
        p.add_argument("--budget", type=int, help="step budget (default: $BSSRAM_BUDGET or 10000)")
        p.add_argument("--max-nodes", type=int, default=200_000)
        p.add_argument("--guess-bound", type=int, default=4, help="longest digital guess block / oracle tuple")

    def inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", action="append", help="comma-separated input tuple; repeatable")
        p.add_argument("--input-file", help="file with one input tuple per line")

    for name, fn, help_ in (("run", cmd_run, "run or explore a program"),
                            ("explore", cmd_run, "breadth-first search of the computation tree")):
        p = sub.add_parser(name, help=help_)
        structure(p)
        budget(p)
        inputs(p)
        p.add_argument("--program", required=True, help="program file or fixture:NAME")
        p.add_argument("--class", dest="machine_class", choices=["DET", "NDB", "NU", "DND"])
        p.add_argument("--oracle", help="oracle for nu programs: c1c2_2, c1c2_inf or empty")
        p.add_argument("--collect", action="store_true", help="gather every output instead of stopping at the first")
        p.add_argument("--format", choices=["text", "json"], default="text")
        p.set_defaults(func=fn)

    p = sub.add_parser("trace", help="configuration sequence of a deterministic run")
    structure(p)
    inputs(p)
    p.add_argument("--program", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("validate", help="check a program against the structure's signature")
    structure(p)
    p.add_argument("--program", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("transform", help="apply a program construction")
    p.add_argument("name", help=", ".join(transforms.TRANSFORMS))
    structure(p)
    p.add_argument("--program", action="append", help="source program(s) in the order the construction expects")
    p.add_argument("--x0", help="reference input for the singleton constructions")
    p.add_argument("--s0", type=int, help="accepting path length for the counter construction")
    p.add_argument("--const-index", type=int, default=1)
    p.add_argument("--which", type=int, choices=[1, 2], default=1)
    p.add_argument("--co", action="store_true", help="co-semi-decider variant of chi-id-from-semi-2tape")
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--guess-bound", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("-o", "--output", help="write the program here instead of stdout")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("check", help="bounded equivalence of two programs")
    structure(p)
    budget(p)
    inputs(p)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--right-budget", type=int, help="separate step budget for the right program")
    p.add_argument("--mode", choices=["halting", "result"], default="halting")
    p.add_argument("--max-len", type=int, default=2, help="corpus tuple length when no inputs are given")
    p.add_argument("--size", type=int, default=2)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("flow", help="flowchart as a DOT digraph")
    structure(p)
    p.add_argument("--program", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("corpus", help="enumerate small inputs for a structure")
    structure(p)
    p.add_argument("--max-len", type=int, default=2)
    p.add_argument("--size", type=int, default=2)
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ParseError, StructureError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (transforms.TransformError, ProgramError, MachineError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NO
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
