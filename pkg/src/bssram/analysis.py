"""Control-flow views of programs and bounded behavioural comparison of machines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .program import (
    Goto, IndexBranch, NdbGoto, NuGuess, Program, RelBranch, Stop, falls_through, format_instruction,
)
from .runtime import (
    Configuration, ExplorationBudget, OracleSet, explore, format_configuration, trace_configurations,
)
from .structures import StructureModel

__all__ = [
    "Edge", "control_edges", "flowchart_dot", "ProgramPath", "program_paths",
    "InputVerdict", "Divergence", "EquivReport", "bounded_halting_equiv", "bounded_result_equiv",
]


# ---------------------------------------------------------------------------
# control graph


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str  # next | goto | then | else | first | second | nu


def control_edges(p: Program) -> list[Edge]:
    """Every possible control transfer, in textual order, derived from the instruction list."""
    edges = []
    for label, ins in enumerate(p.instructions, start=1):
        if isinstance(ins, (RelBranch, IndexBranch)):
            edges += [Edge(label, ins.then, "then"), Edge(label, ins.else_, "else")]
        elif isinstance(ins, NdbGoto):
            edges += [Edge(label, ins.first, "first"), Edge(label, ins.second, "second")]
        elif isinstance(ins, Goto):
            edges.append(Edge(label, ins.target, "goto"))
        elif isinstance(ins, NuGuess):
            edges.append(Edge(label, label + 1, "nu"))
        elif isinstance(ins, Stop):
            continue
        elif falls_through(ins):
            edges.append(Edge(label, label + 1, "next"))
    return edges


def _successors(p: Program) -> dict[int, list[int]]:
    succ: dict[int, list[int]] = {label: [] for label in p.labels()}
    for e in control_edges(p):
        if e.dst not in succ[e.src]:
            succ[e.src].append(e.dst)
    return succ


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def flowchart_dot(p: Program, oracle: str | None = None) -> str:
    """Graphviz digraph with one node per label.

    Tests are diamonds, the stop label a double octagon, everything else a
    box. Edges carry the transfer kind; nu edges name the oracle.
    """
    multi = p.tape_count > 1
    ident = p.signature.identity_rel_index
    lines = [f'digraph "{_dot_escape(p.name or "program")}" {{', "  node [fontname=monospace];"]
    for label, ins in enumerate(p.instructions, start=1):
        if isinstance(ins, (RelBranch, IndexBranch)):
            shape = "diamond"
            text = format_instruction(ins, multi, ident).split(" then ")[0].removeprefix("if ")
        elif isinstance(ins, Stop):
            shape, text = "doubleoctagon", "stop"
        else:
            shape, text = "box", format_instruction(ins, multi, ident)
        lines.append(f'  n{label} [shape={shape}, label="{label}: {_dot_escape(text)}"];')
    nu_name = oracle or p.oracle or "oracle"
    for e in control_edges(p):
        attr = {"then": "T", "else": "F", "first": "1", "second": "2", "nu": f"nu[{nu_name}]"}.get(e.kind)
        suffix = f' [label="{_dot_escape(attr)}"]' if attr else ""
        lines.append(f"  n{e.src} -> n{e.dst}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProgramPath:
    labels: tuple
    ends_at_stop: bool
    # label at which the next transfer would re-enter the path, if any
    cycle_to: int | None = None


def program_paths(p: Program, max_len: int) -> list[ProgramPath]:
    """Maximal label sequences from label 1 through the control graph.

    A path is extended until it reaches stop, reaches ``max_len`` labels,
    or every continuation would revisit a label already on it (recorded in
    ``cycle_to``). Order follows the textual successor order.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    succ = _successors(p)
    stop = p.stop_label
    out: list[ProgramPath] = []
    stack: list[tuple[tuple, frozenset]] = [((1,), frozenset({1}))]
    while stack:
        path, seen = stack.pop()
        last = path[-1]
        if last == stop:
            out.append(ProgramPath(path, True))
            continue
        if len(path) >= max_len:
            out.append(ProgramPath(path, False))
            continue
        fresh = [s for s in succ[last] if s not in seen]
        for s in succ[last]:
            if s in seen:
                out.append(ProgramPath(path, False, s))
        for s in reversed(fresh):
            stack.append((path + (s,), seen | {s}))
    return out


# ---------------------------------------------------------------------------
# bounded equivalence


@dataclass(frozen=True)
class InputVerdict:
    input: tuple
    left: str
    right: str
    verdict: str  # agree | disagree | inconclusive
    left_outputs: frozenset = frozenset()
    right_outputs: frozenset = frozenset()


@dataclass(frozen=True)
class Divergence:
    input: tuple
    step: int
    left: Configuration | None
    right: Configuration | None


@dataclass
class EquivReport:
    mode: str
    corpus: list
    budget: ExplorationBudget
    verdicts: list = field(default_factory=list)
    first_divergence: Divergence | None = None
    # acceptance (or found output sets) equal on every input, budget exhaustion included
    bounded_equal: bool = True

    @property
    def verdict(self) -> str:
        kinds = {v.verdict for v in self.verdicts}
        if "disagree" in kinds:
            return "disagree"
        if "inconclusive" in kinds:
            return "inconclusive"
        return "agree"

    @property
    def disagreements(self) -> list[InputVerdict]:
        return [v for v in self.verdicts if v.verdict == "disagree"]

    def to_text(self, model: StructureModel | None = None) -> str:
        fmt = _tuple_formatter(model)
        lines = [f"mode: {self.mode}", f"budget: {self.budget.max_steps} steps, {self.budget.max_nodes} nodes",
                 f"verdict: {self.verdict}", f"bounded_equal: {str(self.bounded_equal).lower()}"]
        for v in self.verdicts:
            lines.append(f"{fmt(v.input)}: {v.left} / {v.right} -> {v.verdict}")
        d = self.first_divergence
        if d is not None:
            lines.append(f"first divergence: input {fmt(d.input)} at step {d.step}")
            for side, c in (("left", d.left), ("right", d.right)):
                lines.append(f"  {side}: {format_configuration(c, model) if c is not None else '-'}")
        return "\n".join(lines) + "\n"

    def to_json(self, model: StructureModel | None = None) -> str:
        fmt = _tuple_formatter(model)
        d = self.first_divergence
        doc = {
            "mode": self.mode,
            "budget": {"max_steps": self.budget.max_steps, "max_nodes": self.budget.max_nodes,
                       "guess_length_bound": self.budget.guess_length_bound},
            "verdict": self.verdict,
            "bounded_equal": self.bounded_equal,
            "inputs": [
                {"input": fmt(v.input), "left": v.left, "right": v.right, "verdict": v.verdict,
                 **({"left_outputs": sorted(map(fmt, v.left_outputs)),
                     "right_outputs": sorted(map(fmt, v.right_outputs))} if self.mode == "result" else {})}
                for v in self.verdicts
            ],
            "first_divergence": None if d is None else {
                "input": fmt(d.input), "step": d.step,
                "left": format_configuration(d.left, model) if d.left is not None else None,
                "right": format_configuration(d.right, model) if d.right is not None else None,
            },
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def _tuple_formatter(model: StructureModel | None):
    if model is None:
        return lambda t: "(" + ",".join(map(str, t)) + ")"
    return lambda t: "(" + ",".join(model.format_value(v) for v in t) + ")"


def _as_budget(budget: ExplorationBudget | int | None) -> ExplorationBudget:
    if budget is None:
        return ExplorationBudget()
    if isinstance(budget, int):
        return ExplorationBudget(max_steps=budget)
    return budget


def _status(res) -> str:
    if res.accepted:
        return "accept"
    return "reject" if res.complete else "unknown"


def _halting_verdict(a: str, b: str) -> str:
    if a == b and a != "unknown":
        return "agree"
    if "unknown" in (a, b):
        return "inconclusive"
    return "disagree"


def _result_verdict(ra, rb) -> str:
    sa, sb = frozenset(ra.outputs), frozenset(rb.outputs)
    if ra.complete and rb.complete:
        return "agree" if sa == sb else "disagree"
    # outputs actually found are sound evidence against a complete side
    if (ra.complete and not sb <= sa) or (rb.complete and not sa <= sb):
        return "disagree"
    return "inconclusive"


def _locate(m1: Program, m2: Program, model: StructureModel, x: tuple, ra, rb,
            budget: ExplorationBudget) -> Divergence:
    """First step where the two runs differ.

    Deterministic pairs are compared configuration by configuration;
    otherwise the step is the depth of the first accepting path found on
    either side.
    """
    if m1.machine_class == "DET" and m2.machine_class == "DET":
        limit = min(budget.max_steps, 100_000)
        t1 = trace_configurations(m1, model, x, limit)
        t2 = trace_configurations(m2, model, x, limit)
        for i in range(max(len(t1), len(t2))):
            c1 = t1[i] if i < len(t1) else None
            c2 = t2[i] if i < len(t2) else None
            if c1 != c2:
                return Divergence(x, i, c1, c2)
        return Divergence(x, len(t1), t1[-1], t2[-1])
    steps = [len(r.accepting.labels) - 1 for r in (ra, rb) if r.accepted]
    return Divergence(x, min(steps) if steps else budget.max_steps, ra.accepting_config, rb.accepting_config)


def _compare(mode: str, m1: Program, m2: Program, model: StructureModel, corpus: Iterable[Sequence[Any]],
             budget, oracle: OracleSet | None, right_budget) -> EquivReport:
    b1 = _as_budget(budget)
    b2 = _as_budget(right_budget) if right_budget is not None else b1
    corpus = [tuple(x) for x in corpus]
    report = EquivReport(mode, corpus, b1)
    collect = mode == "result"
    for x in corpus:
        ra = explore(m1, model, x, b1, oracle, collect=collect)
        rb = explore(m2, model, x, b2, oracle, collect=collect)
        sa, sb = _status(ra), _status(rb)
        if mode == "halting":
            verdict = _halting_verdict(sa, sb)
            same = ra.accepted == rb.accepted
        else:
            verdict = _result_verdict(ra, rb)
            same = frozenset(ra.outputs) == frozenset(rb.outputs)
        report.bounded_equal &= same
        report.verdicts.append(InputVerdict(x, sa, sb, verdict, frozenset(ra.outputs), frozenset(rb.outputs)))
        if verdict == "disagree" and report.first_divergence is None:
            report.first_divergence = _locate(m1, m2, model, x, ra, rb, b1)
    return report


def bounded_halting_equiv(m1: Program, m2: Program, model: StructureModel, corpus: Iterable[Sequence[Any]],
                          budget: ExplorationBudget | int | None = None, oracle: OracleSet | None = None,
                          right_budget: ExplorationBudget | int | None = None) -> EquivReport:
    """Compare bounded acceptance input by input (``right_budget`` overrides the budget of ``m2``)."""
    return _compare("halting", m1, m2, model, corpus, budget, oracle, right_budget)


def bounded_result_equiv(m1: Program, m2: Program, model: StructureModel, corpus: Iterable[Sequence[Any]],
                         budget: ExplorationBudget | int | None = None, oracle: OracleSet | None = None,
                         right_budget: ExplorationBudget | int | None = None) -> EquivReport:
    """Compare the output sets collected over all halting configurations within budget."""
    return _compare("result", m1, m2, model, corpus, budget, oracle, right_budget)
