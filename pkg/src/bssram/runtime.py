"""Operational semantics: configurations, stepping, deterministic runs and
breadth-first exploration of non-deterministic computation trees.

A single compiled executor (``Machine``) implements every instruction. It
keeps the machine state in mutable lists and turns each label into a
closure, which makes long deterministic runs cheap; ``step`` and
``explore`` load a configuration into it, execute one instruction and
take a snapshot.
"""

from __future__ import annotations

import itertools
import json
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .program import (
    Copy, ConstAssign, Goto, IReg, IndexBranch, IndexCopy, IndexDiv2, IndexInc, IndexMod2,
    IndexPow2, IndexSet, IndexSetOne, Init, Instruction, NdbGoto, NuGuess, OpApply, Program,
    RelBranch, Stop, TapeCopy, ZInd, ZReg,
)
from .structures import StructureError, StructureModel

__all__ = [
    "Tape", "Configuration", "OracleSet", "PathRecord", "ExplorationBudget", "RunResult",
    "ExploreResult", "MachineError", "Machine", "oracle_pair_square", "oracle_pair_star",
    "oracle_empty", "resolve_oracle", "input_config", "input_configs_dnd", "output_of", "step",
    "nu_successors", "run_deterministic", "trace_configurations", "explore", "halting_table",
    "format_configuration", "configuration_to_json", "default_budget",
]


class MachineError(RuntimeError):
    """Invalid execution request (bad register reference, wrong machine class, ...)."""


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True, eq=False)
class Tape:
    """Index registers plus a Z-tape stored as a finite prefix and a fill value."""

    index: tuple
    cells: tuple
    fill: Any

    def read(self, p: int) -> Any:
        return self.cells[p - 1] if p <= len(self.cells) else self.fill

    def window(self, n: int) -> tuple:
        return tuple(self.read(p) for p in range(1, n + 1))

    def normal_cells(self) -> tuple:
        cells = self.cells
        n = len(cells)
        while n and cells[n - 1] == self.fill:
            n -= 1
        return cells[:n]

    def _key(self) -> tuple:
        return (self.index, self.normal_cells(), self.fill)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Tape) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


@dataclass(frozen=True)
class Configuration:
    label: int
    tapes: tuple

    @property
    def nu(self) -> tuple:
        """Index vector of tape 1."""
        return self.tapes[0].index

    def z(self, p: int, tape: int = 1) -> Any:
        return self.tapes[tape - 1].read(p)


def output_of(c: Configuration) -> tuple:
    """(u_1, ..., u_{nu_1}) read from tape 1."""
    t = c.tapes[0]
    return t.window(t.index[0])


def format_configuration(c: Configuration, model: StructureModel | None = None) -> str:
    fmt = model.format_value if model is not None else str
    parts = []
    for t in c.tapes:
        nu = "(" + ",".join(map(str, t.index)) + ")"
        cells = ", ".join(fmt(v) for v in t.cells)
        parts.append(f"{nu} . ({cells} | {fmt(t.fill)})")
    if len(parts) == 1:
        return f"({c.label} . {parts[0]})"
    return f"({c.label} . " + " ".join(f"[{p}]" for p in parts) + ")"


def configuration_to_json(c: Configuration, model: StructureModel | None = None) -> dict:
    fmt = model.format_value if model is not None else str
    return {
        "label": c.label,
        "tapes": [
            {"index": list(t.index), "cells": [fmt(v) for v in t.cells], "fill": fmt(t.fill)}
            for t in c.tapes
        ],
    }


def input_config(p: Program, x: Sequence[Any]) -> Configuration:
    """Initial configuration for input ``x``: (n,1,..,1) . x . (x_n, x_n, ...)."""
    x = tuple(x)
    if not x:
        raise MachineError("input tuple must be non-empty")
    fill = x[-1]
    tapes = [Tape((len(x),) + (1,) * (p.registers[0] - 1), x, fill)]
    for k in p.registers[1:]:
        tapes.append(Tape((1,) * k, (), fill))
    return Configuration(1, tuple(tapes))


def input_configs_dnd(p: Program, x: Sequence[Any], model: StructureModel, bound: int) -> list[Configuration]:
    """One initial configuration per guess block y in {c1,c2}^m, 1 <= m <= bound.

    The guesses follow the input on tape 1 while nu_1 stays |x|.
    """
    if p.machine_class != "DND":
        raise MachineError(f"program class is {p.machine_class}, not DND")
    try:
        c1, c2 = model.c1, model.c2
    except StructureError as exc:
        raise MachineError(str(exc)) from None
    base = input_config(p, x)
    t1 = base.tapes[0]
    out = []
    for m in range(1, bound + 1):
        for y in itertools.product((c1, c2), repeat=m):
            tape = Tape(t1.index, t1.cells + y, t1.fill)
            out.append(Configuration(1, (tape,) + base.tapes[1:]))
    return out


# ---------------------------------------------------------------------------
# oracle sets


@dataclass(frozen=True)
class OracleSet:
    name: str
    member: Callable[[tuple], bool] = field(compare=False)
    enumerate: Callable[[int], list] = field(compare=False)


def oracle_pair_square(model: StructureModel) -> OracleSet:
    pair = (model.c1, model.c2)
    return OracleSet(
        "c1c2_2",
        lambda t: len(t) == 2 and all(v in pair for v in t),
        lambda bound: list(itertools.product(pair, repeat=2)) if bound >= 2 else [],
    )


def oracle_pair_star(model: StructureModel) -> OracleSet:
    pair = (model.c1, model.c2)
    return OracleSet(
        "c1c2_inf",
        lambda t: len(t) >= 1 and all(v in pair for v in t),
        lambda bound: [t for n in range(1, bound + 1) for t in itertools.product(pair, repeat=n)],
    )


def oracle_empty(model: StructureModel | None = None) -> OracleSet:
    return OracleSet("empty", lambda t: False, lambda bound: [])


_ORACLES = {"c1c2_2": oracle_pair_square, "c1c2_inf": oracle_pair_star, "empty": oracle_empty}


def resolve_oracle(name: str, model: StructureModel) -> OracleSet:
    try:
        return _ORACLES[name](model)
    except KeyError:
        raise MachineError(f"unknown oracle {name!r}; known oracles: {', '.join(_ORACLES)}") from None


def _candidates(oracle: OracleSet, args: tuple, semantics: str, bound: int) -> list:
    tuples = oracle.enumerate(max(bound, len(args) + 1 if semantics == "relational" else 1))
    if semantics == "first":
        pool = (t[0] for t in tuples if t)
    elif semantics == "relational":
        pool = (t[-1] for t in tuples if len(t) == len(args) + 1 and oracle.member(args + (t[-1],)))
    else:
        raise MachineError(f"unknown nu semantics {semantics!r}")
    return list(dict.fromkeys(pool))


# ---------------------------------------------------------------------------
# paths and budgets


@dataclass(frozen=True)
class PathRecord:
    labels: tuple
    # halted | budget_exhausted | blocked | looping
    terminated: str


@dataclass(frozen=True)
class ExplorationBudget:
    max_steps: int = 10_000
    max_nodes: int = 200_000
    guess_length_bound: int = 4

    def __post_init__(self) -> None:
        if min(self.max_steps, self.max_nodes, self.guess_length_bound) < 1:
            raise ValueError("budget fields must be positive")


def default_budget() -> int:
    """Default step budget, overridable through ``BSSRAM_BUDGET``."""
    try:
        return max(1, int(os.environ.get("BSSRAM_BUDGET", "10000")))
    except ValueError:
        return 10_000


class _Halted(Exception):
    pass


class _Looping(Exception):
    pass


class _Branching(Exception):
    pass


# ---------------------------------------------------------------------------
# compiled executor


class Machine:
    """Mutable executor for one program over one structure.

    ``fills`` gives the fill value of every tape; all entry points that
    start from an input use x_n for every tape.
    """

    def __init__(
        self,
        program: Program,
        model: StructureModel,
        fills: Sequence[Any],
        oracle: OracleSet | None = None,
        nu_semantics: str = "first",
        guess_bound: int = 4,
        stop_on_static_loop: bool = False,
    ):
        self.program = program
        self.model = model
        self.oracle = oracle
        self.nu_semantics = nu_semantics
        self.guess_bound = guess_bound
        self.I = [[1] * k for k in program.registers]
        self.Z: list[list] = [[] for _ in program.registers]
        self.F = list(fills)
        self.stop = program.stop_label
        self.stop_on_static_loop = stop_on_static_loop
        self.kinds: list[str | None] = [None]
        self.ops: list[Callable[[], int] | None] = [None]
        self.branch: dict[int, Any] = {}
        for label, ins in enumerate(program.instructions, start=1):
            kind, op = self._compile(label, ins)
            self.kinds.append(kind)
            self.ops.append(op)

    # -- state transfer ----------------------------------------------------

    def load(self, c: Configuration) -> int:
        for t, tape in enumerate(c.tapes):
            if len(tape.index) != len(self.I[t]):
                raise MachineError("configuration does not match the program's register counts")
            self.I[t][:] = tape.index
            self.Z[t][:] = tape.cells
        return c.label

    def snapshot(self, label: int) -> Configuration:
        return Configuration(
            label,
            tuple(Tape(tuple(i), tuple(z), f) for i, z, f in zip(self.I, self.Z, self.F)),
        )

    # -- compilation -------------------------------------------------------

    def _ireg(self, r: IReg) -> tuple[list, int]:
        if not 1 <= r.tape <= len(self.I):
            raise MachineError(f"reference to tape {r.tape} beyond the program's {len(self.I)} tape(s)")
        if not 1 <= r.j <= len(self.I[r.tape - 1]):
            raise MachineError(
                f"reference to I{{{r.tape},{r.j}}} but tape {r.tape} has {len(self.I[r.tape - 1])} index register(s)"
            )
        return self.I[r.tape - 1], r.j - 1

    def _tape(self, t: int) -> tuple[list, Any]:
        if not 1 <= t <= len(self.Z):
            raise MachineError(f"reference to tape {t} beyond the program's {len(self.Z)} tape(s)")
        return self.Z[t - 1], self.F[t - 1]

    def _getter(self, z) -> Callable[[], Any]:
        zt, f = self._tape(z.tape)
        if isinstance(z, ZReg):
            idx = z.j - 1
            return lambda: zt[idx] if idx < len(zt) else f
        it, k = self._ireg(z.via)

        def get() -> Any:
            p = it[k]
            return zt[p - 1] if p <= len(zt) else f

        return get

    def _setter(self, z) -> Callable[[Any], None]:
        zt, f = self._tape(z.tape)
        if isinstance(z, ZReg):
            idx = z.j - 1

            def set_direct(v: Any) -> None:
                n = len(zt)
                if idx < n:
                    zt[idx] = v
                else:
                    zt.extend([f] * (idx - n))
                    zt.append(v)

            return set_direct
        it, k = self._ireg(z.via)

        def set_indirect(v: Any) -> None:
            idx = it[k] - 1
            n = len(zt)
            if idx < n:
                zt[idx] = v
            else:
                zt.extend([f] * (idx - n))
                zt.append(v)

        return set_indirect

    def _compile(self, label: int, ins: Instruction) -> tuple[str, Callable[[], int]]:
        nxt = label + 1
        model = self.model
        if isinstance(ins, Stop):
            def halt() -> int:
                raise _Halted
            return "stop", halt
        if isinstance(ins, ConstAssign):
            set_, c = self._setter(ins.dst), model.constants[ins.const - 1]

            def const_assign() -> int:
                set_(c)
                return nxt
            return "det", const_assign
        if isinstance(ins, OpApply):
            set_, fn = self._setter(ins.dst), model.operations[ins.op - 1]
            gets = [self._getter(a) for a in ins.args]
            if len(gets) == 1:
                g1 = gets[0]

                def op1() -> int:
                    set_(fn(g1()))
                    return nxt
                return "det", op1
            if len(gets) == 2:
                g1, g2 = gets

                def op2() -> int:
                    set_(fn(g1(), g2()))
                    return nxt
                return "det", op2

            def opn() -> int:
                set_(fn(*[g() for g in gets]))
                return nxt
            return "det", opn
        if isinstance(ins, Copy):
            set_, get = self._setter(ins.dst), self._getter(ins.src)

            def copy() -> int:
                set_(get())
                return nxt
            return "det", copy
        if isinstance(ins, RelBranch):
            rel = model.relations[ins.rel - 1]
            gets = [self._getter(a) for a in ins.args]
            a, b = ins.then, ins.else_
            if len(gets) == 1:
                g1 = gets[0]
                return "det", self._self_guard(label, a, b, lambda: a if rel(g1()) else b)
            if len(gets) == 2:
                g1, g2 = gets
                return "det", self._self_guard(label, a, b, lambda: a if rel(g1(), g2()) else b)
            return "det", self._self_guard(label, a, b, lambda: a if rel(*[g() for g in gets]) else b)
        if isinstance(ins, IndexBranch):
            (il, kl), (ir, kr) = self._ireg(ins.lhs), self._ireg(ins.rhs)
            a, b = ins.then, ins.else_
            if a == b == label and self.stop_on_static_loop:
                return "loop", self._looping
            return "det", self._self_guard(label, a, b, lambda: a if il[kl] == ir[kr] else b)
        if isinstance(ins, IndexInc):
            it, k = self._ireg(ins.reg)

            def inc() -> int:
                it[k] += 1
                return nxt
            return "det", inc
        if isinstance(ins, IndexSetOne):
            it, k = self._ireg(ins.reg)

            def set_one() -> int:
                it[k] = 1
                return nxt
            return "det", set_one
        if isinstance(ins, Goto):
            t = ins.target
            if t == label and self.stop_on_static_loop:
                return "loop", self._looping
            return "det", lambda: t
        if isinstance(ins, NdbGoto):
            self.branch[label] = (ins.first, ins.second)
            return "ndb", self._nondeterministic
        if isinstance(ins, NuGuess):
            set_ = self._setter(ins.dst)
            if ins.args is None:
                it, k = self._ireg(IReg(ins.range_tape, 1))
                zt, f = self._tape(ins.range_tape)

                def args() -> tuple:
                    return tuple(zt[p] if p < len(zt) else f for p in range(it[k]))
            else:
                gets = [self._getter(a) for a in ins.args]

                def args() -> tuple:
                    return tuple(g() for g in gets)
            self.branch[label] = (set_, args, nxt)
            return "nu", self._nondeterministic
        if isinstance(ins, TapeCopy):
            (zd, fd), (zs, fs) = self._tape(ins.dst), self._tape(ins.src)
            (id_, _), (is_, _) = self._ireg(IReg(ins.dst, 1)), self._ireg(IReg(ins.src, 1))

            def tape_copy() -> int:
                n = is_[0]
                vals = zs[:n] + [fs] * (n - len(zs)) if n > len(zs) else zs[:n]
                if len(zd) < n:
                    zd.extend([fd] * (n - len(zd)))
                zd[:n] = vals
                id_[0] = n
                return nxt
            return "det", tape_copy
        if isinstance(ins, Init):
            it, k = self._ireg(ins.slot.via)
            set_, get = self._setter(ins.slot), self._getter(ins.src)

            def init() -> int:
                v = get()
                it[k] += 1
                set_(v)
                return nxt
            return "det", init
        if isinstance(ins, IndexDiv2):
            it, k = self._ireg(ins.reg)

            def div2() -> int:
                v = it[k] >> 1
                it[k] = v if v else 1
                return nxt
            return "det", div2
        if isinstance(ins, IndexMod2):
            (idd, kd), (iss, ks) = self._ireg(ins.dst), self._ireg(ins.src)

            def mod2() -> int:
                idd[kd] = 2 - (iss[ks] & 1)
                return nxt
            return "det", mod2
        if isinstance(ins, IndexSet):
            it, k = self._ireg(ins.reg)
            v = ins.value

            def index_set() -> int:
                it[k] = v
                return nxt
            return "det", index_set
        if isinstance(ins, IndexPow2):
            (idd, kd), (ie, ke) = self._ireg(ins.dst), self._ireg(ins.exp)

            def pow2() -> int:
                idd[kd] = 1 << ie[ke]
                return nxt
            return "det", pow2
        if isinstance(ins, IndexCopy):
            (idd, kd), (iss, ks) = self._ireg(ins.dst), self._ireg(ins.src)

            def icopy() -> int:
                idd[kd] = iss[ks]
                return nxt
            return "det", icopy
        raise MachineError(f"cannot execute {ins!r}")

    def _self_guard(self, label: int, a: int, b: int, op: Callable[[], int]) -> Callable[[], int]:
        # a test that jumps to itself leaves the state unchanged, so it never leaves again
        if not self.stop_on_static_loop or label not in (a, b):
            return op

        def guarded() -> int:
            t = op()
            if t == label:
                raise _Looping
            return t
        return guarded

    @staticmethod
    def _looping() -> int:
        raise _Looping

    @staticmethod
    def _nondeterministic() -> int:
        raise _Branching

    # -- execution -----------------------------------------------------------

    def run(self, label: int, budget: int, path: list | None = None,
            stop_at_branch: bool = False) -> tuple[int, int, str]:
        """Execute deterministically from ``label`` for at most ``budget`` steps.

        Returns (final label, steps taken, status). Appends visited labels
        (excluding the start label) to ``path`` when given. With
        ``stop_at_branch`` a non-deterministic label ends the run with
        status "branching" instead of raising.
        """
        ops = self.ops
        steps = 0
        lab = label
        try:
            if path is None:
                while steps < budget:
                    lab = ops[lab]()
                    steps += 1
            else:
                append = path.append
                while steps < budget:
                    lab = ops[lab]()
                    steps += 1
                    append(lab)
        except _Halted:
            return lab, steps, "halted"
        except _Looping:
            return lab, steps, "looping"
        except _Branching:
            if stop_at_branch:
                return lab, steps, "branching"
            raise MachineError(
                f"non-deterministic instruction at label {lab} in a deterministic run"
            ) from None
        if lab == self.stop:
            return lab, steps, "halted"
        return lab, steps, "budget_exhausted"

    def successors(self, c: Configuration) -> list[Configuration]:
        """All successor configurations of ``c`` (empty at stop or when blocked)."""
        label = self.load(c)
        kind = self.kinds[label]
        if kind == "stop":
            return []
        if kind == "ndb":
            a, b = self.branch[label]
            return [Configuration(a, c.tapes), Configuration(b, c.tapes)]
        if kind == "nu":
            if self.oracle is None:
                raise MachineError("nu instruction executed without an oracle")
            set_, args, nxt = self.branch[label]
            out = []
            for v in _candidates(self.oracle, args(), self.nu_semantics, self.guess_bound):
                self.load(c)
                set_(v)
                out.append(self.snapshot(nxt))
            return out
        if kind == "loop":
            return [c]
        return [self.snapshot(self.ops[label]())]


def _machine_for(p: Program, model: StructureModel, c: Configuration, oracle=None, **kw) -> Machine:
    if oracle is None and p.machine_class == "NU" and p.oracle:
        oracle = resolve_oracle(p.oracle, model)
    return Machine(p, model, [t.fill for t in c.tapes], oracle=oracle, **kw)


# ---------------------------------------------------------------------------
# public operations


def step(p: Program, model: StructureModel, oracle: OracleSet | None, c: Configuration,
         nu_semantics: str = "first", guess_bound: int = 4) -> list[Configuration]:
    if not 1 <= c.label <= p.length:
        raise MachineError(f"label {c.label} outside 1..{p.length}")
    m = _machine_for(p, model, c, oracle, nu_semantics=nu_semantics, guess_bound=guess_bound)
    return m.successors(c)


def nu_successors(oracle: OracleSet, c: Configuration, dst, *, next_label: int | None = None,
                  args: tuple = (), semantics: str = "first", bound: int = 4) -> list[Configuration]:
    """Successors of a nu instruction writing into ``dst`` (a ``ZReg``/``ZInd``).

    ``next_label`` defaults to ``c.label + 1``; ``args`` are the argument
    values used by the relational semantics.
    """
    nxt = c.label + 1 if next_label is None else next_label
    out = []
    for v in _candidates(oracle, tuple(args), semantics, bound):
        tapes = list(c.tapes)
        t = tapes[dst.tape - 1]
        pos = dst.j if isinstance(dst, ZReg) else tapes[dst.via.tape - 1].index[dst.via.j - 1]
        cells = list(t.cells)
        if pos > len(cells):
            cells.extend([t.fill] * (pos - len(cells)))
        cells[pos - 1] = v
        tapes[dst.tape - 1] = Tape(t.index, tuple(cells), t.fill)
        out.append(Configuration(nxt, tuple(tapes)))
    return out


@dataclass(frozen=True)
class RunResult:
    status: str
    path: PathRecord
    final: Configuration
    output: tuple | None
    steps: int

    @property
    def halted(self) -> bool:
        return self.status == "halted"


def run_deterministic(p: Program, model: StructureModel, x: Sequence[Any], budget: int | None = None,
                      *, record_path: bool = True, stop_on_static_loop: bool = False,
                      start: Configuration | None = None) -> RunResult:
    """Run a deterministic program on input ``x`` for at most ``budget`` steps."""
    if p.machine_class not in ("DET",):
        raise MachineError(f"run_deterministic needs a DET program, got {p.machine_class}")
    budget = default_budget() if budget is None else budget
    c0 = start if start is not None else input_config(p, x)
    m = _machine_for(p, model, c0, stop_on_static_loop=stop_on_static_loop)
    label = m.load(c0)
    path = [label] if record_path else None
    lab, steps, status = m.run(label, budget, path)
    final = m.snapshot(lab)
    out = output_of(final) if status == "halted" else None
    labels = tuple(path) if path is not None else (lab,)
    return RunResult(status, PathRecord(labels, status), final, out, steps)


def trace_configurations(p: Program, model: StructureModel, x: Sequence[Any], budget: int | None = None,
                         oracle: OracleSet | None = None) -> list[Configuration]:
    """Configuration sequence of a deterministic run, up to halt or ``budget`` steps."""
    budget = default_budget() if budget is None else budget
    c = input_config(p, x)
    m = _machine_for(p, model, c, oracle)
    trace = [c]
    for _ in range(budget):
        if m.kinds[c.label] in ("ndb", "nu"):
            raise MachineError(f"non-deterministic instruction at label {c.label} in a trace")
        succ = m.successors(c)
        if not succ:
            break
        c = succ[0]
        trace.append(c)
    return trace


@dataclass
class ExploreResult:
    accepting: PathRecord | None
    accepting_config: Configuration | None
    nodes: int
    max_depth: int
    complete: bool
    blocked: int = 0
    outputs: list = field(default_factory=list)
    halting_configs: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.accepting is not None


def _det_cycle(m: Machine, c: Configuration, limit: int) -> bool:
    """True if the deterministic run from ``c`` provably revisits ``c``."""
    lab = m.load(c)
    try:
        for _ in range(limit):
            if m.kinds[lab] != "det":
                return m.kinds[lab] == "loop"
            lab = m.ops[lab]()
            if lab == c.label and m.snapshot(lab) == c:
                return True
    except _Looping:
        return True
    except _Halted:
        return False
    return False


def explore(p: Program, model: StructureModel, x: Sequence[Any], budget: ExplorationBudget | None = None,
            oracle: OracleSet | None = None, *, nu_semantics: str = "first", collect: bool = False,
            dedup: bool = True) -> ExploreResult:
    """Breadth-first search of the computation tree (forest for DND) of ``p`` on ``x``.

    Successors are visited in textual order. Deterministic stretches are
    executed in one go, so tree nodes are the roots, the halting
    configurations and the configurations at label or nu guesses; depth
    still counts instructions. ``complete`` is true when no reachable
    configuration was cut off by the budget. With ``collect`` the search
    continues past the first accepting path and gathers the outputs of
    every halting configuration.
    """
    budget = budget or ExplorationBudget()
    if p.machine_class == "DND":
        roots = input_configs_dnd(p, x, model, budget.guess_length_bound)
    else:
        roots = [input_config(p, x)]
    if p.machine_class == "DET":
        return _explore_det(p, model, roots[0], budget, collect)
    m = _machine_for(p, model, roots[0], oracle, nu_semantics=nu_semantics, guess_bound=budget.guess_length_bound,
                     stop_on_static_loop=True)
    stop = p.stop_label
    kinds = m.kinds
    parents: list[int] = []
    segments: list[tuple] = []
    seen: set = set()
    queue: deque = deque()
    for r in roots:
        if dedup:
            if r in seen:
                continue
            seen.add(r)
        parents.append(-1)
        segments.append((r.label,))
        queue.append((r, len(segments) - 1, 0))
    res = ExploreResult(None, None, len(segments), 0, True)
    found_outputs: dict = {}

    def path_to(i: int) -> tuple:
        parts = []
        while i >= 0:
            parts.append(segments[i])
            i = parents[i]
        return tuple(lab for seg in reversed(parts) for lab in seg)

    def add(c: Configuration, parent: int, segment: tuple, depth: int) -> bool:
        if dedup:
            if c in seen:
                return True
            seen.add(c)
        if len(segments) >= budget.max_nodes:
            res.complete = False
            queue.clear()
            return False
        parents.append(parent)
        segments.append(segment)
        queue.append((c, len(segments) - 1, depth))
        return True

    while queue:
        c, idx, depth = queue.popleft()
        res.max_depth = max(res.max_depth, depth)
        if c.label == stop:
            if res.accepting is None:
                res.accepting = PathRecord(path_to(idx), "halted")
                res.accepting_config = c
                if not collect:
                    res.complete = False if queue else res.complete
                    break
            out = output_of(c)
            if out not in found_outputs:
                found_outputs[out] = True
                res.outputs.append(out)
                res.halting_configs.append(c)
            continue
        if depth >= budget.max_steps:
            res.complete = False
            continue
        kind = kinds[c.label]
        if kind == "loop":
            continue
        if kind == "det":
            chain: list = []
            lab, steps, status = m.run(m.load(c), budget.max_steps - depth, chain, stop_at_branch=True)
            if status == "looping":
                continue
            end = m.snapshot(lab)
            if status == "budget_exhausted":
                if not _det_cycle(m, end, min(budget.max_steps, 10_000)):
                    res.complete = False
                continue
            add(end, idx, tuple(chain), depth + steps)
            continue
        succ = m.successors(c)
        if not succ:
            res.blocked += 1
            continue
        for s_ in succ:
            if not add(s_, idx, (s_.label,), depth + 1):
                break
    res.nodes = len(segments)
    return res


def _explore_det(p: Program, model: StructureModel, c0: Configuration, budget: ExplorationBudget,
                 collect: bool) -> ExploreResult:
    m = _machine_for(p, model, c0, stop_on_static_loop=True)
    label = m.load(c0)
    path = [label]
    lab, steps, status = m.run(label, budget.max_steps, path)
    final = m.snapshot(lab)
    res = ExploreResult(None, None, steps + 1, steps, status == "halted")
    if status == "halted":
        res.accepting = PathRecord(tuple(path), "halted")
        res.accepting_config = final
        res.outputs.append(output_of(final))
        res.halting_configs.append(final)
    elif status == "looping" or _det_cycle(m, final, min(budget.max_steps, 10_000)):
        res.complete = True
    return res


def halting_table(p: Program, model: StructureModel, corpus: Iterable[Sequence[Any]],
                  budget: ExplorationBudget | int | None = None, oracle: OracleSet | None = None,
                  collect: bool = False) -> dict:
    """Input -> ExploreResult for every corpus entry."""
    if isinstance(budget, int):
        budget = ExplorationBudget(max_steps=budget)
    return {tuple(x): explore(p, model, x, budget, oracle, collect=collect) for x in corpus}


def trace_to_text(trace: Sequence[Configuration], model: StructureModel | None = None) -> str:
    return "".join(f"{t}: {format_configuration(c, model)}\n" for t, c in enumerate(trace))


def trace_to_json(trace: Sequence[Configuration], model: StructureModel | None = None) -> str:
    return json.dumps([configuration_to_json(c, model) for c in trace], indent=1)
