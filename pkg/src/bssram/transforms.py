"""Program-to-program constructions between machine classes.

Every construction returns a ``TransformReport`` whose ``output`` passes
``validate``. Constructions are assembled with ``Builder`` over symbolic
labels, so the numeric layout of the result is fixed only at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

from .program import (
    Builder, ConstAssign, Copy, Goto, IReg, IndexBranch, IndexCopy, IndexDiv2, IndexInc,
    IndexMod2, IndexPow2, IndexSet, IndexSetOne, Init, Instruction, NdbGoto, NuGuess,
    OpApply, Program, ProgramError, RelBranch, Stop, TapeCopy, ZInd, ZReg, check_valid,
    falls_through, format_instruction, instruction_refs, is_branch, make_program,
    max_static_z, retag_instruction, with_targets,
)
from .runtime import run_deterministic
from .structures import StructureModel

__all__ = [
    "TransformError", "TransformReport", "TRANSFORMS",
    "attach_accept_c1", "attach_accept_c2", "compose_chi_then_recognizer", "pseudo_parallel_chi",
    "co_semi_from_singleton", "chi_from_singleton_path", "chi_from_singleton_counter",
    "chi_id_from_semi_2tape", "chi_id_from_semi_3tape", "chi_const_from_semi",
    "determinize_ndb", "nu_to_ndb", "ndb_to_nu_identity", "ndb_to_nu_recognizers",
    "dnd_to_nu", "nu_to_dnd",
]


class TransformError(ProgramError):
    """A construction's precondition does not hold."""


@dataclass(frozen=True)
class TransformReport:
    output: Program
    label_map: dict
    register_map: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    contract: str = ""

    def to_json(self) -> dict:
        return {
            "construction": self.provenance.get("construction"),
            "parameters": {k: v for k, v in self.provenance.items() if k != "construction"},
            "labels": self.output.length,
            "class": self.output.machine_class,
            "dialect": self.output.dialect,
            "label_map": {str(k): v for k, v in sorted(self.label_map.items())},
            "register_map": dict(self.register_map),
            "contract": self.contract,
        }


def I(t: int, j: int) -> IReg:
    return IReg(t, j)


def Z(t: int, j: int) -> ZReg:
    return ZReg(t, j)


# ---------------------------------------------------------------------------
# shared helpers


def _require_class(p: Program, *classes: str, what: str) -> None:
    if p.machine_class not in classes:
        raise TransformError(f"{what} must be {' or '.join(classes)}, got {p.machine_class}")


def _require_one_tape(p: Program, what: str) -> None:
    if p.tape_count != 1:
        raise TransformError(f"{what} must be a 1-tape program, got {p.tape_count} tapes")


def _identity(p: Program) -> int:
    rel = p.signature.identity_rel_index
    if rel is None:
        raise TransformError("the signature has no identity relation")
    return rel


def _to_tape(t: int) -> Callable[[int], int]:
    return lambda old: t if old == 1 else old


Hook = Callable[[Builder, int, Instruction], None]


def _embed(b: Builder, p: Program, tag: Hashable, *, tape: int | None = None,
           before: Hook | None = None, after_inc: Callable[[Builder], None] | None = None,
           gadget: Callable[[Builder, int, Instruction], bool] | None = None) -> None:
    """Emit instructions 1..L-1 of ``p`` under labels ``(tag, l)``; jumps to L mean ``(tag, L)``.

    The caller marks ``(tag, L)`` on whatever replaces the stop. ``before``
    emits instrumentation ahead of every instruction, ``after_inc`` right
    after every index increment, and ``gadget`` may replace an instruction
    (returning True when it did).
    """
    for label in range(1, p.length):
        ins = p.at(label)
        b.mark((tag, label))
        if before is not None:
            before(b, label, ins)
        if gadget is not None and gadget(b, label, ins):
            continue
        new = retag_instruction(ins, _to_tape(tape)) if tape is not None else ins
        b.emit(with_targets(new, lambda t: (tag, t)))
        if after_inc is not None and isinstance(ins, IndexInc):
            after_inc(b)
    b.mark()


def _label_map(b: Builder, p: Program, tag: Hashable) -> dict:
    out = {}
    for label in p.labels():
        try:
            out[label] = b.resolve((tag, label))
        except ProgramError:
            pass
    return out


def _finish(b: Builder, p: Program, *, name: str, label_maps: dict | None = None, register_map: dict | None = None,
            provenance: dict, contract: str, **kwargs: Any) -> TransformReport:
    out = b.build(p.signature, name=name, **kwargs)
    try:
        check_valid(out)
    except ProgramError as exc:  # pragma: no cover - construction bug
        raise TransformError(f"construction produced an invalid program: {exc}") from None
    return TransformReport(out, label_maps or {}, register_map or {}, provenance, contract)


def _emit_answer(b: Builder, const: int, mark: Hashable, stop: Hashable | None) -> None:
    """``I{1,1} := 1; Z{1,1} := c_const`` then jump to ``stop`` (or fall through when None)."""
    b.emit(IndexSetOne(I(1, 1)), mark)
    b.emit(ConstAssign(Z(1, 1), const))
    if stop is not None:
        b.emit(Goto(stop))


def _emit_fresh_input(b: Builder, tape: int, p: Program, src, high: IReg) -> None:
    """Make ``tape`` look like the input configuration of a single value ``src``.

    Index registers 1..k go to 1, static cells 1..J receive ``src`` and the
    high-water register ``high`` is set to J; every later index increment of
    the embedded program must be followed by ``Init(Z{tape,[high]}, src)``.
    """
    for j in range(1, p.registers[0] + 1):
        b.emit(IndexSetOne(I(tape, j)))
    J = max(1, max_static_z(p.instructions))
    for j in range(1, J + 1):
        b.emit(Copy(Z(tape, j), src))
    b.emit(IndexSet(high, J))


# ---------------------------------------------------------------------------
# attach an acceptance test to a computing program


def _attach_accept(p: Program, const: int, accept_on_equal: bool, name: str) -> TransformReport:
    rel = _identity(p)
    L = p.length
    b = Builder()
    _embed(b, p, "p")
    b.mark(("p", L))
    b.emit(ConstAssign(Z(1, 2), const))
    if accept_on_equal:
        b.emit(RelBranch(rel, (Z(1, 1), Z(1, 2)), "stop", "test"), "test")
    else:
        b.emit(RelBranch(rel, (Z(1, 1), Z(1, 2)), "test", "stop"), "test")
    b.emit(Stop(), "stop")
    return _finish(
        b, p, name=f"{p.name or 'p'}_{name}", label_maps=_label_map(b, p, "p"),
        registers=p.registers, machine_class=p.machine_class, oracle=p.oracle,
        provenance={"construction": name, "constant": const},
        contract=f"halts exactly on inputs whose output under the source {'is' if accept_on_equal else 'is not'} c{const}",
    )


def attach_accept_c1(p: Program, const: int = 1) -> TransformReport:
    """Replace stop by a loop that is left only when Z1 = c1: semi-decides the c1-output set."""
    return _attach_accept(p, const, True, "attach_accept_c1")


def attach_accept_c2(p: Program, const: int = 1) -> TransformReport:
    """Dual of ``attach_accept_c1``: loops while Z1 = c1, so it semi-decides the c2-output set of a
    characteristic-function program."""
    return _attach_accept(p, const, False, "attach_accept_c2")


# ---------------------------------------------------------------------------
# composition of a characteristic function with a recognizer


def compose_chi_then_recognizer(chi: Program, rec: Program, which: int = 1) -> TransformReport:
    """Run ``chi``, then run ``rec`` on the single value chi left in Z1.

    ``rec`` runs on tape 2. Its input configuration (c(Z1), c(Z1), ...) is
    built lazily: static cells 1..J are filled up front and each of rec's
    index increments is followed by an init of the next fresh cell.
    """
    _require_class(chi, "DET", what="chi")
    _require_class(rec, "DET", what="rec")
    _require_one_tape(chi, "chi")
    _require_one_tape(rec, "rec")
    if which not in (1, 2):
        raise TransformError("which must be 1 or 2")
    k = rec.registers[0]
    high = I(2, k + 1)
    b = Builder()
    _embed(b, chi, "chi")
    b.mark(("chi", chi.length))
    _emit_fresh_input(b, 2, rec, Z(1, 1), high)
    inits = [0]

    def init(bb: Builder) -> None:
        inits[0] += 1
        bb.emit(Init(ZInd(2, high), Z(1, 1)))

    _embed(b, rec, "rec", tape=2, after_inc=init)
    b.mark(("rec", rec.length))
    b.emit(Stop())
    return _finish(
        b, chi, name=f"{chi.name or 'chi'}_then_{rec.name or 'rec'}",
        label_maps={"chi": _label_map(b, chi, "chi"), "rec": _label_map(b, rec, "rec")},
        register_map={f"I{j}": f"I{{2,{j}}}" for j in range(1, k + 1)} | {"high-water": f"I{{2,{k + 1}}}"},
        provenance={"construction": "compose_chi_then_recognizer", "which": which, "inits": inits[0]},
        contract=f"halts exactly on inputs x such that chi(x) is accepted by rec (rec semi-decides {{c{which}}})",
    )


# ---------------------------------------------------------------------------
# pseudo-parallel simulation of two programs


@dataclass
class _Thread:
    prog: Program
    tape: int
    resume: IReg
    tag: Hashable
    halt: Hashable
    halt_direct: bool = True
    init: Instruction | None = None


def _emit_dispatch(b: Builder, th: _Thread, counter: IReg) -> None:
    """``if resume = i then goto i`` for every label i, unrolled over ``counter``."""
    L = th.prog.length
    b.emit(IndexSetOne(counter), (th.tag, "dispatch"))
    for label in range(1, L):
        b.emit(IndexBranch(counter, th.resume, (th.tag, label), (th.tag, "d", label)))
        b.emit(IndexInc(counter), (th.tag, "d", label))
    b.emit(Goto(th.halt))


def _emit_thread(b: Builder, th: _Thread, other: _Thread) -> None:
    """One copy of the thread's program; every executed instruction ends in a
    return stub that stores the next label and switches to the other thread."""
    p = th.prog
    ret = lambda t: (th.tag, "ret", t)  # noqa: E731
    for label in range(1, p.length):
        ins = retag_instruction(p.at(label), _to_tape(th.tape))
        b.mark((th.tag, label))
        if isinstance(ins, Goto):
            b.emit(Goto(ret(ins.target)))
            continue
        b.emit(with_targets(ins, ret))
        if isinstance(ins, IndexInc) and th.init is not None:
            b.emit(th.init)
        if falls_through(ins):
            b.emit(Goto(ret(label + 1)))
    for t in range(1, p.length + 1):
        b.emit(IndexSet(th.resume, t), ret(t))
        if t == p.length and th.halt_direct:
            b.emit(Goto(th.halt))
        else:
            b.emit(Goto((other.tag, "dispatch")))


def _emit_pseudo_parallel(b: Builder, first: _Thread, second: _Thread, counter: IReg) -> Hashable:
    """Emit both dispatchers and both thread copies; returns the entry symbol.

    ``first`` executes one instruction, then ``second`` one, and so on.
    Resume registers start at 1, so the caller only has to reset them when
    the engine is entered more than once.
    """
    _emit_dispatch(b, first, counter)
    _emit_dispatch(b, second, counter)
    _emit_thread(b, first, second)
    _emit_thread(b, second, first)
    return (first.tag, "dispatch")


def pseudo_parallel_chi(semi_p: Program, semi_cop: Program, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Interleave a semi-decider of P (tape 1) and of its complement (tape 2).

    The complement thread runs first in every round; whichever thread
    reaches its stop decides the output c1 (P) or c2 (complement).
    """
    for name, p in (("semi_p", semi_p), ("semi_cop", semi_cop)):
        _require_class(p, "DET", what=name)
        _require_one_tape(p, name)
    b = Builder()
    b.emit(TapeCopy(2, 1))
    yes = _Thread(semi_p, 1, I(3, 1), "p1", "yes")
    no = _Thread(semi_cop, 2, I(3, 2), "p2", "no")
    b.emit(Goto((no.tag, "dispatch")))
    _emit_pseudo_parallel(b, no, yes, I(3, 3))
    _emit_answer(b, pair[0], "yes", "stop")
    _emit_answer(b, pair[1], "no", "stop")
    b.emit(Stop(), "stop")
    return _finish(
        b, semi_p, name="pseudo_parallel_chi",
        label_maps={"semi_p": _label_map(b, semi_p, "p1"), "semi_cop": _label_map(b, semi_cop, "p2")},
        register_map={"semi_p": "tape 1", "semi_cop": "tape 2", "resume": "I{3,1}, I{3,2}", "dispatch counter": "I{3,3}"},
        provenance={"construction": "pseudo_parallel_chi"},
        contract="computes chi_P when semi_p semi-decides P and semi_cop its complement",
    )


# ---------------------------------------------------------------------------
# constructions from the accepting path of a singleton recognizer


def _reference_path(semi: Program, model: StructureModel, x0: Sequence[Any], budget: int) -> tuple:
    _require_class(semi, "DET", what="semi")
    res = run_deterministic(semi, model, tuple(x0), budget)
    if not res.halted:
        raise TransformError(f"semi does not halt on x0 within {budget} steps")
    return res.path.labels


def _straight_line(semi: Program, path: tuple, exit_label: int) -> list[Instruction]:
    """Instructions 1..s-1 following ``path``; off-path branch exits go to ``exit_label``."""
    out = []
    for t, label in enumerate(path[:-1], start=1):
        ins = semi.at(label)
        nxt = path[t]
        if is_branch(ins):
            ins = with_targets(ins, lambda target: t + 1 if target == nxt else exit_label)
        elif isinstance(ins, Goto):
            ins = Goto(t + 1)
        out.append(ins)
    return out


def co_semi_from_singleton(semi: Program, model: StructureModel, x0: Sequence[Any], budget: int = 10_000) -> TransformReport:
    """Unroll semi's accepting path on x0; leaving the path halts, completing it loops."""
    path = _reference_path(semi, model, x0, budget)
    s = len(path)
    ins = _straight_line(semi, path, s + 1) + [Goto(s), Stop()]
    out = make_program(ins, semi.signature, name=f"{semi.name or 'semi'}_co_singleton", registers=semi.registers)
    check_valid(out)
    return TransformReport(
        out, {t: t for t in range(1, s + 1)}, {},
        {"construction": "co_semi_from_singleton", "x0": tuple(map(model.format_value, x0)), "path": path},
        "semi-decides the complement of {x0}",
    )


def chi_from_singleton_path(semi: Program, model: StructureModel, x0: Sequence[Any], budget: int = 10_000,
                            pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Unrolled accepting path with answer tail: c1 at the path's end, c2 on every exit."""
    path = _reference_path(semi, model, x0, budget)
    s = len(path)
    tail = [
        ConstAssign(Z(1, 1), pair[0]),  # s
        Goto(s + 3),                    # s+1
        ConstAssign(Z(1, 1), pair[1]),  # s+2
        IndexSetOne(I(1, 1)),           # s+3
        Stop(),                         # s+4
    ]
    ins = _straight_line(semi, path, s + 2) + tail
    out = make_program(ins, semi.signature, name=f"{semi.name or 'semi'}_chi_path", registers=semi.registers)
    check_valid(out)
    return TransformReport(
        out, {t: t for t in range(1, s + 1)}, {},
        {"construction": "chi_from_singleton_path", "x0": tuple(map(model.format_value, x0)), "path": path},
        "computes chi_{x0}",
    )


def chi_from_singleton_counter(semi: Program, s0: int, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Count semi's steps and answer c1 iff it stops after exactly s0 - 1 instructions.

    The count is also checked before every instruction, so runs longer
    than the reference path are cut off with c2.
    """
    _require_class(semi, "DET", what="semi")
    _require_one_tape(semi, "semi")
    if s0 < 2:
        raise TransformError("s0 must be at least 2")
    k = semi.registers[0]
    target, count = I(1, k + 1), I(1, k + 2)
    b = Builder()
    b.emit(IndexBranch(I(1, 1), I(1, 2), "start", "no"))
    b.emit(IndexSet(target, s0), "start")

    def before(bb: Builder, label: int, ins: Instruction) -> None:
        bb.emit(IndexBranch(count, target, "no", ("inc", label)))
        bb.emit(IndexInc(count), ("inc", label))

    _embed(b, semi, "s", before=before)
    b.mark(("s", semi.length))
    b.emit(IndexBranch(target, count, "yes", "no"))
    _emit_answer(b, pair[1], "no", "stop")
    _emit_answer(b, pair[0], "yes", None)
    b.emit(Stop(), "stop")
    return _finish(
        b, semi, name=f"{semi.name or 'semi'}_chi_counter", label_maps=_label_map(b, semi, "s"),
        register_map={"target": f"I{k + 1}", "counter": f"I{k + 2}"},
        provenance={"construction": "chi_from_singleton_counter", "s0": s0},
        contract="computes chi_{x0} when s0 is the length of semi's accepting path on x0",
    )


# ---------------------------------------------------------------------------
# characteristic function of identity from a semi-decider of identity


def _chi_counter_2tape(semi: Program, first: Instruction, co: bool, name: str, pair: tuple[int, int],
                       provenance: dict, contract: str) -> TransformReport:
    _require_class(semi, "DET", what="semi")
    _require_one_tape(semi, "semi")
    k = semi.registers[0]
    K = k + 1
    c1, c2 = I(1, K), I(2, K)
    b = Builder()
    b.emit(first)
    b.emit(IndexBranch(I(1, 1), I(2, 1), ("ref", 1), "no"))
    _embed(b, semi, "ref", tape=2, before=lambda bb, label, ins: bb.emit(IndexInc(c2)))
    b.mark(("ref", semi.length))
    b.emit(IndexInc(c2))

    def guard(bb: Builder, label: int, ins: Instruction) -> None:
        bb.emit(IndexBranch(c1, c2, "no", ("inc", label)))
        bb.emit(IndexInc(c1), ("inc", label))

    _embed(b, semi, "run", tape=1, before=guard)
    b.mark(("run", semi.length))
    b.emit(IndexInc(c1))
    if co:
        b.emit(IndexBranch(c2, c1, "cmp", "stop"), "cmp")
        b.emit(Stop(), "stop", "no")
    else:
        b.emit(IndexBranch(c2, c1, "yes", "no"))
        _emit_answer(b, pair[1], "no", "stop")
        _emit_answer(b, pair[0], "yes", None)
        b.emit(Stop(), "stop")
    return _finish(
        b, semi, name=name,
        label_maps={"reference": _label_map(b, semi, "ref"), "run": _label_map(b, semi, "run")},
        register_map={"reference copy": "tape 2", "run copy": "tape 1", "step counters": f"I{{1,{K}}}, I{{2,{K}}}"},
        provenance=provenance, contract=contract,
    )


def chi_id_from_semi_2tape(semi_id: Program, co: bool = False, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Compare step counts of semi_id on (x2, x2) (tape 2) and on (x1, x2) (tape 1).

    With ``co=True`` the answer tail is replaced by a loop on equal counts,
    giving a semi-decider of the complement of identity.
    """
    return _chi_counter_2tape(
        semi_id, IndexInc(I(2, 1)), co, f"{semi_id.name or 'semi'}_{'co_' if co else ''}chi_id_2tape", pair,
        {"construction": "chi_id_from_semi_2tape", "co": co},
        "semi-decides the complement of identity" if co else "computes chi_id on pairs",
    )


def chi_const_from_semi(semi_const: Program, const_index: int, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """The 2-tape counter construction with the reference run on the constant c_i itself."""
    if not 1 <= const_index <= semi_const.signature.constant_count:
        raise TransformError(f"unknown constant c{const_index}")
    return _chi_counter_2tape(
        semi_const, ConstAssign(Z(2, 1), const_index), False, f"{semi_const.name or 'semi'}_chi_c{const_index}", pair,
        {"construction": "chi_const_from_semi", "const_index": const_index},
        f"computes chi of {{c{const_index}}}",
    )


def chi_id_from_semi_3tape(semi_id: Program, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Pseudo-parallel run of semi_id on (x2, x2) (tape 2, first) and (x1, x2) (tape 1).

    Equal resume registers at the comparison mean both threads stopped in
    the same round, i.e. after the same number of steps.
    """
    _require_class(semi_id, "DET", what="semi_id")
    _require_one_tape(semi_id, "semi_id")
    b = Builder()
    b.emit(IndexInc(I(2, 1)))
    ref = _Thread(semi_id, 2, I(3, 2), "ref", "cmp", halt_direct=False)
    run = _Thread(semi_id, 1, I(3, 1), "run", "cmp", halt_direct=True)
    b.emit(IndexBranch(I(1, 1), I(2, 1), (ref.tag, "dispatch"), "no"))
    _emit_pseudo_parallel(b, ref, run, I(3, 3))
    b.emit(IndexBranch(I(3, 1), I(3, 2), "yes", "no"), "cmp")
    _emit_answer(b, pair[0], "yes", "stop")
    _emit_answer(b, pair[1], "no", None)
    b.emit(Stop(), "stop")
    return _finish(
        b, semi_id, name=f"{semi_id.name or 'semi'}_chi_id_3tape",
        label_maps={"reference": _label_map(b, semi_id, "ref"), "run": _label_map(b, semi_id, "run")},
        register_map={"reference": "tape 2", "run": "tape 1", "resume": "I{3,1}, I{3,2}", "dispatch counter": "I{3,3}"},
        provenance={"construction": "chi_id_from_semi_3tape"},
        contract="computes chi_id on pairs",
    )


# ---------------------------------------------------------------------------
# determinization of label guessing


def determinize_ndb(ndb: Program, max_rounds: int | None = None) -> TransformReport:
    """Deterministic 2-tape program that halts iff some branch of ``ndb`` halts.

    Round t tries every code s in [2^t, 2^(t+1)). An attempt restarts the
    simulation on tape 2 from a fresh copy of the input and runs exactly t
    instructions; each ``goto l1 or goto l2`` consumes the lowest remaining
    bit of s (1 selects l1). ``max_rounds`` caps t; past the cap the
    program parks in a self-loop.
    """
    _require_class(ndb, "NDB", "DET", what="ndb")
    _require_one_tape(ndb, "ndb")
    if any(isinstance(i, NuGuess) for i in ndb.instructions):
        raise TransformError("ndb contains nu instructions")
    k = ndb.registers[0]
    J = max(1, max_static_z(ndb.instructions))
    t, bound, s, quot, bit, one, tmp, cap = (I(1, j) for j in range(2, 10))
    high = I(2, k + 1)
    fill = ZInd(1, I(1, 1))
    b = Builder()
    if max_rounds is not None:
        if max_rounds < 1:
            raise TransformError("max_rounds must be positive")
        b.emit(IndexSet(cap, max_rounds + 1))
        b.emit(IndexBranch(t, cap, "sink", "round_go"), "round")
        b.mark("round_go")
    else:
        b.mark("round")
    b.emit(IndexCopy(tmp, t))
    b.emit(IndexInc(tmp))
    b.emit(IndexPow2(bound, tmp))
    b.emit(IndexPow2(s, t))
    b.emit(IndexBranch(s, bound, "next_round", "restart"), "attempt")
    b.emit(TapeCopy(2, 1), "restart")
    for j in range(2, k + 1):
        b.emit(IndexSetOne(I(2, j)))
    b.emit(IndexCopy(high, I(1, 1)))
    for _ in range(J):
        b.emit(Init(ZInd(2, high), fill))
    b.emit(IndexCopy(quot, s))

    def before(bb: Builder, label: int, ins: Instruction) -> None:
        bb.emit(IndexBranch(quot, one, "abort", ("go", label)))
        bb.mark(("go", label))

    def gadget(bb: Builder, label: int, ins: Instruction) -> bool:
        if isinstance(ins, NdbGoto):
            bb.emit(IndexMod2(bit, quot))
            bb.emit(IndexDiv2(quot))
            bb.emit(IndexBranch(bit, one, ("sim", ins.first), ("sim", ins.second)))
            return True
        bb.emit(IndexDiv2(quot))
        return False

    _embed(b, ndb, "sim", tape=2, before=before, gadget=gadget,
           after_inc=lambda bb: bb.emit(Init(ZInd(2, high), fill)))
    b.emit(Goto("stop"), ("sim", ndb.length))
    b.emit(IndexInc(s), "abort")
    b.emit(Goto("attempt"))
    b.emit(IndexInc(t), "next_round")
    b.emit(Goto("round"))
    if max_rounds is not None:
        b.emit(Goto("sink"), "sink")
    b.emit(Stop(), "stop")
    return _finish(
        b, ndb, name=f"{ndb.name or 'ndb'}_det", label_maps=_label_map(b, ndb, "sim"),
        register_map={
            "round t": "I{1,2}", "code bound 2^(t+1)": "I{1,3}", "code s": "I{1,4}", "quotient": "I{1,5}",
            "bit": "I{1,6}", "constant 1": "I{1,7}", "scratch": "I{1,8}", "round cap": "I{1,9}",
            "simulated registers": f"I{{2,1..{k}}}", "high-water": f"I{{2,{k + 1}}}",
        },
        machine_class="DET", dialect="extended",
        provenance={"construction": "determinize_ndb", "max_rounds": max_rounds, "bit_order": "lsb-first, 1 selects first"},
        contract="halts on x iff some computation path of ndb on x halts (within max_rounds steps when capped)",
    )


# ---------------------------------------------------------------------------
# translations between guessing mechanisms


_PAIR_ORACLES = ("c1c2_2", "c1c2_inf")


def nu_to_ndb(nu_p: Program, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Replace every nu instruction by a label guess between writing c1 and c2."""
    _require_class(nu_p, "NU", "NDB", "DET", what="nu_p")
    if nu_p.machine_class == "NU" and nu_p.oracle not in _PAIR_ORACLES:
        raise TransformError(f"oracle {nu_p.oracle!r} is not {{c1,c2}}^2 or {{c1,c2}}^inf")
    b = Builder()
    guesses = [0]

    def gadget(bb: Builder, label: int, ins: Instruction) -> bool:
        if not isinstance(ins, NuGuess):
            return False
        guesses[0] += 1
        nxt = ("p", label + 1)
        bb.emit(NdbGoto(("g1", label), ("g2", label)))
        bb.emit(ConstAssign(ins.dst, pair[0]), ("g1", label))
        bb.emit(NdbGoto(nxt, nxt))
        bb.emit(ConstAssign(ins.dst, pair[1]), ("g2", label))
        bb.emit(NdbGoto(nxt, nxt))
        return True

    _embed(b, nu_p, "p", gadget=gadget)
    b.emit(Stop(), ("p", nu_p.length))
    return _finish(
        b, nu_p, name=f"{nu_p.name or 'nu'}_ndb", label_maps=_label_map(b, nu_p, "p"),
        registers=nu_p.registers, machine_class="NDB",
        provenance={"construction": "nu_to_ndb", "guesses": guesses[0]},
        contract="same bounded acceptance and result sets as the source",
    )


def ndb_to_nu_identity(ndb: Program, pair: tuple[int, int] = (1, 2)) -> TransformReport:
    """Replace every label guess by a nu guess compared with c1 through the identity relation.

    Scratch cells j, j+1, j+2 live above every cell the source can touch:
    registers I_{k+1..k+3} start at n + J + 1 and move up with every index
    increment of the source. After the comparison both used cells are
    reset from the untouched third one.
    """
    rel = _identity(ndb)
    _require_one_tape(ndb, "ndb")
    k = ndb.registers[0]
    J = max_static_z(ndb.instructions)
    sj, sj1, sj2 = I(1, k + 1), I(1, k + 2), I(1, k + 3)
    has_guess = any(isinstance(i, NdbGoto) for i in ndb.instructions)
    b = Builder()
    if has_guess:
        b.emit(IndexCopy(sj, I(1, 1)))
        for _ in range(J + 1):
            b.emit(IndexInc(sj))
        b.emit(IndexCopy(sj1, sj))
        b.emit(IndexInc(sj1))
        b.emit(IndexCopy(sj2, sj1))
        b.emit(IndexInc(sj2))
    zj, zj1, zj2 = ZInd(1, sj), ZInd(1, sj1), ZInd(1, sj2)
    guesses = [0]

    def gadget(bb: Builder, label: int, ins: Instruction) -> bool:
        if not isinstance(ins, NdbGoto):
            return False
        guesses[0] += 1
        bb.emit(ConstAssign(zj, pair[0]))
        bb.emit(NuGuess(zj1, (zj,)))
        bb.emit(RelBranch(rel, (zj, zj1), ("l1", label), ("l2", label)))
        for side, target in (("l1", ins.first), ("l2", ins.second)):
            bb.emit(Copy(zj, zj2), (side, label))
            bb.emit(Copy(zj1, zj2))
            bb.emit(Goto(("p", target)))
        return True

    def after_inc(bb: Builder) -> None:
        if has_guess:
            for r in (sj, sj1, sj2):
                bb.emit(IndexInc(r))

    _embed(b, ndb, "p", gadget=gadget, after_inc=after_inc)
    b.emit(Stop(), ("p", ndb.length))
    dialect = "extended" if has_guess or ndb.dialect == "extended" else "core"
    return _finish(
        b, ndb, name=f"{ndb.name or 'ndb'}_nu_id", label_maps=_label_map(b, ndb, "p"),
        register_map={"scratch j, j+1, j+2": f"I{k + 1}, I{k + 2}, I{k + 3}"} if has_guess else {},
        machine_class="NU", oracle="c1c2_inf", dialect=dialect,
        provenance={"construction": "ndb_to_nu_identity", "guesses": guesses[0]},
        contract="same bounded acceptance and result sets as the source",
    )


def _check_recognizer(p: Program, what: str) -> None:
    _require_class(p, "DET", what=what)
    _require_one_tape(p, what)


def ndb_to_nu_recognizers(ndb: Program, semi_c1: Program, semi_pp: Program) -> TransformReport:
    """Replace every label guess by a nu guess that is classified by two recognizers.

    The main computation runs on tape 3. At a guess the value g lands in
    a scratch cell above everything the main computation uses; semi_c1
    (tape 1) and semi_pp (tape 2) then run pseudo-parallel on (g) and the
    first one to stop selects the first or the second alternative.
    """
    _require_one_tape(ndb, "ndb")
    _check_recognizer(semi_c1, "semi_c1")
    _check_recognizer(semi_pp, "semi_pp")
    k = ndb.registers[0]
    J = max_static_z(ndb.instructions)
    g, g1 = I(3, k + 1), I(3, k + 2)
    r1, r2, cnt = I(3, k + 3), I(3, k + 4), I(3, k + 5)
    h1, h2 = I(1, semi_c1.registers[0] + 1), I(2, semi_pp.registers[0] + 1)
    zg, zg1 = ZInd(3, g), ZInd(3, g1)
    has_guess = any(isinstance(i, NdbGoto) for i in ndb.instructions)
    b = Builder()
    b.emit(TapeCopy(3, 1))
    if has_guess:
        b.emit(IndexCopy(g, I(3, 1)))
        for _ in range(J + 1):
            b.emit(IndexInc(g))
        b.emit(IndexCopy(g1, g))
        b.emit(IndexInc(g1))
    guesses = [0]

    def gadget(bb: Builder, label: int, ins: Instruction) -> bool:
        if not isinstance(ins, NdbGoto):
            return False
        guesses[0] += 1
        bb.emit(ConstAssign(zg, 1))
        bb.emit(NuGuess(zg, (zg,)))
        _emit_fresh_input(bb, 1, semi_c1, zg, h1)
        _emit_fresh_input(bb, 2, semi_pp, zg, h2)
        bb.emit(IndexSetOne(r1))
        bb.emit(IndexSetOne(r2))
        yes = _Thread(semi_c1, 1, r1, ("c1", label), ("first", label), init=Init(ZInd(1, h1), zg))
        no = _Thread(semi_pp, 2, r2, ("pp", label), ("second", label), init=Init(ZInd(2, h2), zg))
        bb.emit(Goto((no.tag, "dispatch")))
        _emit_pseudo_parallel(bb, no, yes, cnt)
        for side, target in (("first", ins.first), ("second", ins.second)):
            bb.emit(Copy(zg, zg1), (side, label))
            bb.emit(Goto(("p", target)))
        return True

    def after_inc(bb: Builder) -> None:
        if has_guess:
            bb.emit(IndexInc(g))
            bb.emit(IndexInc(g1))

    _embed(b, ndb, "p", tape=3, gadget=gadget, after_inc=after_inc)
    b.mark(("p", ndb.length))
    b.emit(TapeCopy(1, 3))
    b.emit(Stop())
    return _finish(
        b, ndb, name=f"{ndb.name or 'ndb'}_nu_rec", label_maps=_label_map(b, ndb, "p"),
        register_map={
            "main computation": "tape 3", "semi_c1": "tape 1", "semi_pp": "tape 2",
            "guess cell": f"I{{3,{k + 1}}}", "restore cell": f"I{{3,{k + 2}}}",
            "resume": f"I{{3,{k + 3}}}, I{{3,{k + 4}}}", "dispatch counter": f"I{{3,{k + 5}}}",
        },
        machine_class="NU", oracle="c1c2_inf", dialect="extended",
        provenance={"construction": "ndb_to_nu_recognizers", "guesses": guesses[0]},
        contract="same bounded acceptance and result sets as the source when semi_c1 semi-decides {c1} "
                 "and semi_pp semi-decides a superset of {c2} avoiding c1",
    )


def dnd_to_nu(dnd: Program, semi_c1: Program | None = None, semi_pp: Program | None = None,
              guess_bound: int | None = None) -> TransformReport:
    """nu program that writes a guessed {c1,c2}-block after the input, then runs ``dnd``.

    The block length is chosen by label guesses, which are then replaced
    using the identity relation or, when given, the two recognizers.
    ``guess_bound`` caps the block length.
    """
    _require_class(dnd, "DND", what="dnd")
    _require_one_tape(dnd, "dnd")
    k = dnd.registers[0]
    cur, lim = I(1, k + 1), I(1, k + 2)
    b = Builder()
    b.emit(IndexCopy(cur, I(1, 1)))
    if guess_bound is not None:
        if guess_bound < 1:
            raise TransformError("guess_bound must be positive")
        b.emit(IndexCopy(lim, I(1, 1)))
        for _ in range(guess_bound):
            b.emit(IndexInc(lim))
    b.emit(IndexInc(cur), "more")
    b.emit(NuGuess(ZInd(1, cur)))
    if guess_bound is not None:
        b.emit(IndexBranch(cur, lim, ("p", 1), "choose"))
    b.emit(NdbGoto("more", ("p", 1)), "choose")
    _embed(b, dnd, "p")
    b.emit(Stop(), ("p", dnd.length))
    mixed = b.build(dnd.signature, name=dnd.name, machine_class="NDB", dialect="extended")
    if semi_c1 is not None and semi_pp is not None:
        inner = ndb_to_nu_recognizers(mixed, semi_c1, semi_pp)
    elif semi_c1 is None and semi_pp is None:
        inner = ndb_to_nu_identity(mixed)
    else:
        raise TransformError("give both recognizers or neither")
    pre = {label: b.resolve(("p", label)) for label in dnd.labels()}
    label_map = {label: inner.label_map[pre[label]] for label in dnd.labels() if pre[label] in inner.label_map}
    out = inner.output
    return TransformReport(
        Program(out.instructions, out.signature, out.registers, "NU", "c1c2_inf", out.dialect,
                f"{dnd.name or 'dnd'}_nu"),
        label_map,
        {"guess cursor": f"I{k + 1}", **({"block end": f"I{k + 2}"} if guess_bound else {}), **inner.register_map},
        {"construction": "dnd_to_nu", "guess_bound": guess_bound, "length_choice": inner.provenance["construction"]},
        "same bounded acceptance and result sets as the source (guess blocks up to guess_bound)",
    )


def nu_to_dnd(nu_p: Program, semi_pair: Program) -> TransformReport:
    """DND program reading pre-guessed values from the cells after the input.

    The source runs on tape 2. A cursor walks the guess block; each read
    value must first be accepted by ``semi_pair`` (a semi-decider of
    {c1, c2}, run on tape 3) so that running past the block into the fill
    cannot invent guesses outside {c1, c2}.
    """
    _require_class(nu_p, "NU", "DET", what="nu_p")
    _require_one_tape(nu_p, "nu_p")
    _check_recognizer(semi_pair, "semi_pair")
    if nu_p.machine_class == "NU" and nu_p.oracle not in _PAIR_ORACLES:
        raise TransformError(f"oracle {nu_p.oracle!r} is not {{c1,c2}}^2 or {{c1,c2}}^inf")
    cur = I(1, 2)
    high = I(3, semi_pair.registers[0] + 1)
    val = ZInd(1, cur)
    b = Builder()
    b.emit(TapeCopy(2, 1))
    b.emit(IndexCopy(cur, I(1, 1)))
    guesses = [0]

    def gadget(bb: Builder, label: int, ins: Instruction) -> bool:
        if not isinstance(ins, NuGuess):
            return False
        guesses[0] += 1
        bb.emit(IndexInc(cur))
        _emit_fresh_input(bb, 3, semi_pair, val, high)
        tag = ("chk", label)
        _embed(bb, semi_pair, tag, tape=3, after_inc=lambda b3: b3.emit(Init(ZInd(3, high), val)))
        bb.mark((tag, semi_pair.length))
        dst = retag_instruction(ConstAssign(ins.dst, 1), _to_tape(2)).dst
        bb.emit(Copy(dst, val))
        return True

    _embed(b, nu_p, "p", tape=2, gadget=gadget)
    b.mark(("p", nu_p.length))
    b.emit(TapeCopy(1, 2))
    b.emit(Stop())
    return _finish(
        b, nu_p, name=f"{nu_p.name or 'nu'}_dnd", label_maps=_label_map(b, nu_p, "p"),
        register_map={"source": "tape 2", "guess cursor": "I{1,2}", "pair check": "tape 3"},
        machine_class="DND", dialect="extended",
        provenance={"construction": "nu_to_dnd", "guesses": guesses[0]},
        contract="same bounded acceptance and result sets as the source",
    )


# name -> (function, number of program arguments, description)
TRANSFORMS: dict[str, tuple[Callable[..., TransformReport], int, str]] = {
    "attach-accept-c1": (attach_accept_c1, 1, "semi-decide the c1-output set of a program"),
    "attach-accept-c2": (attach_accept_c2, 1, "semi-decide the c2-output set of a chi program"),
    "compose-chi-then-recognizer": (compose_chi_then_recognizer, 2, "run a chi program, then a recognizer"),
    "pseudo-parallel-chi": (pseudo_parallel_chi, 2, "chi_P from semi-deciders of P and its complement"),
    "co-semi-from-singleton": (co_semi_from_singleton, 1, "co-semi-decider of {x0} from its recognizer"),
    "chi-from-singleton-path": (chi_from_singleton_path, 1, "chi_{x0} from the accepting path on x0"),
    "chi-from-singleton-counter": (chi_from_singleton_counter, 1, "chi_{x0} from a step counter"),
    "chi-id-from-semi-2tape": (chi_id_from_semi_2tape, 1, "chi_id from a semi-decider of identity"),
    "chi-id-from-semi-3tape": (chi_id_from_semi_3tape, 1, "chi_id, pseudo-parallel variant"),
    "chi-const-from-semi": (chi_const_from_semi, 1, "chi of {c_i} from its recognizer"),
    "determinize-ndb": (determinize_ndb, 1, "deterministic simulation of label guessing"),
    "nu-to-ndb": (nu_to_ndb, 1, "nu guesses to label guesses"),
    "ndb-to-nu-identity": (ndb_to_nu_identity, 1, "label guesses to nu guesses via identity"),
    "ndb-to-nu-recognizers": (ndb_to_nu_recognizers, 3, "label guesses to nu guesses via recognizers"),
    "dnd-to-nu": (dnd_to_nu, 1, "digital non-determinism to nu guesses"),
    "nu-to-dnd": (nu_to_dnd, 2, "nu guesses to digital non-determinism"),
}


def describe(report: TransformReport) -> str:
    """Short human-readable summary of a report."""
    lines = [f"{report.provenance.get('construction')}: {report.output.length} labels, "
             f"class {report.output.machine_class}, dialect {report.output.dialect}"]
    if report.contract:
        lines.append(f"contract: {report.contract}")
    return "\n".join(lines)


_ = (OpApply, instruction_refs, format_instruction)  # re-exported names used by callers of this module
