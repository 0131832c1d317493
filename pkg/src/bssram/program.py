"""Program representation, concrete syntax, validation and rewriting primitives.

A program is a tuple of instructions; the instruction at position ``i``
(1-based) carries label ``i`` and the last one is the unique ``stop``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence, Union

from .structures import SignatureDescriptor

__all__ = [
    "IReg", "ZReg", "ZInd", "ZRef",
    "ConstAssign", "OpApply", "Copy", "RelBranch", "IndexBranch", "IndexInc",
    "IndexSetOne", "Goto", "NdbGoto", "NuGuess", "Stop",
    "TapeCopy", "Init", "IndexDiv2", "IndexMod2", "IndexSet", "IndexPow2", "IndexCopy",
    "Instruction", "Program", "ProgramError", "ParseError", "Finding",
    "make_program", "parse_program", "print_program", "format_instruction",
    "validate", "relabel", "retag_registers", "retag_instruction", "expand_macros",
    "Builder", "targets", "with_targets", "is_extended", "is_branch", "falls_through",
    "instruction_refs", "max_static_z",
]


class ProgramError(ValueError):
    """A program violates a structural requirement."""


class ParseError(ProgramError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# register references


@dataclass(frozen=True, order=True)
class IReg:
    tape: int
    j: int


@dataclass(frozen=True, order=True)
class ZReg:
    tape: int
    j: int


@dataclass(frozen=True, order=True)
class ZInd:
    """``Z`` cell on ``tape`` addressed by the content of index register ``via``."""

    tape: int
    via: IReg


ZRef = Union[ZReg, ZInd]


# ---------------------------------------------------------------------------
# instructions


@dataclass(frozen=True)
class ConstAssign:
    dst: ZRef
    const: int


@dataclass(frozen=True)
class OpApply:
    dst: ZRef
    op: int
    args: tuple


@dataclass(frozen=True)
class Copy:
    dst: ZRef
    src: ZRef


@dataclass(frozen=True)
class RelBranch:
    rel: int
    args: tuple
    then: Any
    else_: Any


@dataclass(frozen=True)
class IndexBranch:
    lhs: IReg
    rhs: IReg
    then: Any
    else_: Any


@dataclass(frozen=True)
class IndexInc:
    reg: IReg


@dataclass(frozen=True)
class IndexSetOne:
    reg: IReg


@dataclass(frozen=True)
class Goto:
    target: Any


@dataclass(frozen=True)
class NdbGoto:
    first: Any
    second: Any


@dataclass(frozen=True)
class NuGuess:
    """``dst := nu(args)``; ``args=None`` means the input window Z1..Z[I1] of ``range_tape``."""

    dst: ZRef
    args: tuple | None = None
    range_tape: int = 1


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class TapeCopy:
    """Copy cells 1..c(I{src,1}) of tape ``src`` to tape ``dst`` and set I{dst,1}."""

    dst: int
    src: int


@dataclass(frozen=True)
class Init:
    """Advance the high-water register of ``slot`` and write ``src`` into the fresh cell."""

    slot: ZInd
    src: ZRef


@dataclass(frozen=True)
class IndexDiv2:
    reg: IReg


@dataclass(frozen=True)
class IndexMod2:
    """``dst := 1`` if ``src`` is odd, ``2`` if even (index registers stay positive)."""

    dst: IReg
    src: IReg


@dataclass(frozen=True)
class IndexSet:
    reg: IReg
    value: int


@dataclass(frozen=True)
class IndexPow2:
    dst: IReg
    exp: IReg


@dataclass(frozen=True)
class IndexCopy:
    dst: IReg
    src: IReg


Instruction = Union[
    ConstAssign, OpApply, Copy, RelBranch, IndexBranch, IndexInc, IndexSetOne, Goto,
    NdbGoto, NuGuess, Stop, TapeCopy, Init, IndexDiv2, IndexMod2, IndexSet, IndexPow2, IndexCopy,
]

_EXTENDED = (TapeCopy, Init, IndexDiv2, IndexMod2, IndexSet, IndexPow2, IndexCopy)


def is_extended(ins: Instruction) -> bool:
    return isinstance(ins, _EXTENDED)


def is_branch(ins: Instruction) -> bool:
    return isinstance(ins, (RelBranch, IndexBranch))


def falls_through(ins: Instruction) -> bool:
    """True when control continues at the next label after ``ins``."""
    return not isinstance(ins, (RelBranch, IndexBranch, Goto, NdbGoto, Stop))


def targets(ins: Instruction) -> tuple:
    if isinstance(ins, (RelBranch, IndexBranch)):
        return (ins.then, ins.else_)
    if isinstance(ins, Goto):
        return (ins.target,)
    if isinstance(ins, NdbGoto):
        return (ins.first, ins.second)
    return ()


def with_targets(ins: Instruction, fn: Callable[[Any], Any]) -> Instruction:
    if isinstance(ins, (RelBranch, IndexBranch)):
        return replace(ins, then=fn(ins.then), else_=fn(ins.else_))
    if isinstance(ins, Goto):
        return Goto(fn(ins.target))
    if isinstance(ins, NdbGoto):
        return NdbGoto(fn(ins.first), fn(ins.second))
    return ins


def _zrefs(ins: Instruction) -> tuple:
    if isinstance(ins, ConstAssign):
        return (ins.dst,)
    if isinstance(ins, OpApply):
        return (ins.dst,) + tuple(ins.args)
    if isinstance(ins, Copy):
        return (ins.dst, ins.src)
    if isinstance(ins, RelBranch):
        return tuple(ins.args)
    if isinstance(ins, NuGuess):
        return (ins.dst,) + tuple(ins.args or ())
    if isinstance(ins, Init):
        return (ins.slot, ins.src)
    return ()


def _irefs(ins: Instruction) -> tuple:
    if isinstance(ins, IndexBranch):
        return (ins.lhs, ins.rhs)
    if isinstance(ins, (IndexInc, IndexSetOne, IndexDiv2, IndexSet)):
        return (ins.reg,)
    if isinstance(ins, IndexMod2):
        return (ins.dst, ins.src)
    if isinstance(ins, IndexPow2):
        return (ins.dst, ins.exp)
    if isinstance(ins, IndexCopy):
        return (ins.dst, ins.src)
    if isinstance(ins, TapeCopy):
        return (IReg(ins.dst, 1), IReg(ins.src, 1))
    if isinstance(ins, NuGuess) and ins.args is None:
        return (IReg(ins.range_tape, 1),)
    return ()


def instruction_refs(ins: Instruction) -> Iterator[IReg | ZReg | ZInd]:
    """Every register reference in ``ins``, including index registers used for addressing."""
    for z in _zrefs(ins):
        yield z
        if isinstance(z, ZInd):
            yield z.via
    yield from _irefs(ins)


def _tapes_of(ins: Instruction) -> Iterator[int]:
    for r in instruction_refs(ins):
        yield r.tape
    if isinstance(ins, TapeCopy):
        yield ins.dst
        yield ins.src
    if isinstance(ins, NuGuess):
        yield ins.range_tape


def max_static_z(instructions: Iterable[Instruction], tape: int = 1) -> int:
    """Largest directly addressed Z position on ``tape`` (0 if none)."""
    best = 0
    for ins in instructions:
        for z in _zrefs(ins):
            if isinstance(z, ZReg) and z.tape == tape:
                best = max(best, z.j)
    return best


# ---------------------------------------------------------------------------
# programs


CLASSES = ("DET", "NDB", "DND", "NU")


@dataclass(frozen=True)
class Program:
    instructions: tuple
    signature: SignatureDescriptor
    registers: tuple  # index register count per tape
    machine_class: str = "DET"
    oracle: str | None = None
    dialect: str = "core"
    name: str = field(default="", compare=False)

    @property
    def length(self) -> int:
        return len(self.instructions)

    @property
    def tape_count(self) -> int:
        return len(self.registers)

    @property
    def stop_label(self) -> int:
        return len(self.instructions)

    def at(self, label: int) -> Instruction:
        return self.instructions[label - 1]

    def labels(self) -> range:
        return range(1, len(self.instructions) + 1)

    def __str__(self) -> str:
        return print_program(self)


def _infer_registers(instructions: Sequence[Instruction], tapes: int | None) -> tuple[int, ...]:
    counts: dict[int, int] = {}
    for ins in instructions:
        for t in _tapes_of(ins):
            counts.setdefault(t, 1)
        for r in instruction_refs(ins):
            if isinstance(r, IReg):
                counts[r.tape] = max(counts.get(r.tape, 1), r.j)
    n = max([tapes or 1] + list(counts))
    return tuple(counts.get(t, 1) for t in range(1, n + 1))


def _infer_class(instructions: Sequence[Instruction]) -> str:
    if any(isinstance(i, NdbGoto) for i in instructions):
        return "NDB"
    if any(isinstance(i, NuGuess) for i in instructions):
        return "NU"
    return "DET"


DEFAULT_ORACLE = "c1c2_inf"


def make_program(
    instructions: Sequence[Instruction],
    signature: SignatureDescriptor,
    *,
    name: str = "",
    machine_class: str | None = None,
    oracle: str | None = None,
    dialect: str | None = None,
    registers: Sequence[int] | None = None,
    tapes: int | None = None,
) -> Program:
    """Build a program, inferring register counts, class and dialect when not given."""
    instructions = tuple(instructions)
    inferred = _infer_registers(instructions, tapes)
    if registers is None:
        regs = inferred
    else:
        regs = tuple(registers)
        if len(regs) < len(inferred):
            regs = regs + inferred[len(regs):]
    cls = machine_class or _infer_class(instructions)
    if cls not in CLASSES:
        raise ProgramError(f"unknown machine class {cls!r}")
    if cls == "NU" and oracle is None:
        oracle = DEFAULT_ORACLE
    if cls != "NU":
        oracle = None
    if dialect is None:
        dialect = "extended" if any(is_extended(i) for i in instructions) else "core"
    return Program(instructions, signature, regs, cls, oracle, dialect, name)


# ---------------------------------------------------------------------------
# printing


def _fmt_i(r: IReg, multi: bool) -> str:
    return f"I{{{r.tape},{r.j}}}" if multi else f"I{r.j}"


def _fmt_z(z: ZRef, multi: bool) -> str:
    if isinstance(z, ZReg):
        return f"Z{{{z.tape},{z.j}}}" if multi else f"Z{z.j}"
    if multi:
        return f"Z{{{z.tape},[{_fmt_i(z.via, True)}]}}"
    return f"Z[{_fmt_i(z.via, False)}]"


def format_instruction(ins: Instruction, multi: bool = False, identity: int | None = None) -> str:
    """Concrete syntax of one instruction body (without label and terminator)."""
    zf = lambda z: _fmt_z(z, multi)  # noqa: E731
    if_ = lambda r: _fmt_i(r, multi)  # noqa: E731
    if isinstance(ins, ConstAssign):
        return f"{zf(ins.dst)} := c{ins.const}"
    if isinstance(ins, OpApply):
        return f"{zf(ins.dst)} := f{ins.op}({', '.join(map(zf, ins.args))})"
    if isinstance(ins, Copy):
        return f"{zf(ins.dst)} := {zf(ins.src)}"
    if isinstance(ins, RelBranch):
        if identity is not None and ins.rel == identity:
            cond = f"{zf(ins.args[0])} = {zf(ins.args[1])}"
        else:
            cond = f"r{ins.rel}({', '.join(map(zf, ins.args))})"
        return f"if {cond} then goto {ins.then} else goto {ins.else_}"
    if isinstance(ins, IndexBranch):
        return f"if {if_(ins.lhs)} = {if_(ins.rhs)} then goto {ins.then} else goto {ins.else_}"
    if isinstance(ins, IndexInc):
        return f"{if_(ins.reg)} := {if_(ins.reg)} + 1"
    if isinstance(ins, IndexSetOne):
        return f"{if_(ins.reg)} := 1"
    if isinstance(ins, Goto):
        return f"goto {ins.target}"
    if isinstance(ins, NdbGoto):
        return f"goto {ins.first} or goto {ins.second}"
    if isinstance(ins, NuGuess):
        if ins.args is None:
            t = ins.range_tape
            lo = _fmt_z(ZReg(t, 1), multi)
            hi = _fmt_z(ZInd(t, IReg(t, 1)), multi)
            return f"{zf(ins.dst)} := nu({lo}..{hi})"
        return f"{zf(ins.dst)} := nu({', '.join(map(zf, ins.args))})"
    if isinstance(ins, Stop):
        return "stop"
    if isinstance(ins, TapeCopy):
        return f"ext.tapecopy({ins.dst}, {ins.src})"
    if isinstance(ins, Init):
        return f"ext.init({zf(ins.slot)}, {zf(ins.src)})"
    if isinstance(ins, IndexDiv2):
        return f"ext.div2({if_(ins.reg)})"
    if isinstance(ins, IndexMod2):
        return f"ext.mod2({if_(ins.dst)}, {if_(ins.src)})"
    if isinstance(ins, IndexSet):
        return f"ext.set({if_(ins.reg)}, {ins.value})"
    if isinstance(ins, IndexPow2):
        return f"ext.pow2({if_(ins.dst)}, {if_(ins.exp)})"
    if isinstance(ins, IndexCopy):
        return f"ext.icopy({if_(ins.dst)}, {if_(ins.src)})"
    raise ProgramError(f"unknown instruction {ins!r}")


def _directives(p: Program) -> list[str]:
    """Header lines for every property that the parser would not infer by itself."""
    out = []
    if p.name:
        out.append(f".name {p.name}")
    inferred_regs = _infer_registers(p.instructions, None)
    if len(p.registers) != len(inferred_regs):
        out.append(f".tapes {len(p.registers)}")
    if p.registers != _infer_registers(p.instructions, len(p.registers)):
        out.append(".registers " + " ".join(map(str, p.registers)))
    cls = _infer_class(p.instructions)
    if p.machine_class != cls or (p.machine_class == "NU" and p.oracle != DEFAULT_ORACLE):
        out.append(f".class {p.machine_class}" + (f" {p.oracle}" if p.machine_class == "NU" else ""))
    inferred_dialect = "extended" if any(is_extended(i) for i in p.instructions) else "core"
    if p.dialect != inferred_dialect:
        out.append(f".dialect {p.dialect}")
    return out


def print_program(p: Program) -> str:
    multi = p.tape_count > 1
    ident = p.signature.identity_rel_index
    lines = _directives(p)
    last = len(p.instructions)
    for label, ins in enumerate(p.instructions, start=1):
        end = "." if (label == last and isinstance(ins, Stop)) else ";"
        lines.append(f"{label}: {format_instruction(ins, multi, ident)}{end}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<assign>:=)
  | (?P<range>\.\.)
  | (?P<ext>ext\.[a-z0-9]+)
  | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<num>\d+)
  | (?P<sym>[:;.,()\[\]{}=+])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


class _Line:
    def __init__(self, text: str, lineno: int):
        self.lineno = lineno
        self.toks: list[_Tok] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
            if m.lastgroup != "ws":
                self.toks.append(_Tok(m.lastgroup, m.group(), pos + 1))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok if tok is not None else self.peek()
        col = tok.col if tok else self.end_col
        return ParseError(msg, self.lineno, col)

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of line")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok is None or tok.text != text:
            got = repr(tok.text) if tok else "end of line"
            raise self.error(f"expected {text!r}, got {got}")
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def number(self) -> int:
        tok = self.next()
        if tok.kind != "num":
            raise self.error(f"expected a number, got {tok.text!r}", tok)
        return int(tok.text)


_REG_WORD = re.compile(r"([ZI])(\d+)$")


def _parse_iref(ln: _Line) -> IReg:
    tok = ln.next()
    m = _REG_WORD.match(tok.text) if tok.kind == "word" else None
    if m and m.group(1) == "I":
        return IReg(1, int(m.group(2)))
    if tok.text == "I" and ln.accept("{"):
        t = ln.number()
        ln.expect(",")
        j = ln.number()
        ln.expect("}")
        return IReg(t, j)
    raise ln.error(f"expected an index register, got {tok.text!r}", tok)


def _try_zref(ln: _Line) -> ZRef | None:
    tok = ln.peek()
    if tok is None or tok.kind != "word":
        return None
    m = _REG_WORD.match(tok.text)
    if m and m.group(1) == "Z":
        ln.i += 1
        return ZReg(1, int(m.group(2)))
    if tok.text != "Z":
        return None
    ln.i += 1
    if ln.accept("["):
        via = _parse_iref(ln)
        ln.expect("]")
        return ZInd(1, via)
    ln.expect("{")
    t = ln.number()
    ln.expect(",")
    if ln.accept("["):
        via = _parse_iref(ln)
        ln.expect("]")
        ln.expect("}")
        return ZInd(t, via)
    j = ln.number()
    ln.expect("}")
    return ZReg(t, j)


def _parse_zref(ln: _Line) -> ZRef:
    tok = ln.peek()
    z = _try_zref(ln)
    if z is None:
        raise ln.error(f"expected a Z register, got {tok.text if tok else 'end of line'!r}")
    return z


def _is_iref_start(ln: _Line) -> bool:
    tok = ln.peek()
    if tok is None or tok.kind != "word":
        return False
    m = _REG_WORD.match(tok.text)
    return bool(m and m.group(1) == "I") or (tok.text == "I" and ln.peek(1) is not None and ln.peek(1).text == "{")


def _symbol_index(ln: _Line, prefix: str, count: int, what: str) -> int:
    tok = ln.next()
    m = re.fullmatch(prefix + r"(\d+)", tok.text) if tok.kind == "word" else None
    if not m:
        raise ln.error(f"expected a {what} symbol, got {tok.text!r}", tok)
    idx = int(m.group(1))
    if not 1 <= idx <= count:
        raise ln.error(f"unknown symbol {tok.text!r}: the signature has {count} {what}(s)", tok)
    return idx


def _zlist(ln: _Line) -> tuple:
    ln.expect("(")
    args = []
    if not ln.accept(")"):
        args.append(_parse_zref(ln))
        while ln.accept(","):
            args.append(_parse_zref(ln))
        ln.expect(")")
    return tuple(args)


def _goto_target(ln: _Line) -> int:
    ln.expect("goto")
    return ln.number()


def _parse_body(ln: _Line, sig: SignatureDescriptor) -> Instruction:
    tok = ln.peek()
    if tok is None:
        raise ln.error("empty instruction")
    if tok.text == "stop":
        ln.i += 1
        return Stop()
    if tok.text == "goto":
        first = _goto_target(ln)
        if ln.accept("or"):
            return NdbGoto(first, _goto_target(ln))
        return Goto(first)
    if tok.text == "if":
        ln.i += 1
        cond = ln.peek()
        if cond is not None and cond.kind == "word" and re.fullmatch(r"r\d+", cond.text):
            rel = _symbol_index(ln, "r", len(sig.rel_arities), "relation")
            args = _zlist(ln)
            if len(args) != sig.rel_arities[rel - 1]:
                raise ln.error(f"arity mismatch: r{rel} takes {sig.rel_arities[rel - 1]} argument(s)", cond)
            make = lambda a, b: RelBranch(rel, args, a, b)  # noqa: E731
        elif _is_iref_start(ln):
            lhs = _parse_iref(ln)
            ln.expect("=")
            rhs = _parse_iref(ln)
            make = lambda a, b: IndexBranch(lhs, rhs, a, b)  # noqa: E731
        else:
            lhs_z = _parse_zref(ln)
            eq = ln.expect("=")
            rhs_z = _parse_zref(ln)
            if sig.identity_rel_index is None:
                raise ln.error("unknown symbol '=': the signature has no identity relation", eq)
            make = lambda a, b: RelBranch(sig.identity_rel_index, (lhs_z, rhs_z), a, b)  # noqa: E731
        ln.expect("then")
        then = _goto_target(ln)
        ln.expect("else")
        return make(then, _goto_target(ln))
    if tok.kind == "ext":
        return _parse_ext(ln)
    if _is_iref_start(ln):
        reg = _parse_iref(ln)
        ln.expect(":=")
        nxt = ln.peek()
        if nxt is not None and nxt.kind == "num":
            if ln.number() != 1:
                raise ln.error("an index register can only be set to 1", nxt)
            return IndexSetOne(reg)
        src_tok = ln.peek()
        src = _parse_iref(ln)
        if src != reg:
            raise ln.error("increment must use the same register on both sides", src_tok)
        ln.expect("+")
        one = ln.peek()
        if ln.number() != 1:
            raise ln.error("index registers are incremented by 1", one)
        return IndexInc(reg)
    dst = _parse_zref(ln)
    ln.expect(":=")
    rhs = ln.peek()
    if rhs is None:
        raise ln.error("missing right-hand side")
    if rhs.kind == "word" and re.fullmatch(r"c\d+", rhs.text):
        return ConstAssign(dst, _symbol_index(ln, "c", sig.constant_count, "constant"))
    if rhs.kind == "word" and re.fullmatch(r"f\d+", rhs.text):
        op = _symbol_index(ln, "f", len(sig.op_arities), "operation")
        args = _zlist(ln)
        if len(args) != sig.op_arities[op - 1]:
            raise ln.error(f"arity mismatch: f{op} takes {sig.op_arities[op - 1]} argument(s)", rhs)
        return OpApply(dst, op, args)
    if rhs.text == "nu":
        ln.i += 1
        ln.expect("(")
        if ln.accept(")"):
            return NuGuess(dst, ())
        first = _parse_zref(ln)
        if ln.accept(".."):
            last_tok = ln.peek()
            last = _parse_zref(ln)
            ln.expect(")")
            t = first.tape if isinstance(first, ZReg) else 0
            if first != ZReg(t, 1) or last != ZInd(t, IReg(t, 1)):
                raise ln.error("a nu range must be Z1..Z[I1] of one tape", last_tok)
            return NuGuess(dst, None, t)
        args = [first]
        while ln.accept(","):
            args.append(_parse_zref(ln))
        ln.expect(")")
        return NuGuess(dst, tuple(args))
    return Copy(dst, _parse_zref(ln))


def _parse_ext(ln: _Line) -> Instruction:
    tok = ln.next()
    name = tok.text[4:]
    ln.expect("(")
    if name == "tapecopy":
        d = ln.number()
        ln.expect(",")
        s = ln.number()
        ins: Instruction = TapeCopy(d, s)
    elif name == "init":
        slot = _parse_zref(ln)
        if not isinstance(slot, ZInd):
            raise ln.error("ext.init needs an indirect slot Z[I]", tok)
        ln.expect(",")
        ins = Init(slot, _parse_zref(ln))
    elif name == "div2":
        ins = IndexDiv2(_parse_iref(ln))
    elif name in ("mod2", "pow2", "icopy"):
        a = _parse_iref(ln)
        ln.expect(",")
        b = _parse_iref(ln)
        ins = {"mod2": IndexMod2, "pow2": IndexPow2, "icopy": IndexCopy}[name](a, b)
    elif name == "set":
        reg = _parse_iref(ln)
        ln.expect(",")
        val_tok = ln.peek()
        val = ln.number()
        if val < 1:
            raise ln.error("index registers hold positive integers", val_tok)
        ins = IndexSet(reg, val)
    else:
        raise ln.error(f"unknown extended instruction {tok.text!r}", tok)
    ln.expect(")")
    return ins


def parse_program(text: str, sig: SignatureDescriptor) -> Program:
    """Parse the line-oriented program syntax (see ``print_program``)."""
    instructions: list[Instruction] = []
    opts: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith("."):
            _parse_directive(line.strip(), lineno, opts)
            continue
        ln = _Line(line, lineno)
        label_tok = ln.peek()
        label = ln.number()
        if label != len(instructions) + 1:
            raise ParseError(f"label gap: expected label {len(instructions) + 1}, got {label}", lineno, label_tok.col)
        ln.expect(":")
        ins = _parse_body(ln, sig)
        end = ln.peek()
        if end is None or end.text not in (";", "."):
            raise ln.error("expected ';' or '.' after the instruction")
        ln.i += 1
        if ln.peek() is not None:
            raise ln.error(f"unexpected text {ln.peek().text!r} after the instruction")
        instructions.append(ins)
    if not instructions:
        raise ParseError("program has no instructions", max(1, len(text.splitlines())), 1)
    regs = opts.get("registers")
    tapes = opts.get("tapes")
    return make_program(
        instructions,
        sig,
        name=opts.get("name", ""),
        machine_class=opts.get("class"),
        oracle=opts.get("oracle"),
        dialect=opts.get("dialect"),
        registers=regs,
        tapes=tapes,
    )


def _parse_directive(line: str, lineno: int, opts: dict) -> None:
    parts = line.split()
    key, args = parts[0], parts[1:]
    try:
        if key == ".name" and len(args) == 1:
            opts["name"] = args[0]
        elif key == ".tapes" and len(args) == 1:
            opts["tapes"] = int(args[0])
        elif key == ".registers" and args:
            opts["registers"] = tuple(int(a) for a in args)
        elif key == ".class" and args and args[0] in CLASSES:
            opts["class"] = args[0]
            if len(args) > 1:
                opts["oracle"] = args[1]
        elif key == ".dialect" and len(args) == 1 and args[0] in ("core", "extended"):
            opts["dialect"] = args[0]
        else:
            raise ValueError
    except ValueError:
        raise ParseError(f"malformed directive {line!r}", lineno, 1) from None


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    label: int | None
    message: str

    def __str__(self) -> str:
        where = f"label {self.label}" if self.label is not None else "program"
        return f"{where}: {self.message}"


def validate(p: Program) -> list[Finding]:
    """All violations of the program invariants; empty when the program is valid."""
    out: list[Finding] = []
    sig = p.signature
    L = len(p.instructions)
    if L == 0:
        return [Finding(None, "program has no instructions")]
    if not isinstance(p.instructions[-1], Stop):
        out.append(Finding(L, "stop not terminal"))
    for label, ins in enumerate(p.instructions, start=1):
        if isinstance(ins, Stop) and label != L:
            out.append(Finding(label, "stop before the last label"))
        for t in targets(ins):
            if not isinstance(t, int) or not 1 <= t <= L:
                out.append(Finding(label, f"jump target {t} outside 1..{L}"))
        if isinstance(ins, ConstAssign) and not 1 <= ins.const <= sig.constant_count:
            out.append(Finding(label, f"unknown constant c{ins.const}"))
        if isinstance(ins, OpApply):
            if not 1 <= ins.op <= len(sig.op_arities):
                out.append(Finding(label, f"unknown operation f{ins.op}"))
            elif len(ins.args) != sig.op_arities[ins.op - 1]:
                out.append(Finding(label, f"arity mismatch for f{ins.op}"))
        if isinstance(ins, RelBranch):
            if not 1 <= ins.rel <= len(sig.rel_arities):
                out.append(Finding(label, f"unknown relation r{ins.rel}"))
            elif len(ins.args) != sig.rel_arities[ins.rel - 1]:
                out.append(Finding(label, f"arity mismatch for r{ins.rel}"))
        if is_extended(ins) and p.dialect != "extended":
            out.append(Finding(label, "extended instruction in a core-dialect program"))
        if isinstance(ins, IndexSet) and ins.value < 1:
            out.append(Finding(label, "index registers hold positive integers"))
        if isinstance(ins, NdbGoto) and p.machine_class != "NDB":
            out.append(Finding(label, f"goto ... or goto ... not allowed in a {p.machine_class} program"))
        if isinstance(ins, NuGuess) and p.machine_class != "NU":
            out.append(Finding(label, f"nu instruction not allowed in a {p.machine_class} program"))
        for t in _tapes_of(ins):
            if not 1 <= t <= p.tape_count:
                out.append(Finding(label, f"tape {t} outside 1..{p.tape_count}"))
        for r in instruction_refs(ins):
            if isinstance(r, IReg) and 1 <= r.tape <= p.tape_count and not 1 <= r.j <= p.registers[r.tape - 1]:
                out.append(Finding(label, f"index register I{{{r.tape},{r.j}}} beyond the declared count"))
            if isinstance(r, ZReg) and r.j < 1:
                out.append(Finding(label, "Z positions start at 1"))
    if p.machine_class == "NU" and not p.oracle:
        out.append(Finding(None, "NU program without an oracle name"))
    if any(k < 1 for k in p.registers):
        out.append(Finding(None, "every tape needs at least one index register"))
    return out


def check_valid(p: Program) -> Program:
    findings = validate(p)
    if findings:
        raise ProgramError("; ".join(map(str, findings)))
    return p


# ---------------------------------------------------------------------------
# relabeling and register retagging


LabelMap = Union[Mapping[Any, Any], Callable[[Any], Any]]


def _as_fn(mapping: LabelMap) -> Callable[[Any], Any]:
    if callable(mapping) and not isinstance(mapping, Mapping):
        return mapping

    def fn(label: Any) -> Any:
        try:
            return mapping[label]
        except KeyError:
            raise ProgramError(f"label {label} is not covered by the relabeling") from None

    return fn


def relabel(p: Program | Mapping[int, Instruction], mapping: LabelMap):
    """Rename labels consistently in positions and jump targets.

    A ``Program`` must be mapped onto 1..L again (the result is reordered
    by new label); a segment ``{label: instruction}`` may be mapped anywhere.
    """
    fn = _as_fn(mapping)
    segment = dict(enumerate(p.instructions, start=1)) if isinstance(p, Program) else dict(p)
    used = set(segment)
    for ins in segment.values():
        used.update(targets(ins))
    image: dict[Any, Any] = {}
    for label in used:
        new = fn(label)
        if new in image and image[new] != label:
            raise ProgramError(f"relabeling is not injective: {image[new]} and {label} both map to {new}")
        image[new] = label
    moved = {fn(label): with_targets(ins, fn) for label, ins in segment.items()}
    if not isinstance(p, Program):
        return moved
    if sorted(moved) != list(range(1, len(moved) + 1)):
        raise ProgramError("relabeled program positions must be exactly 1..L")
    return replace(p, instructions=tuple(moved[i] for i in range(1, len(moved) + 1)))


def _map_z(z: ZRef, tape_fn, ireg_fn, zpos_fn) -> ZRef:
    if isinstance(z, ZReg):
        return ZReg(tape_fn(z.tape), zpos_fn(z.j))
    return ZInd(tape_fn(z.tape), ireg_fn(z.via))


def retag_instruction(ins: Instruction, tape_fn, ireg_fn=None, zpos_fn=None) -> Instruction:
    """Rewrite the register references of one instruction."""
    tape_fn = _as_fn(tape_fn)
    if ireg_fn is None:
        ireg_fn = lambda r: IReg(tape_fn(r.tape), r.j)  # noqa: E731
    if zpos_fn is None:
        zpos_fn = lambda j: j  # noqa: E731
    z = lambda ref: _map_z(ref, tape_fn, ireg_fn, zpos_fn)  # noqa: E731
    if isinstance(ins, ConstAssign):
        return ConstAssign(z(ins.dst), ins.const)
    if isinstance(ins, OpApply):
        return OpApply(z(ins.dst), ins.op, tuple(map(z, ins.args)))
    if isinstance(ins, Copy):
        return Copy(z(ins.dst), z(ins.src))
    if isinstance(ins, RelBranch):
        return RelBranch(ins.rel, tuple(map(z, ins.args)), ins.then, ins.else_)
    if isinstance(ins, IndexBranch):
        return IndexBranch(ireg_fn(ins.lhs), ireg_fn(ins.rhs), ins.then, ins.else_)
    if isinstance(ins, (IndexInc, IndexSetOne, IndexDiv2)):
        return type(ins)(ireg_fn(ins.reg))
    if isinstance(ins, IndexSet):
        return IndexSet(ireg_fn(ins.reg), ins.value)
    if isinstance(ins, IndexMod2):
        return IndexMod2(ireg_fn(ins.dst), ireg_fn(ins.src))
    if isinstance(ins, IndexPow2):
        return IndexPow2(ireg_fn(ins.dst), ireg_fn(ins.exp))
    if isinstance(ins, IndexCopy):
        return IndexCopy(ireg_fn(ins.dst), ireg_fn(ins.src))
    if isinstance(ins, NuGuess):
        args = None if ins.args is None else tuple(map(z, ins.args))
        return NuGuess(z(ins.dst), args, tape_fn(ins.range_tape))
    if isinstance(ins, TapeCopy):
        return TapeCopy(tape_fn(ins.dst), tape_fn(ins.src))
    if isinstance(ins, Init):
        return Init(z(ins.slot), z(ins.src))
    return ins


def retag_registers(
    p: Program,
    tape_assignment: LabelMap,
    register_renaming: LabelMap | None = None,
) -> Program:
    """Move tapes and rename index registers throughout ``p``.

    ``tape_assignment`` maps old tape numbers to new ones;
    ``register_renaming`` maps ``IReg`` to ``IReg`` (default: follow the tape).
    """
    tape_fn = _as_fn(tape_assignment)
    ireg_fn = _as_fn(register_renaming) if register_renaming is not None else (lambda r: IReg(tape_fn(r.tape), r.j))
    tapes_used = {t for ins in p.instructions for t in _tapes_of(ins)} | set(range(1, p.tape_count + 1))
    seen: dict[int, int] = {}
    for t in tapes_used:
        nt = tape_fn(t)
        if nt in seen and seen[nt] != t:
            raise ProgramError(f"tape clash: tapes {seen[nt]} and {t} both map to {nt}")
        seen[nt] = t
    iregs = {r for ins in p.instructions for r in instruction_refs(ins) if isinstance(r, IReg)}
    iseen: dict[IReg, IReg] = {}
    for r in iregs:
        nr = ireg_fn(r)
        if nr in iseen and iseen[nr] != r:
            raise ProgramError(f"register clash: {iseen[nr]} and {r} both map to {nr}")
        iseen[nr] = r
    new = tuple(retag_instruction(ins, tape_fn, ireg_fn) for ins in p.instructions)
    tapes = max(seen) if seen else 1
    regs = [1] * tapes
    for t in range(1, p.tape_count + 1):
        nt = tape_fn(t)
        regs[nt - 1] = max(regs[nt - 1], p.registers[t - 1])
    for r in iseen:
        regs[r.tape - 1] = max(regs[r.tape - 1], r.j)
    return replace(p, instructions=new, registers=tuple(regs))


# ---------------------------------------------------------------------------
# symbolic-label builder


class Builder:
    """Accumulates instructions whose jump targets are arbitrary hashable symbols.

    ``mark(sym)`` names the next emitted instruction; ``build`` flattens
    symbols to contiguous labels using ``relabel``.
    """

    def __init__(self) -> None:
        self.items: list[Instruction] = []
        self.marks: dict[Hashable, int] = {}
        self._pending: list[Hashable] = []

    def mark(self, *symbols: Hashable) -> None:
        self._pending.extend(symbols)

    def emit(self, ins: Instruction, *marks: Hashable) -> int:
        self._pending.extend(marks)
        pos = len(self.items) + 1
        for sym in self._pending:
            if sym in self.marks:
                raise ProgramError(f"symbolic label {sym!r} defined twice")
            self.marks[sym] = pos
        self._pending = []
        self.items.append(ins)
        return pos

    def extend(self, instructions: Iterable[Instruction]) -> None:
        for ins in instructions:
            self.emit(ins)

    @property
    def here(self) -> int:
        """Label the next emitted instruction will get."""
        return len(self.items) + 1

    def resolve(self, sym: Hashable) -> int:
        try:
            return self.marks[sym]
        except KeyError:
            raise ProgramError(f"undefined symbolic label {sym!r}") from None

    def build(self, signature: SignatureDescriptor, **kwargs: Any) -> Program:
        if self._pending:
            raise ProgramError(f"symbolic labels {self._pending!r} mark no instruction")
        instrs = tuple(with_targets(ins, self.resolve) for ins in self.items)
        return make_program(instrs, signature, **kwargs)


# ---------------------------------------------------------------------------
# macro expansion


def _aux_needed(ins: Instruction) -> int:
    if isinstance(ins, (IndexDiv2, IndexMod2)):
        return 2
    if isinstance(ins, IndexPow2):
        return 4
    return 0


def _emit_icopy(b: Builder, d: IReg, s: IReg, tag: Hashable, done: Hashable) -> None:
    if d == s:
        b.emit(Goto(done))
        return
    b.emit(IndexSetOne(d))
    b.emit(IndexBranch(d, s, done, (tag, "inc")), (tag, "loop"))
    b.emit(IndexInc(d), (tag, "inc"))
    b.emit(Goto((tag, "loop")))


def _emit_expansion(b: Builder, ins: Instruction, aux: list[IReg], tag: Hashable, done: Hashable) -> None:
    """Emit core instructions for one extended instruction; control ends at ``done``.

    Straight-line expansions (set, init) fall through, so ``done`` must be
    the label right after them.
    """
    if isinstance(ins, IndexSet):
        b.emit(IndexSetOne(ins.reg))
        for _ in range(ins.value - 1):
            b.emit(IndexInc(ins.reg))
    elif isinstance(ins, IndexCopy):
        _emit_icopy(b, ins.dst, ins.src, tag, done)
    elif isinstance(ins, IndexDiv2):
        q, a, r = aux[0], aux[1], ins.reg
        b.emit(IndexSetOne(q))
        b.emit(IndexSetOne(a))
        b.emit(IndexBranch(a, r, (tag, "out"), (tag, "n1")))
        b.emit(IndexInc(a), (tag, "n1"))
        b.emit(IndexBranch(a, r, (tag, "out"), (tag, "n2")), (tag, "loop"))
        b.emit(IndexInc(a), (tag, "n2"))
        b.emit(IndexBranch(a, r, (tag, "out"), (tag, "n3")))
        b.emit(IndexInc(a), (tag, "n3"))
        b.emit(IndexInc(q))
        b.emit(Goto((tag, "loop")))
        b.mark((tag, "out"))
        _emit_icopy(b, r, q, (tag, "copy"), done)
    elif isinstance(ins, IndexMod2):
        t, a, s = aux[0], aux[1], ins.src
        b.emit(IndexSetOne(t))
        b.emit(IndexSetOne(a))
        b.emit(IndexBranch(a, s, (tag, "out"), (tag, "n1")), (tag, "loop"))
        b.emit(IndexInc(a), (tag, "n1"))
        b.emit(IndexSetOne(t))
        b.emit(IndexInc(t))
        b.emit(IndexBranch(a, s, (tag, "out"), (tag, "n2")))
        b.emit(IndexInc(a), (tag, "n2"))
        b.emit(IndexSetOne(t))
        b.emit(Goto((tag, "loop")))
        b.mark((tag, "out"))
        _emit_icopy(b, ins.dst, t, (tag, "copy"), done)
    elif isinstance(ins, IndexPow2):
        a, v, c, n = aux
        b.emit(IndexSetOne(a))
        b.emit(IndexSetOne(v))
        b.emit(IndexInc(v))
        b.emit(IndexBranch(a, ins.exp, (tag, "out"), (tag, "step")), (tag, "loop"))
        b.emit(IndexInc(a), (tag, "step"))
        b.emit(IndexSetOne(c))
        b.emit(IndexSetOne(n))
        b.emit(IndexInc(n))
        b.emit(IndexBranch(c, v, (tag, "dbl_done"), (tag, "dbl")), (tag, "dbl_loop"))
        b.emit(IndexInc(c), (tag, "dbl"))
        b.emit(IndexInc(n))
        b.emit(IndexInc(n))
        b.emit(Goto((tag, "dbl_loop")))
        b.mark((tag, "dbl_done"))
        _emit_icopy(b, v, n, (tag, "vcopy"), (tag, "loop"))
        b.mark((tag, "out"))
        _emit_icopy(b, ins.dst, v, (tag, "copy"), done)
    elif isinstance(ins, TapeCopy):
        if ins.dst == ins.src:
            b.emit(Goto(done))
            return
        cnt, lim = IReg(ins.dst, 1), IReg(ins.src, 1)
        b.emit(IndexSetOne(cnt))
        b.emit(Copy(ZInd(ins.dst, cnt), ZInd(ins.src, cnt)), (tag, "loop"))
        b.emit(IndexBranch(cnt, lim, done, (tag, "inc")))
        b.emit(IndexInc(cnt), (tag, "inc"))
        b.emit(Goto((tag, "loop")))
    elif isinstance(ins, Init):
        b.emit(IndexInc(ins.slot.via))
        b.emit(Copy(ins.slot, ins.src))
    else:  # pragma: no cover - guarded by caller
        raise ProgramError(f"no expansion for {ins!r}")


def expand_macros(p: Program, max_registers: int | None = None) -> Program:
    """Replace every extended instruction by core instructions.

    Auxiliary index registers are appended per tape and shared between
    expansion sites (each site reinitialises them). Original label ``l``
    becomes the first label of its expansion.
    """
    return expand_macros_with_map(p, max_registers)[0]


def expand_macros_with_map(p: Program, max_registers: int | None = None) -> tuple[Program, dict[int, int]]:
    """Like ``expand_macros``, also returning original label -> new label."""
    if p.dialect != "extended":
        raise ProgramError("expand_macros needs an extended-dialect program")
    regs = list(p.registers)
    need: dict[int, int] = {}
    for ins in p.instructions:
        k = _aux_needed(ins)
        if k:
            tape = (ins.reg if isinstance(ins, IndexDiv2) else ins.dst).tape
            need[tape] = max(need.get(tape, 0), k)
    aux: dict[int, list[IReg]] = {}
    for tape, k in sorted(need.items()):
        base = regs[tape - 1]
        aux[tape] = [IReg(tape, base + i) for i in range(1, k + 1)]
        regs[tape - 1] = base + k
        if max_registers is not None and regs[tape - 1] > max_registers:
            culprit = next(
                lbl for lbl, ins in enumerate(p.instructions, 1)
                if _aux_needed(ins) == k and (ins.reg if isinstance(ins, IndexDiv2) else ins.dst).tape == tape
            )
            raise ProgramError(
                f"cannot expand label {culprit} ({format_instruction(p.at(culprit))}): "
                f"needs {k} spare index register(s) on tape {tape}"
            )
    b = Builder()
    for label, ins in enumerate(p.instructions, start=1):
        b.mark(("o", label))
        if is_extended(ins):
            tape = (ins.reg if isinstance(ins, IndexDiv2) else getattr(ins, "dst", None))
            tape_no = tape.tape if isinstance(tape, IReg) else 1
            _emit_expansion(b, ins, aux.get(tape_no, []), ("x", label), ("o", label + 1))
        else:
            b.emit(with_targets(ins, lambda t: ("o", t)))
    label_map = {label: b.resolve(("o", label)) for label in p.labels()}
    out = b.build(
        p.signature,
        name=p.name,
        machine_class=p.machine_class,
        oracle=p.oracle,
        dialect="core",
        registers=regs,
    )
    return out, label_map


