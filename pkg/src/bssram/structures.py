"""First-order structures: signatures, universe values and evaluators.

Five structures ship with the package (A1, A2, A3, A4, AQ). Finite
structures over enumerated atoms can be loaded from JSON files.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

__all__ = [
    "Atom",
    "Stream",
    "SignatureDescriptor",
    "StructureModel",
    "StructureError",
    "builtin_structure",
    "builtin_names",
    "eval_operation",
    "eval_relation",
    "meta_equal",
    "with_identity",
    "load_structure",
    "load_structure_file",
    "small_values",
    "corpus",
]


class StructureError(ValueError):
    """Raised for unknown structures, arity mismatches and foreign values."""


# ---------------------------------------------------------------------------
# universe values


@dataclass(frozen=True, order=True)
class Atom:
    symbol: str

    def __str__(self) -> str:
        return self.symbol


def _primitive_root(word: str) -> str:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word[:d] * (n // d) == word:
            return word[:d]
    return word


@dataclass(frozen=True)
class Stream:
    """An eventually periodic infinite word ``prefix + period + period + ...``.

    Instances are kept in canonical form (primitive period, shortest
    prefix), so ``==`` on streams is equality of the infinite words.
    """

    prefix: str
    period: str

    def __post_init__(self) -> None:
        if not self.period:
            raise StructureError("stream period must be non-empty")
        prefix, period = self.prefix, _primitive_root(self.period)
        # roll the period backwards over matching prefix letters
        while prefix and prefix[-1] == period[-1]:
            prefix, period = prefix[:-1], period[-1] + period[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "period", period)

    def letter(self, i: int) -> str:
        """The letter at 0-based position ``i``."""
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def unfold(self, n: int) -> str:
        return "".join(self.letter(i) for i in range(n))

    def head(self) -> Atom:
        return Atom(self.letter(0))

    def tail(self) -> "Stream":
        if self.prefix:
            return Stream(self.prefix[1:], self.period)
        return Stream("", self.period[1:] + self.period[0])

    def __str__(self) -> str:
        return f"{self.prefix}|{self.period}"


# ---------------------------------------------------------------------------
# value kinds: literal syntax, formatting and membership per structure


class ValueKind:
    name = "value"

    def check(self, v: Any) -> bool:  # pragma: no cover - overridden
        raise NotImplementedError

    def parse(self, text: str) -> Any:  # pragma: no cover - overridden
        raise NotImplementedError

    def format(self, v: Any) -> str:
        return str(v)

    def equal(self, x: Any, y: Any) -> bool:
        return x == y


class StringKind(ValueKind):
    """Finite words over {a, b}; the empty word prints as ``ε``."""

    name = "string"
    EMPTY = ("ε", "eps", '""', "''")

    def check(self, v: Any) -> bool:
        return isinstance(v, str) and set(v) <= {"a", "b"}

    def parse(self, text: str) -> str:
        t = text.strip()
        if t in self.EMPTY:
            return ""
        if not self.check(t) or not t:
            raise StructureError(f"not a string over {{a,b}}: {text!r}")
        return t

    def format(self, v: str) -> str:
        return v if v else "ε"


class AtomKind(ValueKind):
    name = "atom"

    def __init__(self, symbols: Iterable[str]):
        self.symbols = tuple(symbols)

    def check(self, v: Any) -> bool:
        return isinstance(v, Atom) and v.symbol in self.symbols

    def parse(self, text: str) -> Atom:
        t = text.strip()
        if t not in self.symbols:
            raise StructureError(f"unknown atom {text!r}; expected one of {', '.join(self.symbols)}")
        return Atom(t)


class StreamKind(ValueKind):
    """Eventually periodic streams over {a, b} plus the atoms a and b.

    Literal syntax: ``prefix|period`` for streams, a bare ``a``/``b`` for atoms.
    """

    name = "stream"

    def check(self, v: Any) -> bool:
        if isinstance(v, Atom):
            return v.symbol in ("a", "b")
        return isinstance(v, Stream) and set(v.prefix + v.period) <= {"a", "b"}

    def parse(self, text: str) -> Any:
        t = text.strip()
        if "|" not in t:
            if t in ("a", "b"):
                return Atom(t)
            raise StructureError(f"expected an atom a/b or prefix|period, got {text!r}")
        prefix, period = t.split("|", 1)
        v = Stream(prefix, period)
        if not self.check(v):
            raise StructureError(f"stream letters must be a or b: {text!r}")
        return v

    def equal(self, x: Any, y: Any) -> bool:
        if isinstance(x, Stream) and isinstance(y, Stream):
            # compare long enough unfoldings; canonical forms make this redundant
            n = max(len(x.prefix), len(y.prefix)) + 2 * math.lcm(len(x.period), len(y.period))
            return x.unfold(n) == y.unfold(n)
        return x == y


class RationalKind(ValueKind):
    name = "rational"

    def check(self, v: Any) -> bool:
        return isinstance(v, Fraction)

    def parse(self, text: str) -> Fraction:
        try:
            return Fraction(text.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise StructureError(f"not a rational literal: {text!r}") from exc

    def format(self, v: Fraction) -> str:
        return str(v)


# ---------------------------------------------------------------------------
# signatures and models


@dataclass(frozen=True)
class SignatureDescriptor:
    constant_count: int
    op_arities: tuple[int, ...] = ()
    rel_arities: tuple[int, ...] = ()
    identity_rel_index: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "op_arities", tuple(self.op_arities))
        object.__setattr__(self, "rel_arities", tuple(self.rel_arities))
        if self.constant_count < 0:
            raise StructureError("constant count must be non-negative")
        if any(a < 1 for a in self.op_arities + self.rel_arities):
            raise StructureError("all arities must be at least 1")
        i = self.identity_rel_index
        if i is not None:
            if not 1 <= i <= len(self.rel_arities) or self.rel_arities[i - 1] != 2:
                raise StructureError("identity relation must be a binary relation of the signature")

    def __str__(self) -> str:
        ops = ",".join(map(str, self.op_arities))
        rels = ",".join(map(str, self.rel_arities))
        return f"({self.constant_count};{ops};{rels})"


@dataclass(frozen=True)
class StructureModel:
    name: str
    signature: SignatureDescriptor
    constants: tuple
    operations: tuple[Callable[..., Any], ...]
    relations: tuple[Callable[..., bool], ...]
    kind: ValueKind = field(compare=False)
    # constant indices of (c1, c2)
    distinguished_pair: tuple[int, int] | None = (1, 2)

    @property
    def c1(self) -> Any:
        return self._pair()[0]

    @property
    def c2(self) -> Any:
        return self._pair()[1]

    def _pair(self) -> tuple[Any, Any]:
        if self.distinguished_pair is None:
            raise StructureError(f"structure {self.name} has no distinguished constants c1, c2")
        i, j = self.distinguished_pair
        return self.constants[i - 1], self.constants[j - 1]

    def parse_value(self, text: str) -> Any:
        return self.kind.parse(text)

    def parse_tuple(self, text: str) -> tuple:
        return tuple(self.kind.parse(part) for part in text.split(","))

    def format_value(self, v: Any) -> str:
        return self.kind.format(v)

    def format_tuple(self, xs: Sequence[Any]) -> str:
        return "(" + ", ".join(self.kind.format(v) for v in xs) + ")"


def _check_args(model: StructureModel, what: str, index: int, arities: tuple[int, ...], args: tuple) -> None:
    if not 1 <= index <= len(arities):
        raise StructureError(f"{model.name} has no {what} with index {index}")
    if len(args) != arities[index - 1]:
        raise StructureError(
            f"{what} {index} of {model.name} takes {arities[index - 1]} argument(s), got {len(args)}"
        )


def eval_operation(model: StructureModel, op_index: int, args: tuple) -> Any:
    _check_args(model, "operation", op_index, model.signature.op_arities, args)
    for v in args:
        if not model.kind.check(v):
            raise StructureError(f"value {v!r} is not in the universe of {model.name}")
    return model.operations[op_index - 1](*args)


def eval_relation(model: StructureModel, rel_index: int, args: tuple) -> bool:
    _check_args(model, "relation", rel_index, model.signature.rel_arities, args)
    return bool(model.relations[rel_index - 1](*args))


def meta_equal(model: StructureModel, x: Any, y: Any) -> bool:
    """Identity of universe elements, as seen from outside any program."""
    return model.kind.equal(x, y)


def with_identity(model: StructureModel) -> StructureModel:
    """Return ``model`` extended by the identity relation as its last relation."""
    sig = model.signature
    if sig.identity_rel_index is not None:
        return model
    kind = model.kind
    new_sig = SignatureDescriptor(
        sig.constant_count, sig.op_arities, sig.rel_arities + (2,), len(sig.rel_arities) + 1
    )
    return StructureModel(
        name=f"{model.name}+id",
        signature=new_sig,
        constants=model.constants,
        operations=model.operations,
        relations=model.relations + (kind.equal,),
        kind=kind,
        distinguished_pair=model.distinguished_pair,
    )


# ---------------------------------------------------------------------------
# builtin structures


def _sub_l(w: str) -> str:
    return w[-1:]


def _sub_r(w: str) -> str:
    return w[:-1]


def _a1() -> StructureModel:
    pairs = {("", ""), ("a", "a"), ("b", "b")}
    return StructureModel(
        name="A1",
        signature=SignatureDescriptor(3, (1, 1), (2,)),
        constants=("a", "b", ""),
        operations=(_sub_l, _sub_r),
        relations=(lambda x, y: (x, y) in pairs,),
        kind=StringKind(),
    )


def _atoms4(name: str, c1: str, c2: str) -> StructureModel:
    a, b = Atom("a"), Atom("b")
    return StructureModel(
        name=name,
        signature=SignatureDescriptor(2, (), (1, 1)),
        constants=(Atom(c1), Atom(c2)),
        operations=(),
        relations=(lambda x: x == a, lambda x: x == b),
        kind=AtomKind("abcd"),
    )


def _head(x: Any) -> Any:
    return x.head() if isinstance(x, Stream) else x


def _tail(x: Any) -> Any:
    return x.tail() if isinstance(x, Stream) else x


def _a4() -> StructureModel:
    atoms = {Atom("a"), Atom("b")}
    return StructureModel(
        name="A4",
        signature=SignatureDescriptor(2, (1, 1), (2,)),
        constants=(Atom("a"), Atom("b")),
        operations=(_head, _tail),
        relations=(lambda x, y: x in atoms and x == y,),
        kind=StreamKind(),
    )


def rational_structure(target: Fraction | int | str = 1) -> StructureModel:
    """Rationals with constants 0 and ``target``, addition and the relation {target}."""
    t = Fraction(target)
    if t == 0:
        raise StructureError("the target constant must differ from 0")
    return StructureModel(
        name="AQ",
        signature=SignatureDescriptor(2, (2,), (1,)),
        constants=(Fraction(0), t),
        operations=(lambda x, y: x + y,),
        relations=(lambda x: x == t,),
        kind=RationalKind(),
    )


_BUILTINS: dict[str, Callable[[], StructureModel]] = {
    "A1": _a1,
    "A2": lambda: _atoms4("A2", "a", "b"),
    "A3": lambda: _atoms4("A3", "c", "d"),
    "A4": _a4,
    "AQ": rational_structure,
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin_structure(name: str) -> StructureModel:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise StructureError(
            f"unknown structure {name!r}; builtin structures are {', '.join(_BUILTINS)}"
        ) from None
    return factory()


# ---------------------------------------------------------------------------
# custom finite structures


def load_structure(desc: dict) -> StructureModel:
    """Build a finite structure from a declarative description.

    Keys: ``name``, ``universe`` (atom symbols), ``constants`` (symbols),
    ``operations`` (list of ``{"arity", "table"}``; table keys are the
    comma-joined argument symbols), ``relations`` (list of ``{"arity",
    "tuples"}``), optional ``identity`` (bool) and ``distinguished_pair``.
    """
    try:
        universe = list(desc["universe"])
        kind = AtomKind(universe)
        constants = tuple(kind.parse(c) for c in desc.get("constants", []))
        ops, op_arities = [], []
        for k, op in enumerate(desc.get("operations", []), start=1):
            arity = int(op["arity"])
            table = {}
            for key, val in op["table"].items():
                args = tuple(kind.parse(s) for s in key.split(","))
                if len(args) != arity:
                    raise StructureError(f"operation {k}: key {key!r} has wrong arity")
                table[args] = kind.parse(val)
            for args in itertools.product([Atom(u) for u in universe], repeat=arity):
                if args not in table:
                    raise StructureError(f"operation {k} is not total: missing {','.join(map(str, args))}")
            ops.append(lambda *a, _t=table: _t[a])
            op_arities.append(arity)
        rels, rel_arities = [], []
        for rel in desc.get("relations", []):
            arity = int(rel["arity"])
            tuples = frozenset(tuple(kind.parse(s) for s in tup) for tup in rel["tuples"])
            if any(len(t) != arity for t in tuples):
                raise StructureError("relation tuple of wrong arity")
            rels.append(lambda *a, _r=tuples: a in _r)
            rel_arities.append(arity)
        pair = desc.get("distinguished_pair", [1, 2] if len(constants) >= 2 else None)
        model = StructureModel(
            name=str(desc.get("name", "custom")),
            signature=SignatureDescriptor(len(constants), tuple(op_arities), tuple(rel_arities)),
            constants=constants,
            operations=tuple(ops),
            relations=tuple(rels),
            kind=kind,
            distinguished_pair=tuple(pair) if pair else None,
        )
    except KeyError as exc:
        raise StructureError(f"structure description lacks key {exc}") from None
    except (AttributeError, TypeError, ValueError) as exc:
        if isinstance(exc, StructureError):
            raise
        raise StructureError(f"malformed structure description: {exc}") from None
    if model.distinguished_pair is not None and model.c1 == model.c2:
        raise StructureError("distinguished constants must differ")
    return with_identity(model) if desc.get("identity") else model


def load_structure_file(path: str | Path) -> StructureModel:
    with open(path, encoding="utf-8") as fh:
        return load_structure(json.load(fh))


# ---------------------------------------------------------------------------
# small enumerations used by tests and by the CLI ``corpus`` command


def small_values(model: StructureModel, size: int = 2) -> list:
    """A deterministic list of small universe elements."""
    kind = model.kind
    if isinstance(kind, StringKind):
        return ["".join(p) for n in range(size + 1) for p in itertools.product("ab", repeat=n)]
    if isinstance(kind, AtomKind):
        return [Atom(s) for s in kind.symbols]
    if isinstance(kind, StreamKind):
        words = ["".join(p) for n in range(1, size + 1) for p in itertools.product("ab", repeat=n)]
        streams = [Stream(pre, per) for pre in [""] + words for per in words]
        uniq = list(dict.fromkeys(streams))
        return [Atom("a"), Atom("b")] + uniq
    if isinstance(kind, RationalKind):
        return sorted({Fraction(p, q) for p in range(-size, size + 1) for q in range(1, size + 1)})
    raise StructureError(f"no enumeration for structure {model.name}")


def corpus(model: StructureModel, max_len: int = 2, size: int = 2) -> list[tuple]:
    """All tuples of length 1..max_len over ``small_values(model, size)``."""
    vals = small_values(model, size)
    return [t for n in range(1, max_len + 1) for t in itertools.product(vals, repeat=n)]
