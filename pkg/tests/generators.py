"""Random program generation shared by the property tests and the acceptance suite."""

from __future__ import annotations

import random

from bssram.program import (
    ConstAssign, Copy, Goto, IReg, IndexBranch, IndexCopy, IndexDiv2, IndexInc, IndexMod2, IndexPow2, IndexSet,
    IndexSetOne, Init, NdbGoto, NuGuess, OpApply, RelBranch, Stop, TapeCopy, ZInd, ZReg, make_program,
)
from bssram.structures import SignatureDescriptor


def random_instruction(rng: random.Random, sig: SignatureDescriptor, length: int, *, allow_ndb: bool,
                       tapes: int = 1, zmax: int = 3, imax: int = 3):
    t = rng.randint(1, tapes)

    def lab() -> int:
        return rng.randint(1, length)

    def z():
        if rng.random() < 0.2:
            return ZInd(t, IReg(t, rng.randint(1, imax)))
        return ZReg(t, rng.randint(1, zmax))

    def i():
        return IReg(t, rng.randint(1, imax))

    kinds = ["const", "copy", "goto", "ibranch", "inc", "one"]
    if sig.rel_arities:
        kinds.append("rbranch")
    if allow_ndb:
        kinds.append("ndb")
    kind = rng.choice(kinds)
    if kind == "const":
        return ConstAssign(z(), rng.randint(1, sig.constant_count))
    if kind == "copy":
        return Copy(z(), z())
    if kind == "goto":
        return Goto(lab())
    if kind == "ibranch":
        return IndexBranch(i(), i(), lab(), lab())
    if kind == "inc":
        return IndexInc(i())
    if kind == "one":
        return IndexSetOne(i())
    if kind == "rbranch":
        r = rng.randint(1, len(sig.rel_arities))
        return RelBranch(r, tuple(ZReg(t, rng.randint(1, zmax)) for _ in range(sig.rel_arities[r - 1])), lab(), lab())
    return NdbGoto(lab(), lab())


def random_ndb_program(rng: random.Random, sig: SignatureDescriptor, max_len: int = 12, max_ndb: int = 3):
    """A 1-tape NDB program with at most ``max_len`` labels and ``max_ndb`` label guesses."""
    length = rng.randint(2, max_len)
    body = []
    n_ndb = 0
    for _ in range(length - 1):
        ins = random_instruction(rng, sig, length, allow_ndb=n_ndb < max_ndb)
        n_ndb += isinstance(ins, NdbGoto)
        body.append(ins)
    return make_program(body + [Stop()], sig, machine_class="NDB")


def random_program(rng: random.Random, sig: SignatureDescriptor, max_len: int = 15):
    """A program mixing every instruction kind, for syntax round trips (not meant to be run)."""
    length = rng.randint(1, max_len)
    tapes = rng.randint(1, 3)
    guess = rng.choice(["none", "ndb", "nu"])
    extended = rng.random() < 0.4

    def i(t):
        return IReg(t, rng.randint(1, 4))

    def z(t):
        return ZInd(t, i(t)) if rng.random() < 0.3 else ZReg(t, rng.randint(1, 6))

    body = []
    for _ in range(length - 1):
        t = rng.randint(1, tapes)
        roll = rng.random()
        if guess == "nu" and roll < 0.15:
            args = None if rng.random() < 0.5 else tuple(z(t) for _ in range(rng.randint(1, 2)))
            body.append(NuGuess(z(t), args, t if args is None else 1))
        elif sig.op_arities and roll < 0.3:
            k = rng.randint(1, len(sig.op_arities))
            body.append(OpApply(z(t), k, tuple(z(t) for _ in range(sig.op_arities[k - 1]))))
        elif extended and roll < 0.45:
            body.append(rng.choice([
                TapeCopy(rng.randint(1, tapes), rng.randint(1, tapes)), Init(ZInd(t, i(t)), z(t)),
                IndexDiv2(i(t)), IndexMod2(i(t), i(t)), IndexSet(i(t), rng.randint(1, 9)),
                IndexPow2(i(t), i(t)), IndexCopy(i(t), i(t)),
            ]))
        else:
            body.append(random_instruction(rng, sig, length, allow_ndb=guess == "ndb", tapes=tapes, zmax=6,
                                           imax=4))
    return make_program(body + [Stop()], sig, tapes=tapes, name=rng.choice(["", "gen"]))
