"""Bundled example programs, each tied to the structure it is meant for."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..program import Program, parse_program
from ..structures import StructureModel, builtin_structure, with_identity


@dataclass(frozen=True)
class Fixture:
    name: str
    structure: str
    summary: str

    @property
    def source(self) -> str:
        return resources.files(__name__).joinpath(f"{self.name}.sp").read_text(encoding="utf-8")

    @property
    def golden(self) -> str:
        return resources.files(__name__).joinpath(f"{self.name}.golden").read_text(encoding="utf-8")

    def model(self, identity: bool = False) -> StructureModel:
        m = builtin_structure(self.structure)
        return with_identity(m) if identity else m

    def program(self, model: StructureModel | None = None) -> Program:
        """Parse under ``model``'s signature (the fixture's own structure by default)."""
        m = model if model is not None else self.model()
        return parse_program(self.source, m.signature)


_ENTRIES = [
    ("p_m1", "A1", "semi-decider of identity"),
    ("p_m2", "A1", "co-semi-decider of identity"),
    ("a1_chi_id", "A1", "characteristic function of identity"),
    ("a1_semi_id", "A1", "semi-decider of identity"),
    ("a1_co_semi_id", "A1", "semi-decider of non-identity"),
    ("a1_semi_a", "A1", "semi-decider of the word a"),
    ("a2_rec_a", "A2", "semi-decider of {a}"),
    ("a2_rec_b", "A2", "semi-decider of {b}"),
    ("a2_co_a", "A2", "semi-decider of the complement of {a}"),
    ("a2_co_b", "A2", "semi-decider of the complement of {b}"),
    ("a2_chi_a", "A2", "characteristic function of {a}"),
    ("a2_chi_b", "A2", "characteristic function of {b}"),
    ("a2_semi_pair", "A2", "semi-decider of {a, b}"),
    ("a2_ndb_pair", "A2", "label guessing, halts on a and b"),
    ("a2_ndb_choice", "A2", "label guessing, outputs c1 or c2"),
    ("a2_nu_choice", "A2", "nu guess as output"),
    ("a2_dnd_first", "A2", "outputs the first digital guess"),
    ("a2_dnd_ignore", "A2", "ignores its digital guesses"),
    ("a3_m_cd_verbatim", "A3", "{c, d} recognizer as printed (defective)"),
    ("a3_m_cd", "A3", "semi-decider of {c, d}"),
    ("a3_m_ab_star_verbatim", "A3", "{a, b} plus long tuples, as printed (defective)"),
    ("a3_m_ab_star", "A3", "semi-decider of {a, b} plus long tuples"),
    ("a4_co_semi", "A4", "halts unless the two streams are equal"),
    ("aq_subset_ndb", "AQ", "subset sum by label guessing"),
    ("aq_subset_nu", "AQ", "subset sum by nu guesses"),
    ("aq_subset_dnd", "AQ", "subset sum by digital guesses"),
    ("aq_semi_zero", "AQ", "semi-decider of {0}"),
    ("aq_semi_target", "AQ", "semi-decider of {t}"),
    ("aq_semi_pair", "AQ", "semi-decider of {0, t}"),
    ("stop", "A2", "one-instruction program"),
]

FIXTURES: dict[str, Fixture] = {name: Fixture(name, s, d) for name, s, d in _ENTRIES}


def fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}") from None


def load(name: str, model: StructureModel | None = None) -> Program:
    return fixture(name).program(model)
