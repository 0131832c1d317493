import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bssram.structures import (
    Atom, Stream, StructureError, builtin_names, builtin_structure, corpus, eval_operation, eval_relation,
    load_structure, load_structure_file, meta_equal, small_values, with_identity,
)

A1 = builtin_structure("A1")
A4 = builtin_structure("A4")
AQ = builtin_structure("AQ")

words = st.text(alphabet="ab", max_size=6)


def test_a1_operations_split_off_the_last_letter():
    assert eval_operation(A1, 2, ("baa",)) == "ba"
    assert eval_operation(A1, 1, ("baa",)) == "a"
    assert eval_operation(A1, 1, ("ab",)) == "b"
    assert eval_operation(A1, 1, ("",)) == ""
    assert eval_operation(A1, 2, ("",)) == ""


@given(words)
def test_a1_split_recombines(w):
    assert eval_operation(A1, 2, (w,)) + eval_operation(A1, 1, (w,)) == w


def test_a1_constants_and_relation():
    assert A1.constants == ("a", "b", "")
    assert (A1.c1, A1.c2) == ("a", "b")
    assert eval_relation(A1, 1, ("a", "a"))
    assert eval_relation(A1, 1, ("", ""))
    assert not eval_relation(A1, 1, ("a", "b"))


def test_atom_structures_recognize_a_and_b():
    a, b, c, d = (Atom(s) for s in "abcd")
    for name in ("A2", "A3"):
        m = builtin_structure(name)
        assert [eval_relation(m, 1, (v,)) for v in (a, b, c, d)] == [True, False, False, False]
        assert [eval_relation(m, 2, (v,)) for v in (a, b, c, d)] == [False, True, False, False]
    assert (builtin_structure("A2").c1, builtin_structure("A2").c2) == (a, b)
    assert (builtin_structure("A3").c1, builtin_structure("A3").c2) == (c, d)


def test_streams_are_canonical():
    assert Stream("ab", "ab") == Stream("", "ab")
    assert Stream("", "abab") == Stream("", "ab")
    assert Stream("a", "ba") == Stream("", "ab")
    assert Stream("b", "a") != Stream("", "a")
    assert Stream("ba", "a").unfold(5) == "baaaa"
    with pytest.raises(StructureError):
        Stream("a", "")


@given(words, words.filter(bool), st.integers(0, 3), st.integers(1, 3))
def test_stream_equality_is_equality_of_infinite_words(prefix, period, k, r):
    s = Stream(prefix, period)
    t = Stream(prefix + period * k, period * r)
    assert s == t and hash(s) == hash(t)
    assert s.unfold(20) == t.unfold(20)


def test_a4_head_and_tail():
    s = A4.parse_value("ba|ab")
    assert eval_operation(A4, 1, (s,)) == Atom("b")
    assert eval_operation(A4, 2, (s,)) == A4.parse_value("a|ab")
    assert eval_relation(A4, 1, (Atom("a"), Atom("a")))
    assert not eval_relation(A4, 1, (Atom("a"), Atom("b")))
    # r1 relates letters only, never two streams
    assert not eval_relation(A4, 1, (s, s))


def test_rationals_add_exactly():
    assert eval_operation(AQ, 1, (Fraction(1, 3), Fraction(2, 3))) == 1
    assert AQ.parse_value("-1/2") == Fraction(-1, 2)
    assert AQ.format_value(Fraction(3, 4)) == "3/4"
    assert eval_relation(AQ, 1, (Fraction(1),))
    assert not eval_relation(AQ, 1, (Fraction(0),))


@pytest.mark.parametrize("name", builtin_names())
def test_distinguished_constants_differ(name):
    m = builtin_structure(name)
    assert not meta_equal(m, m.c1, m.c2)


@pytest.mark.parametrize("name", builtin_names())
def test_identity_relation_agrees_with_meta_equal(name):
    m = with_identity(builtin_structure(name))
    rel = m.signature.identity_rel_index
    assert rel == len(m.signature.rel_arities)
    vals = small_values(m)
    for x in vals:
        for y in vals:
            assert eval_relation(m, rel, (x, y)) == meta_equal(m, x, y)
    assert with_identity(m) is m


@pytest.mark.parametrize("name", builtin_names())
def test_literals_round_trip(name):
    m = builtin_structure(name)
    for v in small_values(m):
        assert meta_equal(m, m.parse_value(m.format_value(v)), v)


def test_empty_word_prints_as_epsilon():
    assert A1.format_value("") == "ε"
    assert A1.parse_value("ε") == ""
    assert A1.parse_tuple("ab,ε") == ("ab", "")


def test_arity_and_membership_are_checked():
    with pytest.raises(StructureError):
        eval_operation(A1, 1, ("a", "b"))
    with pytest.raises(StructureError):
        eval_operation(A1, 3, ("a",))
    with pytest.raises(StructureError):
        eval_operation(A1, 1, ("abc",))
    with pytest.raises(StructureError):
        builtin_structure("A9")


def test_corpus_sizes():
    assert len(small_values(A1, 2)) == 7
    assert len(corpus(builtin_structure("A2"), max_len=2)) == 4 + 16


def test_finite_structure_from_json(tmp_path):
    desc = {
        "name": "Z3",
        "universe": ["0", "1", "2"],
        "constants": ["0", "1"],
        "operations": [{"arity": 2, "table": {f"{x},{y}": str((x + y) % 3) for x in range(3) for y in range(3)}}],
        "relations": [{"arity": 1, "tuples": [["0"]]}],
        "identity": True,
    }
    path = tmp_path / "z3.json"
    path.write_text(json.dumps(desc))
    m = load_structure_file(path)
    assert m.signature.op_arities == (2,)
    v = m.parse_value
    assert eval_operation(m, 1, (v("2"), v("2"))) == v("1")
    assert eval_relation(m, 1, (v("0"),)) and not eval_relation(m, 1, (v("1"),))
    assert eval_relation(m, m.signature.identity_rel_index, (v("2"), v("2")))
    for broken in ({**desc, "constants": ["7"]}, {**desc, "constants": [0]}, {"constants": []},
                   {**desc, "operations": [{"arity": 2, "table": {"0,0": "0"}}]}):
        with pytest.raises(StructureError):
            load_structure(broken)
