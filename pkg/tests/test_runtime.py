import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from generators import random_ndb_program

from bssram.fixtures import load
from bssram.program import IReg, ZInd, ZReg, parse_program
from bssram.runtime import (
    Configuration, ExplorationBudget, MachineError, Tape, explore, format_configuration, input_config,
    input_configs_dnd, nu_successors, oracle_empty, output_of, resolve_oracle, run_deterministic, step,
    trace_configurations, trace_to_json,
)
from bssram.structures import Atom, builtin_structure, small_values, with_identity

A1 = builtin_structure("A1")
A2 = builtin_structure("A2")
A3 = builtin_structure("A3")
a, b, c, d = (Atom(s) for s in "abcd")


def prog(text, m=A2):
    return parse_program(text, m.signature)


def test_input_configuration_layout():
    p = prog(".tapes 2\n1: stop.\n")
    c0 = input_config(p, ("baa", "aaa"))
    assert c0.label == 1
    assert c0.tapes[0] == Tape((2,), ("baa", "aaa"), "aaa")
    assert c0.tapes[1].index == (1,) and c0.tapes[1].fill == "aaa"
    assert format_configuration(c0, A1) == "(1 . [(2) . (baa, aaa | aaa)] [(1) . ( | aaa)])"
    with pytest.raises(MachineError):
        input_config(p, ())


def test_tapes_compare_by_content_not_storage():
    assert Tape((1,), (a, b, b), b) == Tape((1,), (a,), b)
    assert Tape((1,), (a, b), b) != Tape((1,), (a,), a)


def test_single_steps():
    p = prog("1: Z3 := c2;\n2: Z[I1] := Z3;\n3: I1 := I1 + 1;\n4: I1 := 1;\n5: stop.\n")
    cfg = input_config(p, (a, c))
    trace = [cfg]
    for _ in range(5):
        succ = step(p, A2, None, trace[-1])
        if not succ:
            break
        trace.append(succ[0])
    assert [t.label for t in trace] == [1, 2, 3, 4, 5]
    assert trace[1].z(3) == b
    assert trace[2].z(2) == b  # I1 = 2 addresses cell 2
    assert trace[3].nu == (3,)
    assert trace[4].nu == (1,)
    assert step(p, A2, None, trace[-1]) == []


def test_branch_self_loop_is_a_successor_at_the_same_label():
    p = load("p_m1")
    cfg = Configuration(8, (Tape((2, 2), ("", "", "b", "a", ""), "aaa"),))
    (nxt,) = step(p, A1, None, cfg)
    assert nxt == cfg


def test_copy_leaves_the_source_alone():
    p = prog("1: Z2 := Z1;\n2: stop.\n")
    out = run_deterministic(p, A2, (c, d)).final
    assert out.z(1) == c and out.z(2) == c


@pytest.mark.parametrize("x, halts", [((a,), True), ((b,), False), ((a, b), False)])
def test_run_statuses(x, halts):
    r = run_deterministic(load("a2_rec_a"), A2, x, 50)
    assert r.halted == halts
    assert r.status == ("halted" if halts else "budget_exhausted")
    assert r.steps == (2 if halts else 50)
    assert (r.output is not None) == halts


def test_static_loops_are_reported_when_asked():
    r = run_deterministic(load("a2_rec_a"), A2, (b,), 10**6, stop_on_static_loop=True)
    assert r.status == "looping"
    assert r.steps < 5


def test_output_is_the_prefix_up_to_i1():
    r = run_deterministic(load("a2_chi_b"), A2, (b,))
    assert r.output == (a,)
    assert output_of(r.final) == (a,)


def test_ndb_exploration_finds_both_outputs():
    p = load("a2_ndb_choice")
    res = explore(p, A2, (c,), collect=True)
    assert res.accepted and res.complete
    assert sorted(res.outputs) == [(a,), (b,)]
    assert res.accepting.labels[0] == 1 and res.accepting.labels[-1] == p.stop_label


def test_ndb_acceptance_path_is_a_real_run():
    p = load("a2_ndb_pair")
    for x in [(a,), (b,), (c,)]:
        res = explore(p, A2, x)
        if res.accepted:
            labels = res.accepting.labels
            assert labels[-1] == p.stop_label
            assert len(labels) - 1 <= res.max_depth + 1


def test_nu_guess_semantics():
    p = load("a2_nu_choice")
    assert sorted(explore(p, A2, (c,), collect=True).outputs) == [(a,), (b,)]
    assert not explore(p, A2, (b,), ExplorationBudget(max_steps=100)).accepted
    empty = explore(p, A2, (c,), oracle=oracle_empty())
    assert not empty.accepted and empty.blocked == 1 and empty.complete


def test_relational_nu_uses_the_argument_tuple():
    p = prog(".class NU c1c2_2\n1: Z2 := nu(Z1);\n2: Z1 := Z2;\n3: stop.\n")
    first = explore(p, A2, (c,), collect=True)
    rel_c = explore(p, A2, (c,), collect=True, nu_semantics="relational")
    rel_a = explore(p, A2, (a,), collect=True, nu_semantics="relational")
    assert sorted(first.outputs) == [(a,), (b,)]
    assert rel_c.outputs == [] and rel_c.blocked == 1
    assert sorted(rel_a.outputs) == [(a,), (b,)]


def test_nu_successors_write_the_destination():
    cfg = input_config(load("a2_nu_choice"), (c,))
    succ = nu_successors(resolve_oracle("c1c2_inf", A2), cfg, ZReg(1, 2))
    assert [s.z(2) for s in succ] == [a, b]
    assert all(s.label == 2 for s in succ)
    ind = nu_successors(resolve_oracle("c1c2_2", A2), cfg, ZInd(1, IReg(1, 1)), next_label=7)
    assert [s.z(1) for s in ind] == [a, b] and ind[0].label == 7
    with pytest.raises(MachineError):
        resolve_oracle("nope", A2)


def test_dnd_roots_enumerate_guess_blocks():
    p = load("a2_dnd_first")
    roots = input_configs_dnd(p, (c,), A2, 2)
    assert len(roots) == 2 + 4
    assert all(r.nu[0] == 1 for r in roots)
    assert {r.tapes[0].cells[1:] for r in roots} == {(a,), (b,), (a, a), (a, b), (b, a), (b, b)}
    res = explore(p, A2, (c,), ExplorationBudget(guess_length_bound=3), collect=True)
    assert sorted(res.outputs) == [(a,), (b,)]


def test_dnd_needs_distinguished_constants():
    with pytest.raises(MachineError):
        input_configs_dnd(load("stop"), (a,), A2, 2)


def test_det_exploration_proves_divergence():
    res = explore(load("p_m2"), A1, ("", ""), ExplorationBudget(max_steps=100))
    assert not res.accepted and res.complete
    res = explore(load("p_m1"), A1, ("baa", "aaa"), ExplorationBudget(max_steps=100))
    assert not res.accepted and res.complete


def test_verbatim_cd_listing_is_defective():
    verbatim = load("a3_m_cd_verbatim")
    assert verbatim.length == 5
    for v in (a, b, c, d):
        assert not run_deterministic(verbatim, A3, (v,), 1000).halted
    for v, w in itertools.product((a, b, c, d), repeat=2):
        assert run_deterministic(verbatim, A3, (v, w), 1000).halted == (w in (c, d))
    star = load("a3_m_ab_star_verbatim")
    assert all(run_deterministic(star, A3, (v,), 1000).halted for v in (a, b, c, d))


def test_trace_json_is_serializable():
    tr = trace_configurations(load("a2_rec_a"), A2, (a,))
    doc = json.loads(trace_to_json(tr, A2))
    assert len(doc) == 3
    with pytest.raises(MachineError):
        trace_configurations(load("a2_ndb_choice"), A2, (a,))


def test_run_deterministic_rejects_guessing_programs():
    with pytest.raises(MachineError):
        run_deterministic(load("a2_ndb_choice"), A2, (a,))


CORPUS = [x for n in (1, 2) for x in itertools.product(small_values(A2), repeat=n)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12), st.integers(0, 8))
def test_acceptance_is_monotone_in_the_budget(seed, steps, extra):
    p = random_ndb_program(random.Random(seed), A2.signature)
    for x in CORPUS[::3]:
        small = explore(p, A2, x, ExplorationBudget(max_steps=steps))
        large = explore(p, A2, x, ExplorationBudget(max_steps=steps + extra))
        assert not small.accepted or large.accepted
        if small.complete and not small.accepted:
            assert not large.accepted


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_deduplication_does_not_change_acceptance(seed):
    p = random_ndb_program(random.Random(seed), A2.signature)
    for x in CORPUS[::4]:
        budget = ExplorationBudget(max_steps=8)
        assert explore(p, A2, x, budget).accepted == explore(p, A2, x, budget, dedup=False).accepted


def test_identity_relation_is_usable_by_programs():
    m = with_identity(A2)
    p = parse_program("1: if Z1 = Z2 then goto 3 else goto 2;\n2: goto 2;\n3: stop.\n", m.signature)
    assert run_deterministic(p, m, (c, c), 100).halted
    assert not run_deterministic(p, m, (c, d), 100).halted
