from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlivm.errors import CounterOverflow, CounterUnderflow
from dlivm.evaluation import materialise
from dlivm.harness import gen_example1, gen_example3
from dlivm.model import INT64_MAX, Atom, Program, Var
from dlivm.parser import parse_program
from dlivm.store import BelowStratum, CounterMap, EngineState, FactSet, Minus, Union, match, recount_counters

X, Y = Var("X"), Var("Y")


def test_match_example1():
    _, E = gen_example1(2)
    got = list(match(FactSet(E), Atom("R", (X, "b"))))
    assert got == [{X: "a1"}, {X: "a2"}]


def test_match_empty_store():
    assert list(match(FactSet(), Atom("R", (X, Y)))) == []


def test_match_ground_fact():
    store = FactSet([("R", "a", "b")])
    assert list(match(store, Atom("R", ("a", "b")), {Y: 1})) == [{Y: 1}]
    assert list(match(store, Atom("R", ("a", "c")))) == []


def test_match_repeated_variable():
    store = FactSet([("R", "a", "a"), ("R", "a", "b")])
    assert list(match(store, Atom("R", (X, X)))) == [{X: "a"}]


def test_match_respects_bindings():
    store = FactSet([("R", "a", 1), ("R", "b", 2)])
    assert list(match(store, Atom("R", (X, Y)), {X: "b"})) == [{X: "b", Y: 2}]


values = st.sampled_from(["a", "b", "c", 0, 1])
facts = st.tuples(st.sampled_from(["R", "S"]), values, values)
patterns = st.tuples(st.sampled_from(["R", "S"]), st.sampled_from([X, Y, "a", 0]), st.sampled_from([X, Y, "b", 1]))


@given(st.lists(facts, max_size=30), patterns)
def test_match_equals_linear_scan(fs, pat):
    store = FactSet(fs)
    atom = Atom(pat[0], pat[1:])
    got = [tuple(b.get(t, t) if type(t) is Var else t for t in atom.args) for b in match(store, atom)]
    expected = []
    for f in dict.fromkeys(fs):
        if f[0] != atom.pred:
            continue
        env = {}
        if all((env.setdefault(t, v) == v) if type(t) is Var else t == v for t, v in zip(atom.args, f[1:])):
            expected.append(f[1:])
    assert got == expected
    assert len(set(got)) == len(got)


def test_factset_add_discard_and_index():
    s = FactSet()
    assert s.add(("R", "a", "b")) and not s.add(("R", "a", "b"))
    s.add(("R", "a", "c"))
    assert set(s.lookup("R", [(0, "a")])) == {("R", "a", "b"), ("R", "a", "c")}
    assert s.discard(("R", "a", "b")) and not s.discard(("R", "a", "b"))
    assert list(s.lookup("R", [(1, "b")])) == []
    assert len(s) == 1 and s.size("R") == 1


def test_factset_copy_is_independent():
    s = FactSet([("R", 1)])
    t = s.copy()
    t.add(("R", 2))
    assert ("R", 2) not in s and t == FactSet([("R", 1), ("R", 2)])


def test_views():
    I = FactSet([("R", 1), ("R", 2), ("S", 1)])
    D = FactSet([("R", 1)])
    A = FactSet([("R", 3)])
    m = Minus(I, D)
    assert ("R", 1) not in m and ("R", 2) in m
    assert sorted(m.lookup("R", [])) == [("R", 2)]
    u = Union(m, A)
    assert sorted(u.lookup("R", [])) == [("R", 2), ("R", 3)]
    assert ("R", 3) in u
    strata = parse_program("S(X) :- R(X).").strata
    below = BelowStratum(I, strata, strata.of("S"))
    assert ("R", 1) in below and ("S", 1) not in below
    assert list(below.lookup("S", [])) == []


def test_counter_map():
    c = CounterMap()
    c.inc_nr(("A", "a"))
    c.inc_r(("A", "a"))
    c.inc_r(("A", "a"))
    assert c[("A", "a")] == (1, 2)
    c.dec_r(("A", "a"))
    c.dec_nr(("A", "a"))
    assert c[("A", "a")] == (0, 1)
    assert c[("A", "zz")] == (0, 0)
    with pytest.raises(CounterUnderflow):
        c.dec_nr(("A", "a"))
    c.cnr[("B",)] = INT64_MAX
    with pytest.raises(CounterOverflow):
        c.inc_nr(("B",))


def test_counter_modes():
    assert not CounterMap("none").tracks_nr
    assert CounterMap("nr").tracks_nr and not CounterMap("nr").tracks_r
    with pytest.raises(ValueError):
        CounterMap("all")


def test_recount_initial_counters():
    program, E = gen_example3()
    state = materialise(program, E)
    counters = recount_counters(state)
    expected = {
        ("A", "a"): (1, 0),
        ("A", "b"): (1, 0),
        ("A", "c"): (0, 2),
        ("A", "d"): (1, 1),
        ("A", "e"): (0, 1),
    }
    assert {f: v for f, v in counters.as_dict().items() if f[0] == "A"} == expected
    assert all(v == (1, 0) for f, v in counters.as_dict().items() if f[0] == "B")


def test_recount_empty_program():
    E = [("R", "a"), ("S", 1, 2)]
    state = EngineState(Program([]), FactSet(E), FactSet(E))
    assert recount_counters(state).as_dict() == {f: (1, 0) for f in E}


def test_recount_example1_n2():
    program, E = gen_example1(2)
    counters = recount_counters(materialise(program, E))
    # S(b,b) comes from R(a1,b),R(a1,b) and R(a2,b),R(a2,b)
    assert counters[("S", "b", "b")] == (2, 0)
    assert counters[("S", "b", "c1")] == (1, 0)


def test_absent_fact_has_zero_counters():
    program, E = gen_example3()
    state = materialise(program, E)
    assert state.counters[("A", "zzz")] == (0, 0)
    assert set(state.counters.as_dict()) <= set(state.facts)
