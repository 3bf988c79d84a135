from __future__ import annotations

import pytest

from dlivm.errors import ArityError, NotStratifiableError, SafetyError
from dlivm.model import Atom, Program, Rule, RuleInstance, Var, check_safety, stratify
from dlivm.parser import parse_program, parse_rules


def one_rule(text):
    return parse_rules(text)[0]


class TestSafety:
    def test_join_rule_is_safe(self):
        check_safety(one_rule("S(Y1,Y2) :- R(X,Y1), R(X,Y2)."))

    def test_unbound_head_variable(self):
        with pytest.raises(SafetyError) as exc:
            check_safety(one_rule("S(Y) :- R(X)."))
        assert exc.value.variable == "Y"

    def test_builtin_target_counts_as_bound(self):
        check_safety(one_rule("D(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2."))

    def test_chained_builtins(self):
        check_safety(one_rule("P(W) :- Q(X), Z = X + 1, W = Z * 2."))

    def test_builtin_over_unbound_variable(self):
        with pytest.raises(SafetyError):
            check_safety(one_rule("P(Z) :- Q(X), Z = X + Y."))

    def test_negative_only_variable(self):
        with pytest.raises(SafetyError) as exc:
            check_safety(one_rule("P(X) :- Q(X), not R(X,Y)."))
        assert exc.value.variable == "Y"


class TestStratify:
    def test_path_program(self):
        program = parse_program("D(Y,Z) :- B(a,Y,Z).\nD(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.\n")
        st = program.strata
        assert st.of("B") == 1 and st.of("D") == 2
        assert st.max_stratum == 2
        assert len(st.nonrecursive[2]) == 1 and len(st.recursive[2]) == 1
        assert str(st.recursive[2][0]).startswith("D(Y,Z) :- D(X,Z1)")

    def test_single_recursive_rule(self):
        st = parse_program("A(Y) :- A(X), B(X,Y).").strata
        assert (st.of("B"), st.of("A")) == (1, 2)
        assert st.recursive[2] and not st.nonrecursive.get(2)

    def test_negation_on_cycle(self):
        with pytest.raises(NotStratifiableError):
            parse_program("P(X) :- Q(X), not P(X).")

    def test_negation_through_longer_cycle(self):
        with pytest.raises(NotStratifiableError) as exc:
            parse_program("P(X) :- Q(X), not R(X).\nR(X) :- P(X).")
        assert set(exc.value.predicates) == {"P", "R"}

    def test_negation_across_strata(self):
        st = parse_program("P(X) :- Q(X), not R(X).\nR(X) :- S(X).").strata
        assert st.of("P") > st.of("R") >= st.of("S")

    def test_admissibility_over_all_rules(self):
        text = """
        T(X,Y) :- E(X,Y).
        T(X,Z) :- T(X,Y), E(Y,Z).
        U(X) :- N(X), not T(X,X).
        V(X) :- U(X), not W(X).
        W(X) :- N(X), not E(X,X).
        """
        program = parse_program(text)
        st = program.strata
        for r in program.rules:
            h = st.of(r.head.pred)
            assert all(h >= st.of(a.pred) for a in r.pos)
            assert all(h > st.of(a.pred) for a in r.neg)
        # each rule in exactly one partition cell
        cells = [r for s in range(1, st.max_stratum + 1) for r in st.rules(s)]
        assert sorted(map(str, cells)) == sorted(map(str, program.rules))

    def test_deterministic(self):
        text = "A(X) :- B(X).\nC(X) :- A(X), not D(X).\nD(X) :- B(X).\n"
        assert stratify(parse_rules(text)) == stratify(parse_rules(text))

    def test_data_only_predicate(self):
        st = parse_program("A(X) :- B(X).").strata
        assert st.of("Z") == 1

    def test_empty_program(self):
        program = Program([])
        assert program.max_stratum == 1 and len(program) == 0


class TestProgram:
    def test_arity_conflict(self):
        with pytest.raises(ArityError):
            parse_program("A(X) :- B(X).\nA(X,Y) :- B(X), B(Y).")

    def test_rule_variables_order(self):
        r = one_rule("D(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.")
        assert [v.name for v in r.variables] == ["X", "Z1", "Y", "Z2", "Z"]

    def test_rule_instance_grounding(self):
        r = one_rule("S(Y1,Y2) :- R(X,Y1), R(X,Y2), not T(Y1).")
        inst = RuleInstance(r, ("a1", "b", "c1"))
        assert inst.head == ("S", "b", "c1")
        assert inst.positive == (("R", "a1", "b"), ("R", "a1", "c1"))
        assert inst.negative == (("T", "b"),)

    def test_var_interning_and_equality(self):
        assert Var("X") == Var("X")
        assert Atom("R", (Var("X"), "a")).is_ground() is False
        assert Atom("R", ("b", 1)).is_ground()

    def test_rule_equality_ignores_line(self):
        a = Rule(Atom("P", (Var("X"),)), (Atom("Q", (Var("X"),)),), line=1)
        b = Rule(Atom("P", (Var("X"),)), (Atom("Q", (Var("X"),)),), line=9)
        assert a == b and hash(a) == hash(b)
