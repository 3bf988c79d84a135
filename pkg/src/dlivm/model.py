"""Terms, atoms, rules and programs; safety checking and stratification.

Ground facts are plain tuples ``(predicate, arg1, ..., argk)``. Constants
are Python ``int`` (64-bit integers) or ``str``; a ``str`` constant is
either a bare symbol such as ``a1`` or a double-quoted string literal kept
with its quotes (``'"hello"'``), so the two kinds never collide.
Variables are :class:`Var` instances.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

import networkx as nx

from .errors import ArityError, NotStratifiableError, SafetyError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

Fact = tuple


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __post_init__(self):
        object.__setattr__(self, "name", sys.intern(self.name))

    def __str__(self):
        return self.name


Term = Union[Var, str, int]


def is_var(term) -> bool:
    return type(term) is Var


def render_constant(value) -> str:
    return str(value)


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> Iterator[Var]:
        return (t for t in self.args if type(t) is Var)

    def is_ground(self) -> bool:
        return not any(type(t) is Var for t in self.args)

    def ground(self, binding: dict) -> Fact:
        return (self.pred, *(binding[t] if type(t) is Var else t for t in self.args))

    def __str__(self):
        return f"{self.pred}({','.join(str(t) for t in self.args)})"


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str  # one of + - *
    left: object
    right: object

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


Expr = Union[Var, int, BinOp]


def expr_variables(expr) -> Iterator[Var]:
    if type(expr) is Var:
        yield expr
    elif type(expr) is BinOp:
        yield from expr_variables(expr.left)
        yield from expr_variables(expr.right)


def _render_expr(expr, top=True) -> str:
    if type(expr) is BinOp:
        text = f"{_render_expr(expr.left, False)} {expr.op} {_render_expr(expr.right, False)}"
        return text if top else f"({text})"
    return str(expr)


@dataclass(frozen=True, slots=True)
class Builtin:
    """``target = expr`` over integer arithmetic."""

    target: Var
    expr: Expr

    def expr_vars(self) -> tuple:
        return tuple(dict.fromkeys(expr_variables(self.expr)))

    def __str__(self):
        return f"{self.target} = {_render_expr(self.expr)}"


@dataclass(frozen=True, eq=False)
class Rule:
    head: Atom
    pos: tuple = ()
    neg: tuple = ()
    builtins: tuple = ()
    line: int | None = field(default=None, compare=False)
    # per-rule evaluation plans, filled lazily by the evaluator
    _plans: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in ("pos", "neg", "builtins"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def variables(self) -> tuple:
        """Rule variables, positive body first, in order of first occurrence."""
        seen = dict()
        for a in self.pos:
            seen.update(dict.fromkeys(a.variables()))
        for b in self.builtins:
            seen.setdefault(b.target)
            seen.update(dict.fromkeys(b.expr_vars()))
        for a in (self.head, *self.neg):
            seen.update(dict.fromkeys(a.variables()))
        return tuple(seen)

    def key(self):
        return (self.head, self.pos, self.neg, self.builtins)

    def __eq__(self, other):
        return isinstance(other, Rule) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __str__(self):
        body = [str(a) for a in self.pos]
        body += [f"not {a}" for a in self.neg]
        body += [str(b) for b in self.builtins]
        if not body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(body)}."


@dataclass(frozen=True)
class RuleInstance:
    rule: Rule
    substitution: tuple  # values aligned with rule.variables

    def binding(self) -> dict:
        return dict(zip(self.rule.variables, self.substitution))

    @property
    def head(self) -> Fact:
        return self.rule.head.ground(self.binding())

    @property
    def positive(self) -> tuple:
        b = self.binding()
        return tuple(a.ground(b) for a in self.rule.pos)

    @property
    def negative(self) -> tuple:
        b = self.binding()
        return tuple(a.ground(b) for a in self.rule.neg)


def check_safety(rule: Rule) -> None:
    """Raise :class:`SafetyError` unless every variable of ``rule`` is bound.

    Positive body atoms bind their variables; a built-in binds its target
    once all variables of its expression are bound.
    """
    bound = set()
    for a in rule.pos:
        bound.update(a.variables())
    pending = list(rule.builtins)
    progress = True
    while pending and progress:
        progress = False
        for b in list(pending):
            if all(v in bound for v in b.expr_vars()):
                bound.add(b.target)
                pending.remove(b)
                progress = True
    for v in rule.variables:
        if v not in bound:
            raise SafetyError(v.name, str(rule))


@dataclass(frozen=True)
class Stratification:
    stratum: dict  # predicate -> stratum index, 1-based
    max_stratum: int
    nonrecursive: dict  # stratum -> tuple of rules
    recursive: dict  # stratum -> tuple of rules

    def of(self, pred) -> int:
        # predicates unknown to the program only ever occur in data
        return self.stratum.get(pred, 1)

    def rules(self, s) -> tuple:
        return self.nonrecursive.get(s, ()) + self.recursive.get(s, ())

    def is_recursive(self, rule: Rule) -> bool:
        return any(rule is r for r in self.recursive.get(self.of(rule.head.pred), ()))


def stratify(rules: Iterable[Rule]) -> Stratification:
    """Finest stratification: one stratum per strongly connected component
    of the predicate dependency graph, numbered in topological order."""
    rules = list(rules)
    graph = nx.DiGraph()
    order = {}

    def note(pred):
        if pred not in order:
            order[pred] = len(order)
            graph.add_node(pred)

    negative_edges = []
    for r in rules:
        for a in r.pos:
            note(a.pred)
        for a in r.neg:
            note(a.pred)
        note(r.head.pred)
        for a in r.pos:
            graph.add_edge(a.pred, r.head.pred)
        for a in r.neg:
            graph.add_edge(a.pred, r.head.pred)
            negative_edges.append((a.pred, r.head.pred))

    cond = nx.condensation(graph)
    members = cond.graph["mapping"]
    for src, dst in negative_edges:
        if members[src] == members[dst]:
            comp = cond.nodes[members[src]]["members"]
            raise NotStratifiableError(sorted(comp, key=order.__getitem__))

    first = {c: min(order[p] for p in cond.nodes[c]["members"]) for c in cond.nodes}
    topo = list(nx.lexicographical_topological_sort(cond, key=first.__getitem__))
    index = {c: i + 1 for i, c in enumerate(topo)}
    stratum = {p: index[members[p]] for p in sorted(order, key=order.__getitem__)}

    nonrec: dict = {}
    rec: dict = {}
    for r in rules:
        s = stratum[r.head.pred]
        if any(stratum[a.pred] == s for a in r.pos):
            rec.setdefault(s, []).append(r)
        else:
            nonrec.setdefault(s, []).append(r)
    return Stratification(
        stratum=stratum,
        max_stratum=len(topo),
        nonrecursive={s: tuple(v) for s, v in nonrec.items()},
        recursive={s: tuple(v) for s, v in rec.items()},
    )


class Program:
    """A safe, stratifiable rule set together with its stratification."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self.rules = tuple(rules)
        self.arities = {}
        for r in self.rules:
            for a in (r.head, *r.pos, *r.neg):
                self.check_arity(a.pred, a.arity)
            check_safety(r)
        self.strata = stratify(self.rules)

    def check_arity(self, pred, arity):
        known = self.arities.setdefault(pred, arity)
        if known != arity:
            raise ArityError(pred, known, arity)

    def stratum_of(self, fact) -> int:
        return self.strata.of(fact[0])

    @property
    def max_stratum(self) -> int:
        # data-only predicates live in stratum 1, so there is always one
        return max(1, self.strata.max_stratum)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __str__(self):
        return "".join(f"{r}\n" for r in self.rules)


def render_fact(fact) -> str:
    return f"{fact[0]}({','.join(render_constant(c) for c in fact[1:])})"


def fact_sort_key(fact):
    # ints before strings inside one position keeps mixed columns orderable
    return (fact[0], len(fact), tuple((isinstance(c, str), c) for c in fact[1:]))
