"""Indexed fact storage, composed read-only views, and derivation counters."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CounterOverflow, CounterUnderflow
from .model import INT64_MAX, Program, Var, fact_sort_key, render_fact

_EMPTY = {}


class _Relation:
    __slots__ = ("facts", "index")

    def __init__(self, arity):
        self.facts = {}
        self.index = [{} for _ in range(arity)]


class FactSet:
    """Set of facts with one hash index per (predicate, argument position).

    Iteration follows insertion order. ``lookup`` hands back internal
    containers, so callers must not mutate the set while iterating a
    lookup result.
    """

    __slots__ = ("_facts", "_rels")

    def __init__(self, facts=()):
        self._facts = {}
        self._rels = {}
        for f in facts:
            self.add(f)

    def add(self, fact) -> bool:
        if fact in self._facts:
            return False
        self._facts[fact] = None
        rel = self._rels.get(fact[0])
        if rel is None:
            rel = self._rels[fact[0]] = _Relation(len(fact) - 1)
        rel.facts[fact] = None
        index = rel.index
        for pos in range(len(index)):
            bucket = index[pos].get(fact[pos + 1])
            if bucket is None:
                index[pos][fact[pos + 1]] = {fact: None}
            else:
                bucket[fact] = None
        return True

    def update(self, facts):
        for f in facts:
            self.add(f)

    def discard(self, fact) -> bool:
        if fact not in self._facts:
            return False
        del self._facts[fact]
        rel = self._rels[fact[0]]
        del rel.facts[fact]
        for pos, idx in enumerate(rel.index):
            bucket = idx[fact[pos + 1]]
            del bucket[fact]
            if not bucket:
                del idx[fact[pos + 1]]
        return True

    def __contains__(self, fact):
        return fact in self._facts

    contains = __contains__

    def __iter__(self):
        return iter(self._facts)

    def __len__(self):
        return len(self._facts)

    def __bool__(self):
        return bool(self._facts)

    def __eq__(self, other):
        if isinstance(other, FactSet):
            return self._facts.keys() == other._facts.keys()
        return NotImplemented

    def __repr__(self):
        return f"FactSet({{{', '.join(render_fact(f) for f in self._facts)}}})"

    def predicates(self):
        return [p for p, rel in self._rels.items() if rel.facts]

    def facts_of(self, pred):
        rel = self._rels.get(pred)
        return rel.facts if rel is not None else _EMPTY

    def size(self, pred) -> int:
        rel = self._rels.get(pred)
        return len(rel.facts) if rel is not None else 0

    def lookup(self, pred, bound):
        """Candidate facts of ``pred`` agreeing with the smallest index bucket
        among the ``(position, value)`` pairs in ``bound``. Callers still
        check the remaining bound positions."""
        rel = self._rels.get(pred)
        if rel is None:
            return _EMPTY
        if not bound:
            return rel.facts
        best = None
        index = rel.index
        for pos, val in bound:
            if pos >= len(index):
                return _EMPTY
            bucket = index[pos].get(val)
            if bucket is None:
                return _EMPTY
            if best is None or len(bucket) < len(best):
                best = bucket
        return best

    def copy(self) -> "FactSet":
        out = FactSet()
        out._facts = dict(self._facts)
        for pred, rel in self._rels.items():
            r = _Relation(0)
            r.facts = dict(rel.facts)
            r.index = [{v: dict(b) for v, b in idx.items()} for idx in rel.index]
            out._rels[pred] = r
        return out

    def sorted(self):
        return sorted(self._facts, key=fact_sort_key)

    def dump(self) -> str:
        """Sorted text in ``.facts`` format."""
        return "".join(f"{render_fact(f)}.\n" for f in self.sorted())


def match(store, atom, bindings=None):
    """Extensions of ``bindings`` (a dict Var -> constant) unifying ``atom``
    with a fact of ``store``, one per fact, in store order."""
    bindings = bindings or {}
    bound = []
    for p, t in enumerate(atom.args):
        if type(t) is Var:
            if t in bindings:
                bound.append((p, bindings[t]))
        else:
            bound.append((p, t))
    for fact in list(store.lookup(atom.pred, bound)):
        if len(fact) != len(atom.args) + 1:
            continue
        out = dict(bindings)
        for p, t in enumerate(atom.args):
            v = fact[p + 1]
            if type(t) is Var:
                if out.setdefault(t, v) != v:
                    break
            elif t != v:
                break
        else:
            yield out


# -- composed views ---------------------------------------------------------
#
# A view supports ``in``, ``lookup(pred, bound)`` and ``size(pred)``. Views
# reference the live working sets, so they always reflect the current D, A,
# P, ... without copying anything.


class Minus:
    """``base`` without the facts of any container in ``removed``."""

    __slots__ = ("base", "removed")

    def __init__(self, base, *removed):
        self.base = base
        self.removed = removed

    def __contains__(self, fact):
        if fact not in self.base:
            return False
        for r in self.removed:
            if fact in r:
                return False
        return True

    contains = __contains__

    def lookup(self, pred, bound):
        removed = self.removed
        if len(removed) == 1:
            r = removed[0]
            return [f for f in self.base.lookup(pred, bound) if f not in r]
        return [f for f in self.base.lookup(pred, bound) if not any(f in r for r in removed)]

    def size(self, pred):
        return self.base.size(pred)

    def __iter__(self):
        for f in self.base:
            if not any(f in r for r in self.removed):
                yield f


class Union:
    """Set union; facts in several parts are produced once."""

    __slots__ = ("parts",)

    def __init__(self, *parts):
        self.parts = parts

    def __contains__(self, fact):
        for p in self.parts:
            if fact in p:
                return True
        return False

    contains = __contains__

    def lookup(self, pred, bound):
        first = self.parts[0]
        out = list(first.lookup(pred, bound))
        for i in range(1, len(self.parts)):
            earlier = self.parts[:i]
            for f in self.parts[i].lookup(pred, bound):
                if not any(f in e for e in earlier):
                    out.append(f)
        return out

    def size(self, pred):
        return sum(p.size(pred) for p in self.parts)


class BelowStratum:
    """Facts of ``base`` whose predicate lies in a stratum below ``s``."""

    __slots__ = ("base", "strata", "s")

    def __init__(self, base, strata, s):
        self.base = base
        self.strata = strata
        self.s = s

    def __contains__(self, fact):
        return self.strata.of(fact[0]) < self.s and fact in self.base

    contains = __contains__

    def lookup(self, pred, bound):
        if self.strata.of(pred) >= self.s:
            return _EMPTY
        return self.base.lookup(pred, bound)

    def size(self, pred):
        return self.base.size(pred) if self.strata.of(pred) < self.s else 0


# -- counters ---------------------------------------------------------------

COUNTER_MODES = ("none", "nr", "both")


class CounterMap:
    """Nonrecursive and recursive derivation counts; absent facts are (0, 0).

    ``mode`` says which counters are tracked: ``none``, ``nr`` (nonrecursive
    only) or ``both``.
    """

    __slots__ = ("mode", "cnr", "cr")

    def __init__(self, mode="both"):
        if mode not in COUNTER_MODES:
            raise ValueError(f"unknown counter mode {mode!r}")
        self.mode = mode
        self.cnr = {}
        self.cr = {}

    @property
    def tracks_nr(self):
        return self.mode != "none"

    @property
    def tracks_r(self):
        return self.mode == "both"

    def get(self, fact) -> tuple:
        return (self.cnr.get(fact, 0), self.cr.get(fact, 0))

    __getitem__ = get

    def inc_nr(self, fact, by=1):
        v = self.cnr.get(fact, 0) + by
        if v > INT64_MAX:
            raise CounterOverflow(f"nonrecursive counter of {render_fact(fact)}")
        self.cnr[fact] = v

    def inc_r(self, fact, by=1):
        v = self.cr.get(fact, 0) + by
        if v > INT64_MAX:
            raise CounterOverflow(f"recursive counter of {render_fact(fact)}")
        self.cr[fact] = v

    def dec_nr(self, fact):
        v = self.cnr.get(fact, 0)
        if v <= 0:
            raise CounterUnderflow(f"nonrecursive counter of {render_fact(fact)} below zero")
        if v == 1:
            del self.cnr[fact]
        else:
            self.cnr[fact] = v - 1

    def dec_r(self, fact):
        v = self.cr.get(fact, 0)
        if v <= 0:
            raise CounterUnderflow(f"recursive counter of {render_fact(fact)} below zero")
        if v == 1:
            del self.cr[fact]
        else:
            self.cr[fact] = v - 1

    def drop(self, fact):
        self.cnr.pop(fact, None)
        self.cr.pop(fact, None)

    def as_dict(self) -> dict:
        """Nonzero entries as ``fact -> (cnr, cr)``."""
        keys = dict.fromkeys(self.cnr)
        keys.update(dict.fromkeys(self.cr))
        return {f: self.get(f) for f in keys if self.get(f) != (0, 0)}

    def restricted(self, mode) -> dict:
        """``as_dict`` projected onto the counters ``mode`` tracks."""
        if mode == "both":
            return self.as_dict()
        if mode == "nr":
            return {f: v for f, v in self.cnr.items() if v}
        return {}

    def copy(self) -> "CounterMap":
        out = CounterMap(self.mode)
        out.cnr = dict(self.cnr)
        out.cr = dict(self.cr)
        return out

    def __eq__(self, other):
        if isinstance(other, CounterMap):
            return self.as_dict() == other.as_dict()
        if isinstance(other, dict):
            return self.as_dict() == other
        return NotImplemented


@dataclass
class EngineState:
    """Program, explicit facts ``E``, materialisation ``I`` and counters."""

    program: Program
    explicit: FactSet = field(default_factory=FactSet)
    facts: FactSet = field(default_factory=FactSet)
    counters: CounterMap = field(default_factory=CounterMap)

    @property
    def strata(self):
        return self.program.strata

    def clone(self) -> "EngineState":
        return EngineState(self.program, self.explicit.copy(), self.facts.copy(), self.counters.copy())


def recount_counters(state: EngineState, mode="both") -> CounterMap:
    """Recompute counters from scratch over ``state.facts`` (which must be
    the materialisation of ``state.explicit``)."""
    from .evaluation import instances

    out = CounterMap(mode)
    if mode == "none":
        return out
    strata = state.strata
    I = state.facts
    for f in state.explicit:
        out.inc_nr(f)
    for s in range(1, state.program.max_stratum + 1):
        for rule in strata.nonrecursive.get(s, ()):
            for inst in instances(rule, I, I):
                out.inc_nr(inst.head)
        if mode == "both":
            for rule in strata.recursive.get(s, ()):
                for inst in instances(rule, I, I):
                    out.inc_r(inst.head)
    return out
