"""Rule-instance enumeration, body planning and semi-naive materialisation.

Instances are enumerated against a *positive* view (where positive body
atoms must hold) and a *negative* view (which negative body atoms must
avoid). Given delta sets ``P``/``N``, only instances touching them are
produced, each exactly once: an instance is attributed to its first
positive atom in ``P`` (earlier positive atoms are then required to lie
outside ``P``), or, failing that, to its first negative atom in ``N``.
"""
from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass

from .errors import EvaluationOverflow, UnboundBuiltinError
from .model import INT64_MAX, INT64_MIN, Rule, RuleInstance, Var
from .store import CounterMap, EngineState, FactSet

# step kinds
_POS, _NEG, _BUILTIN = 0, 1, 2
# view slots in the evaluation context
_SRC, _P, _N = 0, 1, 2


class Probe:
    """Counts candidate facts handed back by index probes."""

    __slots__ = ("candidates",)

    def __init__(self):
        self.candidates = 0


class _NoMatch(Exception):
    pass


_OPS = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def _compile_expr(expr, slots):
    if type(expr) is int:
        return lambda vals: expr
    if type(expr) is Var:
        slot = slots[expr]
        return lambda vals: vals[slot]
    op = _OPS[expr.op]
    left = _compile_expr(expr.left, slots)
    right = _compile_expr(expr.right, slots)

    def run(vals):
        a = left(vals)
        b = right(vals)
        if type(a) is not int or type(b) is not int:
            raise _NoMatch
        v = op(a, b)
        if v < INT64_MIN or v > INT64_MAX:
            raise EvaluationOverflow(f"{a} {expr.op} {b} overflows 64 bits")
        return v

    return run


class _CompiledRule:
    __slots__ = ("slots", "head", "pos", "neg", "builtins", "npos")

    def __init__(self, rule: Rule):
        self.slots = {v: i for i, v in enumerate(rule.variables)}
        slots = self.slots
        pattern = lambda atom: (atom.pred, tuple((True, slots[t]) if type(t) is Var else (False, t) for t in atom.args))
        self.head = pattern(rule.head)
        self.pos = [pattern(a) for a in rule.pos]
        self.neg = [pattern(a) for a in rule.neg]
        self.builtins = [
            (slots[b.target], frozenset(slots[v] for v in b.expr_vars()), _compile_expr(b.expr, slots))
            for b in rule.builtins
        ]
        self.npos = len(rule.pos)


def _compiled(rule: Rule) -> _CompiledRule:
    c = rule._plans.get("compiled")
    if c is None:
        c = rule._plans["compiled"] = _CompiledRule(rule)
    return c


def plan_body(rule: Rule, bound_vars=(), sizes=None, first=None) -> list:
    """Greedy evaluation order for the body of ``rule``.

    Repeatedly picks the unplaced positive atom with the most bound argument
    positions; ties go to the smaller relation (``sizes`` maps predicate to
    an estimated fact count), then to textual order. Built-ins are placed as
    soon as their expression variables are bound and negative atoms once
    fully bound. ``first`` forces an initial step such as ``("pos", 2)``.
    Returns a list of ``(kind, index)`` pairs, ``kind`` in pos/neg/builtin.
    """
    bound = set(v if type(v) is Var else v for v in bound_vars)
    order = []
    pos_left = list(range(len(rule.pos)))
    neg_left = list(range(len(rule.neg)))
    bi_left = list(range(len(rule.builtins)))

    def place_ready():
        progress = True
        while progress:
            progress = False
            for b in list(bi_left):
                bi = rule.builtins[b]
                if all(v in bound for v in bi.expr_vars()):
                    order.append(("builtin", b))
                    bound.add(bi.target)
                    bi_left.remove(b)
                    progress = True
            for k in list(neg_left):
                if all(v in bound for v in rule.neg[k].variables()):
                    order.append(("neg", k))
                    neg_left.remove(k)

    if first is not None:
        kind, idx = first
        order.append(first)
        atom = rule.pos[idx] if kind == "pos" else rule.neg[idx]
        bound.update(atom.variables())
        (pos_left if kind == "pos" else neg_left).remove(idx)
    place_ready()
    while pos_left:

        def score(i):
            atom = rule.pos[i]
            nbound = sum(1 for t in atom.args if type(t) is not Var or t in bound)
            size = sizes.get(atom.pred, 0) if sizes else 0
            return (-nbound, size, i)

        best = min(pos_left, key=score)
        order.append(("pos", best))
        pos_left.remove(best)
        bound.update(rule.pos[best].variables())
        place_ready()
    if bi_left:
        raise UnboundBuiltinError(f"cannot bind built-in {rule.builtins[bi_left[0]]} in {rule}")
    if neg_left:
        raise UnboundBuiltinError(f"negative atom {rule.neg[neg_left[0]]} never bound in {rule}")
    return order


def _build_steps(rule: Rule, comp: _CompiledRule, plan, pivot, bound_slots, has_p):
    """Turn a plan into executable step tuples for one enumeration mode."""
    pivot_kind, pivot_idx = pivot if pivot else (None, None)
    bound = set(bound_slots)
    steps = []
    for kind, idx in plan:
        if kind == "builtin":
            target, needs, fn = comp.builtins[idx]
            steps.append((_BUILTIN, target, target in bound, fn))
            bound.add(target)
            continue
        pred, args = comp.pos[idx] if kind == "pos" else comp.neg[idx]
        if kind == "neg" and not (pivot_kind == "neg" and pivot_idx == idx):
            excl = _N if (pivot_kind == "neg" and idx < pivot_idx) else None
            steps.append((_NEG, pred, args, excl))
            continue
        # enumerated atom: positive body atom or the negative pivot
        if kind == "pos":
            if pivot_kind == "pos" and idx == pivot_idx:
                src, excl = _P, None
            elif (pivot_kind == "pos" and idx < pivot_idx) or (pivot_kind == "neg" and has_p):
                src, excl = _SRC, _P
            else:
                src, excl = _SRC, None
        else:
            src, excl = _N, None
        key = []
        outs = []
        eqs = []
        seen_new = {}
        for p, (is_slot, x) in enumerate(args):
            if not is_slot:
                key.append((p, False, x))
            elif x in bound:
                key.append((p, True, x))
            elif x in seen_new:
                eqs.append((p + 1, x))
            else:
                seen_new[x] = p
                outs.append((p + 1, x))
        ground = not outs and not eqs
        steps.append((_POS, pred, tuple(key), tuple(outs), tuple(eqs), src, excl, ground, args))
        bound.update(seen_new)
    return tuple(steps)


def _run(steps, i, vals, ctx):
    if i == len(steps):
        yield vals
        return
    step = steps[i]
    kind = step[0]
    if kind == _POS:
        _, pred, key, outs, eqs, src, excl, ground, args = step
        view = ctx[src]
        ex = ctx[excl] if excl is not None else None
        probe = ctx[3]
        if ground:
            fact = (pred, *[vals[x] if s else x for s, x in args])
            if fact in view and (ex is None or fact not in ex):
                if probe is not None:
                    probe.candidates += 1
                yield from _run(steps, i + 1, vals, ctx)
            return
        bkey = [(p, vals[x] if s else x) for p, s, x in key]
        candidates = view.lookup(pred, bkey)
        if probe is not None:
            probe.candidates += len(candidates)
        nxt = i + 1
        for f in candidates:
            ok = True
            for p, v in bkey:
                if f[p + 1] != v:
                    ok = False
                    break
            if not ok:
                continue
            if ex is not None and f in ex:
                continue
            for p, x in outs:
                vals[x] = f[p]
            if eqs:
                for p, x in eqs:
                    if f[p] != vals[x]:
                        ok = False
                        break
                if not ok:
                    continue
            yield from _run(steps, nxt, vals, ctx)
    elif kind == _NEG:
        _, pred, args, excl = step
        fact = (pred, *[vals[x] if s else x for s, x in args])
        if fact in ctx[4]:
            return
        if excl is not None and fact in ctx[excl]:
            return
        yield from _run(steps, i + 1, vals, ctx)
    else:
        _, target, target_bound, fn = step
        try:
            v = fn(vals)
        except _NoMatch:
            return
        if target_bound:
            if vals[target] != v:
                return
        else:
            vals[target] = v
        yield from _run(steps, i + 1, vals, ctx)


def _steps_for(rule, comp, pivot, bound_slots, src, has_p=False):
    sizes_rank = tuple(sorted(range(comp.npos), key=lambda i: (src.size(comp.pos[i][0]), i)))
    key = (pivot, has_p, bound_slots, sizes_rank)
    cache = rule._plans
    steps = cache.get(key)
    if steps is None:
        sizes = {}
        for rank, i in enumerate(sizes_rank):
            sizes.setdefault(comp.pos[i][0], rank)
        inv = {slot: var for var, slot in comp.slots.items()}
        plan = plan_body(rule, [inv[s] for s in bound_slots], sizes, first=pivot)
        steps = cache[key] = _build_steps(rule, comp, plan, pivot, bound_slots, has_p)
    return steps


def bindings(rule: Rule, pos, neg=None, P=None, N=None, head=None, probe=None):
    """Yield the (live, reused) value list of every matching instance.

    ``head`` restricts to instances whose head equals that fact (backward
    evaluation). Consumers must copy the list if they keep it.
    """
    if neg is None:
        neg = pos
    comp = _compiled(rule)
    vals = [None] * len(comp.slots)
    bound_slots = ()
    if head is not None:
        pred, args = comp.head
        if head[0] != pred or len(head) != len(args) + 1:
            return
        bs = []
        for p, (is_slot, x) in enumerate(args):
            v = head[p + 1]
            if not is_slot:
                if v != x:
                    return
            elif x in bs:
                if vals[x] != v:
                    return
            else:
                vals[x] = v
                bs.append(x)
        bound_slots = tuple(sorted(bs))
    ctx = (pos, P, N, probe, neg)
    if P is None and N is None:
        yield from _run(_steps_for(rule, comp, None, bound_slots, pos), 0, vals, ctx)
        return
    if P is not None:
        for i in range(comp.npos):
            if not P.size(comp.pos[i][0]):
                continue
            yield from _run(_steps_for(rule, comp, ("pos", i), bound_slots, pos), 0, vals, ctx)
    if N is not None:
        for k in range(len(comp.neg)):
            if not N.size(comp.neg[k][0]):
                continue
            yield from _run(_steps_for(rule, comp, ("neg", k), bound_slots, pos, P is not None), 0, vals, ctx)


def instances(rule: Rule, pos, neg=None, P=None, N=None, head=None, probe=None):
    """Rule instances firing on ``pos``/``neg``; restricted to those touching
    ``P`` (positive) or ``N`` (negative) when either is given."""
    for vals in bindings(rule, pos, neg, P, N, head, probe):
        yield RuleInstance(rule, tuple(vals))


def head_maker(rule: Rule):
    pred, args = _compiled(rule).head
    if all(s for s, _ in args):
        slots = [x for _, x in args]
        return lambda vals: (pred, *[vals[x] for x in slots])
    return lambda vals: (pred, *[vals[x] if s else x for s, x in args])


def derive(rules, pos, neg=None, P=None, N=None, probe=None, sink=None):
    """Heads of all matching instances, one occurrence per instance.

    ``sink``, if given, receives ``(rule, substitution)`` for every instance.
    """
    for rule in rules:
        make = head_maker(rule)
        if sink is None:
            for vals in bindings(rule, pos, neg, P, N, None, probe):
                yield make(vals)
        else:
            for vals in bindings(rule, pos, neg, P, N, None, probe):
                sink.append((rule, tuple(vals)))
                yield make(vals)


def apply_multi(rules, pos, neg=None, P=None, N=None) -> Counter:
    """Multiset of derived heads (a :class:`collections.Counter`)."""
    return Counter(derive(rules, pos, neg, P, N))


def apply_set(rules, pos, neg=None, P=None, N=None) -> set:
    return set(derive(rules, pos, neg, P, N))


def has_instance(rules, fact, pos, neg, probe=None) -> bool:
    """Backward evaluation: does some rule derive ``fact`` over the views?"""
    for rule in rules:
        for _ in bindings(rule, pos, neg, None, None, fact, probe):
            return True
    return False


@dataclass
class MatchSpec:
    """Bundle of views for :func:`instances`: positive source, negative
    source, and the optional affected sets ``P`` and ``N``."""

    positive: object
    negative: object = None
    P: object = None
    N: object = None

    def instances(self, rule, head=None, probe=None):
        return instances(rule, self.positive, self.negative, self.P, self.N, head, probe)

    def apply_multi(self, rules):
        return apply_multi(rules, self.positive, self.negative, self.P, self.N)


def materialise(program, explicit, counters="both", stats=None) -> EngineState:
    """Semi-naive stratum-by-stratum materialisation with counter set-up.

    ``counters`` is ``none``, ``nr`` or ``both``. If ``stats`` is a dict it
    receives ``instances`` (rule instances fired).
    """
    E = explicit.copy() if isinstance(explicit, FactSet) else FactSet(explicit)
    for f in E:
        program.check_arity(f[0], len(f) - 1)
    I = FactSet()
    C = CounterMap(counters)
    track_nr, track_r = C.tracks_nr, C.tracks_r
    strata = program.strata
    by_stratum = {}
    for f in E:
        by_stratum.setdefault(strata.of(f[0]), []).append(f)
    fired = 0
    for s in range(1, program.max_stratum + 1):
        for f in by_stratum.get(s, ()):
            I.add(f)
            if track_nr:
                C.inc_nr(f)
        heads = list(derive(strata.nonrecursive.get(s, ()), I, I))
        fired += len(heads)
        for h in heads:
            if track_nr:
                C.inc_nr(h)
        I.update(heads)
        rec = strata.recursive.get(s, ())
        if not rec:
            continue
        delta = FactSet(by_stratum.get(s, ()))
        delta.update(heads)
        while delta:
            new = []
            seen = set()
            for h in derive(rec, I, I, P=delta):
                fired += 1
                if track_r:
                    C.inc_r(h)
                if h not in I and h not in seen:
                    seen.add(h)
                    new.append(h)
            I.update(new)
            delta = FactSet(new)
    if stats is not None:
        stats["instances"] = stats.get("instances", 0) + fired
    return EngineState(program, E, I, C)
