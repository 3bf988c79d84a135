"""Brute-force reference semantics used to check the engine.

Nothing here shares code with the engine's evaluator: bodies are matched
by nested loops over plain Python sets, fixpoints are computed naively,
and counters are counted instance by instance.
"""
from __future__ import annotations

from collections import Counter

from dlivm.model import Var


def _eval(expr, env):
    if type(expr) is int:
        return expr
    if type(expr) is Var:
        return env[expr]
    a, b = _eval(expr.left, env), _eval(expr.right, env)
    if a is None or b is None or type(a) is not int or type(b) is not int:
        return None
    return {"+": a + b, "-": a - b, "*": a * b}[expr.op]


def _unify(atom, fact, env):
    if fact[0] != atom.pred or len(fact) != len(atom.args) + 1:
        return None
    env = dict(env)
    for t, v in zip(atom.args, fact[1:]):
        if type(t) is Var:
            if env.setdefault(t, v) != v:
                return None
        elif t != v:
            return None
    return env


def _ground(atom, env):
    return (atom.pred, *[env[t] if type(t) is Var else t for t in atom.args])


def naive_instances(rule, pos, neg=None):
    """All ``(rule, substitution)`` pairs firing over ``pos``/``neg``.

    Substitutions are tuples aligned with ``rule.variables``.
    """
    neg = pos if neg is None else neg
    pos = set(pos)
    envs = [{}]
    for atom in rule.pos:
        envs = [e2 for e in envs for f in pos if (e2 := _unify(atom, f, e)) is not None]
    out = []
    for env in envs:
        pending = list(rule.builtins)
        ok = True
        while pending and ok:
            for b in list(pending):
                if all(v in env for v in b.expr_vars()):
                    pending.remove(b)
                    v = _eval(b.expr, env)
                    if v is None or (b.target in env and env[b.target] != v):
                        ok = False
                        break
                    env[b.target] = v
                    break
            else:
                ok = False
        if not ok or pending:
            continue
        if any(_ground(a, env) in neg for a in rule.neg):
            continue
        out.append((rule, tuple(env[v] for v in rule.variables)))
    return out


def head_of(rule, sub):
    env = dict(zip(rule.variables, sub))
    return _ground(rule.head, env)


def naive_materialise(program, E) -> set:
    """Naive stratum-by-stratum fixpoint."""
    strata = program.strata
    I = set(E)
    for s in range(1, program.max_stratum + 1):
        rules = strata.rules(s)
        while True:
            new = {head_of(r, sub) for rule in rules for r, sub in naive_instances(rule, I)} - I
            if not new:
                break
            I |= new
    return I


def naive_counters(program, E, I) -> dict:
    """``fact -> (cnr, cr)`` counted from scratch over the finished ``I``."""
    strata = program.strata
    cnr, cr = Counter(E), Counter()
    for s in range(1, program.max_stratum + 1):
        for rule in strata.nonrecursive.get(s, ()):
            for r, sub in naive_instances(rule, I):
                cnr[head_of(r, sub)] += 1
        for rule in strata.recursive.get(s, ()):
            for r, sub in naive_instances(rule, I):
                cr[head_of(r, sub)] += 1
    return {f: (cnr[f], cr[f]) for f in set(cnr) | set(cr)}


def firing_instances(program, I) -> Counter:
    return Counter(inst for rule in program.rules for inst in naive_instances(rule, I))


def apply_delta(E, deletions, insertions) -> set:
    ins = set(insertions)
    return (set(E) - (set(deletions) - ins)) | ins
