"""Incremental maintenance: DRed, DRed^c, B/F and B/F^c.

All four algorithms process strata bottom-up and accumulate the changes in
two sets: ``D`` (facts removed, for the DRed family possibly overdeleted)
and ``A`` (facts added back or newly derived). Until the very end ``I`` is
the old materialisation, ``(I \\ D) ∪ A`` the new one.

Every algorithm keeps the derivation counters compatible with the updated
explicit facts, whether or not it consults them, so states can be handed
from one algorithm to another.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import DatalogError
from .evaluation import Probe, _compiled, bindings, derive, has_instance
from .parser import Delta
from .store import BelowStratum, EngineState, FactSet, Minus, Union

ALGORITHMS = ("dred", "dredc", "bf", "bfc")
PHASES = ("overdelete", "rederive", "insert", "check", "saturate")
CSV_FIELDS = ("algo", "stratum", "phase", "instances", "backward_candidates", "deleted", "added", "wall_ms")


@dataclass
class PhaseStats:
    instances: int = 0
    backward_candidates: int = 0
    deleted: int = 0
    added: int = 0
    wall_ms: float = 0.0

    def __iadd__(self, other):
        self.instances += other.instances
        self.backward_candidates += other.backward_candidates
        self.deleted += other.deleted
        self.added += other.added
        self.wall_ms += other.wall_ms
        return self


class UpdateStats:
    """Per (stratum, phase) work counters of one maintenance run.

    Wall time is exclusive: time spent in a nested phase (B/F's Check
    inside deletion, Saturate inside Check) is booked to the inner phase.
    """

    def __init__(self, algo):
        self.algo = algo
        self.rows = {}
        self._stack = []

    def row(self, stratum, phase) -> PhaseStats:
        key = (stratum, phase)
        r = self.rows.get(key)
        if r is None:
            r = self.rows[key] = PhaseStats()
        return r

    @contextmanager
    def phase(self, stratum, phase):
        row = self.row(stratum, phase)
        now = time.perf_counter()
        if self._stack:
            outer, started = self._stack[-1]
            outer.wall_ms += (now - started) * 1000
        self._stack.append((row, now))
        try:
            yield row
        finally:
            _, started = self._stack.pop()
            now = time.perf_counter()
            row.wall_ms += (now - started) * 1000
            if self._stack:
                outer, _ = self._stack[-1]
                self._stack[-1] = (outer, now)

    def total(self, phase=None) -> PhaseStats:
        out = PhaseStats()
        for (_, ph), r in self.rows.items():
            if phase is None or ph == phase:
                out += r
        return out

    @property
    def instances_fired(self) -> int:
        return self.total().instances

    @property
    def backward_candidates(self) -> int:
        return self.total().backward_candidates

    def csv_rows(self):
        for (s, ph), r in sorted(self.rows.items(), key=lambda kv: (kv[0][0], PHASES.index(kv[0][1]))):
            yield {
                "algo": self.algo,
                "stratum": s,
                "phase": ph,
                "instances": r.instances,
                "backward_candidates": r.backward_candidates,
                "deleted": r.deleted,
                "added": r.added,
                "wall_ms": round(r.wall_ms, 3),
            }


@dataclass
class UpdateTrace:
    """Optional detailed record of a run, for tests and diagnostics."""

    deleted: dict = field(default_factory=dict)  # stratum -> facts put into D
    rederived: dict = field(default_factory=dict)  # stratum -> R
    added: dict = field(default_factory=dict)  # stratum -> facts put into A
    counters_after_delete: dict = field(default_factory=dict)  # stratum -> {fact: (cnr, cr)}
    # (sign, rule, substitution): -1 for instances fired while deleting,
    # +1 while inserting
    fired: list = field(default_factory=list)

    @property
    def all_deleted(self) -> list:
        return [f for s in sorted(self.deleted) for f in self.deleted[s]]


def normalize_delta(state: EngineState, delta: Delta) -> Delta:
    """``E- := (E- ∩ E) \\ E+`` and ``E+ := E+ \\ E``."""
    E = state.explicit
    ins = delta.insertions
    return Delta(
        [f for f in delta.deletions if f in E and f not in ins],
        [f for f in ins if f not in E],
    )


class _Update:
    algo = None

    def __init__(self, state: EngineState, delta: Delta, stats=None, trace=None):
        self.state = state
        self.program = state.program
        self.strata = state.strata
        self.I = state.facts
        self.E = state.explicit
        self.C = state.counters
        self.track_nr = self.C.tracks_nr
        self.track_r = self.C.tracks_r
        self.stats = stats if stats is not None else UpdateStats(self.algo)
        self.trace = trace
        delta = normalize_delta(state, delta)
        for f in delta.insertions:
            self.program.check_arity(f[0], len(f) - 1)
        self.Em = delta.deletions
        self.Ep = delta.insertions
        self.Em_by = self._by_stratum(self.Em)
        self.Ep_by = self._by_stratum(self.Ep)
        self.D = FactSet()
        self.A = FactSet()
        I, D, A = self.I, self.D, self.A
        self.D_not_A = Minus(D, A)
        self.A_not_D = Minus(A, D)
        self.I_surviving = Minus(I, self.D_not_A)  # I \ (D \ A)
        self.I_or_A = Union(I, A)
        self.I_new = Union(Minus(I, D), A)  # (I \ D) ∪ A

    def _by_stratum(self, facts):
        out = {}
        for f in facts:
            out.setdefault(self.strata.of(f[0]), []).append(f)
        return out

    def _fire(self, row, rules, pos, neg, P=None, N=None, sign=-1):
        """Heads of affected instances, counted into ``row``."""
        if self.trace is None:
            for h in derive(rules, pos, neg, P, N):
                row.instances += 1
                yield h
        else:
            sink = []
            for h in derive(rules, pos, neg, P, N, sink=sink):
                row.instances += 1
                rule, sub = sink.pop()
                self.trace.fired.append((sign, rule, sub))
                yield h

    def run(self) -> UpdateStats:
        for s in range(1, self.program.max_stratum + 1):
            self.stratum(s)
        self.finish()
        return self.stats

    # -- shared phases ---------------------------------------------------

    def delete_seeds(self, s, row) -> dict:
        """Explicit deletions of stratum ``s`` plus instances affected by the
        changes to lower strata; decrements the matching counters."""
        C = self.C
        ND = {}
        for f in self.Em_by.get(s, ()):
            ND[f] = None
            if self.track_nr:
                C.dec_nr(f)
        strata = self.strata
        for f in self._fire(row, strata.nonrecursive.get(s, ()), self.I, self.I, self.D_not_A, self.A_not_D):
            ND[f] = None
            if self.track_nr:
                C.dec_nr(f)
        for f in self._fire(row, strata.recursive.get(s, ()), self.I, self.I, self.D_not_A, self.A_not_D):
            ND[f] = None
            if self.track_r:
                C.dec_r(f)
        return ND

    def propagate_deletion(self, s, row, delta_d: FactSet) -> dict:
        ND = {}
        for f in self._fire(row, self.strata.recursive.get(s, ()), self.I_surviving, self.I_or_A, delta_d):
            ND[f] = None
            if self.track_r:
                self.C.dec_r(f)
        return ND

    def insert(self, s, R):
        with self.stats.phase(s, "insert") as row:
            C = self.C
            strata = self.strata
            I_new = self.I_new
            NA = dict.fromkeys(R)
            for f in self.Ep_by.get(s, ()):
                NA[f] = None
                if self.track_nr:
                    C.inc_nr(f)
            nonrec = strata.nonrecursive.get(s, ())
            rec = strata.recursive.get(s, ())
            for f in self._fire(row, nonrec, I_new, I_new, self.A_not_D, self.D_not_A, sign=1):
                NA[f] = None
                if self.track_nr:
                    C.inc_nr(f)
            for f in self._fire(row, rec, I_new, I_new, self.A_not_D, self.D_not_A, sign=1):
                NA[f] = None
                if self.track_r:
                    C.inc_r(f)
            added = []
            while True:
                delta_a = [f for f in NA if f not in I_new]
                if not delta_a:
                    break
                self.A.update(delta_a)
                added.extend(delta_a)
                NA = {}
                for f in self._fire(row, rec, I_new, I_new, FactSet(delta_a), sign=1):
                    NA[f] = None
                    if self.track_r:
                        C.inc_r(f)
            row.added += len(added)
            if self.trace is not None:
                self.trace.added[s] = added

    def finish(self):
        I, C = self.I, self.C
        for f in self.D:
            if f not in self.A:
                I.discard(f)
                C.drop(f)
        I.update(self.A)
        for f in self.Em:
            self.E.discard(f)
        self.E.update(self.Ep)

    def snapshot_counters(self, s):
        if self.trace is not None:
            self.trace.counters_after_delete[s] = self.C.as_dict()


class _DRedFamily(_Update):
    def gate(self, fact) -> bool:
        return True

    def stratum(self, s):
        with self.stats.phase(s, "overdelete") as row:
            ND = self.delete_seeds(s, row)
            deleted = []
            while True:
                delta_d = [f for f in ND if f not in self.D and self.gate(f)]
                if not delta_d:
                    break
                ND = self.propagate_deletion(s, row, FactSet(delta_d))
                self.D.update(delta_d)
                deleted.extend(delta_d)
            row.deleted += len(deleted)
        self.snapshot_counters(s)
        with self.stats.phase(s, "rederive") as row:
            R = self.rederive(s, deleted, row)
            row.added += len(R)
        if self.trace is not None:
            self.trace.deleted[s] = deleted
            self.trace.rederived[s] = R
        self.insert(s, R)


class DRed(_DRedFamily):
    algo = "dred"

    def rederive(self, s, deleted, row):
        probe = Probe()
        rules = self.strata.rules(s)
        E, Em = self.E, self.Em
        R = []
        for f in deleted:
            if (f in E and f not in Em) or has_instance(rules, f, self.I_surviving, self.I_or_A, probe):
                R.append(f)
        row.backward_candidates += probe.candidates
        return R


class DRedCounting(_DRedFamily):
    algo = "dredc"

    def __init__(self, state, delta, stats=None, trace=None):
        if not state.counters.tracks_r:
            raise DatalogError("dredc needs both derivation counters; materialise with counters='both'")
        super().__init__(state, delta, stats, trace)

    def gate(self, fact) -> bool:
        return fact not in self.C.cnr

    def rederive(self, s, deleted, row):
        cr = self.C.cr
        return [f for f in deleted if f in cr]


class _BackwardForward(_Update):
    def stratum(self, s):
        self.s = s
        self.checked = set()
        self.proved = FactSet()
        self.delayed = set()
        self.check_probe = Probe()
        self.base_probe = Probe()
        self.saturate_source = Union(self.proved, BelowStratum(self.I_surviving, self.strata, s))
        rec = self.strata.recursive.get(s, ())
        self.premise_atoms = {
            id(r): [i for i, a in enumerate(r.pos) if self.strata.of(a.pred) == s] for r in rec
        }
        with self.stats.phase(s, "overdelete") as row:
            ND = self.delete_seeds(s, row)
            deleted = []
            while True:
                self.delta_d = FactSet()
                self.check_view = Minus(self.I, self.D_not_A, Minus(self.delta_d, self.A))
                for f in [f for f in ND if f not in self.D]:
                    self.check(f)
                    if f not in self.proved:
                        self.delta_d.add(f)
                if not self.delta_d:
                    break
                ND = self.propagate_deletion(s, row, self.delta_d)
                batch = list(self.delta_d)
                self.D.update(batch)
                deleted.extend(batch)
            row.deleted += len(deleted)
        self.stats.row(s, "check").backward_candidates += self.check_probe.candidates
        self.stats.row(s, "saturate").backward_candidates += self.base_probe.candidates
        self.snapshot_counters(s)
        if self.trace is not None:
            self.trace.deleted[s] = deleted
            self.trace.rederived[s] = []
        self.insert(s, ())

    def premises(self, fact):
        """Same-stratum positive body facts of every recursive instance that
        derives ``fact`` over the not-yet-deleted facts."""
        for rule in self.strata.recursive.get(self.s, ()):
            comp = _compiled(rule)
            atoms = [comp.pos[i] for i in self.premise_atoms[id(rule)]]
            for vals in bindings(rule, self.check_view, self.I_or_A, head=fact, probe=self.check_probe):
                body = [(pred, *[vals[x] if s else x for s, x in args]) for pred, args in atoms]
                yield from body

    def check(self, fact):
        if fact in self.checked:
            return
        with self.stats.phase(self.s, "check"):
            if self.saturate(fact):
                return
            proved = self.proved
            # explicit stack instead of recursion; deep recursive programs
            # would otherwise exhaust the interpreter stack
            stack = [(fact, self.premises(fact))]
            while stack:
                current, premises = stack[-1]
                if current in proved:
                    stack.pop()
                    continue
                g = next(premises, None)
                if g is None:
                    stack.pop()
                    continue
                if g in self.checked or self.saturate(g):
                    continue
                stack.append((g, self.premises(g)))

    def saturate(self, fact) -> bool:
        self.checked.add(fact)
        with self.stats.phase(self.s, "saturate") as row:
            if not (fact in self.delayed or self.has_nonrecursive_proof(fact)):
                return False
            checked, proved, delayed = self.checked, self.proved, self.delayed
            rec = self.strata.recursive.get(self.s, ())
            NP = [fact]
            while True:
                delta_p = []
                for g in NP:
                    if g in checked:
                        if g not in proved and g not in delta_p:
                            delta_p.append(g)
                    else:
                        delayed.add(g)
                if not delta_p:
                    return True
                proved.update(delta_p)
                row.added += len(delta_p)
                NP = list(self._fire(row, rec, self.saturate_source, self.I_or_A, FactSet(delta_p), sign=0))


class BackwardForward(_BackwardForward):
    algo = "bf"

    def has_nonrecursive_proof(self, fact) -> bool:
        if fact in self.E and fact not in self.Em:
            return True
        rules = self.strata.nonrecursive.get(self.s, ())
        return has_instance(rules, fact, self.I_surviving, self.I_or_A, self.base_probe)


class BackwardForwardCounting(_BackwardForward):
    algo = "bfc"

    def __init__(self, state, delta, stats=None, trace=None):
        if not state.counters.tracks_nr:
            raise DatalogError("bfc needs the nonrecursive counter; materialise with counters='nr' or 'both'")
        super().__init__(state, delta, stats, trace)

    def has_nonrecursive_proof(self, fact) -> bool:
        return fact in self.C.cnr


_CLASSES = {
    "dred": DRed,
    "dredc": DRedCounting,
    "bf": BackwardForward,
    "bfc": BackwardForwardCounting,
}


def update(state: EngineState, delta: Delta, algo="dredc", stats=None, trace=None) -> UpdateStats:
    """Apply ``delta`` to ``state`` in place with the named algorithm."""
    try:
        cls = _CLASSES[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}") from None
    return cls(state, delta, stats, trace).run()


def dred_update(state, delta, stats=None, trace=None) -> UpdateStats:
    return DRed(state, delta, stats, trace).run()


def dredc_update(state, delta, stats=None, trace=None) -> UpdateStats:
    return DRedCounting(state, delta, stats, trace).run()


def bf_update(state, delta, stats=None, trace=None) -> UpdateStats:
    return BackwardForward(state, delta, stats, trace).run()


def bfc_update(state, delta, stats=None, trace=None) -> UpdateStats:
    return BackwardForwardCounting(state, delta, stats, trace).run()
