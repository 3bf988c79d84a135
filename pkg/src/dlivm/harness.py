"""Benchmark and fuzzing instances, random updates, the rematerialisation
check, and the bench suites behind ``dlivm bench``."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .errors import InfeasibleGraph
from .evaluation import materialise
from .maintain import ALGORITHMS, CSV_FIELDS, update
from .model import Atom, BinOp, Builtin, Program, Rule, Var, fact_sort_key, render_fact
from .parser import Delta, parse_program

GENERATORS = ("ex1", "ex2", "ex3", "sspe", "random")

SSPE_PROGRAM = """\
D(Y,Z) :- B(a,Y,Z).
D(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.
"""


@dataclass
class BenchmarkSpec:
    """What to generate: ``generator`` plus its size parameters and seed."""

    generator: str
    n: int = 10
    nodes: int = 1000
    edges: int = 10000
    max_length: int = 1
    seed: int = 0
    random: "RandomSpec | None" = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        for name in ("n", "nodes", "edges", "max_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def build(self):
        if self.generator == "ex1":
            return gen_example1(self.n)
        if self.generator == "ex2":
            return gen_example2(self.n)
        if self.generator == "ex3":
            return gen_example3()
        if self.generator == "sspe":
            return gen_sspe(self.nodes, self.edges, self.seed, self.max_length)
        spec = self.random or RandomSpec()
        spec = RandomSpec(**{**spec.__dict__, "seed": self.seed})
        return gen_random(spec)


def gen_example1(n):
    """``S(Y1,Y2) :- R(X,Y1), R(X,Y2)`` over ``R(ai,b), R(ai,ci)``."""
    program = parse_program("S(Y1,Y2) :- R(X,Y1), R(X,Y2).\n")
    facts = []
    for i in range(1, n + 1):
        facts += [("R", f"a{i}", "b"), ("R", f"a{i}", f"c{i}")]
    return program, facts


def example1_deletion(n) -> Delta:
    return Delta([("R", f"a{i}", f"c{i}") for i in range(1, n + 1)], [])


def gen_example2(n):
    program = parse_program(SSPE_PROGRAM)
    facts = [("B", "a", "b1", 1)]
    facts += [("B", "a", f"c{i}", 1) for i in range(1, n + 1)]
    facts += [("B", f"b{i}", f"d{j}", 1) for i in range(1, n + 1) for j in range(1, n + 1)]
    return program, facts


def example2_deletion() -> Delta:
    return Delta([("B", "a", "b1", 1)], [])


def gen_example3():
    program = parse_program("A(Y) :- A(X), B(X,Y).\n")
    facts = [("A", "a"), ("A", "b"), ("A", "d"), ("B", "a", "c"), ("B", "b", "c"), ("B", "c", "d"), ("B", "d", "e")]
    return program, facts


def gen_sspe(nodes, edges, seed=0, max_length=1):
    """Single-source path lengths over a random DAG rooted at ``a``.

    Nodes are ranked ``a, v1, v2, ...`` and every edge points from a lower
    to a higher rank. A random spanning tree first makes every node
    reachable from ``a``; the remaining edges are distinct forward pairs
    drawn uniformly. Edge lengths are uniform in ``1..max_length``.
    """
    if nodes < 1:
        raise InfeasibleGraph("need at least one node")
    if edges < nodes - 1 or edges > nodes * (nodes - 1) // 2:
        raise InfeasibleGraph(f"{edges} edges cannot form a rooted DAG over {nodes} nodes")
    rng = random.Random(seed)
    names = ["a"] + [f"v{i}" for i in range(1, nodes)]
    chosen = {}
    for k in range(1, nodes):
        chosen[(rng.randrange(k), k)] = None
    extra = edges - len(chosen)
    total = nodes * (nodes - 1) // 2
    if extra > (total - len(chosen)) // 2:
        rest = [(i, j) for j in range(nodes) for i in range(j) if (i, j) not in chosen]
        for pair in rng.sample(rest, extra):
            chosen[pair] = None
    else:
        while len(chosen) < edges:
            i, j = rng.randrange(nodes), rng.randrange(nodes)
            if i == j:
                continue
            if i > j:
                i, j = j, i
            chosen.setdefault((i, j), None)
    facts = [("B", names[i], names[j], rng.randint(1, max_length)) for i, j in chosen]
    return parse_program(SSPE_PROGRAM), facts


# -- random programs ----------------------------------------------------------


@dataclass
class RandomSpec:
    seed: int = 0
    rules: int = 6
    predicates: int = 6
    max_arity: int = 2
    max_body: int = 3
    facts: int = 60
    domain: int = 5
    layers: int = 3
    negation: float = 0.3
    builtins: float = 0.2
    nonrecursive: bool = False


def fuzz_spec(seed, nonrecursive=False) -> RandomSpec:
    """Fuzzing corpus member: up to 6 rules and 200 facts, sizes drawn from
    the seed so the corpus mixes tiny and dense instances."""
    rng = random.Random(seed ^ 0x5EED)
    facts = rng.randint(5, 200)
    return RandomSpec(
        seed=seed,
        rules=rng.randint(0, 6),
        predicates=rng.randint(2, 7),
        facts=facts,
        domain=max(3, min(12, facts // 8)),
        nonrecursive=nonrecursive,
    )


def _domain(spec) -> list:
    # mostly small integers, plus two symbols so built-ins meet non-integers
    return list(range(spec.domain)) + ["s0", "s1"]


def gen_random(spec: RandomSpec):
    """Seeded random program and explicit facts.

    Predicates are spread over layers. Positive body atoms never come from a
    higher layer than the head and negative ones always come from a strictly
    lower layer, so every program is stratifiable. Built-ins only appear in
    rules whose positive body lies strictly below the head, which keeps
    arithmetic out of recursion and the materialisation finite.
    """
    rng = random.Random(spec.seed)
    npred = max(1, spec.predicates)
    layers = max(1, spec.layers)
    preds = []
    for i in range(npred):
        layer = 0 if i == 0 else rng.randrange(layers)
        preds.append((f"p{i}", rng.randint(1, spec.max_arity), layer))
    domain = _domain(spec)
    rules = []
    heads = [p for p in preds if p[2] > 0] or preds
    for _ in range(spec.rules):
        rule = _random_rule(rng, spec, preds, heads, domain)
        if rule is not None:
            rules.append(rule)
    program = Program(rules)
    facts = {}
    base = [p for p in preds if p[2] == 0]
    attempts = 0
    while len(facts) < spec.facts and attempts < spec.facts * 10:
        attempts += 1
        # four in five facts go to base predicates, the rest anywhere
        name, arity, _ = rng.choice(base) if rng.random() < 0.8 else rng.choice(preds)
        facts[(name, *[rng.choice(domain) for _ in range(arity)])] = None
    return program, list(facts)


def _random_rule(rng, spec, preds, heads, domain):
    name, arity, layer = rng.choice(heads)
    if spec.nonrecursive:
        lower = [p for p in preds if p[2] < layer]
        if not lower:
            return None
        positive_pool = lower
    else:
        positive_pool = [p for p in preds if p[2] <= layer]
    variables = [Var(f"X{i}") for i in range(4)]
    pos = []
    bound = []
    for _ in range(rng.randint(1, spec.max_body)):
        pname, parity, _ = rng.choice(positive_pool)
        args = []
        for _ in range(parity):
            if rng.random() < 0.15:
                args.append(rng.choice(domain))
            else:
                v = rng.choice(variables)
                args.append(v)
                if v not in bound:
                    bound.append(v)
        pos.append(Atom(pname, tuple(args)))
    if not bound:
        return None
    builtins = []
    strictly_lower = all(next(p[2] for p in preds if p[0] == a.pred) < layer for a in pos)
    if strictly_lower and rng.random() < spec.builtins:
        target = Var("Z")
        left = rng.choice(bound)
        right = rng.choice(bound) if rng.random() < 0.5 else rng.randint(-2, 2)
        builtins.append(Builtin(target, BinOp(rng.choice("+-*"), left, right)))
        bound.append(target)
    neg = []
    lower = [p for p in preds if p[2] < layer]
    if lower and rng.random() < spec.negation:
        nname, narity, _ = rng.choice(lower)
        neg.append(Atom(nname, tuple(rng.choice(bound) for _ in range(narity))))
    head = Atom(name, tuple(rng.choice(bound) if rng.random() < 0.9 else rng.choice(domain) for _ in range(arity)))
    return Rule(head, tuple(pos), tuple(neg), tuple(builtins))


def random_delete(E, k, seed=0) -> Delta:
    """Uniform ``k``-subset of ``E`` as deletions."""
    facts = sorted(E, key=fact_sort_key)
    if k < 0 or k > len(facts):
        raise ValueError(f"cannot delete {k} of {len(facts)} facts")
    return Delta(random.Random(seed).sample(facts, k), [])


def random_delta(program, E, seed=0, delete_fraction=0.2, insert_fraction=0.1, spec: RandomSpec | None = None) -> Delta:
    """Delete up to ``delete_fraction`` of ``E`` and insert up to
    ``insert_fraction * |E|`` random facts over the program's predicates."""
    rng = random.Random(seed)
    facts = sorted(E, key=fact_sort_key)
    dels = rng.sample(facts, rng.randint(0, int(len(facts) * delete_fraction)))
    domain = _domain(spec or RandomSpec())
    preds = sorted(program.arities.items())
    ins = {}
    if preds:
        for _ in range(rng.randint(0, max(1, int(len(facts) * insert_fraction)))):
            name, arity = rng.choice(preds)
            ins[(name, *[rng.choice(domain) for _ in range(arity)])] = None
    return Delta(dels, ins)


# -- verification ---------------------------------------------------------------


@dataclass
class VerifyReport:
    missing: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    explicit_mismatch: list = field(default_factory=list)
    counter_mismatch: list = field(default_factory=list)  # (fact, expected, got)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.extra or self.explicit_mismatch or self.counter_mismatch)

    def __bool__(self):
        return self.ok

    def render(self) -> str:
        if self.ok:
            return "PASS\n"
        lines = ["FAIL"]
        lines += [f"missing {render_fact(f)}" for f in sorted(self.missing, key=fact_sort_key)]
        lines += [f"extra {render_fact(f)}" for f in sorted(self.extra, key=fact_sort_key)]
        lines += [f"explicit {render_fact(f)}" for f in sorted(self.explicit_mismatch, key=fact_sort_key)]
        lines += [
            f"counter {render_fact(f)} expected {exp} got {got}"
            for f, exp, got in sorted(self.counter_mismatch, key=lambda t: fact_sort_key(t[0]))
        ]
        return "\n".join(lines) + "\n"


def updated_explicit(E_old, delta: Delta) -> list:
    ins = delta.insertions
    dels = {f for f in delta.deletions if f not in ins}
    out = dict.fromkeys(f for f in E_old if f not in dels)
    out.update(ins)
    return list(out)


def verify_update(program, E_old, delta, result, counters=None) -> VerifyReport:
    """Compare ``result`` with a fresh materialisation of the updated E.

    ``result`` is an :class:`EngineState` or a plain fact collection.
    ``counters`` (none/nr/both) picks which counters to compare; by default
    whatever the state tracks.
    """
    E_new = updated_explicit(E_old, delta)
    facts = getattr(result, "facts", result)
    if counters is None:
        counters = result.counters.mode if hasattr(result, "counters") else "none"
    ref = materialise(program, E_new, counters=counters)
    report = VerifyReport()
    got = set(facts)
    want = set(ref.facts)
    report.missing = list(want - got)
    report.extra = list(got - want)
    if hasattr(result, "explicit"):
        report.explicit_mismatch = list(set(result.explicit) ^ set(E_new))
    if counters != "none" and hasattr(result, "counters"):
        exp = ref.counters.restricted(counters)
        have = result.counters.restricted(counters)
        for f in set(exp) | set(have):
            if exp.get(f) != have.get(f):
                report.counter_mismatch.append((f, exp.get(f), have.get(f)))
    return report


# -- bench suites ---------------------------------------------------------------

BENCH_FIELDS = ("suite", "instance", "ok") + CSV_FIELDS


def run_algorithms(program, E, delta, algos=ALGORITHMS, counters="both", check=True):
    """Run each algorithm on its own copy of the materialised state.

    Returns ``{algo: (stats, report_or_None, state)}``.
    """
    base = materialise(program, E, counters=counters)
    out = {}
    for algo in algos:
        state = base.clone()
        stats = update(state, delta, algo)
        report = verify_update(program, E, delta, state) if check else None
        out[algo] = (stats, report, state)
    return out


def _timed_remat(program, E, instance):
    rows = []
    for algo, mode in (("remat", "none"), ("remat-1c", "nr"), ("remat-2c", "both")):
        stats = {}
        t0 = time.perf_counter()
        materialise(program, E, counters=mode, stats=stats)
        ms = (time.perf_counter() - t0) * 1000
        rows.append({
            "suite": "scaling", "instance": instance, "ok": "",
            "algo": algo, "stratum": "", "phase": "materialise", "instances": stats["instances"],
            "backward_candidates": 0, "deleted": 0, "added": 0, "wall_ms": round(ms, 3),
        })
    return rows


def _rows(suite, instance, results):
    for algo, (stats, report, _) in results.items():
        ok = "" if report is None else ("PASS" if report.ok else "FAIL")
        for row in stats.csv_rows():
            yield {"suite": suite, "instance": instance, "ok": ok, **row}


def bench_scaling(sizes=(50, 100, 200), sspe=(1000, 10000, 0, 100)):
    """Examples 1 and 2 at each size and one SSPE instance."""
    rows = []
    for n in sizes:
        program, E = gen_example1(n)
        rows += _rows("scaling", f"ex1-n{n}", run_algorithms(program, E, example1_deletion(n)))
        program, E = gen_example2(n)
        rows += _rows("scaling", f"ex2-n{n}", run_algorithms(program, E, example2_deletion()))
    if sspe:
        nodes, edges, seed, k = sspe
        program, E = gen_sspe(nodes, edges, seed)
        name = f"sspe-{nodes}-{edges}-s{seed}"
        rows += _timed_remat(program, E, name)
        rows += _rows("scaling", name, run_algorithms(program, E, random_delete(E, k, seed)))
    return rows


def bench_fuzz(count=500, seed=0):
    rows = []
    for i in range(count):
        spec = fuzz_spec(seed + i)
        program, E = gen_random(spec)
        delta = random_delta(program, E, seed + i, spec=spec)
        rows += _rows("fuzz", f"random-s{seed + i}", run_algorithms(program, E, delta))
    return rows


SUITES = {"scaling": bench_scaling, "fuzz": bench_fuzz}

