"""``dlivm`` command line: materialise, update, generate, bench, verify.

Exit codes: 0 success or PASS, 1 usage or input error, 2 verification FAIL.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from .errors import DatalogError
from .evaluation import materialise
from .harness import (
    BENCH_FIELDS,
    GENERATORS,
    SUITES,
    BenchmarkSpec,
    RandomSpec,
    example1_deletion,
    example2_deletion,
    random_delete,
    random_delta,
    verify_update,
)
from .maintain import ALGORITHMS, CSV_FIELDS, update
from .parser import Delta, parse_delta, parse_facts, parse_program, render_delta, render_facts, render_program
from .store import COUNTER_MODES

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _read(path):
    return Path(path).read_text()


def _load(args):
    program = parse_program(_read(args.program), args.program)
    facts = list(parse_facts(_read(args.data), args.data))
    return program, facts


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_mat(args):
    program, E = _load(args)
    stats = {}
    t0 = time.perf_counter()
    state = materialise(program, E, counters=args.counters, stats=stats)
    ms = (time.perf_counter() - t0) * 1000
    print(
        f"{len(state.facts)} facts ({len(state.explicit)} explicit), "
        f"{stats['instances']} rule instances, {ms:.1f} ms",
        file=sys.stderr,
    )
    _write(args.dump or "-", state.facts.dump())
    return EXIT_OK


def cmd_update(args):
    program, E = _load(args)
    delta = parse_delta(_read(args.delta), args.delta)
    counters = "nr" if args.algo == "bfc" and args.counters is None else (args.counters or "both")
    state = materialise(program, E, counters=counters)
    stats = update(state, delta, args.algo)
    total = stats.total()
    print(
        f"{args.algo}: {len(state.facts)} facts, {total.instances} instances fired, "
        f"{total.backward_candidates} backward candidates, {total.wall_ms:.1f} ms",
        file=sys.stderr,
    )
    if args.stats:
        with open(args.stats, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            writer.writerows(stats.csv_rows())
    if args.dump:
        _write(args.dump, state.facts.dump())
    if args.verify:
        report = verify_update(program, E, delta, state)
        sys.stdout.write(report.render())
        return EXIT_OK if report.ok else EXIT_FAIL
    return EXIT_OK


def _gen_params(pairs):
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key] = value
    return out


def cmd_gen(args):
    params = _gen_params(args.params)
    ints = {k: int(v) for k, v in params.items()}
    spec_fields = {"n", "nodes", "edges", "max_length"}
    random_fields = set(RandomSpec.__dataclass_fields__) - {"seed"}
    unknown = set(ints) - spec_fields - random_fields
    if unknown:
        raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    rspec = RandomSpec(seed=args.seed, **{k: v for k, v in ints.items() if k in random_fields})
    spec = BenchmarkSpec(args.generator, seed=args.seed, random=rspec, **{k: v for k, v in ints.items() if k in spec_fields})
    program, E = spec.build()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "program.dl").write_text(render_program(program))
    (out / "data.facts").write_text(render_facts(E))
    delta = None
    if args.delete is not None:
        delta = random_delete(E, args.delete, args.seed)
    elif args.generator == "ex1":
        delta = example1_deletion(spec.n)
    elif args.generator == "ex2":
        delta = example2_deletion()
    elif args.generator == "ex3":
        delta = Delta([("A", "a")], [])
    elif args.generator == "random":
        delta = random_delta(program, E, args.seed, spec=rspec)
    if delta is not None:
        (out / "change.delta").write_text(render_delta(delta))
    print(f"wrote {len(program)} rules and {len(E)} facts to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    kwargs = {}
    if args.suite == "fuzz":
        kwargs = {"count": args.count, "seed": args.seed}
    rows = SUITES[args.suite](**kwargs)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    failed = {(r["instance"], r["algo"]) for r in rows if r["ok"] == "FAIL"}
    print(f"{len(rows)} rows written to {args.out}; {len(failed)} failed runs", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_verify(args):
    program, E = _load(args)
    delta = parse_delta(_read(args.delta), args.delta)
    result = parse_facts(_read(args.result), args.result)
    report = verify_update(program, E, delta, list(result), counters="none")
    sys.stdout.write(report.render())
    return EXIT_OK if report.ok else EXIT_FAIL


def build_parser():
    p = _Parser(prog="dlivm", description="Incremental maintenance of datalog materialisations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mat", help="materialise a program over explicit facts")
    m.add_argument("program")
    m.add_argument("data")
    m.add_argument("--dump", help="write the materialisation here (default stdout)")
    m.add_argument("--counters", choices=COUNTER_MODES, default="both")
    m.set_defaults(func=cmd_mat)

    u = sub.add_parser("update", help="materialise, then apply a delta incrementally")
    u.add_argument("program")
    u.add_argument("data")
    u.add_argument("delta")
    u.add_argument("--algo", choices=ALGORITHMS, default="dredc")
    u.add_argument("--counters", choices=COUNTER_MODES)
    u.add_argument("--stats", help="write per-phase statistics as CSV")
    u.add_argument("--verify", action="store_true", help="check against rematerialisation")
    u.add_argument("--dump", help="write the updated materialisation here ('-' for stdout)")
    u.set_defaults(func=cmd_update)

    g = sub.add_parser("gen", help="generate a benchmark instance")
    g.add_argument("generator", choices=GENERATORS)
    g.add_argument("params", nargs="*", help="key=value size parameters, e.g. n=100 or nodes=1000 edges=10000")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--delete", type=int, help="also write a random deletion of this many explicit facts")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run a benchmark suite and write CSV")
    b.add_argument("--suite", choices=sorted(SUITES), required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--count", type=int, default=500, help="fuzz instances")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="check an updated materialisation against rematerialisation")
    v.add_argument("program")
    v.add_argument("data")
    v.add_argument("delta")
    v.add_argument("result")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatalogError, OSError, ValueError) as exc:
        print(f"dlivm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
