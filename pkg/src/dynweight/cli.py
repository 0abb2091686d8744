"""Command line: run scenarios, check traces, sweep seeds, replay the worked examples.

Exit codes: 0 all good, 1 a checker failed, 2 the scenario/config/trace was invalid.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional

from .checkers import (
    SUITES,
    CompletionLedger,
    TraceError,
    mode_of,
    monitor_integrity,
    parse_changes,
    run_suite,
)
from .core import ConfigError, ProcessId, is_quorum, min_weight_threshold, smallest_quorum_size, weight_of
from .scenario import bundled_names, load_scenario, parse_seeds
from .sim import run
from .tracefile import dump_record, read_traces, write_traces

OK, FAILED, INVALID = 0, 1, 2


def _seeds(args, script) -> range:
    if getattr(args, "seed", None) is not None:
        return range(args.seed, args.seed + 1)
    if getattr(args, "seeds", None):
        return parse_seeds(args.seeds)
    return script.seeds


def run_seed(script, seed: int):
    cfg, schedule, concrete = script.instantiate(seed)
    return run(cfg, schedule, concrete)


def describe(trace) -> str:
    p = trace.records[0]["payload"]
    end = trace.records[-1]["payload"]
    responds = trace.of_kind("Respond")
    eff = sum(1 for r in responds if r["payload"].get("effective") is True)
    null = sum(1 for r in responds if r["payload"].get("effective") is False)
    parts = [f"seed {p['seed']}", f"n={p['n']} f={p['f']}", p["fairness"], end["status"],
             f"{end['steps']} steps", f"{len(responds)} responses"]
    if eff or null:
        parts.append(f"{eff} effective / {null} null")
    crashes = trace.of_kind("Crash")
    if crashes:
        parts.append("crashed " + ",".join(r["from"] for r in crashes))
    return ", ".join(parts)


def _print_failure(v, out) -> None:
    print(v.line(), file=out)
    if v.counterexample is not None:
        print("  counterexample: " + json.dumps(v.counterexample, default=str)[:2000], file=out)


def cmd_run(args) -> int:
    script = load_scenario(args.scenario)
    traces = []
    for seed in _seeds(args, script):
        tr = run_seed(script, seed)
        traces.append(tr)
        print(f"{script.name}: {describe(tr)}")
    if args.trace:
        write_traces(args.trace, traces)
        print(f"wrote {len(traces)} trace(s) to {args.trace}")
    if args.figure and traces:
        from .plots import weight_trajectories

        weight_trajectories(traces[0], args.figure)
        print(f"wrote figure {args.figure}")
    return OK


def cmd_check(args) -> int:
    traces = read_traces(args.trace)
    if not traces:
        raise TraceError(f"{args.trace} holds no traces")
    status = OK
    records = []
    for tr in traces:
        seed = tr.records[0]["payload"]["seed"]
        for v in run_suite(tr, args.suite):
            records.append({"seed": seed, **v.record()})
            if v.ok:
                print(f"seed {seed}: {v.line()}")
            else:
                status = FAILED
                print(f"seed {seed}: ", end="")
                _print_failure(v, sys.stdout)
    if args.verdicts:
        with open(args.verdicts, "w") as fh:
            for r in records:
                fh.write(dump_record(r) + "\n")
    return status


def _per_run_count(tr) -> Optional[int]:
    mode = mode_of(tr)
    if mode == "demo-wr":
        return sum(1 for r in tr.of_kind("Oracle") if r["payload"]["effective"])
    if mode == "demo-pwr":
        return sum(1 for r in tr.of_kind("Oracle") if r["payload"]["effective"] and r["payload"]["group"] == "S-F")
    return None


def _range_text(xs) -> str:
    lo, hi = min(xs), max(xs)
    return str(lo) if lo == hi else f"{lo}..{hi}"


def cmd_sweep(args) -> int:
    script = load_scenario(args.scenario)
    seeds = _seeds(args, script)
    status = OK
    failures = 0
    counts, rows = [], []
    eff = null = 0
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        for seed in seeds:
            tr = run_seed(script, seed)
            if trace_fh:
                for r in tr.records:
                    trace_fh.write(dump_record(r) + "\n")
            verdicts = run_suite(tr, args.suite)
            bad = [v for v in verdicts if not v.ok]
            if bad:
                failures += 1
                status = FAILED
                print(f"seed {seed}: ", end="")
                _print_failure(bad[0], sys.stdout)
            c = _per_run_count(tr)
            if c is not None:
                counts.append(c)
            for r in tr.of_kind("Respond"):
                e = r["payload"].get("effective")
                eff += e is True
                null += e is False
            integ = next((v for v in verdicts if v.check == "integrity"), None) or monitor_integrity(tr)
            rows.append((seed, tr.records[-1]["payload"]["steps"], integ.stats.get("min_weight"),
                         integ.stats.get("threshold")))
    finally:
        if trace_fh:
            trace_fh.close()
    print(f"{script.name}: {len(seeds)} runs, {len(seeds) - failures} passed suite {args.suite!r}")
    if counts:
        word = "reassigns" if script.mode == "demo-wr" else "transfers into s1"
        print(f"effective {word} per run: {_range_text(counts)}")
    elif eff or null:
        print(f"transfers: {eff} effective, {null} null")
    if args.figure:
        from .plots import sweep_summary

        sweep_summary(rows, args.figure)
        print(f"wrote figure {args.figure}")
    return status


def _check(label: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    return ok


def cmd_examples(args) -> int:
    results = []

    ex1 = run_seed(load_scenario("example1"), 1)
    reads = [r["payload"] for r in ex1.of_kind("Respond") if r["payload"]["op"] == "read_changes"]
    w1 = weight_of(parse_changes(reads[0]["result"]), ProcessId.parse("s1"))
    null = [r["payload"]["complete"] for r in ex1.of_kind("Respond") if r["payload"].get("effective") is False]
    results.append(_check("example1", w1 == Fraction(5, 2) and null == [["s3", 2, "s2", "0/1"]],
                          f"weight(s1) read back as {w1}; null outcome {null}"))
    results.append(_check("example1 integrity", monitor_integrity(ex1).ok, "availability on every prefix"))

    cfg2 = load_scenario("example2").cfg
    thr = min_weight_threshold(cfg2)
    ex2 = run_seed(load_scenario("example2"), 1)
    v = monitor_integrity(ex2)
    final = list(CompletionLedger.from_trace(ex2).prefixes())[-1][1]
    s123 = [ProcessId.parse(x) for x in ("s1", "s2", "s3")]
    results.append(_check(
        "example2",
        thr == Fraction(7, 10) and v.ok and Fraction(v.stats["min_weight"]) > thr and is_quorum(final, s123, cfg2),
        f"floor {thr}, min weight {v.stats.get('min_weight')}, {{s1,s2,s3}} quorum: {is_quorum(final, s123, cfg2)}",
    ))

    sc = load_scenario("heavy-pair-down")
    ws = list(sc.cfg.initial_weights)
    size = smallest_quorum_size(ws, sc.cfg.total_weight, among=range(2, 7))
    tr = run_seed(sc, 1)
    outcomes = [r["payload"]["effective"] for r in tr.of_kind("Respond") if r["payload"]["op"] == "transfer"]
    results.append(_check("heavy-pair-down", size == 5 and outcomes == [False, True],
                          f"smallest quorum without s1,s2 has {size} servers; transfer outcomes {outcomes}"))

    for name in ("alg1-demo", "alg2-demo"):
        script = load_scenario(name)
        counts, ok = [], True
        for seed in range(1, args.demo_seeds + 1):
            tr = run_seed(script, seed)
            ok &= all(v.ok for v in run_suite(tr, "all"))
            counts.append(_per_run_count(tr))
        results.append(_check(name, ok and set(counts) == {1},
                              f"{args.demo_seeds} seeds, effective competing changes per run: {_range_text(counts)}"))
    return OK if all(results) else FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynweight", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="execute a scenario for one or more seeds")
    p.add_argument("scenario", help=f"bundled name ({', '.join(bundled_names())}) or a .json file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int)
    g.add_argument("--seeds", help="inclusive range A..B")
    p.add_argument("--trace", help="write JSON-lines trace(s) here")
    p.add_argument("--figure", help="write a weight-trajectory plot of the first run here")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check", help="run a checker suite over a trace file")
    p.add_argument("trace")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--verdicts", help="write verdict records here")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("sweep", help="run and check a scenario over a seed range")
    p.add_argument("scenario")
    p.add_argument("--seeds", help="inclusive range A..B (default: the scenario's own)")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--trace", help="write every run's trace here")
    p.add_argument("--figure", help="write a per-seed summary plot here")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("examples", help="replay the bundled worked examples")
    p.add_argument("--demo-seeds", type=int, default=20)
    p.set_defaults(fn=cmd_examples)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return INVALID


if __name__ == "__main__":
    sys.exit(main())
