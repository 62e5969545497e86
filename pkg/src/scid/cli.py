"""Command-line entry point.

Subcommands: ``gametime`` (timing analysis), ``synth`` (oracle-guided
program synthesis), ``switch`` (switching-logic synthesis), ``audit``
(inspect run logs). Every run writes a JSON report and CSV files into
``--outdir``; ``--svg`` adds figures. Exit status: 0 for any honest
verdict (including NO / unrealizable / failure results), 1 for usage
errors, 2 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import benchmarks, framework, report, synth, timing
from .frontend import build_dag, parse
from .hybrid import Guard, Mds, SafetySpec, SimConfig, closed_loop_simulate, \
    synthesize_switching
from .paths import PathOracle, PathVector, extract_feasible_basis
from .report import RunReport, Stopwatch, digest_inputs, write_csv
from .seeds import substream


def _read_program(path: str):
    if not os.path.exists(path):
        candidate = None
        try:
            candidate = benchmarks.path(path)
        except FileNotFoundError:
            pass
        if candidate is None:
            raise FileNotFoundError(f"no such program: {path}")
        path = candidate
    with open(path) as fh:
        return parse(fh.read()), path


def _outdir(args) -> str:
    os.makedirs(args.outdir, exist_ok=True)
    return args.outdir


def _audit_log(args) -> framework.AuditLog:
    return framework.AuditLog(os.path.join(_outdir(args), "audit.jsonl"))


def _finish(args, rep: RunReport, lines) -> int:
    out = os.path.join(_outdir(args), "report.json")
    with open(out, "w") as fh:
        fh.write(rep.to_json() + "\n")
    if args.json:
        print(rep.to_json())
    else:
        for line in lines:
            print(line)
    return 0


# ----------------------------------------------------------------- gametime


def cmd_gametime(args) -> int:
    _outdir(args)  # before any dump path that may point inside it
    program, program_path = _read_program(args.program)
    cfg = build_dag(program)
    if args.dump_cfg:
        with open(args.dump_cfg, "w") as fh:
            fh.write(cfg.to_dot() + "\n")
    platform = timing.PlatformModel.from_json(args.platform, seed=args.seed)
    platform = platform.bind(cfg)

    with Stopwatch() as watch:
        oracle = PathOracle(cfg, seed=substream(args.seed, "feasibility"),
                            dump_cnf=args.dump_cnf)
        basis = extract_feasible_basis(cfg, oracle=oracle,
                                       candidate_budget=args.path_budget)
        verdict = timing.answer_ta(
            cfg, platform, Fraction(args.tau), args.delta, seed=args.seed,
            trial_factor=args.trial_factor, path_budget=args.path_budget,
            round_robin=args.round_robin, audit_log=_audit_log(args))

        # Fig-style per-path table: predicted vs one actual measurement.
        n_trials = verdict.n_trials
        lengths = timing.fit_predictor(
            basis, timing.run_trials(platform, basis, n_trials, args.seed,
                                     round_robin=args.round_robin))
        rows = []
        predicted_values = []
        actual_values = []
        path_id = 0
        for edge_ids in cfg.enumerate_paths(limit=args.path_budget):
            pv = PathVector.from_edges(cfg, edge_ids)
            if not oracle.feasible(pv):
                continue
            predicted = timing.predict_time(basis, lengths, pv)
            actual = timing.measure(platform, pv, oracle.test_for(pv),
                                    trial=n_trials + 1 + path_id)
            rows.append((path_id, float(predicted), float(actual)))
            predicted_values.append(float(predicted))
            actual_values.append(float(actual))
            path_id += 1

    outdir = _outdir(args)
    write_csv(os.path.join(outdir, "paths.csv"),
              ["path_id", "predicted_cycles", "actual_cycles"], rows)
    if args.dump_basis:
        basis_rows = []
        for pv, test in zip(basis.paths, basis.tests):
            basis_rows.append(list(pv.bits) + [f"{k}={v}" for k, v in sorted(test.items())])
        write_csv(os.path.join(outdir, "basis.csv"),
                  [f"e{i}" for i in range(cfg.n_edges)] + ["test..."], basis_rows)
    if args.svg:
        report.plot_time_histogram(
            predicted_values, actual_values,
            os.path.join(outdir, "histogram.svg"))

    rep = RunReport(
        subcommand="gametime",
        inputs_digest=digest_inputs(sys.argv[1:], [program_path]),
        seed=args.seed,
        payload={
            "answer": verdict.answer,
            "tau": str(verdict.tau),
            "tau_star": str(verdict.tau_star),
            "predicted_worst": str(verdict.predicted_worst),
            "basis_size": verdict.basis_size,
            "n_trials": verdict.n_trials,
            "n_feasible_paths": len(rows),
            "witness_test": verdict.witness_test,
        },
        audit=verdict.audit,
        wall_clock_s=watch.seconds,
    )
    lines = [
        f"{verdict.answer}  tau={verdict.tau}  tau*={verdict.tau_star} "
        f"(predicted {verdict.predicted_worst})",
        f"basis paths: {verdict.basis_size}, feasible paths: {len(rows)}, "
        f"trials: {verdict.n_trials}",
    ]
    if verdict.witness_test is not None:
        lines.append(f"witness input: {verdict.witness_test}")
    return _finish(args, rep, lines)


# -------------------------------------------------------------------- synth


def _load_oracle(spec_text: str):
    """Oracle from a `.mc` file (bundled names allowed) or `builtin:NAME`."""
    if spec_text.startswith("builtin:"):
        name = spec_text.split(":", 1)[1]
        if name not in synth.BUILTIN_ORACLES:
            raise ValueError(
                f"unknown builtin oracle {name!r}; have {sorted(synth.BUILTIN_ORACLES)}")
        return synth.BUILTIN_ORACLES[name], []
    program, path = _read_program(spec_text)
    return synth.oracle_from_cfg(build_dag(program)), [path]


def cmd_synth(args) -> int:
    lib_path = args.library
    if not os.path.exists(lib_path):
        lib_path = benchmarks.path(args.library)
    lib = synth.ComponentLibrary.from_json(lib_path)
    oracle, oracle_files = _load_oracle(args.oracle)

    with Stopwatch() as watch:
        result = synth.ogis_loop(lib, oracle, seed=args.seed,
                                 max_iters=args.max_iters)
        equivalence = None
        counterexample = None
        if result.status == "ok":
            if lib.n_inputs * lib.width <= 16:
                equivalence, counterexample = synth.verify_equivalence(
                    lib, result.program, oracle)
            else:
                equivalence = "UNCHECKED"

    if result.status == "ok":
        if equivalence == "EQUIVALENT":
            validity, outcome = framework.CHECKED_BY_ENUMERATION, framework.SOUND_RESULT
        elif equivalence == "COUNTEREXAMPLE":
            validity, outcome = framework.ASSUMED, framework.UNKNOWN
        else:
            validity, outcome = framework.ASSUMED, framework.SOUND_RESULT
    elif result.status == "unrealizable":
        validity, outcome = framework.ASSUMED, framework.UNREALIZABLE
    else:
        validity, outcome = framework.ASSUMED, framework.UNKNOWN
    audit = framework.record_audit(
        synth.COMPONENT_HYPOTHESIS, validity, outcome, waiver=True,
        details={"iterations": result.iterations, "queries": result.oracle_queries},
        log=_audit_log(args))

    listing = result.program.pretty(lib) if result.program else None
    rep = RunReport(
        subcommand="synth",
        inputs_digest=digest_inputs(sys.argv[1:], [lib_path] + oracle_files),
        seed=args.seed,
        payload={
            "status": result.status,
            "program": listing,
            "iterations": result.iterations,
            "oracle_queries": result.oracle_queries,
            "equivalence": equivalence,
            "counterexample": counterexample,
        },
        audit=audit,
        wall_clock_s=watch.seconds,
    )
    lines = [f"status: {result.status} "
             f"(iterations {result.iterations}, oracle queries {result.oracle_queries})"]
    if listing:
        lines.append(listing)
    if equivalence:
        lines.append(f"equivalence: {equivalence}"
                     + (f" at {counterexample}" if counterexample else ""))
    return _finish(args, rep, lines)


# ------------------------------------------------------------------- switch


def cmd_switch(args) -> int:
    from .benchmarks import transmission as tr

    cfg = SimConfig(step=args.step, horizon=args.horizon,
                    dwell=args.dwell, grid=args.grid)
    is_transmission = args.mds == "transmission"
    input_files = []
    if is_transmission:
        mds, spec, guards0 = tr.build(grid=args.grid, init=args.init)
        reference = tr.REFERENCE_DWELL5 if args.dwell else tr.REFERENCE_DWELL0
    else:
        with open(args.mds) as fh:
            data = json.load(fh)
        input_files.append(args.mds)
        mds = Mds.from_dict(data)
        spec = SafetySpec(data["safety"], mds.var_names,
                          data.get("safety_outputs", ()))
        guards0 = {}
        for t in mds.transitions:
            iv = data.get("initial_guards", {}).get(t.name)
            if iv is None:
                guards0[t.name] = Guard.box(args.grid, [None] * len(mds.var_names))
            else:
                guards0[t.name] = Guard.box(
                    args.grid, [tuple(b) if b else None for b in iv])
        reference = None

    with Stopwatch() as watch:
        result = synthesize_switching(mds, spec, guards0, cfg,
                                      audit_log=_audit_log(args))
        loop_payload = None
        trace = None
        if is_transmission and result.status == "ok":
            driver = tr.TransmissionDriver(mds, result.guards, cfg, spec)
            trace, verdict = closed_loop_simulate(
                mds, result.guards, mds.initial_state, driver, cfg,
                spec=spec, goal=tr.goal)
            loop_payload = {
                "safe": verdict.safe,
                "goal_reached": verdict.goal_reached,
                "final_state": list(verdict.final_state),
                "final_mode": verdict.final_mode,
                "t_end": verdict.t_end,
                "switches": len(verdict.switches),
                "reason": verdict.reason,
            }

    outdir = _outdir(args)
    guard_rows = []
    table_lines = [f"fixpoint: {result.status} after {result.passes} passes "
                   f"({result.label_queries} labels)"]
    for t in mds.transitions:
        g = result.guards[t.name]
        desc = g.describe(mds.var_names)
        row = [t.name, desc]
        line = f"  {t.name:8s} {desc}"
        if reference and t.name in reference:
            lo_ref, hi_ref = reference[t.name]
            b = g.bounds[-1]
            if b is not None:
                lo, hi = b[0] * g.grid, b[1] * g.grid
                d_lo, d_hi = lo - lo_ref, hi - hi_ref
                row += [lo, hi, lo_ref, hi_ref, round(d_lo, 4), round(d_hi, 4)]
                line += (f"   reference [{lo_ref:g}, {hi_ref:g}] "
                         f"delta ({d_lo:+.2f}, {d_hi:+.2f})")
        guard_rows.append(row)
        table_lines.append(line)
    write_csv(os.path.join(outdir, "guards.csv"),
              ["transition", "guard", "lo", "hi", "reference_lo",
               "reference_hi", "delta_lo", "delta_hi"], guard_rows)
    with open(os.path.join(outdir, "guards.txt"), "w") as fh:
        fh.write("\n".join(table_lines) + "\n")
    if trace is not None:
        write_csv(os.path.join(outdir, "trace.csv"), trace.columns, trace.rows)
        if args.svg:
            report.plot_trace(trace, os.path.join(outdir, "trace.svg"))
    elif args.svg and trace is None:
        pass  # nothing to draw for a failed or non-benchmark run

    rep = RunReport(
        subcommand="switch",
        inputs_digest=digest_inputs(sys.argv[1:], input_files),
        seed=args.seed,
        payload={
            "status": result.status,
            "passes": result.passes,
            "label_queries": result.label_queries,
            "non_monotone": list(result.non_monotone),
            "failed_transition": result.failed_transition,
            "guards": {t.name: result.guards[t.name].describe(mds.var_names)
                       for t in mds.transitions},
            "closed_loop": loop_payload,
        },
        audit=result.audit,
        wall_clock_s=watch.seconds,
    )
    lines = list(table_lines)
    if result.non_monotone:
        lines.append(
            "note: non-monotone labels observed while learning "
            f"{', '.join(result.non_monotone)}; audit downgraded to "
            f"{result.audit.run_outcome}")
    if loop_payload:
        lines.append(
            f"closed loop: safe={loop_payload['safe']} "
            f"goal={loop_payload['goal_reached']} "
            f"final={tuple(round(x, 4) for x in loop_payload['final_state'])} "
            f"t={loop_payload['t_end']:.2f}")
    return _finish(args, rep, lines)


# -------------------------------------------------------------------- audit


def cmd_audit(args) -> int:
    records = framework.AuditLog.load(args.log)
    bad = 0
    for i, rec in enumerate(records):
        flag = ""
        if (rec.get("run_outcome") == framework.SOUND_RESULT
                and rec.get("validity_status") == framework.ASSUMED
                and not rec.get("waiver")):
            flag = "  << SOUND_RESULT without waiver under ASSUMED hypothesis"
            bad += 1
        print(f"[{i}] {rec.get('hypothesis')}: {rec.get('validity_status')} "
              f"-> {rec.get('run_outcome')} (waiver={rec.get('waiver')}){flag}")
    print(f"{len(records)} records, {bad} invariant violations")
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scid",
        description="structure-hypothesis synthesis workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", action="store_true",
                       help="print the machine-readable report to stdout")
        p.add_argument("--outdir", default="scid-out")
        p.add_argument("--svg", action="store_true", help="render SVG figures")

    p = sub.add_parser("gametime", help="timing analysis of a program")
    p.add_argument("--program", required=True, help=".mc source (bundled names allowed)")
    p.add_argument("--platform", required=True, help="platform model JSON")
    p.add_argument("--tau", required=True, type=Fraction,
                   help="time bound to decide (cycles)")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--trial-factor", type=int, default=20)
    p.add_argument("--path-budget", type=int, default=65536)
    p.add_argument("--round-robin", action="store_true",
                   help="debug: measure basis paths round-robin")
    p.add_argument("--dump-cfg", metavar="PATH", help="write the DAG as DOT")
    p.add_argument("--dump-basis", action="store_true",
                   help="write basis.csv (edge bits + test per basis path)")
    p.add_argument("--dump-cnf", metavar="PATH",
                   help="write the first feasibility query as DIMACS")
    common(p)
    p.set_defaults(func=cmd_gametime)

    p = sub.add_parser("synth", help="oracle-guided program synthesis")
    p.add_argument("--library", required=True, help="component library JSON")
    p.add_argument("--oracle", required=True,
                   help=".mc program or builtin:NAME")
    p.add_argument("--max-iters", type=int, default=64)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("switch", help="switching-logic synthesis")
    p.add_argument("--mds", default="transmission",
                   help="'transmission' or a custom MDS JSON file")
    p.add_argument("--grid", type=float, default=0.01)
    p.add_argument("--dwell", type=float, default=0.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--init", choices=("speed-range", "safety-window"),
                   default="speed-range",
                   help="initial guard overapproximation (transmission)")
    common(p)
    p.set_defaults(func=cmd_switch)

    p = sub.add_parser("audit", help="inspect an audit log")
    p.add_argument("--log", required=True, help="line-delimited JSON records")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
