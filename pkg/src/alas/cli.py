"""Command-line interface.

Subcommands:
  run        execute an experiment described by a YAML config file
  summarize  recompute summary/step-distribution/histogram tables from traces
  theory     evaluate the constants, sample-size and complexity calculators
  gen-data   generate a synthetic teacher dataset into the binary cache
  check      verify analytic MLP derivatives against finite differences
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _add_run(sub):
    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True, help="YAML experiment file")
    p.add_argument("--out-dir", default=None, help="output directory override")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--wall-clock-seconds", type=float, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated seed list override")
    p.add_argument("--fractions", default=None, help="comma-separated fraction list override")


def _add_summarize(sub):
    p = sub.add_parser("summarize", help="summarize existing trace files")
    p.add_argument("traces", nargs="+", help="trace CSV files")
    p.add_argument("--window", type=float, default=0.2,
                   help="trailing iteration fraction for the median (default 0.2)")
    p.add_argument("--out", default=None, help="also write the summary CSV here")


def _add_theory(sub):
    p = sub.add_parser("theory", help="evaluate the worst-case calculators")
    p.add_argument("--L", type=float, required=True, help="gradient Lipschitz bound")
    p.add_argument("--L-H", dest="L_H", type=float, required=True, help="Hessian Lipschitz bound")
    p.add_argument("--U-g", dest="U_g", type=float, required=True, help="gradient norm bound")
    p.add_argument("--U-H", dest="U_H", type=float, required=True, help="Hessian norm bound")
    p.add_argument("--f-up", dest="f_up", type=float, default=1.0, help="component value bound")
    p.add_argument("--f-low", dest="f_low", type=float, default=0.0, help="objective lower bound")
    p.add_argument("--f0", type=float, default=1.0, help="initial objective value")
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--p", type=float, required=True, help="accuracy probability in (0,1)")
    p.add_argument("--kappa-g", dest="kappa_g", type=float, default=0.5)
    p.add_argument("--kappa-H", dest="kappa_H", type=float, default=0.5)
    p.add_argument("--J", type=int, default=0, help="consecutive stationary iterations minus 1")
    p.add_argument("--N", type=int, required=True, help="number of components")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _add_gen_data(sub):
    p = sub.add_parser("gen-data", help="generate a teacher dataset")
    p.add_argument("--layers", required=True,
                   help="comma-separated teacher layer sizes, e.g. 2,4,2,1")
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-std", type=float, default=3.0)
    p.add_argument("--out", required=True, help="output cache file")


def _add_check(sub):
    p = sub.add_parser("check", help="finite-difference derivative verification")
    p.add_argument("--layers", required=True,
                   help="comma-separated MLP layer sizes, e.g. 22,4,1")
    p.add_argument("--n", type=int, default=25, help="synthetic points to use")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5, help="finite-difference step")


def _int_list(text):
    return tuple(int(tok) for tok in text.split(",") if tok)


def _cmd_run(args) -> int:
    from .harness import load_experiment_config, run_experiment

    overrides = dict(
        out_dir=args.out_dir,
        max_iterations=args.max_iterations,
        wall_clock_seconds=args.wall_clock_seconds,
    )
    if args.seeds:
        overrides["seeds"] = _int_list(args.seeds)
    if args.fractions:
        overrides["fractions"] = tuple(float(t) for t in args.fractions.split(",") if t)
    config = load_experiment_config(args.config, **overrides)
    paths = run_experiment(config, echo=print)
    print(f"wrote {config.out_dir / 'summary.csv'} ({len(paths)} runs)")
    return 0


def _cmd_summarize(args) -> int:
    from .harness import summarize, write_summary
    from .traceio import load_trace

    traces = [load_trace(path) for path in args.traces]
    rows, step_counts, histograms = summarize(traces, args.window)
    for path, row, steps, hist in zip(args.traces, rows, step_counts, histograms):
        print(f"{path}:")
        print(f"  arch={row.arch} algorithm={row.algorithm} "
              f"fraction={row.fraction:g} seed={row.seed} iterations={row.iterations}")
        print(f"  min_full_loss={row.min_full_loss} median_full_loss={row.median_full_loss}")
        print(f"  step counts: {dict(sorted(steps.items()))}")
        print(f"  line-search histogram: {dict(sorted(hist.items()))}")
    if args.out:
        write_summary(rows, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_theory(args) -> int:
    from .harness import render_theory_text, theory_report_dict
    from .theory import ProblemConstants, compute_theory_report

    if not 0.0 < args.p < 1.0:
        print("error: --p must lie strictly between 0 and 1", file=sys.stderr)
        return 2
    constants = ProblemConstants(
        L=args.L, L_H=args.L_H, U_g=args.U_g, U_H=args.U_H,
        f_up=args.f_up, f_low=args.f_low, f0=args.f0,
    )
    report = compute_theory_report(
        constants, args.theta, args.eta, args.epsilon, args.p,
        args.kappa_g, args.kappa_H, args.J, args.N,
    )
    if args.json:
        print(json.dumps(theory_report_dict(report), indent=2, sort_keys=True))
    else:
        print(render_theory_text(report))
    return 0


def _cmd_gen_data(args) -> int:
    from .datasets import TeacherSpec, save_dataset, teacher_generate

    spec = TeacherSpec(
        layer_sizes=_int_list(args.layers),
        n_points=args.n,
        seed=args.seed,
        weight_std=args.weight_std,
    )
    dataset = teacher_generate(spec)
    save_dataset(dataset, args.out)
    print(f"wrote {args.out}: N={dataset.N} d={dataset.d} ({dataset.provenance})")
    return 0


def _cmd_check(args) -> int:
    import numpy as np

    from .objectives import MLPSpec, finite_difference_check, init_params, mlp_oracle
    from .datasets import Dataset

    layers = _int_list(args.layers)
    spec = MLPSpec(layers)
    rng = np.random.default_rng(args.seed)
    features = rng.random((args.n, layers[0]))
    labels = rng.uniform(-1.0, 1.0, size=args.n)
    problem = mlp_oracle(spec, Dataset(features, labels, "check"))
    w = init_params(spec, [args.seed, 2])
    grad_err, hess_err = finite_difference_check(problem, w, args.h)
    ok = grad_err <= 1e-5 and hess_err <= 1e-4
    print(f"architecture {spec.label}: {spec.parameter_count} parameters")
    print(f"max relative gradient error: {grad_err:.3e} (tolerance 1e-05)")
    print(f"max relative hessian error:  {hess_err:.3e} (tolerance 1e-04)")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="alas",
        description="Subsampled second-order line-search optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_summarize(sub)
    _add_theory(sub)
    _add_gen_data(sub)
    _add_check(sub)
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "summarize": _cmd_summarize,
        "theory": _cmd_theory,
        "gen-data": _cmd_gen_data,
        "check": _cmd_check,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
