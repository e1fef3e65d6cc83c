"""Configuration-driven experiment runner and report generation.

An experiment is the cross-product (algorithm x sample fraction x seed) over
one problem; every run writes a trace CSV and contributes one summary row
(min full loss, median full loss over the trailing window, iterations).
Summaries are pure functions of trace files: re-summarizing never re-runs
optimization.
"""

from __future__ import annotations

import os
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .datasets import Dataset, TeacherSpec, libsvm_parse, load_dataset, teacher_generate
from .driver import (
    AcceptanceRule,
    Policy,
    RunConfig,
    RunTrace,
    SamplingScheme,
    run,
    sgd_run,
)
from .linesearch import DecreaseCondition, LineSearchConfig
from .problems import FiniteSumProblem, decomposed_quadratic, two_component_1d
from .theory import TheoryReport
from .traceio import load_trace, write_trace

OUTPUT_DIR_ENV = "ALAS_OUT_DIR"


class ConfigError(ValueError):
    pass


BUILTIN_PROBLEMS = {
    "quadratic": (lambda: decomposed_quadratic([4.0, 2.0]), (1.0, 1.0)),
    "saddle": (lambda: decomposed_quadratic([1.0, -1.0]), (0.0, 1e-4)),
    "two_component": (two_component_1d, (1.0,)),
}


@dataclass(frozen=True)
class AlgorithmSpec:
    kind: str  # "alas" | "sgd"
    policy: Policy = Policy.PRACTICAL
    learning_rate: float | None = None

    @property
    def label(self) -> str:
        if self.kind == "alas":
            return f"alas-{self.policy.value}"
        return f"sgd({self.learning_rate:g})"


@dataclass(frozen=True)
class ExperimentConfig:
    problem_kind: str  # "teacher" | "dataset" | "builtin"
    algorithms: tuple[AlgorithmSpec, ...]
    fractions: tuple[float, ...]
    seeds: tuple[int, ...]
    out_dir: Path
    teacher: TeacherSpec | None = None
    dataset_path: str | None = None
    builtin: str | None = None
    model_layers: tuple[int, ...] | None = None
    x0: tuple[float, ...] | None = None
    epsilon: float = 1e-5
    theta: float = 0.9
    eta: float = 1e-2
    j_max: int = 50
    condition: DecreaseCondition | None = None  # None: per-policy default
    sampling: SamplingScheme = SamplingScheme.EPOCH_PARTITION
    acceptance: AcceptanceRule = AcceptanceRule.PLAIN
    j_consecutive: int | None = None
    max_iterations: int = 1000
    wall_clock_seconds: float | None = None
    full_metrics_every: int = 100

    def __post_init__(self):
        if not self.algorithms or not self.fractions or not self.seeds:
            raise ConfigError("need at least one algorithm, one fraction and one seed")


@dataclass(frozen=True)
class SummaryRow:
    arch: str
    algorithm: str
    fraction: float
    seed: int
    min_full_loss: float | None
    median_full_loss: float | None
    iterations: int

    def __post_init__(self):
        if (
            self.min_full_loss is not None
            and self.median_full_loss is not None
            and self.min_full_loss > self.median_full_loss
        ):
            raise ValueError("min full loss cannot exceed the window median")


def _load_problem(config: ExperimentConfig):
    """Resolve the problem source.  Returns (factory, arch label, default x0
    factory keyed by seed); raises ConfigError before any run starts."""
    if config.problem_kind == "builtin":
        if config.builtin not in BUILTIN_PROBLEMS:
            raise ConfigError(
                f"unknown builtin {config.builtin!r}; have {sorted(BUILTIN_PROBLEMS)}"
            )
        make, default_x0 = BUILTIN_PROBLEMS[config.builtin]
        problem = make()
        x0 = np.asarray(config.x0 if config.x0 is not None else default_x0, dtype=float)
        return problem, config.builtin, lambda seed: x0

    from .objectives import MLPSpec, init_params, mlp_oracle

    if config.model_layers is None:
        raise ConfigError("training problems need model.layers")
    spec = MLPSpec(config.model_layers)
    if config.problem_kind == "teacher":
        if config.teacher is None:
            raise ConfigError("teacher problems need the teacher spec")
        dataset = teacher_generate(config.teacher)
    elif config.problem_kind == "dataset":
        if config.dataset_path is None:
            raise ConfigError("dataset problems need a path")
        dataset = read_dataset_file(config.dataset_path)
    else:
        raise ConfigError(f"unknown problem kind {config.problem_kind!r}")
    problem = mlp_oracle(spec, dataset)

    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        return problem, spec.label, lambda seed: x0
    return problem, spec.label, lambda seed: init_params(spec, [seed, 2])


def read_dataset_file(path) -> Dataset:
    """Dataset reader: the binary cache or the sparse classification text
    format, told apart by the cache magic."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"dataset file {path} does not exist")
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"ALASDATA":
        return load_dataset(path)
    with open(path, "r") as fh:
        return libsvm_parse(fh, provenance=f"libsvm:{path.name}")


def _condition_for(config: ExperimentConfig, alg: AlgorithmSpec) -> DecreaseCondition:
    if config.condition is not None:
        return config.condition
    if alg.kind == "alas" and alg.policy is Policy.THEORETICAL:
        return DecreaseCondition.CUBIC
    return DecreaseCondition.QUADRATIC


def trace_filename(alg_label: str, fraction: float, seed: int) -> str:
    return f"{alg_label}_f{fraction:g}_s{seed}.csv"


def run_experiment(config: ExperimentConfig, echo=None) -> list[Path]:
    """Execute the cross-product and write one trace file per run plus
    ``summary.csv``; returns the trace paths."""
    problem, arch, x0_for_seed = _load_problem(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for alg in config.algorithms:
        for fraction in config.fractions:
            for seed in config.seeds:
                run_cfg = RunConfig(
                    policy=alg.policy,
                    epsilon=config.epsilon,
                    line_search=LineSearchConfig(
                        theta=config.theta,
                        eta=config.eta,
                        condition=_condition_for(config, alg),
                        j_max=config.j_max,
                    ),
                    sampling=config.sampling,
                    fraction=fraction,
                    acceptance=config.acceptance,
                    j_consecutive=config.j_consecutive,
                    max_iterations=config.max_iterations,
                    wall_clock_seconds=config.wall_clock_seconds,
                    seed=seed,
                    full_metrics_every=config.full_metrics_every,
                )
                meta = {"arch": arch, "algorithm": alg.label}
                x0 = x0_for_seed(seed)
                if alg.kind == "alas":
                    trace = run(problem, run_cfg, x0, meta=meta)
                else:
                    trace = sgd_run(problem, alg.learning_rate, run_cfg, x0, meta=meta)
                path = out_dir / trace_filename(alg.label, fraction, seed)
                write_trace(trace, path)
                paths.append(path)
                if echo is not None:
                    echo(f"wrote {path}")
    rows, _, _ = summarize([load_trace(p) for p in paths])
    write_summary(rows, out_dir / "summary.csv")
    return paths


@dataclass(frozen=True)
class RunSummary:
    row: SummaryRow
    step_counts: dict = field(default_factory=dict)
    ls_histogram: dict = field(default_factory=dict)


def summarize_trace(trace: RunTrace, window_fraction: float = 0.2) -> RunSummary:
    """Per-run metrics: min/median full loss, step-kind counts and the
    backtrack-count histogram.  The median is taken over full-loss values in
    the trailing ``window_fraction`` of iterations (plus the terminal value
    when present)."""
    if not trace.records:
        raise ValueError("cannot summarize an empty trace")
    total = len(trace.records)
    cutoff = total * (1.0 - window_fraction)
    losses = [r.full_loss for r in trace.records if r.full_loss is not None]
    window = [
        r.full_loss
        for r in trace.records
        if r.full_loss is not None and r.k >= cutoff
    ]
    if trace.final_full_loss is not None:
        losses.append(trace.final_full_loss)
        window.append(trace.final_full_loss)
    row = SummaryRow(
        arch=trace.meta.get("arch", ""),
        algorithm=trace.meta.get("algorithm", ""),
        fraction=trace.config.fraction,
        seed=trace.config.seed,
        min_full_loss=min(losses) if losses else None,
        median_full_loss=statistics.median(window) if window else None,
        iterations=total,
    )
    return RunSummary(
        row=row,
        step_counts=dict(Counter(r.step_kind.value for r in trace.records)),
        ls_histogram=dict(Counter(r.ls_iters for r in trace.records)),
    )


def summarize(traces, window_fraction: float = 0.2):
    """Summary rows plus per-run step-type distributions and line-search
    histograms, in trace order."""
    summaries = [summarize_trace(t, window_fraction) for t in traces]
    return (
        [s.row for s in summaries],
        [s.step_counts for s in summaries],
        [s.ls_histogram for s in summaries],
    )


SUMMARY_COLUMNS = (
    "arch", "algorithm", "fraction", "seed",
    "min_full_loss", "median_full_loss", "iterations",
)


def write_summary(rows, path) -> None:
    lines = ["# alas-summary v1", ",".join(SUMMARY_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.arch,
                    r.algorithm,
                    repr(float(r.fraction)),
                    str(r.seed),
                    "" if r.min_full_loss is None else repr(r.min_full_loss),
                    "" if r.median_full_loss is None else repr(r.median_full_loss),
                    str(r.iterations),
                ]
            )
        )
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


# -- experiment config files -------------------------------------------------

def load_experiment_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML experiment file; keyword overrides win over file values,
    and the output directory also honors the ALAS_OUT_DIR environment
    variable (flag > env > file)."""
    with open(path, "r") as fh:
        raw = yaml.safe_load(fh) or {}
    return experiment_config_from_dict(raw, **overrides)


def experiment_config_from_dict(raw: dict, **overrides) -> ExperimentConfig:
    problem = raw.get("problem") or {}
    model = raw.get("model") or {}
    runcfg = dict(raw.get("run") or {})
    algs_raw = raw.get("algorithms") or []

    for key in ("fractions", "seeds", "max_iterations", "wall_clock_seconds",
                "epsilon", "sampling", "out_dir", "full_metrics_every",
                "j_consecutive"):
        if overrides.get(key) is not None:
            runcfg[key] = overrides[key]

    out_dir = runcfg.get("out_dir")
    if overrides.get("out_dir") is None and os.environ.get(OUTPUT_DIR_ENV):
        out_dir = os.environ[OUTPUT_DIR_ENV]
    if out_dir is None:
        out_dir = "runs"

    algorithms = []
    for spec in algs_raw:
        kind = spec.get("kind")
        if kind == "alas":
            algorithms.append(
                AlgorithmSpec("alas", policy=Policy(spec.get("policy", "practical")))
            )
        elif kind == "sgd":
            if "learning_rate" not in spec:
                raise ConfigError("sgd algorithm entries need learning_rate")
            algorithms.append(
                AlgorithmSpec("sgd", learning_rate=float(spec["learning_rate"]))
            )
        else:
            raise ConfigError(f"unknown algorithm kind {kind!r}")

    kind = problem.get("kind")
    teacher = None
    if kind == "teacher":
        teacher = TeacherSpec(
            layer_sizes=tuple(problem["layers"]),
            n_points=int(problem.get("n_points", 50_000)),
            seed=int(problem.get("seed", 0)),
            weight_std=float(problem.get("weight_std", 3.0)),
        )

    condition = runcfg.get("condition")
    try:
        return ExperimentConfig(
            problem_kind=kind,
            algorithms=tuple(algorithms),
            fractions=tuple(float(f) for f in runcfg.get("fractions", [])),
            seeds=tuple(int(s) for s in runcfg.get("seeds", [])),
            out_dir=Path(out_dir),
            teacher=teacher,
            dataset_path=problem.get("path"),
            builtin=problem.get("name"),
            model_layers=tuple(model["layers"]) if "layers" in model else None,
            x0=tuple(problem["x0"]) if "x0" in problem else None,
            epsilon=float(runcfg.get("epsilon", 1e-5)),
            theta=float(runcfg.get("theta", 0.9)),
            eta=float(runcfg.get("eta", 1e-2)),
            j_max=int(runcfg.get("j_max", 50)),
            condition=DecreaseCondition(condition) if condition else None,
            sampling=SamplingScheme(runcfg.get("sampling", "partition")),
            acceptance=AcceptanceRule(runcfg.get("acceptance", "plain")),
            j_consecutive=(
                None if runcfg.get("j_consecutive") is None
                else int(runcfg["j_consecutive"])
            ),
            max_iterations=int(runcfg.get("max_iterations", 1000)),
            wall_clock_seconds=(
                None if runcfg.get("wall_clock_seconds") is None
                else float(runcfg["wall_clock_seconds"])
            ),
            full_metrics_every=int(runcfg.get("full_metrics_every", 100)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad experiment config: {exc}") from exc


# -- theory report rendering --------------------------------------------------

def _clamp_note(value: float) -> str:
    return " (clamped to full sampling)" if value > 1.0 else ""


def render_theory_text(report: TheoryReport) -> str:
    c = report.constants
    b_full, b_sub = report.bounds_full, report.bounds_subsampled
    lines = [
        "inputs:",
    ]
    for key, value in report.inputs.items():
        lines.append(f"  {key} = {value:g}" if isinstance(value, float) else f"  {key} = {value}")
    lines += [
        "step-size constants:",
        f"  c_nc = {c.c_nc:.6g}   c_n = {c.c_n:.6g}   c_rn = {c.c_rn:.6g}   c = {c.c:.6g}",
        f"  jbar_nc = {c.jbar_nc:.6g}   jbar_n = {c.jbar_n:.6g}   jbar_rn = {c.jbar_rn:.6g}   jbar = {c.jbar:.6g}",
        f"  U_L = {report.U_L:.6g}   c_hat = {b_full.c_hat:.6g}",
        "accuracy tolerances:",
        f"  delta_f = {report.delta_f:.6g}   delta_g = {report.delta_g:.6g}   delta_H = {report.delta_H:.6g}",
        f"  rho(c*eps^(1/2), p) = {report.rho_at_tolerance:.6g}",
        "sample fractions:",
        f"  hessian  pi >= {report.pi_hessian:.6g}{_clamp_note(report.pi_hessian)}",
        f"  function pi >= {report.pi_function:.6g}{_clamp_note(report.pi_function)}",
        f"  gradient pi >= {report.pi_gradient:.6g}{_clamp_note(report.pi_gradient)}",
        f"  combined pi(eps) >= {report.pi_eps:.6g}{_clamp_note(report.pi_eps)}",
        "expected-iteration bounds (full sampling):",
        f"  first stationary iterate   <= {b_full.expected_first_stationary:.6g}",
        f"  J+1 consecutive stationary <= {b_full.expected_j_consecutive:.6g}",
        f"  derivative evaluations     <= {b_full.derivative_evaluations:.6g}",
        f"  function evaluations       <= {b_full.function_evaluations:.6g}",
        "expected-iteration bounds (subsampled):",
        f"  first stationary iterate   <= {b_sub.expected_first_stationary:.6g}",
        f"  J+1 consecutive stationary <= {b_sub.expected_j_consecutive:.6g}",
        f"  derivative evaluations     <= {b_sub.derivative_evaluations:.6g}",
        f"  function evaluations       <= {b_sub.function_evaluations:.6g}",
        f"  shrunk tolerance eps_hat    = {b_sub.epsilon_hat:.6g}",
        "stationarity certificates:",
        f"  inflated tolerances = ({report.inflated_tolerances[0]:.6g}, {report.inflated_tolerances[1]:.6g})",
        f"  stop probability over J+1 stationary iterations = {report.stop_probability:.6g}",
    ]
    return "\n".join(lines)


def theory_report_dict(report: TheoryReport) -> dict:
    c = report.constants
    return {
        "inputs": dict(report.inputs),
        "constants": {
            "c_nc": c.c_nc, "c_n": c.c_n, "c_rn": c.c_rn, "c": c.c,
            "jbar_nc": c.jbar_nc, "jbar_n": c.jbar_n, "jbar_rn": c.jbar_rn,
            "jbar": c.jbar, "U_L": report.U_L, "c_hat": report.bounds_full.c_hat,
        },
        "tolerances": {
            "delta_f": report.delta_f, "delta_g": report.delta_g,
            "delta_H": report.delta_H,
            "rho": report.rho_at_tolerance,
            "inflated": list(report.inflated_tolerances),
        },
        "sample_fractions": {
            "hessian": report.pi_hessian,
            "function": report.pi_function,
            "gradient": report.pi_gradient,
            "combined": report.pi_eps,
        },
        "bounds": {
            "full": {
                "first_stationary": report.bounds_full.expected_first_stationary,
                "j_consecutive": report.bounds_full.expected_j_consecutive,
                "derivative_evaluations": report.bounds_full.derivative_evaluations,
                "function_evaluations": report.bounds_full.function_evaluations,
            },
            "subsampled": {
                "first_stationary": report.bounds_subsampled.expected_first_stationary,
                "j_consecutive": report.bounds_subsampled.expected_j_consecutive,
                "derivative_evaluations": report.bounds_subsampled.derivative_evaluations,
                "function_evaluations": report.bounds_subsampled.function_evaluations,
                "epsilon_hat": report.bounds_subsampled.epsilon_hat,
            },
        },
        "stop_probability": report.stop_probability,
    }
