import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from alas.driver import (
    IterationRecord,
    Policy,
    RunConfig,
    RunTrace,
    SamplingScheme,
    TerminationReason,
    run,
)
from alas.harness import (
    AlgorithmSpec,
    ConfigError,
    ExperimentConfig,
    experiment_config_from_dict,
    load_experiment_config,
    run_experiment,
    summarize,
    summarize_trace,
    write_summary,
)
from alas.linesearch import LineSearchConfig
from alas.problems import diagonal_quadratic
from alas.steps import StepKind
from alas.traceio import dump_trace, load_trace, write_trace

DATA_DIR = Path(__file__).parent / "data"


def quadratic_trace(max_iterations=5, seed=1, **overrides):
    cfg = dict(
        policy=Policy.THEORETICAL,
        epsilon=1e-5,
        line_search=LineSearchConfig(),
        sampling=SamplingScheme.EPOCH_PARTITION,
        fraction=1.0,
        max_iterations=max_iterations,
        seed=seed,
        full_metrics_every=1,
    )
    cfg.update(overrides)
    p = diagonal_quadratic([4.0, 2.0])
    return run(p, RunConfig(**cfg), np.array([1.0, 1.0]),
               meta={"arch": "quadratic", "algorithm": "alas-theoretical"})


class TestTraceRoundTrip:
    def test_exact_roundtrip(self, tmp_path):
        trace = quadratic_trace()
        path = tmp_path / "trace.csv"
        write_trace(trace, path)
        assert load_trace(path) == trace

    def test_roundtrip_preserves_float_bits(self, tmp_path):
        trace = quadratic_trace()
        back = load_trace(dump_trace(trace))
        for a, b in zip(trace.records, back.records):
            assert a.sampled_loss == b.sampled_loss
            assert a.grad_norm == b.grad_norm
        assert np.array_equal(back.final_x, trace.final_x)

    def test_roundtrip_with_optional_fields_absent(self):
        trace = quadratic_trace(full_metrics_every=0)
        back = load_trace(dump_trace(trace))
        assert back == trace
        assert back.final_full_loss is None

    def test_golden_file(self):
        # Schema freeze: a seeded 5-iteration run must serialize to the
        # committed bytes.  Regenerate deliberately (see tests/data/README)
        # when the trace schema version changes.
        golden = (DATA_DIR / "golden_trace.csv").read_text()
        assert dump_trace(quadratic_trace()) == golden


def synthetic_trace(losses, window_losses_at=None):
    records = []
    for k, loss in enumerate(losses):
        records.append(
            IterationRecord(
                k=k, elapsed_s=0.0, step_kind=StepKind.NEWTON, alpha=1.0,
                ls_iters=0, sampled_loss=float(loss), full_loss=float(loss),
                grad_norm=1.0, next_grad_norm=1.0, lambda_min=1.0,
                rayleigh=None, sample_fraction=1.0, sample_digest="0" * 16,
                model_loss_after=float(loss), model_stationary=False,
            )
        )
    cfg = RunConfig(
        policy=Policy.THEORETICAL, epsilon=1e-5, line_search=LineSearchConfig(),
        sampling=SamplingScheme.EPOCH_PARTITION, fraction=1.0,
        max_iterations=len(losses), seed=0,
    )
    return RunTrace(cfg, tuple(records), TerminationReason.MAX_ITERATIONS,
                    np.zeros(2), meta={"arch": "synthetic", "algorithm": "alas"})


class TestSummarize:
    def test_worked_example(self):
        summary = summarize_trace(synthetic_trace([5, 4, 3, 2, 1]), window_fraction=0.4)
        assert summary.row.min_full_loss == 1.0
        assert summary.row.median_full_loss == 1.5
        assert summary.row.iterations == 5

    def test_window_one_is_whole_run(self):
        summary = summarize_trace(synthetic_trace([5, 4, 3, 2, 1]), window_fraction=1.0)
        assert summary.row.median_full_loss == 3.0

    def test_step_counts_and_histogram(self):
        trace = quadratic_trace()
        summary = summarize_trace(trace)
        assert sum(summary.step_counts.values()) == len(trace.records)
        assert sum(summary.ls_histogram.values()) == len(trace.records)
        assert set(summary.step_counts) <= {k.value for k in StepKind}

    def test_empty_trace_rejected(self):
        trace = synthetic_trace([1.0])
        trace.records = ()
        with pytest.raises(ValueError):
            summarize_trace(trace)

    def test_min_not_above_median(self):
        rows, _, _ = summarize([quadratic_trace()])
        row = rows[0]
        assert row.min_full_loss <= row.median_full_loss


EXPERIMENT_YAML = """
problem:
  kind: builtin
  name: quadratic
run:
  fractions: [1.0, 0.5]
  seeds: [3]
  max_iterations: 5
  epsilon: 1.0e-5
  full_metrics_every: 1
  out_dir: "{out}"
algorithms:
  - kind: alas
    policy: theoretical
  - kind: sgd
    learning_rate: 0.1
"""


class TestRunExperiment:
    def test_cross_product_files_and_rows(self, tmp_path):
        config_path = tmp_path / "exp.yaml"
        config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path / "runs"))
        config = load_experiment_config(config_path)
        paths = run_experiment(config)
        assert len(paths) == 4  # 2 algorithms x 2 fractions x 1 seed
        summary = (tmp_path / "runs" / "summary.csv").read_text().splitlines()
        assert summary[0] == "# alas-summary v1"
        assert len(summary) == 2 + 4  # version, header, 4 rows

    def test_determinism_across_invocations(self, tmp_path):
        for sub in ("a", "b"):
            config_path = tmp_path / f"exp_{sub}.yaml"
            config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path / sub))
            run_experiment(load_experiment_config(config_path))
        a = (tmp_path / "a" / "summary.csv").read_bytes()
        b = (tmp_path / "b" / "summary.csv").read_bytes()
        assert a == b

    def test_validation_before_running(self, tmp_path):
        raw = yaml.safe_load(EXPERIMENT_YAML.format(out=tmp_path))
        raw["problem"] = {"kind": "dataset", "path": str(tmp_path / "missing.bin")}
        raw["model"] = {"layers": [2, 1]}
        config = experiment_config_from_dict(raw)
        with pytest.raises(ConfigError):
            run_experiment(config)
        assert not list(tmp_path.glob("*.csv"))

    def test_needs_algorithms(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(
                problem_kind="builtin", algorithms=(), fractions=(1.0,),
                seeds=(1,), out_dir=Path("x"), builtin="quadratic",
            )


class TestConfigOverrides:
    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        config_path = tmp_path / "exp.yaml"
        config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path / "file_dir"))
        monkeypatch.setenv("ALAS_OUT_DIR", str(tmp_path / "env_dir"))
        config = load_experiment_config(config_path)
        assert config.out_dir == tmp_path / "env_dir"

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        config_path = tmp_path / "exp.yaml"
        config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path / "file_dir"))
        monkeypatch.setenv("ALAS_OUT_DIR", str(tmp_path / "env_dir"))
        config = load_experiment_config(config_path, out_dir=str(tmp_path / "flag_dir"))
        assert config.out_dir == tmp_path / "flag_dir"

    def test_seed_and_fraction_overrides(self, tmp_path):
        config_path = tmp_path / "exp.yaml"
        config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path))
        config = load_experiment_config(config_path, seeds=(7, 8), fractions=(0.25,))
        assert config.seeds == (7, 8)
        assert config.fractions == (0.25,)


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "alas.cli", *args],
        capture_output=True, text=True, env=env,
    )


class TestCli:
    def test_theory_text_and_json_agree(self):
        flags = ["theory", "--L", "1", "--L-H", "1", "--U-g", "1", "--U-H", "1",
                 "--epsilon", "0.01", "--p", "0.9", "--N", "10000"]
        text = run_cli(*flags)
        assert text.returncode == 0
        assert "c = 0.44949" in text.stdout
        as_json = run_cli(*flags, "--json")
        payload = json.loads(as_json.stdout)
        assert payload["constants"]["c"] == pytest.approx(0.44949, rel=1e-4)
        assert f"{payload['sample_fractions']['hessian']:.6g}" in text.stdout

    def test_theory_clamp_annotation(self):
        out = run_cli(
            "theory", "--L", "1", "--L-H", "1", "--U-g", "1", "--U-H", "1",
            "--epsilon", "1e-8", "--p", "0.999", "--N", "100",
        )
        assert "clamped to full sampling" in out.stdout

    def test_theory_rejects_bad_p(self):
        out = run_cli("theory", "--L", "1", "--L-H", "1", "--U-g", "1",
                      "--U-H", "1", "--p", "1.0", "--N", "10")
        assert out.returncode == 2

    def test_gen_data_roundtrip(self, tmp_path):
        out_file = tmp_path / "teacher.bin"
        out = run_cli("gen-data", "--layers", "2,4,2,1", "--n", "100",
                      "--seed", "5", "--out", str(out_file))
        assert out.returncode == 0
        from alas.datasets import TeacherSpec, load_dataset, teacher_generate

        assert load_dataset(out_file) == teacher_generate(
            TeacherSpec((2, 4, 2, 1), 100, 5)
        )

    def test_check_passes(self):
        out = run_cli("check", "--layers", "3,2,1", "--n", "10", "--seed", "1")
        assert out.returncode == 0
        assert "PASS" in out.stdout

    def test_run_and_summarize(self, tmp_path):
        config_path = tmp_path / "exp.yaml"
        config_path.write_text(EXPERIMENT_YAML.format(out=tmp_path / "runs"))
        out = run_cli("run", "--config", str(config_path))
        assert out.returncode == 0, out.stderr
        traces = sorted((tmp_path / "runs").glob("*_f*_s*.csv"))
        assert len(traces) == 4
        summ = run_cli("summarize", *[str(t) for t in traces], "--window", "0.5")
        assert summ.returncode == 0
        assert "step counts" in summ.stdout


def test_write_summary_stable_schema(tmp_path):
    rows, _, _ = summarize([quadratic_trace()])
    path = tmp_path / "summary.csv"
    write_summary(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# alas-summary v1"
    assert lines[1] == "arch,algorithm,fraction,seed,min_full_loss,median_full_loss,iterations"
