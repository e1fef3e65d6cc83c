"""Trace files: one CSV per run, preceded by a structured-text header.

Header lines are ``# key = value`` pairs echoing the run configuration, the
termination reason, the final iterate and any harness labels; the CSV body
has one row per iteration.  Floats are written with shortest round-trip
repr, so deserialize(serialize(trace)) == trace exactly.  Files are written
atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from .driver import (
    AcceptanceRule,
    IterationRecord,
    Policy,
    RunConfig,
    RunTrace,
    SamplingScheme,
    TerminationReason,
)
from .linesearch import DecreaseCondition, LineSearchConfig
from .steps import StepKind

TRACE_FORMAT = "alas-trace v1"

COLUMNS = (
    "iter",
    "elapsed_s",
    "step_kind",
    "alpha",
    "ls_iters",
    "sampled_loss",
    "full_loss",
    "grad_norm",
    "lambda_min",
    "sample_fraction",
    "next_grad_norm",
    "rayleigh",
    "model_loss_after",
    "model_stationary",
    "sample_digest",
)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt_float(text: str):
    return None if text in ("", "none") else float(text)


def _header_lines(trace: RunTrace):
    cfg = trace.config
    ls = cfg.line_search
    pairs = [
        ("format", TRACE_FORMAT),
        ("policy", cfg.policy.value),
        ("epsilon", _fmt(cfg.epsilon)),
        ("theta", _fmt(ls.theta)),
        ("eta", _fmt(ls.eta)),
        ("condition", ls.condition.value),
        ("j_max", str(ls.j_max)),
        ("sampling", cfg.sampling.value),
        ("fraction", _fmt(cfg.fraction)),
        ("acceptance", cfg.acceptance.value),
        ("j_consecutive", _fmt(cfg.j_consecutive)),
        ("max_iterations", str(cfg.max_iterations)),
        ("wall_clock_seconds", _fmt(cfg.wall_clock_seconds)),
        ("seed", str(cfg.seed)),
        ("full_metrics_every", str(cfg.full_metrics_every)),
        ("termination", trace.termination.value if trace.termination else "none"),
        ("final_x", ",".join(repr(float(v)) for v in trace.final_x)),
        ("final_full_loss", _fmt(trace.final_full_loss)),
    ]
    for key in sorted(trace.meta):
        pairs.append((f"meta.{key}", str(trace.meta[key])))
    return [f"# {key} = {value}" for key, value in pairs]


def _record_row(r: IterationRecord):
    return [
        str(r.k),
        _fmt(r.elapsed_s),
        r.step_kind.value,
        _fmt(r.alpha),
        str(r.ls_iters),
        _fmt(r.sampled_loss),
        _fmt(r.full_loss) if r.full_loss is not None else "",
        _fmt(r.grad_norm),
        _fmt(r.lambda_min) if r.lambda_min is not None else "",
        _fmt(r.sample_fraction),
        _fmt(r.next_grad_norm) if r.next_grad_norm is not None else "",
        _fmt(r.rayleigh) if r.rayleigh is not None else "",
        _fmt(r.model_loss_after) if r.model_loss_after is not None else "",
        "1" if r.model_stationary else "0",
        r.sample_digest,
    ]


def dump_trace(trace: RunTrace) -> str:
    buf = io.StringIO()
    for line in _header_lines(trace):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for record in trace.records:
        writer.writerow(_record_row(record))
    return buf.getvalue()


def write_trace(trace: RunTrace, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(dump_trace(trace))
    os.replace(tmp, path)


def _parse_record(row) -> IterationRecord:
    (k, elapsed, kind, alpha, ls_iters, sampled, full, gnorm, lam, frac,
     next_gnorm, rayleigh, m_after, stationary, digest) = row
    return IterationRecord(
        k=int(k),
        elapsed_s=float(elapsed),
        step_kind=StepKind(kind),
        alpha=float(alpha),
        ls_iters=int(ls_iters),
        sampled_loss=float(sampled),
        full_loss=_opt_float(full),
        grad_norm=float(gnorm),
        next_grad_norm=_opt_float(next_gnorm),
        lambda_min=_opt_float(lam),
        rayleigh=_opt_float(rayleigh),
        sample_fraction=float(frac),
        sample_digest=digest,
        model_loss_after=_opt_float(m_after),
        model_stationary=stationary == "1",
    )


def load_trace(text_or_path) -> RunTrace:
    if isinstance(text_or_path, str) and "\n" in text_or_path:
        text = text_or_path
    else:
        with open(text_or_path, "r", newline="") as fh:
            text = fh.read()
    header: dict[str, str] = {}
    meta: dict[str, str] = {}
    lines = text.splitlines()
    body_start = 0
    for pos, line in enumerate(lines):
        if not line.startswith("# "):
            body_start = pos
            break
        key, _, value = line[2:].partition(" = ")
        if key.startswith("meta."):
            meta[key[len("meta."):]] = value
        else:
            header[key] = value
    if header.get("format") != TRACE_FORMAT:
        raise ValueError(f"unsupported trace format {header.get('format')!r}")

    j_text = header["j_consecutive"]
    config = RunConfig(
        policy=Policy(header["policy"]),
        epsilon=float(header["epsilon"]),
        line_search=LineSearchConfig(
            theta=float(header["theta"]),
            eta=float(header["eta"]),
            condition=DecreaseCondition(header["condition"]),
            j_max=int(header["j_max"]),
        ),
        sampling=SamplingScheme(header["sampling"]),
        fraction=float(header["fraction"]),
        acceptance=AcceptanceRule(header["acceptance"]),
        j_consecutive=None if j_text == "none" else int(j_text),
        max_iterations=int(header["max_iterations"]),
        wall_clock_seconds=_opt_float(header["wall_clock_seconds"]),
        seed=int(header["seed"]),
        full_metrics_every=int(header["full_metrics_every"]),
    )
    reader = csv.reader(lines[body_start:])
    rows = list(reader)
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("trace body is missing the expected column header")
    records = tuple(_parse_record(row) for row in rows[1:] if row)
    term_text = header["termination"]
    final_x = np.array(
        [float(tok) for tok in header["final_x"].split(",") if tok], dtype=float
    )
    return RunTrace(
        config=config,
        records=records,
        termination=None if term_text == "none" else TerminationReason(term_text),
        final_x=final_x,
        final_full_loss=_opt_float(header["final_full_loss"]),
        meta=meta,
    )
