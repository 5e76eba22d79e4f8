"""Run summaries and their rendered forms.

Selection and benchmark runs serialize to a versioned JSON summary; the
render functions turn a summary back into a human-readable report plus CSV
rows.  Rendering is pure and deterministic, so re-rendering a summary is
byte-identical.
"""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import asdict
from pathlib import Path

from .additive import AdditiveModel
from .scenarios import BenchResult
from .selector import SelectionState, SelectorConfig

__all__ = [
    "SUMMARY_SCHEMA_VERSION",
    "SummaryError",
    "selection_summary",
    "bench_summary",
    "render_report",
    "trace_csv_rows",
    "rows_to_csv",
    "write_csv",
]

SUMMARY_SCHEMA_VERSION = 1

CATALOG_TAGS = {"linear_only": "LM", "linear_or_smooth": "AM"}


class SummaryError(ValueError):
    """A run summary has the wrong schema or shape."""


def _config_dict(config: SelectorConfig) -> dict:
    return asdict(config)


def selection_summary(model: AdditiveModel, state: SelectionState,
                      config: SelectorConfig, candidates: list[str]) -> dict:
    """JSON-serializable record of one selection run."""
    terms = []
    accept_stats = {e.candidate: e for e in state.events if e.action == "accepted"}
    for name, spec in state.M:
        event = accept_stats.get(name)
        terms.append({
            "name": name,
            "form": spec.form,
            "score_form": spec.score_form if spec.form == "fpca_scores" else None,
            "edf": model.term_edf.get(name, 0.0),
            "statistic": event.statistic if event else None,
            "p_value": event.p_value if event else None,
        })
    residual_sd = None
    if model.link == "identity" and model.n > model.edf:
        residual_sd = math.sqrt(model.deviance / (model.n - model.edf))
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "kind": "selection",
        "seed": config.seed,
        "config": _config_dict(config),
        "link": model.link,
        "n": model.n,
        "candidates": list(candidates),
        "selected": terms,
        "rejected": list(state.rejected),
        "remaining": list(state.S),
        "intercept": model.intercept,
        "edf": model.edf,
        "deviance": model.deviance,
        "deviance_explained": model.deviance_explained,
        "residual_sd": residual_sd,
        "iterations": state.iteration,
        "flags": list(model.flags),
        "trace": [asdict(row) for row in state.trace],
        "events": [asdict(e) for e in state.events],
    }


def bench_summary(result: BenchResult) -> dict:
    """JSON-serializable record of one benchmark run."""
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "kind": "bench",
        "seed": result.config.seed,
        "config": _config_dict(result.config),
        "scenario": {
            "id": result.scenario.id,
            "n_train": result.scenario.n_train,
            "n_test": result.scenario.n_test,
            "B": result.scenario.B,
            "theta": result.scenario.theta,
            "a": list(result.scenario.a),
        },
        "candidates": list(result.candidate_names),
        "frequencies": dict(result.frequencies),
        "mean_rmspe": result.mean_rmspe,
        "mean_misclassification": result.mean_misclassification,
        "failures": result.failures,
        "replications": [
            {"seed": r.seed, "selected": list(r.selected), "rmspe": r.rmspe,
             "misclassification": r.misclassification}
            for r in result.replications
        ],
    }


def _check_summary(summary: dict, expected_kind: str | None = None) -> str:
    version = summary.get("schema_version")
    if version != SUMMARY_SCHEMA_VERSION:
        raise SummaryError(
            f"summary schema_version {version!r} is not supported "
            f"(expected {SUMMARY_SCHEMA_VERSION})"
        )
    kind = summary.get("kind")
    if kind not in ("selection", "bench"):
        raise SummaryError(f"unknown summary kind {kind!r}")
    if expected_kind and kind != expected_kind:
        raise SummaryError(f"expected a {expected_kind} summary, got {kind!r}")
    return kind


def _fmt(x, digits: int = 3) -> str:
    if x is None:
        return ""
    return f"{x:.{digits}f}"


def _render_selection(summary: dict) -> tuple[str, list[list[str]]]:
    lines = [
        "Forward selection report",
        f"seed: {summary['seed']}",
        f"link: {summary['link']}  n: {summary['n']}  "
        f"catalog: {summary['config']['catalog']}",
        "",
    ]
    if not summary["selected"]:
        lines.append("Null model: no candidate rejected independence with the residuals.")
    else:
        header = ["order", "covariate", "form", "edf", "statistic", "p_value"]
        rows = []
        for i, term in enumerate(summary["selected"], start=1):
            form = term["form"]
            if term.get("score_form"):
                form = f"{form}({term['score_form']})"
            rows.append([str(i), term["name"], form, _fmt(term["edf"], 2),
                         _fmt(term["statistic"], 3), _fmt(term["p_value"], 4)])
        widths = [max(len(h), *(len(r[j]) for r in rows)) for j, h in enumerate(header)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    lines.append("")
    lines.append(f"deviance explained: {_fmt(summary['deviance_explained'], 4)}")
    if summary.get("residual_sd") is not None:
        lines.append(f"residual sd: {_fmt(summary['residual_sd'], 4)}")
    lines.append(f"total edf: {_fmt(summary['edf'], 2)}")
    if summary["rejected"]:
        lines.append(f"rejected at the model-comparison step: {', '.join(summary['rejected'])}")
    if summary["flags"]:
        lines.append(f"flags: {', '.join(summary['flags'])}")
    return "\n".join(lines) + "\n", trace_csv_rows(summary)


def trace_csv_rows(summary: dict) -> list[list[str]]:
    """Iteration-by-candidate table of test-filtered dCor values."""
    _check_summary(summary, "selection")
    candidates = summary["candidates"]
    by_iter: dict[int, dict[str, float]] = {}
    for row in summary["trace"]:
        by_iter.setdefault(row["iteration"], {})[row["candidate"]] = row["filtered"]
    out = [["seed", "iteration", *candidates]]
    for it in sorted(by_iter):
        vals = by_iter[it]
        out.append([str(summary["seed"]), str(it)]
                   + [repr(vals[c]) if c in vals else "" for c in candidates])
    return out


def _render_bench(summary: dict) -> tuple[str, list[list[str]]]:
    sc = summary["scenario"]
    tag = CATALOG_TAGS.get(summary["config"]["catalog"], "?")
    label = f"{sc['id']}-{tag}"
    names = summary["candidates"]
    freqs = summary["frequencies"]
    cols = [*names, "RMSPE"] if summary["mean_rmspe"] is not None else [*names, "MISCLASS"]
    value = summary["mean_rmspe"] if summary["mean_rmspe"] is not None \
        else summary["mean_misclassification"]
    cells = [_fmt(freqs.get(c, 0.0)) for c in names] + [_fmt(value)]
    widths = [max(len(h), len(v)) for h, v in zip(cols, cells)]
    lines = [
        f"Benchmark {label}: B={sc['B']} (n_train={sc['n_train']}, "
        f"n_test={sc['n_test']}, seed={summary['seed']})",
        "",
        " " * (len(label) + 2) + "  ".join(h.rjust(w) for h, w in zip(cols, widths)),
        label + "  " + "  ".join(v.rjust(w) for v, w in zip(cells, widths)),
    ]
    if summary["failures"]:
        lines.append(f"failed replications: {summary['failures']}")
    csv_rows = [["seed", "scenario", *cols],
                [str(summary["seed"]), label]
                + [repr(freqs.get(c, 0.0)) for c in names]
                + [repr(value) if value is not None else ""]]
    return "\n".join(lines) + "\n", csv_rows


def render_report(summary: dict) -> tuple[str, list[list[str]]]:
    """Human-readable report plus CSV rows for a run summary."""
    kind = _check_summary(summary)
    if kind == "selection":
        return _render_selection(summary)
    return _render_bench(summary)


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path: str | Path, rows: list[list[str]]) -> None:
    Path(path).write_text(rows_to_csv(rows))
