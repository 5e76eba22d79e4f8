"""FastAPI service wrapping the selection toolkit.

Endpoints mirror the CLI subcommands: ``/dcor`` computes distance
correlations with independence tests, ``/select`` runs a forward-selection
pass, ``/bench`` runs a simulation benchmark, and ``/report`` re-renders a
run summary.  ``/datasets`` registers a dataset in memory so repeated
queries against the same data skip re-uploading and re-parsing.
"""

from __future__ import annotations

import threading
import uuid
from importlib.metadata import version as _pkg_version

from fastapi import FastAPI, HTTPException

from ..data_model import Dataset, StructuralError
from ..dcor import MemoryBudgetError, dcor_auto, independence_test
from ..reporting import (
    SummaryError,
    bench_summary,
    render_report,
    rows_to_csv,
    selection_summary,
)
from ..scenarios import run_benchmark, scenario
from ..selector import run_selection
from . import schemas

try:
    VERSION = _pkg_version("dcselect")
except Exception:  # not installed, e.g. running from a checkout
    VERSION = "0.0.0"

app = FastAPI(title="dcselect", version=VERSION)

_datasets: dict[str, Dataset] = {}
_datasets_lock = threading.Lock()


def _resolve_dataset(payload: schemas.DatasetIn | None, dataset_id: str | None) -> Dataset:
    if payload is not None:
        return schemas.dataset_from_payload(payload)
    with _datasets_lock:
        ds = _datasets.get(dataset_id)
    if ds is None:
        raise HTTPException(status_code=404, detail=f"unknown dataset_id {dataset_id!r}")
    return ds


def _client_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=VERSION)


@app.post("/datasets", response_model=schemas.RegisterResponse)
def register_dataset(payload: schemas.DatasetIn) -> schemas.RegisterResponse:
    try:
        ds = schemas.dataset_from_payload(payload)
    except (StructuralError, ValueError) as exc:
        raise _client_error(exc) from exc
    dataset_id = uuid.uuid4().hex
    with _datasets_lock:
        _datasets[dataset_id] = ds
    return schemas.RegisterResponse(dataset_id=dataset_id, n=ds.n,
                                    candidates=ds.candidate_names)


@app.post("/dcor", response_model=schemas.DcorResponse)
def dcor_endpoint(req: schemas.DcorRequest) -> schemas.DcorResponse:
    ds = _resolve_dataset(req.dataset, req.dataset_id)
    by_name = dict(ds.candidate_map())
    by_name[ds.response.name] = ds.response
    if req.pairs:
        pairs = []
        for x_name, y_name in req.pairs:
            if x_name not in by_name or y_name not in by_name:
                missing = x_name if x_name not in by_name else y_name
                raise HTTPException(status_code=422,
                                    detail=f"unknown covariate {missing!r}")
            pairs.append((f"{x_name}:{y_name}", by_name[x_name], by_name[y_name]))
    else:
        pairs = [(c.name, c, ds.response) for c in ds.candidates]
    rows = []
    for label, x, y in pairs:
        try:
            if req.n_perm > 0:
                res = independence_test(x, y, req.n_perm, req.seed,
                                        memory_budget=req.memory_budget,
                                        block_size=req.block_size)
            else:
                res = dcor_auto(x, y, memory_budget=req.memory_budget,
                                block_size=req.block_size)
        except (MemoryBudgetError, StructuralError, ValueError) as exc:
            raise _client_error(exc) from exc
        rows.append(schemas.DcorRow(name=label, dcor=res.dcor, p_value=res.p_value))
    return schemas.DcorResponse(rows=rows, seed=req.seed)


@app.post("/select", response_model=schemas.SelectResponse)
def select_endpoint(req: schemas.SelectRequest) -> schemas.SelectResponse:
    ds = _resolve_dataset(req.dataset, req.dataset_id)
    try:
        config = req.config.to_config()
        model, state = run_selection(ds, config)
    except (StructuralError, MemoryBudgetError, ValueError) as exc:
        raise _client_error(exc) from exc
    summary = selection_summary(model, state, config, ds.candidate_names)
    text, trace_rows = render_report(summary)
    return schemas.SelectResponse(summary=summary, report=text,
                                  trace_csv=rows_to_csv(trace_rows))


@app.post("/bench", response_model=schemas.BenchResponse)
def bench_endpoint(req: schemas.BenchRequest) -> schemas.BenchResponse:
    try:
        spec = scenario(req.scenario, B=req.B, a=req.a,
                        n_train=req.n_train, n_test=req.n_test)
        result = run_benchmark(spec, req.config.to_config(), n_jobs=req.n_jobs)
    except (StructuralError, ValueError) as exc:
        raise _client_error(exc) from exc
    summary = bench_summary(result)
    text, csv_rows = render_report(summary)
    return schemas.BenchResponse(summary=summary, table=text,
                                 csv=rows_to_csv(csv_rows))


@app.post("/report", response_model=schemas.ReportResponse)
def report_endpoint(req: schemas.ReportRequest) -> schemas.ReportResponse:
    try:
        text, csv_rows = render_report(req.summary)
    except SummaryError as exc:
        raise _client_error(exc) from exc
    return schemas.ReportResponse(text=text, csv=rows_to_csv(csv_rows))
