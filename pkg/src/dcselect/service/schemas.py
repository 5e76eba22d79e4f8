"""Pydantic request/response models for the HTTP service, plus converters
between wire payloads and core dataset objects."""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..data_model import (
    Covariate,
    Dataset,
    categorical_covariate,
    functional_covariate,
    scalar_covariate,
    vector_covariate,
)
from ..selector import SelectorConfig


class CovariateIn(BaseModel):
    name: str
    kind: Literal["scalar", "vector", "categorical", "functional"]
    values: list[float] | list[list[float]] | list[str]
    grid: list[float] | None = None
    levels: list[str] | None = None

    @model_validator(mode="after")
    def _shape(self) -> "CovariateIn":
        if self.kind == "functional" and self.grid is None:
            raise ValueError(f"functional covariate {self.name!r} needs a grid")
        return self


class DatasetIn(BaseModel):
    response: CovariateIn
    candidates: list[CovariateIn] = Field(min_length=1)


class ConfigIn(BaseModel):
    """Selector configuration; defaults mirror :class:`SelectorConfig`."""

    alpha_screen: float = 0.05
    alpha_model: float = 0.05
    n_perm: int = 499
    catalog: Literal["linear_only", "linear_or_smooth"] = "linear_or_smooth"
    max_iterations: int | None = None
    seed: int = 0
    memory_budget: int = 1 << 30
    block_size: int | None = None
    smooth_df: float = 8.0
    fpca_components: int = 4

    def to_config(self) -> SelectorConfig:
        return SelectorConfig(**self.model_dump())


class RegisterResponse(BaseModel):
    dataset_id: str
    n: int
    candidates: list[str]


class DcorRequest(BaseModel):
    dataset: DatasetIn | None = None
    dataset_id: str | None = None
    pairs: list[tuple[str, str]] | None = None
    n_perm: int = 499
    seed: int = 0
    memory_budget: int = 1 << 30
    block_size: int | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "DcorRequest":
        if (self.dataset is None) == (self.dataset_id is None):
            raise ValueError("provide exactly one of dataset or dataset_id")
        return self


class DcorRow(BaseModel):
    name: str
    dcor: float
    p_value: float | None = None


class DcorResponse(BaseModel):
    rows: list[DcorRow]
    seed: int


class SelectRequest(BaseModel):
    dataset: DatasetIn | None = None
    dataset_id: str | None = None
    config: ConfigIn = ConfigIn()

    @model_validator(mode="after")
    def _one_source(self) -> "SelectRequest":
        if (self.dataset is None) == (self.dataset_id is None):
            raise ValueError("provide exactly one of dataset or dataset_id")
        return self


class SelectResponse(BaseModel):
    summary: dict
    report: str
    trace_csv: str


class BenchRequest(BaseModel):
    scenario: Literal["YR1", "YR2", "YR3", "YR4", "YR5",
                      "FUN_INDEP", "FUN_COLLIN", "CLASS_CROWN"]
    B: int = 1
    a: tuple[float, float, float, float] | None = None
    n_train: int | None = None
    n_test: int | None = None
    n_jobs: int = 1
    config: ConfigIn = ConfigIn()


class BenchResponse(BaseModel):
    summary: dict
    table: str
    csv: str


class ReportRequest(BaseModel):
    summary: dict


class ReportResponse(BaseModel):
    text: str
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str


def covariate_from_payload(payload: CovariateIn) -> Covariate:
    if payload.kind == "scalar":
        return scalar_covariate(payload.name, payload.values)
    if payload.kind == "vector":
        return vector_covariate(payload.name, payload.values)
    if payload.kind == "functional":
        return functional_covariate(payload.name, payload.grid, payload.values)
    return categorical_covariate(payload.name, payload.values, payload.levels)


def dataset_from_payload(payload: DatasetIn) -> Dataset:
    return Dataset(
        covariate_from_payload(payload.response),
        tuple(covariate_from_payload(c) for c in payload.candidates),
    )


def covariate_to_payload(c: Covariate) -> dict:
    if c.kind == "categorical":
        return {"name": c.name, "kind": c.kind,
                "values": [c.levels[i] for i in c.values],
                "levels": list(c.levels)}
    out = {"name": c.name, "kind": c.kind, "values": np.asarray(c.values).tolist()}
    if c.kind == "functional":
        out["grid"] = c.grid.tolist()
    return out


def dataset_to_payload(ds: Dataset) -> dict:
    return {
        "response": covariate_to_payload(ds.response),
        "candidates": [covariate_to_payload(c) for c in ds.candidates],
    }
