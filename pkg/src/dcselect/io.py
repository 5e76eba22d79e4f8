"""Dataset manifests and CSV ingestion/export.

A dataset is described by a JSON manifest listing the response and the
candidate covariates with their kinds and source files:

* tabular files hold scalar / vector / categorical columns under a header
  row of names (a vector covariate names its columns explicitly);
* each functional covariate has its own file whose first row is the grid
  and whose remaining rows are the curves.

Values use '.' as the decimal separator and ',' as the field separator.
Missing or non-numeric cells are structural errors reported with file and
line number.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_model import (
    Covariate,
    Dataset,
    StructuralError,
    categorical_covariate,
    functional_covariate,
    scalar_covariate,
    vector_covariate,
)

__all__ = [
    "MANIFEST_SCHEMA_VERSION",
    "ManifestError",
    "CovariateRef",
    "Manifest",
    "load_manifest",
    "load_dataset",
    "export_dataset",
]

MANIFEST_SCHEMA_VERSION = 1


class ManifestError(ValueError):
    """A manifest or one of its referenced files failed to parse."""


@dataclass(frozen=True)
class CovariateRef:
    name: str
    kind: str
    file: str
    columns: tuple[str, ...] | None = None  # vector covariates only


@dataclass(frozen=True)
class Manifest:
    response: CovariateRef
    covariates: tuple[CovariateRef, ...]
    base_dir: Path
    config: dict = field(default_factory=dict)
    output_dir: str | None = None


def _ref_from_json(obj: dict, path: Path, role: str) -> CovariateRef:
    for key in ("name", "kind", "file"):
        if key not in obj:
            raise ManifestError(f"{path}: {role} entry is missing {key!r}")
    columns = tuple(obj["columns"]) if "columns" in obj else None
    if obj["kind"] == "vector" and columns is None:
        raise ManifestError(
            f"{path}: vector covariate {obj['name']!r} must list its columns"
        )
    return CovariateRef(str(obj["name"]), str(obj["kind"]), str(obj["file"]), columns)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path} line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    version = raw.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"{path}: manifest schema_version {version!r} is not supported "
            f"(expected {MANIFEST_SCHEMA_VERSION})"
        )
    if "response" not in raw or "covariates" not in raw:
        raise ManifestError(f"{path}: manifest needs 'response' and 'covariates'")
    response = _ref_from_json(raw["response"], path, "response")
    covariates = tuple(_ref_from_json(c, path, "covariate") for c in raw["covariates"])
    return Manifest(response, covariates, path.parent,
                    dict(raw.get("config", {})), raw.get("output_dir"))


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        raise ManifestError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        return [row for row in csv.reader(fh)]


class _TableFile:
    """A parsed tabular CSV: header row of names, one column per name."""

    def __init__(self, path: Path) -> None:
        rows = _read_rows(path)
        if not rows:
            raise ManifestError(f"{path}: empty file")
        self.path = path
        self.header = [h.strip() for h in rows[0]]
        self.n = len(rows) - 1
        width = len(self.header)
        self.cells: list[list[str]] = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != width:
                raise ManifestError(
                    f"{path} line {lineno}: expected {width} fields, got {len(row)}"
                )
            self.cells.append(row)

    def column(self, name: str) -> list[str]:
        try:
            j = self.header.index(name)
        except ValueError:
            raise ManifestError(f"{self.path}: no column named {name!r}") from None
        return [row[j] for row in self.cells]

    def float_column(self, name: str) -> np.ndarray:
        j = self.header.index(name) if name in self.header else None
        if j is None:
            raise ManifestError(f"{self.path}: no column named {name!r}")
        out = np.empty(self.n)
        for i, row in enumerate(self.cells):
            cell = row[j].strip()
            try:
                out[i] = float(cell)
            except ValueError:
                raise StructuralError(
                    f"{self.path} line {i + 2}: missing or non-numeric value "
                    f"{cell!r} in column {name!r}"
                ) from None
            if not np.isfinite(out[i]):
                raise StructuralError(
                    f"{self.path} line {i + 2}: non-finite value in column {name!r}"
                )
        return out

    def str_column(self, name: str) -> list[str]:
        values = [cell.strip() for cell in self.column(name)]
        for i, cell in enumerate(values):
            if not cell:
                raise StructuralError(
                    f"{self.path} line {i + 2}: missing value in column {name!r}"
                )
        return values


def _read_functional(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ManifestError(f"{path}: functional file needs a grid row and curves")
    def parse(row: list[str], lineno: int) -> np.ndarray:
        out = np.empty(len(row))
        for j, cell in enumerate(row):
            try:
                out[j] = float(cell)
            except ValueError:
                raise StructuralError(
                    f"{path} line {lineno}: missing or non-numeric value {cell.strip()!r}"
                ) from None
        return out
    grid = parse(rows[0], 1)
    curves = np.empty((len(rows) - 1, grid.size))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != grid.size:
            raise ManifestError(
                f"{path} line {i}: curve has {len(row)} points, grid has {grid.size}"
            )
        curves[i - 2] = parse(row, i)
    return grid, curves


def _build_covariate(ref: CovariateRef, base: Path,
                     tables: dict[Path, _TableFile]) -> Covariate:
    path = (base / ref.file).resolve()
    if ref.kind == "functional":
        grid, curves = _read_functional(path)
        return functional_covariate(ref.name, grid, curves)
    if path not in tables:
        tables[path] = _TableFile(path)
    table = tables[path]
    if ref.kind == "scalar":
        return scalar_covariate(ref.name, table.float_column(ref.name))
    if ref.kind == "vector":
        cols = [table.float_column(c) for c in ref.columns]
        return vector_covariate(ref.name, np.column_stack(cols))
    if ref.kind == "categorical":
        return categorical_covariate(ref.name, table.str_column(ref.name))
    raise ManifestError(f"unknown covariate kind {ref.kind!r} for {ref.name!r}")


def load_dataset(manifest: Manifest) -> Dataset:
    """Materialize the dataset a manifest describes."""
    tables: dict[Path, _TableFile] = {}
    response = _build_covariate(manifest.response, manifest.base_dir, tables)
    candidates = tuple(
        _build_covariate(ref, manifest.base_dir, tables) for ref in manifest.covariates
    )
    return Dataset(response, candidates)


def _format(x: float) -> str:
    return repr(float(x))


def export_dataset(dataset: Dataset, out_dir: str | Path,
                   config: dict | None = None) -> Path:
    """Write a dataset as CSV files plus a manifest; returns the manifest path.

    Scalar, vector and categorical covariates (and a non-functional
    response) share one tabular file; each functional covariate gets its
    own grid-plus-curves file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_cols: list[tuple[str, list[str]]] = []
    refs: list[dict] = []

    def add(c: Covariate) -> dict:
        if c.kind == "functional":
            fname = f"{c.name}.csv"
            with (out / fname).open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([_format(v) for v in c.grid])
                for curve in c.values:
                    writer.writerow([_format(v) for v in curve])
            return {"name": c.name, "kind": c.kind, "file": fname}
        if c.kind == "vector":
            names = [f"{c.name}_{j + 1}" for j in range(c.values.shape[1])]
            for j, col_name in enumerate(names):
                table_cols.append((col_name, [_format(v) for v in c.values[:, j]]))
            return {"name": c.name, "kind": c.kind, "file": "table.csv",
                    "columns": names}
        if c.kind == "categorical":
            table_cols.append((c.name, [c.levels[i] for i in c.values]))
        else:
            table_cols.append((c.name, [_format(v) for v in c.values]))
        return {"name": c.name, "kind": c.kind, "file": "table.csv"}

    response_ref = add(dataset.response)
    for c in dataset.candidates:
        refs.append(add(c))

    if table_cols:
        with (out / "table.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([name for name, _ in table_cols])
            for i in range(dataset.n):
                writer.writerow([col[i] for _, col in table_cols])

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "response": response_ref,
        "covariates": refs,
    }
    if config:
        manifest["config"] = config
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
