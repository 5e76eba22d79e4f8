"""Command-line interface.

The CLI is a thin client of the HTTP service: every subcommand builds a
request, sends it to the service, and writes the returned artifacts.  By
default the service application runs in-process (no network); ``--server``
points the same requests at a remote instance started with ``serve``.

Subcommands:

* ``dcor``   -- distance correlation (and independence test) table as CSV
* ``select`` -- forward selection on a manifest-described dataset
* ``bench``  -- simulation benchmark with seeded replications
* ``report`` -- re-render a run summary written by select/bench
* ``serve``  -- run the HTTP service
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

from .data_model import StructuralError
from .io import ManifestError, load_dataset, load_manifest
from .service.app import app
from .service.schemas import dataset_to_payload

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _parse_bytes(text: str) -> int:
    """Parse a byte count with an optional K/M/G suffix."""
    text = text.strip().upper()
    factor = 1
    for suffix, mult in (("K", 1 << 10), ("M", 1 << 20), ("G", 1 << 30)):
        if text.endswith(suffix):
            factor = mult
            text = text[:-1]
            break
    try:
        return int(float(text) * factor)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse byte count {text!r}") from None


CONFIG_FLAGS = ("alpha_screen", "alpha_model", "n_perm", "catalog",
                "max_iterations", "seed", "memory_budget", "block_size")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Selector config flags; unset flags fall back to manifest config and
    then to server defaults."""
    parser.add_argument("--alpha-screen", type=float, default=None,
                        help="significance level of the screening independence test")
    parser.add_argument("--alpha-model", type=float, default=None,
                        help="significance level of the nested-model acceptance test")
    parser.add_argument("--n-perm", type=int, default=None,
                        help="permutations for the independence test")
    parser.add_argument("--catalog", choices=("linear_only", "linear_or_smooth"),
                        default=None, help="model catalog")
    parser.add_argument("--max-iterations", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--memory-budget", type=_parse_bytes, default=None,
                        help="memory budget in bytes (K/M/G suffixes allowed)")
    parser.add_argument("--block-size", type=int, default=None,
                        help="tile size L for blockwise distance computations")


def _config_payload(args: argparse.Namespace, base: dict | None = None) -> dict:
    cfg = dict(base or {})
    for key in CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _client(args: argparse.Namespace) -> httpx.Client:
    if args.server:
        return httpx.Client(base_url=args.server.rstrip("/"), timeout=None)
    # in-process mode drives the ASGI app directly over the same HTTP surface
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise RuntimeError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _load_manifest_dataset(path: str):
    manifest = load_manifest(path)
    return manifest, load_dataset(manifest)


def cmd_dcor(args: argparse.Namespace) -> int:
    manifest, dataset = _load_manifest_dataset(args.manifest)
    payload = {
        "dataset": dataset_to_payload(dataset),
        "pairs": [pair.split(":", 1) for pair in args.pair] if args.pair else None,
        "n_perm": args.n_perm,
        "seed": args.seed,
        "memory_budget": args.memory_budget,
        "block_size": args.block_size,
    }
    with _client(args) as client:
        body = _post(client, "/dcor", payload)
    print("name,dcor,p_value")
    for row in body["rows"]:
        p = "" if row["p_value"] is None else repr(row["p_value"])
        print(f"{row['name']},{row['dcor']!r},{p}")
    return EXIT_OK


def _write_artifacts(out_dir: Path, summary: dict, report: str, csv_text: str,
                     csv_name: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out_dir / "report.txt").write_text(report)
    (out_dir / csv_name).write_text(csv_text)


def cmd_select(args: argparse.Namespace) -> int:
    manifest, dataset = _load_manifest_dataset(args.manifest)
    config = _config_payload(args, base=manifest.config)
    payload = {"dataset": dataset_to_payload(dataset), "config": config}
    with _client(args) as client:
        body = _post(client, "/select", payload)
    out_dir = Path(args.out or manifest.output_dir or ".")
    _write_artifacts(out_dir, body["summary"], body["report"], body["trace_csv"],
                     "trace.csv")
    print(body["report"], end="")
    print(f"artifacts written to {out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    payload = {
        "scenario": args.scenario,
        "B": args.B,
        "a": [float(v) for v in args.a.split(",")] if args.a else None,
        "n_train": args.n_train,
        "n_test": args.n_test,
        "n_jobs": args.threads,
        "config": _config_payload(args),
    }
    with _client(args) as client:
        body = _post(client, "/bench", payload)
    out_dir = Path(args.out or ".")
    _write_artifacts(out_dir, body["summary"], body["table"], body["csv"],
                     "bench_table.csv")
    print(body["table"], end="")
    print(f"artifacts written to {out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.summary)
    if not path.exists():
        raise ManifestError(f"summary file not found: {path}")
    try:
        summary = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path} line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    with _client(args) as client:
        body = _post(client, "/report", {"summary": summary})
    print(body["text"], end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(body["text"])
        (out_dir / "report.csv").write_text(body["csv"])
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("dcselect.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcselect",
        description="Distance-correlation forward selection for additive models",
    )
    parser.add_argument("--server", default=os.environ.get("DCSELECT_SERVER"),
                        help="URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dcor = sub.add_parser("dcor", help="distance correlation table as CSV on stdout")
    p_dcor.add_argument("--manifest", required=True, help="dataset manifest path")
    p_dcor.add_argument("--pair", action="append", metavar="X:Y",
                        help="explicit pair (repeatable); default pairs every "
                             "candidate with the response")
    p_dcor.add_argument("--n-perm", type=int, default=499,
                        help="permutations for the test; 0 skips the test")
    p_dcor.add_argument("--seed", type=int, default=0)
    p_dcor.add_argument("--memory-budget", type=_parse_bytes, default=1 << 30)
    p_dcor.add_argument("--block-size", type=int, default=None)
    p_dcor.set_defaults(func=cmd_dcor)

    p_select = sub.add_parser("select", help="run forward selection on a dataset")
    p_select.add_argument("--manifest", required=True)
    p_select.add_argument("--out", default=None, help="output directory")
    _add_config_flags(p_select)
    p_select.set_defaults(func=cmd_select)

    p_bench = sub.add_parser("bench", help="run a simulation benchmark")
    p_bench.add_argument("--scenario", required=True,
                         choices=("YR1", "YR2", "YR3", "YR4", "YR5",
                                  "FUN_INDEP", "FUN_COLLIN", "CLASS_CROWN"))
    p_bench.add_argument("--B", type=int, default=1, help="number of replications")
    p_bench.add_argument("--a", default=None,
                         help="comma-separated coefficients for the functional designs")
    p_bench.add_argument("--n-train", type=int, default=None)
    p_bench.add_argument("--n-test", type=int, default=None)
    p_bench.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                         help="worker processes for replications")
    p_bench.add_argument("--out", default=None)
    _add_config_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_report = sub.add_parser("report", help="re-render a run summary")
    p_report.add_argument("--summary", required=True, help="run summary JSON path")
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
