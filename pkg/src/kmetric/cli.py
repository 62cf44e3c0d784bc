"""Command-line front end.

Subcommands: ``fit`` (train one pipeline, write a JSON artifact),
``evaluate`` (score an artifact on a test CSV), ``experiment`` (the
repeated-split protocol over several methods), ``align`` (print alignment
weights for a kernel bank), and ``sweep`` (accuracy versus bank-prefix
size for the unweighted kernel).

Configs are flat ``key = value`` text with one ``[method]`` block per
method; see README.  All randomness derives from the config seed (or
``--seed``), so reruns write byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 runtime/fit error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .align import align_lp, align_qp, build_bank
from .data import Dataset, SplitPlan, Standardizer, fit_standardizer, load_csv
from .evaluate import (
    KERNELIZATIONS,
    LEARNERS,
    SIGMA_GRID,
    ExperimentReport,
    FittedPipeline,
    MethodConfig,
    accuracy,
    base_kernel_sweep,
    fit_pipeline,
    format_report,
    format_sweep,
    knn_predict,
    report_to_tsv,
    run_experiment,
)
from .kernels import format_kernel_spec, ideal_kernel, parse_kernel_spec
from .kpca import KpcaModel
from .lmnn import LmnnConfig
from .maps import LinearMap, Metric
from .nca import GradientDescentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ARTIFACT_FORMAT = "kmetric-pipeline-v1"


class ConfigError(ValueError):
    """Bad or missing configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config parsing: flat key=value lines with repeated [method] blocks
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> tuple[dict, list[dict]]:
    top: dict = {}
    methods: list[dict] = []
    current = top
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[method]":
            methods.append({})
            current = methods[-1]
            continue
        if line.startswith("["):
            raise ConfigError(f"line {lineno}: unknown section {line!r}")
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        current[key.strip()] = value.strip()
    return top, methods


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _split_kernel_list(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts if p.strip()]


def build_method_config(entry: dict) -> MethodConfig:
    entry = dict(entry)
    name = entry.pop("name", None)
    if not name:
        raise ConfigError("each [method] block needs a 'name = learner:kernelization' line")
    learner, _, kernelization = name.partition(":")
    if learner not in LEARNERS or kernelization not in KERNELIZATIONS:
        registered = [f"{l}:{k}" for l in LEARNERS for k in KERNELIZATIONS]
        raise ConfigError(f"unknown method {name!r}; registered methods: {', '.join(registered)}")
    kwargs: dict = {"learner": learner, "kernelization": kernelization}
    nca_opt: dict = {}
    lmnn_opt: dict = {}
    for key, value in entry.items():
        try:
            if key == "k":
                kwargs["neighbor_k"] = int(value)
            elif key == "c":
                kwargs["lmnn_c"] = float(value)
            elif key == "d":
                kwargs["out_dim"] = value if value in ("full", "half") else int(value)
            elif key == "max_dim":
                kwargs["max_dim"] = int(value)
            elif key == "folds":
                kwargs["cv_folds"] = int(value)
            elif key == "sigmas":
                kwargs["sigmas"] = tuple(float(s) for s in value.split(","))
            elif key == "kernels":
                kwargs["cv_kernels"] = tuple(parse_kernel_spec(s) for s in _split_kernel_list(value))
            elif key == "nca_max_iter":
                nca_opt["max_iter"] = int(value)
            elif key == "lmnn_max_iter":
                lmnn_opt["max_iter"] = int(value)
            else:
                raise ConfigError(f"unknown method key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"method key {key!r}: {exc}") from exc
    if nca_opt:
        kwargs["nca_opt"] = GradientDescentConfig(**nca_opt)
    if lmnn_opt:
        kwargs["lmnn_opt"] = LmnnConfig(**lmnn_opt)
    try:
        return MethodConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_dataset(top: dict, *, key: str = "dataset") -> Dataset:
    path = top.get(key)
    if not path:
        raise ConfigError(f"config needs a '{key} = <csv path>' line")
    if not Path(path).exists():
        raise ConfigError(f"dataset file does not exist: {path}")
    label_column = top.get("label_column", "-1")
    try:
        label_column = int(label_column)
    except ValueError:
        pass  # treat as a header name
    return load_csv(path, label_column)


def _read_config(path: Optional[str]) -> tuple[dict, list[dict]]:
    if not path:
        raise ConfigError("--config is required for this command")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file does not exist: {path}")
    return parse_config_text(p.read_text())


def _seed(top: dict, override: Optional[int]) -> int:
    if override is not None:
        return override
    try:
        return int(top.get("seed", "0"))
    except ValueError as exc:
        raise ConfigError(f"seed: {exc}") from exc


def _sigma_list(top: dict) -> tuple:
    if "sigmas" not in top:
        return SIGMA_GRID
    try:
        return tuple(float(s) for s in top["sigmas"].split(","))
    except ValueError as exc:
        raise ConfigError(f"sigmas: {exc}") from exc


# ---------------------------------------------------------------------------
# pipeline artifact (de)serialization
# ---------------------------------------------------------------------------


def _dataset_to_json(ds: Dataset) -> dict:
    return {
        "features": ds.features.tolist(),
        "labels": ds.labels.tolist(),
        "class_count": ds.class_count,
    }


def _dataset_from_json(obj: dict) -> Dataset:
    return Dataset(
        features=np.array(obj["features"], dtype=np.float64).reshape(len(obj["labels"]), -1),
        labels=np.array(obj["labels"], dtype=np.int64),
        class_count=int(obj["class_count"]),
    )


def pipeline_to_json(
    pipeline: FittedPipeline,
    train: Dataset,
    scaler: Optional[Standardizer],
    knn_k: int,
) -> dict:
    transform = pipeline.transform
    kind = "metric" if isinstance(transform, Metric) else "linear_map"
    matrix = transform.m if isinstance(transform, Metric) else transform.a
    doc = {
        "format": ARTIFACT_FORMAT,
        "method": {
            "name": pipeline.method.name,
            "neighbor_k": pipeline.method.neighbor_k,
            "lmnn_c": pipeline.method.lmnn_c,
            "out_dim": pipeline.method.out_dim,
        },
        "knn_k": knn_k,
        "standardizer": None
        if scaler is None
        else {"mean": scaler.mean.tolist(), "scale": scaler.scale.tolist()},
        "kernel": None if pipeline.selected_kernel is None else format_kernel_spec(pipeline.selected_kernel),
        "kpca": None
        if pipeline.kernel_model is None
        else {
            "eigvals": pipeline.kernel_model.centered_eigvals.tolist(),
            "projection": pipeline.kernel_model.projection.tolist(),
            "col_means": pipeline.kernel_model.col_means.tolist(),
            "grand_mean": pipeline.kernel_model.grand_mean,
            "train_coords": pipeline.kernel_model.train_coords.tolist(),
        },
        "transform": {
            "kind": kind,
            "matrix": matrix.tolist(),
            "provenance": transform.provenance,
            "objective_trace": list(transform.objective_trace),
        },
        "neighbor_rule": pipeline.neighbor_rule,
        "in_dim": pipeline.in_dim,
        "train": _dataset_to_json(train),
    }
    return doc


def pipeline_from_json(doc: dict) -> tuple[FittedPipeline, Dataset, Optional[Standardizer], int]:
    if doc.get("format") != ARTIFACT_FORMAT:
        raise ValueError(f"unrecognized artifact format: {doc.get('format')!r}")
    train = _dataset_from_json(doc["train"])
    scaler = None
    if doc["standardizer"] is not None:
        scaler = Standardizer(
            mean=np.array(doc["standardizer"]["mean"], dtype=np.float64),
            scale=np.array(doc["standardizer"]["scale"], dtype=np.float64),
        )
    learner, _, kernelization = doc["method"]["name"].partition(":")
    out_dim = doc["method"]["out_dim"]
    method = MethodConfig(
        learner=learner,
        kernelization=kernelization,
        neighbor_k=int(doc["method"]["neighbor_k"]),
        lmnn_c=float(doc["method"]["lmnn_c"]),
        out_dim=out_dim if isinstance(out_dim, str) else int(out_dim),
    )
    model = None
    if doc["kpca"] is not None:
        spec = parse_kernel_spec(doc["kernel"])
        eigvals = np.array(doc["kpca"]["eigvals"], dtype=np.float64)
        model = KpcaModel(
            kernel=spec,
            train_points=train,
            centered_eigvals=eigvals,
            projection=np.array(doc["kpca"]["projection"], dtype=np.float64).reshape(train.n, -1),
            rank=len(eigvals),
            col_means=np.array(doc["kpca"]["col_means"], dtype=np.float64),
            grand_mean=float(doc["kpca"]["grand_mean"]),
            train_coords=np.array(doc["kpca"]["train_coords"], dtype=np.float64).reshape(train.n, -1),
        )
    t = doc["transform"]
    matrix = np.array(t["matrix"], dtype=np.float64)
    if t["kind"] == "metric":
        matrix = matrix.reshape(doc["in_dim"], doc["in_dim"])
        transform = Metric(m=matrix, provenance=t["provenance"], objective_trace=tuple(t["objective_trace"]))
    else:
        matrix = matrix.reshape(-1, doc["in_dim"])
        transform = LinearMap(a=matrix, provenance=t["provenance"], objective_trace=tuple(t["objective_trace"]))
    pipeline = FittedPipeline(
        method=method,
        kernel_model=model,
        transform=transform,
        neighbor_rule=doc["neighbor_rule"],
        selected_kernel=None if doc["kernel"] is None else parse_kernel_spec(doc["kernel"]),
        selection_seconds=0.0,
        in_dim=int(doc["in_dim"]),
    )
    return pipeline, train, scaler, int(doc.get("knn_k", 1))


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_fit(args) -> int:
    top, method_entries = _read_config(args.config)
    if len(method_entries) != 1:
        raise ConfigError("fit expects exactly one [method] block")
    ds = _load_dataset(top)
    method = build_method_config(method_entries[0])
    seed = _seed(top, args.seed)
    do_standardize = _parse_bool(top.get("standardize", "true"), "standardize")
    knn_k = int(top.get("knn_k", "1"))
    scaler = fit_standardizer(ds) if do_standardize else None
    train = scaler.apply(ds) if scaler else ds
    try:
        pipeline = fit_pipeline(method, train, seed=seed)
    except Exception as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.output or top.get("output", "pipeline.json"))
    _write_json(out, pipeline_to_json(pipeline, train, scaler, knn_k))
    if args.verbose:
        trace = pipeline.transform.objective_trace
        if trace:
            print(f"objective trace: start {trace[0]:.6g}, end {trace[-1]:.6g}, {len(trace)} entries")
        if pipeline.selected_kernel is not None:
            print(f"selected kernel: {format_kernel_spec(pipeline.selected_kernel)}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise ConfigError(f"model artifact does not exist: {model_path}")
    if not Path(args.data).exists():
        raise ConfigError(f"test dataset does not exist: {args.data}")
    doc = json.loads(model_path.read_text())
    pipeline, train, scaler, knn_k = pipeline_from_json(doc)
    label_column: object = args.label_column
    try:
        label_column = int(label_column)
    except (TypeError, ValueError):
        label_column = label_column if label_column is not None else -1
    test = load_csv(args.data, label_column)
    try:
        if scaler is not None:
            test = scaler.apply(test)
        predicted = knn_predict(pipeline, train, test, knn_k)
    except ValueError as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    acc = accuracy(predicted, test.labels)
    print(f"accuracy {acc!r}")
    if args.predictions:
        lines = [f"{int(p)}\t{int(a)}" for p, a in zip(predicted, test.labels)]
        Path(args.predictions).write_text("predicted\tactual\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    top, method_entries = _read_config(args.config)
    if not method_entries:
        raise ConfigError("experiment needs at least one [method] block")
    ds = _load_dataset(top)
    methods = [build_method_config(e) for e in method_entries]
    seed = _seed(top, args.seed)
    try:
        plan = SplitPlan(
            seed=seed,
            train_size=int(top.get("train_size", str(ds.n // 2))),
            repetitions=int(top.get("repetitions", "10")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    baseline_name = top.get("baseline", methods[0].name)
    names = [m.name for m in methods]
    if baseline_name not in names:
        raise ConfigError(f"baseline {baseline_name!r} is not among the methods {names}")
    do_standardize = _parse_bool(top.get("standardize", "true"), "standardize")
    knn_k = int(top.get("knn_k", "1"))
    try:
        report = run_experiment(
            ds,
            methods,
            plan,
            knn_k=knn_k,
            baseline=names.index(baseline_name),
            do_standardize=do_standardize,
            jobs=args.jobs,
        )
    except Exception as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    title = top.get("title", f"experiment: {Path(top['dataset']).stem}")
    out_dir = Path(args.output or top.get("output", "report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(format_report(report, title))
    (out_dir / "report.tsv").write_text(report_to_tsv(report))
    print(format_report(report, title), end="")
    if args.verbose:
        per_method = report.selection_seconds.sum(axis=0)
        for name, secs in zip(report.method_names, per_method):
            print(f"kernel selection time {name}: {secs:.3f}s")
    print(f"wrote {out_dir / 'report.txt'} and {out_dir / 'report.tsv'}")
    return EXIT_OK


def _cmd_align(args) -> int:
    top, _ = _read_config(args.config)
    ds = _load_dataset(top)
    if _parse_bool(top.get("standardize", "true"), "standardize"):
        ds = fit_standardizer(ds).apply(ds)
    from .kernels import ScaledRbf  # local import keeps module top uncluttered

    sigmas = _sigma_list(top)
    bank = build_bank([ScaledRbf(s) for s in sigmas], ds)
    target = ideal_kernel(ds.labels, ds.class_count)
    method = top.get("align_method", "qp")
    if method not in ("qp", "lp"):
        raise ConfigError(f"align_method must be 'qp' or 'lp', got {method!r}")
    try:
        solution = (align_qp if method == "qp" else align_lp)(bank, target)
    except Exception as exc:
        print(f"alignment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"method {solution.method}")
    print(f"achieved_alignment {solution.achieved_alignment!r}")
    print(f"solver_residual {solution.solver_residual!r}")
    support = np.nonzero(solution.weights)[0]
    print(f"support {len(support)} of {bank.size}")
    for i in support:
        print(f"weight sigma={sigmas[i]!r}: {float(solution.weights[i])!r}")
    if args.output:
        doc = {
            "method": solution.method,
            "achieved_alignment": solution.achieved_alignment,
            "solver_residual": solution.solver_residual,
            "sigmas": list(sigmas),
            "weights": solution.weights.tolist(),
        }
        _write_json(Path(args.output), doc)
        print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    top, method_entries = _read_config(args.config)
    if len(method_entries) != 1:
        raise ConfigError("sweep expects exactly one [method] block")
    ds = _load_dataset(top)
    method = build_method_config(method_entries[0])
    seed = _seed(top, args.seed)
    try:
        plan = SplitPlan(
            seed=seed,
            train_size=int(top.get("train_size", str(ds.n // 2))),
            repetitions=int(top.get("repetitions", "10")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sigmas = _sigma_list(top)
    do_standardize = _parse_bool(top.get("standardize", "true"), "standardize")
    try:
        rows = base_kernel_sweep(ds, method, sigmas, plan, do_standardize=do_standardize)
    except Exception as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = format_sweep(rows)
    out = Path(args.output or top.get("output", "sweep.tsv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(text, end="")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kmetric",
        description="Mahalanobis distance learning with kernelization and a kNN harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for repetitions")
        p.add_argument("--output", default=None, help="output file or directory")
        p.add_argument("--verbose", action="store_true")

    for name, func in (
        ("fit", _cmd_fit),
        ("experiment", _cmd_experiment),
        ("align", _cmd_align),
        ("sweep", _cmd_sweep),
    ):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=func)

    p_eval = sub.add_parser("evaluate")
    p_eval.add_argument("--model", required=True, help="pipeline artifact from 'fit'")
    p_eval.add_argument("--data", required=True, help="test dataset CSV")
    p_eval.add_argument("--label-column", default=None, help="label column of the test CSV")
    p_eval.add_argument("--predictions", default=None, help="optional per-point predictions file")
    p_eval.add_argument("--verbose", action="store_true")
    p_eval.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
