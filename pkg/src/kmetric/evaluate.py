"""kNN evaluation harness: pipelines, cross-validation, repeated-split runs.

A pipeline is (optional KPCA embedding) -> (learned linear map or metric)
-> kNN on the transformed coordinates.  Kernel choice is part of the method
name: ``<learner>:linear`` skips the embedding, ``<learner>:kpca:cv`` picks
the kernel by cross-validation, ``kpca:aligned-qp`` / ``kpca:aligned-lp``
build it by alignment, and ``kpca:unweighted`` sums the whole base-kernel
bank.  With an unweighted kernel the embedding distance is uninformative,
so target neighbors for LMNN/DNE are then chosen by input-space Euclidean
distance; every other kernelization picks neighbors in the embedding, where
coordinate distances equal feature-space distances.

Everything downstream of a (dataset, seed) pair is deterministic.  Fit-time
statistics (standardization, KPCA, neighbor graphs) only ever see training
rows.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .align import align_lp, align_qp, build_bank, unweighted_sum
from .data import Dataset, SplitPlan, fit_standardizer, split
from .dne import dne_fit
from .kernels import (
    KernelSpec,
    ScaledRbf,
    WeightedSum,
    format_kernel_spec,
    ideal_kernel,
)
from .kpca import DegenerateKernelError, KpcaModel, kpca_fit, kpca_transform
from .lmnn import LmnnConfig, lmnn_fit
from .maps import LinearMap, Metric, as_linear_map
from .nca import GradientDescentConfig, nca_fit
from .neighbors import build_neighbor_graph

__all__ = [
    "SIGMA_GRID",
    "LEARNERS",
    "KERNELIZATIONS",
    "MethodConfig",
    "FittedPipeline",
    "ExperimentReport",
    "SweepRow",
    "fit_pipeline",
    "fit_pipeline_with_spec",
    "knn_predict",
    "accuracy",
    "cross_validate_kernel",
    "run_experiment",
    "base_kernel_sweep",
    "format_report",
    "report_to_tsv",
    "format_sweep",
]

# the scaled-RBF bandwidth grid used as the default base-kernel bank
SIGMA_GRID = (
    0.01, 0.025, 0.05, 0.075, 0.1, 0.25, 0.5, 0.75, 1.0, 2.5, 5.0,
    7.5, 10.0, 25.0, 50.0, 75.0, 100.0, 250.0, 500.0, 750.0, 1000.0,
)

LEARNERS = ("nca", "lmnn", "dne")
KERNELIZATIONS = ("linear", "kpca:cv", "kpca:aligned-qp", "kpca:aligned-lp", "kpca:unweighted")


@dataclass(frozen=True)
class MethodConfig:
    """One pipeline recipe: learner, kernel strategy, and hyperparameters."""

    learner: str
    kernelization: str
    neighbor_k: int = 3
    lmnn_c: float = 1.0
    out_dim: Union[int, str] = "full"  # projection dim for nca/dne: int, "full", "half"
    sigmas: tuple = SIGMA_GRID
    cv_kernels: Optional[tuple] = None  # candidate KernelSpecs for kpca:cv; default RBF grid
    cv_folds: int = 5
    max_dim: Optional[int] = None  # cap on retained KPCA dimensions
    nca_opt: GradientDescentConfig = field(default_factory=GradientDescentConfig)
    lmnn_opt: LmnnConfig = field(default_factory=LmnnConfig)

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; expected one of {LEARNERS}")
        if self.kernelization not in KERNELIZATIONS:
            raise ValueError(
                f"unknown kernelization {self.kernelization!r}; expected one of {KERNELIZATIONS}"
            )
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if isinstance(self.out_dim, str) and self.out_dim not in ("full", "half"):
            raise ValueError("out_dim must be an integer, 'full', or 'half'")

    @property
    def name(self) -> str:
        return f"{self.learner}:{self.kernelization}"

    def resolve_out_dim(self, input_dim: int) -> int:
        if self.out_dim == "full":
            return input_dim
        if self.out_dim == "half":
            return max(1, (input_dim + 1) // 2)
        return max(1, min(int(self.out_dim), input_dim))


@dataclass(frozen=True)
class FittedPipeline:
    """A trained method: embedding, transformation, and bookkeeping."""

    method: MethodConfig
    kernel_model: Optional[KpcaModel]  # None when the learner ran on raw features
    transform: Union[LinearMap, Metric]
    neighbor_rule: Optional[str]  # "embedding" | "input-space" | None (no graph)
    selected_kernel: Optional[KernelSpec]
    selection_seconds: float
    in_dim: int  # dimensionality the transform consumes

    def __post_init__(self):
        expect = self.kernel_model.rank if self.kernel_model is not None else self.in_dim
        got = as_linear_map(self.transform).a.shape[1]
        if got != expect:
            raise ValueError(f"transform consumes {got} dims but the embedding yields {expect}")

    def embed(self, points: Dataset) -> np.ndarray:
        if self.kernel_model is None:
            if points.dim != self.in_dim:
                raise ValueError(f"expected {self.in_dim}-dimensional points, got {points.dim}")
            return points.features
        return kpca_transform(self.kernel_model, points)

    def project(self, points: Dataset) -> np.ndarray:
        return as_linear_map(self.transform).apply(self.embed(points))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _fit_learner(
    method: MethodConfig,
    coords: np.ndarray,
    labels: np.ndarray,
    neighbor_points: Optional[np.ndarray],
) -> tuple[Union[LinearMap, Metric], Optional[str]]:
    if method.learner == "nca":
        d = method.resolve_out_dim(coords.shape[1])
        return nca_fit(coords, labels, d, opt=method.nca_opt), None
    graph_source = coords if neighbor_points is None else neighbor_points
    rule = "embedding" if neighbor_points is None else "input-space"
    if method.learner == "lmnn":
        graph = build_neighbor_graph(graph_source, labels, method.neighbor_k, "lmnn")
        return lmnn_fit(coords, labels, graph, c=method.lmnn_c, opt=method.lmnn_opt), rule
    graph = build_neighbor_graph(graph_source, labels, method.neighbor_k, "dne")
    d = method.resolve_out_dim(coords.shape[1])
    return dne_fit(coords, labels, graph, d), rule


def fit_pipeline_with_spec(
    method: MethodConfig,
    train: Dataset,
    spec: Optional[KernelSpec],
    *,
    input_space_neighbors: bool = False,
    selection_seconds: float = 0.0,
) -> FittedPipeline:
    """Fit embedding and learner for an already-chosen kernel (or none)."""
    if spec is None:
        model = None
        coords = train.features
    else:
        model = kpca_fit(spec, train, max_dim=method.max_dim)
        coords = model.train_coords
    neighbor_points = train.features if (input_space_neighbors and spec is not None) else None
    transform, rule = _fit_learner(method, coords, train.labels, neighbor_points)
    if rule is None:
        neighbor_rule = None
    elif spec is None:
        neighbor_rule = "input-space"  # raw features are the input space
    else:
        neighbor_rule = rule
    return FittedPipeline(
        method=method,
        kernel_model=model,
        transform=transform,
        neighbor_rule=neighbor_rule,
        selected_kernel=spec,
        selection_seconds=selection_seconds,
        in_dim=train.dim if model is None else model.rank,
    )


def _cv_candidates(method: MethodConfig) -> tuple:
    if method.cv_kernels is not None:
        return tuple(method.cv_kernels)
    return tuple(ScaledRbf(s) for s in method.sigmas)


def fit_pipeline(method: MethodConfig, train: Dataset, seed: int = 0) -> FittedPipeline:
    """Select the kernel per the method's strategy, then fit.

    ``selection_seconds`` on the result covers only the kernel-selection
    stage, which is what the cost comparison between strategies measures.
    """
    start = time.perf_counter()
    input_space = False
    if method.kernelization == "linear":
        spec = None
    elif method.kernelization == "kpca:cv":
        spec = cross_validate_kernel(method, train, _cv_candidates(method), method.cv_folds, seed)
    elif method.kernelization in ("kpca:aligned-qp", "kpca:aligned-lp"):
        bank = build_bank([ScaledRbf(s) for s in method.sigmas], train)
        target = ideal_kernel(train.labels, train.class_count)
        solve = align_qp if method.kernelization == "kpca:aligned-qp" else align_lp
        solution = solve(bank, target)
        terms = tuple(
            (w, s) for w, s in zip(solution.weights, bank.base_specs) if w > 0.0
        )
        spec = WeightedSum(terms)
    else:  # kpca:unweighted
        bank_specs = tuple(ScaledRbf(s) for s in method.sigmas)
        spec = WeightedSum(tuple((1.0, s) for s in bank_specs))
        input_space = True
    selection_seconds = time.perf_counter() - start
    return fit_pipeline_with_spec(
        method,
        train,
        spec,
        input_space_neighbors=input_space,
        selection_seconds=selection_seconds,
    )


# ---------------------------------------------------------------------------
# prediction and scoring
# ---------------------------------------------------------------------------


def _vote(neighbor_labels: np.ndarray, neighbor_dists: np.ndarray, class_count: int) -> int:
    counts = np.bincount(neighbor_labels, minlength=class_count)
    top = counts.max()
    tied = np.where(counts == top)[0]
    if tied.size == 1:
        return int(tied[0])
    sums = np.array([neighbor_dists[neighbor_labels == c].sum() for c in tied])
    return int(tied[np.argmin(sums)])  # argmin takes the lower class index on ties


def knn_predict(pipeline: FittedPipeline, train: Dataset, test: Dataset, k_nn: int = 1) -> np.ndarray:
    """Majority vote among the k nearest transformed training points.

    Deterministic tie handling: equal distances prefer the lower training
    index, vote ties prefer the class with the smaller summed distance and
    then the lower class index.
    """
    if train.n < 1:
        raise ValueError("empty training set")
    if not 1 <= k_nn <= train.n:
        raise ValueError(f"k_nn must be in [1, {train.n}]")
    z_train = pipeline.project(train)
    z_test = pipeline.project(test)
    tr_sq = (z_train * z_train).sum(axis=1)
    te_sq = (z_test * z_test).sum(axis=1)
    d2 = np.maximum(te_sq[:, None] + tr_sq[None, :] - 2.0 * (z_test @ z_train.T), 0.0)
    predictions = np.empty(test.n, dtype=np.int64)
    for r in range(test.n):
        order = np.argsort(d2[r], kind="stable")[:k_nn]
        predictions[r] = _vote(train.labels[order], d2[r, order], train.class_count)
    return predictions


def accuracy(predicted: np.ndarray, actual: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape or predicted.ndim != 1 or predicted.size == 0:
        raise ValueError("predictions and labels must be equal-length nonempty vectors")
    return float(np.mean(predicted == actual))


# ---------------------------------------------------------------------------
# kernel cross-validation
# ---------------------------------------------------------------------------


def _fold_indices(n: int, folds: int, labels: np.ndarray, seed, max_attempts: int = 10):
    """Random fold assignment where every training part keeps every class."""
    present = np.unique(labels)
    for attempt in range(max_attempts):
        rng = np.random.default_rng([*_seed_parts(seed), 0xF01D, attempt])
        chunks = np.array_split(rng.permutation(n), folds)
        ok = all(
            np.isin(present, labels[np.concatenate([c for j, c in enumerate(chunks) if j != f])]).all()
            for f in range(folds)
        )
        if ok:
            return chunks
    raise ValueError("could not build folds containing every class in each training part")


def _seed_parts(seed) -> tuple:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def cross_validate_kernel(
    method: MethodConfig,
    ds: Dataset,
    candidates: Sequence[KernelSpec],
    folds: int,
    seed,
) -> KernelSpec:
    """Pick the candidate kernel with the best mean fold accuracy.

    The full pipeline (embedding, learner, 1NN) runs per fold.  Ties go to
    the earlier candidate.  A candidate whose embedding degenerates scores
    minus infinity rather than aborting the selection.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if not candidates:
        raise ValueError("no candidate kernels")
    if len(candidates) == 1:
        return candidates[0]
    chunks = _fold_indices(ds.n, folds, ds.labels, seed)
    best_spec = None
    best_score = -np.inf
    for spec in candidates:
        scores = []
        try:
            for f in range(folds):
                test_idx = np.sort(chunks[f])
                train_idx = np.sort(np.concatenate([c for j, c in enumerate(chunks) if j != f]))
                fold_train = ds.subset(train_idx)
                fold_test = ds.subset(test_idx)
                pipeline = fit_pipeline_with_spec(method, fold_train, spec)
                scores.append(accuracy(knn_predict(pipeline, fold_train, fold_test, 1), fold_test.labels))
            score = float(np.mean(scores))
        except DegenerateKernelError:
            score = -np.inf
        if score > best_score:
            best_score = score
            best_spec = spec
    if best_spec is None:
        raise DegenerateKernelError("every candidate kernel degenerated in cross-validation")
    return best_spec


# ---------------------------------------------------------------------------
# repeated-split experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentReport:
    """Per-split accuracies with mean/std and win-draw-lose aggregation."""

    method_names: tuple
    per_split_accuracy: np.ndarray  # (repetitions, methods); NaN marks a failed fit
    baseline_index: int
    selection_seconds: np.ndarray  # (repetitions, methods)
    failure_counts: np.ndarray  # (methods,)

    @property
    def repetitions(self) -> int:
        return self.per_split_accuracy.shape[0]

    @property
    def mean(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(self.per_split_accuracy, axis=0)

    @property
    def std(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanstd(self.per_split_accuracy, axis=0)

    @property
    def win_draw_lose(self) -> np.ndarray:
        """Per method: (wins, draws, losses) against the baseline, compared
        after rounding to the 2 decimals reports are printed with."""
        acc = np.round(self.per_split_accuracy, 2)
        base = acc[:, self.baseline_index]
        out = np.zeros((acc.shape[1], 3), dtype=np.int64)
        for m in range(acc.shape[1]):
            valid = ~np.isnan(acc[:, m]) & ~np.isnan(base)
            out[m, 0] = int(np.sum(acc[valid, m] > base[valid]))
            out[m, 1] = int(np.sum(acc[valid, m] == base[valid]))
            out[m, 2] = int(np.sum(acc[valid, m] < base[valid]))
        return out


def _run_single_rep(args) -> tuple:
    ds, methods, plan, rep, knn_k, do_standardize = args
    train, test = split(ds, plan, rep)
    if do_standardize:
        scaler = fit_standardizer(train)
        train = scaler.apply(train)
        test = scaler.apply(test)
    accs = np.full(len(methods), np.nan)
    sel = np.zeros(len(methods))
    for m, method in enumerate(methods):
        try:
            pipeline = fit_pipeline(method, train, seed=[plan.seed, rep])
            accs[m] = accuracy(knn_predict(pipeline, train, test, knn_k), test.labels)
            sel[m] = pipeline.selection_seconds
        except Exception as exc:  # noqa: BLE001 - a failed fit must not kill the run
            warnings.warn(f"rep {rep}: method {method.name} failed: {exc}", stacklevel=2)
    return rep, accs, sel


def run_experiment(
    ds: Dataset,
    methods: Sequence[MethodConfig],
    plan: SplitPlan,
    *,
    knn_k: int = 1,
    baseline: int = 0,
    do_standardize: bool = True,
    jobs: int = 1,
) -> ExperimentReport:
    """The repeated random-split protocol over a list of methods.

    Each repetition draws its split, standardizes with training statistics
    only, fits every method, and scores kNN accuracy on the held-out part.
    Failed fits are warned about and excluded from that method's aggregate.
    Repetitions are independent; ``jobs > 1`` runs them in worker processes
    with results keyed by repetition index, so the report is identical
    either way.
    """
    methods = list(methods)
    if not methods:
        raise ValueError("no methods to run")
    if not 0 <= baseline < len(methods):
        raise ValueError("baseline index out of range")
    work = [(ds, methods, plan, rep, knn_k, do_standardize) for rep in range(plan.repetitions)]
    results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rep, accs, sel in pool.map(_run_single_rep, work):
                results[rep] = (accs, sel)
    else:
        for args in work:
            rep, accs, sel = _run_single_rep(args)
            results[rep] = (accs, sel)
    acc_matrix = np.vstack([results[rep][0] for rep in range(plan.repetitions)])
    sel_matrix = np.vstack([results[rep][1] for rep in range(plan.repetitions)])
    return ExperimentReport(
        method_names=tuple(m.name for m in methods),
        per_split_accuracy=acc_matrix,
        baseline_index=baseline,
        selection_seconds=sel_matrix,
        failure_counts=np.isnan(acc_matrix).sum(axis=0),
    )


@dataclass(frozen=True)
class SweepRow:
    prefix_length: int
    sigma_added: float
    mean_accuracy: float
    std_accuracy: float


def base_kernel_sweep(
    ds: Dataset,
    method: MethodConfig,
    sigma_order: Sequence[float],
    plan: SplitPlan,
    *,
    knn_k: int = 1,
    do_standardize: bool = True,
) -> list[SweepRow]:
    """Accuracy of the unweighted-kernel pipeline as the bank grows.

    For each prefix of ``sigma_order``, the prefix bank is summed into one
    kernel and the full protocol runs on the same split sequence, so rows
    differ only in the kernel.
    """
    if not sigma_order:
        raise ValueError("sigma_order must be non-empty")
    rows = []
    splits = []
    for rep in range(plan.repetitions):
        train, test = split(ds, plan, rep)
        if do_standardize:
            scaler = fit_standardizer(train)
            train, test = scaler.apply(train), scaler.apply(test)
        splits.append((train, test))
    for m in range(1, len(sigma_order) + 1):
        spec = WeightedSum(tuple((1.0, ScaledRbf(s)) for s in sigma_order[:m]))
        accs = []
        for train, test in splits:
            pipeline = fit_pipeline_with_spec(method, train, spec, input_space_neighbors=True)
            accs.append(accuracy(knn_predict(pipeline, train, test, knn_k), test.labels))
        rows.append(
            SweepRow(
                prefix_length=m,
                sigma_added=float(sigma_order[m - 1]),
                mean_accuracy=float(np.mean(accs)),
                std_accuracy=float(np.std(accs)),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# report emission (no wall-clock content: identical runs give identical files)
# ---------------------------------------------------------------------------


def format_report(report: ExperimentReport, title: str) -> str:
    mean, std, wdl = report.mean, report.std, report.win_draw_lose
    name_width = max(len("method"), *(len(n) for n in report.method_names))
    lines = [title, "=" * len(title), ""]
    header = f"{'method':<{name_width}}  {'accuracy':>12}  {'w/d/l':>8}  {'failures':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for m, name in enumerate(report.method_names):
        wdl_text = "baseline" if m == report.baseline_index else "/".join(str(v) for v in wdl[m])
        lines.append(
            f"{name:<{name_width}}  {mean[m]:.2f} ± {std[m]:.2f}  {wdl_text:>8}  {int(report.failure_counts[m]):>8}"
        )
    lines.append("")
    lines.append("per-split accuracy:")
    for rep in range(report.repetitions):
        cells = "\t".join(repr(float(v)) for v in report.per_split_accuracy[rep])
        lines.append(f"rep {rep}\t{cells}")
    return "\n".join(lines) + "\n"


def report_to_tsv(report: ExperimentReport) -> str:
    lines = ["method\tmean\tstd\twin\tdraw\tlose\tfailures"]
    mean, std, wdl = report.mean, report.std, report.win_draw_lose
    for m, name in enumerate(report.method_names):
        lines.append(
            f"{name}\t{mean[m]!r}\t{std[m]!r}\t{wdl[m, 0]}\t{wdl[m, 1]}\t{wdl[m, 2]}\t{int(report.failure_counts[m])}"
        )
    return "\n".join(lines) + "\n"


def format_sweep(rows: Sequence[SweepRow]) -> str:
    lines = ["kernels\tsigma_added\tmean_accuracy\tstd_accuracy"]
    for row in rows:
        lines.append(
            f"{row.prefix_length}\t{row.sigma_added!r}\t{row.mean_accuracy!r}\t{row.std_accuracy!r}"
        )
    return "\n".join(lines) + "\n"
