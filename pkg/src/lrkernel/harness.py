"""Grid validation, ablations, split audits, and result reporting.

Every run produces one results row. Tables are computed from rows only, so any
report can be regenerated from the results CSV.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .filters import BANDWIDTH_KERNELS, GAMMA_GRID, KERNELS, KernelSpec, kernel_kind, kernel_matrix
from .model import HIDDEN_GRID, ForwardContext, model_kind
from .representation import build_representation, repr_kind
from .spectral import SpectralSystem, decompose, load_cache, save_cache, truncate
from .splits import DEFAULT_SEEDS, SplitError, SplitSet, generate_splits, make_public, make_sparse
from .training import LR_GRID, WD_GRID, RunResult, TrainConfig, train_run

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("dataset", "model", "repr", "kernel", "gamma", "trunc", "beta", "lr", "wd",
                  "seed", "val_acc", "test_acc", "best_epoch", "wall_ms", "hidden", "split")
POINT_FIELDS = ("repr", "kernel", "gamma", "trunc", "beta", "lr", "wd", "hidden")
TRUNC_GRID = tuple(round(0.05 * i, 2) for i in range(20))
PROBE_LR, PROBE_WD = 1e-3, 0.0


@dataclass(frozen=True)
class GridPoint:
    repr: str | None = None
    kernel: str | None = None
    gamma: float | None = None
    trunc: float | None = None
    beta: float | None = None
    lr: float = 1e-2
    wd: float = 0.0
    hidden: int | None = None


@dataclass
class ExperimentPlan:
    dataset: str
    model: str
    reprs: tuple = ("adjacency",)
    kernels: tuple = ("identity",)
    gammas: tuple = GAMMA_GRID
    truncs: tuple = (0.0,)
    betas: tuple = (0.0,)
    lrs: tuple = LR_GRID
    wds: tuple = WD_GRID
    hiddens: tuple = HIDDEN_GRID
    split: str = "balanced"
    seeds: tuple = DEFAULT_SEEDS
    epochs: int = 1000

    def __post_init__(self):
        self.model = model_kind(self.model)
        self.reprs = tuple(repr_kind(r) for r in self.reprs)
        self.kernels = tuple(kernel_kind(k) for k in self.kernels)
        for name in ("reprs", "kernels", "gammas", "truncs", "betas", "lrs", "wds", "hiddens", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"grid {name} is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")

    def grid(self) -> list[GridPoint]:
        """Grid points in enumeration order; validation ties resolve to the earliest."""
        m = self.model
        if m == "linear":
            return [GridPoint(lr=lr, wd=wd) for lr, wd in itertools.product(self.lrs, self.wds)]
        if m == "mlp2":
            return [GridPoint(lr=lr, wd=wd, hidden=h)
                    for h, lr, wd in itertools.product(self.hiddens, self.lrs, self.wds)]
        if m == "prop_linear":
            return [GridPoint(repr=r, lr=lr, wd=wd)
                    for r, lr, wd in itertools.product(self.reprs, self.lrs, self.wds)]
        truncs = (0.0,) if m == "kernel" else self.truncs
        points = []
        for r, k, t, b in itertools.product(self.reprs, self.kernels, truncs, self.betas):
            gammas = self.gammas if k in BANDWIDTH_KERNELS else (None,)
            for g, lr, wd in itertools.product(gammas, self.lrs, self.wds):
                points.append(GridPoint(repr=r, kernel=k, gamma=g, trunc=t, beta=b, lr=lr, wd=wd))
        return points


class SpectralCache:
    """Shares decompositions (per dataset and representation) across grid points."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._full: dict = {}
        self._contexts: dict = {}

    def system(self, ds: Dataset, kind: str, factor: float = 0.0) -> SpectralSystem:
        key = (ds.name, kind)
        if key not in self._full:
            path = self.directory / f"{ds.name}-{kind}.spec" if self.directory else None
            if path is not None and path.exists():
                self._full[key] = load_cache(path, source_kind=kind)
            else:
                t0 = time.perf_counter()
                self._full[key] = decompose(build_representation(ds, kind))
                log.info("decomposed %s/%s in %.1fs", ds.name, kind, time.perf_counter() - t0)
                if path is not None:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    save_cache(self._full[key], path)
        return truncate(self._full[key], factor)

    def context(self, ds: Dataset, model: str, point: GridPoint, X: np.ndarray) -> ForwardContext:
        key = (ds.name, model, point.repr, point.kernel, point.gamma, point.trunc, point.beta)
        ctx = self._contexts.get(key)
        if ctx is None:
            if model in ("linear", "mlp2"):
                ctx = ForwardContext(X=X)
            elif model == "prop_linear":
                ctx = ForwardContext(X=X, P=build_representation(ds, point.repr).values)
            else:
                sys = self.system(ds, point.repr, point.trunc or 0.0)
                K = kernel_matrix(KernelSpec(point.kernel, point.gamma), sys.values)
                ctx = ForwardContext(X=X, system=sys, kernel=K, beta=point.beta or 0.0)
            self._contexts[key] = ctx
        return ctx


def row_normalize(X: np.ndarray) -> np.ndarray:
    s = np.abs(X).sum(axis=1, keepdims=True)
    return np.divide(X, s, out=X.copy(), where=s > 0)


@dataclass
class Harness:
    """Bundles the shared state of one experiment session."""

    cache: SpectralCache = field(default_factory=SpectralCache)
    runner: object = train_run
    normalize_features: bool = False
    manifest: list = field(default_factory=list)

    def features(self, ds: Dataset) -> np.ndarray:
        return row_normalize(ds.features) if self.normalize_features else ds.features

    def run_point(self, ds: Dataset, model: str, point: GridPoint, splits: list[SplitSet],
                  epochs: int) -> list[dict]:
        ctx = self.cache.context(ds, model, point, self.features(ds))
        rows = []
        for split in splits:
            cfg = TrainConfig(lr=point.lr, weight_decay=point.wd, epochs=epochs, seed=split.seed)
            t0 = time.perf_counter()
            res: RunResult = self.runner(model, ctx, ds.labels, split, cfg,
                                         num_classes=ds.C, hidden=point.hidden or 64)
            wall_ms = int(round(1000 * (time.perf_counter() - t0)))
            rows.append(make_row(ds.name, model, point, split, res, wall_ms))
            self.manifest.append({"dataset": ds.name, "model": model, "point": asdict(point),
                                  "split": split.kind, "seed": split.seed, "wall_ms": wall_ms})
        return rows

    def run_plan(self, plan: ExperimentPlan, ds: Dataset, splits=None) -> list[dict]:
        if splits is None:
            splits = generate_splits(ds, plan.split, plan.seeds)
        rows = []
        for point in plan.grid():
            rows.extend(self.run_point(ds, plan.model, point, splits, plan.epochs))
        return rows


def make_row(dataset, model, point: GridPoint, split: SplitSet, res: RunResult, wall_ms) -> dict:
    return {
        "dataset": dataset, "model": model, "repr": point.repr, "kernel": point.kernel,
        "gamma": point.gamma, "trunc": point.trunc, "beta": point.beta, "lr": point.lr,
        "wd": point.wd, "seed": split.seed, "val_acc": res.val_accuracy,
        "test_acc": res.test_accuracy, "best_epoch": res.best_epoch, "wall_ms": wall_ms,
        "hidden": point.hidden, "split": split.kind,
    }


def point_of(row: dict) -> GridPoint:
    return GridPoint(**{k: row[k] for k in POINT_FIELDS})


@dataclass
class AggregateResult:
    key: tuple
    point: GridPoint
    mean_test: float
    std_test: float
    mean_val: float
    seeds: int
    selected: bool = False


def _mean_std(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=np.float64)
    std = float(np.std(xs, ddof=1)) if xs.size > 1 else float("nan")
    return float(np.mean(xs)), std


def select_point(val_by_point: dict) -> GridPoint:
    """Highest mean validation accuracy; ties go to the earliest point.

    Takes validation accuracies only; test accuracies never reach this function.
    """
    best, best_mean = None, -math.inf
    for point, vals in val_by_point.items():
        m = float(np.mean(vals)) if len(vals) and not np.all(np.isnan(vals)) else -math.inf
        if best is None or m > best_mean:
            best, best_mean = point, m
    return best


def aggregate_rows(rows: list[dict], group_by=("dataset", "model")) -> list[AggregateResult]:
    """Validate within each group and report the winner's mean/std test accuracy."""
    groups: dict = {}
    for row in rows:
        key = tuple(row[k] for k in group_by)
        groups.setdefault(key, {}).setdefault(point_of(row), []).append(row)
    out = []
    for key, by_point in groups.items():
        chosen = select_point({p: [r["val_acc"] for r in rs] for p, rs in by_point.items()})
        rs = by_point[chosen]
        mean, std = _mean_std([r["test_acc"] for r in rs])
        vals = [r["val_acc"] for r in rs]
        mean_val = float(np.mean(vals)) if not np.all(np.isnan(vals)) else float("nan")
        out.append(AggregateResult(key=key, point=chosen, mean_test=mean, std_test=std,
                                   mean_val=mean_val, seeds=len(rs)))
    return out


def mark_selected(results: list[AggregateResult], within=(0,)) -> list[AggregateResult]:
    """Flag the best-validation entry among results sharing the key positions ``within``."""
    buckets: dict = {}
    for r in results:
        buckets.setdefault(tuple(r.key[i] for i in within), []).append(r)
    for bucket in buckets.values():
        best = max(bucket, key=lambda r: -math.inf if math.isnan(r.mean_val) else r.mean_val)
        best.selected = True
    return results


def run_validation(plan: ExperimentPlan, ds: Dataset, harness: Harness | None = None,
                   splits=None) -> tuple[AggregateResult, list[dict]]:
    harness = harness or Harness()
    rows = harness.run_plan(plan, ds, splits)
    return aggregate_rows(rows)[0], rows


def ablate_kernel(plan: ExperimentPlan, ds: Dataset, harness: Harness | None = None,
                  kernels=KERNELS):
    """Full-rank kernel model validated separately for each kernel."""
    harness = harness or Harness()
    plan = replace(plan, model="kernel", kernels=tuple(kernels))
    rows = harness.run_plan(plan, ds)
    return kernel_table(rows), rows


def kernel_table(rows):
    table = aggregate_rows(rows, group_by=("dataset", "model", "kernel"))
    return mark_selected(table, within=(0, 1))


def ablate_representation(plan: ExperimentPlan, ds: Dataset, harness: Harness | None = None,
                          reprs=("adjacency", "laplacian")):
    """Signed accuracy difference between two representations, best kernel for each."""
    harness = harness or Harness()
    plan = replace(plan, model="kernel", reprs=tuple(reprs))
    rows = harness.run_plan(plan, ds)
    return representation_table(rows, reprs), rows


def representation_table(rows, reprs=("adjacency", "laplacian")) -> dict:
    reprs = tuple(repr_kind(r) for r in reprs)
    per = {}
    for r in aggregate_rows(rows, group_by=("dataset", "repr")):
        per.setdefault(r.key[0], {})[r.key[1]] = r.mean_test
    return {d: v[reprs[0]] - v[reprs[1]] for d, v in per.items() if reprs[0] in v and reprs[1] in v}


def ablate_truncation(plan: ExperimentPlan, ds: Dataset, harness: Harness | None = None,
                      factors=TRUNC_GRID):
    """Validated LR-kernel accuracy at each truncation factor, relative to full rank."""
    harness = harness or Harness()
    if 0.0 not in factors:
        factors = (0.0, *factors)
    plan = replace(plan, model="lr_kernel", truncs=tuple(factors))
    rows = harness.run_plan(plan, ds)
    return truncation_table(rows), rows


def truncation_table(rows) -> dict:
    per = {}
    for r in aggregate_rows(rows, group_by=("dataset", "trunc")):
        per.setdefault(r.key[0], {})[r.key[1]] = r.mean_test
    out = {}
    for d, curve in per.items():
        base = curve.get(0.0)
        out[d] = {f: (acc / base if base else float("nan")) for f, acc in sorted(curve.items())}
    return out


def audit_conventions(ds: Dataset) -> list[str]:
    kinds = []
    for kind, fn in (("sparse", lambda: make_sparse(ds, 0)), ("public", lambda: make_public(ds))):
        try:
            fn()
            kinds.append(kind)
        except SplitError:
            pass
    return kinds + ["dense", "balanced"]


def audit_splits(datasets: list[Dataset], probes=("linear", "prop_linear"),
                 harness: Harness | None = None, seeds=DEFAULT_SEEDS, epochs: int = 1000,
                 conventions=None):
    """Fixed-hyperparameter probes XW and AXW under every applicable split convention."""
    harness = harness or Harness()
    rows = []
    for ds in datasets:
        for kind in conventions or audit_conventions(ds):
            single = kind in ("sparse", "public")
            splits = generate_splits(ds, kind, (0,) if single else seeds)
            for probe in probes:
                point = GridPoint(repr="adjacency" if probe == "prop_linear" else None,
                                  lr=PROBE_LR, wd=PROBE_WD)
                rows.extend(harness.run_point(ds, probe, point, splits, epochs))
    return audit_table(rows), rows


def audit_table(rows) -> list[dict]:
    table = []
    for r in aggregate_rows(rows, group_by=("dataset", "split", "model")):
        table.append({"dataset": r.key[0], "split": r.key[1], "probe": r.key[2],
                      "mean": r.mean_test, "std": None if r.seeds < 2 else r.std_test,
                      "seeds": r.seeds, "mean_val": r.mean_val})
    best = {}
    for t in table:
        if math.isnan(t["mean_val"]):
            continue
        k = (t["dataset"], t["split"])
        if k not in best or t["mean_val"] > best[k]["mean_val"]:
            best[k] = t
    for t in table:
        t["best"] = best.get((t["dataset"], t["split"])) is t
    return table


# --- results files -------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in RESULT_COLUMNS])
    return buf.getvalue()


def write_results(rows: list[dict], path, append: bool = False) -> None:
    path = Path(path)
    text = rows_to_csv(rows)
    if append and path.exists() and path.stat().st_size:
        text = text.split("\n", 1)[1]
        with open(path, "a") as f:
            f.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


_FLOAT_COLS = {"gamma", "trunc", "beta", "lr", "wd", "val_acc", "test_acc"}
_INT_COLS = {"seed", "best_epoch", "wall_ms", "hidden"}


def _parse(col, s):
    if s == "":
        return None
    if col in _FLOAT_COLS:
        return float(s)
    if col in _INT_COLS:
        return int(s)
    return s


def read_results(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [{c: _parse(c, row.get(c, "")) for c in RESULT_COLUMNS} for row in reader]


def format_cell(mean: float, std: float | None) -> str:
    """Percent with one decimal and std in tenths of a percent, e.g. ``79.0(14)``."""
    text = f"{100 * mean:.1f}"
    if std is not None and not math.isnan(std):
        text += f"({int(round(1000 * std))})"
    return text


REPORT_FOOTER = ("Cells are mean test accuracy (%) with the sample standard deviation "
                 "(n-1 denominator) in units of 0.1%. Published baselines sometimes quote "
                 "95% confidence intervals instead; these values are standard deviations.")


def emit_report(rows: list[dict], fmt: str, path=None, group_by=("dataset", "model")) -> str:
    """Render validated aggregates as CSV (raw floats) or a markdown table."""
    results = aggregate_rows(rows, group_by=group_by)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*group_by, *POINT_FIELDS, "mean_test", "std_test", "mean_val", "seeds"])
        for r in results:
            w.writerow([*map(_cell, r.key), *(_cell(getattr(r.point, f)) for f in POINT_FIELDS),
                        _cell(r.mean_test), _cell(r.std_test), _cell(r.mean_val), r.seeds])
        text = buf.getvalue()
    elif fmt == "markdown":
        text = _markdown(results, group_by)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def _markdown(results, group_by) -> str:
    # first group key becomes the column, the rest label the rows
    cols = list(dict.fromkeys(str(r.key[0]) for r in results))
    row_keys = list(dict.fromkeys(" / ".join(map(str, r.key[1:])) for r in results))
    cells = {(" / ".join(map(str, r.key[1:])), str(r.key[0])): format_cell(r.mean_test, r.std_test)
             for r in results}
    head = " / ".join(group_by[1:]) or "row"
    lines = ["| " + " | ".join([head, *cols]) + " |",
             "|" + "---|" * (len(cols) + 1)]
    for rk in row_keys:
        lines.append("| " + " | ".join([rk, *(cells.get((rk, c), "") for c in cols)]) + " |")
    lines += ["", REPORT_FOOTER, ""]
    return "\n".join(lines)


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=10, cwd=Path(__file__).parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_manifest(harness: Harness, path, plan=None) -> None:
    doc = {"git": git_describe(), "plan": _jsonable(plan), "runs": harness.manifest}
    Path(path).write_text(json.dumps(doc, indent=1, default=str) + "\n")


def _jsonable(plan):
    if plan is None:
        return None
    return asdict(plan) if hasattr(plan, "__dataclass_fields__") else plan
