"""Experiment runners behind the CLI.

This module provides:
- ``ExperimentReport``: parameter grid, per-cell rows with seeds, summaries
  and extra tables, written as a JSON manifest plus CSV files
- Classical multidimensional scaling of distance matrices
- Runners for the geometry, sample-efficiency, sensitivity, discovery
  evaluation and metric comparison experiments

Cells of a grid run concurrently; rows are assembled in sorted key order, so
reports do not depend on scheduling.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from . import settings
from .analytic import LinearGaussianView, analytic_id, analytic_od
from .distances import DistanceConfig, estimate
from .errors import CausalDistanceError, ModelError
from .generators import random_scm
from .graph import markov_equivalence_class, topological_order
from .graph_metrics import shd, sid
from .model_io.datasets import read_dataset
from .model_io.fitting import fit_mle_and_orient
from .model_io.graphs import read_graph_output
from .scm import SampleMatrix, Scm, derive_seed, perturb_mechanism, sample, seed_echo

logger = logging.getLogger(__name__)

Progress = Optional[Callable[[], None]]
CellKey = Tuple[Any, ...]

DISTANCE_KINDS = ("od", "id", "cd")
MDS_TOL = 1e-10


@dataclass
class ExperimentReport:
    """Results of one experiment run.

    Rows are only ever appended; each row carries the seed it was computed
    with.
    """

    name: str
    parameters: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    elapsed: float = 0.0

    def add_row(self, row: Dict[str, Any]) -> None:
        if "seed" not in row:
            raise ModelError("every report row must record its seed")
        self.rows.append(dict(row))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def save(self, out_dir: Union[str, Path]) -> Path:
        """Write ``<name>.csv``, one CSV per extra table and ``<name>.json``.

        Returns:
            Path of the JSON manifest.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"rows": f"{self.name}.csv"}
        self.to_frame().to_csv(out / files["rows"], index=False)
        for table_name, frame in self.tables.items():
            files[table_name] = f"{self.name}_{table_name}.csv"
            frame.to_csv(out / files[table_name])
        manifest = {
            "experiment": self.name,
            "parameters": self.parameters,
            "summary": self.summary,
            "files": files,
            "elapsed_seconds": self.elapsed,
            "rows": self.rows,
        }
        path = out / f"{self.name}.json"
        with open(path, "w") as f:
            json.dump(manifest, f, indent=2, default=_json_default)
        logger.info(f"Saved {self.name} report to {path}")
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def run_cells(
    cells: Mapping[CellKey, Callable[[], Any]], progress: Progress = None
) -> Dict[CellKey, Any]:
    """Run independent cells on the shared worker pool, keyed results sorted."""
    workers = settings.worker_count()
    results: Dict[CellKey, Any] = {}
    if workers == 1:
        for key in sorted(cells):
            results[key] = cells[key]()
            if progress:
                progress()
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {key: pool.submit(fn) for key, fn in cells.items()}
        for key in sorted(futures):
            results[key] = futures[key].result()
            if progress:
                progress()
    return results


def _cell_config(cfg: DistanceConfig, seed: int) -> DistanceConfig:
    """Per-cell estimator config; estimators run single-threaded inside a grid."""
    threads = 1 if settings.worker_count() > 1 else cfg.threads
    return replace(cfg, seed=seed, threads=threads)


def _cell_seed(seed: int, *key: int) -> int:
    return int(derive_seed(seed, *key).generate_state(1)[0])


def classical_mds(matrix: np.ndarray, dims: int = 2) -> np.ndarray:
    """Coordinates whose pairwise distances approximate ``matrix``.

    The matrix is symmetrized, squared and double-centred; negative and
    round-off eigenvalues are clamped to zero.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ModelError(f"need a square distance matrix, got shape {m.shape}")
    n = m.shape[0]
    sym = (m + m.T) / 2
    centring = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centring @ (sym**2) @ centring
    vals, vecs = np.linalg.eigh((gram + gram.T) / 2)
    order = np.argsort(vals)[::-1][:dims]
    vals = vals[order]
    vals = np.where(vals > MDS_TOL * max(float(vals.max(initial=0.0)), 1.0), vals, 0.0)
    coords = vecs[:, order] * np.sqrt(vals)
    if coords.shape[1] < dims:
        coords = np.hstack([coords, np.zeros((n, dims - coords.shape[1]))])
    return coords


def is_linear_gaussian(m: Scm) -> bool:
    try:
        LinearGaussianView.from_scm(m)
    except CausalDistanceError:
        return False
    return True


def run_geometry(
    models: Sequence[Tuple[str, Scm]],
    cfg: DistanceConfig,
    metrics: Sequence[str] = ("sid", "od", "id"),
    analytic: bool = True,
    progress: Progress = None,
) -> ExperimentReport:
    """Pairwise distance matrices of a model set and their 2-D embeddings.

    Entry ``[i, j]`` compares model ``i`` (as reference) with model ``j``. OD
    and ID use the closed-form values when ``analytic`` is set and every
    model is linear-Gaussian, the sampling estimators otherwise.
    """
    started = time.perf_counter()
    names = [name for name, _ in models]
    use_analytic = analytic and all(is_linear_gaussian(m) for _, m in models)
    report = ExperimentReport(
        "geometry",
        {
            "models": names,
            "metrics": list(metrics),
            "analytic": use_analytic,
            "config": cfg.to_dict(),
        },
    )

    def cell(metric: str, i: int, j: int) -> float:
        a, b = models[i][1], models[j][1]
        if metric == "sid":
            return float(sid(a.graph, b.graph))
        if metric == "shd":
            return float(shd(a.graph, b.graph))
        if use_analytic and metric == "od":
            return analytic_od(a, b)
        if use_analytic and metric == "id":
            return analytic_id(
                a,
                b,
                mu=cfg.mu,
                normalization=cfg.normalization,
                value_scale=cfg.value_scale,
            )
        return estimate(metric, a, b, _cell_config(cfg, cfg.seed)).value

    for metric in metrics:
        if metric not in ("sid", "shd", "od", "id", "cd"):
            raise ModelError(f"unknown geometry metric '{metric}'")
    cells: Dict[CellKey, Callable[[], float]] = {
        (metric, i, j): (lambda metric=metric, i=i, j=j: cell(metric, i, j))
        for metric in metrics
        for i in range(len(models))
        for j in range(len(models))
    }
    results = run_cells(cells, progress)
    for (metric, i, j), value in results.items():
        report.add_row(
            {
                "metric": metric,
                "row": names[i],
                "column": names[j],
                "value": value,
                "seed": cfg.seed,
            }
        )
    for metric in metrics:
        matrix = np.array(
            [
                [results[(metric, i, j)] for j in range(len(models))]
                for i in range(len(models))
            ]
        )
        report.tables[f"{metric}_matrix"] = pd.DataFrame(
            matrix, index=names, columns=names
        )
        coords = classical_mds(matrix)
        report.tables[f"{metric}_embedding"] = pd.DataFrame(
            coords, index=names, columns=["x", "y"]
        )
        report.summary[f"{metric}_distinct_points"] = distinct_rows(coords)
    report.elapsed = time.perf_counter() - started
    return report


def distinct_rows(matrix: np.ndarray, tol: float = 1e-9) -> int:
    """Number of rows that differ from every earlier row by more than ``tol``."""
    reps: List[np.ndarray] = []
    for row in np.atleast_2d(matrix):
        if not any(np.max(np.abs(row - r)) <= tol for r in reps):
            reps.append(row)
    return len(reps)


def run_sample_efficiency(
    ks: Sequence[int],
    repeats: int,
    cfg: DistanceConfig,
    d: int = 6,
    expected_degree: float = 3.0,
    parametrization: str = "linGauss",
    kinds: Sequence[str] = DISTANCE_KINDS,
    seed: int = 0,
    progress: Progress = None,
) -> ExperimentReport:
    """Self-distance of random models as a function of the sample count ``k``.

    Both sample sets of a cell use independent seeds, so the values measure
    the estimator's finite-sample floor.
    """
    started = time.perf_counter()
    report = ExperimentReport(
        "sample_efficiency",
        {
            "k": list(ks),
            "repeats": repeats,
            "d": d,
            "expected_degree": expected_degree,
            "parametrization": parametrization,
            "kinds": list(kinds),
            "seed": seed,
            "config": cfg.to_dict(),
        },
    )
    models = {
        r: random_scm(parametrization, d, expected_degree, derive_seed(seed, r))
        for r in range(repeats)
    }
    cells: Dict[CellKey, Callable[[], float]] = {}
    for ki, k in enumerate(ks):
        for r in range(repeats):
            cell_seed = _cell_seed(seed, ki, r)
            cell_cfg = replace(_cell_config(cfg, cell_seed), k=int(k), paired=False)
            for kind in kinds:
                cells[(ki, r, kind)] = (
                    lambda kind=kind, m=models[r], c=cell_cfg: estimate(
                        kind, m, m, c
                    ).value
                )
    results = run_cells(cells, progress)
    for ki, k in enumerate(ks):
        for r in range(repeats):
            row: Dict[str, Any] = {
                "k": int(k),
                "repeat": r,
                "seed": _cell_seed(seed, ki, r),
            }
            row.update({kind: results[(ki, r, kind)] for kind in kinds})
            report.add_row(row)
    frame = report.to_frame()
    summary = frame.groupby("k")[list(kinds)].agg(["mean", "std", "median"])
    summary.columns = [f"{kind}_{stat}" for kind, stat in summary.columns]
    report.tables["summary"] = summary
    report.elapsed = time.perf_counter() - started
    return report


def default_perturbed_node(m: Scm) -> int:
    """Last node in topological order among those with the most parents."""
    order = topological_order(m.graph)
    most = max(len(m.graph.parents(v)) for v in order)
    return [v for v in order if len(m.graph.parents(v)) == most][-1]


def _spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    if len(set(x)) < 2 or len(set(y)) < 2:
        return None
    rho = stats.spearmanr(x, y).correlation
    return None if np.isnan(rho) else float(rho)


def run_sensitivity_mix(
    m: Scm,
    epsilons: Sequence[float],
    cfg: DistanceConfig,
    node: Optional[int] = None,
    kinds: Sequence[str] = DISTANCE_KINDS,
    seed: int = 0,
    progress: Progress = None,
) -> ExperimentReport:
    """Distances between ``m`` and ``m`` with one mechanism mixed by ``epsilon``.

    The replacement mechanism is drawn once, so the perturbed models form a
    path from ``m`` (``epsilon = 0``) to the fully replaced model.
    """
    started = time.perf_counter()
    target = default_perturbed_node(m) if node is None else node
    mix_seed = derive_seed(seed, 0)
    report = ExperimentReport(
        "sensitivity_mix",
        {
            "epsilons": list(epsilons),
            "node": m.labels[target],
            "kinds": list(kinds),
            "seed": seed,
            "config": cfg.to_dict(),
        },
    )
    perturbed = {
        i: perturb_mechanism(m, target, float(e), mix_seed)
        for i, e in enumerate(epsilons)
    }
    cells: Dict[CellKey, Callable[[], float]] = {
        (i, kind): (
            lambda kind=kind, p=perturbed[i]: estimate(
                kind, m, p, _cell_config(cfg, cfg.seed)
            ).value
        )
        for i in range(len(epsilons))
        for kind in kinds
    }
    results = run_cells(cells, progress)
    for i, e in enumerate(epsilons):
        row: Dict[str, Any] = {"epsilon": float(e), "seed": cfg.seed}
        row.update({kind: results[(i, kind)] for kind in kinds})
        report.add_row(row)
    report.summary["spearman"] = {
        kind: _spearman(
            list(epsilons), [results[(i, kind)] for i in range(len(epsilons))]
        )
        for kind in kinds
    }
    report.elapsed = time.perf_counter() - started
    return report


def run_sensitivity_mec(
    m: Scm,
    cfg: DistanceConfig,
    train_rows: int = 2000,
    kinds: Sequence[str] = ("od", "id"),
    seed: int = 0,
    progress: Progress = None,
) -> ExperimentReport:
    """Refit ``m`` on every graph of its Markov equivalence class.

    Each member ``H`` is scored at ``epsilon = SID(G, H) / max SID``.
    The summary records the self-distance floor of ``m`` under independent
    seeds, the level a refit with the right distribution should reach.

    Raises:
        CapExceededError: If the graph exceeds the equivalence-class cap.
    """
    started = time.perf_counter()
    members = markov_equivalence_class(m.graph)
    data = sample(m, train_rows, derive_seed(seed, 1))
    sids = [sid(m.graph, h) for h in members]
    top = max(sids) or 1
    report = ExperimentReport(
        "sensitivity_mec",
        {
            "members": len(members),
            "train_rows": train_rows,
            "kinds": list(kinds),
            "seed": seed,
            "config": cfg.to_dict(),
        },
    )
    fitted = [fit_mle_and_orient(h, data, m.domains) for h in members]
    cells: Dict[CellKey, Callable[[], float]] = {
        ("fit", i, kind): (
            lambda kind=kind, f=fitted[i]: estimate(
                kind, m, f, _cell_config(cfg, cfg.seed)
            ).value
        )
        for i in range(len(members))
        for kind in kinds
    }
    unpaired = replace(_cell_config(cfg, cfg.seed), paired=False)
    for kind in kinds:
        cells[("floor", kind)] = lambda kind=kind: estimate(kind, m, m, unpaired).value
    results = run_cells(cells, progress)
    for i, h in enumerate(members):
        row: Dict[str, Any] = {
            "member": i,
            "edges": "; ".join(
                f"{h.labels[a]}->{h.labels[b]}" for a, b in sorted(h.edges)
            ),
            "sid": sids[i],
            "epsilon": sids[i] / top,
            "seed": cfg.seed,
        }
        row.update({kind: results[("fit", i, kind)] for kind in kinds})
        report.add_row(row)
    report.rows.sort(key=lambda r: (r["epsilon"], r["member"]))
    report.summary["floor"] = {kind: results[("floor", kind)] for kind in kinds}
    report.elapsed = time.perf_counter() - started
    return report


def run_eval(
    truth: Scm,
    submissions: Mapping[str, Union[str, Path]],
    datasets: Sequence[Union[str, Path, SampleMatrix]],
    cfg: DistanceConfig,
    reversal_cost: int = 1,
    progress: Progress = None,
) -> ExperimentReport:
    """Score discovery outputs against a ground-truth model.

    Each submission is oriented and fitted on each dataset, then compared
    with the truth by SID, SHD and ID. A failing submission is recorded with
    its error and the others are still scored.
    """
    started = time.perf_counter()
    tables = [
        data if isinstance(data, SampleMatrix) else read_dataset(data, truth)
        for data in datasets
    ]
    names = sorted(submissions)
    report = ExperimentReport(
        "eval",
        {
            "submissions": {name: str(submissions[name]) for name in names},
            "rows": [t.k for t in tables],
            "reversal_cost": reversal_cost,
            "config": cfg.to_dict(),
        },
    )

    def score(name: str, data: SampleMatrix) -> Dict[str, Any]:
        try:
            graph = read_graph_output(submissions[name], truth.labels)
            fitted = fit_mle_and_orient(graph, data, truth.domains)
            return {
                "sid": sid(truth.graph, fitted.graph),
                "shd": shd(truth.graph, fitted.graph, reversal_cost),
                "id": estimate("id", truth, fitted, _cell_config(cfg, cfg.seed)).value,
                "error": "",
            }
        except CausalDistanceError as e:
            logger.error(f"Submission {name} failed: {e}")
            return {"sid": None, "shd": None, "id": None, "error": str(e)}

    cells: Dict[CellKey, Callable[[], Dict[str, Any]]] = {
        (t, name): (lambda name=name, data=tables[t]: score(name, data))
        for t in range(len(tables))
        for name in names
    }
    results = run_cells(cells, progress)
    for t, data in enumerate(tables):
        for name in names:
            row = {"submission": name, "rows": data.k, "seed": cfg.seed}
            row.update(results[(t, name)])
            report.add_row(row)
    report.elapsed = time.perf_counter() - started
    return report


def run_compare(
    pairs: int,
    cfg: DistanceConfig,
    d: int = 5,
    expected_degree: float = 2.0,
    parametrization: str = "linGauss",
    seed: int = 0,
    progress: Progress = None,
) -> ExperimentReport:
    """SHD, SID, OD and ID on random model pairs and their rank correlations."""
    started = time.perf_counter()
    report = ExperimentReport(
        "compare",
        {
            "pairs": pairs,
            "d": d,
            "expected_degree": expected_degree,
            "parametrization": parametrization,
            "seed": seed,
            "config": cfg.to_dict(),
        },
    )
    models = {
        i: (
            random_scm(parametrization, d, expected_degree, derive_seed(seed, i, 0)),
            random_scm(parametrization, d, expected_degree, derive_seed(seed, i, 1)),
        )
        for i in range(pairs)
    }
    cells: Dict[CellKey, Callable[[], float]] = {}
    for i, (a, b) in models.items():
        cells[(i, "shd")] = lambda a=a, b=b: float(shd(a.graph, b.graph))
        cells[(i, "sid")] = lambda a=a, b=b: float(sid(a.graph, b.graph))
        for kind in ("od", "id"):
            cells[(i, kind)] = lambda kind=kind, a=a, b=b, i=i: estimate(
                kind, a, b, _cell_config(cfg, _cell_seed(seed, i))
            ).value
    results = run_cells(cells, progress)
    metrics = ("shd", "sid", "od", "id")
    for i in range(pairs):
        row: Dict[str, Any] = {"pair": i, "seed": seed_echo(derive_seed(seed, i))}
        row.update({metric: results[(i, metric)] for metric in metrics})
        report.add_row(row)
    frame = report.to_frame()
    correlation = pd.DataFrame(index=list(metrics), columns=list(metrics), dtype=float)
    for a in metrics:
        for b in metrics:
            rho = _spearman(list(frame[a]), list(frame[b]))
            correlation.loc[a, b] = np.nan if rho is None else rho
    report.tables["spearman"] = correlation
    report.elapsed = time.perf_counter() - started
    return report
