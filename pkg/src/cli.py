"""Command-line interface for causal-distances.

This module provides a CLI for comparing causal models and reproducing the
experiments built on the distances. It includes commands for:
- Estimating OD, ID or CD between two model files
- Geometry of a model set (pairwise matrices and 2-D embeddings)
- Sample efficiency, sensitivity and metric comparison studies
- Scoring causal discovery outputs against a ground-truth model
- Generating random models
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import typer
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
    TimeRemainingColumn,
)
from rich.table import Table

from . import settings
from .analytic import analytic_id, analytic_od
from .counterfactual import McmcConfig
from .distances import (
    DistanceConfig,
    DistanceEstimate,
    ValueSampling,
    repeat_estimate,
)
from .errors import CausalDistanceError, ModelError
from .experiments import (
    ExperimentReport,
    is_linear_gaussian,
    run_compare,
    run_eval,
    run_geometry,
    run_sample_efficiency,
    run_sensitivity_mec,
    run_sensitivity_mix,
)
from .generators import (
    GEOMETRY_BETAS,
    PARAMETRIZATIONS,
    geometry_models,
    random_bayes_net,
    random_scm,
)
from .model_io.datasets import write_dataset
from .model_io.scm_format import load_model, save_model
from .scm import Scm, sample
from .transport import BaseDistanceConfig, BaseKind
from .weights import Normalization

app = typer.Typer(
    help="Causal distances - compare causal models by their observational, "
    "interventional and counterfactual behaviour",
    add_completion=False,
)
console = Console()


class CLIError(Exception):
    """Custom exception for CLI errors with user-friendly messages."""

    exit_code = 2


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    """Setup logging with console output and an optional log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


@app.callback()
def main_options(
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Log per-cell terms and sampler details"
    ),
    log_file: Optional[Path] = typer.Option(
        None, "--log-file", help="Also write the log to this file"
    ),
) -> None:
    """Configure logging for every command."""
    setup_logging(verbose, str(log_file) if log_file else settings.LOG_FILE)


@contextmanager
def handle_errors(action: str) -> Iterator[None]:
    """Map package errors to exit codes: 2 invalid input, 3 numerical failure."""
    try:
        yield
    except (CLIError, CausalDistanceError) as e:
        console.print(f"[bold red]Error: {escape(str(e))}[/bold red]")
        raise typer.Exit(e.exit_code)
    except typer.Exit:
        raise
    except Exception as e:
        console.print(f"[bold red]Unexpected error: {escape(str(e))}[/bold red]")
        logging.exception(f"Unexpected error during {action}")
        raise typer.Exit(1)


def create_progress() -> Progress:
    """Create a progress bar with multiple columns."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeRemainingColumn(),
    )


def parse_floats(text: str, what: str) -> Tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise CLIError(f"{what} must be a comma-separated list of numbers: {text}")


def parse_weights(text: str, what: str) -> Optional[Tuple[float, ...]]:
    """``uniform``, a comma-separated list, or a file holding such a list."""
    if text == "uniform":
        return None
    path = Path(text)
    if path.is_file():
        text = path.read_text().replace("\n", ",")
    return parse_floats(text, what)


def read_model(path: Path) -> Scm:
    if not path.exists():
        raise CLIError(f"Model file not found: {path}")
    return load_model(path)


def build_config(
    k: int,
    l: int,  # noqa: E741
    m: int,
    seed: int,
    base: str,
    mu: str = "uniform",
    nu: str = "uniform",
    independent: bool = False,
    normalization: str = "uniform",
    value_sampling: str = "stratified",
    value_scale: float = 1.0,
    exact_cap: Optional[int] = None,
    chains: int = 4,
    burn_in: int = 500,
    threads: Optional[int] = None,
) -> DistanceConfig:
    try:
        return DistanceConfig(
            k=k,
            l=l,
            m=m,
            base=BaseDistanceConfig(
                kind=BaseKind(base), exact_cap=exact_cap, seed=seed
            ),
            mu=parse_weights(mu, "--mu"),
            nu=parse_weights(nu, "--nu"),
            seed=seed,
            paired=not independent,
            normalization=Normalization(normalization),
            value_sampling=ValueSampling(value_sampling),
            value_scale=value_scale,
            mcmc=McmcConfig(chains=chains, burn_in=burn_in),
            threads=threads,
        )
    except ValueError as e:
        raise CLIError(str(e))


def display_estimate(
    result: DistanceEstimate, analytic: Optional[float] = None
) -> None:
    """Display a distance value and its per-target breakdown."""
    table = Table(title=f"{result.kind.upper()} breakdown")
    table.add_column("Target", style="cyan")
    table.add_column("Weight", justify="right")
    table.add_column("Term", justify="right", style="green")
    table.add_column("Weighted", justify="right")
    for term in result.breakdown:
        table.add_row(
            term.target,
            f"{term.weight:.4f}",
            f"{term.value:.4f}",
            f"{term.weight * term.value:.4f}",
        )
    console.print(table)
    lines = [f"{result.kind.upper()} = {result.value:.6f}"]
    if result.config.get("repeats", 1) > 1:
        lines.append(
            f"std = {result.std:.6f} over {result.config['repeats']} repeats"
        )
    if analytic is not None:
        lines.append(f"analytic oracle = {analytic:.6f}")
    lines.append(f"elapsed {result.elapsed:.2f}s")
    console.print(Panel.fit("\n".join(lines)))


def display_report(report: ExperimentReport, columns: Sequence[str]) -> None:
    """Display the rows of an experiment report."""
    table = Table(title=report.name.replace("_", " ").title())
    for column in columns:
        table.add_column(column, style="cyan" if column == columns[0] else None)
    for row in report.rows:
        table.add_row(*(_format_cell(row.get(column)) for column in columns))
    console.print(table)


def _format_cell(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def finish_report(report: ExperimentReport, out: Optional[Path]) -> None:
    if out is not None:
        manifest = report.save(out)
        console.print(f"\nReport saved to: {manifest}")


def run_with_progress(
    description: str, total: int, fn: Callable[[Callable[[], None]], ExperimentReport]
) -> ExperimentReport:
    with create_progress() as progress:
        task = progress.add_task(description, total=total)
        return fn(lambda: progress.advance(task))


@app.command()
def dist(
    kind: str = typer.Argument(..., help="Distance: od, id or cd"),
    model1: Path = typer.Argument(..., help="First model (.json or .bif)"),
    model2: Path = typer.Argument(..., help="Second model (.json or .bif)"),
    k: int = typer.Option(1000, "--k", help="Samples per distribution"),
    l: int = typer.Option(10, "--l", help="Intervention values per node"),  # noqa: E741
    m: int = typer.Option(10, "--m", help="Evidence values per node"),
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option("w2", "--base", help="Base distance: w1, w2 or sliced"),
    mu: str = typer.Option("uniform", "--mu", help="ID target weights"),
    nu: str = typer.Option("uniform", "--nu", help="CD target weights"),
    independent: bool = typer.Option(
        False, "--independent", help="Sample the two models with independent seeds"
    ),
    normalization: str = typer.Option(
        "uniform", "--normalization", help="Target combination: uniform or per-node"
    ),
    value_sampling: str = typer.Option(
        "stratified", "--value-sampling", help="stratified or iid value draws"
    ),
    value_scale: float = typer.Option(
        1.0, "--value-scale", help="Std of the Gaussian intervention value law"
    ),
    exact_cap: Optional[int] = typer.Option(
        None, "--exact-cap", help="Largest exact transport solve"
    ),
    chains: int = typer.Option(4, "--chains", help="MCMC chains for abduction"),
    burn_in: int = typer.Option(500, "--burn-in", help="MCMC burn-in sweeps"),
    repeats: int = typer.Option(
        1, "--repeats", help="Re-run on derived seeds and report mean and std"
    ),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker cap"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write a JSON report here"),
) -> None:
    """Estimate the distance between two models."""
    with handle_errors("distance estimation"):
        if kind not in ("od", "id", "cd"):
            raise CLIError(f"Unknown distance '{kind}', expected od, id or cd")
        if repeats < 1:
            raise CLIError(f"--repeats must be at least 1, got {repeats}")
        first, second = read_model(model1), read_model(model2)
        cfg = build_config(
            k,
            l,
            m,
            seed,
            base,
            mu=mu,
            nu=nu,
            independent=independent,
            normalization=normalization,
            value_sampling=value_sampling,
            value_scale=value_scale,
            exact_cap=exact_cap,
            chains=chains,
            burn_in=burn_in,
            threads=threads,
        )
        console.print(f"\nComparing {model1.name} and {model2.name} ({kind.upper()})")
        result = repeat_estimate(kind, first, second, cfg, repeats)
        oracle = None
        if kind != "cd" and is_linear_gaussian(first) and is_linear_gaussian(second):
            if kind == "od":
                oracle = analytic_od(first, second)
            else:
                oracle = analytic_id(
                    first,
                    second,
                    mu=cfg.mu,
                    normalization=cfg.normalization,
                    value_scale=cfg.value_scale,
                )
        display_estimate(result, oracle)
        if out is not None:
            payload = result.to_dict()
            payload["models"] = [str(model1), str(model2)]
            payload["analytic"] = oracle
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(payload, indent=2))
            console.print(f"\nReport saved to: {out}")


@app.command()
def geometry(
    models: Optional[List[Path]] = typer.Argument(
        None, help="Model files; the bundled two-node families when omitted"
    ),
    betas: str = typer.Option(
        ",".join(f"{b:g}" for b in GEOMETRY_BETAS), "--betas", help="Effect sizes"
    ),
    metrics: str = typer.Option("sid,od,id", "--metrics", help="Matrices to compute"),
    sampled: bool = typer.Option(
        False, "--sampled", help="Use the sampling estimators even for Gaussian models"
    ),
    k: int = typer.Option(1000, "--k", help="Samples per distribution"),
    l: int = typer.Option(10, "--l", help="Intervention values per node"),  # noqa: E741
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option("w2", "--base", help="Base distance: w1, w2 or sliced"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
) -> None:
    """Pairwise distance matrices of a model set and their 2-D embeddings."""
    with handle_errors("geometry"):
        if models:
            named = [(path.stem, read_model(path)) for path in models]
        else:
            named = geometry_models(parse_floats(betas, "--betas"))
        metric_list = [x.strip() for x in metrics.split(",") if x.strip()]
        cfg = build_config(k, l, 1, seed, base)
        total = len(metric_list) * len(named) ** 2
        report = run_with_progress(
            "Computing distance matrices...",
            total,
            lambda advance: run_geometry(named, cfg, metric_list, not sampled, advance),
        )
        table = Table(title="Geometry")
        table.add_column("Metric", style="cyan")
        table.add_column("Models", justify="right")
        table.add_column("Distinct points", justify="right", style="green")
        for metric in metric_list:
            distinct = report.summary[f"{metric}_distinct_points"]
            table.add_row(metric, str(len(named)), str(distinct))
        console.print(table)
        finish_report(report, out)


@app.command("sample-eff")
def sample_eff(
    k_grid: str = typer.Option("100,400,1600,6400", "--k-grid", help="Sample counts"),
    repeats: int = typer.Option(10, "--repeats", help="Random models per sample count"),
    d: int = typer.Option(6, "--d", help="Nodes per model"),
    degree: float = typer.Option(3.0, "--degree", help="Expected node degree"),
    parametrization: str = typer.Option("linGauss", "--parametrization"),
    kinds: str = typer.Option("od,id,cd", "--kinds", help="Distances to estimate"),
    l: int = typer.Option(  # noqa: E741
        100, "--l", help="Intervention values per node"
    ),
    m: int = typer.Option(10, "--m", help="Evidence values per node"),
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option(
        "sliced", "--base", help="Base distance: w1, w2 or sliced"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
) -> None:
    """Self-distance of random models as the sample count grows."""
    with handle_errors("sample efficiency"):
        ks = [int(x) for x in parse_floats(k_grid, "--k-grid")]
        kind_list = [x.strip() for x in kinds.split(",") if x.strip()]
        cfg = build_config(max(ks), l, m, seed, base)
        report = run_with_progress(
            "Estimating self-distances...",
            len(ks) * repeats * len(kind_list),
            lambda advance: run_sample_efficiency(
                ks, repeats, cfg, d, degree, parametrization, kind_list, seed, advance
            ),
        )
        summary = report.tables["summary"]
        table = Table(title="Sample Efficiency")
        table.add_column("k", style="cyan", justify="right")
        for kind in kind_list:
            table.add_column(f"{kind} mean", justify="right", style="green")
            table.add_column(f"{kind} std", justify="right")
        for k_value, row in summary.iterrows():
            cells = [str(k_value)]
            for kind in kind_list:
                mean, std = row[f"{kind}_mean"], row[f"{kind}_std"]
                cells += [f"{mean:.4f}", _format_cell(std)]
            table.add_row(*cells)
        console.print(table)
        finish_report(report, out)


@app.command()
def sensitivity(
    model: Optional[Path] = typer.Argument(
        None, help="Model file; a random model when omitted"
    ),
    mode: str = typer.Option("mix", "--mode", help="mix or mec"),
    epsilons: str = typer.Option("0,0.2,0.4,0.6,0.8,1", "--epsilons"),
    node: Optional[str] = typer.Option(None, "--node", help="Node to perturb (mix)"),
    d: int = typer.Option(5, "--d", help="Nodes of the random model"),
    degree: float = typer.Option(2.0, "--degree", help="Expected node degree"),
    parametrization: str = typer.Option("linGauss", "--parametrization"),
    train_rows: int = typer.Option(
        2000, "--train-rows", help="Rows for refitting (mec)"
    ),
    kinds: Optional[str] = typer.Option(None, "--kinds", help="Distances to estimate"),
    k: int = typer.Option(1000, "--k", help="Samples per distribution"),
    l: int = typer.Option(10, "--l", help="Intervention values per node"),  # noqa: E741
    m: int = typer.Option(10, "--m", help="Evidence values per node"),
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option("w2", "--base", help="Base distance: w1, w2 or sliced"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
) -> None:
    """Distances between a model and perturbed versions of it."""
    with handle_errors("sensitivity"):
        if mode not in ("mix", "mec"):
            raise CLIError(f"Unknown mode '{mode}', expected mix or mec")
        if model is not None:
            base_model = read_model(model)
        elif mode == "mix":
            base_model = random_scm(parametrization, d, degree, seed)
        else:
            base_model = random_bayes_net(d, degree, seed)
        default_kinds = "od,id,cd" if mode == "mix" else "od,id"
        kind_text = kinds or default_kinds
        kind_list = [x.strip() for x in kind_text.split(",") if x.strip()]
        cfg = build_config(k, l, m, seed, base)
        if mode == "mix":
            grid = parse_floats(epsilons, "--epsilons")
            target = base_model.graph.index(node) if node else None
            report = run_with_progress(
                "Perturbing mechanisms...",
                len(grid) * len(kind_list),
                lambda advance: run_sensitivity_mix(
                    base_model, grid, cfg, target, kind_list, seed, advance
                ),
            )
            display_report(report, ["epsilon"] + kind_list)
            for kind, rho in report.summary["spearman"].items():
                console.print(f"Spearman rho(epsilon, {kind}) = {_format_cell(rho)}")
        else:
            report = run_sensitivity_mec(
                base_model, cfg, train_rows, kind_list, seed
            )
            display_report(report, ["member", "sid", "epsilon"] + kind_list)
            for kind, floor in report.summary["floor"].items():
                console.print(f"Self-distance floor of {kind} = {_format_cell(floor)}")
        finish_report(report, out)


@app.command("eval")
def evaluate(
    truth: Path = typer.Argument(..., help="Ground-truth model (.json or .bif)"),
    submissions: List[Path] = typer.Argument(..., help="Discovery outputs"),
    data: List[Path] = typer.Option(
        ..., "--data", help="Training data CSV (repeatable)"
    ),
    k: int = typer.Option(1000, "--k", help="Samples per distribution"),
    l: int = typer.Option(10, "--l", help="Intervention values per node"),  # noqa: E741
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option("w2", "--base", help="Base distance: w1, w2 or sliced"),
    reversal_cost: int = typer.Option(
        1, "--shd-reversal-cost", help="SHD cost of a reversed edge (1 or 2)"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
) -> None:
    """Score causal discovery outputs against a ground-truth model."""
    with handle_errors("evaluation"):
        truth_model = read_model(truth)
        for path in list(submissions) + list(data):
            if not path.exists():
                raise CLIError(f"File not found: {path}")
        names = [path.stem for path in submissions]
        if len(set(names)) != len(names):
            raise CLIError("Submission file names must be distinct")
        cfg = build_config(k, l, 1, seed, base)
        report = run_with_progress(
            "Scoring submissions...",
            len(submissions) * len(data),
            lambda advance: run_eval(
                truth_model,
                {path.stem: path for path in submissions},
                data,
                cfg,
                reversal_cost,
                advance,
            ),
        )
        display_report(report, ["submission", "rows", "sid", "shd", "id", "error"])
        finish_report(report, out)


@app.command()
def gen(
    out: Path = typer.Argument(..., help="Model file to write (.json, or .bif)"),
    parametrization: str = typer.Option(
        "linGauss",
        "--parametrization",
        help=f"One of {', '.join(PARAMETRIZATIONS)} or discrete",
    ),
    d: int = typer.Option(5, "--d", help="Number of nodes"),
    degree: float = typer.Option(2.0, "--degree", help="Expected node degree"),
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    cardinality: int = typer.Option(
        2, "--cardinality", help="States per discrete node"
    ),
    data: Optional[Path] = typer.Option(None, "--data", help="Also write a sample CSV"),
    rows: int = typer.Option(2000, "--rows", help="Rows of the sample CSV"),
) -> None:
    """Generate a random model file."""
    with handle_errors("model generation"):
        if parametrization == "discrete":
            model = random_bayes_net(d, degree, seed, cardinality)
        elif parametrization in PARAMETRIZATIONS:
            model = random_scm(parametrization, d, degree, seed)
        else:
            raise CLIError(
                f"Unknown parametrization '{parametrization}', expected one of "
                f"{', '.join(PARAMETRIZATIONS)} or discrete"
            )
        if out.suffix.lower() == ".bif" and parametrization != "discrete":
            raise ModelError("only discrete models can be written as BIF")
        save_model(model, out)
        console.print(
            f"Wrote {parametrization} model with {model.node_count} nodes and "
            f"{len(model.graph.edges)} edges to {out}"
        )
        if data is not None:
            write_dataset(sample(model, rows, seed), data)
            console.print(f"Wrote {rows} samples to {data}")


@app.command()
def compare(
    pairs: int = typer.Option(20, "--pairs", help="Random model pairs"),
    d: int = typer.Option(5, "--d", help="Nodes per model"),
    degree: float = typer.Option(2.0, "--degree", help="Expected node degree"),
    parametrization: str = typer.Option("linGauss", "--parametrization"),
    k: int = typer.Option(1000, "--k", help="Samples per distribution"),
    l: int = typer.Option(10, "--l", help="Intervention values per node"),  # noqa: E741
    seed: int = typer.Option(0, "--seed", help="Root seed"),
    base: str = typer.Option("w2", "--base", help="Base distance: w1, w2 or sliced"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
) -> None:
    """Compare SHD, SID, OD and ID on random model pairs."""
    with handle_errors("comparison"):
        cfg = build_config(k, l, 1, seed, base)
        report = run_with_progress(
            "Comparing model pairs...",
            pairs * 4,
            lambda advance: run_compare(
                pairs, cfg, d, degree, parametrization, seed, advance
            ),
        )
        display_report(report, ["pair", "shd", "sid", "od", "id"])
        correlation = report.tables["spearman"]
        table = Table(title="Spearman correlation")
        table.add_column("", style="cyan")
        for column in correlation.columns:
            table.add_column(column, justify="right")
        for name, row in correlation.iterrows():
            table.add_row(str(name), *(_format_cell(float(v)) for v in row))
        console.print(table)
        finish_report(report, out)


def main() -> None:
    """Entry point for the CLI application."""
    app()
