import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .models.cipher import DEFAULT_LOG_N, DEFAULT_LOG_P, DEFAULT_LOG_Q, HeParams
from .models.config import ALGORITHM_DESCRIPTIONS, DEFAULT_GAMMA, Algorithm, SigmoidKind, TrainConfig
from .models.dataset import DEFAULT_SEED, DEFAULT_TEST_FRACTION, Link, SplitSpec, SyntheticSpec
from .models.errors import RegressionError, SchemaError
from .models.model import TrainedModel
from .models.regression import SfhBound
from .models.report import save_bench
from .services.data_service import DataService
from .services.encrypted_trainer_service import STEP_LEVELS, EncryptedTrainerService
from .services.experiment_service import ExperimentService, PreparedData
from .services.trainer_service import TrainerService
from .utils import config

# Initialize logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(rich_tracebacks=True)]
)
logger = logging.getLogger("fhe_regress")

app = typer.Typer(
    help="fhe-regress - fixed-Hessian regression trainers with a CKKS simulator",
    add_completion=False,
)
console = Console()

DEFAULT_ITERATIONS = 30

# options shared by train and bench
CONFIG_OPT = typer.Option(None, "--config", help="TOML or JSON file of flag defaults (flags win)")
ITERS_OPT = typer.Option(None, "--iters", help=f"Number of iterations (default {DEFAULT_ITERATIONS})")
GAMMA_OPT = typer.Option(None, "--gamma", help=f"Logit window width for improved-lffr (default {DEFAULT_GAMMA})")
SIGMOID_OPT = typer.Option(None, "--sigmoid", help="Sigmoid inside the LFFR gradient (default exact)")
BOUND_OPT = typer.Option(None, "--bound", help="Hessian diagonal construction (default entrywise)")
ENCRYPTED_OPT = typer.Option(False, "--encrypted", help="Train through the ciphertext simulator")
SIM_NOISE_OPT = typer.Option(False, "--sim-noise", help="Perturb every simulated multiplication")
LOG_N_OPT = typer.Option(None, "--log-n", help=f"Ring degree exponent (default {DEFAULT_LOG_N})")
LOG_Q_OPT = typer.Option(None, "--log-q", help=f"Total modulus bits (default {DEFAULT_LOG_Q})")
LOG_P_OPT = typer.Option(None, "--log-p", help=f"Bits per rescale (default {DEFAULT_LOG_P})")
SLOTS_OPT = typer.Option(None, "--slots", help="Slot count override")
CSV_OPT = typer.Option(None, "--csv", help="Numeric CSV with features and target")
TARGET_COL_OPT = typer.Option(None, "--target-col", help="Index of the target column (default last)")
HAS_HEADER_OPT = typer.Option(None, "--has-header/--no-header", help="First CSV line is a header")
SYNTHETIC_OPT = typer.Option(False, "--synthetic", help="Generate synthetic data instead of reading a CSV")
N_OPT = typer.Option(None, "--n", help="Synthetic rows (default 1000)")
D_OPT = typer.Option(None, "--d", help="Synthetic features (default 8)")
NOISE_OPT = typer.Option(None, "--noise", help="Synthetic Gaussian noise sigma (default 0)")
LINK_OPT = typer.Option(None, "--link", help="Synthetic response link (default linear)")
TEST_FRACTION_OPT = typer.Option(None, "--test-fraction", help=f"Held-out fraction (default {DEFAULT_TEST_FRACTION})")
SEED_OPT = typer.Option(None, "--seed", help=f"Seed for split, synthetic data and noise (default {DEFAULT_SEED})")
OUT_DIR_OPT = typer.Option(None, "--out-dir", help="Output directory (falls back to $FHE_REGRESS_OUT, then ./out)")


def show_algorithms():
    """Display available trainers."""
    table = Table(title="Available Algorithms")
    table.add_column("Algorithm", style="cyan")
    table.add_column("Encrypted", style="magenta")
    table.add_column("Levels/iteration", style="yellow")
    table.add_column("Description", style="green")

    for algorithm in Algorithm:
        levels = STEP_LEVELS.get(algorithm)
        table.add_row(
            algorithm.value,
            "yes" if levels else "no",
            str(levels) if levels else "-",
            ALGORITHM_DESCRIPTIONS[algorithm],
        )

    console.print(table)


@contextmanager
def flag_errors():
    """Report invalid flag or config-file values as a usage error."""
    try:
        yield
    except ValueError as e:
        raise typer.BadParameter(str(e))


def check_environment():
    for notice in config.load_environment():
        logger.debug(notice)


def load_data(settings: Dict[str, Any], csv: Optional[Path], target_col: Optional[int], has_header: Optional[bool],
              synthetic: bool, n: Optional[int], d: Optional[int], noise: Optional[float],
              link: Optional[Link], seed: int) -> Tuple[np.ndarray, np.ndarray, dict]:
    """Read the CSV or generate synthetic data; exactly one source is allowed."""
    csv = config.resolve_setting(csv, settings, "csv")
    synthetic = synthetic or bool(settings.get("synthetic", False))
    if (csv is None) == (not synthetic):
        raise typer.BadParameter("Give exactly one data source: --csv PATH or --synthetic")

    if csv is not None:
        target = config.resolve_setting(target_col, settings, "target_col", -1)
        header = config.resolve_setting(has_header, settings, "has_header", False)
        raw, y = DataService.load_csv(csv, has_header=header, target_column=target)
        return raw, y, {"source": "csv", "path": str(csv), "target_col": target, "has_header": header}

    with flag_errors():
        spec = SyntheticSpec(
            n=config.resolve_setting(n, settings, "n", 1000),
            d=config.resolve_setting(d, settings, "d", 8),
            noise_sigma=config.resolve_setting(noise, settings, "noise", 0.0),
            link=config.resolve_setting(link, settings, "link", Link.LINEAR),
            seed=seed,
        )
    raw, y, _ = DataService.draw_synthetic(spec)
    return raw, y, {"source": "synthetic", "n": spec.n, "d": spec.d, "noise": spec.noise_sigma, "link": spec.link.value}


def build_he_params(settings: Dict[str, Any], log_n: Optional[int], log_q: Optional[int],
                    log_p: Optional[int], slots: Optional[int]) -> HeParams:
    with flag_errors():
        return HeParams(
            log_n=config.resolve_setting(log_n, settings, "log_n", DEFAULT_LOG_N),
            log_q=config.resolve_setting(log_q, settings, "log_q", DEFAULT_LOG_Q),
            log_p=config.resolve_setting(log_p, settings, "log_p", DEFAULT_LOG_P),
            slots=config.resolve_setting(slots, settings, "slots"),
        )


def prepare_data(settings, csv, target_col, has_header, synthetic, n, d, noise, link,
                 test_fraction, seed, algorithm: Optional[Algorithm] = None) -> Tuple[PreparedData, int]:
    seed = config.resolve_setting(seed, settings, "seed", DEFAULT_SEED)
    with flag_errors():
        split = SplitSpec(
            test_fraction=config.resolve_setting(test_fraction, settings, "test_fraction", DEFAULT_TEST_FRACTION),
            seed=seed,
        )
    with console.status("[bold yellow]Loading data..."):
        raw, y, source = load_data(settings, csv, target_col, has_header, synthetic, n, d, noise, link, seed)
        return ExperimentService.prepare(raw, y, split, source, algorithm), seed


@app.command()
def algorithms():
    """List available trainers and their per-iteration level cost."""
    show_algorithms()


@app.command()
def params(
    log_n: int = typer.Option(DEFAULT_LOG_N, "--log-n", help="Ring degree exponent"),
    log_q: int = typer.Option(DEFAULT_LOG_Q, "--log-q", help="Total modulus bits"),
    log_p: int = typer.Option(DEFAULT_LOG_P, "--log-p", help="Bits per rescale"),
    slots: Optional[int] = typer.Option(None, "--slots", help="Slot count override"),
    rows: int = typer.Option(506, "--rows", help="Dataset rows"),
    features: int = typer.Option(13, "--features", help="Dataset features (bias excluded)"),
    iters: int = typer.Option(DEFAULT_ITERATIONS, "--iters", help="Number of iterations"),
):
    """Show capacity, shard count and refresh cadence for a parameter set."""
    with flag_errors():
        he = HeParams(log_n=log_n, log_q=log_q, log_p=log_p, slots=slots)
    try:
        shard_rows = EncryptedTrainerService.shard_rows(he, features + 1)
    except RegressionError as e:
        console.print(f"[red]Configuration error: {str(e)}[/red]")
        raise typer.Exit(1)

    shards = -(-rows // shard_rows) if rows > shard_rows else 1
    table = Table(title=f"HE parameters: logN={log_n}, logQ={log_q}, logp={log_p}")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("slots", str(he.slot_count))
    table.add_row("levels per budget", str(he.initial_levels))
    table.add_row("rows per ciphertext", str(shard_rows))
    table.add_row(f"ciphertexts for {rows} x {features + 1}", str(shards))
    for algorithm, levels in STEP_LEVELS.items():
        try:
            refreshes = EncryptedTrainerService.expected_refreshes(he, levels, iters)
            cadence = he.initial_levels // levels
        except RegressionError:
            refreshes, cadence = "-", "budget too small"
        table.add_row(f"{algorithm.value}: iterations per refresh", str(cadence))
        table.add_row(f"{algorithm.value}: refreshes in {iters} iterations", str(refreshes))
    console.print(table)


@app.command()
def train(
    algo: Optional[Algorithm] = typer.Option(None, "--algo", help="Trainer (default linear)"),
    normalize_targets: Optional[bool] = typer.Option(None, "--normalize-targets/--raw-targets", help="Scale targets into [0, 1) for linear/ridge"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Ridge penalty (required for ridge)"),
    gamma: Optional[float] = GAMMA_OPT,
    iters: Optional[int] = ITERS_OPT,
    sigmoid: Optional[SigmoidKind] = SIGMOID_OPT,
    bound: Optional[SfhBound] = BOUND_OPT,
    encrypted: bool = ENCRYPTED_OPT,
    sim_noise: bool = SIM_NOISE_OPT,
    log_n: Optional[int] = LOG_N_OPT,
    log_q: Optional[int] = LOG_Q_OPT,
    log_p: Optional[int] = LOG_P_OPT,
    slots: Optional[int] = SLOTS_OPT,
    csv: Optional[Path] = CSV_OPT,
    target_col: Optional[int] = TARGET_COL_OPT,
    has_header: Optional[bool] = HAS_HEADER_OPT,
    synthetic: bool = SYNTHETIC_OPT,
    n: Optional[int] = N_OPT,
    d: Optional[int] = D_OPT,
    noise: Optional[float] = NOISE_OPT,
    link: Optional[Link] = LINK_OPT,
    test_fraction: Optional[float] = TEST_FRACTION_OPT,
    seed: Optional[int] = SEED_OPT,
    out_dir: Optional[str] = OUT_DIR_OPT,
    config_file: Optional[Path] = CONFIG_OPT,
):
    """Train one model and write model, report and trace files."""
    try:
        check_environment()
        settings = config.load_config_file(config_file)
        encrypted = encrypted or bool(settings.get("encrypted", False))
        with flag_errors():
            algorithm = Algorithm(config.resolve_setting(algo, settings, "algo", Algorithm.LINEAR))
            lam = config.resolve_setting(lam, settings, "lambda")
            if algorithm == Algorithm.RIDGE and lam is None:
                raise typer.BadParameter("--lambda is required when --algo ridge", param_hint="--lambda")
            cfg = TrainConfig(
                algorithm=algorithm,
                iterations=config.resolve_setting(iters, settings, "iters", DEFAULT_ITERATIONS),
                lam=lam or 0.0,
                gamma=config.resolve_setting(gamma, settings, "gamma", DEFAULT_GAMMA),
                sigmoid_kind=config.resolve_setting(sigmoid, settings, "sigmoid", SigmoidKind.EXACT),
                normalize_targets=config.resolve_setting(normalize_targets, settings, "normalize_targets", False),
                bound=config.resolve_setting(bound, settings, "bound", SfhBound.ENTRYWISE),
            )
        he = build_he_params(settings, log_n, log_q, log_p, slots) if encrypted else None
        data, seed = prepare_data(settings, csv, target_col, has_header, synthetic, n, d, noise, link,
                                  test_fraction, seed, algorithm)

        mode = "encrypted" if he else "cleartext"
        with console.status(f"[bold green]Training {algorithm.value} ({mode})..."):
            model, run = ExperimentService.fit(data, cfg, he, noise=sim_noise, seed=seed)

        target_dir = config.resolve_out_dir(out_dir, settings)
        model.save(target_dir / "model.json")
        run.save(target_dir / "report.json")
        run.save_trace(target_dir / "trace.csv")
    except typer.BadParameter:
        raise
    except (RegressionError, OSError) as e:
        logger.debug("Training failed", exc_info=True)
        console.print(f"\n[red]Error: {str(e)}[/red]")
        raise typer.Exit(1)

    lines = [
        f"train MSE: {run.train_mse:.6g}",
        f"test MSE:  {run.test_mse:.6g}",
        f"final cost: {run.trace[-1]:.6g}",
        f"seconds: {run.wall_seconds:.3f}",
    ]
    if run.refresh:
        lines.append(f"refreshes: {run.refresh['total_refreshes']} "
                     f"({run.refresh['levels_per_iteration']} levels/iteration, {run.refresh['shards']} ciphertext(s))")
    console.print(Panel("\n".join(lines), title=f"{algorithm.value} ({mode})", expand=False))
    console.print(f"[green]Model, report and trace saved to: {target_dir}[/green]")


@app.command()
def predict(
    model_path: Path = typer.Option(..., "--model", help="Model JSON written by train"),
    csv: Path = typer.Option(..., "--csv", help="CSV of raw feature rows (no target column)"),
    has_header: bool = typer.Option(False, "--has-header/--no-header", help="First CSV line is a header"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Predictions CSV (default <out-dir>/predictions.csv)"),
    out_dir: Optional[str] = OUT_DIR_OPT,
):
    """Predict one value per input row."""
    try:
        model = TrainedModel.load(model_path)
        rows = DataService.read_numeric_csv(csv, has_header=has_header)
        if rows.size == 0:
            predictions = np.empty(0)
        elif rows.shape[1] != model.n_features:
            raise SchemaError(f"Model expects {model.n_features} features, CSV has {rows.shape[1]} columns")
        else:
            predictions = np.atleast_1d(TrainerService.predict(model, rows))
        target = output or config.resolve_out_dir(out_dir) / "predictions.csv"
        pd.DataFrame({"prediction": predictions}).to_csv(target, index=False)
    except (RegressionError, OSError, KeyError, ValueError) as e:
        logger.debug("Prediction failed", exc_info=True)
        console.print(f"\n[red]Error: {str(e)}[/red]")
        raise typer.Exit(1)

    console.print(f"[green]{predictions.size} predictions saved to: {target}[/green]")


@app.command()
def bench(
    iters: Optional[int] = ITERS_OPT,
    gamma: Optional[float] = GAMMA_OPT,
    sigmoid: Optional[SigmoidKind] = SIGMOID_OPT,
    bound: Optional[SfhBound] = BOUND_OPT,
    encrypted: bool = ENCRYPTED_OPT,
    log_n: Optional[int] = LOG_N_OPT,
    log_q: Optional[int] = LOG_Q_OPT,
    log_p: Optional[int] = LOG_P_OPT,
    slots: Optional[int] = SLOTS_OPT,
    csv: Optional[Path] = CSV_OPT,
    target_col: Optional[int] = TARGET_COL_OPT,
    has_header: Optional[bool] = HAS_HEADER_OPT,
    synthetic: bool = SYNTHETIC_OPT,
    n: Optional[int] = N_OPT,
    d: Optional[int] = D_OPT,
    noise: Optional[float] = NOISE_OPT,
    link: Optional[Link] = LINK_OPT,
    test_fraction: Optional[float] = TEST_FRACTION_OPT,
    seed: Optional[int] = SEED_OPT,
    out_dir: Optional[str] = OUT_DIR_OPT,
    config_file: Optional[Path] = CONFIG_OPT,
):
    """Compare LR, YnormdLR, LFFR and Improved LFFR on one split."""
    try:
        check_environment()
        settings = config.load_config_file(config_file)
        encrypted = encrypted or bool(settings.get("encrypted", False))
        with flag_errors():
            base = TrainConfig(
                iterations=config.resolve_setting(iters, settings, "iters", DEFAULT_ITERATIONS),
                gamma=config.resolve_setting(gamma, settings, "gamma", DEFAULT_GAMMA),
                sigmoid_kind=config.resolve_setting(sigmoid, settings, "sigmoid", SigmoidKind.EXACT),
                bound=config.resolve_setting(bound, settings, "bound", SfhBound.ENTRYWISE),
            )
        he = build_he_params(settings, log_n, log_q, log_p, slots) if encrypted else None
        data, _ = prepare_data(settings, csv, target_col, has_header, synthetic, n, d, noise, link,
                               test_fraction, seed)
        with console.status("[bold green]Running benchmark..."):
            rows = ExperimentService.bench(data, base, he)
        paths = save_bench(rows, config.resolve_out_dir(out_dir, settings))
    except typer.BadParameter:
        raise
    except (RegressionError, OSError) as e:
        logger.debug("Benchmark failed", exc_info=True)
        console.print(f"\n[red]Error: {str(e)}[/red]")
        raise typer.Exit(1)

    table = Table(title=f"Benchmark ({base.iterations} iterations)")
    table.add_column("Model", style="cyan")
    table.add_column("Train MSE", style="green")
    table.add_column("Test MSE", style="green")
    table.add_column("Seconds", style="yellow")
    if he is not None:
        table.add_column("Refreshes", style="magenta")
    for row in rows:
        cells = [row.name, f"{row.train_mse:.6g}", f"{row.test_mse:.6g}", f"{row.wall_seconds:.3f}"]
        if he is not None:
            cells.append("-" if row.refreshes is None else str(row.refreshes))
        table.add_row(*cells)
    console.print(table)
    console.print(f"[green]Comparison saved to: {paths['table_csv'].parent}[/green]")


@app.command()
def version():
    """Show the version of fhe-regress"""
    from . import __version__
    console.print(f"fhe-regress version: [bold blue]{__version__}[/bold blue]")
