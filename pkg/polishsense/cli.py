from __future__ import annotations

import functools
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from .cmd_parser import parse_model_list, parse_modes, parse_param_assignments
from .constants import EXIT_FAILURE, EXIT_USAGE, RESULTS_TEXT_FILE, feature_table_name
from .datagen import ScenarioConfig, gen_dataset, load_scenario, manifest_hash
from .env_utils import load_environment, resolve_thread_count
from .errors import ConfigError, PolishSenseError
from .executor import PipelineConfig, evaluate_tables, extract_dataset, feature_row_for_run, predict, train
from .limits import parse_number
from .logging_utils import get_logger
from .models import ModelKind, load_model
from .spectral import load_band_set

log = get_logger("cli")


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Map configuration problems to exit 2 and runtime failures to exit 1."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"Error: invalid configuration: {exc}", err=True)
            ctx.exit(EXIT_USAGE)
        except ConfigError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_USAGE)
        except PolishSenseError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_FAILURE)

    return wrapper


def _pipeline_config(**values: Any) -> PipelineConfig:
    try:
        return PipelineConfig(**{key: value for key, value in values.items() if value is not None})
    except ValidationError as exc:
        raise ConfigError(f"invalid options: {exc}") from exc


def _stft_options(func: Callable[..., Any]) -> Callable[..., Any]:
    func = click.option("--bands", "bands_path", type=click.Path(path_type=Path), help="Band set JSON file.")(func)
    func = click.option("--window-seconds", type=float, default=1.0, show_default=True)(func)
    func = click.option("--overlap", "overlap_fraction", type=float, default=0.0, show_default=True)(func)
    func = click.option("--fft-points", type=int, default=16384, show_default=True)(func)
    return func


def _check_bands(bands_path: Optional[Path]) -> None:
    if bands_path is not None:
        load_band_set(bands_path)


@click.group()
@click.option(
    "--env-file",
    type=click.Path(path_type=Path, dir_okay=False),
    default=None,
    help="KEY=VALUE file merged into the environment (defaults to .env at the repository root).",
)
def cli(env_file: Optional[Path]) -> None:
    """Predict polishing roughness deltas from vibration recordings."""

    load_environment(env_file)


@cli.command()
@click.option("--seed", type=int, default=None, help="Scenario seed (default 42).")
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@click.option("--n-short", type=int, default=None)
@click.option("--n-long", type=int, default=None)
@click.option("--bands", "bands_path", type=click.Path(path_type=Path), default=None)
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), default=None, help="ScenarioConfig JSON.")
@click.option("--quiet", is_flag=True, help="Hide progress bars.")
@handle_errors
def gen(
    seed: Optional[int],
    out_dir: Path,
    n_short: Optional[int],
    n_long: Optional[int],
    bands_path: Optional[Path],
    scenario_path: Optional[Path],
    quiet: bool,
) -> None:
    """Generate a synthetic dataset with planted band-level signal."""

    base = load_scenario(scenario_path) if scenario_path is not None else ScenarioConfig()
    data: Dict[str, Any] = base.model_dump()
    for key, value in (("seed", seed), ("n_short", n_short), ("n_long", n_long)):
        if value is not None:
            data[key] = value
    if bands_path is not None:
        data["bands"] = load_band_set(bands_path).to_state()
    cfg = ScenarioConfig.model_validate(data)

    manifest = gen_dataset(cfg, out_dir, threads=resolve_thread_count(), progress=not quiet)
    click.echo(f"{len(manifest['runs'])} runs written to {out_dir} (manifest sha256 {manifest_hash(manifest)})")


@cli.command()
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@click.option("--mode", "--modes", "modes", default="both", show_default=True, help="together, separate or both.")
@click.option("--save-energies", is_flag=True, help="Also write per-run band-energy series.")
@click.option("--quiet", is_flag=True)
@_stft_options
@handle_errors
def extract(
    dataset_dir: Path,
    out_dir: Path,
    modes: str,
    save_energies: bool,
    quiet: bool,
    bands_path: Optional[Path],
    window_seconds: float,
    overlap_fraction: float,
    fft_points: int,
) -> None:
    """Turn every run of a dataset into feature-table rows."""

    _check_bands(bands_path)
    config = _pipeline_config(
        dataset_dir=dataset_dir,
        out_dir=out_dir,
        bands_path=bands_path,
        window_seconds=window_seconds,
        overlap_fraction=overlap_fraction,
        fft_points=fft_points,
        modes=parse_modes(modes),
        threads=resolve_thread_count(),
        progress=not quiet,
        save_energies=save_energies,
    )
    result = extract_dataset(config)
    if not result.ok:
        for failure in result.failures:
            click.echo(f"Error: run {failure.run_id}: {failure.message}", err=True)
        click.get_current_context().exit(EXIT_FAILURE)
    for mode, path in result.tables.items():
        click.echo(f"{mode.value}: {len(result.vectors[mode])} runs -> {path}")


@cli.command(name="train")
@click.option("--features", "feature_table", type=click.Path(path_type=Path, dir_okay=False), required=True)
@click.option("--model", "model_name", required=True, help="Model kind to fit.")
@click.option("--param", "params", multiple=True, help="Hyperparameter override kind.name=value.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@handle_errors
def train_command(feature_table: Path, model_name: str, params: Sequence[str], seed: int, out_dir: Path) -> None:
    """Fit one model on a full feature table and save it."""

    kinds = parse_model_list(model_name)
    if len(kinds) != 1:
        raise ConfigError("train fits exactly one model kind")
    kind = kinds[0]
    overrides = parse_param_assignments(params)
    _, path = train(feature_table, kind, out_dir, overrides.get(kind), seed)
    click.echo(f"{kind.value} model saved to {path}")


@cli.command()
@click.option("--features-dir", type=click.Path(path_type=Path, file_okay=False), default=None,
              help="Directory holding features_<mode>.csv (defaults to --out).")
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@click.option("--models", "models", default="all", show_default=True)
@click.option("--mode", "--modes", "modes", default="both", show_default=True)
@click.option("--param", "params", multiple=True, help="Hyperparameter override kind.name=value.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--standardize", is_flag=True, help="z-score features per fold using training rows.")
@click.option("--quiet", is_flag=True)
@handle_errors
def evaluate(
    features_dir: Optional[Path],
    out_dir: Path,
    models: str,
    modes: str,
    params: Sequence[str],
    seed: int,
    standardize: bool,
    quiet: bool,
) -> None:
    """Leave-one-out evaluation of every requested model x feature mode."""

    kinds = parse_model_list(models)
    mode_list = parse_modes(modes)
    overrides = parse_param_assignments(params)
    feature_dir = features_dir if features_dir is not None else out_dir
    for mode in mode_list:
        if not (feature_dir / feature_table_name(mode.value)).is_file():
            raise ConfigError(f"missing feature table {feature_dir / feature_table_name(mode.value)}; run extract first")

    result = evaluate_tables(
        feature_dir,
        out_dir,
        kinds,
        mode_list,
        overrides,
        seed=seed,
        standardize=standardize,
        threads=resolve_thread_count(),
        progress=not quiet,
    )
    if result.table is not None:
        click.echo(result.table.to_text(), nl=False)
        log.debug("results table written to %s", out_dir / RESULTS_TEXT_FILE)
    for report in result.reports:
        if report.importance_summary is not None:
            top = ", ".join(f"{name} ({score:.3f})" for name, score in report.top_features())
            click.echo(f"{report.model_kind.value}/{report.feature_mode.value} importance: {top}")
    if not result.ok:
        for failure in result.failures:
            click.echo(f"Error: {failure.kind.value}/{failure.mode.value}: {failure.message}", err=True)
        click.get_current_context().exit(EXIT_FAILURE)


@cli.command(name="predict")
@click.option("--model", "model_path", type=click.Path(path_type=Path, dir_okay=False), required=True)
@click.option("--row", default=None, help="Comma-separated feature values in the model's column order.")
@click.option("--run", "run_dir", type=click.Path(path_type=Path, file_okay=False), default=None)
@_stft_options
@handle_errors
def predict_command(
    model_path: Path,
    row: Optional[str],
    run_dir: Optional[Path],
    bands_path: Optional[Path],
    window_seconds: float,
    overlap_fraction: float,
    fft_points: int,
) -> None:
    """Predict the roughness delta (nm) for one feature row or run directory."""

    if (row is None) == (run_dir is None):
        raise ConfigError("give exactly one of --row or --run")
    model = load_model(model_path)

    if row is not None:
        values = []
        for token in row.split(","):
            value = parse_number(token)
            if value is None:
                raise ConfigError(f"--row: {token!r} is not a number")
            values.append(float(value))
        features = np.array(values, dtype=np.float64)
        if features.shape[0] != model.n_features:
            raise ConfigError(f"--row has {features.shape[0]} values, model expects {model.n_features}")
    else:
        _check_bands(bands_path)
        config = _pipeline_config(
            bands_path=bands_path,
            window_seconds=window_seconds,
            overlap_fraction=overlap_fraction,
            fft_points=fft_points,
        )
        features = feature_row_for_run(model, run_dir, config)

    prediction, top = predict(model, features)
    click.echo(f"{prediction:.17g}")
    for name, score in top:
        click.echo(f"  {name}\t{score:.6f}")


def main(argv: Optional[Sequence[str]] = None) -> None:
    cli.main(args=list(argv) if argv is not None else None, prog_name="polishsense")


if __name__ == "__main__":
    main()
