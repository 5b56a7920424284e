"""CLI entrypoint for data generation, training, evaluation and analysis."""

import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import ValidationError

from lowres_pose.config import settings
from lowres_pose.errors import PoseToolkitError
from lowres_pose.observability import initialize_tracing, shutdown_tracing
from lowres_pose.schemas.training import TrainConfig, load_train_config
from lowres_pose.storage import get_db

logger = logging.getLogger(__name__)


def _configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _handle_errors(func):
    """Report toolkit and validation errors on stderr and exit with status 1."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (PoseToolkitError, ValidationError, ValueError, KeyError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return wrapper


def _load_config(config: Optional[str], overrides: Sequence[str]) -> TrainConfig:
    return load_train_config(
        config,
        overrides,
        defaults={"seed": settings.default_seed, "precision": settings.default_precision},
    )


config_option = click.option(
    "--config", "-c", type=click.Path(exists=True, dir_okay=False), help="JSON config file"
)
set_option = click.option(
    "--set",
    "-s",
    "overrides",
    multiple=True,
    metavar="PATH=VALUE",
    help="Override a config field, e.g. --set loss.kind=mse",
)


@click.group(invoke_without_command=True)
@click.version_option(package_name="lowres-pose")
@click.pass_context
def cli(ctx: click.Context):
    """Low-resolution heatmap pose toolkit."""
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_usage(), err=True)
        ctx.exit(2)
    _configure_logging()
    initialize_tracing()
    ctx.call_on_close(shutdown_tracing)


@cli.command("gen-data")
@click.option("--out", "out_dir", default="./data/synthetic", show_default=True)
@click.option("--train-count", default=2000, show_default=True, type=click.IntRange(min=1))
@click.option("--val-count", default=500, show_default=True, type=click.IntRange(min=1))
@click.option("--height", default=64, show_default=True, type=click.IntRange(min=16))
@click.option("--width", default=64, show_default=True, type=click.IntRange(min=16))
@click.option("--seed", type=int, default=None, help="Defaults to LOWRES_POSE_DEFAULT_SEED")
@_handle_errors
def gen_data(
    out_dir: str, train_count: int, val_count: int, height: int, width: int, seed: Optional[int]
):
    """Render stick-figure train and val splits (val uses seed + 1)."""
    from lowres_pose.data import gen_synthetic_dataset

    seed = settings.default_seed if seed is None else seed
    root = Path(out_dir)
    for split, count, split_seed in (("train", train_count, seed), ("val", val_count, seed + 1)):
        gen_synthetic_dataset(count, (height, width), seed=split_seed, out_dir=root / split)
        click.echo(f"Wrote {count} {split} images to {root / split}")


@cli.command()
@config_option
@set_option
@_handle_errors
def train(config: Optional[str], overrides: Sequence[str]):
    """Train and write metrics.csv and checkpoint.bin to the output dir."""
    from lowres_pose.training import train as run_training

    cfg = _load_config(config, overrides)
    result = run_training(cfg, ledger=get_db())
    click.echo(json.dumps(result.final.model_dump(), indent=2))
    click.echo(f"Run directory: {result.run_dir}")


@cli.command("eval")
@config_option
@set_option
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Defaults to checkpoint.bin in the configured output dir",
)
@_handle_errors
def eval_cmd(config: Optional[str], overrides: Sequence[str], checkpoint: Optional[str]):
    """Evaluate a checkpoint on the validation split."""
    from lowres_pose.training import CHECKPOINT_FILE, evaluate_checkpoint

    cfg = _load_config(config, overrides)
    path = checkpoint or str(Path(cfg.output_dir) / CHECKPOINT_FILE)
    result = evaluate_checkpoint(cfg, path)
    click.echo(json.dumps(result.model_dump(), indent=2))


@cli.command()
@config_option
@set_option
@click.option("--seeds", default="0,1,2", show_default=True, help="Comma-separated seeds")
@click.option("--out", "out_dir", default=None, help="Defaults to <output_dir>/convergence")
@click.option("--workers", type=click.IntRange(min=1), default=None)
@_handle_errors
def converge(
    config: Optional[str],
    overrides: Sequence[str],
    seeds: str,
    out_dir: Optional[str],
    workers: Optional[int],
):
    """Compare head/loss convergence across seeds."""
    from lowres_pose.training import run_convergence_experiment

    cfg = _load_config(config, overrides)
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    result = run_convergence_experiment(
        cfg,
        seed_list,
        out_dir=out_dir,
        workers=workers or settings.convergence_workers,
        ledger=get_db(),
    )
    for s in result.summaries:
        click.echo(
            f"{s.run:16s} median final AP {s.median_final_ap:.4f}  "
            f"median epochs to MSE AP {s.median_epochs_to_reach:g}"
        )
    click.echo(f"Curves and summary in {result.out_dir}")


@cli.command()
@click.option("--json", "as_json", is_flag=True, help="Emit records instead of tables")
@_handle_errors
def analyze(as_json: bool):
    """Parameter and FLOP tables of the LHR and deconvolution heads."""
    from lowres_pose.complexity import (
        backbone_comparison_report,
        budget_summary,
        render_budget,
        render_reports,
        report_records,
        resolution_ablation_report,
    )

    ablation = resolution_ablation_report()
    comparison = backbone_comparison_report()
    budget = budget_summary()

    db = get_db()
    run_id = db.start_run("analyze")
    db.log_event(run_id, "budget", budget.model_dump())
    db.finish_run(run_id)

    if as_json:
        doc = {
            "resolution_ablation": report_records(ablation),
            "backbone_comparison": report_records(comparison),
            "budget": budget.model_dump(),
        }
        click.echo(json.dumps(doc, indent=2))
        return
    click.echo("Regressor resolution ablation (ResNet-50, 256x192)")
    click.echo(render_reports(ablation))
    click.echo("\nBackbone and input-size comparison")
    click.echo(render_reports(comparison))
    click.echo("\nBudget")
    click.echo(render_budget(budget))


@cli.command()
@click.option("--group", type=click.Choice(["layers", "heads", "losses"]), default=None)
@click.option("--repeats", default=4, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@_handle_errors
def gradcheck(group: Optional[str], repeats: int, seed: int):
    """Compare analytic and numeric gradients of every layer, head and loss."""
    from lowres_pose.gradchecks import get_case_registry

    results = get_case_registry().run_all(repeats, seed, group)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "ok" if r.passed else "FAIL"
        click.echo(f"{status:4s} {r.name:28s} max rel err {r.max_error:.2e}")
    click.echo(f"{len(results) - len(failed)}/{len(results)} gradient checks passed")
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    cli()
