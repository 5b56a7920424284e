"""Loss and head convergence comparison over several seeds."""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lowres_pose.errors import ConfigError
from lowres_pose.observability import get_tracer, set_span_attributes
from lowres_pose.schemas.specs import HeadKind, HeadSpec, LossKind, LossSpec
from lowres_pose.schemas.training import TrainConfig
from lowres_pose.storage import Database
from lowres_pose.training.trainer import train

logger = logging.getLogger(__name__)

CURVES_FILE = "curves.csv"
SUMMARY_FILE = "summary.csv"
REFERENCE_RUN = "lhr_mse"
DECONV_FILTERS = 64


def _lhr_head(base: TrainConfig) -> HeadSpec:
    return HeadSpec(
        kind=HeadKind.LHR,
        in_channels=base.backbone.out_channels,
        num_keypoints=base.head.num_keypoints,
        upsample_ratio=base.head.scale_factor,
        bias=base.head.bias,
    )


def _deconv_head(base: TrainConfig) -> HeadSpec:
    """Deconvolution head emitting heatmaps of the same extent as the LHR cells."""
    factor = base.head.scale_factor
    layers = int(round(math.log2(factor))) if factor > 1 else 0
    if 2**layers != factor or not 1 <= layers <= 3:
        raise ConfigError(f"No deconvolution head upsamples by {factor}; use 2, 4 or 8")
    return HeadSpec(
        kind=HeadKind.DECONV,
        in_channels=base.backbone.out_channels,
        num_keypoints=base.head.num_keypoints,
        filters=DECONV_FILTERS,
        kernel_size=4,
        layers=layers,
        bias=base.head.bias,
    )


def convergence_runs(base: TrainConfig) -> Dict[str, Tuple[HeadSpec, LossSpec]]:
    """The compared head/loss pairs; everything else comes from ``base``."""
    lhr = _lhr_head(base)
    return {
        REFERENCE_RUN: (lhr, LossSpec(kind=LossKind.MSE)),
        "lhr_focal_rce": (lhr, LossSpec.focal_default()),
        "lhr_ce_onehot": (lhr, LossSpec(kind=LossKind.CE_ONEHOT)),
        "lhr_ce_mask": (lhr, LossSpec(kind=LossKind.CE_MASK)),
        "deconv_mse": (_deconv_head(base), LossSpec(kind=LossKind.MSE)),
    }


def cell_config(
    base: TrainConfig, run: str, head: HeadSpec, loss: LossSpec, seed: int, out_dir: Path
) -> TrainConfig:
    data = base.model_dump(mode="json")
    data.update(
        head=head.model_dump(mode="json"),
        loss=loss.model_dump(mode="json"),
        seed=seed,
        output_dir=str(out_dir / f"{run}_seed{seed}"),
    )
    return TrainConfig.model_validate(data)


def _run_cell(config_json: str) -> Tuple[List[float], float]:
    """Train one cell; returns the per-epoch AP curve and the final AP."""
    result = train(TrainConfig.model_validate_json(config_json))
    return result.ap_curve, result.final.ap


def epochs_to_reach(curve: Sequence[float], reference: float) -> float:
    """First 1-based epoch whose AP reaches ``reference``; inf if none does."""
    for epoch, ap in enumerate(curve, start=1):
        if ap >= reference:
            return float(epoch)
    return math.inf


@dataclass
class ConvergenceSummary:
    run: str
    median_final_ap: float
    median_epochs_to_reach: float
    final_aps: List[float] = field(default_factory=list)
    epochs: List[float] = field(default_factory=list)


@dataclass
class ConvergenceResult:
    out_dir: Path
    curves: Dict[Tuple[str, int], List[float]]
    final_aps: Dict[Tuple[str, int], float]
    summaries: List[ConvergenceSummary]

    def summary(self, run: str) -> ConvergenceSummary:
        for s in self.summaries:
            if s.run == run:
                return s
        raise KeyError(run)


def _write_curves(path: Path, curves: Dict[Tuple[str, int], List[float]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["run", "seed", "epoch", "ap"])
        for (run, seed), curve in curves.items():
            for epoch, ap in enumerate(curve, start=1):
                writer.writerow([run, seed, epoch, f"{ap:.6f}"])


def _write_summary(path: Path, summaries: Sequence[ConvergenceSummary]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["run", "median_final_ap", "median_epochs_to_reach_mse_final_ap"])
        for s in summaries:
            writer.writerow([s.run, f"{s.median_final_ap:.6f}", f"{s.median_epochs_to_reach:g}"])


def run_convergence_experiment(
    base: TrainConfig,
    seeds: Sequence[int] = (0, 1, 2),
    out_dir: Optional[str | Path] = None,
    workers: int = 1,
    ledger: Optional[Database] = None,
) -> ConvergenceResult:
    """Train every head/loss pair for every seed and compare convergence.

    Cells share the base config and differ only in head and loss. For each
    seed the reference is the final AP of LHR with MSE; a run's speed is the
    first epoch at which it reaches that AP.
    """
    if not seeds:
        raise ConfigError("Convergence experiment needs at least one seed")
    out = Path(out_dir or Path(base.output_dir) / "convergence")
    out.mkdir(parents=True, exist_ok=True)
    runs = convergence_runs(base)
    cells = [(run, seed) for run in runs for seed in seeds]
    configs = [
        cell_config(base, run, *runs[run], seed=seed, out_dir=out).model_dump_json()
        for run, seed in cells
    ]
    run_id = None
    if ledger is not None:
        run_id = ledger.start_run(
            "converge", {"base": base.model_dump(mode="json"), "seeds": list(seeds)}
        )

    tracer = get_tracer(__name__)
    with tracer.start_as_current_span("converge.run") as span:
        set_span_attributes(span, {"cells": len(cells), "workers": workers}, "converge.")
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outputs = list(pool.map(_run_cell, configs))
        else:
            outputs = []
            for (run, seed), config_json in zip(cells, configs):
                with tracer.start_as_current_span("converge.cell") as cell_span:
                    set_span_attributes(cell_span, {"run": run, "seed": seed}, "converge.")
                    outputs.append(_run_cell(config_json))

    curves = {cell: curve for cell, (curve, _) in zip(cells, outputs)}
    finals = {cell: final for cell, (_, final) in zip(cells, outputs)}
    summaries = []
    for run in runs:
        final_aps = [finals[(run, s)] for s in seeds]
        epochs = [epochs_to_reach(curves[(run, s)], finals[(REFERENCE_RUN, s)]) for s in seeds]
        summaries.append(
            ConvergenceSummary(
                run=run,
                median_final_ap=float(np.median(final_aps)),
                median_epochs_to_reach=float(np.median(epochs)),
                final_aps=final_aps,
                epochs=epochs,
            )
        )
        logger.info(
            "%s: median final AP %.4f, median epochs to reach MSE %.1f",
            run,
            summaries[-1].median_final_ap,
            summaries[-1].median_epochs_to_reach,
        )

    _write_curves(out / CURVES_FILE, curves)
    _write_summary(out / SUMMARY_FILE, summaries)
    if ledger is not None and run_id:
        for s in summaries:
            ledger.log_event(
                run_id,
                "summary",
                {
                    "run": s.run,
                    "median_final_ap": s.median_final_ap,
                    "median_epochs": str(s.median_epochs_to_reach),
                },
            )
        ledger.finish_run(run_id)
    return ConvergenceResult(out, curves, finals, summaries)
