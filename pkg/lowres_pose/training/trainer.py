"""Deterministic training and evaluation of the toy pose network."""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lowres_pose.autodiff import Adam, Tensor, load_checkpoint, no_grad, save_checkpoint
from lowres_pose.autodiff.functional import sigmoid_array
from lowres_pose.data.augment import augment
from lowres_pose.data.dataset import ANNOTATIONS_FILE, load_annotations
from lowres_pose.data.images import to_float
from lowres_pose.errors import ConfigError, NonFiniteError, SchemaError, TrainingDivergedError
from lowres_pose.heatmaps import HeatmapSet, decode, flip_average, heatmap_targets
from lowres_pose.losses import compute_loss
from lowres_pose.metrics import evaluate
from lowres_pose.models import PoseNet
from lowres_pose.observability import get_tracer, set_span_attributes
from lowres_pose.schemas.pose import KeypointSchema, PoseInstance
from lowres_pose.schemas.results import EvalResult
from lowres_pose.schemas.training import TrainConfig
from lowres_pose.storage import Database

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.bin"
CONFIG_FILE = "config.json"
METRIC_COLUMNS = ["epoch", "loss", "ap", "ap50", "ap75", "pckh", "lr"]

# Seed-sequence stream of the per-epoch generator; 0 and 1 initialise the network.
EPOCH_STREAM = 2


@dataclass
class Split:
    """Pixels and the annotation of every sample of one dataset directory."""

    pixels: np.ndarray  # (S, H, W) uint8
    instances: List[PoseInstance]
    schema: KeypointSchema

    def __len__(self) -> int:
        return len(self.instances)


def _optional(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    ap: float
    ap50: Optional[float]
    ap75: Optional[float]
    pckh: float
    lr: float

    def as_row(self) -> List[str]:
        return [
            str(self.epoch),
            f"{self.loss:.6f}",
            f"{self.ap:.6f}",
            _optional(self.ap50),
            _optional(self.ap75),
            f"{self.pckh:.6f}",
            f"{self.lr:.6g}",
        ]


@dataclass
class TrainResult:
    run_dir: Path
    checkpoint_path: Path
    final: EvalResult
    history: List[EpochMetrics] = field(default_factory=list)
    run_id: Optional[str] = None

    @property
    def ap_curve(self) -> List[float]:
        return [m.ap for m in self.history]


def _dtype(config: TrainConfig):
    return np.float32 if config.precision == 32 else np.float64


def load_split(
    directory: str | Path, extent: Tuple[int, int], limit: Optional[int] = None
) -> Split:
    """Load every annotation of a dataset directory with its image pixels.

    Each annotation is one sample; images must match the configured extent.
    """
    dataset = load_annotations(Path(directory) / ANNOTATIONS_FILE)
    annotations = dataset.annotations[:limit] if limit else dataset.annotations
    if not annotations:
        raise SchemaError(f"No annotations in '{directory}'", section="annotations")
    records = dataset.image_by_id()
    pixels = []
    for i, inst in enumerate(annotations):
        record = records[inst.image_id]
        if (record.height, record.width) != tuple(extent):
            raise SchemaError(
                f"image is {record.height}x{record.width}, configured extent is {extent}", i
            )
        pixels.append(dataset.load_pixels(record))
    return Split(np.stack(pixels), list(annotations), dataset.keypoint_schema)


def _forward_maps(model: PoseNet, pixels: np.ndarray, config: TrainConfig) -> np.ndarray:
    x = Tensor(to_float(pixels, _dtype(config))[:, None], dtype=_dtype(config))
    out = model(x).data.astype(np.float64)
    return sigmoid_array(out) if config.loss.applies_sigmoid else out


def predict(
    model: PoseNet,
    pixels: np.ndarray,
    config: TrainConfig,
    schema: KeypointSchema,
) -> List[PoseInstance]:
    """Decoded poses of a (B, H, W) uint8 batch, flip-averaged if configured."""
    stride = config.heatmap_stride
    activated = bool(config.loss.applies_sigmoid)
    with no_grad():
        maps = _forward_maps(model, pixels, config)
        flipped = None
        if config.flip_test:
            flipped = _forward_maps(model, pixels[:, :, ::-1].copy(), config)
    poses = []
    for b in range(maps.shape[0]):
        heatmaps = HeatmapSet(maps[b], stride=stride, activated=activated)
        if flipped is not None:
            heatmaps = flip_average(
                heatmaps,
                HeatmapSet(flipped[b], stride=stride, activated=activated),
                schema.flip_pairs,
                shift=config.flip_shift,
            )
        poses.append(decode(heatmaps))
    return poses


def evaluate_model(model: PoseNet, split: Split, config: TrainConfig) -> EvalResult:
    """Predict every sample of a split and score against its annotations."""
    tracer = get_tracer(__name__)
    with tracer.start_as_current_span("train.evaluate") as span:
        predictions: List[PoseInstance] = []
        for start in range(0, len(split), config.batch_size):
            batch = slice(start, start + config.batch_size)
            poses = predict(model, split.pixels[batch], config, split.schema)
            for pose, gt in zip(poses, split.instances[batch]):
                predictions.append(pose.model_copy(update={"image_id": gt.image_id}))
        result = evaluate(predictions, split.instances, split.schema)
        set_span_attributes(span, {"ap": result.ap, "pckh": result.pckh_mean}, "eval.")
        return result


def _check_schema(config: TrainConfig, schema: KeypointSchema) -> None:
    if schema.num_keypoints != config.head.num_keypoints:
        raise ConfigError(
            f"Dataset has {schema.num_keypoints} keypoints, "
            f"head emits {config.head.num_keypoints}"
        )


def _train_epoch(
    model: PoseNet,
    optimizer: Adam,
    split: Split,
    config: TrainConfig,
    epoch: int,
) -> float:
    """One pass over the shuffled split; returns the sample-weighted mean loss."""
    rng = np.random.default_rng([config.seed, EPOCH_STREAM, epoch])
    dtype = _dtype(config)
    order = rng.permutation(len(split))
    total = 0.0
    for start in range(0, len(order), config.batch_size):
        images, targets = [], []
        for i in order[start : start + config.batch_size]:
            image, inst, _ = augment(
                split.pixels[i], split.instances[i], config.augment, rng, split.schema
            )
            images.append(image)
            targets.append(inst)
        x = Tensor(to_float(np.stack(images), dtype)[:, None], dtype=dtype)
        heatmaps = heatmap_targets(
            targets, config.heatmap_extent, config.target_sigma, config.heatmap_stride, dtype
        )
        optimizer.zero_grad()
        loss = compute_loss(config.loss, model(x), heatmaps)
        loss.backward()
        optimizer.step()
        total += float(loss.data) * len(images)
    return total / len(order)


def _write_metrics(path: Path, history: Sequence[EpochMetrics]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        writer.writerows(m.as_row() for m in history)


def train(config: TrainConfig, ledger: Optional[Database] = None) -> TrainResult:
    """Train, validating after every epoch; writes metrics.csv and checkpoint.bin.

    Runs with the same config produce identical metrics and checkpoint bytes.
    """
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_FILE).write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    run_id = None
    if ledger is not None:
        run_id = ledger.start_run("train", config.model_dump(mode="json"), config.seed)

    tracer = get_tracer(__name__)
    try:
        with tracer.start_as_current_span("train.run") as span:
            set_span_attributes(
                span,
                {
                    "run_id": run_id,
                    "seed": config.seed,
                    "head": config.head.kind.value,
                    "loss": config.loss.kind.value,
                    "epochs": config.epochs,
                },
                "train.",
            )
            result = _run(config, run_dir, ledger, run_id)
    except TrainingDivergedError as e:
        if ledger and run_id:
            ledger.finish_run(run_id, "diverged", str(e))
        raise
    except Exception as e:
        if ledger and run_id:
            ledger.finish_run(run_id, "failed", str(e))
        raise
    if ledger and run_id:
        ledger.finish_run(run_id)
    result.run_id = run_id
    return result


def _run(
    config: TrainConfig, run_dir: Path, ledger: Optional[Database], run_id: Optional[str]
) -> TrainResult:
    train_split = load_split(config.train_dir, config.input_extent, config.train_limit)
    val_split = load_split(config.val_dir, config.input_extent, config.val_limit)
    _check_schema(config, train_split.schema)
    _check_schema(config, val_split.schema)

    model = PoseNet.build(config.backbone, config.network_head, config.seed, _dtype(config))
    optimizer = Adam.from_named(
        model.named_parameters(),
        lr=config.base_lr,
        betas=config.adam_betas,
        eps=config.adam_eps,
    )
    tracer = get_tracer(__name__)
    history: List[EpochMetrics] = []
    metrics_path = run_dir / METRICS_FILE
    _write_metrics(metrics_path, history)
    logger.info(
        "Training %s head with %s loss on %d samples (%d val), %d epochs",
        config.head.kind.value,
        config.loss.kind.value,
        len(train_split),
        len(val_split),
        config.epochs,
    )

    result = None
    for epoch in range(config.epochs):
        with tracer.start_as_current_span("train.epoch") as span:
            optimizer.lr = config.lr_at(epoch)
            try:
                loss = _train_epoch(model, optimizer, train_split, config, epoch)
            except NonFiniteError as e:
                logger.error("Loss became non-finite at epoch %d: %s", epoch + 1, e)
                raise TrainingDivergedError(epoch + 1, str(e)) from e
            if not np.isfinite(loss):
                logger.error("Loss became non-finite at epoch %d", epoch + 1)
                raise TrainingDivergedError(epoch + 1)
            result = evaluate_model(model, val_split, config)
            metrics = EpochMetrics(
                epoch=epoch + 1,
                loss=loss,
                ap=result.ap,
                ap50=result.ap50,
                ap75=result.ap75,
                pckh=result.pckh_mean,
                lr=optimizer.lr,
            )
            history.append(metrics)
            _write_metrics(metrics_path, history)
            set_span_attributes(span, asdict(metrics), "train.")
            if ledger and run_id:
                ledger.log_event(run_id, "epoch", asdict(metrics))
            logger.info(
                "epoch %d/%d loss=%.5f AP=%.4f AP50=%s PCKh=%.4f lr=%.2g",
                epoch + 1,
                config.epochs,
                loss,
                result.ap,
                _optional(result.ap50),
                result.pckh_mean,
                optimizer.lr,
            )

    if result is None:
        result = evaluate_model(model, val_split, config)
    checkpoint_path = save_checkpoint(model.state_dict(), run_dir / CHECKPOINT_FILE)
    return TrainResult(run_dir, checkpoint_path, result, history)


def evaluate_checkpoint(config: TrainConfig, checkpoint: str | Path) -> EvalResult:
    """Score a saved checkpoint on the configured validation split."""
    split = load_split(config.val_dir, config.input_extent, config.val_limit)
    _check_schema(config, split.schema)
    model = PoseNet.build(config.backbone, config.network_head, config.seed, _dtype(config))
    model.load_state_dict(load_checkpoint(checkpoint))
    result = evaluate_model(model, split, config)
    logger.info("Checkpoint %s: AP=%.4f PCKh=%.4f", checkpoint, result.ap, result.pckh_mean)
    return result
