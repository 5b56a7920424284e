"""Keypoint accuracy: OKS-based average precision and PCKh."""

from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lowres_pose.schemas.pose import COCO_SIGMAS, KeypointSchema, PoseInstance
from lowres_pose.schemas.results import EvalResult

OKS_THRESHOLDS: Tuple[float, ...] = tuple(np.round(np.linspace(0.5, 0.95, 10), 2))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
PCKH_TAU = 0.5


def default_oks_constants(num_keypoints: int) -> np.ndarray:
    if num_keypoints != len(COCO_SIGMAS):
        raise ValueError(
            f"No default OKS constants for {num_keypoints} keypoints; pass them explicitly"
        )
    return 2.0 * np.asarray(COCO_SIGMAS)


def oks(pred: PoseInstance, gt: PoseInstance, k: Optional[np.ndarray] = None) -> float:
    """Object keypoint similarity, averaged over the labelled ground-truth keypoints."""
    if pred.num_keypoints != gt.num_keypoints:
        raise ValueError(f"{pred.num_keypoints} predicted vs {gt.num_keypoints} true keypoints")
    labeled = gt.labeled_mask()
    if not labeled.any():
        raise ValueError("Ground truth has no labelled keypoints")
    if gt.area <= 0:
        raise ValueError("Ground-truth area must be positive")
    k = default_oks_constants(gt.num_keypoints) if k is None else np.asarray(k, dtype=np.float64)
    d2 = np.sum((pred.coords() - gt.coords()) ** 2, axis=1)
    sim = np.exp(-d2 / (2.0 * gt.area * k**2))
    return float(sim[labeled].mean())


def _interpolated_precision(tp: np.ndarray, num_gt: int) -> Tuple[float, float]:
    """101-point interpolated precision and final recall of a ranked TP sequence."""
    if num_gt == 0 or tp.size == 0:
        return 0.0, 0.0
    tps = np.cumsum(tp, dtype=np.float64)
    fps = np.cumsum(~tp, dtype=np.float64)
    recall = tps / num_gt
    precision = tps / (tps + fps)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.where(idx < envelope.size, envelope[np.minimum(idx, envelope.size - 1)], 0.0)
    return float(q.mean()), float(recall[-1])


def _group(instances: Sequence[PoseInstance]) -> Dict[Optional[int], List[PoseInstance]]:
    groups: Dict[Optional[int], List[PoseInstance]] = defaultdict(list)
    for inst in instances:
        groups[inst.image_id].append(inst)
    return groups


def average_precision(
    predictions: Sequence[PoseInstance],
    ground_truths: Sequence[PoseInstance],
    k: Optional[np.ndarray] = None,
    thresholds: Sequence[float] = OKS_THRESHOLDS,
) -> Dict[str, object]:
    """AP and recall per OKS threshold.

    ``ap50`` and ``ap75`` are None when their threshold is not evaluated.

    Predictions and ground truths are grouped by ``image_id``. Within an image
    predictions are taken highest score first and each is matched to the
    unmatched ground truth of highest OKS, if that OKS reaches the threshold.
    """
    gts = _group([g for g in ground_truths if g.labeled_mask().any()])
    preds = _group(predictions)
    num_gt = sum(len(v) for v in gts.values())

    # OKS matrices per image, reused across thresholds
    ranked: List[Tuple[float, int, int, Optional[int]]] = []
    sims: Dict[Optional[int], np.ndarray] = {}
    for image_id, image_preds in preds.items():
        image_gts = gts.get(image_id, [])
        sims[image_id] = np.array(
            [[oks(p, g, k) for g in image_gts] for p in image_preds]
        ).reshape(len(image_preds), len(image_gts))
        for i, p in enumerate(image_preds):
            ranked.append((-(p.score or 0.0), len(ranked), i, image_id))
    ranked.sort(key=lambda item: (item[0], item[1]))

    ap_per_threshold: Dict[str, float] = {}
    recalls: List[float] = []
    for thr in thresholds:
        matched = {image_id: np.zeros(s.shape[1], dtype=bool) for image_id, s in sims.items()}
        tp = np.zeros(len(ranked), dtype=bool)
        for rank, (_, _, i, image_id) in enumerate(ranked):
            row = np.where(matched[image_id], -1.0, sims[image_id][i])
            if row.size == 0:
                continue
            best = int(np.argmax(row))
            if row[best] >= thr:
                matched[image_id][best] = True
                tp[rank] = True
        ap, rec = _interpolated_precision(tp, num_gt)
        ap_per_threshold[f"{thr:.2f}"] = ap
        recalls.append(rec)

    values = list(ap_per_threshold.values())
    return {
        "ap": float(np.mean(values)) if values else 0.0,
        "ap50": ap_per_threshold.get("0.50"),
        "ap75": ap_per_threshold.get("0.75"),
        "ar": float(np.mean(recalls)) if recalls else 0.0,
        "ap_per_threshold": ap_per_threshold,
    }


def pckh(
    pred: PoseInstance,
    gt: PoseInstance,
    head_size: Optional[float] = None,
    tau: float = PCKH_TAU,
) -> Tuple[np.ndarray, float]:
    """Per-keypoint correctness (distance <= tau * head size) and the labelled mean."""
    size = gt.head_size if head_size is None else head_size
    if size is None or size <= 0:
        raise ValueError(f"Head segment length must be positive, got {size}")
    dist = np.linalg.norm(pred.coords() - gt.coords(), axis=1)
    correct = dist <= tau * size
    labeled = gt.labeled_mask()
    mean = float(correct[labeled].mean()) if labeled.any() else 0.0
    return correct, mean


def evaluate(
    predictions: Sequence[PoseInstance],
    ground_truths: Sequence[PoseInstance],
    schema: Optional[KeypointSchema] = None,
    thresholds: Sequence[float] = OKS_THRESHOLDS,
    tau: float = PCKH_TAU,
) -> EvalResult:
    """AP summary plus PCKh of the top-scored prediction per ground truth image."""
    k = schema.oks_constants() if schema is not None else None
    summary = average_precision(predictions, ground_truths, k, thresholds)

    n = ground_truths[0].num_keypoints if ground_truths else 0
    hits = np.zeros(n)
    counts = np.zeros(n)
    best_pred: Dict[Optional[int], PoseInstance] = {}
    for p in predictions:
        current = best_pred.get(p.image_id)
        if current is None or (p.score or 0.0) > (current.score or 0.0):
            best_pred[p.image_id] = p
    for g in ground_truths:
        pred = best_pred.get(g.image_id)
        if g.head_size is None:
            continue
        labeled = g.labeled_mask()
        counts += labeled
        if pred is not None:
            correct, _ = pckh(pred, g, tau=tau)
            hits += correct & labeled
    per_keypoint = [float(h / c) if c else 0.0 for h, c in zip(hits, counts)]
    total = counts.sum()
    return EvalResult(
        ap=summary["ap"],
        ap50=summary["ap50"],
        ap75=summary["ap75"],
        ar=summary["ar"],
        pckh_per_keypoint=per_keypoint,
        pckh_mean=float(hits.sum() / total) if total else 0.0,
        ap_per_threshold=summary["ap_per_threshold"],
    )
