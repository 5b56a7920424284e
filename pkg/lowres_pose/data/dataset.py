"""Dataset records and the JSON annotation layout.

The file follows the benchmark keypoint subset::

    {"images": [{"id", "file_name", "width", "height"}],
     "annotations": [{"id", "image_id", "category_id", "keypoints": [x, y, v, ...],
                      "num_keypoints", "bbox": [x, y, w, h], "area", "head_size"?}],
     "categories": [{"id", "name", "keypoints": [...], "skeleton": [...],
                     "flip_pairs": [...], "sigmas": [...]}]}

A file without categories is read with the 17-keypoint benchmark schema.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from lowres_pose.data.images import read_pgm
from lowres_pose.errors import SchemaError
from lowres_pose.schemas.pose import KeypointSchema, PoseInstance, coco_schema

logger = logging.getLogger(__name__)

ANNOTATIONS_FILE = "annotations.json"
PERSON_CATEGORY = 1


class ImageRecord(BaseModel):
    id: int
    file_name: str
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)


class Dataset(BaseModel):
    """Images, one PoseInstance per annotation, and the keypoint schema."""

    images: List[ImageRecord] = Field(default_factory=list)
    annotations: List[PoseInstance] = Field(default_factory=list)
    keypoint_schema: KeypointSchema = Field(default_factory=coco_schema)
    root: Optional[str] = None

    def image_by_id(self) -> Dict[int, ImageRecord]:
        return {img.id: img for img in self.images}

    def image_path(self, record: ImageRecord) -> Path:
        return Path(self.root or ".") / record.file_name

    def load_pixels(self, record: ImageRecord) -> np.ndarray:
        pixels = read_pgm(self.image_path(record))
        if pixels.shape != (record.height, record.width):
            raise SchemaError(
                f"'{record.file_name}' is {pixels.shape[1]}x{pixels.shape[0]}, "
                f"expected {record.width}x{record.height}",
                record.id,
                "images",
            )
        return pixels

    def __len__(self) -> int:
        return len(self.annotations)


def _schema_from_categories(categories: List[Dict[str, Any]]) -> KeypointSchema:
    if not categories:
        return coco_schema()
    cat = categories[0]
    try:
        return KeypointSchema(
            names=cat["keypoints"],
            flip_pairs=[tuple(p) for p in cat.get("flip_pairs", [])],
            sigmas=cat.get("sigmas", []),
            skeleton=[tuple(e) for e in cat.get("skeleton", [])],
        )
    except (KeyError, TypeError, ValidationError) as e:
        raise SchemaError(f"Invalid keypoint category: {e}", 0, "categories") from e


def _parse_annotation(i: int, ann: Dict[str, Any], n: int) -> PoseInstance:
    if not isinstance(ann, dict):
        raise SchemaError("annotation must be an object", i)
    for key in ("image_id", "keypoints"):
        if key not in ann:
            raise SchemaError(f"missing '{key}'", i)
    flat = ann["keypoints"]
    if not isinstance(flat, list) or len(flat) != 3 * n:
        count = len(flat) if isinstance(flat, list) else type(flat).__name__
        raise SchemaError(f"expected {3 * n} keypoint numbers, got {count}", i)
    try:
        triples = np.asarray(flat, dtype=np.float64).reshape(n, 3)
        return PoseInstance(
            keypoints=[(float(x), float(y)) for x, y in triples[:, :2]],
            visibility=[int(v) for v in flat[2::3]],
            bbox=tuple(ann.get("bbox", (0.0, 0.0, 0.0, 0.0))),
            area=float(ann.get("area", 0.0)),
            head_size=ann.get("head_size"),
            image_id=int(ann["image_id"]),
        )
    except (TypeError, ValueError, ValidationError) as e:
        raise SchemaError(f"invalid annotation: {e}", i) from e


def load_annotations(path: str | Path) -> Dataset:
    """Read and validate an annotation file; image paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"Cannot read annotations '{path}': {e}", section="file") from e
    if not isinstance(raw, dict):
        raise SchemaError("Annotation file must hold a JSON object", section="file")

    schema = _schema_from_categories(raw.get("categories", []))
    images = []
    for i, img in enumerate(raw.get("images", [])):
        try:
            images.append(ImageRecord.model_validate(img))
        except ValidationError as e:
            raise SchemaError(f"invalid image record: {e}", i, "images") from e
    ids = {img.id for img in images}
    if len(ids) != len(images):
        raise SchemaError("duplicate image ids", section="images")

    annotations = []
    for i, ann in enumerate(raw.get("annotations", [])):
        inst = _parse_annotation(i, ann, schema.num_keypoints)
        if inst.image_id not in ids:
            raise SchemaError(f"references missing image {inst.image_id}", i)
        annotations.append(inst)

    logger.debug(
        "Loaded %d annotations over %d images from %s", len(annotations), len(images), path
    )
    return Dataset(
        images=images, annotations=annotations, keypoint_schema=schema, root=str(path.parent)
    )


def annotation_record(ann_id: int, inst: PoseInstance) -> Dict[str, Any]:
    flat: List[float | int] = []
    for (x, y), v in zip(inst.keypoints, inst.visibility):
        flat += [x, y, v]
    record: Dict[str, Any] = {
        "id": ann_id,
        "image_id": inst.image_id,
        "category_id": PERSON_CATEGORY,
        "keypoints": flat,
        "num_keypoints": int(sum(1 for v in inst.visibility if v > 0)),
        "bbox": list(inst.bbox),
        "area": inst.area,
    }
    if inst.head_size is not None:
        record["head_size"] = inst.head_size
    return record


def save_annotations(dataset: Dataset, path: str | Path) -> Path:
    """Write the dataset in the annotation layout; output is deterministic."""
    ids = {img.id for img in dataset.images}
    for i, inst in enumerate(dataset.annotations):
        if inst.image_id not in ids:
            raise SchemaError(f"references missing image {inst.image_id}", i)
    schema = dataset.keypoint_schema
    doc = {
        "images": [img.model_dump() for img in dataset.images],
        "annotations": [annotation_record(i + 1, a) for i, a in enumerate(dataset.annotations)],
        "categories": [
            {
                "id": PERSON_CATEGORY,
                "name": "person",
                "keypoints": schema.names,
                "skeleton": [list(e) for e in schema.skeleton],
                "flip_pairs": [list(p) for p in schema.flip_pairs],
                "sigmas": schema.sigmas,
            }
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path
