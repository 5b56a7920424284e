"""Binary portable graymap IO."""

from pathlib import Path

import numpy as np
from PIL import Image

from lowres_pose.errors import SchemaError


def write_pgm(pixels: np.ndarray, path: str | Path) -> Path:
    """Write an (H, W) uint8 array as a binary PGM."""
    arr = np.asarray(pixels)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"Expected an (H, W) uint8 array, got {arr.shape} {arr.dtype}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PPM")
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    """(H, W) uint8 pixels of a graymap; colour pixmaps are converted to gray."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8).copy()
    except (OSError, ValueError) as e:
        raise SchemaError(f"Cannot read image '{path}': {e}", section="images") from e


def to_float(pixels: np.ndarray, dtype=np.float32) -> np.ndarray:
    return pixels.astype(dtype) / 255.0
