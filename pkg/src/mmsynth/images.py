"""PNG export and grid assembly helpers.

Images live in [-1, 1] as float32 (3, H, W) arrays throughout the package and
are quantized to [0, 255] with round-half-even only at export time.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [-1, 1] and quantize with round-half-even."""
    arr = np.clip(np.asarray(img, dtype=np.float32), -1.0, 1.0)
    return np.rint((arr + 1.0) * 127.5).astype(np.uint8)


def to_pil(img: np.ndarray) -> Image.Image:
    u8 = to_uint8(img)
    if u8.ndim != 3 or u8.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {u8.shape}")
    return Image.fromarray(u8.transpose(1, 2, 0), mode="RGB")


def save_png(img: np.ndarray, path) -> None:
    to_pil(img).save(path, format="PNG")


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    to_pil(img).save(buf, format="PNG")
    return buf.getvalue()


def tile_grid(cells) -> np.ndarray:
    """Assemble a list of rows (each a list of (3, R, R) arrays) into one image."""
    rows = [np.concatenate(list(row), axis=2) for row in cells]
    return np.concatenate(rows, axis=1)
