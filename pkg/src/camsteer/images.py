"""Image decoding with a small in-process cache."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from PIL import Image

from .errors import IngestError


@lru_cache(maxsize=2048)
def _decode(path: str, size: int, channels: int) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("L" if channels == 1 else "RGB")
            img = img.resize((size, size), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise IngestError(f"cannot decode image {path}: {exc}") from exc
    if channels == 1:
        arr = arr[None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)
    arr.flags.writeable = False
    return arr


def decode_image(path, size: int, channels: int = 1) -> np.ndarray:
    """Decode to float32 (channels, size, size) in [0, 1]."""
    return _decode(str(path), int(size), int(channels))


def clear_cache() -> None:
    _decode.cache_clear()
