"""Grad-CAM heatmaps from the last convolutional layer.

The raw map is ReLU of the feature maps weighted by the spatial mean of the
target logit's gradient; values are per-heatmap min-max normalized so maps
from different images are comparable. A constant raw map normalizes to all
zeros and is flagged degenerate instead of erroring (dead labels early in
training produce these routinely).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import torch

from .models import MultiLabelModel, resolve_cam_layer, to_input_tensor


@dataclass
class Heatmap:
    values: np.ndarray  # min-max normalized to [0, 1], native CAM resolution
    raw: np.ndarray     # non-negative, same resolution
    image_id: str = ""
    label_index: int = 0
    round_index: int = 0
    degenerate: bool = False


def normalize_heatmap(raw) -> tuple[np.ndarray, bool]:
    """(x - min) / (max - min); a constant map returns zeros flagged degenerate."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(raw).all():
        raise ValueError("heatmap contains non-finite entries")
    lo = raw.min()
    hi = raw.max()
    if hi == lo:
        return np.zeros_like(raw), True
    return (raw - lo) / (hi - lo), False


@contextmanager
def _capture_features(layer):
    captured = {}

    def hook(_module, _inputs, output):
        captured["features"] = output

    handle = layer.register_forward_hook(hook)
    try:
        yield captured
    finally:
        handle.remove()


def forward_with_features(model: MultiLabelModel, x: torch.Tensor):
    """One forward pass returning (logits, feature maps of the CAM layer)."""
    layer = resolve_cam_layer(model)
    with _capture_features(layer) as captured:
        logits = model.module(x)
    return logits, captured["features"]


def cam_raw_batch(logits: torch.Tensor, features: torch.Tensor, label_index: int,
                  rows: torch.Tensor | None = None, create_graph: bool = False) -> torch.Tensor:
    """Differentiable raw CAM for a batch: relu(sum_k alpha_k * A_k).

    ``alpha_k`` is the spatial mean of d logit[label] / d A_k. With
    ``create_graph=True`` the result participates in further
    differentiation, so a loss on the CAM trains the model end to end.
    """
    target = logits[:, label_index] if rows is None else logits[rows, label_index]
    grads = torch.autograd.grad(target.sum(), features, create_graph=create_graph)[0]
    if rows is not None:
        grads = grads[rows]
        features = features[rows]
    alpha = grads.mean(dim=(2, 3), keepdim=True)
    return torch.relu((alpha * features).sum(dim=1))


def minmax_normalize_t(raw: torch.Tensor) -> torch.Tensor:
    """Per-item min-max normalization of a (B, h, w) batch, degenerate-safe."""
    flat = raw.flatten(1)
    lo = flat.min(dim=1).values[:, None, None]
    hi = flat.max(dim=1).values[:, None, None]
    span = hi - lo
    safe = torch.where(span > 0, span, torch.ones_like(span))
    return torch.where(span > 0, (raw - lo) / safe, torch.zeros_like(raw))


def grad_cam(model: MultiLabelModel, image, label_index: int, *, image_id: str = "",
             round_index: int | None = None) -> Heatmap:
    """Heatmap of the regions driving ``label_index``'s logit for one image."""
    if not 0 <= label_index < model.config.num_labels:
        raise ValueError(
            f"label index {label_index} out of range for {model.config.num_labels} labels"
        )
    model.module.eval()
    x = to_input_tensor(image, model.config)
    logits, features = forward_with_features(model, x)
    raw_t = cam_raw_batch(logits, features, label_index)
    raw = raw_t[0].detach().numpy().astype(np.float64)
    values, degenerate = normalize_heatmap(raw)
    return Heatmap(
        values=values,
        raw=raw,
        image_id=image_id,
        label_index=label_index,
        round_index=model.round_index if round_index is None else round_index,
        degenerate=degenerate,
    )


def cam_resolution(model: MultiLabelModel) -> tuple[int, int]:
    """Native spatial size of the CAM layer at the configured input size."""
    x = torch.zeros(1, model.config.channels, model.config.input_size, model.config.input_size)
    with torch.no_grad():
        _, features = forward_with_features(model, x)
    return int(features.shape[2]), int(features.shape[3])


def _jet(values: np.ndarray) -> np.ndarray:
    """Minimal jet-style colormap: (H, W) in [0,1] -> (H, W, 3) in [0,1]."""
    v = np.clip(values, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4 * v - 3), 0, 1)
    g = np.clip(1.5 - np.abs(4 * v - 2), 0, 1)
    b = np.clip(1.5 - np.abs(4 * v - 1), 0, 1)
    return np.stack([r, g, b], axis=-1)


def upsample(values: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear upsample of a heatmap to display resolution."""
    t = torch.from_numpy(np.asarray(values, dtype=np.float32))[None, None]
    out = torch.nn.functional.interpolate(t, size=size, mode="bilinear", align_corners=False)
    return out[0, 0].numpy().astype(np.float64)


def render_overlay(image, heatmap: Heatmap, alpha: float = 0.5,
                   display_size: int | None = None) -> np.ndarray:
    """Color-mapped heatmap alpha-blended over the image; returns uint8 RGB.

    Blend weight scales with the heatmap value, so zero-attention pixels
    reproduce the input exactly.
    """
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    elif img.ndim == 3 and img.shape[0] in (1, 3) and img.shape[2] not in (1, 3):
        img = img.transpose(1, 2, 0)
        if img.shape[2] == 1:
            img = np.repeat(img, 3, axis=2)

    if display_size is not None and img.shape[:2] != (display_size, display_size):
        t = torch.from_numpy(img.transpose(2, 0, 1).astype(np.float32))[None]
        t = torch.nn.functional.interpolate(t, size=(display_size, display_size),
                                            mode="bilinear", align_corners=False)
        img = t[0].numpy().transpose(1, 2, 0).astype(np.float64)

    values = heatmap.values if isinstance(heatmap, Heatmap) else np.asarray(heatmap, dtype=np.float64)
    if values.shape != img.shape[:2]:
        values = upsample(values, img.shape[:2])

    weight = alpha * values[..., None]
    out = img * (1 - weight) + _jet(values) * weight
    return np.rint(np.clip(out, 0, 1) * 255).astype(np.uint8)
