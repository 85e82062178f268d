"""Fine-tuning with the dynamically weighted prediction + attention loss.

The prediction term is the usual mean-BCE. The attention term, per
annotated label, is the mean squared error between the model's normalized
Grad-CAM map and the expert mask, weighted inversely to the label's
frequency so rare labels get a stronger steering signal. Gradients flow
through the CAM itself (a second-order path), which is what moves the
model's attention rather than just its logits.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from .annotations import AttentionMask
from .data import LabelStats
from .errors import NonFiniteLossError
from .gradcam import Heatmap, cam_raw_batch, forward_with_features, grad_cam, minmax_normalize_t
from .models import (
    MultiLabelModel,
    TrainingParams,
    bce_loss_t,
    bce_prediction_loss,
    predict,
    to_input_tensor,
)


@dataclass
class LossWeights:
    base_weight: float
    per_label: np.ndarray  # lambda per label; NaN where the label has no positives

    def weight_for(self, label_index: int) -> float:
        w = float(self.per_label[label_index])
        if np.isnan(w):
            raise ValueError(
                f"label {label_index} has no positive examples; its attention weight is undefined"
            )
        return w


def dynamic_weights(stats: LabelStats, base_weight: float = 1.0,
                    annotated_labels=None) -> LossWeights:
    """lambda_c = base * count_max / count_c: rarer labels weigh more."""
    if base_weight <= 0:
        raise ValueError("base_weight must be positive")
    counts = np.asarray(stats.counts, dtype=np.float64)
    count_max = counts.max()
    if count_max <= 0:
        raise ValueError("no label has positive examples")
    if annotated_labels is not None:
        for c in annotated_labels:
            if counts[c] == 0:
                raise ValueError(
                    f"label {c} ({stats.label_names[c]}) is annotated but never positive; "
                    "it cannot be learned"
                )
    with np.errstate(divide="ignore"):
        per = base_weight * count_max / counts
    per[counts == 0] = np.nan
    return LossWeights(base_weight=base_weight, per_label=per)


@dataclass
class FineTuneItem:
    image: object                      # path or decoded array
    truth: np.ndarray                  # multi-hot, length K
    masks: dict[int, AttentionMask] = field(default_factory=dict)
    image_id: str = ""


@dataclass
class FineTuneBatch:
    items: list[FineTuneItem]

    def annotated_labels(self) -> set[int]:
        out: set[int] = set()
        for item in self.items:
            out.update(item.masks)
        return out


def attention_loss(heatmap, mask) -> float:
    """Mean squared error between heatmap values and the mask, cell by cell."""
    values = heatmap.values if isinstance(heatmap, Heatmap) else np.asarray(heatmap, dtype=np.float64)
    m = mask.mask if isinstance(mask, AttentionMask) else np.asarray(mask, dtype=np.float64)
    if values.shape != m.shape:
        raise ValueError(
            f"heatmap resolution {values.shape} does not match mask resolution {m.shape}; "
            "rasterize the annotation at the model's native CAM resolution"
        )
    return float(np.mean((values - m) ** 2))


def joint_loss(model: MultiLabelModel, item: FineTuneItem, weights: LossWeights) -> float:
    """Prediction loss plus weighted attention losses for one item.

    With no masks this reduces to ``bce_prediction_loss`` exactly.
    """
    probs = predict(model, item.image).probabilities
    total = bce_prediction_loss(probs, item.truth)
    for c in sorted(item.masks):
        lam = weights.weight_for(c)
        heatmap = grad_cam(model, item.image, c)
        total = total + lam * attention_loss(heatmap, item.masks[c])
    return total


def _validate_batch(batch: FineTuneBatch, weights: LossWeights, cam_hw: tuple[int, int]):
    if not batch.items:
        raise ValueError("fine-tune batch is empty")
    for item in batch.items:
        for c, mask in item.masks.items():
            weights.weight_for(c)  # raises for unlearnable labels
            if mask.empty:
                raise ValueError(
                    f"all-zero attention mask for image {item.image_id!r} label {c}"
                )
            if tuple(mask.mask.shape) != cam_hw:
                raise ValueError(
                    f"mask for image {item.image_id!r} label {c} has resolution "
                    f"{mask.mask.shape}, expected CAM resolution {cam_hw}"
                )


def batch_joint_loss_t(model: MultiLabelModel, items: list[FineTuneItem],
                       weights: LossWeights, x: torch.Tensor,
                       y: torch.Tensor) -> torch.Tensor:
    """Differentiable mean joint loss over a minibatch.

    Per item: BCE + sum over its annotated labels of lambda_c * MSE(cam, mask).
    CAM gradients are taken with ``create_graph`` so the optimizer step sees
    the attention term.
    """
    needs_cam = any(item.masks for item in items)
    if not needs_cam:
        logits = model.module(x)
        return bce_loss_t(logits, y)

    logits, features = forward_with_features(model, x)
    total = bce_loss_t(logits, y)
    by_label: dict[int, list[int]] = {}
    for i, item in enumerate(items):
        for c in item.masks:
            by_label.setdefault(c, []).append(i)
    for c in sorted(by_label):
        rows = torch.tensor(by_label[c], dtype=torch.long)
        raw = cam_raw_batch(logits, features, c, rows=rows, create_graph=True)
        values = minmax_normalize_t(raw)
        masks = torch.stack([
            torch.as_tensor(items[i].masks[c].mask, dtype=values.dtype) for i in by_label[c]
        ])
        per_item_mse = ((values - masks) ** 2).mean(dim=(1, 2))
        total = total + weights.weight_for(c) * per_item_mse.sum() / len(items)
    return total


def finetune_round(model: MultiLabelModel, batch: FineTuneBatch, weights: LossWeights,
                   params: TrainingParams, progress_sink=None) -> MultiLabelModel:
    """One observe-annotate-retrain round; returns a new model with
    ``round_index`` advanced, leaving the parent untouched."""
    from .gradcam import cam_resolution

    _validate_batch(batch, weights, cam_resolution(model))

    torch.manual_seed(params.seed)
    module = copy.deepcopy(model.module)
    working = MultiLabelModel(module=module, config=model.config, round_index=model.round_index)
    module.train()

    images = torch.cat([to_input_tensor(item.image, model.config) for item in batch.items])
    truths = torch.from_numpy(np.stack([item.truth for item in batch.items]).astype(np.float32))
    optimizer = torch.optim.Adam(module.parameters(), lr=params.learning_rate)
    gen = torch.Generator().manual_seed(params.seed)

    n = len(batch.items)
    for epoch in range(params.epochs):
        order = torch.randperm(n, generator=gen)
        losses = []
        for b, start in enumerate(range(0, n, params.batch_size)):
            idx = order[start:start + params.batch_size].tolist()
            loss = batch_joint_loss_t(
                working,
                [batch.items[i] for i in idx],
                weights,
                images[idx],
                truths[idx],
            )
            if not torch.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite joint loss at epoch {epoch}, batch {b}", epoch=epoch, batch=b
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        if progress_sink is not None:
            progress_sink(epoch, float(np.mean(losses)))

    module.eval()
    return MultiLabelModel(module=module, config=model.config, round_index=model.round_index + 1)
