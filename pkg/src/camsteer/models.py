"""One-vs-rest multi-label classifier: backbones, training loop, prediction.

K independent sigmoid outputs over a shared trunk, trained by the mean of K
binary cross-entropies against the multi-hot truth. Backbones: a compact
CNN for desk-scale work plus torchvision DenseNet/ResNet variants.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import DatasetManifest, ImageRecord
from .errors import NonFiniteLossError, WorkbenchError
from .images import decode_image

PROB_EPS = 1e-7  # probability clamp before the log
BACKBONES = ("small_cnn", "densenet_like", "resnet_like")

# backbone name -> attribute holding the last convolutional feature layer
CAM_LAYERS = {
    "small_cnn": "cam_layer",
    "densenet_like": "features",
    "resnet_like": "layer4",
}


@dataclass
class ModelConfig:
    backbone: str = "small_cnn"
    num_labels: int = 2
    input_size: int = 224
    pretrained: bool = False

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}; choose from {BACKBONES}")
        if self.num_labels < 1:
            raise ValueError("num_labels must be >= 1")
        if self.input_size < 32:
            raise ValueError("input_size must be >= 32")

    @property
    def channels(self) -> int:
        return 1 if self.backbone == "small_cnn" else 3


@dataclass
class TrainingParams:
    batch_size: int = 4
    epochs: int = 30
    learning_rate: float = 1e-4
    seed: int = 0
    augmentation: bool = False
    replay_fraction: float = 0.5  # share of original train data mixed into fine-tune rounds

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.replay_fraction <= 1:
            raise ValueError("replay_fraction must be in [0, 1]")


@dataclass
class MultiLabelModel:
    module: nn.Module
    config: ModelConfig
    round_index: int = 0


@dataclass
class PredictionVector:
    probabilities: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")

    @property
    def binarized(self) -> np.ndarray:
        return (self.probabilities >= self.threshold).astype(np.int64)


class SmallCnn(nn.Module):
    """Three conv blocks, global average pool, linear head; < 5k parameters."""

    def __init__(self, num_labels: int, in_channels: int = 1):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 8, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(8, 12, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
        )
        self.cam_layer = nn.Sequential(nn.Conv2d(12, 16, 3, padding=1), nn.ReLU())
        self.head = nn.Linear(16, num_labels)

    def forward(self, x):
        a = self.cam_layer(self.stem(x))
        return self.head(a.mean(dim=(2, 3)))


def build_model(config: ModelConfig, seed: int = 0) -> MultiLabelModel:
    """Construct a backbone with a fresh K-logit head; deterministic per seed."""
    torch.manual_seed(seed)
    if config.backbone == "small_cnn":
        module = SmallCnn(config.num_labels, in_channels=config.channels)
    else:
        from torchvision import models as tv_models

        weights = "IMAGENET1K_V1" if config.pretrained else None
        try:
            if config.backbone == "densenet_like":
                module = tv_models.densenet121(weights=weights)
                module.classifier = nn.Linear(module.classifier.in_features, config.num_labels)
            else:
                module = tv_models.resnet18(weights=weights)
                module.fc = nn.Linear(module.fc.in_features, config.num_labels)
        except Exception as exc:
            if config.pretrained:
                raise WorkbenchError(
                    f"pretrained weights for {config.backbone} are unavailable "
                    f"(download failed: {exc}); pass pretrained=False for random init"
                ) from exc
            raise
    module.eval()
    return MultiLabelModel(module=module, config=config, round_index=0)


def resolve_cam_layer(model: MultiLabelModel) -> nn.Module:
    """Named last-convolutional layer for Grad-CAM, per-backbone registry."""
    attr = CAM_LAYERS.get(model.config.backbone)
    if attr is None or not hasattr(model.module, attr):
        raise WorkbenchError(
            f"backbone {model.config.backbone!r} has no registered convolutional layer"
        )
    return getattr(model.module, attr)


def bce_prediction_loss(probabilities, truth) -> float:
    """Mean of per-label binary cross-entropies, probabilities clamped away
    from 0/1 so the logs stay finite."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"probabilities shape {p.shape} != truth shape {y.shape}")
    p = np.clip(p, PROB_EPS, 1 - PROB_EPS)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def bce_loss_t(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Torch twin of ``bce_prediction_loss`` for the training graph."""
    p = torch.sigmoid(logits).clamp(PROB_EPS, 1 - PROB_EPS)
    return (-(targets * torch.log(p) + (1 - targets) * torch.log(1 - p))).mean()


def to_input_tensor(image, config: ModelConfig) -> torch.Tensor:
    """Decode / reshape / resize an image into a (1, C, H, W) float tensor."""
    if isinstance(image, (str, Path)):
        arr = decode_image(image, config.input_size, config.channels)
    else:
        arr = np.asarray(image, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        elif arr.ndim == 3 and arr.shape[2] in (1, 3):
            arr = arr.transpose(2, 0, 1)
        if arr.shape[0] == 1 and config.channels == 3:
            arr = np.repeat(arr, 3, axis=0)
        elif arr.shape[0] == 3 and config.channels == 1:
            arr = arr.mean(axis=0, keepdims=True)
    arr = np.array(arr, dtype=np.float32, copy=True)  # cached decodes are read-only
    x = torch.from_numpy(arr).unsqueeze(0)
    if x.shape[-2:] != (config.input_size, config.input_size):
        x = torch.nn.functional.interpolate(
            x, size=(config.input_size, config.input_size), mode="bilinear", align_corners=False
        )
    return x


def _load_item_tensors(items: list[ImageRecord], config: ModelConfig):
    images = np.stack([decode_image(rec.path, config.input_size, config.channels) for rec in items])
    images = np.ascontiguousarray(images)  # stack copies, so tensors are writable
    truths = np.stack([rec.labels for rec in items]).astype(np.float32)
    return torch.from_numpy(images), torch.from_numpy(truths)


def _augment(x: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
    """Horizontal flip, small rotation (max 10 degrees), brightness jitter."""
    if torch.rand(1, generator=gen).item() < 0.5:
        x = torch.flip(x, dims=[-1])
    angle = (torch.rand(1, generator=gen).item() * 2 - 1) * 10 * torch.pi / 180
    cos, sin = float(np.cos(angle)), float(np.sin(angle))
    theta = torch.tensor([[[cos, -sin, 0.0], [sin, cos, 0.0]]], dtype=x.dtype).expand(x.shape[0], 2, 3)
    grid = torch.nn.functional.affine_grid(theta, list(x.shape), align_corners=False)
    x = torch.nn.functional.grid_sample(x, grid, align_corners=False, padding_mode="border")
    scale = 1.0 + (torch.rand(1, generator=gen).item() * 2 - 1) * 0.1
    return (x * scale).clamp(0.0, 1.0)


def train(model: MultiLabelModel, manifest: DatasetManifest, params: TrainingParams,
          progress_sink=None) -> MultiLabelModel:
    """Train on the manifest's train split; the input model is left untouched.

    ``progress_sink(epoch_index, mean_loss)`` is called once per epoch.
    """
    items = manifest.items_in_split("train")
    if not items:
        raise ValueError("manifest has no train split; call split_dataset first")

    torch.manual_seed(params.seed)
    module = copy.deepcopy(model.module)
    module.train()
    images, truths = _load_item_tensors(items, model.config)
    optimizer = torch.optim.Adam(module.parameters(), lr=params.learning_rate)
    gen = torch.Generator().manual_seed(params.seed)

    n = len(items)
    for epoch in range(params.epochs):
        order = torch.randperm(n, generator=gen)
        losses = []
        for b, start in enumerate(range(0, n, params.batch_size)):
            idx = order[start:start + params.batch_size]
            x = images[idx]
            if params.augmentation:
                x = _augment(x, gen)
            logits = module(x)
            loss = bce_loss_t(logits, truths[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite training loss at epoch {epoch}, batch {b}", epoch=epoch, batch=b
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        if progress_sink is not None:
            progress_sink(epoch, float(np.mean(losses)))

    module.eval()
    return MultiLabelModel(module=module, config=model.config, round_index=model.round_index)


def predict(model: MultiLabelModel, image, threshold: float = 0.5) -> PredictionVector:
    """Sigmoid probabilities for one image; deterministic in eval mode."""
    model.module.eval()
    x = to_input_tensor(image, model.config)
    with torch.no_grad():
        probs = torch.sigmoid(model.module(x))[0].numpy()
    return PredictionVector(probabilities=probs.astype(np.float64), threshold=threshold)


def predict_dataset(model: MultiLabelModel, manifest: DatasetManifest, split: str = "test",
                    batch_size: int = 32):
    """Batched inference over a split: (probabilities NxK, truths NxK)."""
    items = manifest.items_in_split(split)
    if not items:
        raise ValueError(f"manifest has no {split!r} split")
    model.module.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(items), batch_size):
            images, _ = _load_item_tensors(items[start:start + batch_size], model.config)
            chunks.append(torch.sigmoid(model.module(images)).numpy())
    probs = np.concatenate(chunks).astype(np.float64)
    truths = np.stack([rec.labels for rec in items])
    return probs, truths


def save_checkpoint(model: MultiLabelModel, directory: str | Path,
                    params: TrainingParams | None = None, parent: str | None = None) -> Path:
    """Write weights + a metadata record into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.module.state_dict(), directory / "weights.pt")
    meta = {
        "config": asdict(model.config),
        "round_index": model.round_index,
        "parent": parent,
        "params": asdict(params) if params else None,
    }
    (directory / "checkpoint.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return directory


def load_checkpoint(directory: str | Path) -> MultiLabelModel:
    directory = Path(directory)
    meta = json.loads((directory / "checkpoint.json").read_text(encoding="utf-8"))
    config = ModelConfig(**meta["config"])
    # saved weights replace any init, so never re-download pretrained ones
    scaffold = build_model(ModelConfig(**{**asdict(config), "pretrained": False}))
    state = torch.load(directory / "weights.pt", weights_only=True)
    scaffold.module.load_state_dict(state)
    scaffold.module.eval()
    return MultiLabelModel(module=scaffold.module, config=config, round_index=meta["round_index"])
