"""Dataset ingestion: manifests, label statistics, co-occurrence, splits.

A dataset is a directory of PNG/JPEG images plus a UTF-8 CSV label file.
The CSV carries a header row whose first column names the image and whose
remaining columns are the label vocabulary; every data cell is 0 or 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestError, LabelFileError

SPLITS = ("train", "val", "test")


@dataclass
class ImageRecord:
    image_id: str
    path: str
    labels: np.ndarray  # multi-hot, shape (K,), values in {0, 1}

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        bad = ~np.isin(self.labels, (0, 1))
        if bad.any():
            raise LabelFileError(
                f"labels for {self.image_id!r} contain non-binary values"
            )


@dataclass
class DatasetManifest:
    dataset_id: str
    label_names: list[str]
    items: list[ImageRecord]
    split: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    input_size: int = 224

    def __post_init__(self):
        if not self.label_names:
            raise IngestError("label vocabulary is empty")
        if len(set(self.label_names)) != len(self.label_names):
            raise IngestError("label names must be unique")
        if any(not name for name in self.label_names):
            raise IngestError("label names must be non-empty")
        k = len(self.label_names)
        ids = set()
        for rec in self.items:
            if rec.labels.shape != (k,):
                raise IngestError(
                    f"item {rec.image_id!r} has {rec.labels.shape[0]} labels, expected {k}"
                )
            if rec.image_id in ids:
                raise IngestError(f"duplicate image id {rec.image_id!r}")
            ids.add(rec.image_id)
        if self.split:
            unknown = set(self.split) - ids
            if unknown:
                raise IngestError(f"split references unknown ids: {sorted(unknown)[:3]}")
            missing = ids - set(self.split)
            if missing:
                raise IngestError(f"split is missing ids: {sorted(missing)[:3]}")
            bad = {s for s in self.split.values() if s not in SPLITS}
            if bad:
                raise IngestError(f"unknown split names: {sorted(bad)}")

    @property
    def num_labels(self) -> int:
        return len(self.label_names)

    def label_matrix(self) -> np.ndarray:
        """Items-by-labels multi-hot matrix, row order matching ``items``."""
        return np.stack([rec.labels for rec in self.items]) if self.items else np.zeros((0, self.num_labels), dtype=np.int64)

    def items_in_split(self, split: str) -> list[ImageRecord]:
        return [rec for rec in self.items if self.split.get(rec.image_id) == split]

    def get_item(self, image_id: str) -> ImageRecord:
        for rec in self.items:
            if rec.image_id == image_id:
                return rec
        raise KeyError(image_id)


@dataclass
class LabelStats:
    label_names: list[str]
    counts: np.ndarray       # per-label positive counts
    proportions: np.ndarray  # counts / total item count


@dataclass
class CoOccurrenceMatrix:
    label_names: list[str]
    M: np.ndarray  # K x K, symmetric, zero diagonal

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=np.int64)
        k = len(self.label_names)
        if self.M.shape != (k, k):
            raise ValueError(f"matrix shape {self.M.shape} does not match {k} labels")
        if (self.M < 0).any():
            raise ValueError("co-occurrence counts must be non-negative")
        if not np.array_equal(self.M, self.M.T):
            raise ValueError("co-occurrence matrix must be symmetric")
        if np.diagonal(self.M).any():
            raise ValueError("co-occurrence diagonal must be zero")


def load_dataset(root: str | Path, labels_file: str | Path, *, dataset_id: str | None = None,
                 input_size: int = 224) -> DatasetManifest:
    """Read a label CSV and build a manifest over the image directory.

    Every referenced image file must exist under ``root``; the manifest keeps
    items in file order and does not assign splits (see ``split_dataset``).
    """
    root = Path(root)
    labels_file = Path(labels_file)
    if not labels_file.exists():
        raise IngestError(f"label file not found: {labels_file}")

    with open(labels_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"label file is empty: {labels_file}") from None
        if len(header) < 2:
            raise IngestError("label file header must declare at least one label column")
        label_names = [h.strip() for h in header[1:]]

        items: list[ImageRecord] = []
        for row_idx, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise LabelFileError(
                    f"row {row_idx}: expected {len(header)} cells, got {len(row)}", row=row_idx
                )
            rel = row[0].strip()
            path = root / rel
            if not path.exists():
                raise IngestError(f"missing image file: {path}")
            labels = []
            for cell in row[1:]:
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise LabelFileError(
                        f"row {row_idx}: non-binary label cell {cell!r}", row=row_idx
                    )
                labels.append(int(cell))
            items.append(ImageRecord(image_id=rel, path=str(path), labels=np.array(labels)))

    return DatasetManifest(
        dataset_id=dataset_id or root.name,
        label_names=label_names,
        items=items,
        input_size=input_size,
    )


def compute_label_stats(manifest: DatasetManifest) -> LabelStats:
    if not manifest.items:
        raise ValueError("cannot compute label stats on an empty manifest")
    mat = manifest.label_matrix()
    counts = mat.sum(axis=0)
    return LabelStats(
        label_names=list(manifest.label_names),
        counts=counts,
        proportions=counts / len(manifest.items),
    )


def compute_cooccurrence(manifest: DatasetManifest) -> CoOccurrenceMatrix:
    """Count, for each label pair (i, j), the images carrying both labels."""
    if not manifest.items:
        raise ValueError("cannot compute co-occurrence on an empty manifest")
    mat = manifest.label_matrix()
    m = mat.T @ mat
    np.fill_diagonal(m, 0)
    return CoOccurrenceMatrix(label_names=list(manifest.label_names), M=m)


def split_dataset(manifest: DatasetManifest, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int = 0) -> DatasetManifest:
    """Assign train/val/test splits by seeded shuffle.

    Val and test sizes are the rounded shares of the total; the remainder
    goes to train. Deterministic for a given seed.
    """
    n = len(manifest.items)
    if n < 3:
        raise ValueError(f"need at least 3 items to split, got {n}")
    if any(r <= 0 for r in ratios):
        raise ValueError("all split ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    n_val = int(round(n * ratios[1]))
    n_test = int(round(n * ratios[2]))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split sizes {n_train}/{n_val}/{n_test} leave an empty split")

    rng = np.random.RandomState(seed)
    order = rng.permutation(n)
    split: dict[str, str] = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            name = "train"
        elif pos < n_train + n_val:
            name = "val"
        else:
            name = "test"
        split[manifest.items[idx].image_id] = name

    return DatasetManifest(
        dataset_id=manifest.dataset_id,
        label_names=list(manifest.label_names),
        items=list(manifest.items),
        split=split,
        seed=seed,
        input_size=manifest.input_size,
    )


def proportional_subsample(manifest: DatasetManifest, fraction: float, seed: int = 0) -> DatasetManifest:
    """Random subsample keeping roughly ``fraction`` of the items.

    Plain uniform sampling; approximately preserves label proportions on
    datasets large enough for the law of large numbers to bite.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n_keep = max(1, int(round(len(manifest.items) * fraction)))
    rng = np.random.RandomState(seed)
    keep = sorted(rng.choice(len(manifest.items), size=n_keep, replace=False))
    items = [manifest.items[i] for i in keep]
    kept_ids = {rec.image_id for rec in items}
    split = {k: v for k, v in manifest.split.items() if k in kept_ids}
    if set(split) != kept_ids:
        split = {}
    return DatasetManifest(
        dataset_id=f"{manifest.dataset_id}-sub{fraction:g}",
        label_names=list(manifest.label_names),
        items=items,
        split=split,
        seed=seed,
        input_size=manifest.input_size,
    )


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "dataset_id": manifest.dataset_id,
        "label_names": manifest.label_names,
        "items": [
            {"image_id": r.image_id, "path": r.path, "labels": r.labels.tolist()}
            for r in manifest.items
        ],
        "split": manifest.split,
        "seed": manifest.seed,
        "input_size": manifest.input_size,
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return DatasetManifest(
        dataset_id=doc["dataset_id"],
        label_names=doc["label_names"],
        items=[
            ImageRecord(image_id=d["image_id"], path=d["path"], labels=np.array(d["labels"]))
            for d in doc["items"]
        ],
        split=doc.get("split") or {},
        seed=doc.get("seed"),
        input_size=doc.get("input_size", 224),
    )
