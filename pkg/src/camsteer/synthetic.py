"""Synthetic confounded image fixtures with a ground-truth oracle annotator.

Two labels over noisy grayscale images:

* ``texture`` (the target): a square patch of vertical stripes, deliberately
  subtle against the background noise.
* ``marker``: a bright disk, trivially salient.

In the train split the marker co-occurs with the texture label at a high
rate, so a lazily trained model can score well by attending to the disk.
Val and test splits break the correlation, exposing the shortcut. The
oracle annotator hands back the exact planted region for any (image, label),
standing in for an expert who knows where the real evidence is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .annotations import AttentionMask, PolygonAnnotation, rasterize
from .data import DatasetManifest, ImageRecord

TEXTURE, MARKER = 0, 1
LABEL_NAMES = ["texture", "marker"]


@dataclass
class PlantedRegion:
    x0: float
    y0: float
    x1: float
    y1: float

    def vertices(self):
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]


class OracleAnnotator:
    """Maps (image_id, label) to the planted ground-truth region."""

    def __init__(self, regions: dict[str, dict[int, PlantedRegion]]):
        self.regions = regions

    def has_region(self, image_id: str, label_index: int) -> bool:
        return label_index in self.regions.get(image_id, {})

    def annotation(self, image_id: str, label_index: int, round_index: int = 0) -> PolygonAnnotation:
        region = self.regions[image_id][label_index]
        return PolygonAnnotation.from_vertex_lists(
            image_id, label_index, [region.vertices()], round_index=round_index,
            note="oracle region",
        )

    def mask(self, image_id: str, label_index: int, resolution) -> AttentionMask:
        return rasterize(self.annotation(image_id, label_index), resolution)

    def save(self, path: str | Path) -> None:
        doc = {
            image_id: {str(c): [r.x0, r.y0, r.x1, r.y1] for c, r in per_label.items()}
            for image_id, per_label in self.regions.items()
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "OracleAnnotator":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({
            image_id: {int(c): PlantedRegion(*bbox) for c, bbox in per_label.items()}
            for image_id, per_label in doc.items()
        })


def _place(rng: np.random.RandomState, size: int, extent: int, avoid=None, tries: int = 50):
    """Top-left corner for an extent x extent box, avoiding a prior box."""
    for _ in range(tries):
        r = int(rng.randint(1, size - extent - 1))
        c = int(rng.randint(1, size - extent - 1))
        if avoid is None:
            return r, c
        ar, ac, aext = avoid
        if r + extent <= ar or ar + aext <= r or c + extent <= ac or ac + aext <= c:
            return r, c
    return r, c  # give up on disjointness; overlap is rare and harmless


def _stripe_patch(rng, extent: int, amplitude: float, horizontal: bool = False) -> np.ndarray:
    phase = rng.randint(0, 4)
    cols = np.arange(extent) + phase
    stripe = np.where((cols // 2) % 2 == 0, amplitude, -amplitude)
    patch = np.tile(stripe, (extent, 1))
    return patch.T if horizontal else patch


def make_confounded_dataset(
    root: str | Path,
    n_images: int = 500,
    size: int = 64,
    co_occurrence: float = 0.8,
    seed: int = 0,
    texture_prevalence: float = 0.25,
    marker_alone_rate: float = 0.25,
    texture_extent: int = 20,
    texture_amplitude: float = 0.14,
    hard_rate: float = 0.28,
    hard_amplitude: float = 0.075,
    marker_extent: int = 10,
    noise_std: float = 0.10,
    ratios: tuple[float, float, float] = (0.55, 0.1, 0.35),
) -> tuple[DatasetManifest, OracleAnnotator]:
    """Generate images + manifest with split-dependent label correlation.

    Train: P(marker | texture) = ``co_occurrence``, P(marker | no texture) =
    ``marker_alone_rate``. Val/test: both probabilities 0.5, and the texture
    label itself balanced, so shortcut models collapse toward chance there.

    Every image also carries a horizontal-stripe distractor patch of the
    same amplitude, so local texture energy is identical across classes;
    separating the classes genuinely requires stripe orientation, which is
    what the oracle's region annotations point at.

    A ``hard_rate`` fraction of texture positives get a patch at
    ``hard_amplitude`` (near the noise floor). Those stay ambiguous to any
    detector, so the marker keeps real predictive value on the biased train
    split no matter how long training runs; the bias cannot dissolve on its
    own and must be cut at the attention level.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.RandomState(seed)

    n_val = int(round(n_images * ratios[1]))
    n_test = int(round(n_images * ratios[2]))
    n_train = n_images - n_val - n_test

    def quota_flags(n: int, fraction: float) -> np.ndarray:
        flags = np.zeros(n, dtype=bool)
        flags[: int(round(n * fraction))] = True
        return rng.permutation(flags)

    def assign(n: int, texture_frac: float, co: float, alone: float):
        texture = quota_flags(n, texture_frac)
        marker = np.zeros(n, dtype=bool)
        pos = np.nonzero(texture)[0]
        neg = np.nonzero(~texture)[0]
        hard = np.zeros(n, dtype=bool)
        hard[rng.permutation(pos)[: int(round(len(pos) * hard_rate))]] = True
        marker[rng.permutation(pos)[: int(round(len(pos) * co))]] = True
        marker[rng.permutation(neg)[: int(round(len(neg) * alone))]] = True
        return texture, marker, hard

    # exact label quotas per split keep prevalences stable across seeds
    tex_tr, mark_tr, hard_tr = assign(n_train, texture_prevalence, co_occurrence,
                                      marker_alone_rate)
    tex_va, mark_va, hard_va = assign(n_val, 0.5, 0.5, 0.5)
    tex_te, mark_te, hard_te = assign(n_test, 0.5, 0.5, 0.5)

    items: list[ImageRecord] = []
    split: dict[str, str] = {}
    regions: dict[str, dict[int, PlantedRegion]] = {}

    for i in range(n_images):
        if i < n_train:
            split_name, j = "train", i
            has_texture, has_marker = tex_tr[j], mark_tr[j]
            is_hard = hard_tr[j]
        elif i < n_train + n_val:
            split_name, j = "val", i - n_train
            has_texture, has_marker = tex_va[j], mark_va[j]
            is_hard = hard_va[j]
        else:
            split_name, j = "test", i - n_train - n_val
            has_texture, has_marker = tex_te[j], mark_te[j]
            is_hard = hard_te[j]

        img = rng.normal(0.5, noise_std, size=(size, size))
        per_label: dict[int, PlantedRegion] = {}

        dr, dc = _place(rng, size, texture_extent)
        img[dr:dr + texture_extent, dc:dc + texture_extent] += _stripe_patch(
            rng, texture_extent, texture_amplitude, horizontal=True
        )
        distractor_box = (dr, dc, texture_extent)

        texture_box = None
        if has_texture:
            r, c = _place(rng, size, texture_extent, avoid=distractor_box)
            amp = hard_amplitude if is_hard else texture_amplitude
            img[r:r + texture_extent, c:c + texture_extent] += _stripe_patch(
                rng, texture_extent, amp
            )
            texture_box = (r, c, texture_extent)
            per_label[TEXTURE] = PlantedRegion(
                x0=c / size, y0=r / size, x1=(c + texture_extent) / size, y1=(r + texture_extent) / size
            )
        if has_marker:
            r, c = _place(rng, size, marker_extent, avoid=texture_box or distractor_box)
            yy, xx = np.ogrid[:marker_extent, :marker_extent]
            half = (marker_extent - 1) / 2
            disk = (yy - half) ** 2 + (xx - half) ** 2 <= half ** 2
            block = img[r:r + marker_extent, c:c + marker_extent]
            block[disk] = 0.95
            per_label[MARKER] = PlantedRegion(
                x0=c / size, y0=r / size, x1=(c + marker_extent) / size, y1=(r + marker_extent) / size
            )

        name = f"syn-{i:04d}.png"
        Image.fromarray((np.clip(img, 0, 1) * 255).astype(np.uint8), mode="L").save(root / name)
        items.append(ImageRecord(
            image_id=name, path=str(root / name),
            labels=np.array([int(has_texture), int(has_marker)]),
        ))
        split[name] = split_name
        if per_label:
            regions[name] = per_label

    manifest = DatasetManifest(
        dataset_id=f"confounded-{seed}",
        label_names=list(LABEL_NAMES),
        items=items,
        split=split,
        seed=seed,
        input_size=size,
    )
    return manifest, OracleAnnotator(regions)
