import numpy as np
import pytest
from PIL import Image

from camsteer.data import CoOccurrenceMatrix, DatasetManifest, ImageRecord, split_dataset

# Ear-endoscopy co-occurrence fixture (7 labels). Pairwise counts double as
# a ground-truth construction recipe: one two-label image per counted pair.
EAR_LABELS = ["OME", "EOF", "OE", "EOM", "FOE", "CE", "TMP"]
EAR_MATRIX = np.array(
    [
        [0, 0, 10, 0, 0, 0, 0],
        [0, 0, 41, 0, 0, 26, 8],
        [10, 41, 0, 5, 9, 28, 8],
        [0, 0, 5, 0, 0, 6, 0],
        [0, 0, 9, 0, 0, 75, 0],
        [0, 26, 28, 6, 75, 0, 5],
        [0, 8, 8, 0, 0, 5, 0],
    ],
    dtype=np.int64,
)


@pytest.fixture
def ear_cooccurrence() -> CoOccurrenceMatrix:
    return CoOccurrenceMatrix(label_names=list(EAR_LABELS), M=EAR_MATRIX.copy())


@pytest.fixture
def ear_manifest() -> DatasetManifest:
    """Synthetic manifest whose pairwise co-occurrence equals EAR_MATRIX exactly.

    Every image carries exactly the two labels of one counted pair, so the
    brute-force pair counts reproduce the matrix; a few single-label items are
    appended so every label also has standalone positives.
    """
    k = len(EAR_LABELS)
    items = []
    idx = 0
    for i in range(k):
        for j in range(i + 1, k):
            for _ in range(int(EAR_MATRIX[i, j])):
                labels = np.zeros(k, dtype=np.int64)
                labels[i] = labels[j] = 1
                items.append(ImageRecord(image_id=f"pair-{idx:04d}", path=f"pair-{idx:04d}.png", labels=labels))
                idx += 1
    for i in range(k):
        labels = np.zeros(k, dtype=np.int64)
        labels[i] = 1
        items.append(ImageRecord(image_id=f"solo-{i}", path=f"solo-{i}.png", labels=labels))
    return DatasetManifest(dataset_id="ear-fixture", label_names=list(EAR_LABELS), items=items)


def make_separable_dataset(root, n=120, size=32, seed=0):
    """Two-label image set with unmistakable per-label signals.

    Label 0 positives carry a bright square top-left; label 1 positives a
    bright square bottom-right. Backgrounds are mild noise.
    """
    rng = np.random.RandomState(seed)
    root.mkdir(parents=True, exist_ok=True)
    items = []
    for i in range(n):
        y0, y1 = rng.randint(0, 2), rng.randint(0, 2)
        img = rng.uniform(0.2, 0.45, size=(size, size))
        if y0:
            img[2:10, 2:10] = 0.95
        if y1:
            img[-10:-2, -10:-2] = 0.95
        name = f"sep-{i:03d}.png"
        Image.fromarray((img * 255).astype(np.uint8), mode="L").save(root / name)
        items.append(ImageRecord(image_id=name, path=str(root / name), labels=np.array([y0, y1])))
    manifest = DatasetManifest(
        dataset_id="separable", label_names=["topleft", "bottomright"], items=items, input_size=size
    )
    return split_dataset(manifest, (0.7, 0.15, 0.15), seed=seed)


@pytest.fixture(scope="session")
def separable_manifest(tmp_path_factory):
    return make_separable_dataset(tmp_path_factory.mktemp("separable"))
