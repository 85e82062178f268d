"""Label statistics, co-occurrence, and dependency ranking on a small fixture.

Builds a manifest whose pairwise co-occurrence matrix is known exactly, then
walks through the statistics the workbench surfaces in its label view and
the co-occurrence-dependency scores used for review ranking.
"""

import numpy as np

from camsteer import (
    DatasetManifest,
    ImageRecord,
    compute_cooccurrence,
    compute_label_stats,
    dependency_score,
    inverse_frequency,
)

LABELS = ["OME", "EOF", "OE", "EOM", "FOE", "CE", "TMP"]
PAIR_COUNTS = {
    ("OME", "OE"): 10,
    ("EOF", "OE"): 41, ("EOF", "CE"): 26, ("EOF", "TMP"): 8,
    ("OE", "EOM"): 5, ("OE", "FOE"): 9, ("OE", "CE"): 28, ("OE", "TMP"): 8,
    ("EOM", "CE"): 6,
    ("FOE", "CE"): 75,
    ("CE", "TMP"): 5,
}


def build_manifest() -> DatasetManifest:
    items = []
    for n, ((a, b), count) in enumerate(PAIR_COUNTS.items()):
        for i in range(count):
            labels = np.zeros(len(LABELS), dtype=np.int64)
            labels[LABELS.index(a)] = labels[LABELS.index(b)] = 1
            items.append(ImageRecord(f"pair{n:02d}-{i:03d}", f"pair{n:02d}-{i:03d}.png", labels))
    return DatasetManifest("ear-demo", list(LABELS), items)


def main():
    manifest = build_manifest()
    stats = compute_label_stats(manifest)
    print(f"{len(manifest.items)} images, {manifest.num_labels} labels")
    for name, count, prop in zip(stats.label_names, stats.counts, stats.proportions):
        print(f"  {name:4s} count {count:4d}  proportion {prop:.3f}")

    co = compute_cooccurrence(manifest)
    print("\nco-occurrence matrix:")
    header = "     " + " ".join(f"{n:>4s}" for n in LABELS)
    print(header)
    for i, name in enumerate(LABELS):
        print(f"{name:4s} " + " ".join(f"{co.M[i, j]:4d}" for j in range(len(LABELS))))

    print("\ninverse frequency is strictly decreasing in the pair count:")
    for pair in [("FOE", "CE"), ("EOF", "OE"), ("OME", "OE"), ("OME", "EOF")]:
        i, j = LABELS.index(pair[0]), LABELS.index(pair[1])
        print(f"  {pair[0]}-{pair[1]}: M={co.M[i, j]:3d} -> 1/(M+0.01) = {inverse_frequency(co, i, j):.5f}")

    print("\ndependency score per label (higher = more entangled, review first):")
    scores = [(name, dependency_score(co, i)) for i, name in enumerate(LABELS)]
    for name, score in sorted(scores, key=lambda t: -t[1]):
        print(f"  {name:4s} {score:.6f}")


if __name__ == "__main__":
    main()
