"""Train the compact CNN on a synthetic set and look at its explanations.

Generates the confounded fixture (subtle texture vs salient marker with
biased co-occurrence), trains briefly, then prints per-label metrics and
writes Grad-CAM overlay images for a few validation items.
"""

import tempfile
from pathlib import Path

from PIL import Image

from camsteer import (
    ModelConfig,
    TrainingParams,
    build_model,
    grad_cam,
    per_round_report,
    render_overlay,
    train,
)
from camsteer.images import decode_image
from camsteer.synthetic import make_confounded_dataset

OUT = Path(tempfile.mkdtemp(prefix="camsteer-demo-"))


def main():
    manifest, oracle = make_confounded_dataset(OUT / "data", n_images=800, seed=0)
    print(f"dataset in {OUT / 'data'} "
          f"(train {len(manifest.items_in_split('train'))}, "
          f"val {len(manifest.items_in_split('val'))}, "
          f"test {len(manifest.items_in_split('test'))})")

    model = build_model(ModelConfig(backbone="small_cnn", num_labels=2, input_size=64), seed=0)
    params = TrainingParams(batch_size=4, epochs=28, learning_rate=1e-3, seed=0)
    trained = train(model, manifest, params,
                    progress_sink=lambda e, loss: e % 4 == 0 and print(f"  epoch {e:2d}  loss {loss:.4f}"))

    for label in range(manifest.num_labels):
        report = per_round_report(trained, manifest, label, round_index=0)
        print(f"label {manifest.label_names[label]!r}: auc={report.auc and round(report.auc, 3)} "
              f"precision={report.precision and round(report.precision, 3)} "
              f"recall={report.recall and round(report.recall, 3)}")

    for rec in manifest.items_in_split("val")[:3]:
        hm = grad_cam(trained, rec.path, 0, image_id=rec.image_id)
        img = decode_image(rec.path, 64, 1)[0]
        overlay = render_overlay(img, hm, display_size=256)
        path = OUT / f"overlay-{rec.image_id}"
        Image.fromarray(overlay).save(path)
        note = "degenerate (flat map)" if hm.degenerate else f"peak at {hm.values.argmax()}"
        print(f"  wrote {path} ({note})")


if __name__ == "__main__":
    main()
