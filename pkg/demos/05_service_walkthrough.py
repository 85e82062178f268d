"""The full loop over HTTP: upload, train, rank, annotate, fine-tune,
compare — the exact sequence the browser workbench drives.

Uses the in-process test client; point a real client at `camsteer-serve`
for the same behavior over the network.
"""

import tempfile
import time
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from camsteer.service import create_app

OUT = Path(tempfile.mkdtemp(prefix="camsteer-demo-"))


def make_dataset(root: Path, n=100, size=64, seed=0):
    rng = np.random.RandomState(seed)
    root.mkdir(parents=True)
    rows = ["image,spot,stripe"]
    for i in range(n):
        has_spot, has_stripe = rng.randint(0, 2), rng.randint(0, 2)
        img = rng.uniform(0.25, 0.45, size=(size, size))
        if has_spot:
            img[6:18, 6:18] = 0.95
        if has_stripe:
            img[-12:-4, :] = 0.9
        name = f"img-{i:03d}.png"
        Image.fromarray((img * 255).astype(np.uint8), mode="L").save(root / name)
        rows.append(f"{name},{has_spot},{has_stripe}")
    (root / "labels.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def wait(client, sid):
    while True:
        status = client.get(f"/api/v1/sessions/{sid}/job").json()
        if status["state"] in ("done", "failed", "idle"):
            return status
        time.sleep(0.3)


def main():
    make_dataset(OUT / "data")
    client = TestClient(create_app(OUT / "sessions"))

    sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
    print("session:", sid)

    up = client.post(f"/api/v1/sessions/{sid}/dataset",
                     json={"root": str(OUT / "data"), "input_size": 64}).json()
    print("uploaded:", up["num_items"], "items, labels", up["label_names"])

    client.post(f"/api/v1/sessions/{sid}/train",
                json={"epochs": 8, "batch_size": 8, "learning_rate": 5e-3})
    print("training:", wait(client, sid)["state"])

    ranked = client.get(f"/api/v1/sessions/{sid}/ranked-images",
                        params={"label": 0, "mode": "accuracy"}).json()
    worst = ranked["images"][0]
    print(f"most review-worthy image for label 0: {worst['image_id']} "
          f"(score {worst['score']:.3f}, correct={worst['correct']})")

    client.put(f"/api/v1/sessions/{sid}/annotations", json={
        "image_id": worst["image_id"], "label_index": 0,
        "polygons": [[(0.09, 0.09), (0.29, 0.09), (0.29, 0.29), (0.09, 0.29)]],
        "note": "true evidence region",
    })
    print("annotation saved")

    client.post(f"/api/v1/sessions/{sid}/finetune",
                json={"epochs": 3, "batch_size": 4, "learning_rate": 5e-4,
                      "replay_fraction": 0.2})
    print("fine-tune:", wait(client, sid)["state"])

    info = client.get(f"/api/v1/sessions/{sid}").json()
    print("current round:", info["current_round"])

    history = client.get(f"/api/v1/sessions/{sid}/history", params={"label": 0}).json()
    for row in history["reports"]:
        print(f"  round {row['round_index']}: correct {row['correct_count']}, "
              f"incorrect {row['incorrect_count']}, auc {row['auc'] and round(row['auc'], 3)}")

    comparison = client.get(f"/api/v1/sessions/{sid}/comparison",
                            params={"image_id": worst["image_id"], "label": 0}).json()
    print("comparison strip rounds:", [r["round_index"] for r in comparison["rounds"]])


if __name__ == "__main__":
    main()
