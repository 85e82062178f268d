"""HTTP API for the annotate-and-refine workbench.

All endpoints live under /api/v1/. Long jobs (training, fine-tune rounds)
run in a per-session background slot and are observed by polling the job
endpoint; mutating endpoints accept a client request_id and replay the
original response on retry.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..annotations import PolygonAnnotation, heatmap_to_polygons, rasterize
from ..data import compute_cooccurrence, compute_label_stats, load_dataset, split_dataset
from ..errors import (
    DegenerateHeatmapError,
    IngestError,
    JobConflictError,
    LabelFileError,
    NotFoundError,
    WorkbenchError,
)
from ..finetune import FineTuneBatch, FineTuneItem, dynamic_weights, finetune_round
from ..gradcam import Heatmap, cam_resolution, grad_cam, render_overlay
from ..images import decode_image
from ..metrics import report_for_label
from ..models import (
    ModelConfig,
    TrainingParams,
    build_model,
    load_checkpoint,
    predict_dataset,
    save_checkpoint,
    train,
)
from ..ranking import (
    RankingMode,
    RankingScore,
    accuracy_deviation_score,
    concentration_score,
    image_dependency_score,
    rank_images,
)
from .jobs import JobRegistry
from .store import SessionStore, _atomic_write_json


class CreateSessionBody(BaseModel):
    request_id: str | None = None


class UploadDatasetBody(BaseModel):
    root: str
    labels_file: str | None = None
    input_size: int = 224
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    request_id: str | None = None


class TrainBody(BaseModel):
    backbone: str = "small_cnn"
    pretrained: bool = False
    batch_size: int = 4
    epochs: int = 30
    learning_rate: float = 1e-4
    seed: int = 0
    augmentation: bool = False
    request_id: str | None = None


class FinetuneBody(BaseModel):
    batch_size: int = 4
    epochs: int = 30
    learning_rate: float = 1e-4
    seed: int = 0
    replay_fraction: float = 0.5
    base_weight: float = 1.0
    request_id: str | None = None


class AnnotationBody(BaseModel):
    image_id: str
    label_index: int
    polygons: list[list[tuple[float, float]]]
    note: str = ""
    request_id: str | None = None


class AcceptHeatmapBody(BaseModel):
    image_id: str
    label_index: int
    threshold: float = 0.5
    request_id: str | None = None


def load_config(config_path: str | Path | None = None) -> dict:
    """Config file values overridden by CAMSTEER_* environment variables."""
    config = {"port": 8765, "data_dir": "./camsteer-data", "device": "cpu"}
    if config_path and Path(config_path).exists():
        config.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
    if os.environ.get("CAMSTEER_PORT"):
        config["port"] = int(os.environ["CAMSTEER_PORT"])
    if os.environ.get("CAMSTEER_DATA_DIR"):
        config["data_dir"] = os.environ["CAMSTEER_DATA_DIR"]
    if os.environ.get("CAMSTEER_DEVICE"):
        config["device"] = os.environ["CAMSTEER_DEVICE"]
    return config


def create_app(data_dir: str | Path | None = None, config_path: str | Path | None = None) -> FastAPI:
    config = load_config(config_path)
    if data_dir is not None:
        config["data_dir"] = str(data_dir)

    app = FastAPI(title="camsteer", version="0.1.0")
    store = SessionStore(config["data_dir"])
    jobs = JobRegistry()
    models: dict[tuple[str, int], object] = {}

    # ------------------------------------------------------------------ utils

    @app.exception_handler(NotFoundError)
    def _not_found(_req, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(JobConflictError)
    def _conflict(_req, exc):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(WorkbenchError)
    def _workbench(_req, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(ValueError)
    def _value(_req, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    def find_item(manifest, image_id: str):
        try:
            return manifest.get_item(image_id)
        except KeyError:
            raise NotFoundError(f"unknown image {image_id!r}") from None

    def model_for(state, round_index: int):
        key = (state.session_id, round_index)
        if key not in models:
            ckpt = state.checkpoint_dir(round_index)
            if not ckpt.exists():
                raise NotFoundError(f"no checkpoint for round {round_index}")
            models[key] = load_checkpoint(ckpt)
        return models[key]

    def require_round(state):
        if state.current_round is None:
            raise NotFoundError("session has no trained model yet; start training first")
        return state.current_round

    def heatmap_for(state, round_index: int, image_id: str, label_index: int) -> Heatmap:
        cache = state.directory / "heatmaps" / f"round-{round_index:03d}"
        cache.mkdir(parents=True, exist_ok=True)
        safe = image_id.replace("/", "_").replace("\\", "_")
        path = cache / f"{safe}-l{label_index}.json"
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            return Heatmap(values=np.array(doc["values"]), raw=np.array(doc["raw"]),
                           image_id=image_id, label_index=label_index,
                           round_index=round_index, degenerate=doc["degenerate"])
        model = model_for(state, round_index)
        manifest = state.manifest()
        rec = find_item(manifest, image_id)
        hm = grad_cam(model, rec.path, label_index, image_id=image_id, round_index=round_index)
        _atomic_write_json(path, {
            "values": hm.values.tolist(), "raw": hm.raw.tolist(), "degenerate": hm.degenerate,
        })
        return hm

    def probabilities_for(state, round_index: int, split: str):
        model = model_for(state, round_index)
        manifest = state.manifest()
        items = manifest.items_in_split(split)
        probs, truths = predict_dataset(model, manifest, split=split)
        return items, probs, truths

    # -------------------------------------------------------------- endpoints

    @app.post("/api/v1/sessions")
    def create_session(body: CreateSessionBody):
        state = store.create_session(request_id=body.request_id)
        return {"session_id": state.session_id}

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str):
        state = store.get(session_id)
        return {
            "session_id": state.session_id,
            "current_round": state.current_round,
            "rounds": state.record.get("rounds", []),
            "dataset_loaded": (state.directory / "manifest.json").exists(),
        }

    @app.post("/api/v1/sessions/{session_id}/dataset")
    def upload_dataset(session_id: str, body: UploadDatasetBody):
        state = store.get(session_id)
        cached = state.cached_response(body.request_id)
        if cached is not None:
            return cached
        root = Path(body.root)
        labels_file = Path(body.labels_file) if body.labels_file else root / "labels.csv"
        manifest = load_dataset(root, labels_file, input_size=body.input_size)
        manifest = split_dataset(manifest, body.ratios, seed=body.seed)
        state.set_manifest(manifest)
        stats = compute_label_stats(manifest)
        response = {
            "dataset_id": manifest.dataset_id,
            "num_items": len(manifest.items),
            "label_names": manifest.label_names,
            "counts": stats.counts.tolist(),
            "splits": {s: len(manifest.items_in_split(s)) for s in ("train", "val", "test")},
        }
        state.cache_response(body.request_id, response)
        return response

    @app.get("/api/v1/sessions/{session_id}/label-stats")
    def get_label_stats(session_id: str):
        manifest = store.get(session_id).manifest()
        stats = compute_label_stats(manifest)
        return {
            "label_names": stats.label_names,
            "counts": stats.counts.tolist(),
            "proportions": stats.proportions.tolist(),
        }

    @app.get("/api/v1/sessions/{session_id}/cooccurrence")
    def get_cooccurrence(session_id: str):
        manifest = store.get(session_id).manifest()
        co = compute_cooccurrence(manifest)
        return {"label_names": co.label_names, "matrix": co.M.tolist()}

    @app.post("/api/v1/sessions/{session_id}/train")
    def start_training(session_id: str, body: TrainBody):
        state = store.get(session_id)
        cached = state.cached_response(body.request_id)
        if cached is not None:
            return cached
        manifest = state.manifest()
        params = TrainingParams(batch_size=body.batch_size, epochs=body.epochs,
                                learning_rate=body.learning_rate, seed=body.seed,
                                augmentation=body.augmentation)
        model_config = ModelConfig(backbone=body.backbone, num_labels=manifest.num_labels,
                                   input_size=manifest.input_size, pretrained=body.pretrained)

        def job(progress):
            losses: list[float] = []

            def sink(epoch, loss):
                losses.append(loss)
                progress((epoch + 1) / params.epochs, f"epoch {epoch}: loss {loss:.5f}")

            model = build_model(model_config, seed=params.seed)
            trained = train(model, manifest, params, progress_sink=sink)
            ckpt = state.checkpoint_dir(0)
            save_checkpoint(trained, ckpt, params=params, parent=None)
            probs, truths = predict_dataset(trained, manifest, split="test")
            reports = [report_for_label(probs, truths, c, round_index=0)
                       for c in range(manifest.num_labels)]
            models[(state.session_id, 0)] = trained
            state.publish_round({
                "round_index": 0,
                "parent_round": None,
                "checkpoint": str(ckpt.relative_to(state.directory)),
                "params": params.__dict__,
                "annotated_items": [],
                "weights": None,
                "epoch_losses": losses,
            }, reports)

        jobs.slot(session_id).start("train", job)
        response = {"status": "started", "kind": "train"}
        state.cache_response(body.request_id, response)
        return response

    @app.get("/api/v1/sessions/{session_id}/job")
    def get_job_status(session_id: str):
        store.get(session_id)
        return jobs.slot(session_id).status.to_dict()

    @app.get("/api/v1/sessions/{session_id}/ranked-images")
    def list_ranked_images(session_id: str, label: int, mode: str = "accuracy",
                           split: str = "val", top_fraction: float = 0.05):
        state = store.get(session_id)
        round_index = require_round(state)
        mode = RankingMode(mode)
        manifest = state.manifest()
        if not 0 <= label < manifest.num_labels:
            raise ValueError(f"label index {label} out of range")
        items, probs, truths = probabilities_for(state, round_index, split)

        scores = []
        if mode is RankingMode.ACCURACY:
            for rec, p in zip(items, probs):
                scores.append(RankingScore(rec.image_id, label, mode,
                                           accuracy_deviation_score(p, rec.labels, label)))
        elif mode is RankingMode.CONCENTRATION:
            for rec in items:
                hm = heatmap_for(state, round_index, rec.image_id, label)
                score = concentration_score(hm.values, top_fraction, degenerate=hm.degenerate)
                scores.append(RankingScore(rec.image_id, label, mode, score))
        else:
            co = compute_cooccurrence(manifest)
            for rec in items:
                scores.append(RankingScore(rec.image_id, label, mode,
                                           image_dependency_score(co, rec, label)))

        ranked = rank_images(scores, mode)
        by_id = {rec.image_id: (rec, p) for rec, p in zip(items, probs)}
        out = []
        for s in ranked:
            rec, p = by_id[s.image_id]
            out.append({
                "image_id": s.image_id,
                "rank": s.rank,
                "score": s.score,
                "correct": bool((p[label] >= 0.5) == (rec.labels[label] == 1)),
                "annotated": state.has_annotation(s.image_id, label, round_index),
            })
        return {"label_index": label, "mode": mode.value, "round_index": round_index,
                "images": out}

    @app.get("/api/v1/sessions/{session_id}/heatmap")
    def get_heatmap(session_id: str, image_id: str, label: int,
                    round_index: int | None = Query(default=None),
                    overlay: bool = False, display_size: int = 224):
        state = store.get(session_id)
        current = require_round(state)
        r = current if round_index is None else round_index
        hm = heatmap_for(state, r, image_id, label)
        if overlay:
            from PIL import Image

            safe = image_id.replace("/", "_").replace("\\", "_")
            png_path = (state.directory / "heatmaps" / f"round-{r:03d}"
                        / f"{safe}-l{label}-overlay.png")
            if not png_path.exists():
                manifest = state.manifest()
                rec = find_item(manifest, image_id)
                img = decode_image(rec.path, display_size, 1)[0]
                rendered = render_overlay(img, hm)
                buf = io.BytesIO()
                Image.fromarray(rendered).save(buf, format="PNG")
                png_path.parent.mkdir(parents=True, exist_ok=True)
                png_path.write_bytes(buf.getvalue())
            return Response(content=png_path.read_bytes(), media_type="image/png")
        return {
            "image_id": image_id, "label_index": label, "round_index": r,
            "values": hm.values.tolist(), "degenerate": hm.degenerate,
        }

    @app.put("/api/v1/sessions/{session_id}/annotations")
    def put_annotation(session_id: str, body: AnnotationBody):
        state = store.get(session_id)
        cached = state.cached_response(body.request_id)
        if cached is not None:
            return cached
        round_index = require_round(state)
        manifest = state.manifest()
        find_item(manifest, body.image_id)
        if not 0 <= body.label_index < manifest.num_labels:
            raise ValueError(f"label index {body.label_index} out of range")
        annotation = PolygonAnnotation.from_vertex_lists(
            body.image_id, body.label_index, body.polygons,
            note=body.note, round_index=round_index,
        )
        state.save_annotation(annotation)
        response = {"status": "saved", **annotation.to_dict()}
        state.cache_response(body.request_id, response)
        return response

    @app.post("/api/v1/sessions/{session_id}/accept-heatmap")
    def accept_heatmap(session_id: str, body: AcceptHeatmapBody):
        state = store.get(session_id)
        cached = state.cached_response(body.request_id)
        if cached is not None:
            return cached
        round_index = require_round(state)
        hm = heatmap_for(state, round_index, body.image_id, body.label_index)
        annotation = heatmap_to_polygons(hm, body.threshold, image_id=body.image_id,
                                         round_index=round_index)
        state.save_annotation(annotation)
        response = {"status": "saved", **annotation.to_dict()}
        state.cache_response(body.request_id, response)
        return response

    @app.post("/api/v1/sessions/{session_id}/finetune")
    def start_finetune(session_id: str, body: FinetuneBody):
        state = store.get(session_id)
        cached = state.cached_response(body.request_id)
        if cached is not None:
            return cached
        parent_round = require_round(state)
        pending = state.annotations_for_round(parent_round)
        if not pending:
            raise WorkbenchError(
                "no annotations saved since the last round; annotate or accept at "
                "least one heatmap before fine-tuning"
            )
        manifest = state.manifest()
        params = TrainingParams(batch_size=body.batch_size, epochs=body.epochs,
                                learning_rate=body.learning_rate, seed=body.seed,
                                replay_fraction=body.replay_fraction)

        def job(progress):
            model = model_for(state, parent_round)
            cam_hw = cam_resolution(model)
            by_image: dict[str, dict[int, PolygonAnnotation]] = {}
            for ann in pending:
                by_image.setdefault(ann.image_id, {})[ann.label_index] = ann
            items = []
            for image_id, per_label in sorted(by_image.items()):
                rec = find_item(manifest, image_id)
                masks = {c: rasterize(ann, cam_hw) for c, ann in per_label.items()}
                items.append(FineTuneItem(image=rec.path, truth=rec.labels.astype(np.float64),
                                          masks=masks, image_id=image_id))
            annotated_ids = set(by_image)
            rest = [r for r in manifest.items_in_split("train") if r.image_id not in annotated_ids]
            n_replay = min(int(round(params.replay_fraction * len(manifest.items_in_split("train")))),
                           len(rest))
            rng = np.random.RandomState(params.seed + 7919)
            for idx in sorted(rng.choice(len(rest), size=n_replay, replace=False)):
                rec = rest[idx]
                items.append(FineTuneItem(image=rec.path, truth=rec.labels.astype(np.float64),
                                          image_id=rec.image_id))

            batch = FineTuneBatch(items=items)
            stats = compute_label_stats(manifest)
            weights = dynamic_weights(stats, body.base_weight,
                                      annotated_labels=sorted(batch.annotated_labels()))
            losses: list[float] = []

            def sink(epoch, loss):
                losses.append(loss)
                progress((epoch + 1) / params.epochs, f"epoch {epoch}: loss {loss:.5f}")

            new_model = finetune_round(model, batch, weights, params, progress_sink=sink)
            new_round = new_model.round_index
            ckpt = state.checkpoint_dir(new_round)
            save_checkpoint(new_model, ckpt, params=params,
                            parent=str(state.checkpoint_dir(parent_round)))
            probs, truths = predict_dataset(new_model, manifest, split="test")
            reports = [report_for_label(probs, truths, c, round_index=new_round)
                       for c in range(manifest.num_labels)]
            models[(state.session_id, new_round)] = new_model
            state.publish_round({
                "round_index": new_round,
                "parent_round": parent_round,
                "checkpoint": str(ckpt.relative_to(state.directory)),
                "params": params.__dict__,
                "weights": {"base_weight": body.base_weight,
                            "per_label": [None if np.isnan(w) else float(w)
                                          for w in weights.per_label]},
                "annotated_items": sorted(annotated_ids),
                "epoch_losses": losses,
            }, reports)

        jobs.slot(session_id).start("finetune", job)
        response = {"status": "started", "kind": "finetune", "parent_round": parent_round}
        state.cache_response(body.request_id, response)
        return response

    @app.get("/api/v1/sessions/{session_id}/history")
    def get_round_history(session_id: str, label: int):
        state = store.get(session_id)
        return {"label_index": label, "reports": state.history_for(label)}

    @app.get("/api/v1/sessions/{session_id}/comparison")
    def get_comparison(session_id: str, image_id: str, label: int):
        state = store.get(session_id)
        current = require_round(state)
        manifest = state.manifest()
        rec = find_item(manifest, image_id)
        rounds = []
        for r in range(current + 1):
            if not state.checkpoint_dir(r).exists():
                continue
            hm = heatmap_for(state, r, image_id, label)
            model = model_for(state, r)
            from ..models import predict as predict_one

            p = predict_one(model, rec.path).probabilities[label]
            rounds.append({
                "round_index": r,
                "values": hm.values.tolist(),
                "degenerate": hm.degenerate,
                "probability": float(p),
                "correct": bool((p >= 0.5) == (rec.labels[label] == 1)),
            })
        return {"image_id": image_id, "label_index": label, "rounds": rounds}

    app.state.store = store
    app.state.jobs = jobs
    app.state.config = config
    return app


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="camsteer-serve")
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args(argv)

    config = load_config(args.config)
    if args.data_dir:
        config["data_dir"] = args.data_dir
    if args.port:
        config["port"] = args.port
    app = create_app(data_dir=config["data_dir"])
    uvicorn.run(app, host="127.0.0.1", port=config["port"], log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
