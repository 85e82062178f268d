"""On-disk session state with atomic commits.

Every session lives in its own directory. The commit record (session.json)
is replaced atomically via a temp file + rename, and always last: checkpoint
weights, heatmap caches, and annotation files are written first, so a crash
at any point leaves either the previous committed state or the new one,
never a half-published round. Orphan files from interrupted jobs are simply
never referenced.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path

from ..annotations import PolygonAnnotation
from ..data import DatasetManifest, load_manifest, save_manifest
from ..errors import NotFoundError
from ..metrics import MetricsReport


def _atomic_write_json(path: Path, doc) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class SessionState:
    """In-memory mirror of one session directory."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.lock = threading.RLock()
        self.record: dict = {}
        self._manifest: DatasetManifest | None = None

    @property
    def session_id(self) -> str:
        return self.record["session_id"]

    @property
    def current_round(self) -> int | None:
        return self.record.get("current_round")

    def manifest(self) -> DatasetManifest:
        if self._manifest is None:
            path = self.directory / "manifest.json"
            if not path.exists():
                raise NotFoundError("session has no dataset yet")
            self._manifest = load_manifest(path)
        return self._manifest

    def set_manifest(self, manifest: DatasetManifest) -> None:
        save_manifest(manifest, self.directory / "manifest.json")
        self._manifest = manifest

    def commit(self) -> None:
        _atomic_write_json(self.directory / "session.json", self.record)

    # -- annotations ------------------------------------------------------

    def annotation_path(self, image_id: str, label_index: int, round_index: int) -> Path:
        safe = image_id.replace("/", "_").replace("\\", "_")
        return self.directory / "annotations" / f"r{round_index:03d}-{safe}-l{label_index}.json"

    def save_annotation(self, annotation: PolygonAnnotation) -> None:
        path = self.annotation_path(annotation.image_id, annotation.label_index,
                                    annotation.round_index)
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write_json(path, annotation.to_dict())

    def annotations_for_round(self, round_index: int) -> list[PolygonAnnotation]:
        ann_dir = self.directory / "annotations"
        if not ann_dir.exists():
            return []
        out = []
        for path in sorted(ann_dir.glob(f"r{round_index:03d}-*.json")):
            out.append(PolygonAnnotation.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        return out

    def has_annotation(self, image_id: str, label_index: int, round_index: int) -> bool:
        return self.annotation_path(image_id, label_index, round_index).exists()

    # -- rounds and history ------------------------------------------------

    def checkpoint_dir(self, round_index: int) -> Path:
        return self.directory / "checkpoints" / f"round-{round_index:03d}"

    def publish_round(self, round_record: dict, reports: list[MetricsReport]) -> None:
        """Single atomic commit: round row + history rows + current_round."""
        with self.lock:
            self.record.setdefault("rounds", []).append(round_record)
            history = self.record.setdefault("history", {})
            for report in reports:
                history.setdefault(str(report.label_index), []).append(report.to_dict())
            self.record["current_round"] = round_record["round_index"]
            self.commit()

    def history_for(self, label_index: int) -> list[dict]:
        return list(self.record.get("history", {}).get(str(label_index), []))

    # -- idempotency --------------------------------------------------------

    def cached_response(self, request_id: str | None):
        if not request_id:
            return None
        return self.record.get("requests", {}).get(request_id)

    def cache_response(self, request_id: str | None, response: dict) -> None:
        if not request_id:
            return
        with self.lock:
            self.record.setdefault("requests", {})[request_id] = response
            self.commit()


class SessionStore:
    """All sessions under one data directory; survives process restarts."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()

    def create_session(self, request_id: str | None = None) -> SessionState:
        if request_id:
            for state in self.iter_sessions():
                if state.record.get("request_id") == request_id:
                    return state
        session_id = uuid.uuid4().hex[:12]
        directory = self.data_dir / "sessions" / session_id
        directory.mkdir(parents=True)
        state = SessionState(directory)
        state.record = {
            "session_id": session_id,
            "created_at": time.time(),
            "request_id": request_id,
            "current_round": None,
            "rounds": [],
            "history": {},
            "requests": {},
        }
        state.commit()
        with self._lock:
            self._sessions[session_id] = state
        return state

    def get(self, session_id: str) -> SessionState:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        directory = self.data_dir / "sessions" / session_id
        record_path = directory / "session.json"
        if not record_path.exists():
            raise NotFoundError(f"unknown session {session_id!r}")
        state = SessionState(directory)
        state.record = json.loads(record_path.read_text(encoding="utf-8"))
        with self._lock:
            self._sessions.setdefault(session_id, state)
            return self._sessions[session_id]

    def iter_sessions(self):
        for path in sorted((self.data_dir / "sessions").glob("*/session.json")):
            yield self.get(path.parent.name)
