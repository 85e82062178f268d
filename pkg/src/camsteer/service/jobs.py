"""One background job slot per session."""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field

from ..errors import JobConflictError

STATES = ("idle", "running", "failed", "done")


@dataclass
class JobStatus:
    state: str = "idle"
    kind: str | None = None
    progress: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        return {"state": self.state, "kind": self.kind,
                "progress": self.progress, "message": self.message}


@dataclass
class JobSlot:
    status: JobStatus = field(default_factory=JobStatus)
    thread: threading.Thread | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def start(self, kind: str, target) -> None:
        with self.lock:
            if self.status.state == "running":
                raise JobConflictError(f"a {self.status.kind} job is already running")
            self.status = JobStatus(state="running", kind=kind, progress=0.0)

            def run():
                try:
                    target(self._report_progress)
                except Exception as exc:  # noqa: BLE001 - job boundary
                    self.status.state = "failed"
                    self.status.message = f"{type(exc).__name__}: {exc}"
                    traceback.print_exc()
                else:
                    self.status.state = "done"
                    self.status.progress = 1.0

            self.thread = threading.Thread(target=run, daemon=True)
            self.thread.start()

    def _report_progress(self, fraction: float, message: str = "") -> None:
        self.status.progress = max(0.0, min(1.0, fraction))
        if message:
            self.status.message = message

    def wait(self, timeout: float | None = None) -> None:
        if self.thread is not None:
            self.thread.join(timeout)


class JobRegistry:
    def __init__(self):
        self._slots: dict[str, JobSlot] = {}
        self._lock = threading.Lock()

    def slot(self, session_id: str) -> JobSlot:
        with self._lock:
            return self._slots.setdefault(session_id, JobSlot())
