"""Async job manager for long-running analyses.

Jobs run on a bounded worker pool and expose monotone progress snapshots.
State transitions are pending -> running -> (done | failed | cancelled);
cancellation is cooperative: runners poll their JobContext and stop issuing
LM calls once cancellation is observed.
"""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable

from .errors import AlreadyTerminal, JobCancelled, NotFound, QueueFull

JOB_KINDS = ("classification", "summarization", "ppl_gain", "persona")
_TERMINAL = ("done", "failed", "cancelled")


@dataclass
class JobHandle:
    job_id: str
    kind: str
    state: str
    progress: float
    submitted_at: str
    total: int = 0
    completed: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state,
            "progress": self.progress,
            "submitted_at": self.submitted_at,
            "total": self.total,
            "completed": self.completed,
            "error": self.error,
        }


class JobContext:
    """Handed to runners for progress reporting and cancellation checks."""

    def __init__(self, job: "_Job"):
        self._job = job

    def set_total(self, total: int) -> None:
        with self._job.lock:
            self._job.total = max(0, total)

    def advance(self, n: int = 1) -> None:
        job = self._job
        with job.lock:
            job.completed += n
            if job.total > 0 and job.state == "running":
                job.progress = max(job.progress, min(1.0, job.completed / job.total))

    def cancelled(self) -> bool:
        return self._job.cancel_event.is_set()

    def raise_if_cancelled(self) -> None:
        if self.cancelled():
            raise JobCancelled(self._job.job_id)


class _Job:
    def __init__(self, kind: str, content_hash: str | None):
        self.job_id = f"job-{uuid.uuid4().hex[:10]}"
        self.kind = kind
        self.state = "pending"
        self.progress = 0.0
        self.total = 0
        self.completed = 0
        self.error: str | None = None
        self.result: Any = None
        self.submitted_at = datetime.now(timezone.utc).isoformat()
        self.content_hash = content_hash
        self.cancel_event = threading.Event()
        self.lock = threading.Lock()
        self.future: Future | None = None

    def snapshot(self) -> JobHandle:
        with self.lock:
            return JobHandle(
                job_id=self.job_id,
                kind=self.kind,
                state=self.state,
                progress=self.progress,
                submitted_at=self.submitted_at,
                total=self.total,
                completed=self.completed,
                error=self.error,
            )


class JobManager:
    def __init__(self, max_workers: int = 4, max_queue: int = 16, cache_enabled: bool = True):
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="job")
        self.max_queue = max_queue
        self.cache_enabled = cache_enabled
        self._jobs: dict[str, _Job] = {}
        self._by_hash: dict[str, str] = {}
        self._lock = threading.Lock()

    def submit(
        self,
        kind: str,
        runner: Callable[[JobContext], Any],
        content_hash: str | None = None,
    ) -> JobHandle:
        if kind not in JOB_KINDS:
            raise ValueError(f"unknown job kind {kind!r}")
        with self._lock:
            if self.cache_enabled and content_hash and content_hash in self._by_hash:
                cached = self._jobs[self._by_hash[content_hash]]
                if cached.state == "done":
                    return cached.snapshot()
            active = sum(1 for j in self._jobs.values() if j.state in ("pending", "running"))
            if active >= self.max_queue:
                raise QueueFull(f"{active} jobs already queued or running")
            job = _Job(kind, content_hash)
            self._jobs[job.job_id] = job
            if content_hash:
                self._by_hash[content_hash] = job.job_id
        job.future = self._pool.submit(self._run, job, runner)
        return job.snapshot()

    def _run(self, job: _Job, runner: Callable[[JobContext], Any]) -> None:
        with job.lock:
            if job.state != "pending":  # cancelled before start
                return
            job.state = "running"
        ctx = JobContext(job)
        try:
            result = runner(ctx)
        except JobCancelled:
            with job.lock:
                job.state = "cancelled"
            return
        except Exception as exc:  # runner failure becomes job state
            with job.lock:
                if job.state == "running":
                    job.state = "failed"
                    job.error = str(exc)
            return
        with job.lock:
            if job.state == "running":
                job.state = "done"
                job.progress = 1.0
                job.result = result

    def _get(self, job_id: str) -> _Job:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFound(f"job {job_id!r}")
            return self._jobs[job_id]

    def poll(self, job_id: str) -> JobHandle:
        return self._get(job_id).snapshot()

    def result(self, job_id: str) -> Any:
        job = self._get(job_id)
        with job.lock:
            return job.result

    def cancel(self, job_id: str) -> JobHandle:
        job = self._get(job_id)
        with job.lock:
            if job.state in _TERMINAL:
                raise AlreadyTerminal(f"job {job_id} already {job.state}")
            was_pending = job.state == "pending"
            job.state = "cancelled"
        job.cancel_event.set()
        if was_pending and job.future is not None:
            job.future.cancel()
        return job.snapshot()

    def wait(self, job_id: str, timeout: float | None = None) -> JobHandle:
        """Block until the job's runner returns (testing convenience)."""
        job = self._get(job_id)
        if job.future is not None:
            try:
                job.future.result(timeout=timeout)
            except Exception:
                pass
        return job.snapshot()

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)
