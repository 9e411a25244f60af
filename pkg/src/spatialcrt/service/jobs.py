"""In-memory background jobs for long-running study requests."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass

from ..study import StudyConfig, run_study


@dataclass
class Job:
    job_id: str
    config: StudyConfig
    out_dir: str
    threads: int | None
    status: str = "queued"
    done_replicates: int = 0
    total_replicates: int = 0
    error: str | None = None
    result: object = None


class JobStore:
    """Thread-per-job runner keyed by uuid; state guarded by one lock."""

    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, config: StudyConfig, out_dir: str,
               threads: int | None = None) -> str:
        job_id = uuid.uuid4().hex
        job = Job(job_id=job_id, config=config, out_dir=out_dir, threads=threads)
        with self._lock:
            self._jobs[job_id] = job
        thread = threading.Thread(target=self._run, args=(job,), daemon=True)
        thread.start()
        return job_id

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(job_id)
            return self._jobs[job_id]

    def _run(self, job: Job):
        def progress(done: int, total: int):
            with self._lock:
                job.done_replicates = done
                job.total_replicates = total

        with self._lock:
            job.status = "running"
        try:
            result = run_study(job.config, job.out_dir, threads=job.threads,
                               progress=progress)
            with self._lock:
                job.result = result
                job.status = "done"
        except Exception as exc:  # surface any failure through the API
            with self._lock:
                job.error = f"{type(exc).__name__}: {exc}"
                job.status = "failed"
