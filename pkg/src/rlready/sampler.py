"""Sampling client: gather n completions per task from an OpenAI-compatible endpoint.

Each sample is one POST to <endpoint>/v1/completions (n=1 per request keeps
every completion auditable). Requests run on a thread pool of size
max_concurrency, which bounds in-flight requests; the store is written only
from the coordinating thread, one task at a time with samples in index
order.

Failed requests retry with exponential backoff; a task whose request budget
runs out is recorded in a failures sidecar and the run continues. Resume is
idempotent: (task, sample_index) pairs already in the store are skipped, so
rerunning after a crash or partial failure fills exactly the gaps.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .records import RecordStore
from .verifier import Sample

API_KEY_ENV = "RLREADY_API_KEY"
REASONING_PROMPT_SUFFIX = (
    "Let's think step by step and output the final answer within \\boxed{}."
)
FAILURES_SIDECAR = "failures.jsonl"


@dataclass(frozen=True)
class SamplingTask:
    task_id: str
    problem: str
    benchmark_id: str


@dataclass(frozen=True)
class SamplingJob:
    endpoint_url: str
    model_name: str
    tasks: tuple[SamplingTask, ...]
    n: int
    temperature: float = 1.0
    prompt_suffix: str = REASONING_PROMPT_SUFFIX
    max_concurrency: int = 4
    max_tokens: int = 8192
    checkpoint_id: str = ""  # empty means: use model_name
    max_retries: int = 3
    retry_backoff: float = 0.5
    request_timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_concurrency < 1:
            raise ValueError(f"max_concurrency must be >= 1, got {self.max_concurrency}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        seen = set()
        for task in self.tasks:
            key = (task.benchmark_id, task.task_id)
            if key in seen:
                raise ValueError(f"duplicate task {key!r} in job")
            seen.add(key)

    @property
    def effective_checkpoint_id(self) -> str:
        return self.checkpoint_id or self.model_name

    def request_template(self) -> dict:
        """The frozen request shape, recorded in the store manifest."""
        return {
            "url": self.endpoint_url.rstrip("/") + "/v1/completions",
            "body": {
                "model": self.model_name,
                "prompt": "<problem>\n" + self.prompt_suffix,
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
                "n": 1,
            },
        }


class SamplingIncomplete(RuntimeError):
    """Some tasks failed after retries; details in the failures sidecar."""

    def __init__(self, message: str, failures_path: Path):
        super().__init__(message)
        self.failures_path = failures_path


@dataclass
class _TaskState:
    task: SamplingTask
    pending: int
    results: list[Sample] = field(default_factory=list)
    error: str | None = None


def _fetch_one(
    job: SamplingJob, url: str, headers: dict, task: SamplingTask, index: int
) -> tuple[int, str, str | None]:
    """One completion request with retry; returns (index, text, finish_reason)."""
    prompt = task.problem + "\n" + job.prompt_suffix
    payload = {
        "model": job.model_name,
        "prompt": prompt,
        "temperature": job.temperature,
        "max_tokens": job.max_tokens,
        "n": 1,
    }
    last_error: Exception | None = None
    for attempt in range(job.max_retries + 1):
        if attempt:
            time.sleep(job.retry_backoff * 2 ** (attempt - 1))
        try:
            resp = requests.post(
                url, json=payload, headers=headers, timeout=job.request_timeout
            )
            if 400 <= resp.status_code < 500:
                # client errors do not heal on retry
                raise RuntimeError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            resp.raise_for_status()
            body = resp.json()
            choice = body["choices"][0]
            return index, choice["text"], choice.get("finish_reason")
        except RuntimeError:
            raise
        except Exception as exc:  # connection errors, 5xx, malformed bodies
            last_error = exc
    raise RuntimeError(f"retries exhausted: {last_error}")


def sample_completions(job: SamplingJob, store: RecordStore) -> int:
    """Run the sampling job against the store; returns new samples written.

    Skips (task, sample_index) pairs already present for the job's checkpoint,
    so a rerun after a crash appends exactly the missing samples.
    """
    checkpoint = job.effective_checkpoint_id
    existing: set[tuple[str, str, int]] = {
        (s.benchmark_id, s.task_id, s.sample_index)
        for s in store.load("samples")
        if s.checkpoint_id == checkpoint
    }
    url = job.endpoint_url.rstrip("/") + "/v1/completions"
    headers = {}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    states: dict[tuple[str, str], _TaskState] = {}
    units: list[tuple[SamplingTask, int]] = []
    for task in job.tasks:
        missing = [
            i
            for i in range(job.n)
            if (task.benchmark_id, task.task_id, i) not in existing
        ]
        if missing:
            states[(task.benchmark_id, task.task_id)] = _TaskState(task, len(missing))
            units.extend((task, i) for i in missing)

    store.set_metadata("request_template", job.request_template())
    written = 0
    failures: list[dict] = []
    with ThreadPoolExecutor(max_workers=job.max_concurrency) as pool:
        future_unit = {
            pool.submit(_fetch_one, job, url, headers, task, index): (task, index)
            for task, index in units
        }
        not_done = set(future_unit)
        while not_done:
            done, not_done = wait(not_done, return_when=FIRST_COMPLETED)
            for future in done:
                task, index = future_unit[future]
                state = states[(task.benchmark_id, task.task_id)]
                try:
                    idx, text, finish = future.result()
                    state.results.append(
                        Sample(
                            checkpoint_id=checkpoint,
                            benchmark_id=task.benchmark_id,
                            task_id=task.task_id,
                            sample_index=idx,
                            text=text,
                            finish_reason=finish,
                        )
                    )
                except Exception as exc:
                    state.error = str(exc)
                state.pending -= 1
                if state.pending == 0:
                    # task finished: single-writer append in index order
                    state.results.sort(key=lambda s: s.sample_index)
                    written += store.append("samples", state.results)
                    if state.error is not None:
                        failures.append(
                            {
                                "task_id": task.task_id,
                                "benchmark": task.benchmark_id,
                                "error": state.error,
                            }
                        )

    failures_path = store.root / FAILURES_SIDECAR
    if failures:
        failures.sort(key=lambda f: (f["benchmark"], f["task_id"]))
        with open(failures_path, "w", encoding="utf-8") as fh:
            for entry in failures:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        raise SamplingIncomplete(
            f"{len(failures)} task(s) incomplete after retries "
            f"({written} samples written); see {failures_path}",
            failures_path=failures_path,
        )
    if failures_path.exists():
        failures_path.unlink()  # previous run's sidecar is now stale
    return written
