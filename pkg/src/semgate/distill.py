"""Offline semantic-distillation pipeline.

Builds (original, transformed) encoder pairs and
(original, transformed, cloud-response, restored) decoder quadruples, then
emits them as JSONL training files. Items flow through four legs:

  generate  - synthetic source only: render the generation prompt around a
              fresh random number list and ask the cloud for a text;
              dataset sources pass records through unchanged.
  transform - cloud rewrite of the original, gated by the numeral guard
              with a bounded retry budget.
  respond   - the cloud answers the *transformed* text alone; the original
              never leaves the machine on this leg.
  restore   - dataset labels pass through verbatim when present; otherwise
              the cloud restores the response against the original.

Items are processed with bounded parallelism but written strictly in input
order, so an interrupted job resumed from its progress sidecar produces the
same files as an uninterrupted run.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import guard
from .backends.client import DEFAULT_TEMPERATURES, ChatClient, ChatRequest
from .core.prompts import PromptSet, compose_decoder_input, render_numbers
from .core.types import ModelEndpoint
from .errors import BackendError, JobAbortedError, SemgateError
from .listgen import ListGenConfig, generate_list, make_rng

log = logging.getLogger(__name__)

ENCODER_FILE = "encoder.jsonl"
DECODER_FILE = "decoder.jsonl"
REJECTS_FILE = "rejects.jsonl"
PROGRESS_FILE = "progress.json"

GUARD_RETRY_BUDGET = 2
FAILURE_ABORT_RATIO = 0.2


@dataclass(frozen=True)
class SyntheticSource:
    listgen: ListGenConfig
    count: int


@dataclass(frozen=True)
class DatasetSource:
    path: str
    question_field: str = "question"
    label_field: str | None = "label"


@dataclass
class DistillJob:
    source: SyntheticSource | DatasetSource
    cloud: ModelEndpoint
    prompts: PromptSet
    out_dir: str
    seed: int = 0
    parallelism: int = 4
    guard_retries: int = GUARD_RETRY_BUDGET
    lexicon: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if isinstance(self.source, SyntheticSource):
            if self.source.count < 1:
                raise SemgateError("synthetic source count must be >= 1")
            self.source.listgen.validate()
        else:
            if not Path(self.source.path).exists():
                raise SemgateError(f"dataset file not found: {self.source.path}")
        if self.parallelism < 1:
            raise SemgateError("parallelism must be >= 1")


@dataclass
class WorkItem:
    index: int
    item_id: str
    t_o: str | None = None  # None until generated (synthetic source)
    values: tuple = ()
    label: str | None = None


@dataclass
class ItemResult:
    item: WorkItem
    t_o: str = ""
    t_hat_o: str = ""
    t_hat_r: str = ""
    t_r: str = ""
    failed: bool = False
    reason: str = ""
    guard_retries_used: int = 0


def _item_hash(seed: int, occurrence: int, payload: str) -> str:
    digest = hashlib.sha256(f"{seed}|{occurrence}|{payload}".encode("utf-8")).hexdigest()
    return digest[:16]


def plan_items(job: DistillJob) -> list[WorkItem]:
    """The deterministic item sequence for a job.

    Ids are content-addressed (hash of source record and seed, with an
    occurrence counter so duplicate records stay distinct), which is what
    makes interrupted jobs resume without duplication.
    """
    items: list[WorkItem] = []
    if isinstance(job.source, SyntheticSource):
        rng = make_rng(job.seed)
        for i in range(job.source.count):
            values = generate_list(job.source.listgen, rng).values
            payload = json.dumps(list(values))
            items.append(WorkItem(
                index=i,
                item_id=_item_hash(job.seed, i, payload),
                values=values,
            ))
        return items

    seen: Counter = Counter()
    with open(job.source.path, encoding="utf-8") as f:
        for i, line in enumerate(l for l in f if l.strip()):
            record = json.loads(line)
            t_o = record[job.source.question_field]
            label = (
                record.get(job.source.label_field)
                if job.source.label_field else None
            )
            payload = json.dumps({"q": t_o, "l": label}, sort_keys=True)
            occurrence = seen[payload]
            seen[payload] += 1
            items.append(WorkItem(
                index=i,
                item_id=_item_hash(job.seed, occurrence, payload),
                t_o=t_o,
                label=label,
            ))
    return items


def gen_context(job: DistillJob, client: ChatClient, item: WorkItem) -> str:
    """The original text for one item (Eq.-level: synthetic generation or pass-through)."""
    if item.t_o is not None:
        return item.t_o
    prompt = job.prompts.render("generate_context", numbers=render_numbers(item.values))
    resp = client.complete(job.cloud, ChatRequest.user(
        prompt, temperature=DEFAULT_TEMPERATURES["generate"]
    ))
    return resp.content


def transform_context(
    t_o: str,
    ep: ModelEndpoint,
    prompts: PromptSet,
    client: ChatClient,
    retries: int = GUARD_RETRY_BUDGET,
    lexicon: list[str] | None = None,
) -> tuple[str, guard.GuardReport, int]:
    """Transform a text, re-asking up to ``retries`` times on guard failure.

    Returns (transformed, report, retries_used); the caller decides what a
    failed final report means for the item.
    """
    if not t_o:
        raise SemgateError("cannot transform empty text")
    prompt = prompts.render("transform", t_o=t_o)
    report = None
    t_hat_o = ""
    for attempt in range(retries + 1):
        resp = client.complete(ep, ChatRequest.user(
            prompt, temperature=DEFAULT_TEMPERATURES["transform"]
        ))
        t_hat_o = resp.content
        report = guard.check(t_o, t_hat_o, lexicon=lexicon)
        if report.passed:
            return t_hat_o, report, attempt
    return t_hat_o, report, retries


def collect_response(t_hat_o: str, cloud: ModelEndpoint, client: ChatClient) -> str:
    """The cloud's answer to the transformed text alone."""
    resp = client.complete(cloud, ChatRequest.user(
        t_hat_o, temperature=DEFAULT_TEMPERATURES["respond"]
    ))
    return resp.content


def restore_or_label(
    t_o: str,
    t_hat_r: str,
    label: str | None,
    cloud: ModelEndpoint,
    prompts: PromptSet,
    client: ChatClient,
) -> str:
    """Dataset label verbatim when available, else a cloud restoration."""
    if label is not None:
        return label
    prompt = prompts.render("restore", t_o=t_o, t_hat_r=t_hat_r)
    resp = client.complete(cloud, ChatRequest.user(
        prompt, temperature=DEFAULT_TEMPERATURES["restore"]
    ))
    return resp.content


def process_item(job: DistillJob, client: ChatClient, item: WorkItem) -> ItemResult:
    result = ItemResult(item=item)
    try:
        result.t_o = gen_context(job, client, item)
        t_hat_o, report, used = transform_context(
            result.t_o, job.cloud, job.prompts, client,
            retries=job.guard_retries, lexicon=job.lexicon,
        )
        result.guard_retries_used = used
        if not report.passed:
            result.failed = True
            result.reason = f"number_guard: {json.dumps(report.to_dict()['missing_numbers'])}"
            return result
        result.t_hat_o = t_hat_o
        result.t_hat_r = collect_response(t_hat_o, job.cloud, client)
        result.t_r = restore_or_label(
            result.t_o, result.t_hat_r, item.label, job.cloud, job.prompts, client
        )
    except BackendError as exc:
        result.failed = True
        result.reason = f"backend: {exc}"
    return result


@dataclass
class JobSummary:
    total: int
    emitted: int
    rejected: int
    skipped_resume: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "emitted": self.emitted,
            "rejected": self.rejected,
            "skipped_resume": self.skipped_resume,
        }


class _Progress:
    def __init__(self, path: Path):
        self.path = path
        self.done: dict[str, str] = {}  # item_id -> "emitted" | "rejected"
        if path.exists():
            data = json.loads(path.read_text("utf-8"))
            self.done = dict(data.get("done", {}))

    def mark(self, item_id: str, state: str) -> None:
        self.done[item_id] = state
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"done": self.done}, indent=0), "utf-8")
        tmp.replace(self.path)


def run_job(job: DistillJob, client: ChatClient, limit: int | None = None) -> JobSummary:
    """Run (or resume) a distillation job; returns emission counts.

    ``limit`` stops after that many unprocessed items, which is how tests
    and operators sample a prefix; a later run without the limit completes
    the job with identical output files.
    """
    job.validate()
    out_dir = Path(job.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("", "utf-8")
        probe.unlink()
    except OSError as exc:
        raise SemgateError(f"output directory not writable: {out_dir}: {exc}") from exc

    items = plan_items(job)
    progress = _Progress(out_dir / PROGRESS_FILE)
    pending = [it for it in items if it.item_id not in progress.done]
    skipped = len(items) - len(pending)
    if limit is not None:
        pending = pending[:limit]

    emitted = sum(1 for s in progress.done.values() if s == "emitted")
    rejected = sum(1 for s in progress.done.values() if s == "rejected")
    failures = 0
    attempted = 0
    # Distinguishes systematic breakage from transient noise: more than the
    # tolerated fraction of this run's planned items failing kills the job.
    abort_threshold = FAILURE_ABORT_RATIO * len(pending)

    enc_path = out_dir / ENCODER_FILE
    dec_path = out_dir / DECODER_FILE
    rej_path = out_dir / REJECTS_FILE

    with ThreadPoolExecutor(max_workers=job.parallelism) as pool, \
            open(enc_path, "a", encoding="utf-8") as enc_f, \
            open(dec_path, "a", encoding="utf-8") as dec_f, \
            open(rej_path, "a", encoding="utf-8") as rej_f:
        for result in pool.map(lambda it: process_item(job, client, it), pending):
            attempted += 1
            if result.failed:
                failures += 1
                rejected += 1
                rej_f.write(json.dumps({
                    "id": result.item.item_id,
                    "reason": result.reason,
                    "t_o": result.t_o or None,
                }, ensure_ascii=False) + "\n")
                rej_f.flush()
                progress.mark(result.item.item_id, "rejected")
                if failures > abort_threshold:
                    raise JobAbortedError(
                        f"aborting: {failures}/{len(pending)} items failed "
                        f"(> {FAILURE_ABORT_RATIO:.0%} tolerance); "
                        f"last reason: {result.reason}"
                    )
                continue
            enc_f.write(json.dumps(
                {"input": result.t_o, "target": result.t_hat_o}, ensure_ascii=False
            ) + "\n")
            dec_f.write(json.dumps({
                "input": compose_decoder_input(result.t_o, result.t_hat_o, result.t_hat_r),
                "target": result.t_r,
            }, ensure_ascii=False) + "\n")
            enc_f.flush()
            dec_f.flush()
            emitted += 1
            progress.mark(result.item.item_id, "emitted")

    summary = JobSummary(
        total=len(items), emitted=emitted, rejected=rejected, skipped_resume=skipped
    )
    log.info("distill job done: %s", summary.to_dict())
    return summary
