"""Experiment orchestration: dataset runs, LLM-judge scoring, store admin.

Three experiment modes mirror the evaluation protocol:

  utility    - encode each question, send the transform to the cloud, and
               score the cloud's answers against the dataset labels (answers
               are numeric/label payloads, invariant under the context
               transformation, so they compare directly);
  experience - run the full encode/cloud/decode pipeline and score the
               restored answers against the labels with the similarity
               metrics (higher is better);
  privacy    - score each original against its transform (lower is better).

Reports are plain JSON with sorted keys and no timestamps, so identical
inputs plus mock backends reproduce byte-identical files.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backends.client import DEFAULT_TEMPERATURES, ChatClient, ChatRequest
from .core.config import AppConfig
from .core.types import ModelEndpoint, now_ms
from .errors import BackendError, JobAbortedError, SemgateError
from .gateway import Gateway, GatewayRequest, build_gateway
from .metrics import AccuracyReport, MetricReport, accuracy, score_pairs

log = logging.getLogger(__name__)

MODES = ("utility", "experience", "privacy")

DEFAULT_JUDGE_DIMENSIONS = (
    "logical_structure",
    "privacy_coverage",
    "logical_reasonableness",
)

FAILURE_ABORT_RATIO = 0.2
FAILURE_ABORT_MIN_ITEMS = 10


def read_dataset(path: str | Path, question_field: str = "question",
                 label_field: str = "label") -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(l for l in f if l.strip()):
            raw = json.loads(line)
            if question_field not in raw:
                raise SemgateError(f"{path}: record {i} lacks field {question_field!r}")
            records.append({
                "id": raw.get("id", f"r{i:05d}"),
                "question": raw[question_field],
                "label": raw.get(label_field),
            })
    return records


@dataclass
class ExperimentResult:
    mode: str
    task: str | None
    n_items: int
    n_failed: int
    metric_report: MetricReport | None = None
    accuracy_report: AccuracyReport | None = None

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "task": self.task,
            "n_items": self.n_items,
            "n_failed": self.n_failed,
            "completion_ratio": (
                (self.n_items - self.n_failed) / self.n_items if self.n_items else 0.0
            ),
        }
        if self.metric_report is not None:
            out["similarity"] = self.metric_report.to_dict()
        if self.accuracy_report is not None:
            out["accuracy"] = self.accuracy_report.to_dict()
        return out


def _run_item(gateway: Gateway, record: dict) -> dict:
    out = {"id": record["id"], "label": record["label"], "t_o": record["question"]}
    try:
        resp = gateway.handle_query(GatewayRequest(text=record["question"], transparency=True))
        transparency = resp.transparency or {}
        out["t_hat_o"] = transparency.get("t_hat_o", "")
        out["t_hat_r"] = transparency.get("t_hat_r", "")
        out["t_r"] = resp.answer
    except SemgateError as exc:
        out["error"] = str(exc)
    return out


def run_experiment(
    config: AppConfig,
    dataset_path: str | Path,
    mode: str,
    task: str = "math",
    question_field: str = "question",
    label_field: str = "label",
    parallelism: int = 4,
    client: ChatClient | None = None,
) -> ExperimentResult:
    """Run one evaluation mode over a dataset through the gateway pipeline."""
    if mode not in MODES:
        raise SemgateError(f"unknown mode {mode!r}; expected one of {MODES}")
    records = read_dataset(dataset_path, question_field, label_field)
    if mode in ("utility", "experience") and any(r["label"] is None for r in records):
        raise SemgateError(f"{mode} mode requires a {label_field!r} field on every record")

    gateway = build_gateway(config, client)
    rows: list[dict] = []
    failures = 0
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        for row in pool.map(lambda r: _run_item(gateway, r), records):
            rows.append(row)
            if "error" in row:
                failures += 1
                if (
                    len(rows) >= FAILURE_ABORT_MIN_ITEMS
                    and failures / len(rows) > FAILURE_ABORT_RATIO
                ):
                    raise JobAbortedError(
                        f"aborting experiment: {failures}/{len(rows)} items failed; "
                        f"last error: {row['error']}"
                    )

    ok_rows = [r for r in rows if "error" not in r]
    result = ExperimentResult(
        mode=mode, task=task if mode == "utility" else None,
        n_items=len(rows), n_failed=failures,
    )
    if mode == "utility":
        task_name = {"math": "math_numeric", "nli": "nli_label"}.get(task, task)
        result.accuracy_report = accuracy(
            [r["t_hat_r"] for r in ok_rows],
            [r["label"] for r in ok_rows],
            task_name,
        )
    elif mode == "experience":
        result.metric_report = score_pairs(
            [(r["id"], r["t_r"], r["label"]) for r in ok_rows], mode="experience"
        )
    else:
        result.metric_report = score_pairs(
            [(r["id"], r["t_hat_o"], r["t_o"]) for r in ok_rows], mode="privacy"
        )
    return result


# LLM-judge scoring (rubric of configurable 1-5 dimensions)

_SCORE_LINE_RE = re.compile(r"SCORES?:\s*(.+)", re.IGNORECASE)
_KV_RE = re.compile(r"(\w+)\s*=\s*([1-5])\b")
_SLASH_RE = re.compile(r"^\s*([1-5])\s*/\s*([1-5])\s*/\s*([1-5])\s*$")


def parse_judge_scores(text: str, dimensions=DEFAULT_JUDGE_DIMENSIONS) -> dict | None:
    """Parse a judge reply into {dimension: score}.

    Accepts the labeled machine-readable line the rubric asks for, or a bare
    "a/b/c" in rubric dimension order. Returns None when unparseable.
    """
    slash = _SLASH_RE.match(text.strip())
    if slash and len(dimensions) == 3:
        return {d: int(slash.group(i + 1)) for i, d in enumerate(dimensions)}
    line = _SCORE_LINE_RE.search(text)
    haystack = line.group(1) if line else text
    found = dict(_KV_RE.findall(haystack))
    if all(d in found for d in dimensions):
        return {d: int(found[d]) for d in dimensions}
    return None


@dataclass
class JudgeReport:
    dimensions: tuple
    rows: list[dict]
    unscored: int

    @property
    def means(self) -> dict:
        scored = [r for r in self.rows if r.get("scores")]
        out = {}
        for d in self.dimensions:
            out[d] = (
                sum(r["scores"][d] for r in scored) / len(scored) if scored else 0.0
            )
        return out

    def to_dict(self) -> dict:
        return {
            "dimensions": list(self.dimensions),
            "means": {k: self.means[k] for k in self.dimensions},
            "n_pairs": len(self.rows),
            "unscored": self.unscored,
            "rows": self.rows,
        }


def judge(
    pairs: list[tuple[str, str, str]],
    judge_endpoint: ModelEndpoint,
    config: AppConfig,
    dimensions=DEFAULT_JUDGE_DIMENSIONS,
    client: ChatClient | None = None,
) -> JudgeReport:
    """Score (id, t_o, t_hat_o) pairs with the judge model.

    Malformed judge output is retried once, then the pair is marked
    unscored; judge unavailability aborts with the partial report attached.
    """
    client = client or ChatClient()
    rows: list[dict] = []
    unscored = 0
    for pair_id, t_o, t_hat_o in pairs:
        prompt = config.prompts.render("judge_rubric", t_o=t_o, t_hat_o=t_hat_o)
        scores = None
        try:
            for _ in range(2):
                resp = client.complete(judge_endpoint, ChatRequest.user(
                    prompt, temperature=DEFAULT_TEMPERATURES["judge"]
                ))
                scores = parse_judge_scores(resp.content, dimensions)
                if scores is not None:
                    break
        except BackendError as exc:
            partial = JudgeReport(dimensions=tuple(dimensions), rows=rows, unscored=unscored)
            raise JobAbortedError(
                f"judge unavailable after {len(rows)} pairs: {exc}; "
                f"partial report: {json.dumps(partial.means)}"
            ) from exc
        if scores is None:
            unscored += 1
        rows.append({"id": pair_id, "scores": scores})
    return JudgeReport(dimensions=tuple(dimensions), rows=rows, unscored=unscored)


def purge_sessions(store, older_than_ms: int | None = None) -> int:
    """Remove sessions older than the cutoff (None removes all); compacts the file."""
    cutoff = None if older_than_ms is None else now_ms() - older_than_ms
    return store.purge(created_before_ms=cutoff if older_than_ms is not None else None)


def parse_duration_ms(text: str) -> int:
    """'90s', '15m', '24h', '7d' or a bare millisecond count."""
    m = re.fullmatch(r"(\d+)(ms|s|m|h|d)?", text.strip())
    if not m:
        raise SemgateError(f"cannot parse duration {text!r}")
    value = int(m.group(1))
    unit = m.group(2) or "ms"
    factor = {"ms": 1, "s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}[unit]
    return value * factor


# Report files and side-by-side tabulation


def write_report(data: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8"
    )


def format_table(rows: list[dict], columns: list[str]) -> str:
    """Aligned plain-text table; values are shown to 4 decimals."""
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return "-" if v is None else str(v)

    table = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [
        max(len(columns[i]), *(len(row[i]) for row in table)) if table else len(columns[i])
        for i in range(len(columns))
    ]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def merge_reports(paths: list[str | Path]) -> str:
    """Tabulate several report JSONs (ours or ingested baselines) side by side."""
    rows = []
    for path in paths:
        data = json.loads(Path(path).read_text("utf-8"))
        name = data.get("name") or Path(path).stem
        agg = (data.get("similarity") or {}).get("aggregates") or data.get("aggregates") or {}
        row = {"method": name, "mode": data.get("mode", "?")}
        for key in ("bleu_avg", "meteor", "rouge_1", "rouge_2", "rouge_l"):
            if key in agg:
                row[key] = agg[key]
        acc = data.get("accuracy") or {}
        if "accuracy" in acc:
            row["accuracy"] = acc["accuracy"]
        rows.append(row)
    columns = ["method", "mode", "accuracy", "bleu_avg", "meteor", "rouge_1", "rouge_2", "rouge_l"]
    used = [c for c in columns if any(c in r for r in rows)]
    return format_table(rows, used)
