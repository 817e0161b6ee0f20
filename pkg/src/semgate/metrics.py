"""Text-similarity and accuracy metrics for the evaluation protocol.

All scores are sentence-level in [0, 1] and aggregated by arithmetic mean
over pairs. The BLEU aggregate is the arithmetic mean of orders 1-4 (each
order scored as brevity-penalty times clipped precision), which diverges
from standard geometric-mean BLEU on purpose; see README. METEOR is the
simplified exact-match variant without stemming or synonymy.

Tokenization is pinned: NFKC-normalize, lowercase, then take numeral tokens
(normalized exactly as the guard module does, so "1,200" == "1200") and
letter runs; everything else is a boundary.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .guard import NUMBER_RE, normalize_numeral

EPSILON = 1e-9

TOKENIZER_VERSION = "1"

_TOKEN_RE = re.compile(rf"(?P<num>{NUMBER_RE.pattern})|(?P<word>[^\W\d_]+)")

SIMILARITY_KEYS = (
    "bleu_1",
    "bleu_2",
    "bleu_3",
    "bleu_4",
    "bleu_avg",
    "meteor",
    "rouge_1",
    "rouge_2",
    "rouge_l",
)

# Direction tags per evaluation context: restored-response quality wants high
# similarity, privacy wants the transform far from the original.
DIRECTIONS = {
    "experience": "higher_better",
    "utility": "higher_better",
    "privacy": "lower_better",
}


def tokenize(text: str) -> list[str]:
    """Lowercased, NFKC-normalized tokens; numerals kept whole and normalized."""
    text = unicodedata.normalize("NFKC", text).lower()
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        if m.lastgroup == "num":
            tokens.append(normalize_numeral(m.group()))
        else:
            tokens.append(m.group())
    return tokens


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: list[str], reference: list[str]) -> dict[str, float]:
    """Per-order modified n-gram precision with clipping and brevity penalty.

    Zero counts (including orders above the available length) are floored at
    EPSILON so short texts do not zero out the average. An empty side yields
    all zeros with the ``empty`` flag.
    """
    out: dict[str, float] = {}
    if not candidate or not reference:
        for n in range(1, 5):
            out[f"bleu_{n}"] = 0.0
        out["bleu_avg"] = 0.0
        out["empty"] = True
        return out
    if len(candidate) > len(reference):
        bp = 1.0
    else:
        bp = math.exp(1.0 - len(reference) / len(candidate))
    for n in range(1, 5):
        total = len(candidate) - n + 1
        if total <= 0:
            precision = EPSILON
        else:
            cand_counts = _ngram_counts(candidate, n)
            ref_counts = _ngram_counts(reference, n)
            clipped = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            precision = clipped / total if clipped > 0 else EPSILON
        out[f"bleu_{n}"] = bp * precision
    out["bleu_avg"] = sum(out[f"bleu_{n}"] for n in range(1, 5)) / 4.0
    return out


def rouge(candidate: list[str], reference: list[str]) -> dict[str, float]:
    """ROUGE-1/2 as F1 over clipped n-gram overlap; ROUGE-L as F1 from LCS."""
    out = {"rouge_1": 0.0, "rouge_2": 0.0, "rouge_l": 0.0}
    if not candidate or not reference:
        out["empty"] = True
        return out
    for n, key in ((1, "rouge_1"), (2, "rouge_2")):
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        cand_total = max(len(candidate) - n + 1, 0)
        ref_total = max(len(reference) - n + 1, 0)
        if cand_total == 0 or ref_total == 0:
            continue
        overlap = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        p = overlap / cand_total
        r = overlap / ref_total
        out[key] = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    lcs = _lcs_length(candidate, reference)
    if lcs > 0:
        p = lcs / len(candidate)
        r = lcs / len(reference)
        out["rouge_l"] = 2 * p * r / (p + r)
    return out


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Rolling single-row dynamic program.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def meteor(candidate: list[str], reference: list[str]) -> float:
    """Simplified METEOR: exact unigram alignment, chunk-fragmentation penalty.

    The alignment maximizes matches (the token-multiset intersection), then
    minimizes the number of chunks; F_mean = 10PR/(R+9P), penalty =
    0.5*(chunks/matches)^3, score = F_mean*(1-penalty). No matches scores 0.
    """
    if not candidate or not reference:
        return 0.0
    matches = sum((Counter(candidate) & Counter(reference)).values())
    if matches == 0:
        return 0.0
    p = matches / len(candidate)
    r = matches / len(reference)
    f_mean = 10 * p * r / (r + 9 * p)
    chunks = _min_chunks(candidate, reference, matches)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


def _min_chunks(candidate: list[str], reference: list[str], matches: int,
                node_budget: int = 200_000) -> int:
    """Minimum chunk count over maximum matchings.

    Branch and bound over candidate positions, trying diagonal continuations
    first so low-chunk alignments are found early. Exact whenever the search
    completes within the node budget; on exhaustion the best alignment found
    so far is used (every maximum matching has at most ``matches`` chunks, so
    the fallback is always a valid alignment's count).
    """
    ref_positions: dict[str, list[int]] = defaultdict(list)
    for j, tok in enumerate(reference):
        ref_positions[tok].append(j)
    need = Counter(candidate) & Counter(reference)
    # Candidate occurrences of each token at or after every index, for the
    # skip-feasibility test.
    remaining_after: list[Counter] = [Counter()] * (len(candidate) + 1)
    acc = Counter()
    for i in range(len(candidate) - 1, -1, -1):
        acc = acc.copy()
        acc[candidate[i]] += 1
        remaining_after[i] = acc

    best = [matches]
    nodes = [0]

    def rec(i: int, used: frozenset, need_left: Counter, matched: int,
            prev_j: int, chunks: int) -> None:
        if chunks >= best[0] or nodes[0] > node_budget:
            return
        if matched == matches:
            best[0] = chunks
            return
        if i >= len(candidate):
            return
        nodes[0] += 1
        tok = candidate[i]
        if need_left[tok] > 0:
            options = [j for j in ref_positions[tok] if j not in used]
            # Diagonal continuation first: it never opens a new chunk.
            options.sort(key=lambda j: (j != prev_j + 1, j))
            for j in options:
                new_chunks = chunks if j == prev_j + 1 else chunks + 1
                nl = need_left.copy()
                nl[tok] -= 1
                rec(i + 1, used | {j}, nl, matched + 1, j, new_chunks)
        # Skipping position i is allowed only if later occurrences still
        # cover the required match count for this token.
        if remaining_after[i][tok] - 1 >= need_left[tok]:
            rec(i + 1, used, need_left, matched, -2, chunks)

    rec(0, frozenset(), need, 0, -2, 0)
    return best[0]


def score_pair(candidate_text: str, reference_text: str) -> dict[str, float]:
    """All similarity metrics for one raw-text pair."""
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    scores = {}
    scores.update({k: v for k, v in bleu(cand, ref).items() if k != "empty"})
    scores.update({k: v for k, v in rouge(cand, ref).items() if k != "empty"})
    scores["meteor"] = meteor(cand, ref)
    return scores


@dataclass
class MetricReport:
    """Per-pair similarity scores with aggregates and a direction tag."""

    mode: str
    direction: str
    n_pairs: int
    aggregates: dict[str, float]
    per_pair: list[dict] = field(default_factory=list)
    bertscore: str = "absent"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "direction": self.direction,
            "n_pairs": self.n_pairs,
            "aggregates": {k: self.aggregates[k] for k in sorted(self.aggregates)},
            "bertscore": self.bertscore,
            "per_pair": self.per_pair,
        }


def score_pairs(pairs: list[tuple[str, str, str]], mode: str) -> MetricReport:
    """Score (id, candidate, reference) triples and aggregate by mean."""
    direction = DIRECTIONS[mode]
    per_pair = []
    sums = {k: 0.0 for k in SIMILARITY_KEYS}
    for pair_id, cand, ref in pairs:
        scores = score_pair(cand, ref)
        per_pair.append({"id": pair_id, **{k: scores[k] for k in SIMILARITY_KEYS}})
        for k in SIMILARITY_KEYS:
            sums[k] += scores[k]
    n = len(pairs)
    aggregates = {k: (sums[k] / n if n else 0.0) for k in SIMILARITY_KEYS}
    return MetricReport(
        mode=mode, direction=direction, n_pairs=n,
        aggregates=aggregates, per_pair=per_pair,
    )


_FINAL_MARKER_RE = re.compile(r"####\s*(%s)" % NUMBER_RE.pattern)
_NLI_RE = re.compile(r"\b(entailment|neutral|contradiction)\b", re.IGNORECASE)


def extract_numeric_answer(text: str) -> str | None:
    """The number after the final '####' marker, else the last numeral."""
    m = None
    for m in _FINAL_MARKER_RE.finditer(text):
        pass
    if m:
        return normalize_numeral(m.group(1))
    nums = NUMBER_RE.findall(text)
    return normalize_numeral(nums[-1]) if nums else None


def extract_nli_label(text: str) -> str | None:
    m = _NLI_RE.search(text)
    return m.group(1).lower() if m else None


@dataclass
class AccuracyReport:
    task: str
    n: int
    correct: int
    unparseable: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "n": self.n,
            "correct": self.correct,
            "unparseable": self.unparseable,
            "accuracy": self.accuracy,
        }


def accuracy(responses: list[str], references: list[str], task: str) -> AccuracyReport:
    """Task accuracy over aligned response/reference sequences.

    math_numeric compares normalized final numeric answers; nli_label
    compares the first entailment/neutral/contradiction occurrence.
    Unparseable responses count as incorrect and are tallied separately.
    """
    if len(responses) != len(references):
        raise ValueError("responses and references must be aligned")
    if task == "math_numeric":
        extract = extract_numeric_answer
    elif task == "nli_label":
        extract = extract_nli_label
    else:
        raise ValueError(f"unknown accuracy task {task!r}")
    correct = 0
    unparseable = 0
    for resp, ref in zip(responses, references):
        got = extract(resp)
        want = extract(ref)
        if got is None:
            unparseable += 1
            continue
        if want is not None and got == want:
            correct += 1
    return AccuracyReport(task=task, n=len(responses), correct=correct, unparseable=unparseable)
