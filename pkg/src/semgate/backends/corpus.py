"""Synthetic templated math corpus and the mock swap vocabulary.

The corpus provides word problems with known answers so the whole pipeline
can run offline and be checked against ground truth. Each template family
carries a distinctive marker phrase ("altogether", "each", "remain",
"shared ... equally") that the arithmetic mock keys on; the swap vocabulary
deliberately avoids those markers, question words, and numerals, so a
swapped problem stays solvable and numeral-preserving by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

# Clinic-world -> depot-world, whole words only. Both columns are disjoint
# from each other and from every template structure word, which is what makes
# the substitution a clean bijection on corpus texts.
SWAP_VOCAB = {
    "clinic": "depot",
    "clinics": "depots",
    "hospital": "warehouse",
    "hospitals": "warehouses",
    "pharmacy": "hangar",
    "doctor": "foreman",
    "doctors": "foremen",
    "nurse": "loader",
    "nurses": "loaders",
    "surgeon": "rigger",
    "surgeons": "riggers",
    "patient": "crate",
    "patients": "crates",
    "ward": "bay",
    "wards": "bays",
    "bed": "rack",
    "beds": "racks",
    "pill": "parcel",
    "pills": "parcels",
    "tablet": "pallet",
    "tablets": "pallets",
    "medicine": "freight",
    "checkup": "inspection",
    "checkups": "inspections",
    "morning": "dawn",
    "evening": "dusk",
    "senior": "veteran",
    "busy": "crowded",
    "small": "compact",
    "carefully": "firmly",
    "admitted": "hauled",
    "treated": "handled",
    "prescribed": "allocated",
    "prepared": "stacked",
    "stored": "parked",
    "operates": "runs",
    "receive": "collect",
    "visited": "reached",
    "monday": "alpha-day",
    "tuesday": "beta-day",
}

INVERSE_SWAP_VOCAB = {v: k for k, v in SWAP_VOCAB.items()}


def _build_swapper(table: dict[str, str]):
    pattern = re.compile(
        r"\b(%s)\b" % "|".join(sorted((re.escape(k) for k in table), key=len, reverse=True)),
        re.IGNORECASE,
    )

    def replace(match: re.Match) -> str:
        src = match.group(0)
        dst = table[src.lower()]
        if src.isupper():
            return dst.upper()
        if src[0].isupper():
            return dst[0].upper() + dst[1:]
        return dst

    def swap(text: str) -> str:
        return pattern.sub(replace, text)

    return swap


swap_context = _build_swapper(SWAP_VOCAB)
swap_context_inverse = _build_swapper(INVERSE_SWAP_VOCAB)

_ORDINALS = (
    "first", "second", "third", "fourth", "fifth",
    "sixth", "seventh", "eighth", "ninth", "tenth",
)


@dataclass(frozen=True)
class MathItem:
    id: str
    question: str
    answer: int

    @property
    def label(self) -> str:
        return f"#### {self.answer}"


def _add_item(a: int, b: int) -> tuple[str, int]:
    q = (
        f"The senior nurse at the busy clinic admitted {a} patients during "
        f"the morning checkup and {b} patients during the evening checkup. "
        f"How many patients were admitted altogether?"
    )
    return q, a + b


def _mul_item(a: int, b: int) -> tuple[str, int]:
    q = (
        f"A busy clinic operates {a} wards with {b} beds each. The senior "
        f"doctor asks the nurses to keep every bed prepared before the "
        f"morning checkup. How many beds must be prepared in total?"
    )
    return q, a * b


def _sub_item(a: int, b: int) -> tuple[str, int]:
    q = (
        f"{a} pills were carefully stored in the small pharmacy of the busy "
        f"hospital. The senior surgeon prescribed {b} of the pills to a "
        f"patient. How many pills remain?"
    )
    return q, a - b


def _div_item(a: int, b: int) -> tuple[str, int]:
    q = (
        f"The senior doctors at the busy clinic carefully prepared {a} "
        f"tablets of medicine for the morning checkups and shared them "
        f"equally among {b} patients. How many tablets does each patient "
        f"receive?"
    )
    return q, a // b


def make_item(rng: np.random.Generator, index: int) -> MathItem:
    family = index % 4
    if family == 0:
        a, b = int(rng.integers(2, 60)), int(rng.integers(2, 60))
        q, ans = _add_item(a, b)
    elif family == 1:
        a, b = int(rng.integers(2, 13)), int(rng.integers(2, 13))
        q, ans = _mul_item(a, b)
    elif family == 2:
        b = int(rng.integers(2, 40))
        a = b + int(rng.integers(1, 40))
        q, ans = _sub_item(a, b)
    else:
        b = int(rng.integers(2, 10))
        a = b * int(rng.integers(2, 10))
        q, ans = _div_item(a, b)
    return MathItem(id=f"q{index:04d}", question=q, answer=ans)


def make_corpus(count: int, seed: int = 0) -> list[MathItem]:
    """Deterministic corpus of ``count`` problems cycling the four families."""
    rng = np.random.default_rng(seed)
    return [make_item(rng, i) for i in range(count)]


def additive_item_from_numbers(values) -> tuple[str, int]:
    """An n-ary sum problem containing exactly the given numbers.

    Used by the generation mock to turn a random number list into a solvable
    corpus-style problem (counters are spelled as ordinal words so the only
    numerals present are the payload values).
    """
    values = [int(v) for v in values]
    clauses = []
    for i, v in enumerate(values):
        ordinal = _ORDINALS[i % len(_ORDINALS)]
        clauses.append(f"{v} patients during the {ordinal} checkup")
    body = ", ".join(clauses[:-1])
    if body:
        body = f"{body} and {clauses[-1]}"
    else:
        body = clauses[-1]
    q = (
        f"The senior nurse at the clinic recorded {body}. "
        f"How many patients were recorded altogether?"
    )
    return q, sum(values)


_SHARED_RE = re.compile(r"\bshared\b.*\bequally\b", re.IGNORECASE | re.DOTALL)


def solve_math_text(text: str, numbers: list[int]) -> int | None:
    """Answer a (possibly vocabulary-swapped) corpus problem.

    Returns None when no family marker is recognized or the numbers do not
    fit the family's arithmetic.
    """
    if not numbers:
        return None
    lowered = text.lower()
    if _SHARED_RE.search(lowered):
        if len(numbers) >= 2 and numbers[1] != 0 and numbers[0] % numbers[1] == 0:
            return numbers[0] // numbers[1]
        return None
    if "altogether" in lowered:
        return sum(numbers)
    if "remain" in lowered or "left" in lowered:
        if len(numbers) >= 2:
            return numbers[0] - numbers[1]
        return None
    if "each" in lowered and len(numbers) >= 2:
        return numbers[0] * numbers[1]
    if "more" in lowered and len(numbers) >= 2:
        return numbers[0] + numbers[1]
    if len(numbers) == 1:
        return numbers[0]
    return None
