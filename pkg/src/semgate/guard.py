"""Validation of transformed text.

Two checks gate a transformation before it is trusted:

* numeric-payload preservation: every numeral in the source must survive the
  rewrite verbatim (after normalization), because downstream answers are
  computed from those numbers;
* a leakage lexicon: user-supplied terms that must never appear in the
  transformed text.

Numerals are compared as normalized strings, never as floats, so "1,200"
equals "1200" and "3.50" equals "3.5" without representation surprises.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

# Integers, decimals, thousands-separated forms, optional trailing percent
# sign. Ordered so the comma-grouped alternative wins over a bare prefix.
NUMBER_RE = re.compile(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?%?|\d+(?:\.\d+)?%?")

_WORD_BOUNDARY = r"(?<![\w])%s(?![\w])"


@dataclass
class GuardReport:
    """Outcome of one validation pass.

    passed is true iff no source numeral went missing and no lexicon term
    appears. Extra numerals introduced by the transform warn by default
    (strict mode upgrades them to failures).
    """

    passed: bool
    missing_numbers: dict[str, int] = field(default_factory=dict)
    extra_numbers: dict[str, int] = field(default_factory=dict)
    lexicon_hits: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "missing_numbers": dict(self.missing_numbers),
            "extra_numbers": dict(self.extra_numbers),
            "lexicon_hits": [[term, pos] for term, pos in self.lexicon_hits],
        }


def normalize_numeral(raw: str) -> str:
    """Canonical string form of a numeral token.

    Strips percent signs and thousands separators, drops redundant leading
    zeros and trailing fractional zeros. Idempotent.
    """
    s = raw.strip().rstrip("%").replace(",", "")
    if "." in s:
        intpart, frac = s.split(".", 1)
        frac = frac.rstrip("0")
        intpart = intpart.lstrip("0") or "0"
        s = f"{intpart}.{frac}" if frac else intpart
    else:
        s = s.lstrip("0") or "0"
    return s


def extract_numerals(text: str) -> list[str]:
    """All numeral tokens in order of appearance, normalized."""
    return [normalize_numeral(m) for m in NUMBER_RE.findall(text)]


def numeral_multiset(text: str) -> Counter:
    return Counter(extract_numerals(text))


def check_numbers(t_o: str, t_hat_o: str, strict_extra: bool = False) -> GuardReport:
    """Compare the numeral multisets of a source text and its transform."""
    src = numeral_multiset(t_o)
    dst = numeral_multiset(t_hat_o)
    missing = src - dst
    extra = dst - src
    passed = not missing and not (strict_extra and extra)
    return GuardReport(
        passed=passed,
        missing_numbers=dict(missing),
        extra_numbers=dict(extra),
    )


def check_lexicon(t_hat_o: str, lexicon: list[str]) -> GuardReport:
    """Case-insensitive whole-word scan for forbidden terms.

    Multi-word terms match as phrases; hit positions are character offsets
    into t_hat_o.
    """
    hits: list[tuple[str, int]] = []
    for term in lexicon:
        term = term.strip()
        if not term:
            continue
        pattern = re.compile(_WORD_BOUNDARY % re.escape(term), re.IGNORECASE)
        for m in pattern.finditer(t_hat_o):
            hits.append((term, m.start()))
    hits.sort(key=lambda h: (h[1], h[0]))
    return GuardReport(passed=not hits, lexicon_hits=hits)


def check(
    t_o: str,
    t_hat_o: str,
    lexicon: list[str] | None = None,
    strict_extra: bool = False,
) -> GuardReport:
    """Combined numeric-preservation and lexicon check."""
    num = check_numbers(t_o, t_hat_o, strict_extra=strict_extra)
    lex = check_lexicon(t_hat_o, lexicon or [])
    return GuardReport(
        passed=num.passed and lex.passed,
        missing_numbers=num.missing_numbers,
        extra_numbers=num.extra_numbers,
        lexicon_hits=lex.lexicon_hits,
    )


def load_lexicon(path) -> list[str]:
    """Read a lexicon file: one term per line, UTF-8, '#' comments."""
    terms = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(line)
    return terms


def derive_lexicon(t_o: str) -> list[str]:
    """Capitalized multi-word spans of a text, usable as an automatic lexicon.

    Runs of two or more capitalized words are the usual shape of names worth
    suppressing ("Acme Corp", "John Smith"). A sentence-initial word is
    trimmed off a span when a multi-word remainder survives, so "Visited
    Acme Corp." yields "Acme Corp" rather than the verb-polluted span.
    """
    spans = []
    for m in re.finditer(r"(?:[A-Z][a-z]+\s+)+[A-Z][a-z]+", t_o):
        words = m.group(0).split()
        at_sentence_start = m.start() == 0 or t_o[: m.start()].rstrip()[-1:] in {".", "!", "?", ""}
        if at_sentence_start and len(words) > 2:
            words = words[1:]
        spans.append(" ".join(words))
    return sorted(set(spans))
