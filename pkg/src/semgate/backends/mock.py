"""Deterministic in-process backends for fully offline runs.

A mock endpoint is addressed as ``mock:<rule-set>``. Every rule is a pure
function of the last user message, so identical inputs always produce
identical outputs. Payload-bearing prompts end with a labeled section
(TEXT:, NUMBERS:, ORIGINAL:/RESPONSE:, REWRITTEN:); rules that transform a
payload strip the surrounding instructions by keying on those labels, and
fall back to the whole message when no label is present.
"""

from __future__ import annotations

import re

from ..errors import ConfigError
from ..guard import extract_numerals
from .corpus import (
    additive_item_from_numbers,
    solve_math_text,
    swap_context,
    swap_context_inverse,
)

_LABELS = ("TEXT:", "NUMBERS:", "RESPONSE:", "REWRITTEN:")


def _section_after(content: str, label: str) -> str | None:
    """Payload after the last occurrence of a line-leading label."""
    matches = list(re.finditer(rf"^{re.escape(label)}[ \t]*\n?", content, re.MULTILINE))
    if not matches:
        return None
    return content[matches[-1].end():].strip()


def _payload(content: str, label: str) -> str:
    section = _section_after(content, label)
    return section if section is not None else content.strip()


def rule_echo(content: str) -> str:
    return content


def rule_arith_solver(content: str) -> str:
    numbers = [int(n) for n in extract_numerals(content) if "." not in n]
    answer = solve_math_text(content, numbers)
    if answer is None:
        return "I cannot solve this."
    return f"#### {answer}"


def rule_context_swap(content: str) -> str:
    return swap_context(_payload(content, "TEXT:"))


def rule_context_swap_inverse(content: str) -> str:
    return swap_context_inverse(_payload(content, "RESPONSE:"))


def rule_context_gen(content: str) -> str:
    section = _payload(content, "NUMBERS:")
    numbers = [int(n) for n in extract_numerals(section) if "." not in n]
    if not numbers:
        return "The clinic recorded nothing today."
    question, _ = additive_item_from_numbers(numbers)
    return question


def rule_judge_const(content: str) -> str:
    return "5/5/5"


def rule_cllm(content: str) -> str:
    """Multi-role cloud stand-in: dispatch on the prompt's payload label.

    Judge prompts carry REWRITTEN:, generation prompts NUMBERS:, transform
    prompts TEXT:, restore prompts RESPONSE:. A bare problem (the Eq.-5 leg
    sends the transformed input with no wrapper) falls through to the
    arithmetic solver.
    """
    if _section_after(content, "REWRITTEN:") is not None:
        return rule_judge_const(content)
    if _section_after(content, "NUMBERS:") is not None:
        return rule_context_gen(content)
    if _section_after(content, "TEXT:") is not None:
        return rule_context_swap(content)
    if _section_after(content, "RESPONSE:") is not None:
        return rule_context_swap_inverse(content)
    return rule_arith_solver(content)


_RULES = {
    "echo": rule_echo,
    "arith_solver": rule_arith_solver,
    "context_swap": rule_context_swap,
    "context_swap_inverse": rule_context_swap_inverse,
    "context_gen": rule_context_gen,
    "judge_const": rule_judge_const,
    "cllm": rule_cllm,
}


def mock_rules(rule_set_name: str):
    """Resolve a rule-set name to its deterministic transformer."""
    try:
        return _RULES[rule_set_name]
    except KeyError:
        raise ConfigError(
            f"unknown mock rule set {rule_set_name!r}; "
            f"expected one of {sorted(_RULES)}"
        ) from None
