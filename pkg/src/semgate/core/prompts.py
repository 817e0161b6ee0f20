"""Prompt templates and the decoder-input composition format.

Templates live in an external text file so they can be swapped without a
rebuild. The file format is line-oriented: a line of the form ``### name``
opens a template, the body runs until the next header, and ``#``-prefixed
lines outside bodies are comments (a ``# version:`` comment is surfaced on
the loaded set). Placeholders are written ``{name}`` and only the documented
names are substituted, so literal braces elsewhere survive untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import ConfigError

TEMPLATE_NAMES = ("generate_context", "transform", "restore", "judge_rubric")

PLACEHOLDER_NAMES = ("numbers", "t_o", "t_hat_r", "t_hat_o")

# Placeholders each template must provide for its operation to render.
REQUIRED_PLACEHOLDERS = {
    "generate_context": ("numbers",),
    "transform": ("t_o",),
    "restore": ("t_o", "t_hat_r"),
    "judge_rubric": ("t_o", "t_hat_o"),
}

_PLACEHOLDER_RE = re.compile(r"\{(%s)\}" % "|".join(PLACEHOLDER_NAMES))
_HEADER_RE = re.compile(r"^###\s+(\w+)\s*$")

# Labels of the decoder-input composition template. The decoder conditions on
# all three texts; explicit labels make the serialization unambiguous and let
# the fields be recovered from an emitted training line.
COMPOSE_LABELS = ("ORIGINAL:", "TRANSFORMED:", "RESPONSE:")


@dataclass
class PromptSet:
    """The four named templates driving generation, transform, restore, judging."""

    templates: dict[str, str]
    version: str = ""
    source: str = "bundled"

    def render(self, name: str, **values: str) -> str:
        template = self.templates[name]
        missing = [
            p for p in REQUIRED_PLACEHOLDERS.get(name, ()) if p not in values
        ]
        if missing:
            raise ValueError(f"template {name!r} rendering missing values for {missing}")
        return _PLACEHOLDER_RE.sub(lambda m: str(values.get(m.group(1), m.group(0))), template)

    def validate(self) -> None:
        for name in TEMPLATE_NAMES:
            if name not in self.templates or not self.templates[name].strip():
                raise ConfigError(f"prompts: missing template {name!r}")
            present = set(_PLACEHOLDER_RE.findall(self.templates[name]))
            for needed in REQUIRED_PLACEHOLDERS[name]:
                if needed not in present:
                    raise ConfigError(
                        f"prompts.{name}: template lacks required placeholder {{{needed}}}"
                    )


def parse_prompt_text(text: str, source: str = "") -> PromptSet:
    templates: dict[str, str] = {}
    version = ""
    current: str | None = None
    body: list[str] = []

    def flush():
        if current is not None:
            templates[current] = "\n".join(body).strip("\n")

    for line in text.splitlines():
        header = _HEADER_RE.match(line)
        if header:
            flush()
            current = header.group(1)
            body = []
            continue
        if current is None:
            if line.startswith("#"):
                m = re.search(r"version:\s*(\S+)", line)
                if m:
                    version = m.group(1)
            continue
        body.append(line)
    flush()

    ps = PromptSet(templates=templates, version=version, source=source or "inline")
    ps.validate()
    return ps


def load_prompts(path: str | Path | None = None) -> PromptSet:
    """Load a prompt set from a file, or the bundled defaults when path is None."""
    if path is None:
        text = resources.files("semgate.data").joinpath("prompts.txt").read_text("utf-8")
        return parse_prompt_text(text, source="bundled")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"prompts.path: file not found: {p}")
    return parse_prompt_text(p.read_text("utf-8"), source=str(p))


def render_numbers(values) -> str:
    """Comma-separated rendering of a number list for prompt insertion."""
    return ", ".join(format_number(v) for v in values)


def format_number(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def compose_decoder_input(t_o: str, t_hat_o: str, t_hat_r: str) -> str:
    """Serialize the decoder's three-field conditioning input."""
    return (
        f"{COMPOSE_LABELS[0]}\n{t_o}\n"
        f"{COMPOSE_LABELS[1]}\n{t_hat_o}\n"
        f"{COMPOSE_LABELS[2]}\n{t_hat_r}"
    )


def parse_decoder_input(composed: str) -> tuple[str, str, str]:
    """Recover (t_o, t_hat_o, t_hat_r) from a composed decoder input.

    Labels are matched at line starts in order; payload lines that merely
    resemble a label are tolerated because only the first occurrence of each
    label in sequence delimits a section.
    """
    pattern = (
        r"\AORIGINAL:\n(?P<t_o>.*?)\nTRANSFORMED:\n(?P<t_hat_o>.*?)\nRESPONSE:\n(?P<t_hat_r>.*)\Z"
    )
    m = re.match(pattern, composed, re.DOTALL)
    if not m:
        raise ValueError("text does not follow the decoder composition template")
    return m.group("t_o"), m.group("t_hat_o"), m.group("t_hat_r")
