"""Prompt templates: bundled text files with $-style substitution.

Templates live in ``citywalk/prompts/``; a directory of overrides can be
configured and is consulted first. ``string.Template`` is used instead of
``str.format`` so JSON braces in the templates need no escaping.
"""

from __future__ import annotations

import os
from pathlib import Path
from string import Template

_BUNDLED = Path(__file__).parent / "prompts"

PROMPT_DIR_ENV = "CITYWALK_PROMPT_DIR"


class PromptError(KeyError):
    pass


def load_template(name: str, prompt_dir: str | Path | None = None) -> str:
    override_dir = prompt_dir or os.environ.get(PROMPT_DIR_ENV)
    for base in ([Path(override_dir)] if override_dir else []) + [_BUNDLED]:
        path = base / f"{name}.txt"
        if path.exists():
            return path.read_text(encoding="utf-8")
    raise PromptError(f"no prompt template named {name!r}")


def render_prompt(name: str, prompt_dir: str | Path | None = None, **values: str) -> str:
    template = Template(load_template(name, prompt_dir))
    try:
        return template.substitute(**values)
    except KeyError as exc:
        raise PromptError(f"template {name!r} missing value for {exc}") from exc
