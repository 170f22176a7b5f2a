"""The generation prompt, byte-for-byte as the toolkit renders it.

This string is a wire contract shared with the toolkit: continuations are
scored immediately after the trailing space of "Answer: ". Keep in lockstep
with the toolkit's corpus module.
"""

from __future__ import annotations

from typing import Sequence


def render_prompt(original: str, type_labels: Sequence[str]) -> str:
    if not original or not type_labels:
        raise ValueError("original sentence and at least one type label required")
    labels = ", ".join(f"'{label}'" for label in type_labels)
    return (
        "Given the following sentence, generate a paraphrase with the following type.\n"
        f"Sentence: ['{original}']\n"
        f"Paraphrase Types: [{labels}].\n"
        "Answer: "
    )
