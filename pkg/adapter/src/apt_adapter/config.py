from __future__ import annotations

from dataclasses import dataclass

TEMPLATES = ("ptg-v1",)


@dataclass(frozen=True)
class AdapterConfig:
    """Settings for logprob export runs."""

    model_id: str
    device: str = "cpu"
    batch_size: int = 8
    max_seq_len: int = 512
    template: str = "ptg-v1"

    def __post_init__(self):
        if self.max_seq_len < 8:
            raise ValueError("max_seq_len must be at least 8")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.template not in TEMPLATES:
            raise ValueError(f"unknown prompt template {self.template!r}")
