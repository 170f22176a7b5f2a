"""Per-token continuation scoring under a HuggingFace causal LM.

Model specs are "hf:<path-or-id>" (the prefix is optional). Prompt and
continuation are tokenized separately and concatenated, so continuation
token boundaries are stable regardless of how a BPE would merge across the
prompt/continuation seam.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ModelLoadError, TokenizationError


def _resolve(spec: str) -> str:
    return spec[3:] if spec.startswith("hf:") else spec


class CausalScorer:
    """Wraps one causal LM + tokenizer for batched continuation scoring."""

    def __init__(self, model_spec: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - environment guard
            raise ModelLoadError(f"torch/transformers unavailable: {exc}") from exc
        self._torch = torch
        path = _resolve(model_spec)
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(path)
            self.model = AutoModelForCausalLM.from_pretrained(path)
        except Exception as exc:
            raise ModelLoadError(f"cannot load {model_spec!r}: {exc}") from exc
        self.model.eval()
        try:
            self.model.to(device)
        except Exception as exc:
            raise ModelLoadError(f"cannot move {model_spec!r} to {device!r}: {exc}") from exc
        self.device = device
        if self.tokenizer.pad_token_id is None:
            self.pad_id = self.tokenizer.eos_token_id or 0
        else:
            self.pad_id = self.tokenizer.pad_token_id

    def vocab_fingerprint(self) -> tuple:
        vocab = self.tokenizer.get_vocab()
        return (len(vocab), tuple(sorted(vocab.items())[:50]))

    def encode(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def sequence_ids(
        self, prompt: str, continuation: str, max_seq_len: int
    ) -> tuple[list[int], int]:
        """Token ids for prompt+continuation and the continuation start index.

        The prompt is truncated from the left if the sequence would exceed
        max_seq_len; an empty or untruncatably long continuation is an error.
        """
        prompt_ids = self.encode(prompt)
        cont_ids = self.encode(continuation)
        if not cont_ids:
            raise TokenizationError("continuation tokenizes to nothing")
        if len(cont_ids) + 1 > max_seq_len:
            raise TokenizationError(
                f"continuation of {len(cont_ids)} tokens exceeds max_seq_len {max_seq_len}"
            )
        room = max_seq_len - len(cont_ids)
        if len(prompt_ids) > room:
            prompt_ids = prompt_ids[-room:]
        if not prompt_ids:
            bos = self.tokenizer.bos_token_id
            if bos is None:
                raise TokenizationError("empty prompt and tokenizer has no BOS token")
            prompt_ids = [bos]
        return prompt_ids + cont_ids, len(prompt_ids)

    def score_batch(
        self, sequences: Sequence[tuple[list[int], int]]
    ) -> list[list[float]]:
        """Log-probabilities of each sequence's continuation tokens."""
        torch = self._torch
        max_len = max(len(ids) for ids, _ in sequences)
        batch = torch.full((len(sequences), max_len), self.pad_id, dtype=torch.long)
        mask = torch.zeros((len(sequences), max_len), dtype=torch.long)
        for row, (ids, _start) in enumerate(sequences):
            batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            mask[row, : len(ids)] = 1
        with torch.no_grad():
            logits = self.model(
                input_ids=batch.to(self.device), attention_mask=mask.to(self.device)
            ).logits
        logprobs = torch.log_softmax(logits.float(), dim=-1).cpu()
        out: list[list[float]] = []
        for row, (ids, start) in enumerate(sequences):
            values = [
                float(logprobs[row, pos - 1, ids[pos]]) for pos in range(start, len(ids))
            ]
            out.append(values)
        return out


def check_compatible(policy: CausalScorer, reference: CausalScorer) -> None:
    """Both models must share a tokenizer for one token_ids list to be valid."""
    if policy.vocab_fingerprint() != reference.vocab_fingerprint():
        raise ModelLoadError(
            "policy and reference tokenizers differ; scored records need one shared tokenization"
        )


def total(values: Sequence[float]) -> float:
    return math.fsum(values)
