"""Reference-based overlap metrics: sentence BLEU and ROUGE-1/2/L.

Tokenization lowercases and keeps punctuation marks as standalone tokens,
because punctuation edits are one of the transformation categories the
toolkit evaluates — the metrics must be able to see them.

BLEU is deliberately unsmoothed: a zero clipped precision zeroes the score.
This is the strictest reading and explains divergences from toolkits that
smooth by default.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyInputError

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class OverlapScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "OverlapScore":
        if precision + recall == 0.0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2.0 * precision * recall / (precision + recall))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions times brevity penalty.

    Orders run 1..min(max_n, candidate length). The brevity penalty uses the
    reference length closest to the candidate's (ties take the shorter).
    """
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references if tokenize(r)]
    if not cand or not refs:
        raise EmptyInputError("candidate and at least one reference must be non-empty")

    top_n = min(max_n, len(cand))
    precisions = []
    for n in range(1, top_n + 1):
        cand_counts = _ngrams(cand, n)
        clipped = Counter()
        for ref in refs:
            ref_counts = _ngrams(ref, n)
            for gram, count in cand_counts.items():
                clipped[gram] = max(clipped[gram], min(count, ref_counts[gram]))
        overlap = sum(clipped.values())
        total = sum(cand_counts.values())
        precisions.append(overlap / total)
    if any(p == 0.0 for p in precisions):
        return 0.0

    c = len(cand)
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = min(1.0, math.exp(1.0 - r / c))
    geo = math.prod(precisions) ** (1.0 / top_n)
    return bp * geo


def rouge_n(candidate: str, reference: str, n: int) -> OverlapScore:
    """Clipped n-gram overlap (n = 1 or 2)."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if len(cand) < n and len(ref) < n:
        raise EmptyInputError(f"both sides have fewer than {n} tokens")
    cand_counts = _ngrams(cand, n)
    ref_counts = _ngrams(ref, n)
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    n_cand = sum(cand_counts.values())
    n_ref = sum(ref_counts.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    return OverlapScore.from_pr(precision, recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row dynamic program
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        row = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
        prev = row
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> OverlapScore:
    """Longest-common-subsequence overlap over token sequences."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyInputError("both sides must be non-empty")
    lcs = _lcs_length(cand, ref)
    return OverlapScore.from_pr(lcs / len(cand), lcs / len(ref))
