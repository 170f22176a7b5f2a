"""Preference-optimization loss kernels over scored token sequences.

All kernels are pure functions of summed per-token log-probabilities under a
trainable policy and a frozen reference. The sigmoid losses are computed via
softplus so large log-ratio gaps cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

from .errors import EmptyInputError, NonPositiveBetaError

Which = Literal["policy", "reference"]
Method = Literal["dpo", "ipo"]


@dataclass(frozen=True)
class ScoredSequence:
    """Token ids with per-token natural-log probabilities under both models."""

    token_ids: tuple[int, ...]
    policy_logprobs: tuple[float, ...]
    reference_logprobs: tuple[float, ...]

    def __post_init__(self):
        n = len(self.token_ids)
        if n < 1:
            raise EmptyInputError("scored sequence must contain at least one token")
        if len(self.policy_logprobs) != n or len(self.reference_logprobs) != n:
            raise EmptyInputError("token and logprob lists must have equal length")
        # log-probabilities cannot exceed 0; tolerate float round-off only
        for lp in (*self.policy_logprobs, *self.reference_logprobs):
            if lp > 1e-9:
                raise EmptyInputError(f"log-probability {lp} is positive")

    @classmethod
    def make(cls, token_ids, policy_logprobs, reference_logprobs) -> "ScoredSequence":
        return cls(tuple(token_ids), tuple(policy_logprobs), tuple(reference_logprobs))


@dataclass(frozen=True)
class PrefBatchItem:
    chosen: ScoredSequence
    rejected: ScoredSequence


@dataclass(frozen=True)
class PrefStats:
    mean_loss: float
    reward_margin: float
    reward_accuracy: float


def softplus(x: float) -> float:
    """log(1 + e^x), stable for any magnitude of x."""
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def log_sigmoid(x: float) -> float:
    return -softplus(-x)


def sequence_logprob(s: ScoredSequence, which: Which = "policy") -> float:
    """Sum of the selected per-token log-probabilities."""
    values = s.policy_logprobs if which == "policy" else s.reference_logprobs
    return math.fsum(values)


def log_ratio_gap(item: PrefBatchItem) -> float:
    """h = (logpi(chosen) - logref(chosen)) - (logpi(rejected) - logref(rejected))."""
    delta_w = sequence_logprob(item.chosen, "policy") - sequence_logprob(
        item.chosen, "reference"
    )
    delta_l = sequence_logprob(item.rejected, "policy") - sequence_logprob(
        item.rejected, "reference"
    )
    return delta_w - delta_l


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise NonPositiveBetaError(f"beta must be > 0, got {beta}")


def dpo_loss(item: PrefBatchItem, beta: float) -> tuple[float, float, bool]:
    """-log sigmoid(beta * h); returns (loss, beta-scaled margin, correct flag)."""
    _check_beta(beta)
    h = log_ratio_gap(item)
    loss = softplus(-beta * h)
    return loss, beta * h, h > 0


def ipo_loss(item: PrefBatchItem, beta: float) -> float:
    """(h - 1/(2 beta))^2 — squared distance to the fixed target gap."""
    _check_beta(beta)
    h = log_ratio_gap(item)
    return (h - 1.0 / (2.0 * beta)) ** 2


def reward_bt_loss(r_chosen: float, r_rejected: float) -> float:
    """Pairwise Bradley-Terry: -log sigmoid(r_chosen - r_rejected)."""
    return softplus(-(r_chosen - r_rejected))


def dpo_grad_wrt_sums(item: PrefBatchItem, beta: float) -> tuple[float, float]:
    """d(loss)/d(policy logprob sum) for (chosen, rejected)."""
    _check_beta(beta)
    h = log_ratio_gap(item)
    # d/dh of softplus(-beta h) = -beta * sigmoid(-beta h)
    g = -beta * _sigmoid(-beta * h)
    return g, -g


def ipo_grad_wrt_sums(item: PrefBatchItem, beta: float) -> tuple[float, float]:
    _check_beta(beta)
    h = log_ratio_gap(item)
    g = 2.0 * (h - 1.0 / (2.0 * beta))
    return g, -g


def sigmoid(x: float) -> float:
    """Overflow-safe logistic function."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_sigmoid = sigmoid


def load_scored_jsonl(path) -> list[tuple[str, PrefBatchItem]]:
    """Read scored.jsonl produced by an adapter and pair chosen/rejected rows.

    Schema per line: {"id","role":"chosen"|"rejected","token_ids":[...],
    "policy_logprobs":[...],"reference_logprobs":[...]}.
    """
    from .corpus import iter_jsonl
    from .errors import SchemaError

    halves: dict[str, dict[str, ScoredSequence]] = {}
    for line_no, obj, err in iter_jsonl(path):
        if err is not None:
            raise SchemaError(err, line_no)
        try:
            rec_id = str(obj["id"])
            role = obj["role"]
            seq = ScoredSequence.make(
                [int(t) for t in obj["token_ids"]],
                [float(x) for x in obj["policy_logprobs"]],
                [float(x) for x in obj["reference_logprobs"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad scored record: {exc}", line_no) from exc
        if role not in ("chosen", "rejected"):
            raise SchemaError(f"role must be chosen|rejected, got {role!r}", line_no)
        halves.setdefault(rec_id, {})[role] = seq
    items: list[tuple[str, PrefBatchItem]] = []
    for rec_id in sorted(halves):
        pair = halves[rec_id]
        if "chosen" not in pair or "rejected" not in pair:
            raise SchemaError(f"record {rec_id!r} is missing one role")
        items.append((rec_id, PrefBatchItem(pair["chosen"], pair["rejected"])))
    return items


def batch_stats(items: Sequence[PrefBatchItem], method: Method, beta: float) -> PrefStats:
    """Mean loss, mean beta-scaled margin, and fraction of correct pairs.

    Reductions run left to right so reported numbers are bit-stable across
    runs regardless of how the per-item work was scheduled.
    """
    _check_beta(beta)
    if not items:
        raise EmptyInputError("batch is empty")
    loss_total = 0.0
    margin_total = 0.0
    correct = 0
    for item in items:
        h = log_ratio_gap(item)
        if method == "dpo":
            loss_total += softplus(-beta * h)
        elif method == "ipo":
            loss_total += (h - 1.0 / (2.0 * beta)) ** 2
        else:
            raise ValueError(f"unknown method: {method}")
        margin_total += beta * h
        if h > 0:
            correct += 1
    n = len(items)
    return PrefStats(loss_total / n, margin_total / n, correct / n)
