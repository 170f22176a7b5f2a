"""Paraphrase-type detection harness.

The trained classifier itself lives outside this toolkit; what lives here is
everything around it: the weighted multilabel loss math, class weighting,
threshold decisioning, a deterministic rule-based baseline detector, and the
evaluation reports. External model outputs come in as logits or label lists
over the ten harness types, aligned to ascending type-id order.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .corpus import SentencePairRecord, iter_jsonl
from .errors import AllZeroError, LengthMismatchError, SchemaError
from .evalstats import ClassF1, F1Report, f1_scores
from .prefloss import softplus
from .taxonomy import ParaphraseType, TypeSet, parse_type, top10

_WORD = re.compile(r"\w+", re.UNICODE)
_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class ClassWeights:
    weights: tuple[float, ...]

    def __post_init__(self):
        if any(not math.isfinite(w) or w <= 0 for w in self.weights):
            raise ValueError("class weights must be finite and positive")


@dataclass
class DetectionExample:
    pair: SentencePairRecord
    logits: Optional[list[float]] = None
    predicted: Optional[TypeSet] = None

    def __post_init__(self):
        if self.logits is not None and len(self.logits) != len(top10()):
            raise LengthMismatchError("logits must align to the 10 harness types")


def class_weights(counts: Sequence[int], clamp: tuple[float, float] = (0.1, 50.0)) -> ClassWeights:
    """Inverse-frequency weights: w_c = N / (K * max(n_c, 1)), clamped.

    Rare types get proportionally larger positive-term weight; the clamp
    keeps an absent class from producing an unbounded weight.
    """
    if not any(c > 0 for c in counts):
        raise AllZeroError("all class counts are zero")
    total = sum(counts)
    k = len(counts)
    lo, hi = clamp
    return ClassWeights(
        tuple(min(max(total / (k * max(c, 1)), lo), hi) for c in counts)
    )


def weighted_bce_loss(
    logits: Sequence[float],
    targets: Sequence[int],
    weights: ClassWeights,
) -> float:
    """Mean binary cross-entropy with logits, positive terms weighted per class."""
    if not (len(logits) == len(targets) == len(weights.weights)):
        raise LengthMismatchError("logits, targets and weights must align")
    total = 0.0
    for z, t, w in zip(logits, targets, weights.weights):
        if t:
            total += w * softplus(-z)
        else:
            total += softplus(z)
    return total / len(logits)


def decide(logits: Sequence[float], threshold: float = 0.5) -> TypeSet:
    """Threshold sigmoid(logit) per class; boundary values are included."""
    classes = list(top10())
    if len(logits) != len(classes):
        raise LengthMismatchError("logits must align to the 10 harness types")
    picked = []
    for z, cls in zip(logits, classes):
        p = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
        if p >= threshold:
            picked.append(cls)
    return TypeSet(picked)


# ---------------------------------------------------------------------------
# Rule-based baseline detector


def _content_tokens(text: str) -> list[str]:
    return [w.lower() for w in _WORD.findall(text)]


def _punct_tokens(text: str) -> list[str]:
    return [t for t in _TOKEN.findall(text) if not _WORD.fullmatch(t)]


def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        row = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            row[j] = min(prev[j] + 1, row[j - 1] + 1, prev[j - 1] + cost)
        prev = row
    return prev[-1]


def _is_proper_subbag(small: dict, big: dict) -> bool:
    if sum(small.values()) >= sum(big.values()):
        return False
    return all(big.get(tok, 0) >= n for tok, n in small.items())


def heuristic_detect(pair: SentencePairRecord) -> TypeSet:
    """Deterministic surface rules for the four detectable transformations.

    (a) addition/deletion: one side's content tokens are a proper sub-bag of
        the other's. (b) punctuation changes: same content bag, different
        punctuation sequence. (c) change of order: same content bag,
        different content sequence. (d) spelling changes: exactly one
        aligned content token respelled (edit distance 1-2 sharing a 3-char
        prefix or suffix). Rules are independent and may fire jointly.
    """
    from collections import Counter

    orig_content = _content_tokens(pair.original)
    para_content = _content_tokens(pair.paraphrase)
    orig_bag = Counter(orig_content)
    para_bag = Counter(para_content)
    orig_punct = _punct_tokens(pair.original)
    para_punct = _punct_tokens(pair.paraphrase)

    detected: list[ParaphraseType] = []
    t = {cls.canonical_label: cls for cls in top10()}

    if _is_proper_subbag(orig_bag, para_bag) or _is_proper_subbag(para_bag, orig_bag):
        detected.append(t["Addition/Deletion"])

    if orig_bag == para_bag and orig_punct != para_punct:
        detected.append(t["Punctuation changes"])

    if orig_bag == para_bag and orig_content != para_content:
        detected.append(t["Change of order"])

    if len(orig_content) == len(para_content):
        diffs = [
            (a, b) for a, b in zip(orig_content, para_content) if a != b
        ]
        if len(diffs) == 1:
            a, b = diffs[0]
            if 1 <= _edit_distance(a, b) <= 2 and (
                (len(a) >= 3 and len(b) >= 3 and (a[:3] == b[:3] or a[-3:] == b[-3:]))
            ):
                detected.append(t["Spelling changes"])

    return TypeSet(detected)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate_ptd(
    predicted: Sequence[TypeSet],
    gold: Sequence[TypeSet],
    seed: int = 0,
    classes: TypeSet | None = None,
    n_resamples: int = 1000,
    level: float = 0.95,
) -> F1Report:
    """Per-class F1 with percentile-bootstrap CIs over example resamples.

    All classes share each resample's example draw, so per-class intervals
    come from one coherent resampling plan. The reported interval always
    contains the point estimate.
    """
    if len(predicted) != len(gold):
        raise LengthMismatchError(f"lengths differ: {len(predicted)} vs {len(gold)}")
    classes = classes if classes is not None else top10()
    point = f1_scores(predicted, gold, classes)
    n = len(gold)
    class_list = list(classes)
    samples = np.empty((n_resamples, len(class_list)), dtype=float)
    pred_flags = np.array(
        [[cls in p for cls in class_list] for p in predicted], dtype=bool
    )
    gold_flags = np.array(
        [[cls in g for cls in class_list] for g in gold], dtype=bool
    )
    for i in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        idx = rng.integers(0, n, size=n)
        p = pred_flags[idx]
        g = gold_flags[idx]
        tp = (p & g).sum(axis=0)
        fp = (p & ~g).sum(axis=0)
        fn = (~p & g).sum(axis=0)
        denom = 2 * tp + fp + fn
        with np.errstate(invalid="ignore"):
            f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 0.0)
        samples[i] = f1
    tail = (1.0 - level) / 2.0
    entries = []
    for j, base in enumerate(point.per_class):
        lower = float(np.quantile(samples[:, j], tail))
        upper = float(np.quantile(samples[:, j], 1.0 - tail))
        entries.append(
            ClassF1(
                base.label,
                base.f1,
                min(lower, base.f1),
                max(upper, base.f1),
                base.support,
            )
        )
    return F1Report(tuple(entries), point.macro_f1, point.weighted_f1)


def agreement_with_humans(
    predicted: Sequence[TypeSet],
    human: Sequence[tuple[ParaphraseType, bool]],
) -> F1Report:
    """Agreement of detector output with human target-type correctness calls.

    For each example only the annotated target type is judged: the human
    `correct` flag is the gold positive, membership of the target type in
    the detector's set is the prediction.
    """
    if len(predicted) != len(human):
        raise LengthMismatchError(f"lengths differ: {len(predicted)} vs {len(human)}")
    classes = TypeSet(t for t, _ in human)
    gold_sets = [TypeSet([t]) if correct else TypeSet() for t, correct in human]
    pred_sets = [
        TypeSet([t]) if t in pred else TypeSet() for pred, (t, _) in zip(predicted, human)
    ]
    return f1_scores(pred_sets, gold_sets, classes)


def load_predictions(
    path, threshold: float = 0.5
) -> list[tuple[str, TypeSet]]:
    """Read ptd_preds.jsonl: {"id","logits":[...]} or {"id","predicted":[labels]}."""
    out = []
    for line_no, obj, err in iter_jsonl(path):
        if err is not None:
            raise SchemaError(err, line_no)
        if "id" not in obj:
            raise SchemaError("missing field 'id'", line_no)
        rec_id = str(obj["id"])
        if "logits" in obj:
            logits = [float(z) for z in obj["logits"]]
            if len(logits) != len(top10()):
                raise SchemaError("logits must have length 10", line_no)
            out.append((rec_id, decide(logits, threshold)))
        elif "predicted" in obj:
            labels = [str(t) for t in obj["predicted"]]
            out.append((rec_id, TypeSet(parse_type(l, line_no) for l in labels)))
        else:
            raise SchemaError("need either 'logits' or 'predicted'", line_no)
    return out


def hyper_grid(**axes: Sequence) -> Iterator[dict]:
    """Cartesian grid over named hyperparameter axes, in a fixed order.

    Stand-in for automated tuners: callers sweep e.g. learning_rate,
    weight_decay and threshold and pick by validation metric.
    """
    names = sorted(axes)
    for combo in itertools.product(*(axes[name] for name in names)):
        yield dict(zip(names, combo))
