"""A deliberately small autoregressive language model.

One causal self-attention block plus a tanh MLP over word-level tokens,
everything float64 numpy with hand-written backward passes, so training runs
on a laptop and every gradient can be checked against finite differences.
Stands in for the full-scale models the pipeline contracts were written for:
prompt format, preference losses, schedulers and clipping all behave the
same, just at a few thousand parameters.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .corpus import PreferenceRecord, render_prompt
from .errors import (
    EmptyCorpusError,
    EmptyPairsError,
    IoError,
    VocabTooSmallError,
)
from .prefloss import PrefStats, sigmoid, softplus

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
_WORD_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)

LossKind = Literal["sft", "dpo", "ipo"]


def word_tokens(text: str) -> list[str]:
    return _WORD_TOKEN.findall(text)


class Vocab:
    """Word-level vocabulary with character fallback for unseen words."""

    def __init__(self, tokens: Sequence[str]):
        specials = [PAD, BOS, EOS, UNK]
        rest = [t for t in dict.fromkeys(tokens) if t not in specials]
        self.tokens: list[str] = specials + rest
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocab":
        words: dict[str, None] = {}
        chars: dict[str, None] = {}
        for text in texts:
            for tok in word_tokens(text):
                words[tok] = None
                for ch in tok:
                    chars[ch] = None
        return cls(sorted(words) + sorted(c for c in chars if c not in words))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def bos_id(self) -> int:
        return self.index[BOS]

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for tok in word_tokens(text):
            if tok in self.index:
                ids.append(self.index[tok])
            else:
                # character fallback keeps unseen words representable
                ids.extend(self.index.get(ch, self.index[UNK]) for ch in tok)
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(
            self.tokens[i] for i in ids if self.tokens[i] not in (PAD, BOS, EOS)
        )


@dataclass(frozen=True)
class TinyConfig:
    embed_dim: int = 32
    hidden_dim: int = 64
    context_len: int = 128
    seed: int = 0


@dataclass
class TrainConfig:
    learning_rate: float = 3e-3
    weight_decay: float = 0.0
    beta: float = 0.2
    max_grad_norm: float = 200.0
    scheduler: Literal["cosine", "plateau"] = "cosine"
    warmup_ratio: float = 0.0
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    patience: int = 3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")


class TinyModel:
    def __init__(self, vocab: Vocab, config: TinyConfig, params: dict[str, np.ndarray]):
        self.vocab = vocab
        self.config = config
        self.params = params

    def copy(self) -> "TinyModel":
        return TinyModel(
            self.vocab, self.config, {k: v.copy() for k, v in self.params.items()}
        )

    def num_params(self) -> int:
        return sum(v.size for v in self.params.values())


def init_model(vocab: Vocab, config: TinyConfig, seed: int | None = None) -> TinyModel:
    """Deterministic initialization; same seed gives bit-identical parameters."""
    if len(vocab) < 4:
        raise VocabTooSmallError(f"vocab has {len(vocab)} tokens, need at least 4")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    v, d, h, c = len(vocab), config.embed_dim, config.hidden_dim, config.context_len
    std = 0.02

    def w(*shape):
        return rng.normal(0.0, std, size=shape)

    params = {
        "tok_emb": w(v, d),
        "pos_emb": w(c, d),
        "wq": w(d, d),
        "wk": w(d, d),
        "wv": w(d, d),
        "wo": w(d, d),
        "w1": w(d, h),
        "b1": np.zeros(h),
        "w2": w(h, d),
        "b2": np.zeros(d),
        "w_out": w(d, v),
        "b_out": np.zeros(v),
    }
    return TinyModel(vocab, config, params)


# ---------------------------------------------------------------------------
# Forward / backward


def _forward(model: TinyModel, ids: Sequence[int]):
    p = model.params
    t = len(ids)
    if t > model.config.context_len:
        raise ValueError(f"sequence length {t} exceeds context {model.config.context_len}")
    d = model.config.embed_dim
    idx = np.asarray(ids, dtype=int)
    x0 = p["tok_emb"][idx] + p["pos_emb"][:t]
    q = x0 @ p["wq"]
    k = x0 @ p["wk"]
    v = x0 @ p["wv"]
    scores = (q @ k.T) / math.sqrt(d)
    mask = np.triu(np.ones((t, t), dtype=bool), k=1)
    scores = np.where(mask, -np.inf, scores)
    scores = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=1, keepdims=True)
    att_out = attn @ v
    proj = att_out @ p["wo"]
    x1 = x0 + proj
    hpre = x1 @ p["w1"] + p["b1"]
    hact = np.tanh(hpre)
    mlp = hact @ p["w2"] + p["b2"]
    x2 = x1 + mlp
    logits = x2 @ p["w_out"] + p["b_out"]
    cache = {
        "idx": idx,
        "x0": x0,
        "q": q,
        "k": k,
        "v": v,
        "attn": attn,
        "att_out": att_out,
        "x1": x1,
        "hact": hact,
        "x2": x2,
    }
    return logits, cache


def _backward(model: TinyModel, cache: dict, dlogits: np.ndarray, grads: dict) -> None:
    """Accumulate parameter gradients for one sequence into ``grads``."""
    p = model.params
    d = model.config.embed_dim
    x2, x1, x0 = cache["x2"], cache["x1"], cache["x0"]
    hact, attn = cache["hact"], cache["attn"]
    q, k, v = cache["q"], cache["k"], cache["v"]
    idx = cache["idx"]
    t = len(idx)

    grads["w_out"] += x2.T @ dlogits
    grads["b_out"] += dlogits.sum(axis=0)
    dx2 = dlogits @ p["w_out"].T

    dmlp = dx2
    dx1 = dx2.copy()
    grads["w2"] += hact.T @ dmlp
    grads["b2"] += dmlp.sum(axis=0)
    dhact = dmlp @ p["w2"].T
    dhpre = dhact * (1.0 - hact * hact)
    grads["w1"] += x1.T @ dhpre
    grads["b1"] += dhpre.sum(axis=0)
    dx1 += dhpre @ p["w1"].T

    dproj = dx1
    grads["wo"] += cache["att_out"].T @ dproj
    datt_out = dproj @ p["wo"].T
    dattn = datt_out @ v.T
    dv = attn.T @ datt_out
    dscores = attn * (dattn - (dattn * attn).sum(axis=1, keepdims=True))
    dq = (dscores @ k) / math.sqrt(d)
    dk = (dscores.T @ q) / math.sqrt(d)

    dx0 = dx1.copy()
    dx0 += dq @ p["wq"].T + dk @ p["wk"].T + dv @ p["wv"].T
    grads["wq"] += x0.T @ dq
    grads["wk"] += x0.T @ dk
    grads["wv"] += x0.T @ dv

    np.add.at(grads["tok_emb"], idx, dx0)
    grads["pos_emb"][:t] += dx0


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _zero_grads(model: TinyModel) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in model.params.items()}


def forward_probs(model: TinyModel, ids: Sequence[int]) -> np.ndarray:
    """Next-token distribution at every position; rows sum to 1."""
    logits, _ = _forward(model, ids)
    shifted = np.exp(_log_softmax(logits))
    return shifted


# ---------------------------------------------------------------------------
# Sequence scoring


def _sequence_ids(model: TinyModel, prompt: str, continuation: str) -> tuple[list[int], int]:
    """Token ids [BOS] + prompt + continuation + [EOS], and continuation start."""
    vocab = model.vocab
    prompt_ids = vocab.encode(prompt)
    cont_ids = vocab.encode(continuation)
    ids = [vocab.bos_id] + prompt_ids + cont_ids + [vocab.eos_id]
    start = 1 + len(prompt_ids)
    return ids, start


def score_sequence(model: TinyModel, prompt: str, continuation: str) -> tuple[list[int], list[float]]:
    """Per-token log-probabilities of the continuation (plus EOS) given the prompt."""
    ids, start = _sequence_ids(model, prompt, continuation)
    logits, _ = _forward(model, ids)
    logp = _log_softmax(logits)
    tokens = ids[start:]
    values = [float(logp[i - 1, ids[i]]) for i in range(start, len(ids))]
    return tokens, values


def _continuation_loss_grad(model, ids, start, coeff):
    """d(coeff * sum logp(continuation))/dlogits, plus the logprob sum."""
    logits, cache = _forward(model, ids)
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    total = 0.0
    dlogits = np.zeros_like(logits)
    for i in range(start, len(ids)):
        pos = i - 1
        total += logp[pos, ids[i]]
        dlogits[pos] = coeff * probs[pos]
        dlogits[pos, ids[i]] -= coeff
    # dlogits currently holds coeff * (p - onehot) = d(-coeff*sum logp)… flip:
    return float(total), -dlogits, cache


# ---------------------------------------------------------------------------
# Optimizer and schedulers


class _AdamW:
    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, model: TinyModel):
        self.m = _zero_grads(model)
        self.v = _zero_grads(model)
        self.t = 0

    def step(self, model: TinyModel, grads: dict, lr: float, weight_decay: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, param in model.params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            mhat = self.m[name] / bc1
            vhat = self.v[name] / bc2
            param -= lr * mhat / (np.sqrt(vhat) + self.eps)
            if weight_decay:
                param -= lr * weight_decay * param


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def cosine_lr(base_lr: float, step: int, total_steps: int, warmup_ratio: float) -> float:
    warmup = int(math.floor(warmup_ratio * total_steps))
    if step < warmup:
        return base_lr * (step + 1) / warmup
    span = max(total_steps - warmup, 1)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * (step - warmup) / span))


class PlateauScheduler:
    """Halve the LR when the monitored loss stalls for `patience` epochs."""

    def __init__(self, base_lr: float, patience: int, min_delta: float = 1e-4):
        self.lr = base_lr
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.stall = 0

    def update(self, monitored: float) -> float:
        if monitored < self.best - self.min_delta:
            self.best = monitored
            self.stall = 0
        else:
            self.stall += 1
            if self.stall >= self.patience:
                self.lr *= 0.5
                self.stall = 0
        return self.lr


# ---------------------------------------------------------------------------
# Training


def train_sft(
    model: TinyModel,
    corpus: Sequence[tuple[str, str]],
    config: TrainConfig,
) -> tuple[TinyModel, list[float]]:
    """Cross-entropy training on target tokens only (prompt tokens masked).

    Returns a trained copy of the model and the per-epoch mean loss in
    nats per predicted token.
    """
    if not corpus:
        raise EmptyCorpusError("SFT corpus is empty")
    model = model.copy()
    encoded = [_sequence_ids(model, prompt, target) for prompt, target in corpus]
    opt = _AdamW(model)
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = max(1, math.ceil(len(encoded) / config.batch_size))
    total_steps = config.epochs * steps_per_epoch
    plateau = PlateauScheduler(config.learning_rate, config.patience)
    curve: list[float] = []
    step = 0
    for _epoch in range(config.epochs):
        order = rng.permutation(len(encoded))
        epoch_ce = 0.0
        epoch_tokens = 0
        for b in range(steps_per_epoch):
            batch = order[b * config.batch_size : (b + 1) * config.batch_size]
            if batch.size == 0:
                continue
            grads = _zero_grads(model)
            batch_tokens = sum(len(encoded[i][0]) - encoded[i][1] for i in batch)
            for i in batch:
                ids, start = encoded[i]
                logits, cache = _forward(model, ids)
                logp = _log_softmax(logits)
                probs = np.exp(logp)
                dlogits = np.zeros_like(logits)
                for j in range(start, len(ids)):
                    pos = j - 1
                    epoch_ce += -logp[pos, ids[j]]
                    dlogits[pos] = probs[pos] / batch_tokens
                    dlogits[pos, ids[j]] -= 1.0 / batch_tokens
                _backward(model, cache, dlogits, grads)
                epoch_tokens += len(ids) - start
            clip_global_norm(grads, config.max_grad_norm)
            if config.scheduler == "cosine":
                lr = cosine_lr(config.learning_rate, step, total_steps, config.warmup_ratio)
            else:
                lr = plateau.lr
            opt.step(model, grads, lr, config.weight_decay)
            step += 1
        epoch_loss = epoch_ce / max(epoch_tokens, 1)
        curve.append(float(epoch_loss))
        if config.scheduler == "plateau":
            plateau.update(epoch_loss)
    return model, curve


def default_prompt(pair: PreferenceRecord) -> str:
    """The generation template; preference scoring conditions on it by default."""
    return render_prompt(pair.original, [pair.target_type])


def _pref_sequences(model: TinyModel, pair: PreferenceRecord, prompt_fn=default_prompt):
    prompt = prompt_fn(pair)
    chosen = _sequence_ids(model, prompt, pair.chosen)
    rejected = _sequence_ids(model, prompt, pair.rejected)
    return chosen, rejected


def _reference_sums(reference: TinyModel, sequences) -> list[tuple[float, float]]:
    out = []
    for (c_ids, c_start), (r_ids, r_start) in sequences:
        c_logits, _ = _forward(reference, c_ids)
        r_logits, _ = _forward(reference, r_ids)
        c_logp = _log_softmax(c_logits)
        r_logp = _log_softmax(r_logits)
        c_sum = float(sum(c_logp[i - 1, c_ids[i]] for i in range(c_start, len(c_ids))))
        r_sum = float(sum(r_logp[i - 1, r_ids[i]] for i in range(r_start, len(r_ids))))
        out.append((c_sum, r_sum))
    return out


def _pref_loss_and_coeff(h: float, method: str, beta: float) -> tuple[float, float]:
    """Per-item loss and d(loss)/dh."""
    if method == "dpo":
        return softplus(-beta * h), -beta * sigmoid(-beta * h)
    if method == "ipo":
        gap = h - 1.0 / (2.0 * beta)
        return gap * gap, 2.0 * gap
    raise ValueError(f"unknown method: {method}")


def train_pref(
    model: TinyModel,
    reference: TinyModel,
    pairs: Sequence[PreferenceRecord],
    method: Literal["dpo", "ipo"],
    config: TrainConfig,
    prompt_fn=default_prompt,
) -> tuple[TinyModel, list[PrefStats]]:
    """Preference-optimize a copy of the model against a frozen reference.

    Per step the chosen and rejected continuations are scored under policy
    and reference, the selected kernel's gradient flows into the policy, the
    global grad norm is clipped, and the scheduler advances. Reference sums
    are computed once up front since the reference never moves. `prompt_fn`
    controls what each pair's continuations are conditioned on.
    """
    if not pairs:
        raise EmptyPairsError("no preference pairs")
    model = model.copy()
    sequences = [_pref_sequences(model, pair, prompt_fn) for pair in pairs]
    ref_sums = _reference_sums(reference, sequences)
    opt = _AdamW(model)
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = max(1, math.ceil(len(pairs) / config.batch_size))
    total_steps = config.epochs * steps_per_epoch
    plateau = PlateauScheduler(config.learning_rate, config.patience)
    curve: list[PrefStats] = []
    step = 0
    for _epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        losses: list[float] = []
        margins: list[float] = []
        correct = 0
        for b in range(steps_per_epoch):
            batch = order[b * config.batch_size : (b + 1) * config.batch_size]
            if batch.size == 0:
                continue
            grads = _zero_grads(model)
            for i in batch:
                (c_ids, c_start), (r_ids, r_start) = sequences[i]
                ref_c, ref_r = ref_sums[i]
                c_logits, c_cache = _forward(model, c_ids)
                r_logits, r_cache = _forward(model, r_ids)
                c_logp = _log_softmax(c_logits)
                r_logp = _log_softmax(r_logits)
                pol_c = float(
                    sum(c_logp[j - 1, c_ids[j]] for j in range(c_start, len(c_ids)))
                )
                pol_r = float(
                    sum(r_logp[j - 1, r_ids[j]] for j in range(r_start, len(r_ids)))
                )
                h = (pol_c - ref_c) - (pol_r - ref_r)
                loss, dloss_dh = _pref_loss_and_coeff(h, method, config.beta)
                losses.append(loss)
                margins.append(config.beta * h)
                correct += h > 0
                scale = dloss_dh / len(batch)
                _accumulate_pref_grads(model, c_logits, c_cache, c_ids, c_start, scale, grads)
                _accumulate_pref_grads(model, r_logits, r_cache, r_ids, r_start, -scale, grads)
            clip_global_norm(grads, config.max_grad_norm)
            if config.scheduler == "cosine":
                lr = cosine_lr(config.learning_rate, step, total_steps, config.warmup_ratio)
            else:
                lr = plateau.lr
            opt.step(model, grads, lr, config.weight_decay)
            step += 1
        epoch_loss = sum(losses) / len(losses)
        curve.append(
            PrefStats(
                mean_loss=float(epoch_loss),
                reward_margin=float(sum(margins) / len(margins)),
                reward_accuracy=correct / len(losses),
            )
        )
        if config.scheduler == "plateau":
            plateau.update(epoch_loss)
    return model, curve


def _accumulate_pref_grads(model, logits, cache, ids, start, dloss_dsum, grads):
    """Chain d(loss)/d(logprob sum) into dlogits and run backward.

    d(sum logp)/dlogits[pos] = onehot - probs, so
    dloss/dlogits = dloss_dsum * (onehot - probs).
    """
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    dlogits = np.zeros_like(logits)
    for j in range(start, len(ids)):
        pos = j - 1
        dlogits[pos] = -dloss_dsum * probs[pos]
        dlogits[pos, ids[j]] += dloss_dsum
    _backward(model, cache, dlogits, grads)


def eval_pref(
    model: TinyModel,
    reference: TinyModel,
    pairs: Sequence[PreferenceRecord],
    method: Literal["dpo", "ipo"],
    beta: float,
    prompt_fn=default_prompt,
) -> PrefStats:
    """Score pairs without touching parameters; returns batch statistics."""
    if not pairs:
        raise EmptyPairsError("no preference pairs")
    losses: list[float] = []
    margins: list[float] = []
    correct = 0
    for pair in pairs:
        (c_ids, c_start), (r_ids, r_start) = _pref_sequences(model, pair, prompt_fn)
        ref_c, ref_r = _reference_sums(reference, [((c_ids, c_start), (r_ids, r_start))])[0]
        c_logits, _ = _forward(model, c_ids)
        r_logits, _ = _forward(model, r_ids)
        c_logp = _log_softmax(c_logits)
        r_logp = _log_softmax(r_logits)
        pol_c = float(sum(c_logp[j - 1, c_ids[j]] for j in range(c_start, len(c_ids))))
        pol_r = float(sum(r_logp[j - 1, r_ids[j]] for j in range(r_start, len(r_ids))))
        h = (pol_c - ref_c) - (pol_r - ref_r)
        loss, _unused = _pref_loss_and_coeff(h, method, beta)
        losses.append(loss)
        margins.append(beta * h)
        correct += h > 0
    n = len(pairs)
    return PrefStats(sum(losses) / n, sum(margins) / n, correct / n)


# ---------------------------------------------------------------------------
# Generation


def generate(
    model: TinyModel,
    prompt: str,
    max_len: int = 32,
    seed: int = 0,
    greedy: bool = True,
) -> str:
    """Generate a continuation; greedy is deterministic, sampling is seeded."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    vocab = model.vocab
    ids = [vocab.bos_id] + vocab.encode(prompt)
    rng = np.random.default_rng(seed)
    out: list[int] = []
    for _ in range(max_len):
        window = ids[-model.config.context_len :]
        logits, _ = _forward(model, window)
        logp = _log_softmax(logits[-1:])[0]
        if greedy:
            nxt = int(np.argmax(logp))
        else:
            nxt = int(rng.choice(len(logp), p=np.exp(logp)))
        if nxt == vocab.eos_id:
            break
        out.append(nxt)
        ids.append(nxt)
    return vocab.decode(out)


# ---------------------------------------------------------------------------
# Gradient checking


def _batch_loss_sft(model: TinyModel, encoded) -> float:
    total = 0.0
    tokens = 0
    for ids, start in encoded:
        logits, _ = _forward(model, ids)
        logp = _log_softmax(logits)
        for j in range(start, len(ids)):
            total += -logp[j - 1, ids[j]]
        tokens += len(ids) - start
    return total / tokens


def _batch_loss_pref(model, sequences, ref_sums, method: str, beta: float) -> float:
    total = 0.0
    for ((c_ids, c_start), (r_ids, r_start)), (ref_c, ref_r) in zip(sequences, ref_sums):
        c_logits, _ = _forward(model, c_ids)
        r_logits, _ = _forward(model, r_ids)
        c_logp = _log_softmax(c_logits)
        r_logp = _log_softmax(r_logits)
        pol_c = float(sum(c_logp[j - 1, c_ids[j]] for j in range(c_start, len(c_ids))))
        pol_r = float(sum(r_logp[j - 1, r_ids[j]] for j in range(r_start, len(r_ids))))
        h = (pol_c - ref_c) - (pol_r - ref_r)
        loss, _ = _pref_loss_and_coeff(h, method, beta)
        total += loss
    return total / len(sequences)


def grad_check(
    model: TinyModel,
    batch,
    loss_kind: LossKind,
    eps: float = 1e-5,
    beta: float = 0.2,
    reference: TinyModel | None = None,
    sample_fraction: float = 0.01,
    seed: int = 0,
    noise_floor: float = 1e-6,
    prompt_fn=default_prompt,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Samples roughly `sample_fraction` of all parameters (at least one per
    tensor). Central differences at step `eps` resolve gradients down to
    roughly machine_eps/eps; entries where both analytic and numeric values
    sit below `noise_floor` are unresolvable and count as zero error (the
    0/0 guard). Gradients that matter are certified at full precision.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    model = model.copy()
    grads = _zero_grads(model)

    if loss_kind == "sft":
        encoded = [_sequence_ids(model, prompt, target) for prompt, target in batch]
        tokens = sum(len(ids) - start for ids, start in encoded)
        for ids, start in encoded:
            logits, cache = _forward(model, ids)
            logp = _log_softmax(logits)
            probs = np.exp(logp)
            dlogits = np.zeros_like(logits)
            for j in range(start, len(ids)):
                pos = j - 1
                dlogits[pos] = probs[pos] / tokens
                dlogits[pos, ids[j]] -= 1.0 / tokens
            _backward(model, cache, dlogits, grads)

        def loss_fn() -> float:
            return _batch_loss_sft(model, encoded)

    elif loss_kind in ("dpo", "ipo"):
        reference = reference if reference is not None else model.copy()
        sequences = [_pref_sequences(model, pair, prompt_fn) for pair in batch]
        ref_sums = _reference_sums(reference, sequences)
        for ((c_ids, c_start), (r_ids, r_start)), (ref_c, ref_r) in zip(
            sequences, ref_sums
        ):
            c_logits, c_cache = _forward(model, c_ids)
            r_logits, r_cache = _forward(model, r_ids)
            c_logp = _log_softmax(c_logits)
            r_logp = _log_softmax(r_logits)
            pol_c = float(sum(c_logp[j - 1, c_ids[j]] for j in range(c_start, len(c_ids))))
            pol_r = float(sum(r_logp[j - 1, r_ids[j]] for j in range(r_start, len(r_ids))))
            h = (pol_c - ref_c) - (pol_r - ref_r)
            _, dloss_dh = _pref_loss_and_coeff(h, loss_kind, beta)
            scale = dloss_dh / len(batch)
            _accumulate_pref_grads(model, c_logits, c_cache, c_ids, c_start, scale, grads)
            _accumulate_pref_grads(model, r_logits, r_cache, r_ids, r_start, -scale, grads)

        def loss_fn() -> float:
            return _batch_loss_pref(model, sequences, ref_sums, loss_kind, beta)

    else:
        raise ValueError(f"unknown loss kind: {loss_kind}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, param in model.params.items():
        flat = param.reshape(-1)
        gflat = grads[name].reshape(-1)
        n_sample = max(1, int(round(sample_fraction * flat.size)))
        for pos in rng.choice(flat.size, size=min(n_sample, flat.size), replace=False):
            original = flat[pos]
            flat[pos] = original + eps
            up = loss_fn()
            flat[pos] = original - eps
            down = loss_fn()
            flat[pos] = original
            numeric = (up - down) / (2.0 * eps)
            analytic = gflat[pos]
            denom = max(abs(numeric), abs(analytic))
            if denom < noise_floor:
                continue
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints


CHECKPOINT_VERSION = 1


def save_checkpoint(model: TinyModel, path: str | Path) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": "tinylm",
        "config": {
            "embed_dim": model.config.embed_dim,
            "hidden_dim": model.config.hidden_dim,
            "context_len": model.config.context_len,
            "seed": model.config.seed,
        },
        "vocab": model.vocab.tokens,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in model.params.items()
        },
    }
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    try:
        p.write_text(json.dumps(payload), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {p}: {exc}") from exc


def load_checkpoint(path: str | Path) -> TinyModel:
    p = Path(path)
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {p}: {exc}") from exc
    if payload.get("kind") != "tinylm" or payload.get("version") != CHECKPOINT_VERSION:
        raise IoError(f"unsupported checkpoint format in {p}")
    config = TinyConfig(**payload["config"])
    vocab = Vocab(payload["vocab"])
    params = {
        name: np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        for name, spec in payload["params"].items()
    }
    return TinyModel(vocab, config, params)
