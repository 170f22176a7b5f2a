import math

import numpy as np
import pytest

from apt_align import tinylm
from apt_align.corpus import PreferenceRecord
from apt_align.errors import EmptyCorpusError, EmptyPairsError, VocabTooSmallError
from apt_align.taxonomy import parse_type
from apt_align.tinylm import (
    PlateauScheduler,
    TinyConfig,
    TrainConfig,
    Vocab,
    clip_global_norm,
    cosine_lr,
    forward_probs,
    generate,
    grad_check,
    init_model,
    load_checkpoint,
    save_checkpoint,
    score_sequence,
    train_pref,
    train_sft,
)

ORDER = parse_type("Change of order")


@pytest.fixture(scope="module")
def small_model():
    vocab = Vocab.build(["alpha beta gamma delta epsilon", "zeta eta theta iota"])
    return init_model(vocab, TinyConfig(seed=1), 1)


# ---------------------------------------------------------------------------
# vocab


def test_vocab_specials_present():
    v = Vocab.build(["a b"])
    assert v.tokens[:4] == ["<pad>", "<bos>", "<eos>", "<unk>"]
    assert len(v) >= 4


def test_vocab_char_fallback():
    v = Vocab.build(["hello world"])
    ids = v.encode("held")  # unseen word, but chars h/e/l/d are in vocab
    assert len(ids) == 4
    assert all(i != v.index["<unk>"] for i in ids)


def test_vocab_roundtrip_decode():
    v = Vocab.build(["the cat sat"])
    assert v.decode(v.encode("cat sat the")) == "cat sat the"


# ---------------------------------------------------------------------------
# init and forward


def test_init_deterministic(small_model):
    again = init_model(small_model.vocab, TinyConfig(seed=1), 1)
    for name, arr in small_model.params.items():
        assert np.array_equal(arr, again.params[name])


def test_init_different_seeds_differ(small_model):
    other = init_model(small_model.vocab, TinyConfig(seed=2), 2)
    assert any(
        not np.array_equal(small_model.params[k], other.params[k])
        for k in small_model.params
    )


def test_init_vocab_too_small():
    v = Vocab([])
    v.tokens = v.tokens[:3]
    v.index = {t: i for i, t in enumerate(v.tokens)}
    with pytest.raises(VocabTooSmallError):
        init_model(v, TinyConfig(), 0)


def test_forward_distributions_normalized(small_model):
    probs = forward_probs(small_model, [1, 5, 6, 7])
    sums = probs.sum(axis=1)
    assert np.all(np.abs(sums - 1.0) < 1e-6)
    assert np.all(probs >= 0.0)


def test_forward_single_token(small_model):
    probs = forward_probs(small_model, [1])
    assert abs(probs.sum() - 1.0) < 1e-6


def test_param_budget(small_model):
    assert small_model.num_params() <= 1_000_000


# ---------------------------------------------------------------------------
# schedulers and clipping


def test_cosine_schedule_contract():
    base = 0.1
    total = 40
    warmup_ratio = 0.25
    warmup = 10
    for t in range(warmup):
        assert cosine_lr(base, t, total, warmup_ratio) == pytest.approx(
            base * (t + 1) / warmup
        )
    for t in range(warmup, total):
        want = base * 0.5 * (1 + math.cos(math.pi * (t - warmup) / (total - warmup)))
        assert cosine_lr(base, t, total, warmup_ratio) == pytest.approx(want, abs=1e-15)


def test_plateau_schedule_contract():
    sched = PlateauScheduler(base_lr=1.0, patience=3, min_delta=1e-4)
    assert sched.update(1.0) == 1.0
    assert sched.update(0.9) == 1.0  # improved
    # three consecutive non-improvements halve the rate
    assert sched.update(0.9) == 1.0
    assert sched.update(0.89999) == 1.0  # below min_delta, still a stall
    assert sched.update(0.9) == 0.5
    assert sched.update(0.5) == 0.5  # improvement resets


def test_clip_global_norm():
    grads = {"a": np.full(4, 3.0), "b": np.full(9, 4.0)}
    norm = math.sqrt(4 * 9 + 9 * 16)
    returned = clip_global_norm(grads, max_norm=1.0)
    assert returned == pytest.approx(norm)
    new_norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    assert new_norm <= 1.0 + 1e-9


def test_clip_noop_below_threshold():
    grads = {"a": np.ones(3) * 0.1}
    clip_global_norm(grads, max_norm=100.0)
    assert np.allclose(grads["a"], 0.1)


# ---------------------------------------------------------------------------
# SFT


def test_train_sft_memorizes_single_pattern():
    prompt, target = "the quick brown fox", "jumps over the lazy dog"
    vocab = Vocab.build([prompt, target])
    model = init_model(vocab, TinyConfig(seed=3), 3)
    corpus = [(prompt, target)] * 200
    trained, curve = train_sft(
        model, corpus, TrainConfig(learning_rate=3e-3, epochs=50, batch_size=32, seed=3)
    )
    assert curve[-1] < 0.1
    assert generate(trained, prompt, max_len=16) == target


def test_train_sft_zero_epochs_unchanged(small_model):
    trained, curve = train_sft(
        small_model,
        [("alpha", "beta")],
        TrainConfig(learning_rate=1e-3, epochs=0, batch_size=4, seed=0),
    )
    assert curve == []
    for name, arr in small_model.params.items():
        assert np.array_equal(arr, trained.params[name])


def test_train_sft_loss_trend():
    prompt, target = "one two three", "three two one"
    vocab = Vocab.build([prompt, target])
    model = init_model(vocab, TinyConfig(seed=5), 5)
    _, curve = train_sft(
        model,
        [(prompt, target)] * 50,
        TrainConfig(learning_rate=2e-3, epochs=12, batch_size=16, seed=5),
    )
    for prev, nxt in zip(curve, curve[1:]):
        assert nxt <= prev * 1.05


def test_train_sft_empty_corpus(small_model):
    with pytest.raises(EmptyCorpusError):
        train_sft(small_model, [], TrainConfig())


def test_train_sft_bit_reproducible():
    prompt, target = "a b c", "c b a"
    vocab = Vocab.build([prompt, target])
    model = init_model(vocab, TinyConfig(seed=7), 7)
    cfg = TrainConfig(learning_rate=1e-3, epochs=3, batch_size=2, seed=11)
    t1, c1 = train_sft(model, [(prompt, target)] * 6, cfg)
    t2, c2 = train_sft(model, [(prompt, target)] * 6, cfg)
    assert c1 == c2
    for name in t1.params:
        assert np.array_equal(t1.params[name], t2.params[name])


# ---------------------------------------------------------------------------
# generation


def test_generate_greedy_deterministic(small_model):
    a = generate(small_model, "alpha beta", max_len=8)
    b = generate(small_model, "alpha beta", max_len=8)
    assert a == b


def test_generate_sampling_seeded(small_model):
    a = generate(small_model, "alpha", max_len=8, seed=4, greedy=False)
    b = generate(small_model, "alpha", max_len=8, seed=4, greedy=False)
    assert a == b


def test_generate_max_len_one(small_model):
    out = generate(small_model, "alpha", max_len=1)
    assert len(out.split()) <= 1


def test_generate_requires_positive_max_len(small_model):
    with pytest.raises(ValueError):
        generate(small_model, "alpha", max_len=0)


# ---------------------------------------------------------------------------
# preference training


def _reversal_pairs(n, rng, words, k=3):
    pairs, seen = [], set()
    while len(pairs) < n:
        ws = tuple(rng.choice(words, size=k, replace=False))
        if ws in seen:
            continue
        seen.add(ws)
        sent = " ".join(ws)
        pairs.append(
            PreferenceRecord(
                f"syn{len(pairs)}", sent, ORDER, " ".join(reversed(ws)), sent
            )
        )
    return pairs


WORDS = ["ant", "bear", "crow", "deer", "eel", "fox", "goat", "hawk", "ibis", "jay"]


def plain_prompt(pair: PreferenceRecord) -> str:
    return pair.original


@pytest.fixture(scope="module")
def reversal_task():
    rng = np.random.default_rng(42)
    all_pairs = _reversal_pairs(240, rng, WORDS)
    train, held = all_pairs[:200], all_pairs[200:]
    vocab = Vocab.build([p.original for p in all_pairs] + [p.chosen for p in all_pairs])
    return train, held, vocab


def test_train_pref_dpo_separable_task(reversal_task):
    train, held, vocab = reversal_task
    model = init_model(vocab, TinyConfig(seed=7), 7)
    reference = model.copy()
    cfg = TrainConfig(
        learning_rate=3e-3, weight_decay=0.01, beta=0.2, epochs=100,
        batch_size=16, seed=7, scheduler="cosine",
    )
    trained, curve = train_pref(model, reference, train, "dpo", cfg, prompt_fn=plain_prompt)
    stats = tinylm.eval_pref(trained, reference, held, "dpo", 0.2, prompt_fn=plain_prompt)
    assert stats.reward_accuracy >= 0.9
    assert curve[-1].reward_margin > curve[0].reward_margin


def test_train_pref_ipo_separable_task(reversal_task):
    train, held, vocab = reversal_task
    model = init_model(vocab, TinyConfig(seed=7), 7)
    reference = model.copy()
    cfg = TrainConfig(
        learning_rate=3e-3, weight_decay=0.02, beta=0.2, epochs=100,
        batch_size=16, seed=7, scheduler="plateau", warmup_ratio=0.2,
    )
    trained, _ = train_pref(model, reference, train, "ipo", cfg, prompt_fn=plain_prompt)
    stats = tinylm.eval_pref(trained, reference, held, "ipo", 0.2, prompt_fn=plain_prompt)
    assert stats.reward_accuracy >= 0.85


def test_train_pref_first_epoch_margin_near_zero(reversal_task):
    train, _, vocab = reversal_task
    model = init_model(vocab, TinyConfig(seed=9), 9)
    reference = model.copy()
    cfg = TrainConfig(learning_rate=1e-4, epochs=1, batch_size=64, seed=9)
    _, curve = train_pref(model, reference, train[:32], "dpo", cfg, prompt_fn=plain_prompt)
    assert abs(curve[0].reward_margin) < 0.05


def test_train_pref_beta_to_zero_kills_gradient(reversal_task):
    train, _, vocab = reversal_task
    model = init_model(vocab, TinyConfig(seed=9), 9)
    from apt_align.tinylm import _pref_loss_and_coeff

    _, g_small = _pref_loss_and_coeff(1.3, "dpo", 1e-9)
    _, g_normal = _pref_loss_and_coeff(1.3, "dpo", 0.2)
    assert abs(g_small) < 1e-9
    assert abs(g_small) < abs(g_normal)


def test_train_pref_empty_pairs(small_model):
    with pytest.raises(EmptyPairsError):
        train_pref(small_model, small_model.copy(), [], "dpo", TrainConfig())


def test_score_sequence_matches_eval(small_model):
    tokens, logps = score_sequence(small_model, "alpha beta", "gamma")
    assert len(tokens) == len(logps)
    assert tokens[-1] == small_model.vocab.eos_id
    assert all(lp <= 0.0 for lp in logps)


# ---------------------------------------------------------------------------
# gradient checks


def test_grad_check_sft_fresh(small_model):
    err = grad_check(
        small_model,
        [("alpha beta", "gamma delta"), ("zeta", "eta theta")],
        "sft",
        eps=1e-5,
        sample_fraction=0.02,
    )
    assert err < 1e-4


def test_grad_check_all_tensors_at_exercised_scale():
    vocab = Vocab.build(["alpha beta gamma delta epsilon"])
    model = init_model(vocab, TinyConfig(seed=1), 1)
    for name in model.params:
        model.params[name] = model.params[name] * 10.0
    err = grad_check(
        model, [("alpha beta", "gamma delta epsilon")], "sft", eps=1e-5,
        sample_fraction=0.05,
    )
    assert err < 1e-4


def test_grad_check_dpo_ipo():
    pair = PreferenceRecord("p", "alpha beta gamma", ORDER, "gamma beta alpha", "alpha beta gamma")
    from apt_align.corpus import render_prompt

    vocab = Vocab.build(
        [render_prompt(pair.original, [pair.target_type]), pair.chosen, pair.rejected]
    )
    model = init_model(vocab, TinyConfig(seed=2), 2)
    for name in model.params:
        model.params[name] = model.params[name] * 10.0
    assert grad_check(model, [pair], "dpo", eps=1e-5, sample_fraction=0.02) < 1e-4
    assert grad_check(model, [pair], "ipo", eps=1e-5, sample_fraction=0.02) < 1e-4


def test_grad_check_eps_bounds(small_model):
    with pytest.raises(ValueError):
        grad_check(small_model, [("a", "b")], "sft", eps=1e-2)


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip_bit_exact(tmp_path, small_model):
    path = tmp_path / "ckpt.json"
    save_checkpoint(small_model, path)
    loaded = load_checkpoint(path)
    for name, arr in small_model.params.items():
        assert np.array_equal(arr, loaded.params[name])
    assert loaded.vocab.tokens == small_model.vocab.tokens
    ids = [1, 5, 6]
    assert np.array_equal(forward_probs(small_model, ids), forward_probs(loaded, ids))
