import json

import pytest


@pytest.fixture(scope="session")
def tiny_hf_model(tmp_path_factory):
    """A minimal randomly initialized causal LM saved to disk, no network."""
    torch = pytest.importorskip("torch")
    transformers = pytest.importorskip("transformers")
    from tokenizers import Tokenizer, models, pre_tokenizers

    words = [
        "<pad>", "<unk>", "<s>", "Given", "the", "following", "sentence",
        "generate", "a", "paraphrase", "with", "type", "Sentence", "Paraphrase",
        "Types", "Answer", "Addition", "Deletion", "Change", "of", "order",
        "cat", "sat", "mat", "dog", "ran", "big", "small", "house", "tree",
        ".", ",", ":", "'", "[", "]", "/", "!",
    ]
    vocab = {w: i for i, w in enumerate(words)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = transformers.PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", pad_token="<pad>", bos_token="<s>"
    )
    config = transformers.GPT2Config(
        vocab_size=len(vocab),
        n_positions=128,
        n_embd=16,
        n_layer=1,
        n_head=2,
        bos_token_id=vocab["<s>"],
        eos_token_id=vocab["<s>"],
    )
    torch.manual_seed(1234)
    model = transformers.GPT2LMHeadModel(config)
    path = tmp_path_factory.mktemp("tinyhf")
    model.save_pretrained(path)
    fast.save_pretrained(path)
    return str(path)


@pytest.fixture()
def prefs_file(tmp_path):
    rows = [
        {
            "id": "p1",
            "original": "the cat sat",
            "target_type": "Addition/Deletion",
            "chosen": "the big cat sat",
            "rejected": "the cat sat",
        },
        {
            "id": "p2",
            "original": "the dog ran",
            "target_type": "Change of order",
            "chosen": "ran the dog",
            "rejected": "the dog ran",
        },
    ]
    path = tmp_path / "prefs.jsonl"
    path.write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8"
    )
    return path
