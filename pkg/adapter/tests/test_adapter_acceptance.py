"""Secondary-component acceptance: adapter round-trip and fixture conversion."""

import csv
import json

import pytest


def check(name: str, condition: bool, detail: str = "") -> None:
    status = "PASS" if condition else "FAIL"
    print(f"[ACCEPTANCE] {name}: {status}{' — ' + detail if detail else ''}")
    assert condition, f"{name}: {detail}"


def test_criterion_adapter_roundtrip(tiny_hf_model, prefs_file, tmp_path):
    prefloss = pytest.importorskip("apt_align.prefloss")
    from apt_adapter.export import export_logprobs

    out = tmp_path / "scored.jsonl"
    report = export_logprobs(tiny_hf_model, prefs_file, tiny_hf_model, out)

    totals = {}
    for line in out.read_text().splitlines():
        obj = json.loads(line)
        totals[(obj["id"], obj["role"])] = obj["policy_total"]
    worst = 0.0
    items = prefloss.load_scored_jsonl(out)
    for rec_id, item in items:
        for role, seq in (("chosen", item.chosen), ("rejected", item.rejected)):
            gap = abs(prefloss.sequence_logprob(seq, "policy") - totals[(rec_id, role)])
            worst = max(worst, gap)
    check(
        "adapter-roundtrip",
        report.written == 4 and not report.rejects and worst < 1e-5,
        f"{report.written} records, worst sum gap {worst:.2e}",
    )


def test_criterion_fixture_conversion(tmp_path):
    apt_corpus = pytest.importorskip("apt_align.corpus")
    from apt_adapter.convert import convert

    ten = [
        "Addition/Deletion", "Change of order", "Derivational Changes",
        "Inflectional Changes", "Punctuation changes",
        "Same Polarity Substitution (contextual)", "Semantic-based",
        "Spelling changes", "Subordination and nesting changes",
        "Synthetic/Analytic Substitution",
    ]

    qqp = tmp_path / "qqp.tsv"
    with qqp.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["id", "qid1", "qid2", "question1", "question2", "is_duplicate"])
        for i in range(10):
            writer.writerow([i, 2 * i, 2 * i + 1, f"question {i}?", f"other {i}?", i % 2])

    apty = tmp_path / "apty.csv"
    with apty.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["original", "chosen", "rejected", "type"])
        for i in range(10):
            writer.writerow([f"base {i}", f"good {i}", f"bad {i}", ten[i]])

    ls = tmp_path / "ls.json"
    tasks = [
        {
            "id": i,
            "data": {"item_id": f"it{i}", "model_id": "m", "target_type": ten[i]},
            "annotations": [
                {"completed_by": 1, "result": [{"value": {"choices": [["best", "2", "3", "wrong"][i % 4]]}}]}
            ],
        }
        for i in range(10)
    ]
    ls.write_text(json.dumps(tasks), encoding="utf-8")

    r1 = convert("qqp", qqp, tmp_path / "pairs.jsonl")
    r2 = convert("apty", apty, tmp_path / "prefs.jsonl")
    r3 = convert("labelstudio", ls, tmp_path / "annotations.jsonl")
    zero_rejects = not (r1.rejects or r2.rejects or r3.rejects)

    pairs = apt_corpus.load_pairs(tmp_path / "pairs.jsonl", require_types_for_paraphrase=False)
    prefs = apt_corpus.load_apty_ranked(tmp_path / "prefs.jsonl")
    anns = apt_corpus.load_annotations(tmp_path / "annotations.jsonl")
    schema_valid = not (pairs.errors or prefs.errors or anns.errors)
    counts_ok = len(pairs.records) == len(prefs.records) == len(anns.records) == 10

    check(
        "adapter-fixture-conversion",
        zero_rejects and schema_valid and counts_ok,
        f"rejects {len(r1.rejects) + len(r2.rejects) + len(r3.rejects)}, "
        f"loaded {len(pairs.records)}/{len(prefs.records)}/{len(anns.records)}",
    )
