"""Export per-token logprobs for preference pairs into scored.jsonl.

Reads the toolkit's prefs.jsonl, renders the shared prompt template, scores
the chosen and rejected continuations under a policy and a frozen reference
model, and writes one scored record per (pair, role). Records that cannot be
tokenized are rejected and reported, never silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import AdapterConfig
from .errors import SchemaError, TokenizationError
from .prompt import render_prompt
from .scoring import CausalScorer, check_compatible, total


@dataclass
class ExportReport:
    written: int = 0
    rejects: list[tuple[str, str]] = field(default_factory=list)  # (id, reason)


def _read_prefs(path: str | Path):
    rows = []
    raw = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
        for key in ("id", "original", "target_type", "chosen", "rejected"):
            if key not in obj:
                raise SchemaError(f"line {line_no}: missing field {key!r}")
        rows.append(obj)
    return rows


def export_logprobs(
    model_spec: str,
    prefs_path: str | Path,
    reference_spec: str,
    out_path: str | Path,
    config: AdapterConfig | None = None,
) -> ExportReport:
    config = config or AdapterConfig(model_id=model_spec)
    policy = CausalScorer(model_spec, config.device)
    reference = (
        policy if reference_spec == model_spec else CausalScorer(reference_spec, config.device)
    )
    if reference is not policy:
        check_compatible(policy, reference)

    rows = _read_prefs(prefs_path)
    report = ExportReport()

    # tokenize everything up front so rejects never hit the model
    jobs = []  # (rec_id, role, ids, start)
    for obj in rows:
        prompt = render_prompt(str(obj["original"]), [str(obj["target_type"])])
        pair_jobs = []
        try:
            for role in ("chosen", "rejected"):
                ids, start = policy.sequence_ids(
                    prompt, str(obj[role]), config.max_seq_len
                )
                pair_jobs.append((str(obj["id"]), role, ids, start))
        except TokenizationError as exc:
            report.rejects.append((str(obj["id"]), str(exc)))
            continue
        jobs.extend(pair_jobs)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for lo in range(0, len(jobs), config.batch_size):
            batch = jobs[lo : lo + config.batch_size]
            sequences = [(ids, start) for _, _, ids, start in batch]
            pol = policy.score_batch(sequences)
            ref = pol if reference is policy else reference.score_batch(sequences)
            for (rec_id, role, ids, start), p_vals, r_vals in zip(batch, pol, ref):
                record = {
                    "id": rec_id,
                    "role": role,
                    "token_ids": ids[start:],
                    "policy_logprobs": p_vals,
                    "reference_logprobs": r_vals,
                    "policy_total": total(p_vals),
                    "reference_total": total(r_vals),
                }
                fh.write(json.dumps(record) + "\n")
                report.written += 1
    return report
