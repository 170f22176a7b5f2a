"""Convert public dataset dumps into the toolkit's JSONL schemas.

Formats:
  etpc        XML dump (<text_pair> elements with sent1_raw/sent2_raw and
              nested <type_name> annotations) -> pairs.jsonl
  apty        CSV with original/chosen/rejected plus a type column -> prefs.jsonl
  qqp         TSV with question1/question2/is_duplicate -> pairs.jsonl
  labelstudio JSON ranking export -> annotations.jsonl

Conversion is lossless for the fields the schemas share; rows that cannot be
mapped are rejected with a reason, and records_in == written + rejects always
holds. Unknown XML fields are reported, not errors, since dataset snapshots
drift.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from xml.etree import ElementTree

from .errors import SchemaError


@dataclass
class ConvertReport:
    records_in: int = 0
    written: int = 0
    rejects: list[tuple[str, str]] = field(default_factory=list)
    counts_by_type: dict[str, int] = field(default_factory=dict)
    unknown_fields: set[str] = field(default_factory=set)

    def count(self, label: str) -> None:
        self.counts_by_type[label] = self.counts_by_type.get(label, 0) + 1


def _write_jsonl(path: str | Path, rows) -> int:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# ETPC XML


_ETPC_KNOWN = {
    "pair_id", "sent1_raw", "sent2_raw", "sent1_tokenized", "sent2_tokenized",
    "etpc_label", "mrpc_label", "negation", "annotations", "relation",
    "type_name", "type_id", "sense_tags", "s1_scope", "s2_scope",
}


def convert_etpc(in_path: str | Path, out_path: str | Path) -> ConvertReport:
    report = ConvertReport()
    try:
        tree = ElementTree.parse(in_path)
    except ElementTree.ParseError as exc:
        raise SchemaError(f"not parseable as ETPC XML: {exc}") from exc
    rows = []
    pairs = tree.getroot().iter("text_pair")
    for pair in pairs:
        report.records_in += 1
        for child in pair.iter():
            if child.tag not in _ETPC_KNOWN and child.tag != "text_pair":
                report.unknown_fields.add(child.tag)
        pair_id = pair.findtext("pair_id")
        sent1 = pair.findtext("sent1_raw")
        sent2 = pair.findtext("sent2_raw")
        if not pair_id or not sent1 or not sent2:
            report.rejects.append((pair_id or f"#{report.records_in}", "missing id or sentences"))
            continue
        label = pair.findtext("etpc_label") or pair.findtext("mrpc_label") or "1"
        types = [el.text.strip() for el in pair.iter("type_name") if el.text and el.text.strip()]
        for t in types:
            report.count(t)
        rows.append(
            {
                "id": pair_id,
                "original": sent1,
                "paraphrase": sent2,
                "types": types,
                "is_paraphrase": label.strip() not in ("0", "false", "False"),
            }
        )
    report.written = _write_jsonl(out_path, rows)
    return report


# ---------------------------------------------------------------------------
# APTY CSV


_APTY_TYPE_COLUMNS = ("target_type", "paraphrase_type", "type")


def convert_apty(in_path: str | Path, out_path: str | Path) -> ConvertReport:
    report = ConvertReport()
    with open(in_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"original", "chosen", "rejected"} <= set(
            reader.fieldnames
        ):
            raise SchemaError(
                "APTY CSV needs 'original', 'chosen' and 'rejected' columns"
            )
        type_col = next(
            (c for c in _APTY_TYPE_COLUMNS if c in reader.fieldnames), None
        )
        rows = []
        for i, row in enumerate(reader, start=1):
            report.records_in += 1
            rec_id = row.get("id") or f"apty{i}"
            label = (row.get(type_col) or "").strip() if type_col else ""
            if not label:
                report.rejects.append((rec_id, "missing paraphrase type"))
                continue
            if not row["original"] or not row["chosen"] or not row["rejected"]:
                report.rejects.append((rec_id, "empty text field"))
                continue
            if row["chosen"] == row["rejected"]:
                report.rejects.append((rec_id, "chosen equals rejected"))
                continue
            report.count(label)
            rows.append(
                {
                    "id": rec_id,
                    "original": row["original"],
                    "target_type": label,
                    "chosen": row["chosen"],
                    "rejected": row["rejected"],
                }
            )
    report.written = _write_jsonl(out_path, rows)
    return report


# ---------------------------------------------------------------------------
# QQP TSV


def convert_qqp(in_path: str | Path, out_path: str | Path) -> ConvertReport:
    report = ConvertReport()
    with open(in_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or not {"question1", "question2", "is_duplicate"} <= set(
            reader.fieldnames
        ):
            raise SchemaError(
                "QQP TSV needs 'question1', 'question2' and 'is_duplicate' columns"
            )
        rows = []
        for i, row in enumerate(reader, start=1):
            report.records_in += 1
            rec_id = row.get("id") or f"qqp{i}"
            q1 = (row.get("question1") or "").strip()
            q2 = (row.get("question2") or "").strip()
            dup = (row.get("is_duplicate") or "").strip()
            if not q1 or not q2:
                report.rejects.append((rec_id, "empty question"))
                continue
            if dup not in ("0", "1"):
                report.rejects.append((rec_id, f"bad is_duplicate {dup!r}"))
                continue
            rows.append(
                {
                    "id": rec_id,
                    "original": q1,
                    "paraphrase": q2,
                    "types": [],
                    "is_paraphrase": dup == "1",
                }
            )
    report.written = _write_jsonl(out_path, rows)
    return report


# ---------------------------------------------------------------------------
# Label Studio ranking export


_RANK_WORDS = {"best": 1, "wrong": 4}


def _rank_from_result(result) -> int | None:
    for item in result:
        value = item.get("value", {})
        if "rating" in value:
            return int(value["rating"])
        if "choices" in value and value["choices"]:
            raw = str(value["choices"][0]).strip().lower()
            if raw in _RANK_WORDS:
                return _RANK_WORDS[raw]
            if raw.isdigit():
                return int(raw)
    return None


def convert_labelstudio(in_path: str | Path, out_path: str | Path) -> ConvertReport:
    report = ConvertReport()
    try:
        tasks = json.loads(Path(in_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a Label Studio JSON export: {exc.msg}") from exc
    if not isinstance(tasks, list):
        raise SchemaError("expected a JSON array of tasks")
    rows = []
    for task in tasks:
        data = task.get("data", {})
        annotations = task.get("annotations") or task.get("completions") or []
        task_id = str(task.get("id", len(rows) + 1))
        item_id = data.get("item_id")
        model_id = data.get("model_id")
        target = data.get("target_type")
        for ann in annotations:
            report.records_in += 1
            annotator = str(ann.get("completed_by") or ann.get("annotator") or "annotator0")
            if not item_id or not model_id or not target:
                report.rejects.append((task_id, "task data lacks item_id/model_id/target_type"))
                continue
            rank = _rank_from_result(ann.get("result", []))
            if rank is None or not 1 <= rank <= 4:
                report.rejects.append((task_id, f"no usable rank in annotation ({rank})"))
                continue
            report.count(str(target))
            rows.append(
                {
                    "item_id": str(item_id),
                    "model_id": str(model_id),
                    "target_type": str(target),
                    "annotator_id": annotator,
                    "rank": rank,
                }
            )
    report.written = _write_jsonl(out_path, rows)
    return report


CONVERTERS = {
    "etpc": convert_etpc,
    "apty": convert_apty,
    "qqp": convert_qqp,
    "labelstudio": convert_labelstudio,
}


def convert(fmt: str, in_path: str | Path, out_path: str | Path) -> ConvertReport:
    try:
        fn = CONVERTERS[fmt]
    except KeyError:
        raise SchemaError(f"unknown format {fmt!r}; pick one of {sorted(CONVERTERS)}") from None
    return fn(in_path, out_path)
