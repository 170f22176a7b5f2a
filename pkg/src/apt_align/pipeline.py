"""Command orchestration: ingest, split, pairs, train, gen, eval, ptd-eval, report.

Every command writes its outputs plus a run.json capturing the resolved
configuration and seeds into one output directory; given the same inputs and
run.json the outputs are byte-identical. Nothing here depends on wall-clock
time or environment variables.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from . import corpus as corpus_mod
from . import evalstats, ptd, textmetrics, tinylm
from .corpus import (
    AnnotationRecord,
    LoadReport,
    PreferenceRecord,
    SentencePairRecord,
    iter_jsonl,
    load_annotations,
    load_apty_ranked,
    load_items,
    load_pairs,
    normalize_text,
    pairs_from_rankings,
    render_prompt,
    split_multilabel,
    split_stratified,
    type_frequency_table,
    write_jsonl,
)
from .errors import (
    MissingAnnotationsError,
    MissingDataError,
    SchemaError,
)
from .evalstats import ContingencyTable, F1Report, logistic_rank_transform
from .taxonomy import TypeSet, top10

# Preference-training defaults, per optimization method.
DPO_DEFAULTS = dict(
    learning_rate=1e-6,
    weight_decay=0.4,
    beta=0.2,
    max_grad_norm=200.0,
    scheduler="cosine",
    warmup_ratio=0.0,
)
IPO_DEFAULTS = dict(
    learning_rate=5e-6,
    weight_decay=0.02,
    beta=0.2,
    max_grad_norm=200.0,
    scheduler="plateau",
    warmup_ratio=0.2,
)


# ---------------------------------------------------------------------------
# Config plumbing


def load_config_file(path: str | Path) -> dict[str, dict[str, str]]:
    """Read the sectioned key/value run config (INI syntax)."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return {section: dict(parser.items(section)) for section in parser.sections()}


def write_run_json(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _strict(report: LoadReport, path) -> LoadReport:
    if report.errors:
        first = report.errors[0]
        raise SchemaError(
            f"{len(report.errors)} bad record(s) in {path}; first: {first.message}",
            first.line_no,
        )
    return report


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(
    input_path: str | Path,
    fmt: str,
    out_dir: str | Path,
    lax_types: bool = False,
) -> LoadReport:
    """Normalize a JSONL dump, write it back plus a load report and type table."""
    out = Path(out_dir)
    if fmt == "pairs":
        report = load_pairs(input_path, require_types_for_paraphrase=not lax_types)
        rows = [r.to_json_dict() for r in report.records]
        name = "pairs.jsonl"
    elif fmt == "prefs":
        report = load_apty_ranked(input_path)
        rows = [r.to_json_dict() for r in report.records]
        name = "prefs.jsonl"
    elif fmt == "annotations":
        report = load_annotations(input_path)
        rows = [r.to_json_dict() for r in report.records]
        name = "annotations.jsonl"
    else:
        raise ValueError(f"unknown format: {fmt}")
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / name, rows)
    freq = [("Type", "Total", "Unique")] + [
        (label, str(total), str(unique))
        for label, total, unique in type_frequency_table(report)
    ]
    _write_csv(out / "type_frequency.csv", freq)
    error_rows = [("Line", "Kind", "Message")] + [
        (str(e.line_no), e.kind, e.message) for e in report.errors
    ]
    _write_csv(out / "load_errors.csv", error_rows)
    write_run_json(
        out,
        {
            "command": "ingest",
            "format": fmt,
            "input": str(input_path),
            "lax_types": lax_types,
            "records": len(report.records),
            "errors": len(report.errors),
        },
    )
    return report


# ---------------------------------------------------------------------------
# split


def cmd_split(
    input_path: str | Path,
    fmt: str,
    ratio: float,
    seed: int,
    out_dir: str | Path,
    mode: str = "stratified",
) -> corpus_mod.SplitPair:
    """Split a corpus file and write train/test JSONL plus a seeded manifest."""
    out = Path(out_dir)
    if fmt == "pairs":
        report = _strict(load_pairs(input_path, require_types_for_paraphrase=False), input_path)
        records: list = report.records
        if mode == "multilabel":
            split = split_multilabel(records, ratio, seed)
        else:
            split = split_stratified(
                records,
                ratio,
                key=lambda r: tuple(r.types.labels()) or ("<untyped>",),
                seed=seed,
            )
    elif fmt == "prefs":
        report = _strict(load_apty_ranked(input_path), input_path)
        records = report.records
        split = split_stratified(
            records, ratio, key=lambda r: r.target_type.canonical_label, seed=seed
        )
    else:
        raise ValueError(f"unknown format: {fmt}")
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "train.jsonl", [r.to_json_dict() for r in split.train])
    write_jsonl(out / "test.jsonl", [r.to_json_dict() for r in split.test])
    manifest = {
        "seed": seed,
        "ratio": ratio,
        "mode": mode,
        "format": fmt,
        "train_ids": [r.id for r in split.train],
        "test_ids": [r.id for r in split.test],
        "counts": _split_counts(split),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    write_run_json(
        out,
        {
            "command": "split",
            "format": fmt,
            "mode": mode,
            "input": str(input_path),
            "ratio": ratio,
            "seed": seed,
        },
    )
    return split


def _split_counts(split: corpus_mod.SplitPair) -> dict:
    def label_counts(records) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in records:
            if isinstance(r, SentencePairRecord):
                labels = r.types.labels() or ["<untyped>"]
            else:
                labels = [r.target_type.canonical_label]
            for label in labels:
                counts[label] = counts.get(label, 0) + 1
        return dict(sorted(counts.items()))

    return {"train": label_counts(split.train), "test": label_counts(split.test)}


# ---------------------------------------------------------------------------
# pairs


def cmd_pairs(
    annotations_path: str | Path,
    items_path: str | Path,
    out_dir: str | Path,
) -> list[PreferenceRecord]:
    """Build prefs.jsonl from rank annotations and the per-item generations."""
    out = Path(out_dir)
    report = _strict(load_annotations(annotations_path), annotations_path)
    items = load_items(items_path)
    pairs = pairs_from_rankings(report.records, items)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "prefs.jsonl", [p.to_json_dict() for p in pairs])
    write_run_json(
        out,
        {
            "command": "pairs",
            "annotations": str(annotations_path),
            "items": str(items_path),
            "pairs": len(pairs),
        },
    )
    return pairs


# ---------------------------------------------------------------------------
# train


def _train_config_from(
    method: str, overrides: dict, seed: int
) -> tinylm.TrainConfig:
    base: dict = {}
    if method == "dpo":
        base.update(DPO_DEFAULTS)
    elif method == "ipo":
        base.update(IPO_DEFAULTS)
    base["seed"] = seed
    base.update({k: v for k, v in overrides.items() if v is not None})
    return tinylm.TrainConfig(**base)


def cmd_train(
    method: str,
    data_path: str | Path,
    out_dir: str | Path,
    seed: int = 0,
    init_checkpoint: str | Path | None = None,
    overrides: dict | None = None,
    model_config: tinylm.TinyConfig | None = None,
) -> tuple[tinylm.TinyModel, list]:
    """Train the tiny model (sft | dpo | ipo) and write checkpoint plus curves."""
    out = Path(out_dir)
    overrides = overrides or {}
    config = _train_config_from(method, overrides, seed)
    model_config = model_config or tinylm.TinyConfig(seed=seed)

    if method == "sft":
        report = _strict(load_pairs(data_path), data_path)
        examples = [
            (render_prompt(r.original, list(r.types)), r.paraphrase)
            for r in report.records
            if r.is_paraphrase and len(r.types)
        ]
        if not examples:
            raise MissingDataError(f"no usable SFT examples in {data_path}")
        if init_checkpoint:
            model = tinylm.load_checkpoint(init_checkpoint)
        else:
            vocab = tinylm.Vocab.build(
                [p for p, _ in examples] + [t for _, t in examples]
            )
            model = tinylm.init_model(vocab, model_config, seed)
        trained, curve = tinylm.train_sft(model, examples, config)
        curve_rows = [("epoch", "loss")] + [
            (str(i + 1), repr(v)) for i, v in enumerate(curve)
        ]
    elif method in ("dpo", "ipo"):
        report = _strict(load_apty_ranked(data_path), data_path)
        pairs = report.records
        if init_checkpoint:
            model = tinylm.load_checkpoint(init_checkpoint)
        else:
            texts = []
            for p in pairs:
                texts.append(render_prompt(p.original, [p.target_type]))
                texts.append(p.chosen)
                texts.append(p.rejected)
            vocab = tinylm.Vocab.build(texts)
            model = tinylm.init_model(vocab, model_config, seed)
        reference = model.copy()
        trained, curve = tinylm.train_pref(model, reference, pairs, method, config)
        curve_rows = [("epoch", "loss", "reward_margin", "reward_accuracy")] + [
            (str(i + 1), repr(s.mean_loss), repr(s.reward_margin), repr(s.reward_accuracy))
            for i, s in enumerate(curve)
        ]
    else:
        raise ValueError(f"unknown method: {method}")

    out.mkdir(parents=True, exist_ok=True)
    tinylm.save_checkpoint(trained, out / "checkpoint.json")
    _write_csv(out / "curves.csv", curve_rows)
    write_run_json(
        out,
        {
            "command": "train",
            "method": method,
            "data": str(data_path),
            "init_checkpoint": str(init_checkpoint) if init_checkpoint else None,
            "seed": seed,
            "config": asdict(config),
            "model_config": asdict(model_config),
        },
    )
    return trained, curve


# ---------------------------------------------------------------------------
# gen


def cmd_gen(
    checkpoint_path: str | Path,
    data_path: str | Path,
    out_dir: str | Path,
    fmt: str = "pairs",
    model_id: str = "tinylm",
    max_len: int = 48,
    seed: int = 0,
    greedy: bool = True,
) -> list[dict]:
    """Generate continuations for every prompt derivable from a pairs/prefs file."""
    out = Path(out_dir)
    model = tinylm.load_checkpoint(checkpoint_path)
    prompts: list[tuple[str, str]] = []
    if fmt == "pairs":
        pair_report = _strict(load_pairs(data_path), data_path)
        for r in pair_report.records:
            if r.is_paraphrase and len(r.types):
                prompts.append((r.id, render_prompt(r.original, list(r.types))))
    elif fmt == "prefs":
        pref_report = _strict(load_apty_ranked(data_path), data_path)
        for p in pref_report.records:
            prompts.append((p.id, render_prompt(p.original, [p.target_type])))
    else:
        raise ValueError(f"unknown format: {fmt}")
    if not prompts:
        raise MissingDataError(f"no prompts derivable from {data_path}")
    rows = []
    for item_id, prompt in prompts:
        text = tinylm.generate(model, prompt, max_len=max_len, seed=seed, greedy=greedy)
        rows.append({"item_id": item_id, "model_id": model_id, "text": text})
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "generations.jsonl", rows)
    write_run_json(
        out,
        {
            "command": "gen",
            "checkpoint": str(checkpoint_path),
            "data": str(data_path),
            "format": fmt,
            "model_id": model_id,
            "max_len": max_len,
            "seed": seed,
            "greedy": greedy,
        },
    )
    return rows


# ---------------------------------------------------------------------------
# eval


@dataclass
class EvalReport:
    models: list[str]
    accuracy: dict[str, float]
    n_items: dict[str, int]
    accuracy_by_type: dict[str, dict[str, float]]  # type -> model -> acc
    ranking_distribution: dict[str, list[float]]  # model -> % per rank 1..4
    chi_square: tuple[float, int, float] | None
    anova: tuple[float, int, int, float] | None
    kappa: float | None
    alpha: float | None
    metric_means: dict[str, dict[str, float]]  # model -> metric -> mean
    metric_human_corr: dict[str, dict[str, float | None]]  # metric -> {pearson, spearman}
    correlation_matrix: dict[str, dict[str, float | None]]

    def tables(self) -> dict[str, list[list[str]]]:
        out: dict[str, list[list[str]]] = {}
        out["accuracy"] = [["Model", "Items", "Accuracy"]] + [
            [m, str(self.n_items[m]), f"{self.accuracy[m]:.4f}"] for m in self.models
        ]
        type_rows = [["Type"] + self.models]
        for label in sorted(self.accuracy_by_type):
            row = [label]
            for m in self.models:
                acc = self.accuracy_by_type[label].get(m)
                row.append("n/a" if acc is None else f"{acc:.4f}")
            type_rows.append(row)
        out["accuracy_by_type"] = type_rows
        out["ranking_distribution"] = [["Model", "1", "2", "3", "4"]] + [
            [m] + [f"{p:.1f}" for p in self.ranking_distribution[m]] for m in self.models
        ]
        stats_rows = [["Statistic", "Value"]]
        if self.chi_square is not None:
            stat, df, p = self.chi_square
            stats_rows.append(["chi_square_stat", f"{stat:.4f}"])
            stats_rows.append(["chi_square_df", str(df)])
            stats_rows.append(["chi_square_p", f"{p:.6g}"])
        if self.anova is not None:
            f, df1, df2, p = self.anova
            stats_rows.append(["anova_F", f"{f:.4f}"])
            stats_rows.append(["anova_df_between", str(df1)])
            stats_rows.append(["anova_df_within", str(df2)])
            stats_rows.append(["anova_p", f"{p:.6g}"])
        stats_rows.append(
            ["cohens_kappa", "n/a" if self.kappa is None else f"{self.kappa:.4f}"]
        )
        stats_rows.append(
            ["krippendorff_alpha", "n/a" if self.alpha is None else f"{self.alpha:.4f}"]
        )
        out["statistics"] = stats_rows
        metric_names = ["bleu", "rouge1", "rouge2", "rougeL"]
        out["metric_means"] = [["Model"] + metric_names] + [
            [m] + [f"{self.metric_means[m][k]:.4f}" for k in metric_names]
            for m in self.models
        ]
        corr_rows = [["Metric", "Pearson", "Spearman"]]
        for metric in metric_names:
            entry = self.metric_human_corr.get(metric, {})
            corr_rows.append(
                [
                    metric,
                    _fmt_opt(entry.get("pearson")),
                    _fmt_opt(entry.get("spearman")),
                ]
            )
        out["metric_human_correlation"] = corr_rows
        variables = list(self.correlation_matrix)
        matrix_rows = [[""] + variables]
        for a in variables:
            matrix_rows.append(
                [a] + [_fmt_opt(self.correlation_matrix[a][b]) for b in variables]
            )
        out["correlation_matrix"] = matrix_rows
        return out


def _fmt_opt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def _load_generations(path) -> dict[tuple[str, str], str]:
    gens: dict[tuple[str, str], str] = {}
    for line_no, obj, err in iter_jsonl(path):
        if err is not None:
            raise SchemaError(err, line_no)
        try:
            key = (str(obj["item_id"]), str(obj["model_id"]))
            text = normalize_text(str(obj["text"]))
        except KeyError as exc:
            raise SchemaError(f"missing field {exc}", line_no) from exc
        if not text:
            raise SchemaError("generation text is empty", line_no)
        gens[key] = text
    return gens


def _load_references(path) -> dict[str, str]:
    refs: dict[str, str] = {}
    for line_no, obj, err in iter_jsonl(path):
        if err is not None:
            raise SchemaError(err, line_no)
        try:
            refs[str(obj["item_id"])] = normalize_text(str(obj["reference"]))
        except KeyError as exc:
            raise SchemaError(f"missing field {exc}", line_no) from exc
    return refs


def cmd_eval(
    generations_path: str | Path,
    annotations_path: str | Path,
    references_path: str | Path,
    out_dir: str | Path,
) -> EvalReport:
    """The full evaluation battery over generations, rankings and references."""
    out = Path(out_dir)
    gens = _load_generations(generations_path)
    ann_report = _strict(load_annotations(annotations_path), annotations_path)
    annotations: list[AnnotationRecord] = ann_report.records
    refs = _load_references(references_path)

    if not annotations:
        raise MissingAnnotationsError("annotation file is empty")
    covered = {(a.item_id, a.model_id) for a in annotations}
    for key in gens:
        if key not in covered:
            raise MissingAnnotationsError(
                f"generation {key[0]!r}/{key[1]!r} has no annotations"
            )
    for a in annotations:
        if (a.item_id, a.model_id) not in gens:
            raise MissingAnnotationsError(
                f"annotation {a.item_id!r}/{a.model_id!r} has no generation"
            )

    models = sorted({a.model_id for a in annotations})
    annotators = sorted({a.annotator_id for a in annotations})

    # Consensus per (item, model): mean rank and majority correctness.
    ranks: dict[tuple[str, str], list[int]] = {}
    target_of: dict[str, str] = {}
    for a in annotations:
        ranks.setdefault((a.item_id, a.model_id), []).append(a.rank)
        target_of[a.item_id] = a.target_type.canonical_label
    mean_rank = {k: sum(v) / len(v) for k, v in ranks.items()}
    correct_flag = {
        k: (sum(1 for r in v if r != 4) / len(v)) > 0.5 for k, v in ranks.items()
    }

    accuracy: dict[str, float] = {}
    n_items: dict[str, int] = {}
    for m in models:
        flags = [flag for (item, model), flag in correct_flag.items() if model == m]
        n_items[m] = len(flags)
        accuracy[m] = sum(flags) / len(flags) if flags else 0.0

    accuracy_by_type: dict[str, dict[str, float]] = {}
    for (item, model), flag in correct_flag.items():
        label = target_of[item]
        accuracy_by_type.setdefault(label, {}).setdefault(model, []).append(flag)  # type: ignore[arg-type]
    accuracy_by_type = {
        label: {m: sum(v) / len(v) for m, v in per_model.items()}
        for label, per_model in accuracy_by_type.items()
    }

    # Ranking distribution over raw annotations, percentages per model.
    rank_counts = {m: [0, 0, 0, 0] for m in models}
    for a in annotations:
        rank_counts[a.model_id][a.rank - 1] += 1
    ranking_distribution = {
        m: [100.0 * c / max(sum(counts), 1) for c in counts]
        for m, counts in ((m, rank_counts[m]) for m in models)
    }

    chi = None
    if len(models) >= 2:
        table = ContingencyTable.make(
            [rank_counts[m] for m in models],
            row_labels=models,
            col_labels=["1", "2", "3", "4"],
        )
        chi = evalstats.chi_square(table)

    anova = None
    groups = [
        [1.0 if correct_flag[(item, model)] else 0.0 for (item, model) in correct_flag if model == m]
        for m in models
    ]
    if len(groups) >= 2 and all(len(g) >= 2 for g in groups):
        values = [x for g in groups for x in g]
        if any(x != values[0] for x in values):
            anova = evalstats.anova_oneway(groups)

    kappa = None
    alpha = None
    if len(annotators) >= 2:
        # validity flags per annotator over shared (item, model) keys
        by_annotator: dict[str, dict[tuple[str, str], int]] = {
            ann: {} for ann in annotators
        }
        for a in annotations:
            by_annotator[a.annotator_id][(a.item_id, a.model_id)] = a.rank
        kappas = []
        for i in range(len(annotators)):
            for j in range(i + 1, len(annotators)):
                left = by_annotator[annotators[i]]
                right = by_annotator[annotators[j]]
                shared = sorted(set(left) & set(right))
                if len(shared) >= 2:
                    try:
                        kappas.append(
                            evalstats.cohens_kappa(
                                [left[k] != 4 for k in shared],
                                [right[k] != 4 for k in shared],
                            )
                        )
                    except evalstats.DegenerateAgreementError:
                        pass
        if kappas:
            kappa = sum(kappas) / len(kappas)
        units = sorted({(a.item_id, a.model_id) for a in annotations})
        matrix = [
            [by_annotator[ann].get(u) for u in units] for ann in annotators
        ]
        try:
            alpha = evalstats.krippendorff_alpha(matrix, level="ordinal")
        except evalstats.InsufficientDataError:
            alpha = None

    # Overlap metrics per (item, model) with references.
    metric_values: dict[str, dict[tuple[str, str], float]] = {
        "bleu": {},
        "rouge1": {},
        "rouge2": {},
        "rougeL": {},
    }
    for (item, model), text in gens.items():
        if item not in refs:
            raise MissingDataError(f"no reference for item {item!r}")
        ref = refs[item]
        metric_values["bleu"][(item, model)] = textmetrics.bleu(text, [ref])
        metric_values["rouge1"][(item, model)] = textmetrics.rouge_n(text, ref, 1).f1
        metric_values["rouge2"][(item, model)] = textmetrics.rouge_n(text, ref, 2).f1
        metric_values["rougeL"][(item, model)] = textmetrics.rouge_l(text, ref).f1

    metric_means = {
        m: {
            name: (
                sum(v for (item, model), v in values.items() if model == m)
                / max(sum(1 for (item, model) in values if model == m), 1)
            )
            for name, values in metric_values.items()
        }
        for m in models
    }

    keys = sorted(gens)
    human = [logistic_rank_transform(mean_rank[k]) for k in keys]
    series: dict[str, list[float]] = {"human": human}
    for name, values in metric_values.items():
        series[name] = [values[k] for k in keys]

    def safe_corr(fn, xs, ys) -> float | None:
        try:
            return fn(xs, ys)
        except (evalstats.ConstantInputError, evalstats.InsufficientDataError):
            return None

    metric_human_corr = {
        name: {
            "pearson": safe_corr(evalstats.pearson, series[name], human),
            "spearman": safe_corr(evalstats.spearman, series[name], human),
        }
        for name in metric_values
    }
    variables = ["bleu", "rouge1", "rouge2", "rougeL", "human"]
    correlation_matrix = {
        a: {
            b: (1.0 if a == b else safe_corr(evalstats.pearson, series[a], series[b]))
            for b in variables
        }
        for a in variables
    }

    report = EvalReport(
        models=models,
        accuracy=accuracy,
        n_items=n_items,
        accuracy_by_type=accuracy_by_type,
        ranking_distribution=ranking_distribution,
        chi_square=chi,
        anova=anova,
        kappa=kappa,
        alpha=alpha,
        metric_means=metric_means,
        metric_human_corr=metric_human_corr,
        correlation_matrix=correlation_matrix,
    )

    out.mkdir(parents=True, exist_ok=True)
    for name, rows in report.tables().items():
        _write_csv(out / f"{name}.csv", rows)
    (out / "eval_report.md").write_text(_eval_markdown(report), encoding="utf-8")
    write_run_json(
        out,
        {
            "command": "eval",
            "generations": str(generations_path),
            "annotations": str(annotations_path),
            "references": str(references_path),
        },
    )
    return report


def _md_table(rows: list[list[str]]) -> str:
    header, *body = rows
    lines = ["| " + " | ".join(str(c) for c in header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in body:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines)


def _eval_markdown(report: EvalReport) -> str:
    tables = report.tables()
    sections = [
        ("Accuracy by model", "accuracy"),
        ("Accuracy by type", "accuracy_by_type"),
        ("Human ranking distribution (%)", "ranking_distribution"),
        ("Significance and agreement", "statistics"),
        ("Mean overlap metrics", "metric_means"),
        ("Metric vs human correlation", "metric_human_correlation"),
        ("Correlation matrix", "correlation_matrix"),
    ]
    parts = ["# Evaluation report", ""]
    for title, key in sections:
        parts.append(f"## {title}")
        parts.append("")
        parts.append(_md_table(tables[key]))
        parts.append("")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# ptd-eval


def cmd_ptd_eval(
    preds_path: str | Path,
    gold_path: str | Path,
    out_dir: str | Path,
    threshold: float = 0.5,
    seed: int = 0,
    n_resamples: int = 1000,
) -> F1Report:
    """Score external detector predictions against gold pairs; write the F1 CSV."""
    out = Path(out_dir)
    preds = dict(ptd.load_predictions(preds_path, threshold))
    gold_report = _strict(load_pairs(gold_path, require_types_for_paraphrase=False), gold_path)
    gold_sets: list[TypeSet] = []
    pred_sets: list[TypeSet] = []
    ten = top10()
    for record in gold_report.records:
        if record.id not in preds:
            raise MissingDataError(f"no prediction for record {record.id!r}")
        gold_sets.append(record.types & ten)
        pred_sets.append(preds[record.id])
    report = ptd.evaluate_ptd(
        pred_sets, gold_sets, seed=seed, n_resamples=n_resamples
    )
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "ptd_f1.csv", report.to_csv_rows())
    summary = [
        ("Aggregate", "Value"),
        ("macro_f1", f"{report.macro_f1:.4f}"),
        ("weighted_f1", f"{report.weighted_f1:.4f}"),
    ]
    _write_csv(out / "ptd_summary.csv", summary)
    write_run_json(
        out,
        {
            "command": "ptd-eval",
            "preds": str(preds_path),
            "gold": str(gold_path),
            "threshold": threshold,
            "seed": seed,
            "n_resamples": n_resamples,
        },
    )
    return report


# ---------------------------------------------------------------------------
# report


def cmd_report(run_dir: str | Path, out_path: str | Path | None = None) -> str:
    """Bundle every CSV in a run directory into one markdown document."""
    run = Path(run_dir)
    if not run.is_dir():
        raise MissingDataError(f"run directory {run} does not exist")
    parts = [f"# Run report: {run.name}", ""]
    run_json = run / "run.json"
    if run_json.exists():
        parts.append("## Run configuration")
        parts.append("")
        parts.append("```json")
        parts.append(run_json.read_text(encoding="utf-8").rstrip())
        parts.append("```")
        parts.append("")
    for csv_path in sorted(run.glob("*.csv")):
        with csv_path.open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            continue
        parts.append(f"## {csv_path.stem}")
        parts.append("")
        parts.append(_md_table(rows))
        parts.append("")
    text = "\n".join(parts)
    target = Path(out_path) if out_path else run / "report.md"
    target.write_text(text, encoding="utf-8")
    return text
