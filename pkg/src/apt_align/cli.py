"""Command-line entry point: apt-align <command>.

Exit codes: 0 success, 2 schema error, 3 missing data, 4 numeric degeneracy.
"""

from __future__ import annotations

import sys

import click

from . import pipeline, tinylm
from .errors import (
    AllZeroError,
    AptAlignError,
    ConstantInputError,
    DegenerateAgreementError,
    DegenerateInputError,
    DegenerateTableError,
    EmptyCorpusError,
    EmptyInputError,
    EmptyPairsError,
    InsufficientDataError,
    IoError,
    MissingAnnotationsError,
    MissingDataError,
    MissingTextError,
    SchemaError,
    UnknownTypeError,
)

_SCHEMA_ERRORS = (SchemaError, UnknownTypeError)
_MISSING_ERRORS = (
    IoError,
    MissingDataError,
    MissingTextError,
    MissingAnnotationsError,
    FileNotFoundError,
)
_DEGENERATE_ERRORS = (
    DegenerateTableError,
    DegenerateInputError,
    DegenerateAgreementError,
    ConstantInputError,
    InsufficientDataError,
    EmptyInputError,
    EmptyCorpusError,
    EmptyPairsError,
    AllZeroError,
)


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _SCHEMA_ERRORS as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(2)
    except _MISSING_ERRORS as exc:
        click.echo(f"missing data: {exc}", err=True)
        sys.exit(3)
    except _DEGENERATE_ERRORS as exc:
        click.echo(f"degenerate input: {exc}", err=True)
        sys.exit(4)
    except AptAlignError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _config_section(config_path: str | None, section: str) -> dict:
    if not config_path:
        return {}
    return pipeline.load_config_file(config_path).get(section, {})


@click.group()
def main() -> None:
    """Paraphrase-type preference optimization and evaluation toolkit."""


@main.command()
@click.argument("input_path", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["pairs", "prefs", "annotations"]), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--lax-types", is_flag=True, help="Allow typed-paraphrase rows with empty types (QQP-style data).")
def ingest(input_path, fmt, out_dir, lax_types):
    """Normalize a JSONL dump and report per-type counts."""
    report = _run(pipeline.cmd_ingest, input_path, fmt, out_dir, lax_types=lax_types)
    click.echo(f"{len(report.records)} records, {len(report.errors)} errors")
    for label, total, unique in pipeline.type_frequency_table(report):
        click.echo(f"{label}\t{total}\t{unique}")


@main.command()
@click.argument("input_path", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["pairs", "prefs"]), required=True)
@click.option("--mode", type=click.Choice(["stratified", "multilabel"]), default="stratified", show_default=True)
@click.option("--ratio", type=float, default=0.8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def split(input_path, fmt, mode, ratio, seed, out_dir):
    """Split a corpus file into seeded train/test JSONL plus a manifest."""
    result = _run(pipeline.cmd_split, input_path, fmt, ratio, seed, out_dir, mode=mode)
    click.echo(f"train {len(result.train)} / test {len(result.test)}")


@main.command()
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--items", "items_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def pairs(annotations_path, items_path, out_dir):
    """Build preference pairs from rank annotations."""
    built = _run(pipeline.cmd_pairs, annotations_path, items_path, out_dir)
    click.echo(f"{len(built)} preference pairs")


@main.command()
@click.argument("method", type=click.Choice(["sft", "dpo", "ipo"]))
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--init", "init_checkpoint", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None, help="INI run config; [train] section supplies overrides.")
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--weight-decay", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--max-grad-norm", type=float, default=None)
@click.option("--scheduler", type=click.Choice(["cosine", "plateau"]), default=None)
@click.option("--warmup-ratio", type=float, default=None)
def train(method, data_path, out_dir, seed, init_checkpoint, config_path, **overrides):
    """Train the tiny model with SFT or a preference objective."""
    file_overrides = _config_section(config_path, "train")
    typed: dict = {}
    for k, v in file_overrides.items():
        if k in ("epochs", "batch_size", "patience"):
            typed[k] = int(v)
        elif k == "scheduler":
            typed[k] = v
        else:
            typed[k] = float(v)
    typed.update({k: v for k, v in overrides.items() if v is not None})
    _, curve = _run(
        pipeline.cmd_train,
        method,
        data_path,
        out_dir,
        seed=seed,
        init_checkpoint=init_checkpoint,
        overrides=typed,
    )
    click.echo(f"trained {method} for {len(curve)} epochs; outputs in {out_dir}")


@main.command()
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--format", "fmt", type=click.Choice(["pairs", "prefs"]), default="pairs", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--model-id", default="tinylm", show_default=True)
@click.option("--max-len", type=int, default=48, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sample", is_flag=True, help="Sample instead of greedy decoding.")
def gen(checkpoint_path, data_path, fmt, out_dir, model_id, max_len, seed, sample):
    """Generate paraphrases for every prompt in a data file."""
    rows = _run(
        pipeline.cmd_gen,
        checkpoint_path,
        data_path,
        out_dir,
        fmt=fmt,
        model_id=model_id,
        max_len=max_len,
        seed=seed,
        greedy=not sample,
    )
    click.echo(f"wrote {len(rows)} generations")


@main.command(name="eval")
@click.option("--generations", "generations_path", type=click.Path(), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--references", "references_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def eval_cmd(generations_path, annotations_path, references_path, out_dir):
    """Run the evaluation battery and write report tables."""
    report = _run(
        pipeline.cmd_eval, generations_path, annotations_path, references_path, out_dir
    )
    for model in report.models:
        click.echo(f"{model}: accuracy {report.accuracy[model]:.3f}")


@main.command(name="ptd-eval")
@click.option("--preds", "preds_path", type=click.Path(), required=True)
@click.option("--gold", "gold_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resamples", "n_resamples", type=int, default=1000, show_default=True)
def ptd_eval(preds_path, gold_path, out_dir, threshold, seed, n_resamples):
    """Score detector predictions against gold types."""
    report = _run(
        pipeline.cmd_ptd_eval,
        preds_path,
        gold_path,
        out_dir,
        threshold=threshold,
        seed=seed,
        n_resamples=n_resamples,
    )
    click.echo(f"macro F1 {report.macro_f1:.4f}, weighted F1 {report.weighted_f1:.4f}")


@main.command()
@click.argument("run_dir", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
def report(run_dir, out_path):
    """Bundle a run directory's tables into one markdown report."""
    _run(pipeline.cmd_report, run_dir, out_path)
    click.echo(f"report written for {run_dir}")


@main.command(name="grad-check")
@click.option("--loss", "loss_kind", type=click.Choice(["sft", "dpo", "ipo"]), default="sft", show_default=True)
@click.option("--eps", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def grad_check_cmd(loss_kind, eps, seed):
    """Self-test: analytic vs finite-difference gradients on a fresh model."""
    from .corpus import PreferenceRecord
    from .taxonomy import parse_type

    vocab = tinylm.Vocab.build(["alpha beta gamma delta epsilon", "zeta eta theta"])
    model = tinylm.init_model(vocab, tinylm.TinyConfig(seed=seed), seed)
    if loss_kind == "sft":
        batch = [("alpha beta", "gamma delta"), ("zeta", "eta theta")]
    else:
        batch = [
            PreferenceRecord(
                "g1",
                "alpha beta gamma",
                parse_type("Change of order"),
                "gamma beta alpha",
                "alpha beta gamma",
            )
        ]
        vocab = tinylm.Vocab.build(
            [pipeline.render_prompt(batch[0].original, [batch[0].target_type]), batch[0].chosen]
        )
        model = tinylm.init_model(vocab, tinylm.TinyConfig(seed=seed), seed)
    err = tinylm.grad_check(model, batch, loss_kind, eps=eps, seed=seed)
    click.echo(f"max relative error: {err:.3e}")
    if err >= 1e-4:
        sys.exit(4)


if __name__ == "__main__":
    main()
