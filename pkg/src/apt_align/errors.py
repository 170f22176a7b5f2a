"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class AptAlignError(Exception):
    """Base class for all toolkit errors."""


class UnknownTypeError(AptAlignError):
    """A label does not name any registered paraphrase type."""

    def __init__(self, label: str, line_no: int | None = None):
        self.label = label
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"unknown paraphrase type: {label!r}{where}")


class EmptyInputError(AptAlignError):
    """An operation received empty input where non-empty is required."""


class SchemaError(AptAlignError):
    """A record does not match the expected JSONL schema."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message}")


class IoError(AptAlignError):
    """A file could not be read or written."""


class MissingTextError(AptAlignError):
    """An annotation references a (item, model) pair with no generation text."""

    def __init__(self, item_id: str, model_id: str):
        self.item_id = item_id
        self.model_id = model_id
        super().__init__(f"no generation text for item {item_id!r}, model {model_id!r}")


class NonPositiveBetaError(AptAlignError):
    """Preference-loss beta must be strictly positive."""


class EmptyCorpusError(AptAlignError):
    """Training requires a non-empty corpus."""


class EmptyPairsError(AptAlignError):
    """Preference training requires a non-empty pair list."""


class VocabTooSmallError(AptAlignError):
    """The model vocabulary is below the minimum usable size."""


class LengthMismatchError(AptAlignError):
    """Paired inputs have different lengths."""


class ConstantInputError(AptAlignError):
    """Correlation is undefined for a constant sequence."""


class DegenerateAgreementError(AptAlignError):
    """Chance agreement is 1, so kappa is undefined."""


class InsufficientDataError(AptAlignError):
    """Not enough data points for the requested statistic."""


class DegenerateTableError(AptAlignError):
    """Contingency table has an all-zero row or column."""


class DegenerateInputError(AptAlignError):
    """ANOVA groups are too small or have no variance at all."""


class AllZeroError(AptAlignError):
    """Class counts are all zero."""


class MissingDataError(AptAlignError):
    """A required input file or field is absent."""


class MissingAnnotationsError(AptAlignError):
    """Evaluation requires annotations covering the generations."""
