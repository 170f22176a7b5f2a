"""Toolkit for paraphrase-type preference optimization and evaluation.

Subpackages:
  taxonomy     — the closed registry of transformation categories
  corpus       — ingestion, normalization, prompts, splits, preference pairs
  prefloss     — DPO/IPO/Bradley-Terry loss kernels over scored sequences
  tinylm       — a checkable, laptop-scale autoregressive model
  textmetrics  — BLEU and ROUGE-1/2/L
  evalstats    — correlation, agreement, significance tests, F1, bootstrap
  ptd          — paraphrase-type detection harness and rule baseline
  pipeline     — command orchestration and report generation
"""

from . import corpus, evalstats, prefloss, ptd, taxonomy, textmetrics, tinylm
from .errors import AptAlignError

__version__ = "0.1.0"

__all__ = [
    "AptAlignError",
    "corpus",
    "evalstats",
    "prefloss",
    "ptd",
    "taxonomy",
    "textmetrics",
    "tinylm",
    "__version__",
]
