"""Canonical registry of atomic paraphrase types.

The registry is closed: the 26 transformation categories below are the only
ones the toolkit knows about. Labels are matched case-insensitively after
trimming, but canonical output always uses the exact spelling registered here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import UnknownTypeError

__all__ = [
    "ParaphraseType",
    "TypeSet",
    "all_types",
    "parse_type",
    "top10",
    "type_by_id",
]

_CANONICAL_LABELS = (
    "Addition/Deletion",
    "Change of format",
    "Change of order",
    "Converse substitution",
    "Coordination changes",
    "Derivational Changes",
    "Diathesis alternation",
    "Direct/indirect style alternations",
    "Ellipsis",
    "Entailment",
    "Identity",
    "Inflectional Changes",
    "Modal Verb Changes",
    "Negation switching",
    "Non-paraphrase",
    "Opposite polarity substitution (contextual)",
    "Opposite polarity substitution (habitual)",
    "Punctuation changes",
    "Same Polarity Substitution (contextual)",
    "Same Polarity Substitution (habitual)",
    "Same Polarity Substitution (named ent.)",
    "Semantic-based",
    "Spelling changes",
    "Subordination and nesting changes",
    "Syntax/discourse structure changes",
    "Synthetic/Analytic Substitution",
)

_TOP10_LABELS = (
    "Addition/Deletion",
    "Change of order",
    "Derivational Changes",
    "Inflectional Changes",
    "Punctuation changes",
    "Same Polarity Substitution (contextual)",
    "Semantic-based",
    "Spelling changes",
    "Subordination and nesting changes",
    "Synthetic/Analytic Substitution",
)


@dataclass(frozen=True, order=True)
class ParaphraseType:
    """One atomic transformation category.

    Ordering and hashing go by ``id``, which is unique and dense in 0..25.
    """

    id: int
    canonical_label: str

    def __str__(self) -> str:
        return self.canonical_label


_REGISTRY: tuple[ParaphraseType, ...] = tuple(
    ParaphraseType(i, label) for i, label in enumerate(_CANONICAL_LABELS)
)
_BY_FOLDED_LABEL: dict[str, ParaphraseType] = {
    t.canonical_label.casefold(): t for t in _REGISTRY
}

assert len(_BY_FOLDED_LABEL) == len(_REGISTRY), "canonical labels must be unique"


class TypeSet:
    """Immutable set of paraphrase types with deterministic iteration.

    Iteration always yields members in ascending id order, so serialized
    label lists and class-aligned vectors are reproducible.
    """

    __slots__ = ("_members",)

    def __init__(self, members: Iterable[ParaphraseType] = ()):
        self._members: tuple[ParaphraseType, ...] = tuple(
            sorted(set(members), key=lambda t: t.id)
        )

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "TypeSet":
        return cls(parse_type(label) for label in labels)

    def labels(self) -> list[str]:
        return [t.canonical_label for t in self._members]

    def __iter__(self) -> Iterator[ParaphraseType]:
        return iter(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, item: object) -> bool:
        return item in set(self._members)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TypeSet):
            return NotImplemented
        return self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __or__(self, other: "TypeSet") -> "TypeSet":
        return TypeSet((*self._members, *other._members))

    def __and__(self, other: "TypeSet") -> "TypeSet":
        keep = set(other._members)
        return TypeSet(t for t in self._members if t in keep)

    def __le__(self, other: "TypeSet") -> bool:
        return set(self._members) <= set(other._members)

    def __repr__(self) -> str:
        return f"TypeSet({self.labels()!r})"


def all_types() -> TypeSet:
    """The full closed registry, all 26 categories."""
    return TypeSet(_REGISTRY)


def type_by_id(type_id: int) -> ParaphraseType:
    if not 0 <= type_id < len(_REGISTRY):
        raise UnknownTypeError(f"id {type_id}")
    return _REGISTRY[type_id]


def parse_type(label: str, line_no: int | None = None) -> ParaphraseType:
    """Resolve a label to its registered type.

    Matching trims surrounding whitespace and ignores case; the returned
    type carries the canonical spelling. Unknown labels raise rather than
    auto-registering, so taxonomy drift in data dumps surfaces immediately.
    """
    key = label.strip().casefold()
    if not key:
        raise UnknownTypeError(label, line_no)
    try:
        return _BY_FOLDED_LABEL[key]
    except KeyError:
        raise UnknownTypeError(label, line_no) from None


def top10() -> TypeSet:
    """The ten types the detection harness is restricted to."""
    return TypeSet.from_labels(_TOP10_LABELS)
