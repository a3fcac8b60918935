"""Detection of degenerate long n-gram repetitions in translations."""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import EmptyGroup
from .tokenizer import tokenize_scoring, tokenize_whitespace

UNITS = {"tokens": tokenize_scoring, "whitespace": tokenize_whitespace}


def find_long_repeat(tokens: Sequence[str], n: int = 10) -> Optional[Tuple[int, int]]:
    """Start positions ``(i, j)``, ``i < j``, of the first repeated n-gram.

    N-grams are hashed as tuples; a dict hit compares the tuples element-wise,
    so a hash collision can never produce a false positive. A repeat of any
    length ``>= n`` contains a repeated n-gram, so checking exactly ``n``
    covers them all.
    """
    if n < 1:
        raise ValueError("n must be positive")
    seen: Dict[tuple, int] = {}
    for j in range(len(tokens) - n + 1):
        gram = tuple(tokens[j:j + n])
        i = seen.setdefault(gram, j)
        if i != j:
            return i, j
    return None


def has_long_repeat(tokens: Sequence[str], n: int = 10) -> bool:
    return find_long_repeat(tokens, n) is not None


@dataclass
class RepetitionReport:
    per_document: Dict[str, bool]
    n_threshold: int

    @property
    def rate(self) -> float:
        return sum(self.per_document.values()) / len(self.per_document)

    @property
    def flagged(self) -> int:
        return sum(self.per_document.values())


def repetition_report(documents: Mapping[str, str], n: int = 10, unit: str = "tokens") -> RepetitionReport:
    """Flag each document independently; repeats never span two documents."""
    if not documents:
        raise EmptyGroup("no documents in group")
    tokenize = UNITS[unit]
    return RepetitionReport({doc_id: has_long_repeat(tokenize(text), n)
                             for doc_id, text in documents.items()}, n)


def repetition_rate(groups: Mapping[Tuple[str, str], Mapping[str, str]], n: int = 10,
                    unit: str = "tokens") -> Dict[Tuple[str, str], RepetitionReport]:
    """One report per ``(system, l_max)`` group of ``doc_id -> translation``.

    :raises EmptyGroup: a group has no documents
    """
    out = {}
    for key, docs in groups.items():
        if not docs:
            raise EmptyGroup(f"group {key} is empty")
        out[key] = repetition_report(docs, n, unit)
    return out


def repetition_table(reports: Mapping[Tuple[str, str], RepetitionReport],
                     systems: Optional[List[str]] = None,
                     windows: Optional[List[str]] = None) -> str:
    """System x l_max grid of repetition rates with two decimals."""
    systems = systems or list(dict.fromkeys(s for s, _ in reports))
    windows = windows or list(dict.fromkeys(w for _, w in reports))
    lines = ["\t".join([""] + list(windows))]
    for s in systems:
        cells = [f"{reports[(s, w)].rate:.2f}" if (s, w) in reports else "" for w in windows]
        lines.append("\t".join([s] + cells))
    return "\n".join(lines) + "\n"
