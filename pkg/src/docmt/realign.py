"""Re-segmentation of a hypothesis document onto reference sentences.

This is the minimum-word-error segmentation used for speech translation
evaluation: the hypothesis token stream is cut into as many segments as there
are reference sentences so that the summed word-level edit distance is
minimal. Sentence-level metrics can then be computed on the realigned pairs.

The optimal total equals the plain edit distance between the hypothesis and
the concatenated references (any monotone alignment path crosses each
reference boundary at some hypothesis position, and that position is a valid
cut). The cut points are recovered greedily from the left, choosing the
smallest position that still admits an optimal completion, which yields the
lexicographically smallest optimal segmentation.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingScore
from .tokenizer import tokenize_scoring, tokenize_with_spans


@dataclass(frozen=True)
class Segmentation:
    cut_points: Tuple[int, ...]

    @property
    def num_segments(self) -> int:
        return len(self.cut_points) - 1

    def spans(self):
        return list(zip(self.cut_points[:-1], self.cut_points[1:]))


@dataclass
class AlignmentResult:
    pairs: List[Tuple[List[str], List[str]]]
    total_cost: int
    costs: List[int] = field(default_factory=list)

    @property
    def empty_count(self) -> int:
        return sum(1 for hyp, _ in self.pairs if not hyp)


def word_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance between two token sequences (unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _encode(tokens_lists):
    vocab = {}
    return [np.array([vocab.setdefault(t, len(vocab)) for t in toks], dtype=np.int64)
            for toks in tokens_lists]


def _next_row(prev: np.ndarray, symbol: int, ref: np.ndarray, first: int) -> np.ndarray:
    """One Levenshtein row: ``prev`` is the row for the previous hypothesis
    token, ``first`` the value of the new row at column 0."""
    diag = prev[:-1] + (ref != symbol)
    best = np.minimum(prev[1:] + 1, diag)
    x = np.empty_like(prev)
    x[0] = first
    x[1:] = best
    # horizontal moves: row[j] = min_k x[k] + (j - k)
    idx = np.arange(len(prev))
    return np.minimum.accumulate(x - idx) + idx


def _suffix_table(hyp: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``table[t, r]`` is the edit distance between ``hyp[t:]`` and ``ref[r:]``."""
    T, R = len(hyp), len(ref)
    table = np.empty((T + 1, R + 1), dtype=np.int64)
    rev_ref = ref[::-1]
    row = np.arange(R + 1, dtype=np.int64)
    table[T] = row[::-1]
    for t in range(T - 1, -1, -1):
        row = _next_row(row, hyp[t], rev_ref, T - t)
        table[t] = row[::-1]
    return table


def mwer_segment(hyp: Sequence[str], refs: Sequence[Sequence[str]]):
    """Cut ``hyp`` into ``len(refs)`` segments minimizing total edit distance.

    :returns: ``(Segmentation, AlignmentResult)``; ties are broken toward the
        lexicographically smallest tuple of cut points
    """
    if not refs:
        raise ValueError("mwer_segment needs at least one reference segment")
    hyp = list(hyp)
    refs = [list(r) for r in refs]
    encoded = _encode([hyp] + refs)
    hyp_ids, ref_ids = encoded[0], encoded[1:]
    flat_ref = np.concatenate(ref_ids) if ref_ids else np.empty(0, dtype=np.int64)
    T = len(hyp)
    suffix = _suffix_table(hyp_ids, flat_ref)
    total = int(suffix[0, 0])

    cuts = [0]
    costs = []
    spent = 0
    boundary = 0
    start = 0
    for j, ref in enumerate(ref_ids):
        boundary += len(ref)
        if j == len(ref_ids) - 1:
            cost = word_edit_distance(hyp[start:], refs[j])
            cuts.append(T)
            costs.append(cost)
            break
        row = np.arange(len(ref) + 1, dtype=np.int64)
        t = start
        while True:
            seg_cost = int(row[-1])
            if spent + seg_cost + int(suffix[t, boundary]) == total:
                break
            row = _next_row(row, hyp_ids[t], ref, t - start + 1)
            t += 1
        cuts.append(t)
        costs.append(seg_cost)
        spent += seg_cost
        start = t

    pairs = [(hyp[a:b], refs[j]) for j, (a, b) in enumerate(zip(cuts[:-1], cuts[1:]))]
    return Segmentation(tuple(cuts)), AlignmentResult(pairs, sum(costs), costs)


@dataclass
class RealignedSegment:
    doc_id: str
    ref_index: int
    hyp_text: str
    ref_text: str

    @property
    def empty(self) -> bool:
        return self.hyp_text == ""

    def as_record(self) -> dict:
        return {"doc_id": self.doc_id, "ref_index": self.ref_index,
                "hyp_text": self.hyp_text, "empty": self.empty}


def realign_document(doc_id: str, hyp_text: str, ref_sentences: Sequence[str]):
    """Realign raw hypothesis text onto reference sentences.

    Alignment runs on scoring tokens; cut points are mapped back to character
    offsets so each emitted segment is a verbatim slice of ``hyp_text``.

    :returns: ``(segments, Segmentation, AlignmentResult)``
    """
    spans = tokenize_with_spans(hyp_text)
    hyp_tokens = [tok for tok, _, _ in spans]
    ref_tokens = [tokenize_scoring(s) for s in ref_sentences]
    seg, result = mwer_segment(hyp_tokens, ref_tokens)

    def offset(t):
        return spans[t][1] if t < len(spans) else len(hyp_text)

    segments = []
    for j, (a, b) in enumerate(seg.spans()):
        text = hyp_text[offset(a):offset(b)].strip() if a < b else ""
        segments.append(RealignedSegment(doc_id, j, text, ref_sentences[j]))
    return segments, seg, result


@dataclass
class ScoreAggregate:
    per_document: Dict[str, float]
    corpus_mean: float
    sentence_mean: float
    empty_count: int
    n_sentences: int


def attach_scores(results: Mapping[str, AlignmentResult],
                  per_sentence_scores: Mapping[Tuple[str, int], float]) -> ScoreAggregate:
    """Average externally computed sentence scores over realigned documents.

    ``per_sentence_scores`` is keyed by ``(doc_id, ref_index)``. Empty
    hypothesis segments keep whatever score the external metric gave them.
    ``corpus_mean`` is the unweighted mean of document means;
    ``sentence_mean`` pools all sentences.

    :raises MissingScore: an aligned pair has no score
    """
    per_doc = {}
    pooled = []
    empties = 0
    for doc_id, result in results.items():
        values = []
        for j, (hyp, _) in enumerate(result.pairs):
            try:
                values.append(float(per_sentence_scores[(doc_id, j)]))
            except KeyError:
                raise MissingScore(f"no score for document {doc_id!r}, sentence {j}") from None
            empties += not hyp
        if values:
            per_doc[doc_id] = math.fsum(values) / len(values)
        pooled.extend(values)
    corpus = math.fsum(per_doc.values()) / len(per_doc) if per_doc else math.nan
    sentence = math.fsum(pooled) / len(pooled) if pooled else math.nan
    return ScoreAggregate(per_doc, corpus, sentence, empties, len(pooled))


def empty_alignment_table(counts: Mapping[Tuple[str, str], int], systems: Optional[List[str]] = None,
                          windows: Optional[List[str]] = None) -> str:
    """Render empty-alignment counts as a window x system TSV grid."""
    if systems is None:
        systems = list(dict.fromkeys(s for s, _ in counts))
    if windows is None:
        windows = list(dict.fromkeys(w for _, w in counts))
    lines = ["\t".join([""] + systems)]
    for w in windows:
        cells = [str(counts[(s, w)]) if (s, w) in counts else "" for s in systems]
        lines.append("\t".join([w] + cells))
    return "\n".join(lines) + "\n"
