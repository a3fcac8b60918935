"""Pseudo-document corpus construction.

Training corpora are built by cutting each parallel document into runs of
consecutive sentence pairs whose source length stays under a per-fragment
budget. The budget is redrawn for every fragment, either from a Normal fitted
to full-document lengths (rescaled to the target maximum) or uniformly.
Test sets use a fixed budget equal to the maximum length and fold a short
trailing fragment into its predecessor.
"""

import hashlib
import math
import statistics
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyCorpus, InsufficientData, InsufficientVariance
from .tokenizer import LengthScheme, sentence_length

TAIL_MERGE_THRESHOLD = 50
UNIFORM_LOWER = 128


@dataclass
class SentencePair:
    src: str
    tgt: str
    src_len: int
    tgt_len: int = 0
    sent_id: Optional[str] = None


@dataclass
class DocumentPair:
    doc_id: str
    pairs: List[SentencePair]

    @property
    def src_len(self) -> int:
        return sum(p.src_len for p in self.pairs)

    @property
    def tgt_len(self) -> int:
        return sum(p.tgt_len for p in self.pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass
class PseudoDocument:
    doc_id: str
    start: int
    end: int
    src_len: int
    tgt_len: int = 0
    budget: Optional[int] = None
    overflow: bool = False
    tail_merged: bool = False

    @property
    def pseudo_id(self) -> str:
        return f"{self.doc_id}:{self.start}-{self.end}"

    def as_record(self, doc: Optional[DocumentPair] = None) -> dict:
        rec = {
            "id": self.pseudo_id,
            "doc_id": self.doc_id,
            "start": self.start,
            "end": self.end,
            "src_len": self.src_len,
            "tgt_len": self.tgt_len,
            "budget": self.budget,
            "overflow": self.overflow,
            "tail_merged": self.tail_merged,
        }
        if doc is not None:
            rec["src"] = [p.src for p in doc.pairs[self.start:self.end]]
            rec["tgt"] = [p.tgt for p in doc.pairs[self.start:self.end]]
        return rec


@dataclass(frozen=True)
class GaussianParams:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise InsufficientVariance(f"standard deviation must be positive, got {self.std}")

    def scaled(self, factor: float) -> "GaussianParams":
        return GaussianParams(self.mean * factor, self.std * factor)


def make_document(doc_id: str, src: Sequence[str], tgt: Sequence[str],
                  scheme: LengthScheme = LengthScheme()) -> DocumentPair:
    """Pair up source and target sentences and measure both sides.

    Sentence ids are ``<doc_id>:<index>``; with the external scheme the
    source is looked up under that id and the target under ``<id>:tgt``.
    """
    if len(src) != len(tgt):
        raise ValueError(f"document {doc_id!r}: {len(src)} source vs {len(tgt)} target sentences")
    pairs = []
    for i, (s, t) in enumerate(zip(src, tgt)):
        sid = f"{doc_id}:{i}"
        if scheme.variant == "external":
            tgt_len = scheme.external_counts.get(f"{sid}:tgt", 0)
        else:
            tgt_len = sentence_length(t, scheme)
        pairs.append(SentencePair(s, t, sentence_length(s, scheme, sid), tgt_len, sid))
    return DocumentPair(doc_id, pairs)


def fit_length_distribution(doc_lengths: Sequence[int]) -> GaussianParams:
    """Sample mean and (n-1) standard deviation of full-document lengths."""
    if len(doc_lengths) < 2:
        raise InsufficientData("need at least two documents to fit a length distribution")
    mean = statistics.fmean(doc_lengths)
    std = statistics.stdev(doc_lengths)
    if std == 0:
        raise InsufficientVariance("all documents have the same length")
    return GaussianParams(mean, std)


def document_rng(seed: int, doc_id: str) -> np.random.Generator:
    """Per-document generator, independent of processing order."""
    digest = hashlib.sha256(doc_id.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])


BudgetSampler = Callable[[np.random.Generator], int]


def gaussian_budget_sampler(params: GaussianParams, l_max: int, lower: int = 1,
                            max_tries: int = 10000) -> BudgetSampler:
    """Rejection-sample integer budgets from ``params`` into ``[lower, l_max)``."""
    if lower >= l_max:
        raise ValueError(f"empty budget interval [{lower}, {l_max})")

    def draw(rng):
        for _ in range(max_tries):
            b = math.floor(rng.normal(params.mean, params.std))
            if lower <= b < l_max:
                return b
        raise RuntimeError(f"rejection sampling failed: N({params.mean:.1f}, {params.std:.1f}) "
                           f"rarely falls in [{lower}, {l_max})")

    return draw


def uniform_budget_sampler(l_max: int, lower: int = UNIFORM_LOWER) -> BudgetSampler:
    lower = min(lower, l_max)

    def draw(rng):
        return int(rng.integers(lower, l_max, endpoint=True))

    return draw


def pack_document(doc: DocumentPair, draw_budget: BudgetSampler, rng: np.random.Generator,
                  l_max: int) -> List[PseudoDocument]:
    """Greedily pack ``doc`` into fragments, redrawing the budget per fragment.

    A sentence pair that does not fit in a fresh budget on its own becomes a
    single-pair fragment (flagged ``overflow`` when it exceeds ``l_max``).
    The trailing fragment is kept whatever its length.
    """
    out = []
    start = 0
    n = len(doc.pairs)
    while start < n:
        budget = draw_budget(rng)
        end = start
        src_total = tgt_total = 0
        while end < n and src_total + doc.pairs[end].src_len <= budget:
            src_total += doc.pairs[end].src_len
            tgt_total += doc.pairs[end].tgt_len
            end += 1
        if end == start:
            src_total = doc.pairs[start].src_len
            tgt_total = doc.pairs[start].tgt_len
            end = start + 1
        out.append(PseudoDocument(doc.doc_id, start, end, src_total, tgt_total, budget,
                                  overflow=src_total > l_max))
        start = end
    return out


def gaussian_params_for(docs: Sequence[DocumentPair], l_max: int) -> GaussianParams:
    """Fit full-document lengths and rescale so the longest document maps to ``l_max``."""
    lengths = [d.src_len for d in docs]
    params = fit_length_distribution(lengths)
    return params.scaled(l_max / max(lengths))


def build_gaussian_corpus(docs: Sequence[DocumentPair], l_max: int, params: GaussianParams,
                          seed: int, draw_budget: Optional[BudgetSampler] = None) -> List[PseudoDocument]:
    """Pack every document with budgets drawn from ``params`` (already in
    ``l_max`` units, see :func:`gaussian_params_for`) truncated to
    ``[shortest sentence, l_max)``."""
    if draw_budget is None:
        lengths = [p.src_len for d in docs for p in d.pairs if p.src_len > 0]
        lower = max(1, min(lengths)) if lengths else 1
        draw_budget = gaussian_budget_sampler(params, l_max, lower)
    out = []
    for doc in docs:
        out.extend(pack_document(doc, draw_budget, document_rng(seed, doc.doc_id), l_max))
    return out


def build_uniform_corpus(docs: Sequence[DocumentPair], l_max: int, seed: int,
                         lower: int = UNIFORM_LOWER,
                         draw_budget: Optional[BudgetSampler] = None) -> List[PseudoDocument]:
    """Pack every document with budgets drawn uniformly from ``[lower, l_max]``."""
    draw_budget = draw_budget or uniform_budget_sampler(l_max, lower)
    out = []
    for doc in docs:
        out.extend(pack_document(doc, draw_budget, document_rng(seed, doc.doc_id), l_max))
    return out


def build_fixed_length_testset(docs: Sequence[DocumentPair], l_max: int,
                               tail_threshold: int = TAIL_MERGE_THRESHOLD) -> List[PseudoDocument]:
    """Cut each document into fragments of source length close to ``l_max``.

    Fragments grow to the largest total not exceeding ``l_max``. A final
    fragment shorter than ``tail_threshold`` is merged into the previous one,
    even if the result exceeds ``l_max``.
    """
    out = []
    for doc in docs:
        frags = []
        start = 0
        n = len(doc.pairs)
        while start < n:
            end = start
            src_total = tgt_total = 0
            while end < n and src_total + doc.pairs[end].src_len <= l_max:
                src_total += doc.pairs[end].src_len
                tgt_total += doc.pairs[end].tgt_len
                end += 1
            if end == start:
                src_total = doc.pairs[start].src_len
                tgt_total = doc.pairs[start].tgt_len
                end = start + 1
            frags.append(PseudoDocument(doc.doc_id, start, end, src_total, tgt_total, l_max,
                                        overflow=src_total > l_max))
            start = end
        if len(frags) > 1 and frags[-1].src_len < tail_threshold:
            tail = frags.pop()
            prev = frags.pop()
            src_total = prev.src_len + tail.src_len
            frags.append(PseudoDocument(doc.doc_id, prev.start, tail.end, src_total,
                                        prev.tgt_len + tail.tgt_len, l_max,
                                        overflow=prev.overflow, tail_merged=True))
        out.extend(frags)
    return out


def sentence_level_testset(docs: Sequence[DocumentPair]) -> List[PseudoDocument]:
    """One pseudo-document per sentence pair (the ``sent`` column of the ladder)."""
    return [PseudoDocument(d.doc_id, i, i + 1, p.src_len, p.tgt_len)
            for d in docs for i, p in enumerate(d.pairs)]


def whole_document_testset(docs: Sequence[DocumentPair]) -> List[PseudoDocument]:
    return [PseudoDocument(d.doc_id, 0, len(d.pairs), d.src_len, d.tgt_len) for d in docs]


@dataclass(frozen=True)
class LengthStats:
    count: int
    mean: float
    min: int
    max: int


def corpus_stats(corpus: Sequence[PseudoDocument]) -> Dict[str, LengthStats]:
    """Count, mean, min and max length for the source and target sides."""
    if not corpus:
        raise EmptyCorpus("cannot compute statistics of an empty corpus")
    out = {}
    for side in ("src", "tgt"):
        lengths = [getattr(p, f"{side}_len") for p in corpus]
        out[side] = LengthStats(len(lengths), statistics.fmean(lengths), min(lengths), max(lengths))
    return out


def document_stats(docs: Sequence[DocumentPair]) -> Dict[str, LengthStats]:
    return corpus_stats(whole_document_testset(docs))


def reconstruct(corpus: Iterable[PseudoDocument]) -> Dict[str, List[Tuple[int, int]]]:
    """Group fragment spans by origin document, in corpus order."""
    spans: Dict[str, List[Tuple[int, int]]] = {}
    for p in corpus:
        spans.setdefault(p.doc_id, []).append((p.start, p.end))
    return spans


def check_reconstruction(docs: Sequence[DocumentPair], corpus: Sequence[PseudoDocument]) -> bool:
    """True when every document is covered by contiguous, ordered, non-overlapping spans."""
    spans = reconstruct(corpus)
    if set(spans) != {d.doc_id for d in docs}:
        return False
    for d in docs:
        pos = 0
        for start, end in spans[d.doc_id]:
            if start != pos or end <= start:
                return False
            pos = end
        if pos != len(d.pairs):
            return False
    return True


def stats_table_long(rows: Dict[str, Dict[str, LengthStats]]) -> str:
    """``split side count mean min max`` TSV; means rounded to integers as in
    published tables, the exact value is kept in JSON metadata."""
    lines = ["split\tside\tcount\tmean\tmin\tmax"]
    for split, by_side in rows.items():
        for side, s in by_side.items():
            lines.append(f"{split}\t{side}\t{s.count}\t{round(s.mean)}\t{s.min}\t{s.max}")
    return "\n".join(lines) + "\n"


def stats_table_wide(rows: Dict[str, Dict[str, LengthStats]], side: str = "src") -> str:
    """Two-row ``Count``/``Length`` grid with one column per split."""
    names = list(rows)
    lines = ["\t".join([""] + names),
             "\t".join(["Count"] + [str(rows[n][side].count) for n in names]),
             "\t".join(["Length"] + [str(round(rows[n][side].mean)) for n in names])]
    return "\n".join(lines) + "\n"
