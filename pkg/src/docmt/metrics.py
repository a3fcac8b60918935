"""BLEU and its document-level variants.

Three scores are provided, and they are not comparable with each other:

* ``bleu``: classic corpus BLEU over aligned sentence pairs.
* ``d_bleu``: corpus BLEU where each segment is a whole document, so n-gram
  matches are counted over document-wide windows and micro-aggregated.
* ``ds_bleu``: one smoothed BLEU per document (with effective order), then an
  unweighted mean over documents.

The arithmetic follows the SacreBLEU 2.x conventions (``smooth:exp``,
``tok:13a``, ``case:mixed``).
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, NamedTuple, Sequence, Tuple

from .errors import EmptyCorpus, ZeroHypothesisLength
from .tokenizer import tokenize_scoring

NGRAM_ORDER = 4
SMOOTHING_METHODS = ("none", "exp")


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: Tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    correct: Tuple[int, ...] = ()
    total: Tuple[int, ...] = ()
    effective_order: int = NGRAM_ORDER

    def format(self, width: int = 1) -> str:
        """Table form, score followed by the brevity penalty: ``45.1 (0.97)``."""
        return format_score_bp(self.score, self.brevity_penalty, width)

    def as_dict(self) -> dict:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
            "correct": list(self.correct),
            "total": list(self.total),
            "effective_order": self.effective_order,
        }


def format_score_bp(score: float, bp: float, width: int = 1) -> str:
    return f"{score:.{width}f} ({bp:.2f})"


def brevity_penalty(hyp_len: int, ref_len: int) -> float:
    """1 when the hypothesis is at least as long as the reference, else
    ``exp(1 - ref_len / hyp_len)``.

    :raises ZeroHypothesisLength: ``hyp_len`` is not positive
    """
    if hyp_len <= 0:
        raise ZeroHypothesisLength("brevity penalty is undefined for an empty hypothesis")
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def extract_ngrams(tokens: Sequence[str], max_order: int = NGRAM_ORDER) -> Counter:
    ngrams = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            ngrams[tuple(tokens[i:i + n])] += 1
    return ngrams


def ngram_stats(hyp: Sequence[str], ref: Sequence[str], max_order: int = NGRAM_ORDER):
    """Clipped match counts and hypothesis n-gram totals for one pair."""
    hyp_ngrams = extract_ngrams(hyp, max_order)
    ref_ngrams = extract_ngrams(ref, max_order)
    correct = [0] * max_order
    total = [0] * max_order
    for ngram, count in hyp_ngrams.items():
        n = len(ngram) - 1
        total[n] += count
        correct[n] += min(count, ref_ngrams.get(ngram, 0))
    return correct, total


def _my_log(x: float) -> float:
    return -9999999999.0 if x == 0.0 else math.log(x)


def score_from_stats(correct: Sequence[int], total: Sequence[int], hyp_len: int, ref_len: int,
                     smoothing: str = "exp", effective_order: bool = False) -> BleuScore:
    """Turn sufficient statistics into a :class:`BleuScore`.

    With ``exp`` smoothing, an order with no match gets precision
    ``1 / (2**k * total)`` where ``k`` counts the zero-match orders seen so far,
    this one included. With ``effective_order`` the geometric mean stops at the
    highest order that has any hypothesis n-gram.
    """
    if smoothing not in SMOOTHING_METHODS:
        raise ValueError(f"unknown smoothing {smoothing!r}")
    order = len(correct)
    precisions = [0.0] * order
    bp = brevity_penalty(hyp_len, ref_len) if hyp_len > 0 else 0.0

    def result(score, eff):
        return BleuScore(score, tuple(precisions), bp, hyp_len, ref_len,
                         tuple(correct), tuple(total), eff)

    if hyp_len == 0 or correct[0] == 0:
        return result(0.0, order)

    smooth_mteval = 1.0
    eff_order = order
    for n in range(1, order + 1):
        if total[n - 1] == 0:
            break
        if effective_order:
            eff_order = n
        if correct[n - 1] == 0:
            if smoothing == "exp":
                smooth_mteval *= 2
                precisions[n - 1] = 1.0 / (smooth_mteval * total[n - 1])
        else:
            precisions[n - 1] = correct[n - 1] / total[n - 1]

    log_mean = sum(_my_log(p) for p in precisions[:eff_order]) / eff_order
    return result(100.0 * bp * math.exp(log_mean), eff_order)


def corpus_bleu(pairs: Iterable[Tuple[Sequence[str], Sequence[str]]], smoothing: str = "exp",
                effective_order: bool = False) -> BleuScore:
    """Micro-aggregated BLEU over tokenized (hypothesis, reference) pairs.

    :raises EmptyCorpus: no pairs were given
    """
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = ref_len = 0
    seen = False
    for hyp, ref in pairs:
        seen = True
        c, t = ngram_stats(hyp, ref)
        for n in range(NGRAM_ORDER):
            correct[n] += c[n]
            total[n] += t[n]
        hyp_len += len(hyp)
        ref_len += len(ref)
    if not seen:
        raise EmptyCorpus("corpus_bleu needs at least one segment pair")
    return score_from_stats(correct, total, hyp_len, ref_len, smoothing, effective_order)


def sentence_bleu(hyp: Sequence[str], ref: Sequence[str], smoothing: str = "exp",
                  effective_order: bool = True) -> BleuScore:
    return corpus_bleu([(hyp, ref)], smoothing, effective_order)


@dataclass
class ScoredDocument:
    doc_id: str
    hyp: List[str]
    ref: List[str]


@dataclass
class ScoredCorpus:
    """Hypothesis and reference segments grouped by document.

    With ``granularity == "sentence"`` every document must have as many
    hypothesis segments as reference segments.
    """

    documents: List[ScoredDocument] = field(default_factory=list)
    granularity: str = "sentence"

    def __post_init__(self):
        if self.granularity not in ("sentence", "document"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.granularity == "sentence":
            for doc in self.documents:
                if len(doc.hyp) != len(doc.ref):
                    raise ValueError(
                        f"document {doc.doc_id!r}: {len(doc.hyp)} hypothesis segments "
                        f"vs {len(doc.ref)} reference segments")

    @classmethod
    def from_records(cls, records, granularity="sentence") -> "ScoredCorpus":
        docs = [ScoredDocument(str(r["doc_id"]), list(r["hyp"]), list(r["ref"])) for r in records]
        return cls(docs, granularity)

    def __len__(self):
        return len(self.documents)


Tokenize = Callable[[str], List[str]]


def _concat_tokens(segments: Sequence[str], tokenize: Tokenize) -> List[str]:
    tokens = []
    for seg in segments:
        tokens.extend(tokenize(seg))
    return tokens


def bleu(corpus: ScoredCorpus, tokenize: Tokenize = tokenize_scoring) -> BleuScore:
    """Sentence-aligned corpus BLEU (``eff:no``, ``smooth:exp``)."""
    if not corpus.documents:
        raise EmptyCorpus("empty corpus")
    if corpus.granularity != "sentence":
        raise ValueError("sentence BLEU requires a sentence-aligned corpus")
    pairs = [(tokenize(h), tokenize(r)) for doc in corpus.documents for h, r in zip(doc.hyp, doc.ref)]
    return corpus_bleu(pairs, "exp", False)


def d_bleu(corpus: ScoredCorpus, tokenize: Tokenize = tokenize_scoring) -> BleuScore:
    """Corpus BLEU with each document concatenated into one segment."""
    if not corpus.documents:
        raise EmptyCorpus("empty corpus")
    pairs = [(_concat_tokens(doc.hyp, tokenize), _concat_tokens(doc.ref, tokenize))
             for doc in corpus.documents]
    return corpus_bleu(pairs, "exp", False)


class DsBleu(NamedTuple):
    score: float
    per_document: List[BleuScore]
    doc_ids: List[str]
    weighting: str = "unweighted"


def ds_bleu(corpus: ScoredCorpus, tokenize: Tokenize = tokenize_scoring) -> DsBleu:
    """Macro-averaged document BLEU.

    Each document is scored as a single segment with exponential smoothing and
    effective order; the corpus score is the plain mean over documents, so a
    short talk weighs as much as a long one. An empty hypothesis scores 0.
    """
    if not corpus.documents:
        raise EmptyCorpus("empty corpus")
    per_doc = []
    for doc in corpus.documents:
        hyp = _concat_tokens(doc.hyp, tokenize)
        ref = _concat_tokens(doc.ref, tokenize)
        per_doc.append(corpus_bleu([(hyp, ref)], "exp", True))
    mean = math.fsum(s.score for s in per_doc) / len(per_doc)
    return DsBleu(mean, per_doc, [doc.doc_id for doc in corpus.documents])
