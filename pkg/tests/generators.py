"""Seeded synthetic fixtures shared by several test modules."""

import numpy as np

VOCAB = [f"w{i}" for i in range(60)]


def random_sentence(rng, lo=4, hi=15):
    n = int(rng.integers(lo, hi))
    # Zipf-like word frequencies so n-gram matches are neither rare nor certain
    weights = 1.0 / np.arange(1, len(VOCAB) + 1)
    idx = rng.choice(len(VOCAB), size=n, p=weights / weights.sum())
    return [VOCAB[i] for i in idx]


def perturb(rng, tokens, p_sub=0.15, p_del=0.05, p_ins=0.05):
    out = []
    for tok in tokens:
        r = rng.random()
        if r < p_del:
            continue
        if r < p_del + p_sub:
            out.append(VOCAB[int(rng.integers(len(VOCAB)))])
        else:
            out.append(tok)
        if rng.random() < p_ins:
            out.append(VOCAB[int(rng.integers(len(VOCAB)))])
    return out


def perturbed_corpus(seed, n_docs=None, sentences=(2, 8)):
    """Records ``{doc_id, hyp, ref}`` of space-joined sentences, sentence-aligned.

    :param sentences: half-open range for the number of sentences per document
    """
    rng = np.random.default_rng(seed)
    n_docs = n_docs or int(rng.integers(2, 6))
    records = []
    for d in range(n_docs):
        refs = [random_sentence(rng) for _ in range(int(rng.integers(*sentences)))]
        hyps = [perturb(rng, r) for r in refs]
        records.append({"doc_id": f"d{d}", "hyp": [" ".join(h) for h in hyps],
                        "ref": [" ".join(r) for r in refs]})
    return records


def document_sized_corpus(seed):
    """Perturbed corpus with 20-60 sentences per document, the size at which
    document-level matching outweighs the unmatched boundary n-grams."""
    return perturbed_corpus(seed, sentences=(20, 60))


GOLDEN_UNITS = ["u1", "u2", "u3", "u4"]


def golden_tables():
    """Hand-built score tables whose rendered comparisons are stored under data/golden_*.tsv.

    Differences per cell: [1,2,3,4] (p=0.0305, weak tier), [5,5.1,4.9,5]
    (p<0.01), [1,-1,2,-2] (p=1) and [-1,-2,-3,-4].
    """
    from docmt.stats import ScoreTable

    rows = {
        "S1:sent": [11, 12, 13, 14], "S1:256": [10, 10, 10, 10], "S1:512": [9, 11, 8, 12],
        "S2:sent": [20, 20, 20, 20], "S2:256": [15, 14.9, 15.1, 15], "S2:512": [16, 16.9, 18.1, 19],
    }
    adjacent = ScoreTable(metric="ds-BLEU")
    for cfg, scores in rows.items():
        for u, s in zip(GOLDEN_UNITS, scores):
            adjacent.add(cfg, u, s)

    def systems_table(ft_256):
        t = ScoreTable()
        for cfg, scores in {"FT:sent": [20, 20, 20, 20], "Unif:sent": [15, 14.9, 15.1, 15],
                            "FT:256": ft_256, "Unif:256": [10, 10, 10, 10]}.items():
            for u, s in zip(GOLDEN_UNITS, scores):
                t.add(cfg, u, s)
        return t

    return adjacent, systems_table([11, 12, 13, 14]), systems_table([11, 9, 12, 8])
