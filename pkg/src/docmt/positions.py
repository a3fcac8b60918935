"""Position-offset samplers and exact position coverage profiles.

A training sequence of length ``l`` placed at offset ``k`` occupies position
indices ``k+1 .. k+l`` (1-based) of a model with maximum length ``M``.

* baseline: ``k = 0`` always, so small indices are over-trained and indices
  beyond the longest sequence are never seen.
* SHAPE: ``k`` uniform over ``0 .. M-l``.
* unifPE: with ``m = M // l`` and ``r = M - m*l``, draw a gap index ``g``
  uniformly from ``1 .. m``, then ``k`` uniformly from
  ``{j*l + (r if j >= g else 0) : j = 0 .. m-1}``. When ``M < 2l`` there is no
  room for a second block and ``k = 0``.

Note on the gap index: the pseudo-code formulation of unifPE draws a pivot in
``[0, m)`` over raw offsets and can emit more than ``m`` admissible offsets;
here the gap index ranges over ``1 .. m`` with ``g = m`` meaning "no gap",
which always gives a normalized distribution. Coverage is not exactly flat
(e.g. ``l=200, M=512``); it is flatter than the baseline.
"""

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidLength, LengthExceedsModelMax

SAMPLERS = ("baseline", "shape", "unifpe")


@dataclass(frozen=True)
class OffsetDistribution:
    """Probability mass over starting offsets for a length-``l`` sequence."""

    offsets: tuple
    probs: tuple
    length: int
    max_len: int

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.offsets, self.probs))

    def __post_init__(self):
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("offset probabilities do not sum to 1")
        if any(k < 0 or k + self.length > self.max_len for k in self.offsets):
            raise ValueError("offset places the sequence outside [1, M]")


def _check(l: int, M: int):
    if l < 1:
        raise InvalidLength(f"sequence length must be positive, got {l}")
    if l > M:
        raise InvalidLength(f"sequence length {l} exceeds model maximum {M}")


def _from_exact(mass: Dict[int, Fraction], l: int, M: int) -> OffsetDistribution:
    offsets = tuple(sorted(mass))
    return OffsetDistribution(offsets, tuple(float(mass[k]) for k in offsets), l, M)


def unifpe_exact(l: int, M: int) -> Dict[int, Fraction]:
    """Exact unifPE offset marginal as fractions."""
    _check(l, M)
    if M < 2 * l:
        return {0: Fraction(1)}
    m, r = divmod(M, l)
    mass: Dict[int, Fraction] = Counter()
    unit = Fraction(1, m * m)
    for j in range(m):
        # j*l is used by gap indices g > j (m - j of them), j*l + r by g <= j
        mass[j * l] += (m - j) * unit
        if j:
            mass[j * l + r] += j * unit
    return dict(mass)


def unifpe_offset_distribution(l: int, M: int) -> OffsetDistribution:
    """Marginal offset distribution of unifPE for one sequence length.

    :raises InvalidLength: ``l < 1`` or ``l > M``
    """
    return _from_exact(unifpe_exact(l, M), l, M)


def shape_offset_distribution(l: int, M: int, max_offset: Optional[int] = None) -> OffsetDistribution:
    """Uniform offsets over ``0 .. M-l``.

    :param max_offset: cap the interval at a constant ``K`` independent of the
        length; the cap is clipped to ``M - l`` so sequences stay inside the model
    """
    _check(l, M)
    hi = M - l if max_offset is None else min(max_offset, M - l)
    if hi < 0:
        raise InvalidLength("max_offset must be non-negative")
    p = Fraction(1, hi + 1)
    return _from_exact({k: p for k in range(hi + 1)}, l, M)


def baseline_offset_distribution(l: int, M: int) -> OffsetDistribution:
    _check(l, M)
    return OffsetDistribution((0,), (1.0,), l, M)


def offset_distribution(sampler: str, l: int, M: int, **kwargs) -> OffsetDistribution:
    if sampler == "baseline":
        return baseline_offset_distribution(l, M)
    if sampler == "shape":
        return shape_offset_distribution(l, M, **kwargs)
    if sampler == "unifpe":
        return unifpe_offset_distribution(l, M)
    raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")


def sample_offset(dist: OffsetDistribution, rng: np.random.Generator, size=None):
    """Draw one offset (or an array of ``size`` offsets) from ``dist``."""
    out = rng.choice(np.asarray(dist.offsets), size=size, p=np.asarray(dist.probs))
    return int(out) if size is None else out


def draw_unifpe_offset(l: int, M: int, rng: np.random.Generator) -> int:
    """Generative unifPE draw: pick a gap index, shift the blocks after it,
    then pick a block. Independent of the closed-form marginal."""
    _check(l, M)
    if M < 2 * l:
        return 0
    m, r = divmod(M, l)
    g = int(rng.integers(1, m + 1))
    j = int(rng.integers(0, m))
    return j * l + (r if j >= g else 0)


class OffsetSampler:
    """Per-example offset sampler holding its own generator.

    Not meant to be shared between threads.
    """

    def __init__(self, sampler: str, M: int, seed: int = 0, max_offset: Optional[int] = None):
        if sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {sampler!r}")
        self.sampler = sampler
        self.M = M
        self.max_offset = max_offset
        self.rng = np.random.default_rng(seed)
        self._cache: Dict[int, OffsetDistribution] = {}

    def __call__(self, length: int) -> int:
        dist = self._cache.get(length)
        if dist is None:
            kwargs = {"max_offset": self.max_offset} if self.sampler == "shape" else {}
            dist = self._cache[length] = offset_distribution(self.sampler, length, self.M, **kwargs)
        return sample_offset(dist, self.rng)

    def positions(self, length: int) -> np.ndarray:
        """1-based position indices for one example."""
        k = self(length)
        return np.arange(k + 1, k + length + 1)


def coverage_profile(corpus_lengths: Sequence[int], sampler: str, M: int,
                     max_offset: Optional[int] = None) -> np.ndarray:
    """Probability that position ``i`` is occupied in a random training example.

    Returned array ``p`` has length ``M`` with ``p[i-1] = P(i)``. Computed in
    closed form from each length's offset marginal, so ``p.sum()`` equals the
    mean corpus length.

    :raises LengthExceedsModelMax: some length is larger than ``M``
    """
    if not corpus_lengths:
        raise ValueError("empty corpus")
    bad = [l for l in corpus_lengths if l > M]
    if bad:
        raise LengthExceedsModelMax(f"length {max(bad)} exceeds model maximum {M}")
    # difference array over 1-based positions: +p at k+1, -p at k+l+1
    diff = np.zeros(M + 2)
    n = len(corpus_lengths)
    for l, count in sorted(Counter(corpus_lengths).items()):
        if l == 0:
            continue
        kwargs = {"max_offset": max_offset} if sampler == "shape" else {}
        dist = offset_distribution(sampler, l, M, **kwargs)
        weight = count / n
        ks = np.asarray(dist.offsets)
        ps = np.asarray(dist.probs) * weight
        np.add.at(diff, ks + 1, ps)
        np.add.at(diff, ks + l + 1, -ps)
    profile = np.cumsum(diff)[1:M + 1]
    return np.clip(profile, 0.0, 1.0)


def empirical_profile(corpus_lengths: Sequence[int], sampler: str, M: int, draws: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo estimate of the coverage profile from ``draws`` examples.

    Each draw picks a corpus entry uniformly, then an offset for it.
    """
    lengths = np.asarray(corpus_lengths)
    picks = lengths[rng.integers(0, len(lengths), size=draws)]
    diff = np.zeros(M + 2)
    for l in np.unique(picks):
        l = int(l)
        n_l = int(np.sum(picks == l))
        if sampler == "unifpe":
            ks = np.array([draw_unifpe_offset(l, M, rng) for _ in range(n_l)])
        else:
            ks = sample_offset(offset_distribution(sampler, l, M), rng, size=n_l)
        np.add.at(diff, ks + 1, 1.0)
        np.add.at(diff, ks + l + 1, -1.0)
    return np.cumsum(diff)[1:M + 1] / draws


def flatness(profile: Sequence[float], lo: int = 1, hi: Optional[int] = None) -> float:
    """Coefficient of variation of ``P(i)`` over positions ``lo .. hi`` (1-based,
    inclusive). 0 means perfectly flat."""
    p = np.asarray(profile, dtype=float)
    hi = len(p) if hi is None else hi
    window = p[lo - 1:hi]
    mean = window.mean()
    if mean == 0 or np.all(window == window[0]):
        return 0.0
    return float(window.std() / mean)


def profiles_csv(corpus_lengths: Sequence[int], M: int, samplers: Iterable[str] = SAMPLERS) -> str:
    """CSV with one row per position: ``index,baseline,shape,unifpe``."""
    samplers = list(samplers)
    cols = [coverage_profile(corpus_lengths, s, M) for s in samplers]
    lines = [",".join(["index"] + samplers)]
    for i in range(M):
        lines.append(",".join([str(i + 1)] + [repr(float(c[i])) for c in cols]))
    return "\n".join(lines) + "\n"
