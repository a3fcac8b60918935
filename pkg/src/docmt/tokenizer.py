"""Scoring tokenization (mteval-v13a rules) and sentence length accounting.

The 13a rules are the ones used by WMT scorers: isolate punctuation and
symbols, split periods and commas unless they sit next to a digit, and split
a dash that follows a digit. Case is preserved and no unicode normalization
is applied, so scores are bit-reproducible on the raw input.
"""

import csv
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .errors import FormatError, MissingExternalCount

_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]

SCHEMES = ("scoring-tokens", "whitespace", "external")


def tokenize_13a_line(line: str) -> str:
    """Return the 13a-tokenized form of ``line`` as a space-joined string."""
    if "<skipped>" in line:
        line = line.replace("<skipped>", "")
    if "-\n" in line:
        line = line.replace("-\n", "")
    if "\n" in line:
        line = line.replace("\n", " ")
    if "&" in line:
        line = line.replace("&quot;", '"')
        line = line.replace("&amp;", "&")
        line = line.replace("&lt;", "<")
        line = line.replace("&gt;", ">")
    line = f" {line} "
    for regex, repl in _RULES:
        line = regex.sub(repl, line)
    return " ".join(line.split())


def tokenize_scoring(text: str) -> List[str]:
    """Split ``text`` into 13a scoring tokens.

    >>> tokenize_scoring("Hello, world!")
    ['Hello', ',', 'world', '!']
    """
    return tokenize_13a_line(text).split()


def tokenize_whitespace(text: str) -> List[str]:
    return text.split()


def detokenize(tokens: List[str]) -> str:
    return " ".join(tokens)


def tokenize_with_spans(text: str) -> List[Tuple[str, int, int]]:
    """Tokenize ``text`` and attach a character span to every token.

    Each whitespace-delimited word is tokenized on its own, then each token is
    located inside the word. Tokens rewritten by entity decoding (``&quot;``
    and friends) cannot be found verbatim; they get the span from the cursor
    to the end of the word.
    """
    out = []
    for match in re.finditer(r"\S+", text):
        word = match.group()
        base = match.start()
        cursor = 0
        for tok in tokenize_scoring(word):
            pos = word.find(tok, cursor)
            if pos < 0:
                out.append((tok, base + cursor, match.end()))
                continue
            out.append((tok, base + pos, base + pos + len(tok)))
            cursor = pos + len(tok)
    return out


@dataclass(frozen=True)
class LengthScheme:
    """How sentence lengths are counted when packing documents.

    ``external_counts`` maps a sentence id to a precomputed count, e.g. the
    number of subword tokens produced by the translation model's tokenizer.
    """

    variant: str = "scoring-tokens"
    external_counts: Optional[Mapping[str, int]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in SCHEMES:
            raise ValueError(f"unknown length scheme {self.variant!r}; expected one of {SCHEMES}")
        if self.variant == "external" and self.external_counts is None:
            raise ValueError("external length scheme requires external_counts")

    @classmethod
    def from_flag(cls, flag: str) -> "LengthScheme":
        """Parse the command-line form: ``13a``, ``ws`` or ``external:FILE``."""
        if flag in ("13a", "scoring-tokens"):
            return cls("scoring-tokens")
        if flag in ("ws", "whitespace"):
            return cls("whitespace")
        if flag.startswith("external:"):
            return cls("external", read_external_counts(flag[len("external:"):]))
        raise ValueError(f"unknown --scheme value {flag!r}")

    @property
    def label(self) -> str:
        return {"scoring-tokens": "13a", "whitespace": "ws", "external": "external"}[self.variant]


def sentence_length(sentence: str, scheme: LengthScheme, sentence_id: Optional[str] = None) -> int:
    """Count the tokens of ``sentence`` under ``scheme``.

    :param sentence_id: required for the external scheme, which looks the
        count up instead of tokenizing
    :raises MissingExternalCount: the external table has no entry for the id
    """
    if scheme.variant == "scoring-tokens":
        return len(tokenize_scoring(sentence))
    if scheme.variant == "whitespace":
        return len(sentence.split())
    try:
        return scheme.external_counts[sentence_id]
    except KeyError:
        raise MissingExternalCount(f"no external token count for sentence {sentence_id!r}") from None


def read_external_counts(path) -> Dict[str, int]:
    """Read a ``sentence_id<TAB>count`` file. A header line is tolerated."""
    counts = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"expected 2 columns, got {len(row)}", path, lineno)
            sid, raw = row
            try:
                count = int(raw)
            except ValueError:
                if lineno == 1:
                    continue
                raise FormatError(f"count {raw!r} is not an integer", path, lineno) from None
            if count < 0:
                raise FormatError("negative token count", path, lineno)
            counts[sid] = count
    return counts
