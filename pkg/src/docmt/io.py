"""Corpus readers and atomic output writing."""

import json
import os
import re
import tempfile
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

from .errors import BoundaryError, FormatError

MARKER_RE = re.compile(r"^# doc (\S.*?)\s*$")

Documents = List[Tuple[str, List[str]]]


def read_jsonl(path) -> Iterator[Tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(rec, dict):
                raise FormatError("expected a JSON object", path, lineno)
            yield lineno, rec


def require(rec: dict, key: str, path, lineno: int):
    if key not in rec:
        raise FormatError(f"missing field {key!r}", path, lineno)
    return rec[key]


def read_documents(path, boundary: str = "marker") -> Documents:
    """Read one-sentence-per-line text split into documents.

    ``marker`` mode expects a ``# doc <id>`` line before each document;
    ``blank`` mode separates documents with empty lines and numbers them.
    """
    docs: Documents = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if boundary == "marker":
        for lineno, line in enumerate(lines, start=1):
            m = MARKER_RE.match(line)
            if m:
                docs.append((m.group(1), []))
            elif not docs:
                if not line.strip():
                    continue
                raise BoundaryError("sentence before the first '# doc <id>' marker", path, lineno)
            else:
                docs[-1][1].append(line)
        ids = [d for d, _ in docs]
        if len(set(ids)) != len(ids):
            dup = next(d for d in ids if ids.count(d) > 1)
            raise FormatError(f"duplicate document id {dup!r}", path)
    elif boundary == "blank":
        current: List[str] = []
        for line in lines + [""]:
            if line.strip():
                current.append(line)
            elif current:
                docs.append((f"doc{len(docs):05d}", current))
                current = []
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return docs


def read_parallel(src_path, tgt_path, boundary: str = "marker") -> List[Tuple[str, List[str], List[str]]]:
    src = read_documents(src_path, boundary)
    tgt = read_documents(tgt_path, boundary)
    if [d for d, _ in src] != [d for d, _ in tgt]:
        raise FormatError("source and target files list different documents", tgt_path)
    out = []
    for (doc_id, s), (_, t) in zip(src, tgt):
        if len(s) != len(t):
            raise FormatError(f"document {doc_id!r} has {len(s)} source but {len(t)} target sentences",
                              tgt_path)
        out.append((doc_id, s, t))
    return out


def read_parallel_jsonl(path) -> List[Tuple[str, List[str], List[str]]]:
    out = []
    for lineno, rec in read_jsonl(path):
        src = require(rec, "src", path, lineno)
        tgt = require(rec, "tgt", path, lineno)
        if len(src) != len(tgt):
            raise FormatError("src and tgt differ in length", path, lineno)
        out.append((str(require(rec, "doc_id", path, lineno)), list(src), list(tgt)))
    return out


def read_segments(path, field: str) -> Documents:
    """Documents from JSONL (``doc_id`` plus a string or list under ``field``)
    or from marker-delimited text."""
    if str(path).endswith(".jsonl"):
        docs: Dict[str, List[str]] = {}
        for lineno, rec in read_jsonl(path):
            doc_id = str(require(rec, "doc_id", path, lineno))
            value = require(rec, field, path, lineno)
            segs = [value] if isinstance(value, str) else list(value)
            # several records per document (e.g. translated fragments) are concatenated
            docs.setdefault(doc_id, []).extend(segs)
        return list(docs.items())
    return read_documents(path, "marker")


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir, files: Dict[str, str]):
    """Write every file of a command through temp files, renaming them into
    place only once all of them were written.

    Callers render all content before calling this, so a failing command
    leaves nothing behind.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def dumps_jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)
