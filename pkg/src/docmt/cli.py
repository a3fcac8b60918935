"""Command-line interface.

Every command reads its inputs, renders all outputs in memory and only then
writes them (each through a temp file), so a failure leaves no partial
output. Outputs depend only on inputs, flags and ``--seed``.
"""

import argparse
import csv
import json
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .databuild import (build_fixed_length_testset, build_gaussian_corpus, build_uniform_corpus,
                        check_reconstruction, corpus_stats, document_stats, gaussian_params_for,
                        make_document, sentence_level_testset, stats_table_long, stats_table_wide,
                        whole_document_testset)
from .errors import DocMTError, FormatError
from .io import (dumps, dumps_jsonl, read_documents, read_jsonl, read_parallel, read_parallel_jsonl,
                 read_segments, require, write_outputs)
from .metrics import ScoredCorpus, ScoredDocument, bleu, brevity_penalty, d_bleu, ds_bleu, format_score_bp
from .positions import SAMPLERS, coverage_profile, flatness, profiles_csv
from .realign import attach_scores, empty_alignment_table, realign_document
from .repetition import repetition_rate, repetition_table
from .stats import (ScoreTable, compare_adjacent_windows, compare_systems, config_id,
                    mark_disagreements, position_bias_analysis, position_bias_grid,
                    read_position_buckets)
from .tokenizer import LengthScheme


DEFAULT_LADDER = "256,512,768,1024,1200,1600,2048"


def parse_ladder(text: str) -> List[str]:
    return [w.strip() for w in text.split(",") if w.strip()]


def parse_hyp_spec(spec: str) -> Tuple[str, str, str]:
    """``SYSTEM:WINDOW:PATH`` or a bare ``PATH``."""
    parts = spec.split(":", 2)
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    return "system", "-", spec


def _metadata(args, **extra) -> str:
    meta = {"version": __version__, "command": args.command, "seed": getattr(args, "seed", None)}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config", "command", "out"):
            continue
        meta.setdefault("args", {})[key] = value
    meta.update(extra)
    return dumps(meta)


# ---------------------------------------------------------------- build

def cmd_build(args) -> Dict[str, str]:
    scheme = LengthScheme.from_flag(args.scheme)
    if args.jsonl:
        raw = read_parallel_jsonl(args.jsonl)
    elif args.src and args.tgt:
        raw = read_parallel(args.src, args.tgt, args.boundary)
    else:
        raise FormatError("build needs --src and --tgt, or --jsonl")
    docs = [make_document(doc_id, src, tgt, scheme) for doc_id, src, tgt in raw]
    if not docs:
        raise FormatError("input corpus contains no documents")
    by_id = {d.doc_id: d for d in docs}
    kinds = parse_ladder(args.kind)
    files: Dict[str, str] = {}
    stats = {f"{args.split}/full": document_stats(docs)}
    extra = {"length_scheme": scheme.label}

    def emit(name, corpus):
        if not check_reconstruction(docs, corpus):
            raise AssertionError(f"{name}: fragments do not reconstruct the documents")
        files[f"{name}.jsonl"] = dumps_jsonl(p.as_record(by_id[p.doc_id]) for p in corpus)
        stats[f"{args.split}/{name}"] = corpus_stats(corpus)

    for kind in kinds:
        if kind == "gaussian":
            params = gaussian_params_for(docs, args.l_max)
            extra["gaussian"] = {"mean": params.mean, "std": params.std,
                                 "rule": "fit Normal to full-document lengths, scale by "
                                         "l_max / max(doc_length), truncate to "
                                         "[min sentence length, l_max)"}
            emit("gaussian", build_gaussian_corpus(docs, args.l_max, params, args.seed))
        elif kind == "uniform":
            extra["uniform"] = {"low": 128, "high": args.l_max}
            emit("uniform", build_uniform_corpus(docs, args.l_max, args.seed))
        elif kind == "test":
            ladder = parse_ladder(args.ladder)
            test_stats = {}
            for w in ["sent"] + ladder + ["doc"]:
                if w == "sent":
                    corpus = sentence_level_testset(docs)
                elif w == "doc":
                    corpus = whole_document_testset(docs)
                else:
                    corpus = build_fixed_length_testset(docs, int(w))
                emit(f"testset.{w}", corpus)
                test_stats[w] = corpus_stats(corpus)
            files["testset_table.tsv"] = stats_table_wide(test_stats)
        else:
            raise FormatError(f"unknown corpus kind {kind!r}")
    files["stats.tsv"] = stats_table_long(stats)
    extra["stats"] = {k: {side: vars(s) for side, s in v.items()} for k, v in stats.items()}
    files["metadata.json"] = _metadata(args, **extra)
    return files


# ---------------------------------------------------------------- score / realign helpers

def _load_refs(path, field: str = "ref") -> Dict[str, List[str]]:
    return dict(read_segments(path, field))


def _load_hyps(path, field: str, refs: Optional[Dict[str, List[str]]]):
    """Return ``doc_id -> (hyp segments, ref segments)`` sorted by doc id."""
    hyps: Dict[str, List[str]] = {}
    inline_refs: Dict[str, List[str]] = {}
    if str(path).endswith(".jsonl"):
        for lineno, rec in read_jsonl(path):
            doc_id = str(require(rec, "doc_id", path, lineno))
            value = require(rec, field, path, lineno)
            hyps.setdefault(doc_id, []).extend([value] if isinstance(value, str) else value)
            if "ref" in rec:
                inline_refs.setdefault(doc_id, []).extend(rec["ref"])
    else:
        hyps = dict(read_documents(path))
    out = {}
    for doc_id in sorted(hyps):
        ref = inline_refs.get(doc_id) or (refs or {}).get(doc_id)
        if ref is None:
            raise FormatError(f"no reference for document {doc_id!r}", path)
        out[doc_id] = (hyps[doc_id], ref)
    if refs is not None and set(refs) - set(out):
        missing = sorted(set(refs) - set(out))
        raise FormatError(f"hypothesis file lacks documents {missing[:3]}", path)
    return out


def _realign_one(item):
    doc_id, hyp_segments, ref_segments = item
    segments, _, result = realign_document(doc_id, " ".join(hyp_segments), ref_segments)
    return doc_id, segments, result


def _map(func, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [func(i) for i in items]


# ---------------------------------------------------------------- score

def cmd_score(args) -> Dict[str, str]:
    refs = _load_refs(args.refs, args.ref_field) if args.refs else None
    metrics = args.metric or ["bleu", "dbleu", "dsbleu"]
    rows = []
    report = []
    units = ScoreTable(metric="ds-BLEU")
    dsbleu_cells: Dict[Tuple[str, str], str] = {}
    for spec in args.hyp:
        system, window, path = parse_hyp_spec(spec)
        docs = _load_hyps(path, args.hyp_field, refs)
        entry = {"system": system, "window": window, "path": path, "documents": len(docs)}
        doc_corpus = ScoredCorpus([ScoredDocument(d, h, r) for d, (h, r) in docs.items()], "document")
        if "bleu" in metrics:
            aligned = [d for d, (h, r) in docs.items() if len(h) != len(r)]
            items = [(d, docs[d][0], docs[d][1]) for d in aligned]
            realigned = {d: [s.hyp_text for s in segs] for d, segs, _ in _map(_realign_one, items, args.jobs)}
            sent_corpus = ScoredCorpus([ScoredDocument(d, realigned.get(d, h), r)
                                        for d, (h, r) in docs.items()], "sentence")
            res = bleu(sent_corpus)
            entry["bleu"] = res.as_dict()
            entry["bleu_realigned_documents"] = len(aligned)
            rows.append((system, window, "bleu", res.score, res.brevity_penalty))
        if "dbleu" in metrics:
            res = d_bleu(doc_corpus)
            entry["dbleu"] = res.as_dict()
            rows.append((system, window, "dbleu", res.score, res.brevity_penalty))
        if "dsbleu" in metrics:
            res = ds_bleu(doc_corpus)
            hyp_len = sum(s.hyp_len for s in res.per_document)
            ref_len = sum(s.ref_len for s in res.per_document)
            bp = brevity_penalty(hyp_len, ref_len) if hyp_len > 0 else 0.0
            entry["dsbleu"] = {"score": res.score, "brevity_penalty": bp, "weighting": res.weighting,
                               "per_document": {d: s.as_dict() for d, s in zip(res.doc_ids, res.per_document)}}
            rows.append((system, window, "dsbleu", res.score, bp))
            dsbleu_cells[(system, window)] = format_score_bp(res.score, bp)
            for d, s in zip(res.doc_ids, res.per_document):
                units.add(config_id(system, window), d, s.score)
        report.append(entry)

    lines = ["system\twindow\tmetric\tscore\tbp\tcell"]
    lines += [f"{s}\t{w}\t{m}\t{sc!r}\t{bp!r}\t{format_score_bp(sc, bp)}" for s, w, m, sc, bp in rows]
    files = {"scores.tsv": "\n".join(lines) + "\n",
             "scores.json": dumps(report),
             "metadata.json": _metadata(args, dsbleu_macro_average="unweighted mean over documents",
                                        dsbleu_bp="corpus-level, from summed document lengths")}
    if dsbleu_cells:
        files["units.tsv"] = units.to_tsv()
        systems = list(dict.fromkeys(s for s, _ in dsbleu_cells))
        windows = list(dict.fromkeys(w for _, w in dsbleu_cells))
        grid = ["\t".join([""] + systems)]
        for w in windows:
            grid.append("\t".join([w] + [dsbleu_cells.get((s, w), "") for s in systems]))
        files["dsbleu_table.tsv"] = "\n".join(grid) + "\n"
    return files


# ---------------------------------------------------------------- realign

def _read_sentence_scores(path) -> Dict[Tuple[str, str, int], float]:
    """``config_id, doc_id, ref_index, score`` rows."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"expected 4 columns, got {len(row)}", path, lineno)
            try:
                out[(row[0], row[1], int(row[2]))] = float(row[3])
            except ValueError:
                if lineno == 1:
                    continue
                raise FormatError("ref_index must be an integer and score a number", path, lineno) from None
    return out


def cmd_realign(args) -> Dict[str, str]:
    refs = _load_refs(args.refs, args.ref_field)
    ext = _read_sentence_scores(args.scores) if args.scores else None
    files: Dict[str, str] = {}
    empties: Dict[Tuple[str, str], int] = {}
    sentence_units = ScoreTable(metric=f"{args.scale:g}x external")
    doc_units = ScoreTable(metric=f"{args.scale:g}x external (document mean)")
    summary = []
    for spec in args.hyp:
        system, window, path = parse_hyp_spec(spec)
        docs = _load_hyps(path, args.hyp_field, refs)
        items = [(d, h, r) for d, (h, r) in docs.items()]
        out = _map(_realign_one, items, args.jobs)
        records = [seg.as_record() for _, segs, _ in out for seg in segs]
        files[f"realigned.{system}.{window}.jsonl"] = dumps_jsonl(records)
        empties[(system, window)] = sum(r.empty_count for _, _, r in out)
        entry = {"system": system, "window": window, "empty_alignments": empties[(system, window)],
                 "sentences": len(records)}
        if ext is not None:
            cid = config_id(system, window)
            results = {d: r for d, _, r in out}
            agg = attach_scores(results, {(d, j): v for (c, d, j), v in ext.items() if c == cid})
            entry.update(corpus_mean=agg.corpus_mean, sentence_mean=agg.sentence_mean)
            for d, segs, _ in out:
                for s in segs:
                    sentence_units.add(cid, f"{d}:{s.ref_index}", ext[(cid, d, s.ref_index)] * args.scale)
                doc_units.add(cid, d, agg.per_document[d] * args.scale)
        summary.append(entry)
    files["empty_alignments.tsv"] = empty_alignment_table(empties)
    files["summary.json"] = dumps(summary)
    if ext is not None:
        files["sentence_units.tsv"] = sentence_units.to_tsv()
        files["document_units.tsv"] = doc_units.to_tsv()
    files["metadata.json"] = _metadata(args, empty_hypotheses="passed through as empty strings and flagged")
    return files


# ---------------------------------------------------------------- compare / posbias

def cmd_compare(args) -> Dict[str, str]:
    table = ScoreTable.read_tsv(args.scores).scaled(args.scale)
    files: Dict[str, str] = {}
    if args.pair:
        pairs = []
        for spec in args.pair:
            label, _, systems = spec.partition("=")
            a, _, b = systems.partition(",")
            if not (label and a and b):
                raise FormatError(f"--pair expects LABEL=SYSTEM_A,SYSTEM_B, got {spec!r}")
            pairs.append((label, a, b))
        windows = parse_ladder(args.ladder)
        grid = compare_systems(table, pairs, windows)
        if args.scores_b:
            other = compare_systems(ScoreTable.read_tsv(args.scores_b).scaled(args.scale), pairs, windows)
            mark_disagreements(grid, other)
            files["compare_b.tsv"] = other.render_tsv(show_p=True)
        files["compare.tsv"] = grid.render_tsv(show_p=True)
    else:
        systems = parse_ladder(args.systems) if args.systems else None
        grid = compare_adjacent_windows(table, parse_ladder(args.ladder), systems)
        files["compare.tsv"] = grid.render_tsv()
    files["compare.json"] = dumps(grid.as_json())
    files["metadata.json"] = _metadata(args, test="two-sided paired t-test")
    return files


def cmd_posbias(args) -> Dict[str, str]:
    by_system = read_position_buckets(args.scores)
    if args.scale != 1:
        for buckets in by_system.values():
            for b in buckets:
                b.scores = [s * args.scale for s in b.scores]
    grid = position_bias_grid(by_system, args.positions)
    means = {s: position_bias_analysis(b, args.positions).bucket_means for s, b in by_system.items()}
    return {"posbias.tsv": grid.render_tsv(),
            "posbias.json": dumps({**grid.as_json(), "bucket_means": means}),
            "metadata.json": _metadata(args)}


# ---------------------------------------------------------------- positions / repeats

def _read_lengths(args) -> List[int]:
    lengths = list(args.length or [])
    if args.lengths:
        if str(args.lengths).endswith(".jsonl"):
            lengths += [int(require(rec, "src_len", args.lengths, n)) for n, rec in read_jsonl(args.lengths)]
        else:
            with open(args.lengths, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if line.strip():
                        try:
                            lengths.append(int(line))
                        except ValueError:
                            raise FormatError(f"not an integer: {line.strip()!r}", args.lengths, lineno) from None
    if not lengths:
        raise FormatError("positions needs --length or --lengths")
    return lengths


def cmd_positions(args) -> Dict[str, str]:
    lengths = _read_lengths(args)
    flat = {s: flatness(coverage_profile(lengths, s, args.max_len)) for s in SAMPLERS}
    return {"coverage.csv": profiles_csv(lengths, args.max_len),
            "metadata.json": _metadata(args, flatness=flat, n_sequences=len(lengths),
                                       mean_length=sum(lengths) / len(lengths))}


def cmd_repeats(args) -> Dict[str, str]:
    groups: Dict[Tuple[str, str], Dict[str, str]] = defaultdict(dict)
    for lineno, rec in read_jsonl(args.input):
        key = (str(require(rec, "system", args.input, lineno)), str(require(rec, "l_max", args.input, lineno)))
        doc_id = str(require(rec, "doc_id", args.input, lineno))
        hyp = require(rec, "hyp", args.input, lineno)
        groups[key][doc_id] = hyp if isinstance(hyp, str) else " ".join(hyp)
    reports = repetition_rate(groups, args.n, args.unit)
    detail = [{"system": s, "l_max": w, "rate": r.rate, "flagged": r.flagged,
               "documents": len(r.per_document), "per_document": r.per_document}
              for (s, w), r in reports.items()]
    return {"repeats.tsv": repetition_table(reports),
            "repeats.json": dumps(detail),
            "metadata.json": _metadata(args)}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docmt", description="Document-level MT evaluation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file whose keys provide defaults for the command's flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("build", help="build pseudo-document corpora and test sets")
    common(p, seed=True)
    p.add_argument("--src")
    p.add_argument("--tgt")
    p.add_argument("--jsonl", help="JSONL with doc_id, src, tgt")
    p.add_argument("--boundary", choices=["marker", "blank"], default="marker")
    p.add_argument("--scheme", default="13a", help="13a, ws or external:FILE")
    p.add_argument("--kind", default="test", help="comma list of gaussian, uniform, test")
    p.add_argument("--l-max", type=int, default=1024, help="maximum length for training corpora")
    p.add_argument("--ladder", default=DEFAULT_LADDER, help="comma list of test-set lengths")
    p.add_argument("--split", default="train", help="label used in statistics tables")
    p.set_defaults(func=cmd_build)

    for name, func, helptext in (("score", cmd_score, "BLEU, d-BLEU and ds-BLEU reports"),
                                 ("realign", cmd_realign, "realign hypotheses to reference sentences")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--refs", required=(name == "realign"),
                       help="references: marker text or JSONL with doc_id, ref")
        p.add_argument("--hyp", action="append", required=True, help="SYSTEM:WINDOW:PATH (repeatable)")
        p.add_argument("--ref-field", default="ref", help="JSONL field holding the references")
        p.add_argument("--hyp-field", default="hyp", help="JSONL field holding the hypothesis")
        p.add_argument("--jobs", type=int, default=1)
        if name == "score":
            p.add_argument("--metric", action="append", choices=["bleu", "dbleu", "dsbleu"])
        else:
            p.add_argument("--scores", help="external sentence scores: config_id, doc_id, ref_index, score")
            p.add_argument("--scale", type=float, default=100.0)
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="paired t-tests between windows or systems")
    common(p)
    p.add_argument("--scores", required=True, help="TSV config_id, unit_id, score")
    p.add_argument("--scores-b", help="second metric's table, to flag significance disagreements")
    p.add_argument("--ladder", default="sent," + DEFAULT_LADDER)
    p.add_argument("--systems")
    p.add_argument("--pair", action="append", help="LABEL=SYSTEM_A,SYSTEM_B (repeatable)")
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("posbias", help="paired tests between consecutive positions")
    common(p)
    p.add_argument("--scores", required=True, help="TSV system, unit_id, bucket, position, score")
    p.add_argument("--positions", type=int, default=7)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_posbias)

    p = sub.add_parser("positions", help="position coverage profiles")
    common(p)
    p.add_argument("--length", type=int, action="append")
    p.add_argument("--lengths", help="file of integers, or corpus JSONL with src_len")
    p.add_argument("--max-len", "-M", type=int, required=True)
    p.set_defaults(func=cmd_positions)

    p = sub.add_parser("repeats", help="long n-gram repetition rates")
    common(p)
    p.add_argument("--input", required=True, help="JSONL with system, l_max, doc_id, hyp")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--unit", choices=["tokens", "whitespace"], default="tokens")
    p.set_defaults(func=cmd_repeats)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    try:
        files = args.func(args)
        write_outputs(args.out, files)
    except (DocMTError, OSError, ValueError) as exc:
        print(f"docmt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
