"""Paired significance tests over (system, window) score tables.

Scores from two configurations are only compared on identical units
(documents or sentences). Differences are tested with a two-sided paired
Student t-test. The t distribution tail is computed from the regularized
incomplete beta function, evaluated with a modified Lentz continued fraction.
"""

import csv
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import FormatError, IncompleteBucket, InsufficientSamples, UnitMismatch

_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 10000

TIER_STRONG = "p<=0.01"
TIER_WEAK = "0.01<p<=0.05"
TIER_NONE = "p>0.05"


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float, xc: Optional[float] = None) -> float:
    """Regularized incomplete beta ``I_x(a, b)``.

    :param xc: ``1 - x`` if the caller can compute it without cancellation
    """
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if xc is None:
        xc = 1.0 - x
    if x <= 0.0:
        return 0.0
    if xc <= 0.0:
        return 1.0
    log_front = (a * math.log(x) + b * math.log(xc)
                 + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, xc) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    t2 = t * t
    x = df / (df + t2)
    xc = t2 / (df + t2)
    return min(1.0, max(0.0, betainc_reg(df / 2.0, 0.5, x, xc)))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return tail if t < 0 else 1.0 - tail


def significance_tier(p: float) -> str:
    if p <= 0.01:
        return TIER_STRONG
    if p <= 0.05:
        return TIER_WEAK
    return TIER_NONE


@dataclass(frozen=True)
class PairedTestResult:
    mean_diff: float
    t_stat: float
    p_value: float
    n: int
    degenerate: bool = False

    @property
    def tier(self) -> str:
        return significance_tier(self.p_value)

    @property
    def significant(self) -> bool:
        return self.p_value <= 0.05

    def as_dict(self) -> dict:
        return {"mean_diff": self.mean_diff, "t_stat": self.t_stat, "p_value": self.p_value,
                "n": self.n, "tier": self.tier, "degenerate": self.degenerate}


def paired_t_test(diffs: Sequence[float]) -> PairedTestResult:
    """Two-sided paired t-test on per-unit score differences.

    Zero variance is handled without dividing by zero: all-zero differences
    give ``t = 0, p = 1``; a nonzero constant gives ``t = +-inf, p = 0`` and is
    flagged ``degenerate``.

    :raises InsufficientSamples: fewer than two differences
    """
    n = len(diffs)
    if n < 2:
        raise InsufficientSamples(f"paired t-test needs at least 2 samples, got {n}")
    mean = statistics.fmean(diffs)
    sd = statistics.stdev(diffs)
    if sd == 0:
        if mean == 0:
            return PairedTestResult(0.0, 0.0, 1.0, n, degenerate=True)
        return PairedTestResult(mean, math.copysign(math.inf, mean), 0.0, n, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return PairedTestResult(mean, t, t_sf_two_sided(t, n - 1), n)


def render_cell(result: Optional[PairedTestResult], width: int = 1, show_p: bool = False,
                marker: str = "*") -> str:
    """Format one table cell.

    ``-`` when p > 0.05; the value suffixed with ``marker`` when
    0.01 < p <= 0.05; the bare value otherwise. ``show_p`` appends the
    p-value in parentheses.
    """
    if result is None:
        return ""
    tier = result.tier
    if tier == TIER_NONE:
        return "-"
    text = f"{result.mean_diff:.{width}f}"
    if tier == TIER_WEAK:
        text += marker
    if show_p:
        text += f" ({result.p_value:.2f})"
    return text


def split_config(config_id: str) -> Tuple[str, str]:
    system, sep, window = config_id.rpartition(":")
    if not sep:
        raise ValueError(f"config id {config_id!r} is not of the form SYSTEM:WINDOW")
    return system, window


def config_id(system: str, window: str) -> str:
    return f"{system}:{window}"


@dataclass
class ScoreTable:
    """Scores keyed by ``(config_id, unit_id)``; config ids are ``SYSTEM:WINDOW``."""

    entries: Dict[Tuple[str, str], float] = field(default_factory=dict)
    metric: str = "score"

    def add(self, config: str, unit: str, score: float):
        self.entries[(config, unit)] = float(score)

    def configs(self) -> List[str]:
        return list(dict.fromkeys(c for c, _ in self.entries))

    def systems(self) -> List[str]:
        return list(dict.fromkeys(split_config(c)[0] for c in self.configs()))

    def units(self, config: str) -> Dict[str, float]:
        return {u: s for (c, u), s in self.entries.items() if c == config}

    def restrict(self, units: Iterable[str]) -> "ScoreTable":
        keep = set(units)
        return ScoreTable({k: v for k, v in self.entries.items() if k[1] in keep}, self.metric)

    def scaled(self, factor: float) -> "ScoreTable":
        return ScoreTable({k: v * factor for k, v in self.entries.items()}, self.metric)

    @classmethod
    def read_tsv(cls, path, metric: str = "score") -> "ScoreTable":
        """Read ``config_id<TAB>unit_id<TAB>score`` rows; a header line is skipped."""
        table = cls(metric=metric)
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
                if not row:
                    continue
                if len(row) != 3:
                    raise FormatError(f"expected 3 columns, got {len(row)}", path, lineno)
                try:
                    score = float(row[2])
                except ValueError:
                    if lineno == 1:
                        continue
                    raise FormatError(f"score {row[2]!r} is not a number", path, lineno) from None
                try:
                    split_config(row[0])
                except ValueError as exc:
                    raise FormatError(str(exc), path, lineno) from None
                table.add(row[0], row[1], score)
        return table

    def to_tsv(self) -> str:
        lines = ["config_id\tunit_id\tscore"]
        lines += [f"{c}\t{u}\t{s!r}" for (c, u), s in self.entries.items()]
        return "\n".join(lines) + "\n"


def compare_configs(table: ScoreTable, a: str, b: str) -> PairedTestResult:
    """Paired test of ``score(a) - score(b)`` over the shared units.

    :raises UnitMismatch: the two configurations were not scored on the
        same units
    """
    sa, sb = table.units(a), table.units(b)
    if not sa or not sb:
        missing = a if not sa else b
        raise UnitMismatch(f"configuration {missing!r} has no scores")
    if sa.keys() != sb.keys():
        only = sorted(sa.keys() ^ sb.keys())
        raise UnitMismatch(f"{a!r} and {b!r} were scored on different units, e.g. {only[:3]}")
    units = sorted(sa)
    return paired_t_test([sa[u] - sb[u] for u in units])


@dataclass
class ComparisonGrid:
    """Results laid out as rows x columns, rendered like the published tables."""

    rows: List[str]
    columns: List[str]
    cells: Dict[Tuple[str, str], PairedTestResult]
    bold: set = field(default_factory=set)

    def render_tsv(self, show_p: bool = False, width: int = 1) -> str:
        lines = ["\t".join([""] + self.columns)]
        for r in self.rows:
            cells = []
            for c in self.columns:
                text = render_cell(self.cells.get((r, c)), width, show_p)
                if (r, c) in self.bold and text:
                    text = f"**{text}**"
                cells.append(text)
            lines.append("\t".join([r] + cells))
        return "\n".join(lines) + "\n"

    def as_json(self) -> dict:
        return {
            "rows": self.rows,
            "columns": self.columns,
            "cells": [{"row": r, "column": c, **res.as_dict(), "bold": (r, c) in self.bold}
                      for (r, c), res in self.cells.items()],
        }


def compare_adjacent_windows(table: ScoreTable, window_ladder: Sequence[str],
                             systems: Optional[Sequence[str]] = None) -> ComparisonGrid:
    """For every system, test each window against the next one in the ladder.

    A positive difference means the shorter window scored higher. Rows are
    labelled ``"<short>-<long>"``; columns are systems.
    """
    systems = list(systems) if systems is not None else table.systems()
    rows = [f"{a}-{b}" for a, b in zip(window_ladder[:-1], window_ladder[1:])]
    cells = {}
    for system in systems:
        for row, (a, b) in zip(rows, zip(window_ladder[:-1], window_ladder[1:])):
            cells[(row, system)] = compare_configs(table, config_id(system, a), config_id(system, b))
    return ComparisonGrid(rows, systems, cells)


def compare_systems(table: ScoreTable, config_pairs: Sequence[Tuple[str, str, str]],
                    windows: Sequence[str]) -> ComparisonGrid:
    """Compare system pairs at each window.

    :param config_pairs: ``(column_label, system_a, system_b)``; cells hold
        ``score(a) - score(b)``
    """
    cells = {}
    for window in windows:
        for label, sys_a, sys_b in config_pairs:
            cells[(window, label)] = compare_configs(table, config_id(sys_a, window),
                                                     config_id(sys_b, window))
    return ComparisonGrid(list(windows), [label for label, _, _ in config_pairs], cells)


def mark_disagreements(grid_a: ComparisonGrid, grid_b: ComparisonGrid) -> set:
    """Cells significant (p <= 0.05) under one metric but not the other.

    Both grids get the cells added to their ``bold`` set.
    """
    flagged = set()
    for key, res_a in grid_a.cells.items():
        res_b = grid_b.cells.get(key)
        if res_b is not None and res_a.significant != res_b.significant:
            flagged.add(key)
    grid_a.bold |= flagged
    grid_b.bold |= flagged
    return flagged


@dataclass
class PositionBucket:
    """Scores of one sentence translated at several positions (ascending)."""

    unit_id: str
    positions: List[int]
    scores: List[float]

    def __post_init__(self):
        if len(self.positions) != len(self.scores):
            raise IncompleteBucket(f"{self.unit_id}: positions and scores differ in length")
        if any(a >= b for a, b in zip(self.positions, self.positions[1:])):
            raise IncompleteBucket(f"{self.unit_id}: positions must strictly increase")


@dataclass
class PositionBiasResult:
    rows: List[str]
    results: List[PairedTestResult]
    bucket_means: List[float]
    n: int


def position_bias_analysis(buckets: Sequence[PositionBucket], n_positions: int = 7) -> PositionBiasResult:
    """Paired tests between consecutive positions ``p_k - p_{k+1}``.

    A positive difference means the earlier position scored higher.

    :raises IncompleteBucket: a sentence lacks one of the ``n_positions`` scores
    """
    if not buckets:
        raise IncompleteBucket("no position buckets")
    for b in buckets:
        if len(b.scores) != n_positions:
            raise IncompleteBucket(f"{b.unit_id}: expected {n_positions} positions, got {len(b.scores)}")
    ordered = sorted(buckets, key=lambda b: b.unit_id)
    rows, results = [], []
    for k in range(n_positions - 1):
        rows.append(f"p_{k}-p_{k + 1}")
        results.append(paired_t_test([b.scores[k] - b.scores[k + 1] for b in ordered]))
    means = [statistics.fmean(b.positions[k] for b in ordered) for k in range(n_positions)]
    return PositionBiasResult(rows, results, means, len(ordered))


def read_position_buckets(path) -> Dict[str, List[PositionBucket]]:
    """Read ``system, unit_id, bucket, position, score`` TSV rows grouped by system."""
    raw: Dict[str, Dict[str, Dict[int, Tuple[int, float]]]] = defaultdict(lambda: defaultdict(dict))
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != 5:
                raise FormatError(f"expected 5 columns, got {len(row)}", path, lineno)
            system, unit, bucket, position, score = row
            try:
                raw[system][unit][int(bucket)] = (int(position), float(score))
            except ValueError:
                if lineno == 1:
                    continue
                raise FormatError("bucket/position must be integers and score a number", path, lineno) from None
    out = {}
    for system, units in raw.items():
        buckets = []
        for unit, by_bucket in units.items():
            keys = sorted(by_bucket)
            if keys != list(range(len(keys))):
                raise IncompleteBucket(f"{system}/{unit}: bucket indices {keys} are not 0..{len(keys) - 1}")
            buckets.append(PositionBucket(unit, [by_bucket[k][0] for k in keys],
                                          [by_bucket[k][1] for k in keys]))
        out[system] = buckets
    return out


def position_bias_grid(by_system: Mapping[str, Sequence[PositionBucket]], n_positions: int = 7) -> ComparisonGrid:
    cells = {}
    rows: List[str] = []
    for system, buckets in by_system.items():
        res = position_bias_analysis(buckets, n_positions)
        rows = res.rows
        for row, r in zip(res.rows, res.results):
            cells[(row, system)] = r
    return ComparisonGrid(rows, list(by_system), cells)
