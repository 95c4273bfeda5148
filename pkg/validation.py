"""
Metric-vs-human validation statistics: pairwise agreement, margins and
Spearman rank correlation between metric and vote margins.
"""

import csv
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.stats import rankdata

from errors import InputError, UndefinedStatisticError
from models import ComparisonPair, ValidationRow, ValidationSummary

logger = logging.getLogger(__name__)

PAIR_COLUMNS = ("pair_id", "metric", "m_A", "m_B", "votes_A", "votes_B")


def is_tied(pair: ComparisonPair) -> bool:
    """Equal metric values or an even human split."""
    return pair.m_a == pair.m_b or pair.votes_a == pair.votes_b


def split_ties(pairs: Sequence[ComparisonPair]) -> Tuple[List[ComparisonPair], List[ComparisonPair]]:
    decisive = [p for p in pairs if not is_tied(p)]
    tied = [p for p in pairs if is_tied(p)]
    return decisive, tied


def agreement(pairs: Sequence[ComparisonPair]) -> float:
    """Fraction of pairs where the lower-metric side is the human majority side.

    Tied pairs must be removed first (see split_ties).
    """
    if not pairs:
        raise UndefinedStatisticError("agreement of an empty pair list")
    hits = 0
    for pair in pairs:
        if is_tied(pair):
            raise InputError(f"pair {pair.pair_id} is tied; split ties before computing agreement")
        metric_prefers_a = pair.m_a < pair.m_b
        humans_prefer_a = pair.votes_a > pair.votes_b
        hits += metric_prefers_a == humans_prefer_a
    return hits / len(pairs)


def margins(pair: ComparisonPair) -> Tuple[float, float]:
    """(|m(A) - m(B)|, |#A / (#A + #B) - 0.5|)."""
    total = pair.votes_a + pair.votes_b
    if total < 1:
        raise InputError(f"pair {pair.pair_id} has no votes")
    return abs(pair.m_a - pair.m_b), abs(pair.votes_a / total - 0.5)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    if len(x) != len(y):
        raise InputError(f"series lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise UndefinedStatisticError("spearman needs at least 2 observations")
    rx = rankdata(np.asarray(x, dtype=np.float64), method="average")
    ry = rankdata(np.asarray(y, dtype=np.float64), method="average")
    rx, ry = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(np.dot(rx, rx)), float(np.dot(ry, ry))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatisticError("zero rank variance")
    rho = float(np.dot(rx, ry)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def select_top_gap(pairs: Sequence[ComparisonPair], fraction: float = 0.3) -> List[ComparisonPair]:
    """Per metric, keep the ceil(fraction * n) pairs with the largest metric gap.

    Equal gaps are ordered by pair id. The result keeps the input order.
    """
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"fraction must lie in (0, 1], got {fraction}")
    by_metric: Dict[str, List[ComparisonPair]] = defaultdict(list)
    for pair in pairs:
        by_metric[pair.metric].append(pair)
    keep = set()
    for group in by_metric.values():
        count = math.ceil(fraction * len(group))
        ranked = sorted(group, key=lambda p: (-abs(p.m_a - p.m_b), p.pair_id))
        keep.update(id(p) for p in ranked[:count])
    return [p for p in pairs if id(p) in keep]


def _row(metric: str, pairs: Sequence[ComparisonPair]) -> ValidationRow:
    decisive, tied = split_ties(pairs)
    agree = agreement(decisive) if decisive else None
    gaps = [margins(p) for p in pairs]
    try:
        rho = spearman_rho([g[0] for g in gaps], [g[1] for g in gaps])
    except UndefinedStatisticError as e:
        logger.info("%s: spearman undefined (%s)", metric, e)
        rho = None
    return ValidationRow(metric=metric, pairs=len(pairs), ties=len(tied), agreement=agree, spearman=rho)


def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def validation_table(pairs: Sequence[ComparisonPair], top_gap_fraction: Optional[float] = None) -> ValidationSummary:
    """One row per metric (sorted by name) and an average row over the metric rows."""
    if top_gap_fraction is not None:
        pairs = select_top_gap(pairs, top_gap_fraction)
    if not pairs:
        raise UndefinedStatisticError("no comparison pairs")
    by_metric: Dict[str, List[ComparisonPair]] = defaultdict(list)
    for pair in pairs:
        by_metric[pair.metric].append(pair)
    rows = [_row(metric, by_metric[metric]) for metric in sorted(by_metric)]
    average = ValidationRow(
        metric="Average",
        pairs=sum(r.pairs for r in rows),
        ties=sum(r.ties for r in rows),
        agreement=_mean([r.agreement for r in rows]),
        spearman=_mean([r.spearman for r in rows]),
    )
    return ValidationSummary(rows=rows, average=average)


def load_pairs(path) -> List[ComparisonPair]:
    """Read the pair CSV (pair_id, metric, m_A, m_B, votes_A, votes_B)."""
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in PAIR_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path.name}: missing columns {missing}")
        pairs = []
        for line, row in enumerate(reader, start=2):
            try:
                pairs.append(ComparisonPair(
                    pair_id=row["pair_id"],
                    metric=row["metric"],
                    m_a=float(row["m_A"]),
                    m_b=float(row["m_B"]),
                    votes_a=int(row["votes_A"]),
                    votes_b=int(row["votes_B"]),
                ))
            except (ValueError, ValidationError) as e:
                raise InputError(f"{path.name}:{line}: {e}")
    return pairs
