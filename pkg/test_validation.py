import numpy as np
import pytest

from errors import InputError, UndefinedStatisticError
from models import ComparisonPair
from validation import (
    agreement, load_pairs, margins, select_top_gap, spearman_rho, split_ties,
    validation_table,
)


def _pair(pair_id, m_a, m_b, votes_a, votes_b, metric="R-Ghost"):
    return ComparisonPair(pair_id=str(pair_id), metric=metric, m_a=m_a, m_b=m_b, votes_a=votes_a, votes_b=votes_b)


# ========== Agreement and margins ==========

def test_agreement_of_eleven_in_fifteen():
    pairs = [_pair(i, 0.1, 0.2, 7, 3) for i in range(11)]
    pairs += [_pair(i, 0.1, 0.2, 2, 8) for i in range(11, 15)]
    assert agreement(pairs) == pytest.approx(0.7333, abs=1e-4)


def test_agreement_lower_metric_wins():
    assert agreement([_pair("a", 0.9, 0.1, 1, 9)]) == 1.0
    assert agreement([_pair("a", 0.9, 0.1, 9, 1)]) == 0.0


def test_agreement_refuses_ties_and_empty_input():
    with pytest.raises(InputError):
        agreement([_pair("a", 0.1, 0.1, 3, 1)])
    with pytest.raises(UndefinedStatisticError):
        agreement([])


def test_split_ties():
    pairs = [_pair("a", 0.1, 0.1, 3, 1), _pair("b", 0.1, 0.2, 2, 2), _pair("c", 0.1, 0.2, 3, 1)]
    decisive, tied = split_ties(pairs)
    assert [p.pair_id for p in decisive] == ["c"]
    assert [p.pair_id for p in tied] == ["a", "b"]


def test_margins():
    assert margins(_pair("a", 0.3, 0.1, 8, 2)) == pytest.approx((0.2, 0.3))
    assert margins(_pair("b", 0.5, 0.5, 5, 5)) == (0.0, 0.0)
    assert margins(_pair("c", 0.0, 1.0, 0, 4)) == pytest.approx((1.0, 0.5))


def test_pair_needs_votes():
    with pytest.raises(ValueError):
        _pair("a", 0.1, 0.2, 0, 0)


# ========== Spearman ==========

def test_spearman_textbook_example():
    assert spearman_rho([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]) == pytest.approx(0.8)


def test_spearman_of_monotone_series_is_exact():
    x = [0.1, 0.4, 0.5, 2.0, 3.0]
    assert spearman_rho(x, [1, 2, 3, 4, 5]) == 1.0
    assert spearman_rho(x, [5, 4, 3, 2, 1]) == -1.0


def _average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def test_spearman_matches_rank_pearson(rng):
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(3, 30))
        x = rng.integers(0, 6, size=n).tolist()
        y = rng.integers(0, 6, size=n).tolist()
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        expected = np.corrcoef(_average_ranks(x), _average_ranks(y))[0, 1]
        assert spearman_rho(x, y) == pytest.approx(expected, abs=1e-12)
        checked += 1
    assert checked > 900


def test_spearman_undefined_cases():
    with pytest.raises(UndefinedStatisticError):
        spearman_rho([1.0], [2.0])
    with pytest.raises(UndefinedStatisticError):
        spearman_rho([1, 1, 1], [1, 2, 3])
    with pytest.raises(InputError):
        spearman_rho([1, 2], [1, 2, 3])


# ========== Tables ==========

def test_select_top_gap_per_metric():
    pairs = [
        _pair("a", 0.0, 0.1, 1, 0),
        _pair("b", 0.0, 0.5, 1, 0),
        _pair("c", 0.0, 0.5, 1, 0),
        _pair("d", 0.0, 0.9, 1, 0, metric="E-Copy"),
        _pair("e", 0.0, 0.2, 1, 0, metric="E-Copy"),
    ]
    kept = select_top_gap(pairs, 0.3)
    assert [p.pair_id for p in kept] == ["b", "d"]
    with pytest.raises(InputError):
        select_top_gap(pairs, 0.0)


def test_validation_table_rows_and_average():
    pairs = [
        _pair("1", 0.1, 0.2, 6, 4),
        _pair("2", 0.1, 0.5, 9, 1),
        _pair("3", 0.4, 0.2, 6, 4),
        _pair("4", 0.3, 0.3, 6, 4),
        _pair("5", 0.1, 0.3, 2, 8, metric="E-Copy"),
        _pair("6", 0.1, 0.2, 4, 6, metric="E-Copy"),
    ]
    summary = validation_table(pairs)
    assert [r.metric for r in summary.rows] == ["E-Copy", "R-Ghost"]
    copy_row, ghost_row = summary.rows
    assert copy_row.agreement == 0.0
    assert ghost_row.ties == 1
    assert ghost_row.agreement == pytest.approx(2 / 3)
    assert summary.average.metric == "Average"
    assert summary.average.pairs == 6
    assert summary.average.ties == 1
    assert summary.average.agreement == pytest.approx(1 / 3)


def test_validation_table_of_nothing():
    with pytest.raises(UndefinedStatisticError):
        validation_table([])


def test_load_pairs(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("pair_id,metric,m_A,m_B,votes_A,votes_B\np1,R-Ghost,0.2,0.4,7,3\n")
    pairs = load_pairs(path)
    assert pairs == [_pair("p1", 0.2, 0.4, 7, 3)]


def test_load_pairs_reports_bad_line(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("pair_id,metric,m_A,m_B,votes_A,votes_B\np1,R-Ghost,0.2,x,7,3\n")
    with pytest.raises(InputError, match="pairs.csv:2"):
        load_pairs(path)
    path.write_text("pair_id,metric,m_A\n")
    with pytest.raises(InputError, match="missing columns"):
        load_pairs(path)
