import math
from collections import Counter
from itertools import product

import pytest

from model.pieces import pieces_at_scale
from stacking.recurrence import is_nonrecurrent_word
from stacking.stackings import (
    EmptyStacking,
    build_stackings,
    build_well_distributed,
    first_stacking_threshold,
    fundamental_index,
    fundamental_interval,
    substacking_cap,
)

LOG3_LOG2 = math.log(3) / math.log(2)
T = (0.0, 0.25, 0.5)


def _midpoint_counts(rho: float, n: int) -> Counter:
    counts = Counter()
    for word in product((1, 2, 3), repeat=n):
        lower = sum(T[a - 1] * 2.0 ** -j for j, a in enumerate(word))
        counts[math.floor((lower + 0.5 * 2.0 ** -n) / rho) + 1] += 1
    return counts


def test_fundamental_intervals():
    assert fundamental_index(0.3, 0.25) == 2
    assert fundamental_index(0.0, 0.25) == 1
    assert tuple(fundamental_interval(2, 0.25)) == (0.25, 0.5)


def test_stackings_follow_midpoints(REF3):
    rho = 2.0 ** -4
    pieces = pieces_at_scale(REF3, REF3.leaf((1,)), rho, 1.0)
    assert len(pieces) == 81
    stacking = build_stackings(pieces, rho, 1)
    assert {i: len(s) for i, s in stacking.stacks.items()} == dict(_midpoint_counts(rho, 4))
    assert stacking.n_pieces == 81
    assert stacking.discarded == 0
    stacking.check()


def test_small_stacks_are_discarded(REF3):
    rho = 2.0 ** -4
    pieces = pieces_at_scale(REF3, REF3.leaf((2,)), rho, 1.0)
    counts = _midpoint_counts(rho, 4)
    threshold = sorted(counts.values())[len(counts) // 2]
    stacking = build_stackings(pieces, rho, threshold)
    assert set(stacking.stacks) == {i for i, n in counts.items() if n >= threshold}
    assert stacking.n_pieces + stacking.discarded == 81
    with pytest.raises(EmptyStacking):
        build_stackings(pieces, rho, 1000)
    with pytest.raises(ValueError):
        build_stackings(pieces, rho, 1, relaxation=0.5)


def test_thresholds():
    rho = 2.0 ** -6
    # rho^{-(1/2)(d-1)} = 27/8 when 2^d = 3
    assert first_stacking_threshold(rho, 1.0, 2, LOG3_LOG2, 0.5) == 2
    assert substacking_cap(rho, 1.0, 2, LOG3_LOG2) == 4
    assert first_stacking_threshold(rho, 1.0, 2, 1.0, 0.5) == 1


def test_well_distributed_stacking(REF3):
    rho = 2.0 ** -6
    leaf = REF3.leaf((1, 2, 3))
    result = build_well_distributed(REF3, leaf, rho, 1.0, 2, LOG3_LOG2, c1=1.0)
    result.check()
    assert result.target == pytest.approx(0.5 * 27 / 8)
    cap = substacking_cap(rho, 1.0, 2, LOG3_LOG2)
    for i, stack in result.stacks.items():
        assert 1 <= result.parents[i] <= len(stack) <= cap * result.parents[i]
        for p in stack:
            assert len(p.word) == 6
            assert is_nonrecurrent_word(leaf, p.word, 2, 3)
    assert set(result.well_distributed()) <= set(result.stacks)
    assert result.shortfall == len(result.stacks) - len(result.well_distributed())
    assert result.to_dict()["target"] == result.target


def test_well_distributed_rejects_recurrent_children(REF3):
    leaf = REF3.leaf((1, 2, 3))
    result = build_well_distributed(REF3, leaf, 2.0 ** -6, 1.0, 2, LOG3_LOG2, c1=1.0)
    kept = {p.word.letters for stack in result.stacks.values() for p in stack}
    assert (2, 3, 1, 1, 1, 1) not in kept
