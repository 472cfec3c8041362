import math
from itertools import product

import pytest

from stacking.recurrence import (
    InsufficientDepth,
    factor_length,
    has_repeated_factor,
    is_never_recurrent,
    is_nonrecurrent_leaf,
    is_nonrecurrent_word,
    recurrence_patterns,
    recurrent_census,
)
from symbolic.subshift import Word
from thermo.gibbs import build_gibbs_measure


def test_repeated_factor():
    assert has_repeated_factor((1, 2, 1, 2), 2)
    assert not has_repeated_factor((1, 2, 3), 2)
    assert has_repeated_factor((1, 1), 1)
    # overlapping occurrences count
    assert has_repeated_factor((1, 1, 1), 2)
    assert not has_repeated_factor((1, 2), 3)


def test_occurrences_overlap():
    assert recurrence_patterns.occurrences("1111", "11") == 3
    assert recurrence_patterns.occurrences("1231", "31") == 1
    with pytest.raises(ValueError):
        recurrence_patterns.repeated(0)


def test_nonrecurrent_word(REF3):
    leaf = REF3.leaf((1, 2, 3))
    assert is_nonrecurrent_word(leaf, Word.forward((1, 2)), 2, 3)
    assert not is_nonrecurrent_word(leaf, Word.forward((2, 3)), 2, 3)
    # only the last beta letters of the leaf are scanned
    assert is_nonrecurrent_word(REF3.leaf((2, 3, 1, 2, 3)), Word.forward((1,)), 2, 3)


def test_nonrecurrent_leaf(REF3):
    leaf = REF3.leaf((1, 2, 1, 2))
    assert not is_nonrecurrent_leaf(leaf, 2, 4)
    assert is_nonrecurrent_leaf(leaf, 2, 2)
    assert is_nonrecurrent_leaf(leaf, 3, 4)


def test_window_errors(REF3):
    with pytest.raises(InsufficientDepth):
        is_nonrecurrent_leaf(REF3.leaf((1, 2)), 1, 3)
    with pytest.raises(ValueError):
        is_nonrecurrent_leaf(REF3.leaf((1, 2, 3)), 3, 2)


def test_never_recurrent(REF3):
    assert is_never_recurrent(REF3.leaf((3, 1, 2)), (1, 2, 3))
    assert not is_never_recurrent(REF3.leaf((1, 2, 1, 2)), (1,))
    # scales deeper than the truncation are skipped
    assert is_never_recurrent(REF3.leaf((1, 2)), (1, 5))


def test_factor_length(REF3):
    assert factor_length(REF3, 1 / 9, 1.0) == 2
    assert factor_length(REF3, 0.1, 1.0) == 3


@pytest.mark.slow
def test_census_matches_enumeration(REF3):
    mu = build_gibbs_measure(REF3, math.log(3) / math.log(2))
    result = recurrent_census(REF3, mu, 2.0 ** -10, 1.0, 3)
    L, m = result.block_length, result.factor_length
    assert result.n_blocks == 3 ** L
    repeated = 0
    for word in product("123", repeat=L):
        text = "".join(word)
        factors = [text[i:i + m] for i in range(L - m + 1)]
        repeated += len(set(factors)) < len(factors)
    assert result.n_recurrent == repeated
    assert result.fraction == pytest.approx(repeated / 3 ** L, rel=1e-9)
    assert 0.0 < result.fraction < 1.0
