import itertools

import numpy as np
import pytest

from symbolic.budget import BudgetConfig, BudgetExceeded, BudgetState, EnumerationBudget
from symbolic.subshift import (
    JunctionError,
    LeafApprox,
    SymbolError,
    TransitionMatrix,
    Word,
    concat,
    connection_length,
    enumerate_words,
    is_admissible,
    mixing_exponent,
    nonrepetitive_word,
    word_array,
)

FULL3 = TransitionMatrix.full(3)
GOLDEN = TransitionMatrix.from_rows([[0, 1], [1, 1]])
SWAP = TransitionMatrix.from_rows([[0, 1], [1, 0]])


def test_transition_matrix_rejects_dead_symbols():
    with pytest.raises(ValueError):
        TransitionMatrix.from_rows([[1, 0], [1, 0]])
    with pytest.raises(ValueError):
        TransitionMatrix.from_rows([[1, 2], [1, 1]])


@pytest.mark.parametrize(
    "letters,A,expected",
    [
        ((1, 2, 3), FULL3, True),
        ((1, 1), GOLDEN, False),
        ((2, 1, 2), SWAP, True),
        ((), GOLDEN, True),
        ((1,), GOLDEN, True),
    ],
)
def test_is_admissible(letters, A, expected):
    assert is_admissible(Word.forward(letters), A) is expected


def test_is_admissible_symbol_out_of_range():
    with pytest.raises(SymbolError):
        is_admissible(Word.forward((1, 4)), FULL3)


@pytest.mark.parametrize("A,expected", [(FULL3, 1), (GOLDEN, 2), (SWAP, None)])
def test_mixing_exponent(A, expected):
    assert mixing_exponent(A, 10) == expected


def test_mixing_exponent_is_minimal():
    n = mixing_exponent(GOLDEN, 10)
    assert (np.linalg.matrix_power(GOLDEN.array, n) > 0).all()
    assert (np.linalg.matrix_power(GOLDEN.array, n - 1) == 0).any()
    assert connection_length(GOLDEN) == 3


def test_enumerate_words_counts():
    assert len(enumerate_words(FULL3, 2)) == 9
    assert len(enumerate_words(FULL3, 1, following=2)) == 3
    words = [w.letters for w in enumerate_words(GOLDEN, 3)]
    assert words == [(1, 2, 1), (1, 2, 2), (2, 1, 2), (2, 2, 1), (2, 2, 2)]


@pytest.mark.parametrize("m", range(1, 9))
def test_path_count_identity(m):
    A = GOLDEN.array
    expected = int(np.linalg.matrix_power(A, m - 1).sum())
    assert len(word_array(GOLDEN, m)) == expected


def test_enumerate_words_brute_force_agreement():
    brute = [w for w in itertools.product((1, 2), repeat=4) if is_admissible(Word.forward(w), GOLDEN)]
    assert [w.letters for w in enumerate_words(GOLDEN, 4)] == brute


def test_enumerate_following_filters_first_letter():
    words = enumerate_words(GOLDEN, 2, following=1)
    assert all(w.first == 2 for w in words)


def test_concat():
    assert concat(Word.forward((1, 2)), Word.forward((3, 1)), FULL3).letters == (1, 2, 3, 1)
    assert concat(Word.forward((2, 1)), Word.forward((2,)), SWAP).letters == (2, 1, 2)
    with pytest.raises(JunctionError):
        concat(Word.forward((1,)), Word.forward((1,)), GOLDEN)


def test_concat_result_is_admissible():
    for w1, w2 in itertools.product(enumerate_words(GOLDEN, 2), repeat=2):
        try:
            joined = concat(w1, w2, GOLDEN)
        except JunctionError:
            continue
        assert is_admissible(joined, GOLDEN)


def test_backward_word_indexing():
    w = Word.backward((3, 1, 2))
    assert w.at(0) == 2
    assert w.at(2) == 3
    assert w.to_csv() == "3,1,2"


def test_leaf_requires_backward_suffix():
    with pytest.raises(ValueError):
        LeafApprox(Word.forward((1,)), 0.1)
    leaf = LeafApprox(Word.backward((1, 2, 3)), 0.01)
    assert leaf.final_letter == 3
    assert leaf.same_block(LeafApprox(Word.backward((2, 2, 3)), 0.01), 2)
    assert not leaf.same_block(LeafApprox(Word.backward((2, 2, 3)), 0.01), 3)


def test_nonrepetitive_word_has_no_repeated_factor():
    w = nonrepetitive_word(FULL3, 20, 3)
    factors = [w.letters[i:i + 3] for i in range(len(w) - 2)]
    assert len(factors) == len(set(factors))
    assert is_admissible(w, FULL3)


def test_nonrepetitive_word_impossible():
    with pytest.raises(ValueError):
        nonrepetitive_word(FULL3, 12, 2)


def test_budget_trips_and_recovers():
    budget = EnumerationBudget("test", BudgetConfig(max_words=100))
    budget.charge(60)
    with pytest.raises(BudgetExceeded):
        budget.charge(101)
    assert budget.state == BudgetState.TRIPPED
    budget.charge(10)
    assert budget.state == BudgetState.OPEN
    assert budget.total == 70


def test_word_array_respects_budget():
    budget = EnumerationBudget("small", BudgetConfig(max_words=50))
    with pytest.raises(BudgetExceeded):
        word_array(FULL3, 6, budget=budget)


@pytest.mark.slow
def test_default_budget_refuses_length_15_on_three_symbols():
    with pytest.raises(BudgetExceeded):
        word_array(FULL3, 15)
