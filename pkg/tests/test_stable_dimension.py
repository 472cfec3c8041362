import math

import numpy as np
import pytest

from dimension.stable_dimension import (
    ConvergenceError,
    EmptyFamily,
    NotContracted,
    conformal_lambda_n,
    continuity_experiment,
    diameter_spectrum,
    Spectrum,
    lambda_n,
    solve_exponent,
    tilde_lambda_n,
    upper_stable_dimension,
)
from model.horseshoe import HorseshoeModel
from symbolic.budget import BudgetConfig, enumeration_budget
from symbolic.subshift import TransitionMatrix, connection_length

LOG3_LOG2 = math.log(3) / math.log(2)


def _bisect(f, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("n", range(1, 11))
def test_ref3_is_constant(REF3, n):
    assert lambda_n(REF3, n) == pytest.approx(LOG3_LOG2, abs=1e-10)


def test_ref2_value(REF2):
    for n in (1, 5, 9):
        assert lambda_n(REF2, n) == pytest.approx(0.63093, abs=1e-5)
        assert lambda_n(REF2, n) == pytest.approx(math.log(2) / math.log(3), abs=1e-10)


def test_two_rate_matches_independent_bisection(TWO_RATE):
    oracle = _bisect(lambda x: 2.0 ** -x + 3.0 ** -x - 1.0, 0.0, 2.0)
    assert oracle == pytest.approx(0.7878, abs=1e-4)
    for n in (1, 4, 8):
        assert lambda_n(TWO_RATE, n) == pytest.approx(oracle, abs=1e-8)


def test_conformal_oracle(REF3, REF2):
    for model in (REF3, REF2):
        for n in range(1, 9):
            assert lambda_n(model, n) == pytest.approx(conformal_lambda_n(model, n), abs=1e-10)


def test_affine_spectrum_matches_enumeration(REF3b):
    from model.pieces import diameters
    from symbolic.subshift import word_array

    spectrum = diameter_spectrum(REF3b, 5)
    brute = diameters(REF3b, word_array(REF3b.subshift, 5))
    assert spectrum.size == len(brute)
    assert spectrum.weighted_sum(1.3) == pytest.approx(np.sum(brute ** 1.3))


def test_tilde_lambda_closed_form(REF3):
    assert tilde_lambda_n(REF3, 4, 1, 1) == pytest.approx(math.log(9) / (4 * math.log(2)), abs=1e-10)


@pytest.mark.parametrize("n", [6, 8, 10, 12, 14])
def test_tilde_below_lambda_with_shrinking_gap(REF3b, n):
    lam = lambda_n(REF3b, n)
    tilde = tilde_lambda_n(REF3b, n, 1, 1)
    r = connection_length(REF3b.subshift)
    assert tilde <= lam
    assert lam - tilde <= 2 * r * abs(math.log(REF3b.min_rate_ws)) / n


def test_tilde_preconditions(REF3):
    with pytest.raises(ValueError):
        tilde_lambda_n(REF3, 3, 1, 1)
    golden = HorseshoeModel("golden", TransitionMatrix.from_rows([[0, 1], [1, 1]]), REF3.symbols[:2])
    with pytest.raises(ValueError):
        tilde_lambda_n(golden, 6, 1, 1)


def test_tilde_empty_family(REF3):
    swap = HorseshoeModel("swap", TransitionMatrix.from_rows([[0, 1], [1, 0]]), REF3.symbols[:2])
    # mixing fails, so the connection length is undefined
    with pytest.raises(ValueError):
        tilde_lambda_n(swap, 6, 1, 2)
    assert issubclass(EmptyFamily, ValueError)


def test_not_contracted():
    with pytest.raises(NotContracted):
        solve_exponent(Spectrum(np.array([1.0, 0.5]), np.array([1.0, 2.0])))
    with pytest.raises(EmptyFamily):
        solve_exponent(Spectrum(np.zeros(0), np.zeros(0)))


def test_upper_stable_dimension_references(REF3, REF3b, REF2):
    est = upper_stable_dimension(REF3, 1e-6)
    assert est.n == 2
    assert est.value == pytest.approx(LOG3_LOG2, abs=1e-10)
    assert est.error <= 1e-10
    est = upper_stable_dimension(REF3b, 1e-3)
    assert 1.40 < est.value < 1.50
    oracle = _bisect(lambda x: 2 * 0.5 ** x + 0.4 ** x - 1.0, 0.0, 3.0)
    assert est.value == pytest.approx(oracle, abs=1e-8)
    assert upper_stable_dimension(REF2, 1e-6).value == pytest.approx(0.63093, abs=1e-5)


def test_upper_stable_dimension_bent_model_has_error_bar(REF3):
    est = upper_stable_dimension(REF3.with_bend(0.02), 1e-2, n_max=9)
    assert est.error > 0.0
    assert abs(est.value - LOG3_LOG2) < 0.1


def test_convergence_error_keeps_partial_data(REF3, monkeypatch):
    diameter_spectrum.cache_clear()
    monkeypatch.setattr(enumeration_budget, "config", BudgetConfig(max_words=200))
    bent = REF3.with_bend(0.02)
    with pytest.raises(ConvergenceError) as info:
        upper_stable_dimension(bent, 1e-12, n_max=12)
    assert info.value.partial
    assert all(isinstance(n, int) for n, _ in info.value.partial)
    diameter_spectrum.cache_clear()


def test_continuity_experiment(REF3, REF2):
    table = continuity_experiment(REF3, [0.0, 1e-3, 1e-2], depth=6)
    assert table.rows[0] == (0.0, pytest.approx(LOG3_LOG2, abs=1e-10))
    for delta, value in table.rows[1:]:
        assert abs(value - LOG3_LOG2) <= table.slope * delta * 2 + 1e-9
    assert table.slope >= 0.0
    control = continuity_experiment(REF2, [0.0, 1e-3, 1e-2], depth=6)
    assert all(value < 1.0 for _, value in control.rows)
