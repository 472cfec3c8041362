import math
from itertools import product

import numpy as np
import pytest

from dimension.stable_dimension import lambda_n
from marstrand.density import (
    SelectionError,
    density_l2,
    histogram,
    pair_statistic,
    projected_measure,
    select_marstrand_parameter,
    weighted_quantile,
)
from marstrand.function_system import MarstrandFamily
from thermo.gibbs import build_gibbs_measure

LOG3_LOG2 = math.log(3) / math.log(2)


@pytest.fixture(scope="module")
def ref3_setup(REF3):
    return MarstrandFamily(REF3, "translation", 0.1), build_gibbs_measure(REF3, LOG3_LOG2)


def _ref3_depth6_l2() -> float:
    bins = np.zeros(130)
    for word in product((0, 1, 2), repeat=6):
        # left endpoint on the 1/128 grid
        k = sum(a * 2 ** (5 - j) for j, a in enumerate(word))
        if k % 2 == 0:
            bins[k // 2] += 3.0 ** -6
        else:
            bins[k // 2] += 0.5 * 3.0 ** -6
            bins[k // 2 + 1] += 0.5 * 3.0 ** -6
    return math.sqrt(np.sum(bins ** 2) * 64)


def test_ref3_density_matches_direct_convolution(REF3, ref3_setup):
    family, mu = ref3_setup
    value = density_l2(family, np.zeros(3), REF3.leaf((1, 2)), mu, 2.0 ** -6, 2.0 ** -6)
    assert value == pytest.approx(_ref3_depth6_l2(), rel=1e-9)
    assert 1.0 <= value <= 2.0


def test_histogram_keeps_total_mass(REF3, ref3_setup):
    family, mu = ref3_setup
    nu = projected_measure(family.system(np.array([0.01, -0.02, 0.0]), REF3.leaf((2,))), mu, 2.0 ** -5)
    edges, masses = histogram(nu, 2.0 ** -5)
    assert masses.sum() == pytest.approx(nu.total_mass)
    assert nu.total_mass == pytest.approx(1.0)
    assert np.all(masses >= -1e-15)
    assert np.allclose(np.diff(edges), 2.0 ** -5)


def test_ref2_density_blows_up_under_refinement(REF2):
    family = MarstrandFamily(REF2, "translation", 0.05)
    mu = build_gibbs_measure(REF2, lambda_n(REF2, 1))
    leaf = REF2.leaf((1,))
    norms = [density_l2(family, np.zeros(2), leaf, mu, 3.0 ** -k, 3.0 ** -6) for k in (3, 4, 5)]
    for k, value in zip((3, 4, 5), norms):
        assert value == pytest.approx(1.5 ** (k / 2), rel=1e-6)
    assert norms[1] / norms[0] >= 1.2
    assert norms[2] / norms[1] >= 1.2


def test_bin_width_below_resolution(REF3, ref3_setup):
    family, mu = ref3_setup
    with pytest.raises(ValueError):
        density_l2(family, np.zeros(3), REF3.leaf((1,)), mu, 1e-9, 2.0 ** -4)


def test_weighted_quantile():
    values = np.array([3.0, 1.0, 2.0, 10.0])
    weights = np.array([0.25, 0.25, 0.25, 0.25])
    assert weighted_quantile(values, weights, 0.5) == 2.0
    assert weighted_quantile(values, weights, 0.95) == 10.0
    assert weighted_quantile(values, weights, 0.7) == 3.0


def test_select_marstrand_parameter_on_ref3(REF3, ref3_setup):
    family, mu = ref3_setup
    sel = select_marstrand_parameter(family, mu, xi=0.1, rho=2.0 ** -6, t_samples=3, leaf_samples=8, seed=5)
    assert sel.K1 <= 4
    assert sel.coverage >= 1 - 0.1 / 2
    assert len(sel.blocks) >= 1
    assert sel.t_star.shape == (3,)
    assert np.all(np.abs(sel.t_star) <= 0.1)


def test_selection_is_stable_in_leaf_samples(REF3, ref3_setup):
    family, mu = ref3_setup
    small = select_marstrand_parameter(family, mu, xi=0.1, rho=2.0 ** -6, t_samples=1, leaf_samples=6, seed=2)
    large = select_marstrand_parameter(family, mu, xi=0.1, rho=2.0 ** -6, t_samples=1, leaf_samples=12, seed=2)
    assert 0.5 <= large.K1 / small.K1 <= 2.0


def test_selection_threads_agree(REF3, ref3_setup):
    family, mu = ref3_setup
    one = select_marstrand_parameter(family, mu, xi=0.2, rho=2.0 ** -5, t_samples=3, leaf_samples=4, seed=9)
    two = select_marstrand_parameter(family, mu, xi=0.2, rho=2.0 ** -5, t_samples=3, leaf_samples=4, seed=9, threads=2)
    assert one.K1 == two.K1
    assert np.array_equal(one.t_star, two.t_star)


def test_selection_error_when_nothing_is_bounded(REF3, ref3_setup, monkeypatch):
    import marstrand.density as density

    family, mu = ref3_setup
    monkeypatch.setattr(density, "_leaf_norms", lambda *args: np.array([np.inf]))
    with pytest.raises(SelectionError):
        select_marstrand_parameter(family, mu, xi=0.1, rho=2.0 ** -4, t_samples=2, leaf_samples=1)


def test_pair_statistic_partition_agrees(REF3, ref3_setup):
    family, mu = ref3_setup
    system = family.system(np.array([0.01, 0.02, -0.03]), REF3.leaf((1,)))
    direct, split = pair_statistic(system, mu, 4, 0.05)
    assert direct == split
    assert direct > 0


def test_pair_statistic_bounded_across_depths(REF3, ref3_setup):
    family, mu = ref3_setup
    system = family.system(np.zeros(3), REF3.leaf((2,)))
    values = [pair_statistic(system, mu, depth, 0.1)[0] for depth in (3, 4, 5)]
    assert max(values) <= 2 * min(values)
