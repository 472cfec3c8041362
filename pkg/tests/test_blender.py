import numpy as np
import pytest

from geometry.blender import ChaseFailed, Curve, blender_curve_chase, itinerary_of
from model.perturbation import block_scales, make_perturbation_family
from stacking.candidate import single_block_K

RHO = 2.0 ** -6


@pytest.fixture(scope="module")
def ref3_K(REF3):
    return single_block_K(RHO, [(0.05, 0.95)], [(1,), (2,), (3,)], REF3)


def test_vertical_curve_chase(REF3, ref3_K):
    result = blender_curve_chase(REF3, None, Curve.line(0.3, 0.0), (2,), ref3_K, max_depth=20, max_len=1)
    assert result.depth == 20
    assert result.itinerary[0] == (1,)
    assert result.crossings[:2] == pytest.approx([0.3, 0.6])
    assert result.diameter <= 2.0 ** -20
    assert result.limit_point[1] == pytest.approx(0.3, abs=2.0 ** -20)
    assert itinerary_of(REF3, result.limit_point, 10) == result.letters[:10]


def test_tilted_curves_chase_and_flatten(REF3, ref3_K):
    rng = np.random.default_rng(0)
    for w0 in rng.uniform(0.1, 0.9, 10):
        result = blender_curve_chase(REF3, None, Curve.line(w0, 0.05), (3,), ref3_K, max_depth=20, max_len=1)
        assert result.depth == 20
        assert result.diameter <= 2.0 ** -20
        # each pulled-back letter halves the slope
        for before, after in zip(result.slopes, result.slopes[1:]):
            assert after <= 0.5 * before + 1e-12


def test_chase_under_small_perturbation(REF3, ref3_K):
    family = make_perturbation_family(REF3, block_scales(RHO, 2, 1.0, 0.5), RHO, c2=1.5, c3=0.05)
    gamma = family.perturbation(np.random.default_rng(1).uniform(-1, 1, family.n_params))
    result = blender_curve_chase(REF3, gamma, Curve.line(0.4, 0.02, nodes=17), (1,), ref3_K, max_depth=6, max_len=1, nodes=17)
    assert result.depth == 6


def test_gap_curve_fails_at_first_step(REF2):
    K = single_block_K(3.0 ** -4, [(0.05, 0.95)], [(1,), (2,)], REF2)
    with pytest.raises(ChaseFailed) as info:
        blender_curve_chase(REF2, None, Curve.line(0.5, 0.0), (1,), K, max_depth=5, max_len=3)
    assert info.value.depth == 1


@pytest.mark.slow
@pytest.mark.parametrize("perturbed", [False, True])
def test_fifty_curves_chase_to_depth_twenty(REF3, ref3_K, perturbed):
    gamma = None
    if perturbed:
        family = make_perturbation_family(REF3, block_scales(RHO, 2, 1.0, 0.5), RHO, c2=1.5, c3=0.05)
        gamma = family.perturbation(np.random.default_rng(2).uniform(-1, 1, family.n_params))
    rng = np.random.default_rng(3)
    for w0, slope in zip(rng.uniform(0.1, 0.9, 50), rng.uniform(-0.05, 0.05, 50)):
        result = blender_curve_chase(REF3, gamma, Curve.line(w0, slope, nodes=17), (2,), ref3_K, max_depth=20, max_len=1, nodes=17)
        assert result.depth == 20
        assert result.diameter <= 2.0 ** -20


@pytest.mark.slow
@pytest.mark.parametrize("w0", [0.4, 0.5, 0.6])
def test_gap_curves_fail_early(REF2, w0):
    K = single_block_K(3.0 ** -4, [(0.05, 0.95)], [(1,), (2,)], REF2)
    with pytest.raises(ChaseFailed) as info:
        blender_curve_chase(REF2, None, Curve.line(w0, 0.05), (1,), K, max_depth=20, max_len=3)
    assert info.value.depth <= 2
