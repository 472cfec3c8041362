import pytest

from geometry.dispersion import NEVER, RecurrentPiece, dispersion_finite_difference_check, dispersion_survey
from model.perturbation import block_scales, make_perturbation_family

RHO = 2.0 ** -6
LEAF = (1, 2, 3)
WORD = (1, 1, 1, 1, 1, 1)


@pytest.fixture(scope="module")
def family(REF3):
    return make_perturbation_family(REF3, block_scales(RHO, 2, 1.0, 0.5), RHO, c2=1.5, c3=0.05)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_hit_at_step_j(REF3, family, j):
    leaf = REF3.leaf(LEAF)
    block = family.block_of(LEAF + WORD[:j], WORD[j:])
    result = dispersion_finite_difference_check(REF3, family, leaf, WORD, block, 2, 3)
    assert result.hits == [j]
    assert result.case == j
    assert result.derivative == pytest.approx(0.5 ** j * family.amplitude, rel=1e-6)
    assert result.within


def test_never_hit_block_does_not_move_the_piece(REF3, family):
    block = family.index_of((2, 2, 2), (1, 1, 1))
    result = dispersion_finite_difference_check(REF3, family, REF3.leaf(LEAF), WORD, block, 2, 3)
    assert result.case == NEVER
    assert abs(result.derivative) < 1e-8 * family.amplitude
    assert result.within


def test_recurrent_piece_is_rejected(REF3, family):
    with pytest.raises(RecurrentPiece):
        dispersion_finite_difference_check(REF3, family, REF3.leaf(LEAF), (1, 2, 3, 1, 2, 3), 0, 2, 3)


def test_survey_bands(REF3, family):
    survey = dispersion_survey(REF3, family, RHO, n_per_case=10, seed=4)
    for case in (0, 1, 2, NEVER):
        assert len(survey.results[case]) == 10
        assert survey.fraction_within(case) == 1.0
    assert set(survey.to_dict()) == {"0", "1", "2", NEVER}


@pytest.mark.slow
def test_survey_bands_at_full_size(REF3, family):
    survey = dispersion_survey(REF3, family, RHO, n_per_case=100, seed=11)
    for case in (0, 1, 2, NEVER):
        assert len(survey.results[case]) == 100
        assert survey.fraction_within(case) == 1.0
