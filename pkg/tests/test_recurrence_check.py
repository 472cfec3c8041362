import numpy as np
import pytest

from geometry.recurrence_check import (
    Counterexample,
    GridSpec,
    RecurrenceCertificate,
    Witness,
    find_witness,
    robustness_check,
    verify_recurrent_compact,
)
from model.intervals import Interval
from model.perturbation import block_scales, make_perturbation_family
from stacking.candidate import single_block_K

RHO = 2.0 ** -6
BLOCKS3 = [(1,), (2,), (3,)]


@pytest.fixture(scope="module")
def ref3_K(REF3):
    return single_block_K(RHO, [(0.05, 0.95)], BLOCKS3, REF3)


@pytest.fixture(scope="module")
def certificate(REF3, ref3_K):
    return verify_recurrent_compact(REF3, None, ref3_K, GridSpec(400), max_len=1)


def test_grid_cells():
    cells = GridSpec(4).cells_of([Interval(0.0, 1.0), Interval(2.0, 2.5)])
    assert len(cells) == 8
    assert tuple(cells[1]) == pytest.approx((0.25, 0.5))
    assert cells[-1].upper == 2.5
    with pytest.raises(ValueError):
        GridSpec(0)


def test_ref3_is_certified(certificate):
    assert isinstance(certificate, RecurrenceCertificate)
    assert len(certificate.witnesses) == 3 * 400
    assert certificate.max_word_length == 1
    assert certificate.min_margin >= 0.02
    at_03 = next(w for w in certificate.witnesses if w.block == (2,) and w.cell.contains(0.3))
    assert at_03.word == (1,)
    assert certificate.to_dict()["status"] == "certified"


def test_certificate_recheck_is_deterministic(REF3, certificate):
    margins = np.array([w.margin for w in certificate.witnesses])
    assert np.allclose(certificate.recheck(REF3), margins, rtol=0.0, atol=1e-12)


def test_threads_give_same_certificate(REF3, ref3_K, certificate):
    threaded = verify_recurrent_compact(REF3, None, ref3_K, GridSpec(400), max_len=1, threads=2)
    assert threaded.to_dict() == certificate.to_dict()


def test_full_interval_fails_at_zero(REF3):
    K = single_block_K(RHO, [(0.0, 1.0)], BLOCKS3, REF3)
    result = verify_recurrent_compact(REF3, None, K, GridSpec(100), max_len=2)
    assert isinstance(result, Counterexample)
    assert result.block == (1,)
    assert result.cell.lower == 0.0


def test_ref2_gap_is_a_counterexample(REF2):
    K = single_block_K(3.0 ** -4, [(0.05, 0.95)], [(1,), (2,)], REF2)
    result = verify_recurrent_compact(REF2, None, K, GridSpec(200), max_len=3)
    assert isinstance(result, Counterexample)
    assert result.block == (1,)
    assert 0.35 < result.cell.midpoint < 0.65
    gap_cells = [c for c in GridSpec(200).cells_of(K.intervals[(1,)]) if 0.35 < c.lower and c.upper < 0.65]
    uncovered = {(b, c) for b, c in result.uncovered}
    assert all(((1,), c) in uncovered for c in gap_cells)
    assert result.to_dict()["n_uncovered"] == len(result.uncovered)


def test_robustness_survives_small_wall_jitter(REF3, certificate):
    report = robustness_check(REF3, certificate, [0.0, 1e-3], samples=4, mode="jitter", seed=2)
    assert report.rows[0].min_margin == pytest.approx(certificate.min_margin, abs=1e-12)
    assert all(row.survived for row in report.rows)
    assert report.breaking_delta is None
    # margins degrade by at most the jitter times the expansion
    assert report.rows[1].min_margin >= certificate.min_margin - 2 * 2e-3 - 1e-12


def test_zero_margin_witness_breaks(REF3, ref3_K):
    witness = Witness((1,), Interval(0.025, 0.025), (1,), 0.0, 0.0)
    synthetic = RecurrenceCertificate(ref3_K, GridSpec(1), [witness])
    report = robustness_check(REF3, synthetic, [0.0, 1e-4, 1e-3], samples=16, mode="jitter", seed=0)
    assert report.breaking_delta == 0.0
    assert not any(row.survived for row in report.rows)


@pytest.fixture(scope="module")
def ref3_family(REF3):
    return make_perturbation_family(REF3, block_scales(RHO, 2, 1.0, 0.5), RHO, c2=1.5, c3=0.05)


def test_robustness_under_sampled_family_perturbations(REF3, certificate, ref3_family):
    report = robustness_check(REF3, certificate, [0.0, 0.5, 1.0], samples=4, family=ref3_family, seed=3)
    assert report.rows[0].min_margin == pytest.approx(certificate.min_margin, abs=1e-12)
    assert report.breaking_delta is None
    # one-letter witnesses expand a shift of at most delta * c3 * rho by 2
    for row in report.rows[1:]:
        assert row.min_margin >= certificate.min_margin - 2 * row.delta * ref3_family.amplitude - 1e-12


def test_family_robustness_needs_a_family_and_a_unit_delta(REF3, certificate, ref3_family):
    with pytest.raises(ValueError):
        robustness_check(REF3, certificate, [1e-3])
    with pytest.raises(ValueError):
        robustness_check(REF3, certificate, [1.5], family=ref3_family)
    with pytest.raises(ValueError):
        robustness_check(REF3, certificate, [1e-3], family=ref3_family, mode="sine")


def test_witness_rules(REF3, ref3_K):
    cell = Interval(0.47, 0.47)
    # (1,) lands at 0.94, just inside K; (2,) lands at 0.44
    first = find_witness(REF3, None, ref3_K, (1,), cell, max_len=1, rule="first")
    widest = find_witness(REF3, None, ref3_K, (1,), cell, max_len=1)
    assert first.word == (1,)
    assert first.margin == pytest.approx(0.01, abs=1e-9)
    assert widest.word == (2,)
    assert widest.margin == pytest.approx(0.39, abs=1e-9)
    with pytest.raises(ValueError):
        find_witness(REF3, None, ref3_K, (1,), cell, max_len=1, rule="last")


def test_first_rule_certificate_keeps_lexicographic_witnesses(REF3, ref3_K, certificate):
    first = verify_recurrent_compact(REF3, None, ref3_K, GridSpec(400), max_len=1, rule="first")
    assert len(first.witnesses) == len(certificate.witnesses)
    assert all(a.word <= b.word for a, b in zip(first.witnesses, certificate.witnesses))
    assert 0.0 < first.min_margin <= certificate.min_margin
