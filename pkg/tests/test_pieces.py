import numpy as np
import pytest

from model.intervals import Interval
from model.pieces import (
    cylinders_at_scale,
    leaf_blocks_at_scale,
    piece_interval,
    pieces_at_scale,
    stable_diameters,
    submultiplicativity_constant,
    wall_step,
    wall_step_inverse,
)
from symbolic.subshift import Word


def test_piece_interval_one_letter(REF3):
    iv = piece_interval(REF3, REF3.leaf((1,)), Word.forward((2,)))
    assert tuple(iv) == pytest.approx((0.25, 0.75))


def test_piece_interval_matches_cylinder_box(REF3b):
    iv = piece_interval(REF3b, REF3b.leaf((2,)), Word.forward((3, 1, 2)))
    # ψ3∘ψ1∘ψ2([0,1]) by hand
    lo = 0.55 + 0.4 * (0.0 + 0.5 * 0.28)
    assert iv.lower == pytest.approx(lo)
    assert iv.length == pytest.approx(0.4 * 0.5 * 0.5)


def test_stable_diameters(REF3, REF3b):
    for n in range(1, 5):
        _, D = stable_diameters(REF3, Word.forward((1,) * n))
        assert D == pytest.approx(2.0 ** -n)
    d_s, D = stable_diameters(REF3b, Word.forward((3, 3)))
    assert D == pytest.approx(0.16)
    assert max(d_s) - min(d_s) < 1e-15
    assert stable_diameters(REF3, Word.forward(())) == ([1.0], 1.0)


def test_cylinders_at_scale_uniform(REF3):
    words = cylinders_at_scale(REF3, 2.0 ** -5, 1.0)
    assert len(words) == 243
    assert {len(w) for w in words} == {5}
    assert cylinders_at_scale(REF3, 1.0, 1.0) == [Word.forward(())]


def test_cylinders_at_scale_non_conformal(REF3b):
    words = {w.letters for w in cylinders_at_scale(REF3b, 0.16, 1.01)}
    assert (3, 3) in words
    for w in words:
        _, D = stable_diameters(REF3b, Word.forward(w))
        assert D <= 1.01 * 0.16 + 1e-15
        _, parent = stable_diameters(REF3b, Word.forward(w[:-1]))
        assert parent > 1.01 * 0.16


def test_cylinders_band_with_default_c1(REF3b):
    rho = 2.0 ** -6
    c1 = REF3b.default_c1()
    for w in cylinders_at_scale(REF3b, rho, c1):
        _, D = stable_diameters(REF3b, w)
        assert rho / c1 <= D <= c1 * rho


def test_pieces_at_scale_count(REF3):
    pieces = pieces_at_scale(REF3, REF3.leaf((1, 2)), 2.0 ** -4)
    assert len(pieces) == 81
    assert all(p.interval.length == pytest.approx(1 / 16) for p in pieces)
    assert all(0.0 <= p.interval.lower and p.interval.upper <= 1.0 for p in pieces)


def test_leaf_blocks_partition_u(REF3):
    blocks = leaf_blocks_at_scale(REF3, 2.0 ** -4)
    assert len(blocks) == 27
    widths = sum(REF3.leaf_u_interval(b).length for b in blocks)
    assert widths == pytest.approx(1.0)


def test_submultiplicativity(REF3, REF3b):
    assert submultiplicativity_constant(REF3, 8) >= 0.99
    assert submultiplicativity_constant(REF3b, 6) >= 0.99
    bent = REF3.with_bend(0.05)
    c = submultiplicativity_constant(bent, 6)
    assert 0.5 < c < 1.0


def test_wall_step_inverse_round_trip(REF3):
    bent = REF3.with_bend(0.05)
    for b in (1, 2, 3):
        for x in np.linspace(0, 1, 7):
            y = float(wall_step(bent, b, x))
            assert wall_step_inverse(bent, b, y) == pytest.approx(x, abs=1e-12)


def test_sheared_wall_step_round_trip(REF3):
    sheared = REF3.with_shear(0.1)
    for b in (1, 2, 3):
        for x in (0.0, 0.3, 0.8):
            y = float(wall_step(sheared, b, x, (1, 1)))
            assert wall_step_inverse(sheared, b, y, (1, 1)) == pytest.approx(x, abs=1e-10)


def test_piece_interval_rejects_bad_junction(REF2):
    from model.horseshoe import HorseshoeModel
    from symbolic.subshift import TransitionMatrix

    golden = HorseshoeModel("golden", TransitionMatrix.from_rows([[0, 1], [1, 1]]), REF2.symbols)
    with pytest.raises(ValueError):
        piece_interval(golden, golden.leaf((2, 1)), Word.forward((1,)))
    assert isinstance(piece_interval(golden, golden.leaf((2, 1)), Word.forward((2,))), Interval)
