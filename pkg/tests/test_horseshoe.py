import numpy as np
import pytest

from model.horseshoe import (
    BranchError,
    HorseshoeModel,
    ModelError,
    OutsideDomain,
    SymbolData,
    apply,
    apply_inverse,
    cylinder_box,
    leaf_distance,
)
from model.reference import PRESETS, model_from_spec
from config import ModelSpec
from symbolic.subshift import TransitionMatrix, Word


def test_apply_reference_point(REF3):
    image = apply(REF3, None, (0.5, 0.2, 0.8))
    assert image == pytest.approx([0.5, 0.35, 0.575])


def test_apply_outside_domain(REF3):
    with pytest.raises(OutsideDomain):
        apply(REF3, None, (-0.1, 0.5, 0.5))


def test_apply_inverse_reference_point(REF3):
    pre = apply_inverse(REF3, None, (0.5, 0.35, 0.575), 2)
    assert pre == pytest.approx([0.5, 0.2, 0.8])


def test_apply_inverse_wrong_branch(REF3):
    with pytest.raises(BranchError):
        apply_inverse(REF3, None, (0.5, 0.9, 0.1), 1)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip_on_presets(name):
    model = PRESETS[name]()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        i = int(rng.integers(1, model.n_symbols + 1))
        a, b = model.symbols[i - 1].u_interval
        p = np.array([rng.uniform(a, b), rng.uniform(), rng.uniform()])
        q = apply(model, None, p)
        assert np.max(np.abs(apply_inverse(model, None, q, i) - p)) < 1e-10


def test_cylinder_boxes(REF3):
    box = cylinder_box(REF3, Word.forward((2,)))
    assert tuple(box.w) == pytest.approx((0.25, 0.75))
    assert tuple(box.s) == pytest.approx((0.375, 0.625))
    box = cylinder_box(REF3, Word.forward((1, 2)))
    assert tuple(box.w) == pytest.approx((0.125, 0.375))
    box = cylinder_box(REF3, Word.backward((2,)))
    assert tuple(box.u) == pytest.approx((1 / 3, 2 / 3))
    assert tuple(box.w) == (0.0, 1.0)


def test_leaf_distance(REF3):
    l1 = REF3.leaf((1, 1))
    l2 = REF3.leaf((2, 1))
    assert leaf_distance(REF3, l1, l2) == pytest.approx(1 / 9)
    assert leaf_distance(REF3, l1, l1) == 0.0
    with pytest.raises(ValueError):
        leaf_distance(REF3, l1, REF3.leaf((1, 2)))


def test_leaf_distance_refines(REF3):
    shallow = (REF3.leaf((3, 1, 1)), REF3.leaf((1, 2, 1)))
    deep = (REF3.leaf((2, 2, 2, 3, 1, 1)), REF3.leaf((1, 1, 1, 1, 2, 1)))
    d0 = leaf_distance(REF3, *shallow)
    d1 = leaf_distance(REF3, *deep)
    assert abs(d0 - d1) <= shallow[0].error_bound + shallow[1].error_bound


def test_leaf_error_bound_decays(REF3):
    for m in range(1, 6):
        assert REF3.leaf((1,) * m).error_bound == pytest.approx(0.5 * 3.0 ** -m)


def test_leaf_of_point_recovers_coding(REF3):
    leaf = REF3.leaf((3, 1, 2))
    u = REF3.leaf_u_interval(leaf.letters).midpoint
    assert REF3.leaf_of_point(u, 3).letters == (3, 1, 2)


def test_model_rejects_rate_inversion():
    sd = SymbolData((0.0, 0.5), 2.0, 0.2, 0.3, 0.0, 0.0)
    with pytest.raises(ModelError):
        HorseshoeModel("bad", TransitionMatrix.full(2), (sd, SymbolData((0.5, 1.0), 2.0, 0.5, 0.25, 0.5, 0.5)))


def test_model_rejects_overlapping_s_images():
    a = SymbolData((0.0, 0.5), 2.0, 0.5, 0.25, 0.0, 0.0)
    b = SymbolData((0.5, 1.0), 2.0, 0.5, 0.25, 0.5, 0.2)
    with pytest.raises(ModelError):
        HorseshoeModel("bad", TransitionMatrix.full(2), (a, b))


def test_bend_keeps_model_valid(REF3):
    bent = REF3.with_bend(0.01)
    assert not bent.is_affine
    assert bent.symbols[0].bend == 0.01 and bent.symbols[1].bend == -0.01


def test_explicit_model_from_spec():
    spec = ModelSpec.model_validate({
        "transition": [[1, 1], [1, 1]],
        "symbols": [
            {"u_interval": [0, 0.5], "rate_ws": 0.4, "rate_ss": 0.2, "t": 0.0, "q": 0.0},
            {"u_interval": [0.5, 1], "rate_ws": 0.4, "rate_ss": 0.2, "t": 0.6, "q": 0.5},
        ],
    })
    model = model_from_spec(spec)
    assert model.symbols[0].rate_u == pytest.approx(2.0)
    assert model.is_conformal
