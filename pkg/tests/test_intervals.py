import pytest

from model.intervals import Interval, dilate, endpoints, erode, measure, merge, union_depth


def test_merge_joins_touching():
    merged = merge([Interval(0.5, 0.7), Interval(0.0, 0.2), Interval(0.2, 0.3)])
    assert merged == [Interval(0.0, 0.3), Interval(0.5, 0.7)]


def test_erode_example():
    assert erode([Interval(0.2, 0.5)], 0.05) == [Interval(0.25, 0.45)]
    assert erode([Interval(0.2, 0.5)], 0.0) == [Interval(0.2, 0.5)]
    assert erode([Interval(0.2, 0.25)], 0.1) == []


def test_erode_then_dilate_is_inside():
    K = [Interval(0.1, 0.3), Interval(0.35, 0.9)]
    opened = dilate(erode(K, 0.04), 0.04)
    assert measure(opened) <= measure(K) + 1e-12
    for iv in opened:
        assert any(k.lower - 1e-12 <= iv.lower and iv.upper <= k.upper + 1e-12 for k in merge(K))


def test_union_depth_sign():
    K = [Interval(0.0, 0.4), Interval(0.6, 1.0)]
    assert union_depth(K, 0.2) == pytest.approx(0.2)
    assert union_depth(K, 0.5) == pytest.approx(-0.1)
    assert list(endpoints(K)) == [0.0, 0.4, 0.6, 1.0]


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
