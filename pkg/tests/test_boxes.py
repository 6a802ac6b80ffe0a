import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symblender.boxes import Box, BoxSet, affine_box_image, hausdorff, hausdorff_interval, interval_set

coord = st.floats(-5, 5, allow_nan=False)


def test_box_parse_and_errors():
    b = Box.parse("0,1")
    assert b == Box([0.0], [1.0])
    assert Box.parse("0,1;2,3") == Box([0.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValueError):
        Box.parse("0,1,2")
    with pytest.raises(ValueError):
        Box([1.0], [0.0])


def test_depth_and_containment():
    b = Box([0.0], [1.0])
    assert b.depth([0.25]) == 0.25
    assert b.depth([1.5]) == -0.5
    assert b.contains([1.0]) and not b.contains([1.0], open=True)
    assert b.contains_box(Box([0.2], [0.8]), open=True)
    assert b.intersect(Box([2.0], [3.0])) is None


def test_affine_image_example():
    img = affine_box_image(0.6, -0.05, Box([0.0], [1.0]))
    assert img.lo[0] == pytest.approx(-0.05) and img.hi[0] == pytest.approx(0.55)
    assert affine_box_image(-2.0, 1.0, Box([0.0], [1.0])) == Box([-1.0], [1.0])


def test_cover_example_by_subdivision():
    # closure of (0,1) inside (-0.05,0.55) u (0.45,1.05): every dyadic cell sits in one member
    members = [Box([-0.05], [0.55]), Box([0.45], [1.05])]
    cells = np.linspace(0, 1, 1025)
    for a, b in zip(cells[:-1], cells[1:]):
        assert any(m.contains_box(Box([a], [b]), open=True) for m in members)


def test_boxset_hausdorff_and_csv():
    A = interval_set([(0, 1)], 10)
    assert hausdorff(A, A) == 0
    B = interval_set([(0, 0.5), (0.75, 1)], 10)
    lo, hi = hausdorff_interval(A, B)
    assert lo <= 0.125 + 1e-12 <= hi + 1e-12
    C = BoxSet.from_csv(B.to_csv(), 10)
    assert hausdorff(B, C) == 0
    with pytest.raises(ValueError):
        A.union(BoxSet([[0, 0]], [[1, 1]]))


def test_boxset_union_intersection():
    A = interval_set([(0, 1)], 10)
    B = interval_set([(0.5, 2)], 10)
    assert A.union(B).bounding_box() == Box([0.0], [2.0])
    assert A.intersection(B).bounding_box() == Box([0.5], [1.0])
    assert A.intersection(interval_set([(3, 4)], 10)) is None


@settings(max_examples=50)
@given(st.lists(st.tuples(coord, st.floats(0, 1)), min_size=1, max_size=5),
       st.lists(st.tuples(coord, st.floats(0, 1)), min_size=1, max_size=5))
def test_hausdorff_bounds_bracket_sampled_value(a, b):
    A = interval_set([(x, x + w) for x, w in a], 8)
    B = interval_set([(x, x + w) for x, w in b], 8)
    lo, hi = hausdorff_interval(A, B)
    # oracle: dense sampling of both unions
    def pts(S):
        return np.concatenate([np.linspace(l, h, 200) for l, h in zip(S.lo[:, 0], S.hi[:, 0])])
    pa, pb = pts(A), pts(B)
    def dist(p, S):
        return np.min(np.maximum(0, np.maximum(S.lo[:, 0][None] - p[:, None], p[:, None] - S.hi[:, 0][None])), axis=1)
    sampled = max(dist(pa, B).max(), dist(pb, A).max())
    step = max(np.max(A.hi - A.lo), np.max(B.hi - B.lo)) / 199
    assert lo - 1e-12 <= sampled + step
    assert sampled <= hi + 1e-12
    assert hausdorff_interval(B, A) == pytest.approx((lo, hi))
