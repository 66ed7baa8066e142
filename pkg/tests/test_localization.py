import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from reactmap.localization import BoundingBox, connected_components, extract_box, iou

masks = hnp.arrays(
    np.uint8,
    hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=10),
    elements=st.integers(0, 1),
)


def _components_oracle(mask):
    """Plain stack-based flood fill over the 8-neighborhood."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                stack = [(r, c)]
                seen[r, c] = True
                pixels = []
                while stack:
                    y, x = stack.pop()
                    pixels.append((y, x))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = y + dy, x + dx
                            if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                comps.append(sorted(pixels))
    return comps


def test_box_rejects_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        BoundingBox(2, 0, 2, 3)


def test_box_area_and_scaling():
    b = BoundingBox(1, 2, 4, 5)
    assert b.area == 9
    assert b.scaled(2) == BoundingBox(2, 4, 8, 10)


@given(mask=masks)
@settings(max_examples=80, deadline=None)
def test_components_match_flood_fill_oracle(mask):
    got = [sorted(map(tuple, comp)) for comp in connected_components(mask)]
    assert got == _components_oracle(mask)


def test_components_ordered_by_first_scan_pixel():
    mask = np.zeros((5, 5), dtype=np.uint8)
    mask[4, 0] = 1  # later in scan order
    mask[0, 3] = 1  # earlier
    comps = connected_components(mask)
    assert [tuple(c[0]) for c in comps] == [(0, 3), (4, 0)]


def test_diagonal_pixels_are_one_component():
    mask = np.eye(4, dtype=np.uint8)
    assert len(connected_components(mask)) == 1


def test_extract_box_largest_component():
    m = np.zeros((6, 6))
    m[0:2, 0:2] = 1.0  # 4 pixels
    m[4:6, 3:6] = 1.0  # 6 pixels -> wins
    assert extract_box(m, 0.5) == BoundingBox(3, 4, 6, 6)


def test_extract_box_union_mode():
    m = np.zeros((6, 6))
    m[0:2, 0:2] = 1.0
    m[4:6, 3:6] = 1.0
    assert extract_box(m, 0.5, box_mode="union") == BoundingBox(0, 0, 6, 6)


def test_extract_box_size_tie_keeps_scan_order():
    m = np.zeros((4, 8))
    m[0, 6:8] = 1.0  # earlier in scan order, 2 pixels
    m[3, 0:2] = 1.0  # same size
    assert extract_box(m, 0.5) == BoundingBox(6, 0, 8, 1)


def test_extract_box_empty_returns_none():
    assert extract_box(np.zeros((3, 3)), 0.5) is None


def test_extract_box_tau_zero_covers_grid(rng):
    m = rng.random((5, 7))
    assert extract_box(m, 0.0, box_mode="union") == BoundingBox(0, 0, 7, 5)


def test_extract_box_validates_inputs():
    with pytest.raises(ValueError, match="tau"):
        extract_box(np.zeros((2, 2)), 1.5)
    with pytest.raises(ValueError, match="box_mode"):
        extract_box(np.ones((2, 2)), 0.5, box_mode="best")


@given(mask=masks, tau1=st.floats(0.0, 1.0), tau2=st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_threshold_mask_shrinks_with_tau(mask, tau1, tau2):
    lo, hi = sorted((tau1, tau2))
    m = mask.astype(np.float64)
    assert not ((m >= hi) & ~(m >= lo)).any()


def test_iou_hand_case():
    a = BoundingBox(0, 0, 2, 2)
    b = BoundingBox(1, 0, 3, 2)
    assert iou(a, b) == pytest.approx(2 / 6)


def test_iou_identity_and_disjoint():
    a = BoundingBox(0, 0, 3, 3)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(10, 10, 12, 12)) == 0.0


@given(
    coords=st.tuples(*[st.integers(0, 20) for _ in range(8)]),
)
@settings(max_examples=100, deadline=None)
def test_iou_symmetric_and_bounded(coords):
    ax0, ay0, aw, ah, bx0, by0, bw, bh = coords
    a = BoundingBox(ax0, ay0, ax0 + aw + 1, ay0 + ah + 1)
    b = BoundingBox(bx0, by0, bx0 + bw + 1, by0 + bh + 1)
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
