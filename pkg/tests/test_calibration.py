import numpy as np
import pytest

from reactmap.calibration import calibrate, final_map
from reactmap.em import LatentMaps
from reactmap.maps import min_max_normalize


def _latents(z_fg):
    z_fg = np.asarray(z_fg, dtype=np.float64)
    return LatentMaps(z_fg=z_fg, z_bg=1.0 - z_fg)


def test_calibrate_picks_higher_side_over_mask():
    z = _latents([[0.9, 0.1], [0.1, 0.1]])
    mask = np.array([[1, 0], [0, 0]], dtype=np.uint8)
    chose_fg, zbar_fg, zbar_bg, cal = calibrate(z, mask)
    assert chose_fg
    assert zbar_fg == pytest.approx(0.9)
    assert zbar_bg == pytest.approx(0.1)
    np.testing.assert_array_equal(cal, z.z_fg)


def test_calibrate_flips_when_polarity_inverted():
    # foreground ended up on the z_bg side
    z = _latents([[0.05, 0.9], [0.9, 0.9]])
    mask = np.array([[1, 0], [0, 0]], dtype=np.uint8)
    chose_fg, _, _, cal = calibrate(z, mask)
    assert not chose_fg
    np.testing.assert_array_equal(cal, z.z_bg)


def test_calibrate_tie_goes_to_fg():
    z = _latents(np.full((2, 2), 0.5))
    chose_fg, zbar_fg, zbar_bg, cal = calibrate(z, np.ones((2, 2), dtype=np.uint8))
    assert chose_fg
    assert zbar_fg == zbar_bg
    np.testing.assert_array_equal(cal, z.z_fg)


def test_calibrate_mean_matches_masked_average(rng):
    zf = rng.random((5, 5))
    mask = (rng.random((5, 5)) > 0.4).astype(np.uint8)
    mask[0, 0] = 1
    _, zbar_fg, zbar_bg, _ = calibrate(_latents(zf), mask)
    assert zbar_fg == pytest.approx(zf[mask == 1].mean())
    assert zbar_bg == pytest.approx((1 - zf)[mask == 1].mean())


def test_calibrate_rejects_empty_mask():
    with pytest.raises(ValueError, match="empty"):
        calibrate(_latents(np.zeros((2, 2))), np.zeros((2, 2), dtype=np.uint8))


def test_final_map_is_normalized_sum_of_normalized_inputs(rng):
    cal = rng.random((4, 4))
    cam = rng.standard_normal((4, 4))
    out = final_map(cal, cam)
    expected = min_max_normalize(min_max_normalize(cal) + min_max_normalize(cam))
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert out.min() == 0.0 and out.max() == 1.0


def test_final_map_suppresses_stray_reactivation():
    """A background pixel re-activated by clustering but dark in the class
    map ends up below a pixel supported by both maps."""
    cal = np.array([[1.0, 1.0], [0.0, 0.0]])  # clustering lit pixel (0,1) too
    cam = np.array([[5.0, 0.0], [0.0, 0.0]])  # class evidence only at (0,0)
    out = final_map(cal, cam)
    assert out[0, 0] > out[0, 1]
