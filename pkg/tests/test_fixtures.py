import numpy as np
import pytest

from reactmap.cam import class_scores, top_k_classes
from reactmap.em import e_step, MixtureParams
from reactmap.fixtures import (
    DEFAULT_SUITE_SIZE,
    FixtureSpec,
    default_suite_spec,
    generate,
    oracle_cluster,
)
from reactmap.localization import BoundingBox


def test_spec_validation():
    with pytest.raises(ValueError, match="part_frac"):
        FixtureSpec(part_frac=0.0)
    with pytest.raises(ValueError, match="shape"):
        FixtureSpec(shape="blob")
    with pytest.raises(ValueError, match="dim"):
        FixtureSpec(dim=2)


def test_default_suite_spec_overrides():
    spec = default_suite_spec(num_classes=3)
    assert spec.num_classes == 3
    assert spec.dim == 16  # untouched defaults
    assert DEFAULT_SUITE_SIZE == 200


def test_generate_is_bit_reproducible(small_spec):
    a, head_a = generate(small_spec, 8)
    b, head_b = generate(small_spec, 8)
    np.testing.assert_array_equal(head_a.weights, head_b.weights)
    for fa, fb in zip(a, b):
        assert fa.image_id == fb.image_id
        np.testing.assert_array_equal(fa.features, fb.features)
        np.testing.assert_array_equal(fa.gt_mask, fb.gt_mask)
        assert fa.gt_box == fb.gt_box


def test_generate_round_robin_labels(small_spec):
    fixtures, _ = generate(small_spec, 10)
    assert [f.label for f in fixtures] == [i % small_spec.num_classes for i in range(10)]


def test_gt_box_is_tight_on_mask(small_suite):
    for f in small_suite[0]:
        rows, cols = np.nonzero(f.gt_mask)
        assert f.gt_box == BoundingBox(
            x0=int(cols.min()),
            y0=int(rows.min()),
            x1=int(cols.max()) + 1,
            y1=int(rows.max()) + 1,
        )
        assert 0 < f.gt_mask.sum() < f.gt_mask.size  # never empty, never full


def test_predictions_come_from_shared_head(small_suite):
    fixtures, head = small_suite
    for f in fixtures[:6]:
        scores = class_scores(f.features, head)
        assert list(f.predictions) == top_k_classes(scores, len(f.predictions))


def test_predictions_are_valid_rankings(small_suite):
    fixtures, head = small_suite
    for f in fixtures:
        assert len(set(f.predictions)) == len(f.predictions)
        assert all(0 <= c < head.num_classes for c in f.predictions)


def test_class_triples_are_orthonormal():
    from reactmap.fixtures import _unit_prototypes

    rng = np.random.default_rng(0)
    protos = _unit_prototypes(rng, num_classes=4, dim=12)
    assert protos.shape == (12, 12)
    for c in range(4):
        triple = protos[3 * c : 3 * c + 3]
        np.testing.assert_allclose(triple @ triple.T, np.eye(3), atol=1e-10)
    # cross-class separation bound
    for i in range(12):
        for j in range(12):
            if i // 3 != j // 3:
                assert abs(protos[i] @ protos[j]) <= 0.5 + 1e-9


def test_ellipse_shape_supported():
    spec = default_suite_spec(num_classes=2, dim=8, shape="ellipse", seed=3)
    fixtures, _ = generate(spec, 4)
    for f in fixtures:
        assert f.gt_mask.sum() > 0


def test_oracle_cluster_separates_truth(small_suite):
    """The cheating estimator must nail the fixtures by construction."""
    fixtures, _ = small_suite
    for f in fixtures[:6]:
        mean_fg, mean_bg, z = oracle_cluster(f.features, f.gt_mask)
        fg = f.gt_mask.astype(bool)
        assert z.z_fg[fg].mean() > 0.9
        assert z.z_fg[~fg].mean() < 0.1


def test_oracle_cluster_matches_e_step(small_suite):
    """With equal weights and the exact means, the direct posterior and the
    EM E-step are the same formula."""
    f = small_suite[0][0]
    mean_fg, mean_bg, z = oracle_cluster(f.features, f.gt_mask, sigma=8.0)
    params = MixtureParams(a_fg=0.5, a_bg=0.5, v_fg=mean_fg, v_bg=mean_bg)
    np.testing.assert_allclose(z.z_fg, e_step(f.features, params, 8.0).z_fg, atol=1e-9)


def test_oracle_cluster_rejects_trivial_masks(small_suite):
    f = small_suite[0][0]
    with pytest.raises(ValueError, match="foreground and background"):
        oracle_cluster(f.features, np.ones_like(f.gt_mask))
