import numpy as np
import pytest

from reactmap.cam import ClassifierHead, compute_cam
from reactmap.context import (
    ContextStore,
    embedding_pass,
    init_store,
    masked_mean,
    read_store,
    update_embeddings,
    write_store,
)
from reactmap.maps import min_max_normalize, threshold_fg_bg


def test_init_store_is_deterministic():
    a = init_store(3, 4, seed=42)
    b = init_store(3, 4, seed=42)
    np.testing.assert_array_equal(a.v_fg, b.v_fg)
    np.testing.assert_array_equal(a.v_bg, b.v_bg)
    c = init_store(3, 4, seed=43)
    assert not np.array_equal(a.v_fg, c.v_fg)


def test_store_validates_lambda():
    with pytest.raises(ValueError, match="momentum"):
        ContextStore(v_fg=np.zeros((2, 2)), v_bg=np.zeros((2, 2)), lam=1.5, seed=0)


def test_masked_mean_matches_loop(rng):
    F = rng.standard_normal((3, 4, 4))
    mask = (rng.random((4, 4)) > 0.5).astype(np.uint8)
    if mask.sum() == 0:
        mask[0, 0] = 1
    expected = np.zeros(3)
    for i in range(4):
        for j in range(4):
            if mask[i, j]:
                expected += F[:, i, j]
    expected /= mask.sum()
    np.testing.assert_allclose(masked_mean(F, mask), expected, atol=1e-12)


def test_masked_mean_empty_is_none():
    assert masked_mean(np.ones((2, 3, 3)), np.zeros((3, 3), dtype=np.uint8)) is None


def test_update_follows_momentum_recursion(rng):
    store = init_store(2, 3, seed=0, lam=0.8)
    F = rng.standard_normal((3, 4, 4))
    m_fg = np.zeros((4, 4), dtype=np.uint8)
    m_fg[:2] = 1
    m_bg = 1 - m_fg
    out = update_embeddings(store, F, m_fg, m_bg, c=1)
    np.testing.assert_allclose(
        out.v_fg[1], 0.8 * store.v_fg[1] + 0.2 * masked_mean(F, m_fg), atol=1e-12
    )
    np.testing.assert_allclose(
        out.v_bg[1], 0.8 * store.v_bg[1] + 0.2 * masked_mean(F, m_bg), atol=1e-12
    )
    # class 0 untouched
    np.testing.assert_array_equal(out.v_fg[0], store.v_fg[0])
    np.testing.assert_array_equal(out.v_bg[0], store.v_bg[0])


def test_update_skips_empty_side(rng):
    store = init_store(1, 3, seed=0)
    F = rng.standard_normal((3, 2, 2))
    full = np.ones((2, 2), dtype=np.uint8)
    out = update_embeddings(store, F, full, np.zeros_like(full), c=0)
    np.testing.assert_array_equal(out.v_bg, store.v_bg)
    assert not np.array_equal(out.v_fg, store.v_fg)


def test_update_rejects_bad_class(rng):
    store = init_store(2, 3, seed=0)
    F = rng.standard_normal((3, 2, 2))
    m = np.ones((2, 2), dtype=np.uint8)
    with pytest.raises(ValueError, match="class index"):
        update_embeddings(store, F, m, m, c=2)


def test_embedding_pass_equals_manual_two_step(rng):
    """One pass over two samples is exactly two momentum recursions."""
    head = ClassifierHead(weights=rng.standard_normal((2, 3)))
    samples = [(rng.standard_normal((3, 5, 5)), 0), (rng.standard_normal((3, 5, 5)), 0)]
    store = init_store(2, 3, seed=9, lam=0.8)

    manual = store
    for F, label in samples:
        m_fg, m_bg = threshold_fg_bg(min_max_normalize(compute_cam(F, head, label)), 0.2)
        manual = update_embeddings(manual, F, m_fg, m_bg, label)

    out = embedding_pass(store, head, samples, delta_frac=0.2)
    np.testing.assert_allclose(out.v_fg, manual.v_fg, atol=1e-12)
    np.testing.assert_allclose(out.v_bg, manual.v_bg, atol=1e-12)


def test_embedding_pass_epochs_repeat_sequence(rng):
    head = ClassifierHead(weights=rng.standard_normal((1, 3)))
    samples = [(rng.standard_normal((3, 4, 4)), 0)]
    store = init_store(1, 3, seed=1)
    twice = embedding_pass(store, head, samples * 2, delta_frac=0.2)
    two_epochs = embedding_pass(store, head, samples, delta_frac=0.2, epochs=2)
    np.testing.assert_allclose(twice.v_fg, two_epochs.v_fg, atol=1e-12)


def test_embedding_pass_reports_failing_sample_index(rng):
    head = ClassifierHead(weights=rng.standard_normal((2, 3)))
    good = (rng.standard_normal((3, 4, 4)), 0)
    bad = (rng.standard_normal((3, 4, 4)), 7)  # label out of range
    store = init_store(2, 3, seed=1)
    with pytest.raises(ValueError, match="sample 1:"):
        embedding_pass(store, head, [good, bad])


def test_store_roundtrip(tmp_path):
    store = init_store(3, 5, seed=123, lam=0.8)
    path = tmp_path / "ctx.crms"
    write_store(path, store)
    back = read_store(path)
    # payload is float32 on disk
    np.testing.assert_array_equal(back.v_fg, store.v_fg.astype(np.float32))
    np.testing.assert_array_equal(back.v_bg, store.v_bg.astype(np.float32))
    assert back.seed == 123
    assert back.lam == np.float32(0.8)


def test_store_roundtrip_is_stable(tmp_path):
    """A second write/read cycle is the identity (f32 already)."""
    store = init_store(2, 4, seed=5)
    p1, p2 = tmp_path / "a.crms", tmp_path / "b.crms"
    write_store(p1, store)
    write_store(p2, read_store(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_read_store_bad_magic(tmp_path):
    path = tmp_path / "bad.crms"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError, match="magic"):
        read_store(path)


def test_read_store_truncated(tmp_path):
    store = init_store(2, 4, seed=5)
    path = tmp_path / "trunc.crms"
    write_store(path, store)
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(ValueError, match="truncated"):
        read_store(path)
