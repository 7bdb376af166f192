"""Frechet distance goldens, IoU goldens, providers, protocol determinism."""

import numpy as np
import pytest
import torch

from layercomp.composer import ComposerEngine
from layercomp.data.synth import synth_dataset
from layercomp.errors import InvalidInputError, NumericalStabilityError
from layercomp.evaluation import (
    ColorPrototypeSegmenter,
    GaussianStats,
    RandomProjectionProvider,
    SyntheticClassifierProvider,
    SyntheticSegmenter,
    eval_protocol,
    fid,
    fit_gaussian,
    frechet_distance,
    layout_to_labels,
    mean_iou,
    product_sqrt,
)
from layercomp.layout import InstanceMask, SemanticLayout
from layercomp.nets import BackgroundGenerator, ForegroundGenerator, NetConfig


def stats(mu, sigma):
    return GaussianStats(mu=np.asarray(mu, dtype=float),
                         sigma=np.asarray(sigma, dtype=float))


# Frechet distance goldens.

def test_frechet_self_distance_is_zero():
    rng = np.random.default_rng(0)
    for _ in range(10):
        d = int(rng.integers(1, 12))
        a = rng.standard_normal((d, d))
        sigma = a @ a.T + 0.1 * np.eye(d)
        g = stats(rng.standard_normal(d), sigma)
        assert abs(frechet_distance(g, g)) <= 1e-9


def test_frechet_mean_shift_golden_25():
    a = stats([0.0], [[1.0]])
    b = stats([5.0], [[1.0]])
    assert frechet_distance(a, b) == pytest.approx(25.0, abs=1e-6)


def test_frechet_covariance_golden_2():
    a = stats([0.0, 0.0], np.eye(2))
    b = stats([0.0, 0.0], 4.0 * np.eye(2))
    # Per dim: 1 + 4 - 2*2 = 1; two dims -> 2.
    assert frechet_distance(a, b) == pytest.approx(2.0, abs=1e-6)


def test_frechet_closed_form_one_dimensional():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m1, m2 = rng.standard_normal(2) * 3
        s1, s2 = rng.uniform(0.1, 4.0, 2)
        a = stats([m1], [[s1 ** 2]])
        b = stats([m2], [[s2 ** 2]])
        expected = (m1 - m2) ** 2 + (s1 - s2) ** 2
        assert frechet_distance(a, b) == pytest.approx(expected, abs=1e-8)


def test_frechet_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(20):
        d = int(rng.integers(2, 10))
        a1 = rng.standard_normal((d, d))
        a2 = rng.standard_normal((d, d))
        g1 = stats(rng.standard_normal(d), a1 @ a1.T + 0.05 * np.eye(d))
        g2 = stats(rng.standard_normal(d), a2 @ a2.T + 0.05 * np.eye(d))
        assert abs(frechet_distance(g1, g2) - frechet_distance(g2, g1)) <= 1e-6


def test_frechet_nonnegative_and_finite_on_degenerate_pairs():
    # Rank-deficient covariances exercise the jitter ladder.
    rng = np.random.default_rng(3)
    for _ in range(10):
        d = 6
        low = rng.standard_normal((d, 2))
        g1 = stats(rng.standard_normal(d), low @ low.T)
        g2 = stats(rng.standard_normal(d), np.eye(d))
        val = frechet_distance(g1, g2)
        assert np.isfinite(val) and val >= 0.0


def test_frechet_rejects_indefinite_covariance():
    a = stats([0.0, 0.0], np.diag([1.0, -5.0]))
    b = stats([0.0, 0.0], np.eye(2))
    with pytest.raises(NumericalStabilityError):
        frechet_distance(a, b)


def test_frechet_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        frechet_distance(stats([0.0], [[1.0]]), stats([0.0, 0.0], np.eye(2)))


# Matrix root.

def test_product_sqrt_residual_small_on_random_psd_pairs():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(30):
        d = int(rng.integers(2, 16))
        a1 = rng.standard_normal((d, d))
        a2 = rng.standard_normal((d, d))
        s1 = a1 @ a1.T + 0.01 * np.eye(d)
        s2 = a2 @ a2.T + 0.01 * np.eye(d)
        root = product_sqrt(s1, s2)
        norm = max(np.linalg.norm(s1 @ s2), 1.0)
        residual = np.linalg.norm(root @ root - s1 @ s2) / norm
        worst = max(worst, residual)
    assert worst <= 1e-5, f"worst relative residual {worst}"


def test_product_sqrt_of_identity_is_identity():
    eye = np.eye(4)
    assert np.allclose(product_sqrt(eye, eye), eye, atol=1e-10)


# Gaussian fitting.

def test_fit_gaussian_golden():
    feats = np.array([[0.0, 0.0], [2.0, 0.0]])
    g = fit_gaussian(feats)
    assert np.allclose(g.mu, [1.0, 0.0])
    assert np.allclose(g.sigma, [[2.0, 0.0], [0.0, 0.0]])


def test_fit_gaussian_requires_two_rows():
    with pytest.raises(InvalidInputError):
        fit_gaussian(np.zeros((1, 3)))


def test_gaussian_stats_rejects_asymmetric_sigma():
    with pytest.raises(InvalidInputError):
        stats([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])


# Mean IoU goldens.

def _label_map(h, w, boxes):
    """boxes: list of (label, r0, r1, c0, c1) painted in order."""
    out = np.zeros((h, w), dtype=np.int64)
    for label, r0, r1, c0, c1 in boxes:
        out[r0:r1, c0:c1] = label
    return out


def test_mean_iou_perfect_prediction_is_one():
    gt = _label_map(8, 8, [(1, 0, 4, 0, 4), (2, 4, 8, 4, 8)])
    per_class, mean = mean_iou([gt.copy()], [gt.copy()])
    assert per_class == {0: 1.0, 1: 1.0}
    assert mean == 1.0


def test_mean_iou_disjoint_prediction_is_zero():
    gt = _label_map(8, 8, [(1, 0, 4, 0, 4)])
    pred = _label_map(8, 8, [(1, 4, 8, 4, 8)])
    per_class, mean = mean_iou([pred], [gt])
    assert mean == 0.0


def test_mean_iou_half_overlap_is_half():
    # Prediction covers half the object and nothing else: inter 8, union 16.

    gt = _label_map(4, 8, [(1, 0, 2, 0, 8)])
    pred = _label_map(4, 8, [(1, 0, 1, 0, 8)])
    per_class, mean = mean_iou([pred], [gt])
    assert per_class[0] == pytest.approx(8 / 16)
    assert mean == pytest.approx(0.5)


def test_mean_iou_pools_counts_across_images():
    gt1 = _label_map(4, 4, [(1, 0, 2, 0, 4)])
    gt2 = _label_map(4, 4, [(1, 0, 4, 0, 4)])
    pred1 = np.zeros((4, 4), dtype=np.int64)
    pred2 = gt2.copy()
    _, pooled = mean_iou([pred1, pred2], [gt1, gt2])
    # inter 16, union 24: pooled, not averaged per image.
    assert pooled == pytest.approx(16 / 24)


def test_mean_iou_image_order_invariance():
    rng = np.random.default_rng(5)
    gts = [rng.integers(0, 3, size=(6, 6)) for _ in range(4)]
    preds = [rng.integers(0, 3, size=(6, 6)) for _ in range(4)]
    _, m1 = mean_iou(preds, gts)
    order = [2, 0, 3, 1]
    _, m2 = mean_iou([preds[i] for i in order], [gts[i] for i in order])
    assert m1 == pytest.approx(m2)


def test_mean_iou_ignores_classes_absent_from_gt():
    gt = _label_map(4, 4, [(1, 0, 2, 0, 4)])
    pred = _label_map(4, 4, [(1, 0, 2, 0, 4), (2, 2, 4, 0, 4)])
    per_class, mean = mean_iou([pred], [gt])
    assert set(per_class) == {0}
    assert mean == 1.0


def test_mean_iou_errors():
    with pytest.raises(InvalidInputError):
        mean_iou([], [])
    gt = np.zeros((4, 4), dtype=np.int64)
    with pytest.raises(InvalidInputError):
        mean_iou([gt], [gt])  # no foreground anywhere
    with pytest.raises(InvalidInputError):
        mean_iou([np.zeros((2, 2), dtype=np.int64)],
                 [_label_map(4, 4, [(1, 0, 2, 0, 2)])])


def test_layout_to_labels_later_instances_overwrite():
    def inst(r0, r1, c0, c1, class_id):
        data = np.zeros((6, 6, 2), dtype=np.uint8)
        data[r0:r1, c0:c1, class_id] = 1
        return InstanceMask(data=data, class_id=class_id)

    layout = SemanticLayout(instances=(inst(0, 4, 0, 4, 0), inst(2, 6, 2, 6, 1)),
                            height=6, width=6, n_classes=2)
    labels = layout_to_labels(layout)
    assert labels[0, 0] == 1          # class 0 -> label 1
    assert labels[3, 3] == 2          # overwritten by class 1 -> label 2
    assert labels[5, 0] == 0          # background stays 0


def test_mean_iou_accepts_layouts_directly():
    idx = synth_dataset(3, 16, 3, seed=8)
    layouts = [r.layout for r in idx.records]
    preds = [layout_to_labels(l) for l in layouts]
    _, mean = mean_iou(preds, layouts)
    assert mean == 1.0


# Feature providers.

def test_random_projection_provider_deterministic():
    rng = np.random.default_rng(6)
    images = [rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32) for _ in range(4)]
    p1 = RandomProjectionProvider(dim=5, seed=3)
    p2 = RandomProjectionProvider(dim=5, seed=3)
    f1 = p1.extract(images)
    f2 = p2.extract(images)
    assert f1.shape == (4, 5)
    assert np.array_equal(f1, f2)
    assert p1.name == p2.name and "5" in p1.name


def test_random_projection_is_linear_map():
    rng = np.random.default_rng(7)
    a = rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32)
    b = rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32)
    p = RandomProjectionProvider(dim=4, seed=0)
    fa, fb, fab = p.extract([a]), p.extract([b]), p.extract([a + b])
    assert np.allclose(fab, fa + fb, atol=1e-4)


def test_classifier_provider_fits_and_extracts(tiny_index):
    torch.manual_seed(0)
    provider = SyntheticClassifierProvider(dim=8, seed=0).fit(tiny_index, steps=10)
    feats = provider.extract([r.image for r in tiny_index.records[:3]])
    assert feats.shape == (3, 8)
    assert np.isfinite(feats).all()
    assert "classifier" in provider.name


def test_color_prototype_segmenter_perfect_on_synthetic():
    idx = synth_dataset(6, 24, 3, seed=9)
    seg = ColorPrototypeSegmenter(n_classes=3)
    preds = seg.segment([r.image for r in idx.records])
    _, mean = mean_iou(list(preds), [r.layout for r in idx.records])
    assert mean >= 0.95


def test_synthetic_segmenter_learns_quickly():
    idx = synth_dataset(24, 24, 3, seed=10)
    torch.manual_seed(0)
    seg = SyntheticSegmenter(seed=0).fit(idx, steps=120)
    preds = seg.segment([r.image for r in idx.records])
    _, mean = mean_iou(list(preds), [r.layout for r in idx.records])
    assert mean >= 0.5


# FID.

def test_fid_self_is_tiny():
    idx = synth_dataset(16, 16, 3, seed=11)
    images = [r.image for r in idx.records]
    p = RandomProjectionProvider(dim=6, seed=0)
    assert fid(images, list(images), p) <= 1e-9


def test_fid_separates_noise_from_data():
    idx = synth_dataset(40, 16, 3, seed=12)
    images = [r.image for r in idx.records]
    rng = np.random.default_rng(0)
    noise = [rng.uniform(-1, 1, (16, 16, 3)).astype(np.float32) for _ in range(20)]
    p = RandomProjectionProvider(dim=6, seed=0)
    within = fid(images[:20], images[20:], p)
    across = fid(images, noise, p)
    assert across > 5 * within


# Protocol.

@pytest.fixture(scope="module")
def small_engine():
    cfg = NetConfig(image_size=16, n_classes=3, z_dim=8, base_channels=4, n_blocks=2)
    torch.manual_seed(0)
    return ComposerEngine(bg=BackgroundGenerator(cfg), fg=ForegroundGenerator(cfg))


def test_eval_protocol_deterministic(small_engine):
    idx = synth_dataset(10, 16, 3, seed=13)
    val = synth_dataset(4, 16, 3, seed=14)
    p = RandomProjectionProvider(dim=4, seed=0)
    seg = ColorPrototypeSegmenter(n_classes=3)
    r1 = eval_protocol(small_engine, idx, val, n_images=4, seed=5,
                       provider=p, segmenter=seg)
    r2 = eval_protocol(small_engine, idx, val, n_images=4, seed=5,
                       provider=p, segmenter=seg)
    assert r1.fid == r2.fid
    assert r1.iou_train_mean == r2.iou_train_mean
    assert r1.iou_val_mean == r2.iou_val_mean
    r3 = eval_protocol(small_engine, idx, val, n_images=4, seed=6,
                       provider=p, segmenter=seg)
    assert (r1.fid, r1.iou_train_mean) != (r3.fid, r3.iou_train_mean)


def test_eval_protocol_report_serializes(small_engine, tmp_path):
    idx = synth_dataset(6, 16, 3, seed=15)
    report = eval_protocol(small_engine, idx, idx, n_images=3, seed=0,
                           provider=RandomProjectionProvider(dim=4, seed=0),
                           segmenter=ColorPrototypeSegmenter(n_classes=3))
    path = tmp_path / "report.json"
    report.save(path)
    import json
    doc = json.loads(path.read_text())
    assert set(doc) >= {"fid", "iou", "n_images", "seed", "mode", "provider",
                        "segmenter"}
    assert doc["n_images"] == 3
