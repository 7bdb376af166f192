"""Acceptance gates for the shipped guarantees, one test per criterion.

Each test records a PASS/FAIL line with its measured margin and wallclock
budget; the terminal summary hook in conftest prints the full table after the
run. The two desk-scale learning gates train real models (64x64, 500 synthetic
images) and dominate the runtime; everything else is seconds.
"""

import hashlib
import json
import threading
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
import torch

import conftest
from layercomp.composer import (
    EXPERIMENTS,
    ComposerEngine,
    CompositionSession,
    compose,
    expand_seed,
    run_experiment,
)
from layercomp.data.rle import decode_rle, encode_rle
from layercomp.data.synth import CANONICAL_COLORS, synth_dataset
from layercomp.evaluation import (
    ColorPrototypeSegmenter,
    GaussianStats,
    RandomProjectionProvider,
    SyntheticClassifierProvider,
    eval_protocol,
    fid,
    fit_gaussian,
    frechet_distance,
    mean_iou,
    product_sqrt,
)
from layercomp.layout import (
    BBox,
    InstanceMask,
    SemanticLayout,
    aggregate,
    bbox_of,
    mask_out,
    occupancy_of,
)
from layercomp.losses import LossWeights, bg_total, fg_total, masked_l2
from layercomp.nets import (
    BackgroundGenerator,
    ForegroundGenerator,
    MaskGenerator,
    NetConfig,
)
from layercomp.nets.roi import bilinear_roi
from layercomp.nets.sn import PowerIterationState, spectral_normalize
from layercomp.trainer import TrainConfig, lr_schedule, train_bg, train_fg, train_mask_gen

DESK_NET = NetConfig(image_size=64, n_classes=3, z_dim=64, base_channels=16,
                     n_blocks=3)
DESK_TRAIN = dict(epochs=480, batch=4, max_g_steps=2000, checkpoint_every=2000,
                  log_every=50, seed=0)


@contextmanager
def criterion(name, budget_s=None):
    """Record one acceptance line; enforce the wallclock budget if given."""
    info = {"msg": ""}
    t0 = time.monotonic()
    try:
        yield info
    except BaseException as exc:
        reason = f"{type(exc).__name__}: {exc}"
        detail = f"{info['msg']}; {reason}" if info["msg"] else reason
        conftest.ACCEPTANCE_RESULTS.append((name, "FAIL", detail[:220]))
        raise
    elapsed = time.monotonic() - t0
    msg = info["msg"]
    if budget_s is not None:
        stamp = f"{elapsed:.1f}s of {budget_s:.0f}s budget"
        msg = f"{msg}; {stamp}" if msg else stamp
        if elapsed > budget_s:
            conftest.ACCEPTANCE_RESULTS.append((name, "FAIL", msg))
            raise AssertionError(f"{name}: {elapsed:.1f}s exceeds {budget_s}s")
    conftest.ACCEPTANCE_RESULTS.append((name, "PASS", msg))


# -- shared desk-scale fixtures ----------------------------------------------


@pytest.fixture(scope="session")
def desk_index():
    return synth_dataset(500, 64, 3, seed=0)


@pytest.fixture(scope="session")
def bg_run(desk_index, tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_bg")
    cfg = TrainConfig(net=DESK_NET, **DESK_TRAIN)
    t0 = time.monotonic()
    res = train_bg(desk_index, cfg, out_dir=out)
    return res, time.monotonic() - t0


@pytest.fixture(scope="session")
def fg_run(desk_index, tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_fg")
    cfg = TrainConfig(net=DESK_NET, **DESK_TRAIN)
    t0 = time.monotonic()
    res = train_fg(desk_index, cfg, out_dir=out)
    return res, time.monotonic() - t0


@pytest.fixture(scope="session")
def maskgen_run(desk_index, tmp_path_factory):
    # Short run: experiments and the service need a mask checkpoint at desk
    # geometry, but no learning gate applies to it.
    out = tmp_path_factory.mktemp("accept_maskgen")
    cfg = TrainConfig(net=DESK_NET, **{**DESK_TRAIN, "max_g_steps": 200,
                                       "checkpoint_every": 10_000})
    return train_mask_gen(desk_index, cfg, out_dir=out)


@pytest.fixture(scope="session")
def trained_engine(bg_run, fg_run, maskgen_run):
    return ComposerEngine.from_checkpoints(bg_path=bg_run[0].gen_path,
                                           fg_path=fg_run[0].gen_path,
                                           mask_path=maskgen_run.gen_path)


def _loss_drop(history):
    rec = history["rec"]
    base = float(np.mean(rec[:10]))
    tail = float(np.mean(rec[-50:]))
    return base, tail, 1.0 - tail / base


def _all_finite(history):
    return all(np.isfinite(v).all() for v in history.values())


# -- 1: layout algebra vs brute-force loops ----------------------------------


def _random_layout(rng, n_classes=3):
    h = int(rng.integers(4, 10))
    w = int(rng.integers(4, 10))
    instances = []
    for _ in range(int(rng.integers(1, 4))):
        data = np.zeros((h, w, n_classes), dtype=np.uint8)
        k = int(rng.integers(n_classes))
        r0 = int(rng.integers(0, h - 1))
        c0 = int(rng.integers(0, w - 1))
        r1 = int(rng.integers(r0 + 1, h + 1))
        c1 = int(rng.integers(c0 + 1, w + 1))
        data[r0:r1, c0:c1, k] = rng.integers(0, 2, size=(r1 - r0, c1 - c0))
        data[r0, c0, k] = 1
        instances.append(InstanceMask(data=data, class_id=k))
    return SemanticLayout(instances=tuple(instances), height=h, width=w,
                          n_classes=n_classes)


def test_layout_algebra_matches_loop_oracles():
    with criterion("layout algebra vs loop oracles", budget_s=10) as info:
        rng = np.random.default_rng(0)
        n = 1000
        for _ in range(n):
            layout = _random_layout(rng)
            h, w, k = layout.height, layout.width, layout.n_classes

            agg = np.zeros((h, w, k), dtype=np.uint8)
            for inst in layout.instances:
                for r in range(h):
                    for c in range(w):
                        for ch in range(k):
                            if inst.data[r, c, ch]:
                                agg[r, c, ch] = 1
            assert np.array_equal(aggregate(layout), agg)

            inst = layout.instances[0]
            occ = np.zeros((h, w), dtype=np.uint8)
            for r in range(h):
                for c in range(w):
                    occ[r, c] = 1 if inst.data[r, c].any() else 0
            assert np.array_equal(occupancy_of(inst), occ)

            coords = [(r, c) for r in range(h) for c in range(w) if occ[r, c]]
            box = bbox_of(occ)
            assert box.row_min == min(r for r, _ in coords)
            assert box.row_max == max(r for r, _ in coords)
            assert box.col_min == min(c for _, c in coords)
            assert box.col_max == max(c for _, c in coords)

            canvas = rng.standard_normal((h, w, 3)).astype(np.float32)
            masked = canvas.copy()
            for r, c in coords:
                masked[r, c] = 0.0
            assert np.array_equal(mask_out(canvas, occ), masked)
        info["msg"] = f"{n} layouts, 4 ops, exact equality"


# -- 2: differentiable crop-and-resize ----------------------------------------


def test_roi_identity_gradients_linearity():
    with criterion("bilinear crop: identity, gradients, linearity",
                   budget_s=30) as info:
        torch.manual_seed(0)
        img = torch.randn(3, 6, 6)
        out = bilinear_roi(img, BBox(row_min=0, row_max=5, col_min=0, col_max=5),
                           6, 6)
        assert torch.equal(out, img)

        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(50):
            base = torch.tensor(rng.standard_normal((6, 6)), dtype=torch.float64,
                                requires_grad=True)
            r0, c0 = rng.integers(0, 3, size=2)
            box = BBox(row_min=int(r0), row_max=int(r0 + 3),
                       col_min=int(c0), col_max=int(c0 + 3))
            w = torch.tensor(rng.standard_normal((4, 4)), dtype=torch.float64)
            loss = (bilinear_roi(base, box, 4, 4) * w).sum()
            loss.backward()
            analytic = base.grad.detach().numpy()

            eps = 1e-3
            fd = np.zeros((6, 6))
            flat = base.detach().numpy()
            for i in range(6):
                for j in range(6):
                    for sign in (1, -1):
                        bumped = flat.copy()
                        bumped[i, j] += sign * eps
                        t = torch.tensor(bumped, dtype=torch.float64)
                        fd[i, j] += sign * float((bilinear_roi(t, box, 4, 4) * w).sum())
            fd /= 2 * eps
            scale = max(np.abs(fd).max(), 1e-8)
            worst = max(worst, float(np.abs(analytic - fd).max() / scale))
        assert worst <= 1e-3, f"gradient mismatch {worst}"

        lin_worst = 0.0
        for _ in range(20):
            a = torch.tensor(rng.standard_normal((6, 6)))
            b = torch.tensor(rng.standard_normal((6, 6)))
            box = BBox(row_min=1, row_max=4, col_min=0, col_max=5)
            lhs = bilinear_roi(2.0 * a + b, box, 3, 3)
            rhs = 2.0 * bilinear_roi(a, box, 3, 3) + bilinear_roi(b, box, 3, 3)
            lin_worst = max(lin_worst, float((lhs - rhs).abs().max()))
        assert lin_worst <= 1e-5, f"nonlinearity {lin_worst}"
        info["msg"] = (f"grad rel err {worst:.2e} <= 1e-3, "
                       f"linearity {lin_worst:.1e} <= 1e-5")


# -- 3: spectral normalization vs full SVD ------------------------------------


def test_spectral_norm_matches_svd_oracle():
    with criterion("spectral norm vs SVD oracle", budget_s=10) as info:
        # Sizes and scales are drawn from a fixed seed: 20 power iterations
        # cannot separate near-degenerate top singular pairs, so an unseeded
        # draw occasionally produces a matrix no implementation could pass.
        master = np.random.default_rng(4)
        lo, hi = 1.0, 1.0
        for trial in range(100):
            rows = int(master.integers(2, 16))
            cols = int(master.integers(2, 16))
            scale = float(master.uniform(0.1, 10.0))
            w = torch.tensor(
                master.standard_normal((rows, cols)) * scale,
                dtype=torch.float32,
            )
            gen = torch.Generator().manual_seed(trial)
            state = PowerIterationState.for_weight(w, generator=gen)
            normed = spectral_normalize(w, state, n_iterations=20)
            sigma = float(np.linalg.svd(normed.numpy(), compute_uv=False)[0])
            lo, hi = min(lo, sigma), max(hi, sigma)
            assert 0.95 <= sigma <= 1.05, f"sigma {sigma}"
        info["msg"] = f"100 matrices, sigma range [{lo:.4f}, {hi:.4f}]"


# -- 4: loss identities --------------------------------------------------------


def test_loss_identities_and_weight_linearity():
    with criterion("loss identities and weight linearity", budget_s=5) as info:
        torch.manual_seed(0)
        x = torch.randn(2, 3, 8, 8)
        keep = torch.zeros(2, 1, 8, 8)
        keep[:, :, :4] = 1.0  # top half excluded from the loss
        assert float(masked_l2(x, x.clone(), keep)) == 0.0
        assert float(masked_l2(x, torch.randn_like(x), torch.ones_like(keep))) == 0.0

        # Values under keep==1 must not affect the loss at all.
        y = x + 1.0
        base = float(masked_l2(x, y, keep))
        noisy = x.clone()
        noisy[:, :, :4] += 37.0
        assert float(masked_l2(noisy, y, keep)) == base

        w = LossWeights()
        assert (w.lambda_r_bg, w.lambda_fm_bg) == (100.0, 1.0)
        assert (w.lambda_l, w.lambda_r_fg, w.lambda_fm_fg) == (0.1, 1e-5, 1.0)

        parts = [torch.tensor(v, dtype=torch.float64)
                 for v in (0.37, -1.25, 2.5)]
        adv, rec, fm = parts
        got = float(bg_total(adv, rec, fm, w))
        assert got == pytest.approx(0.37 + 100.0 * -1.25 + 2.5, abs=1e-9)
        delta = torch.tensor(0.5, dtype=torch.float64)
        assert (float(bg_total(adv, rec + delta, fm, w)) - got
                == pytest.approx(100.0 * 0.5, abs=1e-9))
        assert (float(bg_total(adv, rec, fm + delta, w)) - got
                == pytest.approx(1.0 * 0.5, abs=1e-9))

        g, l, r, f = [torch.tensor(v, dtype=torch.float64)
                      for v in (0.7, -0.3, 4.0, 1.1)]
        got_fg = float(fg_total(g, l, r, f, w))
        assert got_fg == pytest.approx(0.7 + 0.1 * -0.3 + 1e-5 * 4.0 + 1.1,
                                       abs=1e-9)
        assert (float(fg_total(g, l + delta, r, f, w)) - got_fg
                == pytest.approx(0.1 * 0.5, abs=1e-9))
        assert (float(fg_total(g, l, r + delta, f, w)) - got_fg
                == pytest.approx(1e-5 * 0.5, abs=1e-9))
        assert (float(fg_total(g, l, r, f + delta, w)) - got_fg
                == pytest.approx(1.0 * 0.5, abs=1e-9))
        info["msg"] = "zero cases, masked-pixel invariance, weights (100,1)/(0.1,1e-5,1)"


# -- 5: Frechet distance goldens ----------------------------------------------


def test_frechet_distance_golden_values():
    with criterion("Frechet distance goldens", budget_s=10) as info:
        rng = np.random.default_rng(0)
        for _ in range(10):
            d = int(rng.integers(1, 10))
            a = rng.standard_normal((d, d))
            g = GaussianStats(mu=rng.standard_normal(d),
                              sigma=a @ a.T + 0.1 * np.eye(d))
            assert abs(frechet_distance(g, g)) <= 1e-9

        shift = frechet_distance(
            GaussianStats(mu=np.array([0.0]), sigma=np.array([[1.0]])),
            GaussianStats(mu=np.array([5.0]), sigma=np.array([[1.0]])))
        assert shift == pytest.approx(25.0, abs=1e-6)
        cov = frechet_distance(
            GaussianStats(mu=np.zeros(2), sigma=np.eye(2)),
            GaussianStats(mu=np.zeros(2), sigma=4.0 * np.eye(2)))
        assert cov == pytest.approx(2.0, abs=1e-6)

        sym_worst, res_worst = 0.0, 0.0
        for _ in range(20):
            d = int(rng.integers(2, 12))
            a1, a2 = rng.standard_normal((2, d, d))
            g1 = GaussianStats(mu=rng.standard_normal(d),
                               sigma=a1 @ a1.T + 0.01 * np.eye(d))
            g2 = GaussianStats(mu=rng.standard_normal(d),
                               sigma=a2 @ a2.T + 0.01 * np.eye(d))
            sym_worst = max(sym_worst, abs(frechet_distance(g1, g2)
                                           - frechet_distance(g2, g1)))
            root = product_sqrt(g1.sigma, g2.sigma)
            res = (np.linalg.norm(root @ root - g1.sigma @ g2.sigma)
                   / max(np.linalg.norm(g1.sigma @ g2.sigma), 1.0))
            res_worst = max(res_worst, res)
        assert sym_worst <= 1e-6
        assert res_worst <= 1e-5
        info["msg"] = (f"shift 25, cov 2, symmetry {sym_worst:.1e}, "
                       f"root residual {res_worst:.1e}")


# -- 6: FID separates data from noise -----------------------------------------


def test_fid_separates_real_halves_from_noise(desk_index):
    with criterion("FID separation: real halves vs uniform noise",
                   budget_s=300) as info:
        torch.manual_seed(0)
        provider = SyntheticClassifierProvider(dim=32, seed=0).fit(
            desk_index, steps=300, batch=16)
        images = [r.image for r in desk_index.records]
        rng = np.random.default_rng(0)
        noise = [rng.uniform(-1, 1, (64, 64, 3)).astype(np.float32)
                 for _ in range(250)]
        within = fid(images[:250], images[250:], provider)
        across = fid(images, noise, provider)
        assert within <= across / 5.0, f"within {within} vs across {across}"
        info["msg"] = f"halves {within:.1f} <= noise {across:.1f} / 5"


# -- 7: IoU goldens and protocol determinism -----------------------------------


def test_mean_iou_goldens_and_protocol_determinism():
    with criterion("mean IoU goldens and protocol determinism",
                   budget_s=60) as info:
        gt = np.zeros((8, 8), dtype=np.int64)
        gt[:4, :4] = 1
        per_class, mean = mean_iou([gt.copy()], [gt.copy()])
        assert mean == 1.0 and per_class[0] == 1.0

        pred = np.zeros((8, 8), dtype=np.int64)
        pred[4:, 4:] = 1
        assert mean_iou([pred], [gt])[1] == 0.0

        half = np.zeros((8, 8), dtype=np.int64)
        half[:2, :4] = 1
        assert mean_iou([half], [gt])[1] == 0.5

        cfg = NetConfig(image_size=64, n_classes=3, z_dim=16, base_channels=8,
                        n_blocks=2)
        torch.manual_seed(0)
        engine = ComposerEngine(bg=BackgroundGenerator(cfg),
                                fg=ForegroundGenerator(cfg))
        idx = synth_dataset(8, 64, 3, seed=21)
        provider = RandomProjectionProvider(dim=8, seed=0)
        seg = ColorPrototypeSegmenter(n_classes=3)
        r1 = eval_protocol(engine, idx, idx, n_images=4, seed=9,
                           provider=provider, segmenter=seg)
        r2 = eval_protocol(engine, idx, idx, n_images=4, seed=9,
                           provider=provider, segmenter=seg)
        assert (r1.fid, r1.iou_train_mean, r1.iou_val_mean) == \
               (r2.fid, r2.iou_train_mean, r2.iou_val_mean)
        info["msg"] = "goldens 1.0/0/0.5 exact; identical reports for same seed"


# -- 8: lr schedule and D:G update ratio ---------------------------------------


def test_lr_schedule_and_update_ratio(tmp_path):
    with criterion("lr schedule goldens and 5:1 update ratio") as info:
        expected = {0: 2e-4, 79: 2e-4, 80: 1e-4, 200: 5e-5, 479: 2e-4 / 2 ** 5}
        for epoch, lr in expected.items():
            assert lr_schedule(epoch) == pytest.approx(lr, rel=1e-12)

        idx = synth_dataset(8, 16, 3, seed=1)
        net = NetConfig(image_size=16, n_classes=3, z_dim=8, base_channels=4,
                        n_blocks=2)
        cfg = TrainConfig(net=net, epochs=100, batch=2, max_g_steps=100,
                          checkpoint_every=10_000, log_every=1, seed=0)
        res = train_bg(idx, cfg, out_dir=tmp_path)
        assert res.g_steps == 100
        rows = [json.loads(line)
                for line in (tmp_path / "train_log.jsonl").read_text().splitlines()]
        assert len(rows) == 100
        for row in rows:
            assert row["d_steps"] == 5 * row["g_step"]
        info["msg"] = "5 epoch goldens exact; d_steps == 5*g_step for 100 steps"


# -- 9: desk-scale background learning -----------------------------------------


def test_background_learning_desk_scale(bg_run):
    res, seconds = bg_run
    with criterion("background model learns at desk scale") as info:
        base, tail, drop = _loss_drop(res.history)
        info["msg"] = (f"rec {base:.4f} -> {tail:.4f} ({drop:.0%} fall), "
                       f"{seconds / 60:.1f}min of 30min budget")
        assert res.g_steps == 2000
        assert _all_finite(res.history), "non-finite loss recorded"
        assert tail <= 0.5 * base, f"rec fell only {drop:.0%}"
        assert seconds <= 30 * 60, f"training took {seconds / 60:.1f} min"


# -- 10: desk-scale foreground learning ----------------------------------------


def test_foreground_learning_desk_scale(bg_run, fg_run):
    res, seconds = fg_run
    with criterion("foreground model learns at desk scale") as info:
        base, tail, drop = _loss_drop(res.history)
        assert res.g_steps == 2000
        assert _all_finite(res.history), "non-finite loss recorded"
        assert tail <= 0.5 * base, f"rec fell only {drop:.0%}"
        assert seconds <= 45 * 60, f"training took {seconds / 60:.1f} min"

        engine = ComposerEngine.from_checkpoints(bg_path=bg_run[0].gen_path,
                                                 fg_path=res.gen_path)
        objects = []
        for rec in synth_dataset(120, 64, 3, seed=123).records:
            objects.extend(rec.layout.instances)
            if len(objects) >= 200:
                break
        objects = objects[:200]
        rng = np.random.default_rng(7)
        hits = 0
        for inst in objects:
            sess = CompositionSession(
                engine, mode="hard",
                background={"kind": "generate",
                            "seed": int(rng.integers(2 ** 31 - 1))})
            sess.add_object(inst, int(rng.integers(2 ** 31 - 1)))
            occ = occupancy_of(inst).astype(bool)
            got01 = (sess.canvas[occ].mean(axis=0) + 1) / 2
            want01 = (np.asarray(CANONICAL_COLORS[inst.class_id]) + 1) / 2
            hits += bool((np.abs(got01 - want01) <= 0.15).all())
        frac = hits / len(objects)
        assert frac >= 0.8, f"only {frac:.0%} of objects near canonical color"
        info["msg"] = (f"rec {base:.4f} -> {tail:.4f} ({drop:.0%} fall), "
                       f"{seconds / 60:.1f}min of 45min budget; "
                       f"{frac:.0%} of 200 objects within 0.15/channel")


# -- 11: composition invariants -------------------------------------------------


def test_composition_invariants_bit_exact():
    with criterion("composition invariants bit-exact", budget_s=60) as info:
        cfg = NetConfig(image_size=32, n_classes=3, z_dim=16, base_channels=8,
                        n_blocks=2)
        torch.manual_seed(0)
        engine = ComposerEngine(bg=BackgroundGenerator(cfg),
                                fg=ForegroundGenerator(cfg))

        def mask(r0, c0, side, class_id):
            data = np.zeros((32, 32, 3), dtype=np.uint8)
            data[r0:r0 + side, c0:c0 + side, class_id] = 1
            return InstanceMask(data=data, class_id=class_id)

        sess = CompositionSession(engine, mode="hard",
                                  background={"kind": "generate", "seed": 3})
        masks = [mask(2, 2, 9, 0), mask(12, 14, 10, 1), mask(20, 4, 8, 2)]
        for i, m in enumerate(masks):
            sess.add_object(m, seed=50 + i)
            occ = occupancy_of(m).astype(bool)
            before, after = sess.canvases[-2], sess.canvases[-1]
            assert np.array_equal(after[~occ], before[~occ]), \
                f"step {i}: pixels changed outside the added object"

        snapshot = [c.copy() for c in sess.canvases]
        sess.replay_all()
        assert all(np.array_equal(a, b)
                   for a, b in zip(snapshot, sess.canvases))

        sess.reorder(sess.object_ids())
        assert all(np.array_equal(a, b)
                   for a, b in zip(snapshot, sess.canvases))

        empty = SemanticLayout(instances=(), height=32, width=32, n_classes=3)
        out = compose(engine, empty, seeds=5)
        from layercomp.nets.ops import bg_inference

        seed0 = int(np.random.default_rng(5).integers(0, 2 ** 31 - 1, size=1)[0])
        assert np.array_equal(out, bg_inference(engine.bg,
                                                expand_seed(seed0, cfg.z_dim)))
        info["msg"] = ("background preserved at 3 steps, replay and "
                       "identity-reorder bit-exact, empty layout == background")


# -- 12: experiment scripts hash-stable ------------------------------------------


def test_experiment_scripts_hash_stable(trained_engine, tmp_path):
    with criterion("experiment scripts reproducible", budget_s=300) as info:
        def tree_hash(d):
            h = hashlib.sha256()
            for p in sorted(Path(d).rglob("*")):
                if p.is_file():
                    h.update(p.name.encode())
                    h.update(p.read_bytes())
            return h.hexdigest()

        for name in EXPERIMENTS:
            a, b = tmp_path / f"{name}_a", tmp_path / f"{name}_b"
            files = run_experiment(name, trained_engine, a, seed=11)
            run_experiment(name, trained_engine, b, seed=11)
            assert files, f"{name} produced no output"
            assert tree_hash(a) == tree_hash(b), f"{name} is not seed-stable"
        info["msg"] = f"{len(EXPERIMENTS)} scripts, identical grids on rerun"


# -- 13: service contract ---------------------------------------------------------


def test_service_contract_round_trip(trained_engine, tmp_path):
    from fastapi.testclient import TestClient

    from layercomp.service import create_app

    with criterion("service contract with concurrency and restart",
                   budget_s=120) as info:
        size = trained_engine.image_size
        client = TestClient(create_app(trained_engine, session_dir=tmp_path))

        def rle_square(r0, c0, side):
            occ = np.zeros((size, size), dtype=np.uint8)
            occ[r0:r0 + side, c0:c0 + side] = 1
            return encode_rle(occ)

        sid = client.post("/sessions", json={
            "width": size, "height": size, "mode": "hard",
            "background": {"kind": "generate", "seed": 42},
        }).json()["session_id"]

        first = client.post(f"/sessions/{sid}/objects", json={
            "class_id": 0, "mask_rle": rle_square(6, 6, 16), "seed": 1,
        })
        assert first.status_code == 200
        oid = first.json()["object_id"]
        assert decode_rle(first.json()["mask_rle"], size, size).sum() == 256

        bbox_resp = client.post(f"/sessions/{sid}/objects", json={
            "class_id": 1, "seed": 2,
            "bbox": {"row_min": 30, "col_min": 30, "row_max": 50,
                     "col_max": 50},
        })
        assert bbox_resp.status_code == 200
        oid2 = bbox_resp.json()["object_id"]

        assert client.post(f"/sessions/{sid}/objects/{oid}/resample",
                           json={"seed": 7}).status_code == 200
        moved = client.post(f"/sessions/{sid}/objects/{oid}/transform",
                            json={"dx": 4, "dy": 2})
        assert moved.status_code == 200
        assert moved.json()["bbox"]["col_min"] == 10
        reordered = client.put(f"/sessions/{sid}/order",
                               json={"ids": [oid2, oid]})
        assert reordered.status_code == 200
        assert reordered.json()["order"] == [oid2, oid]
        assert client.put(f"/sessions/{sid}/order",
                          json={"ids": [oid, oid]}).status_code == 409

        n = 6
        errors = []

        def add(i):
            try:
                r = client.post(f"/sessions/{sid}/objects", json={
                    "class_id": i % 3, "mask_rle": rle_square(2 + i, 40, 8),
                    "seed": 100 + i,
                })
                assert r.status_code == 200, r.text
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=add, args=(i,)) for i in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        doc = client.get(f"/sessions/{sid}").json()
        assert len(doc["objects"]) == 2 + n
        assert doc["canvas_version"] == 1 + 5 + n  # create=1, 5 early mutations

        before = [client.get(f"/sessions/{sid}/canvas?step={t}").content
                  for t in range(len(doc["objects"]) + 1)]
        restarted = TestClient(create_app(trained_engine, session_dir=tmp_path))
        after = [restarted.get(f"/sessions/{sid}/canvas?step={t}").content
                 for t in range(len(doc["objects"]) + 1)]
        assert before == after, "restart replay changed canvas bytes"
        info["msg"] = (f"round-trips ok, {n} concurrent adds serialized, "
                       f"{len(before)} canvases bit-exact after restart")
