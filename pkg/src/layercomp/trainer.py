"""Training loops for the background, foreground, and mask generators.

Schedule: Adam with betas (0, 0.9), initial rate 2e-4 halved every 80 epochs,
five discriminator updates per generator update. An epoch is one pass of
generator steps over the dataset. Runs are deterministic for a fixed seed and
thread count; progress goes to a line-delimited JSON log; checkpoints are
written periodically with strictly increasing step numbers.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import DatasetIndex, sample_fg_batch
from .errors import InvalidInputError, TrainingDivergenceError
from .layout import aggregate, bbox_mask, bbox_of, mask_out, occupancy_of
from .losses import (
    LossWeights,
    adv_loss_d,
    adv_loss_g,
    bg_total,
    feature_matching,
    fg_rec_loss,
    fg_total,
    mask_gen_loss,
    masked_l2,
)
from .nets import (
    BackgroundGenerator,
    ConditionalDiscriminator,
    ForegroundGenerator,
    LocalDiscriminator,
    MaskCropDiscriminator,
    MaskGenerator,
    NetConfig,
    load_checkpoint,
    save_checkpoint,
)

logger = logging.getLogger(__name__)

__all__ = ["TrainConfig", "TrainResult", "lr_schedule", "train_bg", "train_fg", "train_mask_gen"]

DIVERGENCE_SCORE = 1e4
DIVERGENCE_PATIENCE = 50


@dataclass(frozen=True)
class TrainConfig:
    net: NetConfig
    weights: LossWeights = field(default_factory=LossWeights)
    epochs: int = 480
    batch: int = 16
    lr0: float = 2e-4
    betas: tuple[float, float] = (0.0, 0.9)
    lr_halving_period: int = 80
    d_steps_per_g: int = 5
    seed: int = 0
    max_g_steps: int | None = None
    checkpoint_every: int = 500
    log_every: int = 10

    def __post_init__(self):
        if self.epochs <= 0 or self.batch <= 0 or self.lr0 <= 0:
            raise InvalidInputError("epochs, batch, and lr0 must be positive")
        if self.lr_halving_period <= 0:
            raise InvalidInputError("lr_halving_period must be positive")
        if self.d_steps_per_g < 1:
            raise InvalidInputError("d_steps_per_g must be >= 1")

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["net"] = self.net.to_dict()
        d["weights"] = self.weights.to_dict()
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["net"] = NetConfig.from_dict(d["net"])
        if "weights" in d:
            d["weights"] = LossWeights.from_dict(d["weights"])
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)


@dataclass
class TrainResult:
    g_steps: int
    history: dict[str, list[float]]
    gen_path: str
    extra_paths: dict[str, str]


def lr_schedule(epoch: int, lr0: float = 2e-4, halving_period: int = 80) -> float:
    """lr0 / 2^floor(epoch / halving_period)."""
    return lr0 / (2 ** (epoch // halving_period))


class _Run:
    """Shared loop plumbing: batching order, lr updates, logging, checkpoints."""

    def __init__(self, index: DatasetIndex, cfg: TrainConfig, out_dir: str | Path | None,
                 prefix: str):
        if len(index.records) == 0:
            raise InvalidInputError("dataset is empty")
        self.index = index
        self.cfg = cfg
        self.prefix = prefix
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.rng = np.random.default_rng(cfg.seed)
        torch.manual_seed(cfg.seed)
        self.torch_rng = torch.Generator().manual_seed(cfg.seed)
        self.steps_per_epoch = max(len(index.records) // cfg.batch, 1)
        total_by_epochs = cfg.epochs * self.steps_per_epoch
        self.total_g_steps = (total_by_epochs if cfg.max_g_steps is None
                              else min(cfg.max_g_steps, total_by_epochs))
        self.g_step = 0
        self.d_step = 0
        self.history: dict[str, list[float]] = {}
        self._log_fh = (open(self.out_dir / "train_log.jsonl", "a")
                        if self.out_dir is not None else None)
        self._t0 = time.monotonic()
        self._high_d_streak = 0
        self._last_ckpt: dict[str, str] = {}

    @property
    def epoch(self) -> int:
        return self.g_step // self.steps_per_epoch

    @property
    def lr(self) -> float:
        return lr_schedule(self.epoch, self.cfg.lr0, self.cfg.lr_halving_period)

    def set_lr(self, *optimizers: torch.optim.Optimizer) -> None:
        for opt in optimizers:
            for group in opt.param_groups:
                group["lr"] = self.lr

    def noise(self, n: int) -> torch.Tensor:
        return torch.randn(n, self.cfg.net.z_dim, generator=self.torch_rng)

    def record(self, losses: dict[str, float]) -> None:
        for key, value in losses.items():
            self.history.setdefault(key, []).append(value)
        if not all(math.isfinite(v) for v in losses.values()):
            raise TrainingDivergenceError(f"non-finite loss at g_step {self.g_step}: {losses}")
        streak_hit = abs(losses.get("d_loss", 0.0)) > DIVERGENCE_SCORE
        self._high_d_streak = self._high_d_streak + 1 if streak_hit else 0
        if self._high_d_streak >= DIVERGENCE_PATIENCE:
            raise TrainingDivergenceError(
                f"|d_loss| > {DIVERGENCE_SCORE} for {DIVERGENCE_PATIENCE} consecutive steps"
            )
        if self._log_fh is not None and self.g_step % self.cfg.log_every == 0:
            line = {"g_step": self.g_step, "d_steps": self.d_step, "epoch": self.epoch,
                    "lr": self.lr, "losses": losses,
                    "wallclock": round(time.monotonic() - self._t0, 3)}
            self._log_fh.write(json.dumps(line) + "\n")
            self._log_fh.flush()

    def checkpoint(self, modules: dict[str, torch.nn.Module], final: bool = False) -> None:
        if self.out_dir is None:
            return
        due = final or (self.g_step > 0 and self.g_step % self.cfg.checkpoint_every == 0)
        if not due:
            return
        for suffix, module in modules.items():
            path = self.out_dir / f"{self.prefix}_step{self.g_step:06d}.{suffix}.ckpt"
            save_checkpoint(path, module, _KINDS[(self.prefix, suffix)], self.g_step)
            latest = self.out_dir / f"{self.prefix}_latest.{suffix}.ckpt"
            save_checkpoint(latest, module, _KINDS[(self.prefix, suffix)], self.g_step)
            self._last_ckpt[suffix] = str(path)

    def divergence_report(self, message: str) -> None:
        if self.out_dir is None:
            return
        report = {"g_step": self.g_step, "d_steps": self.d_step, "message": message,
                  "last_good_checkpoints": self._last_ckpt}
        (self.out_dir / "divergence.json").write_text(json.dumps(report, indent=1))

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()

    def result(self) -> TrainResult:
        gen = self._last_ckpt.get("gen", "")
        extra = {k: v for k, v in self._last_ckpt.items() if k != "gen"}
        return TrainResult(g_steps=self.g_step, history=self.history,
                           gen_path=gen, extra_paths=extra)


_KINDS = {
    ("bg", "gen"): "bg", ("bg", "disc"): "disc_global",
    ("fg", "gen"): "fg", ("fg", "disc"): "disc_global", ("fg", "disc_local"): "disc_local",
    ("maskgen", "gen"): "maskgen", ("maskgen", "disc"): "disc_mask",
}


def _resume(path: str | Path | None, module: torch.nn.Module,
            siblings: dict[str, torch.nn.Module]) -> None:
    """Load generator weights and any adjacent discriminator checkpoints."""
    if path is None:
        return
    load_checkpoint(path, module)
    name = str(path)
    for suffix, sibling in siblings.items():
        candidate = name.replace(".gen.ckpt", f".{suffix}.ckpt")
        if candidate != name and Path(candidate).exists():
            load_checkpoint(candidate, sibling)
        else:
            logger.warning("no %s checkpoint next to %s; that network starts fresh",
                           suffix, name)


def _image_batch(run: _Run, picks: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
    """Images and aggregated layout maps for the chosen record indices."""
    images, aggs = [], []
    for i in picks:
        rec = run.index.records[int(i)]
        images.append(rec.image.transpose(2, 0, 1))
        aggs.append(aggregate(rec.layout).transpose(2, 0, 1))
    x = torch.from_numpy(np.ascontiguousarray(np.stack(images), dtype=np.float32))
    m = torch.from_numpy(np.ascontiguousarray(np.stack(aggs), dtype=np.float32))
    return x, m


def train_bg(index: DatasetIndex, cfg: TrainConfig, out_dir: str | Path | None = None,
             resume: str | Path | None = None) -> TrainResult:
    """Adversarial training of the dual-branch background generator."""
    run = _Run(index, cfg, out_dir, "bg")
    g = BackgroundGenerator(cfg.net)
    d = ConditionalDiscriminator(cfg.net)
    _resume(resume, g, {"disc": d})
    g.train()
    d.train()
    g_opt = torch.optim.Adam(g.parameters(), lr=cfg.lr0, betas=cfg.betas)
    d_opt = torch.optim.Adam(d.parameters(), lr=cfg.lr0, betas=cfg.betas)
    n = len(index.records)

    try:
        while run.g_step < run.total_g_steps:
            run.set_lr(g_opt, d_opt)
            d_losses = []
            for _ in range(cfg.d_steps_per_g):
                x, m = _image_batch(run, run.rng.integers(0, n, size=cfg.batch))
                with torch.no_grad():
                    _, fake = g(run.noise(cfg.batch), m)
                real_scores, _ = d(x, m)
                fake_scores, _ = d(fake, m)
                d_loss = adv_loss_d(real_scores, fake_scores)
                d_opt.zero_grad(set_to_none=True)
                d_loss.backward()
                d_opt.step()
                run.d_step += 1
                d_losses.append(float(d_loss.item()))

            x, m = _image_batch(run, run.rng.integers(0, n, size=cfg.batch))
            occ = m.amax(dim=1, keepdim=True)
            x0, x0p = g(run.noise(cfg.batch), m)
            fake_scores, fake_feats = d(x0p, m)
            with torch.no_grad():
                _, real_feats = d(x, m)
            adv = adv_loss_g(fake_scores)
            rec = masked_l2(x0, x0p, occ)
            fm = feature_matching(real_feats, fake_feats)
            total = bg_total(adv, rec, fm, cfg.weights)
            g_opt.zero_grad(set_to_none=True)
            total.backward()
            g_opt.step()
            run.g_step += 1
            assert run.d_step == cfg.d_steps_per_g * run.g_step
            run.record({"d_loss": float(np.mean(d_losses)), "g_adv": float(adv.item()),
                        "rec": float(rec.item()), "fm": float(fm.item()),
                        "g_total": float(total.item())})
            run.checkpoint({"gen": g, "disc": d})
        run.checkpoint({"gen": g, "disc": d}, final=True)
    except TrainingDivergenceError as exc:
        run.divergence_report(str(exc))
        run.close()
        raise
    run.close()
    return run.result()


def _fg_batch(run: _Run) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor,
                                  torch.Tensor, list]:
    """(image, instance mask, masked input, box keep-map, boxes) tensors."""
    samples = sample_fg_batch(run.index, run.cfg.batch, run.rng)
    xs, ms, masked, box_maps, boxes = [], [], [], [], []
    for s in samples:
        inst = s.layout.instances[s.picked_index]
        occ = occupancy_of(inst)
        box = bbox_of(occ)
        xs.append(s.image.transpose(2, 0, 1))
        ms.append(inst.data.astype(np.float32).transpose(2, 0, 1))
        masked.append(mask_out(s.image, occ).transpose(2, 0, 1))
        box_maps.append(bbox_mask(box, occ.shape[0], occ.shape[1])[None].astype(np.float32))
        boxes.append(box)
    to_t = lambda arrs: torch.from_numpy(np.ascontiguousarray(np.stack(arrs), dtype=np.float32))
    return to_t(xs), to_t(ms), to_t(masked), to_t(box_maps), boxes


def train_fg(index: DatasetIndex, cfg: TrainConfig, out_dir: str | Path | None = None,
             resume: str | Path | None = None) -> TrainResult:
    """Adversarial training of the inpainting foreground generator."""
    run = _Run(index, cfg, out_dir, "fg")
    g = ForegroundGenerator(cfg.net)
    d_global = ConditionalDiscriminator(cfg.net)
    d_local = LocalDiscriminator(cfg.net)
    _resume(resume, g, {"disc": d_global, "disc_local": d_local})
    g.train()
    d_global.train()
    d_local.train()
    g_opt = torch.optim.Adam(g.parameters(), lr=cfg.lr0, betas=cfg.betas)
    d_opt = torch.optim.Adam(
        list(d_global.parameters()) + list(d_local.parameters()),
        lr=cfg.lr0, betas=cfg.betas,
    )

    try:
        while run.g_step < run.total_g_steps:
            run.set_lr(g_opt, d_opt)
            d_losses = []
            for _ in range(cfg.d_steps_per_g):
                x, m, masked, _, boxes = _fg_batch(run)
                with torch.no_grad():
                    fake = g(masked, m, run.noise(cfg.batch))
                real_g, _ = d_global(x, m)
                fake_g, _ = d_global(fake, m)
                real_l, _ = d_local(x, m, boxes)
                fake_l, _ = d_local(fake, m, boxes)
                d_loss = adv_loss_d(real_g, fake_g) + adv_loss_d(real_l, fake_l)
                d_opt.zero_grad(set_to_none=True)
                d_loss.backward()
                d_opt.step()
                run.d_step += 1
                d_losses.append(float(d_loss.item()))

            x, m, masked, box_map, boxes = _fg_batch(run)
            gen = g(masked, m, run.noise(cfg.batch))
            fake_g, fake_feats_g = d_global(gen, m)
            fake_l, fake_feats_l = d_local(gen, m, boxes)
            with torch.no_grad():
                _, real_feats_g = d_global(x, m)
                _, real_feats_l = d_local(x, m, boxes)
            adv_global = adv_loss_g(fake_g)
            adv_local = adv_loss_g(fake_l)
            rec = fg_rec_loss(gen, x, box_map)
            fm = (feature_matching(real_feats_g, fake_feats_g)
                  + feature_matching(real_feats_l, fake_feats_l))
            total = fg_total(adv_global, adv_local, rec, fm, cfg.weights)
            g_opt.zero_grad(set_to_none=True)
            total.backward()
            g_opt.step()
            run.g_step += 1
            assert run.d_step == cfg.d_steps_per_g * run.g_step
            run.record({"d_loss": float(np.mean(d_losses)), "g_adv": float(adv_global.item()),
                        "g_adv_local": float(adv_local.item()), "rec": float(rec.item()),
                        "fm": float(fm.item()), "g_total": float(total.item())})
            run.checkpoint({"gen": g, "disc": d_global, "disc_local": d_local})
        run.checkpoint({"gen": g, "disc": d_global, "disc_local": d_local}, final=True)
    except TrainingDivergenceError as exc:
        run.divergence_report(str(exc))
        run.close()
        raise
    run.close()
    return run.result()


def _mask_batch(run: _Run) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, list]:
    """(true occupancy, box map, class one-hots, boxes) for sampled instances."""
    samples = sample_fg_batch(run.index, run.cfg.batch, run.rng)
    occs, box_maps, onehots, boxes = [], [], [], []
    n_classes = run.cfg.net.n_classes
    for s in samples:
        inst = s.layout.instances[s.picked_index]
        occ = occupancy_of(inst)
        box = bbox_of(occ)
        occs.append(occ[None].astype(np.float32))
        box_maps.append(bbox_mask(box, occ.shape[0], occ.shape[1])[None].astype(np.float32))
        onehot = np.zeros(n_classes, dtype=np.float32)
        onehot[inst.class_id] = 1.0
        onehots.append(onehot)
        boxes.append(box)
    to_t = lambda arrs: torch.from_numpy(np.ascontiguousarray(np.stack(arrs), dtype=np.float32))
    return to_t(occs), to_t(box_maps), to_t(onehots), boxes


def train_mask_gen(index: DatasetIndex, cfg: TrainConfig,
                   out_dir: str | Path | None = None,
                   resume: str | Path | None = None) -> TrainResult:
    """Conditional box-and-class to mask training with CE reconstruction."""
    run = _Run(index, cfg, out_dir, "maskgen")
    g = MaskGenerator(cfg.net)
    d = MaskCropDiscriminator(cfg.net)
    _resume(resume, g, {"disc": d})
    g.train()
    d.train()
    g_opt = torch.optim.Adam(g.parameters(), lr=cfg.lr0, betas=cfg.betas)
    d_opt = torch.optim.Adam(d.parameters(), lr=cfg.lr0, betas=cfg.betas)

    try:
        while run.g_step < run.total_g_steps:
            run.set_lr(g_opt, d_opt)
            d_losses = []
            for _ in range(cfg.d_steps_per_g):
                occ, box_map, onehot, boxes = _mask_batch(run)
                with torch.no_grad():
                    fake = g(box_map, onehot, run.noise(run.cfg.batch))
                real_scores, _ = d(occ, onehot, boxes)
                fake_scores, _ = d(fake, onehot, boxes)
                d_loss = adv_loss_d(real_scores, fake_scores)
                d_opt.zero_grad(set_to_none=True)
                d_loss.backward()
                d_opt.step()
                run.d_step += 1
                d_losses.append(float(d_loss.item()))

            occ, box_map, onehot, boxes = _mask_batch(run)
            pred = g(box_map, onehot, run.noise(run.cfg.batch))
            fake_scores, _ = d(pred, onehot, boxes)
            adv = adv_loss_g(fake_scores)
            total, ce = mask_gen_loss(pred, occ, box_map, adv, cfg.weights)
            g_opt.zero_grad(set_to_none=True)
            total.backward()
            g_opt.step()
            run.g_step += 1
            assert run.d_step == cfg.d_steps_per_g * run.g_step
            run.record({"d_loss": float(np.mean(d_losses)), "g_adv": float(adv.item()),
                        "ce": float(ce.item()), "g_total": float(total.item())})
            run.checkpoint({"gen": g, "disc": d})
        run.checkpoint({"gen": g, "disc": d}, final=True)
    except TrainingDivergenceError as exc:
        run.divergence_report(str(exc))
        run.close()
        raise
    run.close()
    return run.result()
