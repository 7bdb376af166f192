"""Command-line entry points for data prep, training, composition, and serving."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .composer import EXPERIMENTS, ComposerEngine, compose, run_experiment
from .data import ingest_coco, load_canvas, load_index, load_layout, save_canvas, synth_dataset
from .errors import LayerCompError
from .evaluation import (
    RandomProjectionProvider,
    SyntheticClassifierProvider,
    SyntheticSegmenter,
    eval_protocol,
    fid,
)
from .losses import LossWeights
from .nets import (
    BackgroundGenerator,
    ForegroundGenerator,
    MaskGenerator,
    NetConfig,
    save_checkpoint,
)
from .trainer import TrainConfig, train_bg, train_fg, train_mask_gen


@click.group()
def main():
    """Layered scene composition toolkit."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command("synth-data")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n", "n_images", default=500, show_default=True, type=int)
@click.option("--size", default=64, show_default=True, type=int)
@click.option("--classes", "n_classes", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def synth_data_cmd(out_dir, n_images, size, n_classes, seed):
    """Generate the synthetic shapes dataset."""
    try:
        index = synth_dataset(n_images=n_images, size=size, n_classes=n_classes,
                              seed=seed, out_dir=out_dir)
    except LayerCompError as exc:
        _fail(exc)
    click.echo(f"wrote {len(index.records)} images to {out_dir}")


@main.command("ingest")
@click.option("--ann", "annotation_file", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--classes", "class_names", required=True,
              help="comma-separated class names to keep")
@click.option("--size", default=128, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def ingest_cmd(annotation_file, image_dir, class_names, size, out_dir):
    """Ingest COCO-format annotations into the internal layout format."""
    names = tuple(n.strip() for n in class_names.split(",") if n.strip())
    try:
        index = ingest_coco(annotation_file, image_dir, names, size, out_dir)
    except LayerCompError as exc:
        _fail(exc)
    click.echo(f"ingested {len(index.records)} images to {out_dir}")


def _load_train_config(config_path: str | None, data_dir: str) -> tuple[TrainConfig, "object"]:
    index = load_index(data_dir)
    if config_path is not None:
        doc = json.loads(Path(config_path).read_text())
        cfg = TrainConfig.from_dict(doc)
    else:
        size = index.records[0].image.shape[0]
        n_classes = index.records[0].layout.n_classes
        cfg = TrainConfig(net=NetConfig(image_size=size, n_classes=n_classes))
    return cfg, index


def _train_command(name, fn):
    @main.command(name)
    @click.option("--config", "config_path", type=click.Path(exists=True))
    @click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
    @click.option("--out", "out_dir", required=True, type=click.Path())
    @click.option("--resume", "resume_path", type=click.Path(exists=True))
    def cmd(config_path, data_dir, out_dir, resume_path):
        try:
            cfg, index = _load_train_config(config_path, data_dir)
            result = fn(index, cfg, out_dir=out_dir, resume=resume_path)
        except LayerCompError as exc:
            _fail(exc)
        click.echo(f"finished {result.g_steps} generator steps; "
                   f"checkpoint: {result.gen_path}")

    cmd.__doc__ = f"Train the {name.split('-', 1)[1]} model."
    return cmd


_train_command("train-bg", train_bg)
_train_command("train-fg", train_fg)
_train_command("train-maskgen", train_mask_gen)


def _engine(bg_ckpt, fg_ckpt, mask_ckpt) -> ComposerEngine:
    return ComposerEngine.from_checkpoints(bg_ckpt, fg_ckpt, mask_ckpt)


@main.command("compose")
@click.option("--layout", "layout_path", required=True, type=click.Path(exists=True))
@click.option("--bg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--fg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--mask-ckpt", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--mode", default="hard", show_default=True,
              type=click.Choice(["hard", "raw"]))
@click.option("--out", "out_path", required=True, type=click.Path())
def compose_cmd(layout_path, bg_ckpt, fg_ckpt, mask_ckpt, seed, mode, out_path):
    """Compose one scene image from a layout file."""
    try:
        engine = _engine(bg_ckpt, fg_ckpt, mask_ckpt)
        layout = load_layout(layout_path)
        canvas = compose(engine, layout, seed, mode=mode)
        save_canvas(out_path, canvas)
    except LayerCompError as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}")


@main.command("experiment")
@click.argument("name", type=click.Choice(EXPERIMENTS))
@click.option("--bg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--fg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--mask-ckpt", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--cols", default=5, show_default=True, type=int)
@click.option("--rows", default=5, show_default=True, type=int)
def experiment_cmd(name, bg_ckpt, fg_ckpt, mask_ckpt, out_dir, seed, cols, rows):
    """Run one of the scripted composition scenarios."""
    try:
        engine = _engine(bg_ckpt, fg_ckpt, mask_ckpt)
        paths = run_experiment(name, engine, out_dir, seed=seed,
                               n_cols=cols, n_rows=rows)
    except LayerCompError as exc:
        _fail(exc)
    for p in paths:
        click.echo(str(p))


@main.group("eval")
def eval_group():
    """Evaluation metrics."""


def _load_png_dir(path: str) -> list[np.ndarray]:
    files = sorted(Path(path).glob("*.png"))
    if not files and (Path(path) / "images").is_dir():
        files = sorted((Path(path) / "images").glob("*.png"))
    if not files:
        raise LayerCompError(f"no .png files in {path}")
    return [load_canvas(p) for p in files]


@eval_group.command("fid")
@click.option("--real", "real_dir", required=True, type=click.Path(exists=True))
@click.option("--fake", "fake_dir", required=True, type=click.Path(exists=True))
@click.option("--provider", "provider_name", default="random-projection",
              show_default=True,
              type=click.Choice(["random-projection", "synthetic-classifier"]))
@click.option("--train-data", "train_data", type=click.Path(exists=True),
              help="dataset dir to fit the synthetic-classifier provider on")
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def eval_fid_cmd(real_dir, fake_dir, provider_name, train_data, dim, seed):
    """FID between two directories of PNG images."""
    try:
        if provider_name == "synthetic-classifier":
            if train_data is None:
                raise LayerCompError("synthetic-classifier needs --train-data")
            provider = SyntheticClassifierProvider(dim=dim, seed=seed).fit(
                load_index(train_data))
        else:
            provider = RandomProjectionProvider(dim=dim, seed=seed)
        value = fid(_load_png_dir(real_dir), _load_png_dir(fake_dir), provider)
    except LayerCompError as exc:
        _fail(exc)
    click.echo(json.dumps({"fid": value, "provider": provider.name}))


@eval_group.command("iou")
@click.option("--bg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--fg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--mask-ckpt", type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default="train", show_default=True,
              type=click.Choice(["train", "val"]))
@click.option("--n-images", default=50, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--val-frac", default=0.1, show_default=True, type=float)
@click.option("--out", "out_path", type=click.Path())
def eval_iou_cmd(bg_ckpt, fg_ckpt, mask_ckpt, data_dir, split, n_images, seed,
                 val_frac, out_path):
    """Compose scenes from dataset layouts and report FID plus mean IoU."""
    from .data import DatasetIndex

    try:
        engine = _engine(bg_ckpt, fg_ckpt, mask_ckpt)
        index = load_index(data_dir)
        n_val = max(int(len(index.records) * val_frac), 1)
        train_index = DatasetIndex(records=index.records[:-n_val],
                                   palette=index.palette)
        val_index = DatasetIndex(records=index.records[-n_val:],
                                 palette=index.palette)
        provider = SyntheticClassifierProvider(seed=seed).fit(train_index)
        segmenter = SyntheticSegmenter(seed=seed).fit(train_index)
        report = eval_protocol(engine, train_index, val_index, n_images, seed,
                               provider, segmenter)
        if out_path:
            report.save(out_path)
    except LayerCompError as exc:
        _fail(exc)
    doc = report.to_dict()
    doc["requested_split_mean_iou"] = doc["iou"][split]["mean"]
    click.echo(json.dumps(doc, indent=1))


@main.command("serve")
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--bg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--fg-ckpt", required=True, type=click.Path(exists=True))
@click.option("--mask-ckpt", type=click.Path(exists=True))
@click.option("--session-dir", type=click.Path())
def serve_cmd(port, host, bg_ckpt, fg_ckpt, mask_ckpt, session_dir):
    """Serve the composition HTTP API."""
    import uvicorn

    from .service import create_app

    try:
        engine = _engine(bg_ckpt, fg_ckpt, mask_ckpt)
    except LayerCompError as exc:
        _fail(exc)
    app = create_app(engine, session_dir=session_dir)
    uvicorn.run(app, host=host, port=port)


@main.command("init-ckpts")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--size", default=64, show_default=True, type=int)
@click.option("--classes", "n_classes", default=3, show_default=True, type=int)
@click.option("--z-dim", default=64, show_default=True, type=int)
@click.option("--base-channels", default=16, show_default=True, type=int)
@click.option("--blocks", "n_blocks", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def init_ckpts_cmd(out_dir, size, n_classes, z_dim, base_channels, n_blocks, seed):
    """Write untrained checkpoints (plumbing for serve/compose without training)."""
    import torch

    try:
        cfg = NetConfig(image_size=size, n_classes=n_classes, z_dim=z_dim,
                        base_channels=base_channels, n_blocks=n_blocks)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        torch.manual_seed(seed)
        for fname, cls, kind in (("bg.gen.ckpt", BackgroundGenerator, "bg"),
                                 ("fg.gen.ckpt", ForegroundGenerator, "fg"),
                                 ("maskgen.gen.ckpt", MaskGenerator, "maskgen")):
            save_checkpoint(out / fname, cls(cfg), kind, 0)
            click.echo(str(out / fname))
    except LayerCompError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
