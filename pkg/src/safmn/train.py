"""Training loop: patch sampling, composite loss, Adam, cosine annealing.

Runs are fully determined by (config, seed): the sampler, initialization,
and every update are driven from explicit seeds, and the JSON-lines log plus
final checkpoint are byte-identical across reruns in test mode.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .errors import DataError, TrainingError
from .loss import LossConfig, composite_loss
from .model import ModelConfig, SafmnModel, init_model
from .optim import Adam, CosineSchedule
from .imaging.resize import bicubic_resize
from .imaging.sampler import PatchSampler


@dataclass
class TrainConfig:
    iters: int = 500_000
    batch_size: int = 64
    patch_size: int = 64
    seed: int = 0
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    loss: LossConfig = field(default_factory=LossConfig)
    augment: bool = True
    log_every: int = 100
    checkpoint_every: int = 0  # 0 disables periodic checkpoints


@dataclass
class TrainResult:
    model: SafmnModel
    first_loss: float
    final_loss: float
    iterations: int


def prepare_pairs(
    hr_images: list[np.ndarray], scale: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Center-crop HR images to scale divisibility and degrade to LR."""
    pairs = []
    for hr in hr_images:
        _, h, w = hr.shape
        h2, w2 = (h // scale) * scale, (w // scale) * scale
        if h2 < scale or w2 < scale:
            raise DataError(f"image {w}x{h} too small for scale {scale}")
        oy, ox = (h - h2) // 2, (w - w2) // 2
        hr_c = np.ascontiguousarray(hr[:, oy : oy + h2, ox : ox + w2])
        lr = bicubic_resize(hr_c, h2 // scale, w2 // scale)
        pairs.append((lr, hr_c))
    return pairs


def train(
    model: SafmnModel,
    hr_images: list[np.ndarray],
    cfg: TrainConfig,
    log_stream=None,
    checkpoint_path=None,
) -> TrainResult:
    """Optimize ``model`` on the given HR images (LR derived by bicubic)."""
    if not hr_images:
        raise DataError("no training images")
    scale = model.config.scale
    pairs = prepare_pairs(hr_images, scale)
    sampler = PatchSampler(cfg.patch_size, cfg.batch_size, seed=cfg.seed, augment=cfg.augment)
    pick = np.random.default_rng(cfg.seed + 1)
    schedule = CosineSchedule(cfg.lr_max, cfg.lr_min, cfg.iters)
    opt = Adam(list(model.named_parameters()))
    first_loss = math.nan
    loss_val = math.nan

    def log(it: int, value: float, lr: float) -> None:
        if log_stream is not None:
            log_stream.write(json.dumps({"iter": it, "loss": value, "lr": lr}) + "\n")

    for it in range(cfg.iters):
        lr_now = schedule.lr_at(it)
        lr_img, hr_img = pairs[int(pick.integers(0, len(pairs)))]
        lr_batch, hr_batch = sampler.sample(lr_img, hr_img, scale)
        model.zero_grad()
        out = model(lr_batch)
        loss_node = composite_loss(out, hr_batch, cfg.loss)
        loss_val = loss_node.item()
        if not math.isfinite(loss_val):
            # Parameters still hold the last good step; keep them on disk.
            if checkpoint_path is not None:
                save_checkpoint(model, checkpoint_path, iteration=it, seed=cfg.seed, optimizer=opt)
            raise TrainingError(f"non-finite loss {loss_val} at iteration {it}")
        if it == 0:
            first_loss = loss_val
        loss_node.backward()
        try:
            opt.step(lr_now)
        except TrainingError:
            if checkpoint_path is not None:
                save_checkpoint(model, checkpoint_path, iteration=it, seed=cfg.seed, optimizer=opt)
            raise
        if cfg.log_every and (it % cfg.log_every == 0 or it == cfg.iters - 1):
            log(it, loss_val, lr_now)
        if (
            checkpoint_path is not None
            and cfg.checkpoint_every
            and (it + 1) % cfg.checkpoint_every == 0
        ):
            save_checkpoint(model, checkpoint_path, iteration=it + 1, seed=cfg.seed, optimizer=opt)
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, iteration=cfg.iters, seed=cfg.seed, optimizer=opt)
    return TrainResult(model, first_loss, loss_val, cfg.iters)


def train_fresh(
    config: ModelConfig,
    hr_images: list[np.ndarray],
    cfg: TrainConfig,
    log_stream=None,
    checkpoint_path=None,
) -> TrainResult:
    """Initialize from the training seed and run :func:`train`."""
    model = init_model(config, seed=cfg.seed)
    return train(model, hr_images, cfg, log_stream, checkpoint_path)
