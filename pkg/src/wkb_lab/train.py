"""Training loop: minibatch denoising score matching with Adam.

One epoch runs ceil(n / batch_size) steps; minibatch indices are drawn with
replacement each step, and the per-step noise stream is derived from
(seed, step counter), so a fixed config reproduces the loss trace exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PointCloud
from .errors import NonFinite
from .schedule import Schedule
from .score import AdamState, MlpScore, adam_step, dsm_loss


@dataclass
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 512
    lr: float = 1e-3
    time_grid_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainResult:
    model: MlpScore
    loss_trace: np.ndarray  # per-epoch mean loss
    config: TrainConfig = field(repr=False, default=None)


def train(config: TrainConfig, dataset: PointCloud, schedule: Schedule) -> TrainResult:
    n = len(dataset)
    if config.batch_size > n:
        raise ValueError("batch_size exceeds the dataset size")
    model = MlpScore.create(dim=dataset.dim, seed=config.seed)
    params = model.params()
    adam = AdamState.init(params, lr=config.lr)
    batch_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(0xBA7C,))))
    steps_per_epoch = -(-n // config.batch_size)

    trace = np.empty(config.epochs)
    step = 0
    for epoch in range(config.epochs):
        epoch_losses = np.empty(steps_per_epoch)
        for k in range(steps_per_epoch):
            idx = batch_rng.integers(0, n, size=config.batch_size)
            noise_rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(0xD5, step))))
            out = dsm_loss(model, dataset.points[idx], schedule, noise_rng,
                           time_grid_size=config.time_grid_size)
            if not np.isfinite(out.loss):
                pnorm = float(np.sqrt(sum(float(np.sum(p * p)) for p in params)))
                raise NonFinite(
                    f"loss diverged at epoch {epoch}, batch {k} (param norm {pnorm:.3e})")
            params = adam_step(adam, params, out.grads)
            model.set_params(params)
            epoch_losses[k] = out.loss
            step += 1
        trace[epoch] = epoch_losses.mean()
    return TrainResult(model=model, loss_trace=trace, config=config)


def save_loss_trace(trace: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# epoch\tloss\n")
        for i, v in enumerate(np.asarray(trace, dtype=float)):
            fh.write(f"{i}\t{v:.12g}\n")
