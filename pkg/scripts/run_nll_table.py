#!/usr/bin/env python3
"""Train (or reuse) a checkpoint for one config and emit the likelihood
table with first-order corrections at both outer tolerances."""

import argparse
import sys
from pathlib import Path

import numpy as np

from wkb_lab.cli import _make_dataset, _make_schedule, load_config
from wkb_lab.likelihood import FdStencil, nll_dataset, write_nll_table
from wkb_lab.score import checkpoint_load, checkpoint_save
from wkb_lab.train import TrainConfig, train

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--config", required=True)
parser.add_argument("--out", default="out/nll")
parser.add_argument("--threads", type=int, default=2)
parser.add_argument("--tols", type=float, nargs="+", default=[1e-3, 1e-5])
args = parser.parse_args()

cfg = load_config(args.config)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
cloud = _make_dataset(cfg)
schedule = _make_schedule(cfg, dim=cloud.dim)
stem = f"{cloud.name}_{schedule.kind.value}"

ckpt = out / f"{stem}.ckpt"
if ckpt.exists():
    model, _ = checkpoint_load(ckpt)
    print(f"reusing {ckpt}", file=sys.stderr)
else:
    tc = TrainConfig(epochs=cfg.train["epochs"], batch_size=cfg.train["batch"],
                     lr=cfg.train["lr"], seed=cfg.train["seed"])
    model = train(tc, cloud, schedule).model
    checkpoint_save(model, ckpt, schedule, train_meta={"epochs": tc.epochs})

rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
    entropy=cfg.dataset["seed"], spawn_key=(0x7A11,))))
idx = rng.permutation(len(cloud))[: cfg.nll["n_points"]]
for tol in args.tols:
    summary = nll_dataset(model, schedule, cloud.points[idx],
                          stencil=FdStencil(cfg.nll["dx"]),
                          tol_outer=tol, tol_inner=cfg.nll["tol_inner"],
                          threads=args.threads)
    echo = cfg.echo()
    echo["nll.tol_outer"] = tol
    write_nll_table(out / f"{stem}_tol{tol:g}.tsv", summary, echo)
    print(f"{stem} tol={tol:g}: NLL {summary.nll_mean:+.3f}+-{summary.nll_stderr:.3f}"
          f"  1st-corr {summary.nll_corr_mean:+.3f}+-{summary.corr_stderr:.3f}"
          f"  errors {summary.err_mean:.3f}")
