#!/usr/bin/env python3
"""Sampling-quality sweep: exact 2-Wasserstein distance between validation
data and generated clouds across noise strengths, mean +- stderr over trials."""

import argparse
from pathlib import Path

import numpy as np

from wkb_lab.cli import _make_dataset, _make_schedule, _parse_h_values, load_config
from wkb_lab.sampler import SamplerConfig, sample_sde
from wkb_lab.score import checkpoint_load
from wkb_lab.wasserstein import w2_exact

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--config", required=True)
parser.add_argument("--checkpoint", required=True)
parser.add_argument("--out", default="out/w2")
args = parser.parse_args()

cfg = load_config(args.config)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
model, _ = checkpoint_load(args.checkpoint)
schedule = _make_schedule(cfg, dim=model.dim)
cloud = _make_dataset(cfg)
n = cfg.sweep["n_samples"]

rows = []
for h in _parse_h_values(cfg.sweep["h_values"]):
    dists = []
    for trial in range(cfg.sweep["trials"]):
        val_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
            entropy=cfg.dataset["seed"], spawn_key=(0x7E57, trial))))
        val = cloud.points[val_rng.permutation(len(cloud))[:n]]
        gen_seed = int(np.random.SeedSequence(
            entropy=cfg.train["seed"], spawn_key=(0x5A3, trial)).generate_state(1)[0])
        samples, _ = sample_sde(model, schedule, SamplerConfig(h=h, seed=gen_seed), n)
        dists.append(w2_exact(val, samples).distance)
    dists = np.asarray(dists)
    rows.append((h, dists.mean(), dists.std(ddof=1) / np.sqrt(len(dists))))
    print(f"h={h:g}: W2 = {rows[-1][1]:.4f} +- {rows[-1][2]:.4f}")

with open(out / "w2_sweep.tsv", "w") as fh:
    fh.write("h\tw2_mean\tw2_stderr\n")
    for h, mean, err in rows:
        fh.write(f"{h:g}\t{mean:.12g}\t{err:.12g}\n")
