"""Command-line surface: reproducible runs driven by an INI config file.

Commands
--------
gen-data    write the configured dataset to disk
train       train a score model, write checkpoint + loss trace
sample      draw samples from a checkpoint at a given noise strength
nll         per-point likelihood table with first-order corrections
w2-sweep    2-Wasserstein distance vs noise strength
gaussian    closed-form curves and identity-residual grid of the oracle
verify      self-contained oracle/property checks; nonzero exit on failure

Every output file starts with a ``#``-prefixed echo of the resolved
configuration; rerunning a command with the same config reproduces the
values.  The environment variable WKB_LAB_SEED overrides all seeds.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .errors import ConfigError, WkbLabError
from .gaussian_oracle import GaussianModel, gaussian_curves, flow_identity_residual_grid
from .likelihood import FdStencil, nll_dataset, write_nll_table
from .sampler import SamplerConfig, sample_sde, save_trajectories
from .schedule import Schedule, ScheduleKind
from .score import checkpoint_load, checkpoint_save
from .train import TrainConfig, save_loss_trace, train
from .wasserstein import w2_exact

_ENV_SEED = "WKB_LAB_SEED"

_SCHEMA = {
    "dataset": {"name": str, "n": int, "seed": int},
    "schedule": {"kind": str, "beta": float, "t_min": float, "t_max": float},
    "train": {"epochs": int, "batch": int, "lr": float, "seed": int},
    "nll": {"dx": float, "tol_outer": float, "tol_inner": float, "n_points": int},
    "sweep": {"h_values": str, "trials": int, "n_samples": int},
}

_DEFAULTS = {
    "dataset": {"name": "swiss-roll", "n": 3000, "seed": 7},
    "schedule": {"kind": "simple", "beta": 20.0, "t_min": 0.01, "t_max": 1.0},
    "train": {"epochs": 2000, "batch": 512, "lr": 1e-3, "seed": 11},
    "nll": {"dx": 0.01, "tol_outer": 1e-3, "tol_inner": 1e-5, "n_points": 50},
    "sweep": {"h_values": "0,0.2,0.5,1", "trials": 10, "n_samples": 2000},
}


@dataclass
class RunConfig:
    dataset: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    nll: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {}
        for section in _SCHEMA:
            for key, val in getattr(self, section.replace("-", "_")).items():
                out[f"{section}.{key}"] = val
        return out


def load_config(path: str | None) -> RunConfig:
    """Parse and validate the INI config; unknown sections or keys reject."""
    sections = {name: dict(defaults) for name, defaults in _DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                try:
                    sections[section][key] = _SCHEMA[section][key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    cfg = RunConfig(**sections)
    _validate(cfg)
    seed_env = os.environ.get(_ENV_SEED)
    if seed_env is not None:
        try:
            seed = int(seed_env)
        except ValueError as exc:
            raise ConfigError(f"{_ENV_SEED} must be an integer") from exc
        cfg.dataset["seed"] = seed
        cfg.train["seed"] = seed
    return cfg


def _validate(cfg: RunConfig) -> None:
    ds, sc, tr, nl, sw = cfg.dataset, cfg.schedule, cfg.train, cfg.nll, cfg.sweep
    if ds["name"] not in ("swiss-roll", "25-gaussian"):
        raise ConfigError(f"unknown dataset {ds['name']!r}")
    if ds["n"] < 1:
        raise ConfigError("dataset.n must be >= 1")
    try:
        ScheduleKind(sc["kind"])
    except ValueError as exc:
        raise ConfigError(f"unknown schedule kind {sc['kind']!r}") from exc
    if not (sc["beta"] > 0 and 0 < sc["t_min"] < 1 and sc["t_max"] > sc["t_min"]):
        raise ConfigError("schedule parameters out of range")
    if tr["epochs"] < 0 or tr["batch"] < 1 or tr["lr"] <= 0:
        raise ConfigError("train parameters out of range")
    if nl["dx"] <= 0 or nl["tol_outer"] <= 0 or nl["tol_inner"] <= 0 or nl["n_points"] < 1:
        raise ConfigError("nll parameters out of range")
    hs = _parse_h_values(sw["h_values"])
    if any(h < 0 for h in hs) or sw["trials"] < 1 or sw["n_samples"] < 1:
        raise ConfigError("sweep parameters out of range")


def _parse_h_values(raw: str) -> list[float]:
    try:
        return [float(tok) for tok in str(raw).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad sweep.h_values: {raw!r}") from exc


def _make_schedule(cfg: RunConfig, dim: int = 2) -> Schedule:
    sc = cfg.schedule
    return Schedule(kind=ScheduleKind(sc["kind"]), beta=sc["beta"],
                    t_min=sc["t_min"], t_max=sc["t_max"], dim=dim)


def _make_dataset(cfg: RunConfig) -> data_mod.PointCloud:
    ds = cfg.dataset
    if ds["name"] == "swiss-roll":
        return data_mod.make_swiss_roll(ds["n"], seed=ds["seed"])
    return data_mod.make_25gaussian(ds["n"], seed=ds["seed"])


def _write_table(path: Path, rows, header: str, echo: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in echo.items():
            fh.write(f"# {key} = {val}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write("\t".join(f"{v:.12g}" if isinstance(v, float) else str(v)
                               for v in row) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    cloud = _make_dataset(cfg)
    out = _out_dir(args)
    data_mod.save_cloud(cloud, out / f"{cloud.name}.tsv")
    print(f"wrote {out / (cloud.name + '.tsv')} ({len(cloud)} points)")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.epochs is not None:
        cfg.train["epochs"] = args.epochs
    cloud = _make_dataset(cfg)
    schedule = _make_schedule(cfg, dim=cloud.dim)
    tc = TrainConfig(epochs=cfg.train["epochs"], batch_size=cfg.train["batch"],
                     lr=cfg.train["lr"], seed=cfg.train["seed"])
    result = train(tc, cloud, schedule)
    out = _out_dir(args)
    stem = f"{cloud.name}_{schedule.kind.value}"
    ckpt = out / f"{stem}.ckpt"
    checkpoint_save(result.model, ckpt, schedule,
                    train_meta={"epochs": tc.epochs, "batch_size": tc.batch_size,
                                "lr": tc.lr, "time_grid_size": tc.time_grid_size})
    save_loss_trace(result.loss_trace, out / f"{stem}_loss.tsv")
    final = result.loss_trace[-1] if len(result.loss_trace) else float("nan")
    print(f"wrote {ckpt} (final epoch loss {final:.6g})")
    return 0


def _load_checkpoint(args, cfg: RunConfig):
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required for this command")
    model, meta = checkpoint_load(args.checkpoint)
    kind = meta["schedule_kind"] or ScheduleKind(cfg.schedule["kind"])
    schedule = Schedule(kind=kind, beta=meta["beta"] or cfg.schedule["beta"],
                        t_min=meta["t_min"] or cfg.schedule["t_min"],
                        t_max=meta["t_max"] or cfg.schedule["t_max"],
                        dim=model.dim)
    return model, schedule


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    model, schedule = _load_checkpoint(args, cfg)
    n = args.n or cfg.sweep["n_samples"]
    sampler = SamplerConfig(h=args.h, n_steps=args.n_steps, seed=cfg.dataset["seed"])
    cloud, trajs = sample_sde(model, schedule, sampler, n, n_record=args.record)
    out = _out_dir(args)
    cloud.name = f"samples_h{args.h:g}"
    data_mod.save_cloud(cloud, out / f"{cloud.name}.tsv")
    if trajs:
        save_trajectories(trajs, out / f"trajectories_h{args.h:g}.tsv")
    print(f"wrote {out / (cloud.name + '.tsv')}")
    return 0


def cmd_nll(args) -> int:
    cfg = load_config(args.config)
    model, schedule = _load_checkpoint(args, cfg)
    nl = dict(cfg.nll)
    if args.dx is not None:
        nl["dx"] = args.dx
    if args.tol_outer is not None:
        nl["tol_outer"] = args.tol_outer
    if args.tol_inner is not None:
        nl["tol_inner"] = args.tol_inner
    cloud = _make_dataset(cfg)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.dataset["seed"], spawn_key=(0x7A11,))))
    idx = rng.permutation(len(cloud))[: nl["n_points"]]
    summary = nll_dataset(model, schedule, cloud.points[idx],
                          stencil=FdStencil(dx=nl["dx"]),
                          tol_outer=nl["tol_outer"], tol_inner=nl["tol_inner"],
                          err_scheme=args.scheme, threads=args.threads)
    out = _out_dir(args)
    echo = cfg.echo()
    echo["nll.scheme"] = args.scheme
    write_nll_table(out / "nll_table.tsv", summary, echo)
    print(f"NLL = {summary.nll_mean:.4f} +- {summary.nll_stderr:.4f}  "
          f"1st-corr = {summary.nll_corr_mean:.4f} +- {summary.corr_stderr:.4f}  "
          f"errors = {summary.err_mean:.4f}  "
          f"(failed {summary.n_failed}/{summary.n_points})")
    return 0


def _w2_trial(job):
    model, schedule, cloud_points, data_seed, train_seed, n, h, trial = job
    val_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        entropy=data_seed, spawn_key=(0x7E57, trial))))
    val = cloud_points[val_rng.permutation(len(cloud_points))[:n]]
    gen_seed = int(np.random.SeedSequence(
        entropy=train_seed, spawn_key=(0x5A3, trial)).generate_state(1)[0])
    samples, _ = sample_sde(model, schedule, SamplerConfig(h=h, seed=gen_seed), n)
    return w2_exact(val, samples).distance


def cmd_w2_sweep(args) -> int:
    from concurrent.futures import ProcessPoolExecutor

    cfg = load_config(args.config)
    model, schedule = _load_checkpoint(args, cfg)
    sw = cfg.sweep
    n = sw["n_samples"]
    cloud = _make_dataset(cfg)
    rows = []
    for h in _parse_h_values(sw["h_values"]):
        jobs = [(model, schedule, cloud.points, cfg.dataset["seed"],
                 cfg.train["seed"], n, h, trial) for trial in range(sw["trials"])]
        if args.threads > 1:
            with ProcessPoolExecutor(max_workers=args.threads) as pool:
                dists = list(pool.map(_w2_trial, jobs))
        else:
            dists = [_w2_trial(job) for job in jobs]
        dists = np.asarray(dists)
        stderr = dists.std(ddof=1) / np.sqrt(len(dists)) if len(dists) > 1 else 0.0
        rows.append((float(h), float(dists.mean()), float(stderr)))
    out = _out_dir(args)
    _write_table(out / "w2_sweep.tsv", rows, "h\tw2_mean\tw2_stderr", cfg.echo())
    for h, mean, err in rows:
        print(f"h={h:g}: W2 = {mean:.4f} +- {err:.4f}")
    return 0


def cmd_gaussian(args) -> int:
    model = GaussianModel(beta=args.beta, v0=args.v0, epsilon=args.eps, T=args.T)
    hs = np.linspace(0.0, 1.0, args.n_h)
    out = _out_dir(args)
    echo = {"gaussian.beta": args.beta, "gaussian.v0": args.v0,
            "gaussian.epsilon": args.eps, "gaussian.T": args.T}
    _write_table(out / "gaussian_curves.tsv", gaussian_curves(model, hs),
                 "h\tnll\tw2", echo)
    grid = flow_identity_residual_grid(model, [0.0, 0.25, 0.5, 1.0], [-0.2, 0.0, 0.3])
    _write_table(out / "flow_identity_residuals.tsv", grid, "h\teps\tresidual", echo)
    worst = max(r for _, _, r in grid)
    print(f"wrote curves and residual grid (max residual {worst:.3e})")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verification

    failures = run_verification(sys.stdout)
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wkb-lab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", default=None, help="INI run-config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        if checkpoint:
            p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("gen-data", help="write the configured dataset")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a score model")
    common(p)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample from a checkpoint")
    common(p, checkpoint=True)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--n-steps", type=int, default=1000)
    p.add_argument("--record", type=int, default=0, help="dump this many trajectories")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("nll", help="likelihood table with corrections")
    common(p, checkpoint=True)
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--tol-outer", type=float, default=None)
    p.add_argument("--tol-inner", type=float, default=None)
    p.add_argument("--scheme", choices=["model", "subtraction"], default="model")
    p.set_defaults(func=cmd_nll)

    p = sub.add_parser("w2-sweep", help="W2 vs noise strength")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_w2_sweep)

    p = sub.add_parser("gaussian", help="closed-form oracle curves")
    common(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--v0", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--n-h", type=int, default=21)
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("verify", help="run the oracle/property checks")
    common(p)
    p.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WkbLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
