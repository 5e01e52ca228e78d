"""Generative sampling: noise-interpolated reverse SDE and probability-flow ODE.

The reverse process runs from t_max down to t_min.  With noise strength h,
Euler-Maruyama updates on a uniform grid read

    x_{t-dt} = x_t - dt [ f(x_t, t) - ((1+h)/2) g(t)^2 s(x_t, t) ]
               + sqrt(h dt) g(t) z,   z ~ N(0, I),

so h = 0 degenerates to the deterministic probability-flow drift
f - (g^2/2) s and h = 1 to the standard reverse SDE.  Per-trajectory noise
streams are derived from (seed, trajectory index), so results do not depend
on chunking or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PointCloud
from .errors import NonFinite
from .ode import OdeProblem, solve_adaptive
from .schedule import Schedule

_CHUNK = 1024


@dataclass
class SamplerConfig:
    h: float = 0.0
    n_steps: int = 1000
    seed: int = 0
    tol: float = 1e-5

    def __post_init__(self):
        if self.h < 0.0:
            raise ValueError("h must be nonnegative")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass
class Trajectory:
    """Times descending from t_max to t_min with matching states."""

    times: np.ndarray
    states: np.ndarray  # (len(times), d)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def draw_latents(seed: int, n: int, dim: int) -> np.ndarray:
    """Standard-normal initial latents x_{t_max}, one per trajectory stream."""
    out = np.empty((n, dim))
    for i in range(n):
        out[i] = _trajectory_rng(seed, i).standard_normal(dim)
    return out


def _chunk_noise(seed: int, lo: int, hi: int, n_steps: int, dim: int) -> np.ndarray:
    """(hi-lo, n_steps, d) per-step normals; draw index 0 is the latent."""
    out = np.empty((hi - lo, n_steps, dim))
    for i in range(lo, hi):
        rng = _trajectory_rng(seed, i)
        rng.standard_normal(dim)  # skip the latent draw
        out[i - lo] = rng.standard_normal((n_steps, dim))
    return out


def em_sweep(score, schedule: Schedule, h: float, ts: np.ndarray, x0: np.ndarray,
             noise: np.ndarray | None, keep_history: int = 0
             ) -> tuple[np.ndarray, np.ndarray | None]:
    """Euler-Maruyama over a descending time grid for a batch of states.

    ``noise`` has shape (batch, len(ts)-1, d) of unit normals, or None for a
    purely deterministic sweep (h is still applied to the drift).  Passing
    the same increments at a coarsened grid (summed and renormalized) gives
    matched-noise refinement experiments.
    """
    ts = np.asarray(ts, dtype=float)
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    n_steps = ts.size - 1
    hist = None
    if keep_history:
        hist = np.empty((keep_history, ts.size, x.shape[1]))
        hist[:, 0] = x[:keep_history]
    a_grid = np.asarray(schedule.drift_coef(ts[:-1]))
    g2_grid = np.asarray(schedule.g2(ts[:-1]))
    for k in range(n_steps):
        t, dt = ts[k], ts[k] - ts[k + 1]
        drift = a_grid[k] * x - 0.5 * (1.0 + h) * g2_grid[k] * np.asarray(score(x, t))
        x = x - dt * drift
        if noise is not None and h > 0.0:
            x = x + np.sqrt(h * dt * g2_grid[k]) * noise[:, k]
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"sampler state not finite at step {k} (t={t:.6g})")
        if keep_history:
            hist[:, k + 1] = x[:keep_history]
    return x, hist


def sample_sde(score, schedule: Schedule, config: SamplerConfig, n: int,
               latents: np.ndarray | None = None, n_record: int = 0
               ) -> tuple[PointCloud, list[Trajectory]]:
    """Draw n samples by Euler-Maruyama on a uniform reverse-time grid.

    ``latents`` overrides the seeded x_{t_max} draws (matched-noise tests);
    the first ``n_record`` trajectories are returned alongside the cloud.
    """
    d = schedule.dim
    ts = np.linspace(schedule.t_max, schedule.t_min, config.n_steps + 1)
    if latents is None:
        latents = draw_latents(config.seed, n, d)
    else:
        latents = np.atleast_2d(np.asarray(latents, dtype=float))
        if latents.shape != (n, d):
            raise ValueError(f"latents must have shape {(n, d)}")
    out = np.empty((n, d))
    recorded: list[Trajectory] = []

    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        noise = None
        if config.h > 0.0:
            noise = _chunk_noise(config.seed, lo, hi, config.n_steps, d)
        rec = max(0, min(n_record - lo, hi - lo))
        x, hist = em_sweep(score, schedule, config.h, ts, latents[lo:hi],
                           noise, keep_history=rec)
        out[lo:hi] = x
        for j in range(rec):
            recorded.append(Trajectory(times=ts.copy(), states=hist[j]))
    cloud = PointCloud(points=out, name=f"sde-h{config.h:g}", seed=config.seed)
    return cloud, recorded


def pf_drift(score, schedule: Schedule, x: np.ndarray, t: float) -> np.ndarray:
    """Probability-flow drift f - (g^2 / 2) s."""
    return schedule.drift_coef(t) * x - 0.5 * schedule.g2(t) * np.asarray(score(x, t))


def sample_ode(score, schedule: Schedule, n: int, tol: float = 1e-5, seed: int = 0,
               latents: np.ndarray | None = None) -> PointCloud:
    """Deterministic samples: integrate the probability-flow ODE backward."""
    d = schedule.dim
    if latents is None:
        latents = draw_latents(seed, n, d)
    else:
        latents = np.atleast_2d(np.asarray(latents, dtype=float))

    def rhs(t, y):
        x = y.reshape(-1, d)
        return pf_drift(score, schedule, x, t).ravel()

    sol = solve_adaptive(OdeProblem(rhs=rhs, t0=schedule.t_max, t1=schedule.t_min,
                                    y0=latents.ravel(), atol=tol, rtol=tol))
    return PointCloud(points=sol.y_final.reshape(-1, d), name="pf-ode", seed=seed)


def save_trajectories(trajectories: list[Trajectory], path) -> None:
    """One row per (trajectory id, t, x components), tab separated."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# trajectory\tt\tx...\n")
        for j, traj in enumerate(trajectories):
            for t, state in zip(traj.times, traj.states):
                coords = "\t".join(f"{v:.17g}" for v in state)
                fh.write(f"{j}\t{t:.17g}\t{coords}\n")
