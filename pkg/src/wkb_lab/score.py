"""Score functions: trainable MLP with hand-rolled reverse mode, and the
analytic Gaussian score, plus denoising score matching loss and Adam.

The network is fixed to four dense layers (d+1 -> 128 -> 128 -> 128 -> d)
with swish activations after the first three, the scalar time concatenated
to the state at the input.  The backward pass is specialised to this
architecture and is verified against central finite differences in the test
suite.  Spatial derivatives of any score (divergence, Jacobian action and
derivatives of the divergence) are always taken with central-difference
stencils, never by differentiating the network; that keeps one stencil
policy for everything downstream.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import PointCloud
from .errors import ArchitectureMismatch, CorruptFile, NonFinite, VersionMismatch
from .schedule import Schedule, ScheduleKind

_HIDDEN = 128
_N_HIDDEN = 3
_TIME_GRID_DEFAULT = 1000


def _swish(z):
    s = expit(z)
    return z * s, s


def _swish_grad(z, s):
    # d/dz [z * sigmoid(z)] = sigmoid(z) * (1 + z * (1 - sigmoid(z)))
    return s * (1.0 + z * (1.0 - s))


class MlpScore:
    """Four-layer dense score network with seeded Glorot-uniform init."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 dim: int, seed: int = 0):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.dim = int(dim)
        self.seed = int(seed)
        widths = [w.shape for w in self.weights]
        if len(widths) != _N_HIDDEN + 1:
            raise ArchitectureMismatch(f"expected {_N_HIDDEN + 1} layers, got {len(widths)}")
        chain = [self.dim + 1] + [w.shape[1] for w in self.weights]
        for i, w in enumerate(self.weights):
            if w.shape[0] != chain[i] or self.biases[i].shape != (w.shape[1],):
                raise ArchitectureMismatch(f"layer {i} has shape {w.shape}")
        if chain[-1] != self.dim:
            raise ArchitectureMismatch("output width must equal the state dimension")

    @classmethod
    def create(cls, dim: int, seed: int = 0, hidden: int = _HIDDEN) -> "MlpScore":
        widths = [dim + 1] + [hidden] * _N_HIDDEN + [dim]
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(entropy=seed, spawn_key=(i,))))
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, dim=dim, seed=seed)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x: np.ndarray, t) -> np.ndarray:
        return self._forward(x, t)[0]

    def _forward(self, x, t, keep_cache: bool = False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tcol = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1, 1), (x.shape[0], 1))
        h = np.concatenate([x, tcol], axis=1)
        cache = [] if keep_cache else None
        for i in range(_N_HIDDEN):
            z = h @ self.weights[i] + self.biases[i]
            act, s = _swish(z)
            if keep_cache:
                cache.append((h, z, s))
            h = act
        out = h @ self.weights[-1] + self.biases[-1]
        if keep_cache:
            cache.append((h, None, None))
        if not np.all(np.isfinite(out)):
            raise NonFinite("score network produced a non-finite output")
        return out, cache

    def backprop(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients for an upstream dL/d(output); order W0,b0,..."""
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        h_last = cache[-1][0]
        grads[-2] = h_last.T @ grad_out
        grads[-1] = grad_out.sum(axis=0)
        delta = grad_out @ self.weights[-1].T
        for i in range(_N_HIDDEN - 1, -1, -1):
            h, z, s = cache[i]
            delta = delta * _swish_grad(z, s)
            grads[2 * i] = h.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
        return grads

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        for i in range(len(self.weights)):
            self.weights[i] = np.asarray(params[2 * i], dtype=float)
            self.biases[i] = np.asarray(params[2 * i + 1], dtype=float)


@dataclass
class AnalyticGaussianScore:
    """Closed-form score s(x, t) = -(x / v_t)(1 + epsilon) of the constant-rate
    Gaussian model, with v_t = 1 + exp(-beta t)(v0 - 1).

    ``epsilon`` dials in a controlled mis-estimation; epsilon = 0 is exact.
    """

    beta: float
    v0: float
    epsilon: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.beta <= 0.0 or self.v0 <= 0.0:
            raise ValueError("beta and v0 must be positive")

    def v_t(self, t):
        return 1.0 + np.exp(-self.beta * np.asarray(t, dtype=float)) * (self.v0 - 1.0)

    def __call__(self, x: np.ndarray, t) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vt = np.asarray(self.v_t(t), dtype=float).reshape(-1, 1)
        return -(1.0 + self.epsilon) * x / vt


# -- spatial derivatives by central differences -----------------------------

def score_batch(score, xs: np.ndarray, t) -> np.ndarray:
    """Evaluate a score on a stack of points at a common time."""
    return np.asarray(score(xs, t), dtype=float)


def _stencil_points(x: np.ndarray, dx: float) -> np.ndarray:
    """x plus the 2d axis-aligned offsets: rows [x+dx e_1, x-dx e_1, ...]."""
    d = x.size
    offs = np.zeros((2 * d, d))
    for i in range(d):
        offs[2 * i, i] = dx
        offs[2 * i + 1, i] = -dx
    return x[None, :] + offs


def score_divergence(score, x: np.ndarray, t: float, dx: float) -> float:
    """div s by central differences at spacing dx."""
    x = np.asarray(x, dtype=float)
    vals = score_batch(score, _stencil_points(x, dx), t)
    d = x.size
    return float(sum((vals[2 * i, i] - vals[2 * i + 1, i]) / (2 * dx) for i in range(d)))


def score_jacobian(score, x: np.ndarray, t: float, dx: float) -> np.ndarray:
    """J[i, j] = d s_i / d x_j by central differences."""
    x = np.asarray(x, dtype=float)
    d = x.size
    vals = score_batch(score, _stencil_points(x, dx), t)
    jac = np.empty((d, d))
    for j in range(d):
        jac[:, j] = (vals[2 * j] - vals[2 * j + 1]) / (2 * dx)
    return jac


def score_div_derivatives(score, x: np.ndarray, t: float, dx: float):
    """(div s, grad(div s), laplacian(div s)) from one batched stencil sweep.

    grad and laplacian of the divergence are nested central differences: the
    divergence itself is evaluated at x and at the four (2d) axis offsets.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    centers = np.vstack([x[None, :], _stencil_points(x, dx)])  # (1+2d, d)
    pts = np.concatenate([_stencil_points(c, dx) for c in centers], axis=0)
    vals = score_batch(score, pts, t).reshape(len(centers), 2 * d, d)
    divs = np.array([
        sum((block[2 * i, i] - block[2 * i + 1, i]) / (2 * dx) for i in range(d))
        for block in vals
    ])
    div_c = divs[0]
    grad = np.array([(divs[1 + 2 * j] - divs[2 + 2 * j]) / (2 * dx) for j in range(d)])
    lap = float((divs[1:].sum() - 2 * d * div_c) / dx ** 2)
    return float(div_c), grad, lap


# -- denoising score matching loss -------------------------------------------

@dataclass
class DsmLoss:
    loss: float
    grads: list[np.ndarray] | None


def _as_points(batch) -> np.ndarray:
    pts = batch.points if isinstance(batch, PointCloud) else batch
    return np.atleast_2d(np.asarray(pts, dtype=float))


def draw_dsm_noise(n: int, dim: int, schedule: Schedule, rng_seed,
                   time_grid_size: int = _TIME_GRID_DEFAULT):
    """Per-item times off the discretized grid and unit normal draws."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    grid = np.linspace(schedule.t_min, schedule.t_max, time_grid_size)
    ts = grid[rng.integers(0, time_grid_size, size=n)]
    zs = rng.standard_normal((n, dim))
    return ts, zs


def dsm_loss(model, batch, schedule: Schedule, rng_seed,
             time_grid_size: int = _TIME_GRID_DEFAULT,
             with_grads: bool | None = None) -> DsmLoss:
    """Monte Carlo denoising loss and (for MLP models) its parameter gradient.

    Each batch item draws a time t_i uniformly from the discretized grid and
    a perturbation x_{i,t} = alpha(t_i) x_i + sigma(t_i) z_i; the per-item
    term is (g(t_i)^2 / 2) || (x_{i,t} - alpha x_i) / sigma^2 + s(x_{i,t}, t_i) ||^2
    and the loss is the batch mean.
    """
    x0 = _as_points(batch)
    n, dim = x0.shape
    if n == 0:
        raise ValueError("batch must be nonempty")
    ts, zs = draw_dsm_noise(n, dim, schedule, rng_seed, time_grid_size)
    sig2 = np.asarray(schedule.sigma2(ts), dtype=float)
    if np.any(sig2 <= 0.0):
        raise ValueError("sigma^2 vanished inside the training window")
    alpha = np.asarray(schedule.alpha(ts), dtype=float)
    g2 = np.asarray(schedule.g2(ts), dtype=float)
    xt = alpha[:, None] * x0 + np.sqrt(sig2)[:, None] * zs
    target = zs / np.sqrt(sig2)[:, None]  # (x_t - alpha x_0) / sigma^2

    want_grads = isinstance(model, MlpScore) if with_grads is None else with_grads
    if want_grads:
        s, cache = model._forward(xt, ts, keep_cache=True)
    else:
        s = np.asarray(model(xt, ts), dtype=float)
    resid = target + s
    per_item = 0.5 * g2 * np.einsum("ij,ij->i", resid, resid)
    loss = float(per_item.mean())
    if not np.isfinite(loss):
        raise NonFinite("dsm loss is not finite")
    grads = None
    if want_grads:
        grad_out = (g2[:, None] * resid) / n
        grads = model.backprop(cache, grad_out)
    return DsmLoss(loss=loss, grads=grads)


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: list[np.ndarray], lr: float = 1e-3) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], lr=lr)


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns the new parameter list."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter / gradient / state shapes disagree")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        mhat = state.m[i] / bc1
        vhat = state.v[i] / bc2
        new_params.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return new_params


# -- checkpoint format --------------------------------------------------------
#
# Little-endian layout:
#   magic "WKBL" | u16 version | u8 schedule kind | u8 pad | i64 seed
#   f64 beta, t_min, t_max | u32 epochs, batch, time_grid | f64 lr
#   u32 dim | u8 n_layers | 3x u8 pad | n_layers x (u32 fan_in, u32 fan_out)
#   payload: per layer W (row-major) then b, f64
#   u32 crc32 of everything above

_MAGIC = b"WKBL"
_VERSION = 1
_KIND_TAGS = {ScheduleKind.SIMPLE: 0, ScheduleKind.COSINE: 1, ScheduleKind.CONST_BETA: 2}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}
_HEAD = struct.Struct("<4sHBBq3d3IdIB3x")


def checkpoint_save(model: MlpScore, path, schedule: Schedule | None = None,
                    train_meta: dict | None = None) -> None:
    meta = dict(train_meta or {})
    kind_tag = _KIND_TAGS[schedule.kind] if schedule is not None else 255
    head = _HEAD.pack(
        _MAGIC, _VERSION, kind_tag, 0, int(model.seed),
        float(schedule.beta if schedule else 0.0),
        float(schedule.t_min if schedule else 0.0),
        float(schedule.t_max if schedule else 0.0),
        int(meta.get("epochs", 0)), int(meta.get("batch_size", 0)),
        int(meta.get("time_grid_size", _TIME_GRID_DEFAULT)),
        float(meta.get("lr", 0.0)),
        int(model.dim), len(model.weights),
    )
    dims = b"".join(struct.pack("<II", *w.shape) for w in model.weights)
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()
        for w, b in zip(model.weights, model.biases) for arr in (w, b)
    )
    body = head + dims + payload
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def checkpoint_load(path, dim: int | None = None) -> tuple[MlpScore, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size + 4:
        raise CorruptFile("checkpoint truncated before header")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CorruptFile("checkpoint checksum mismatch")
    (magic, version, kind_tag, _, seed, beta, t_min, t_max,
     epochs, batch, time_grid, lr, file_dim, n_layers) = _HEAD.unpack_from(body, 0)
    if magic != _MAGIC:
        raise CorruptFile("bad magic bytes")
    if version != _VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {_VERSION}")
    off = _HEAD.size
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", body, off))
        off += 8
    want = sum(fi * fo + fo for fi, fo in shapes)
    payload = np.frombuffer(body, dtype="<f8", offset=off)
    if payload.size != want:
        raise CorruptFile(f"payload holds {payload.size} floats, expected {want}")
    weights, biases, pos = [], [], 0
    for fi, fo in shapes:
        weights.append(payload[pos:pos + fi * fo].reshape(fi, fo).copy())
        pos += fi * fo
        biases.append(payload[pos:pos + fo].copy())
        pos += fo
    if dim is not None and file_dim != dim:
        raise ArchitectureMismatch(f"checkpoint is {file_dim}-dimensional, expected {dim}")
    try:
        model = MlpScore(weights, biases, dim=file_dim, seed=seed)
    except ArchitectureMismatch as exc:
        raise CorruptFile(f"inconsistent layer widths: {exc}") from exc
    meta = {
        "schedule_kind": _TAG_KINDS.get(kind_tag),
        "beta": beta, "t_min": t_min, "t_max": t_max,
        "epochs": epochs, "batch_size": batch,
        "time_grid_size": time_grid, "lr": lr, "seed": seed,
    }
    return model, meta
