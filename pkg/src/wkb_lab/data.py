"""Synthetic 2-D datasets and point-cloud persistence.

Two generators: a spiral ("swiss roll" projected to its first and last
axis) and a 5x5 grid of narrow Gaussians.  Both are normalized so the
pooled per-coordinate standard deviation is 1; the grid mixture divides by
the analytic population constant sqrt(8) so component means land on exactly
reproducible positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

GRID_NORM = np.sqrt(8.0)  # population std of the 5x5 mean grid {-4,-2,0,2,4}^2


@dataclass
class PointCloud:
    points: np.ndarray  # (n, d)
    name: str = ""
    seed: int = 0
    norm_constant: float = 1.0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def pooled_std(points: np.ndarray) -> float:
    """Standard deviation over all coordinates pooled together."""
    return float(np.std(np.asarray(points, dtype=float)))


def normalize(points: np.ndarray) -> tuple[np.ndarray, float]:
    std = pooled_std(points)
    return points / std, std


def make_swiss_roll(n: int, noise: float = 0.5, seed: int = 0) -> PointCloud:
    """Spiral u (cos u, sin u), u ~ U(1.5 pi, 4.5 pi), plus isotropic noise,
    then divided by the pooled std."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    u = rng.uniform(1.5 * np.pi, 4.5 * np.pi, size=n)
    pts = np.stack([u * np.cos(u), u * np.sin(u)], axis=1)
    pts += noise * rng.standard_normal((n, 2))
    pts, std = normalize(pts)
    return PointCloud(points=pts, name="swiss-roll", seed=seed, norm_constant=std)


def make_25gaussian(n: int, seed: int = 0, component_std: float = 0.05) -> PointCloud:
    """Equal-weight mixture of 25 isotropic Gaussians on {-4,-2,0,2,4}^2,
    divided by the fixed constant sqrt(8)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    axis = np.array([-4.0, -2.0, 0.0, 2.0, 4.0])
    means = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    comp = rng.integers(0, 25, size=n)
    pts = means[comp] + component_std * rng.standard_normal((n, 2))
    pts = pts / GRID_NORM
    return PointCloud(points=pts, name="25-gaussian", seed=seed, norm_constant=float(GRID_NORM))


def save_cloud(cloud: PointCloud, path) -> None:
    """One point per line, tab separated, with a `# name seed norm` header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {cloud.name}\t{cloud.seed}\t{cloud.norm_constant:.17g}\n")
        for row in cloud.points:
            fh.write("\t".join(f"{v:.17g}" for v in row) + "\n")


def load_cloud(path) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty dataset file", line=1)
    head = lines[0].rstrip("\n")
    if not head.startswith("# "):
        raise ParseError("missing `# name seed norm_constant` header", line=1)
    fields = head[2:].split("\t")
    if len(fields) != 3:
        raise ParseError("header must carry name, seed and norm_constant", line=1)
    try:
        name, seed, norm = fields[0], int(fields[1]), float(fields[2])
    except ValueError as exc:
        raise ParseError(f"bad header field: {exc}", line=1) from exc
    rows = []
    width = None
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ParseError(f"expected {width} columns, found {len(parts)}", line=i)
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"bad float: {exc}", line=i) from exc
    if not rows:
        raise ParseError("no data rows", line=2)
    return PointCloud(points=np.array(rows), name=name, seed=seed, norm_constant=norm)
