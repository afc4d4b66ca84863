"""Procedural albedo textures evaluated at arbitrary 3D points.

Textures are resolution independent: the renderer evaluates them at ray hit
points expressed in the primitive's local frame, so a texture sticks to its
object under any camera pose. ``scale`` is a spatial frequency in cycles per
meter; shrinking it stretches the pattern until a surface looks solid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("solid", "checker", "value-noise")

# odd 64-bit constants for the lattice hash
_PX = np.uint64(0x9E3779B185EBCA87)
_PY = np.uint64(0xC2B2AE3D27D4EB4F)
_PZ = np.uint64(0x165667B19E3779F9)
_PS = np.uint64(0x27D4EB2F165667C5)
# irrational offset keeps checker cell borders off axis-aligned faces
_CHECKER_OFFSET = 0.318309886


@dataclass(frozen=True)
class Texture:
    kind: str = "solid"
    color_a: tuple[float, float, float] = (0.7, 0.7, 0.7)
    color_b: tuple[float, float, float] = (0.2, 0.2, 0.2)
    scale: float = 1.0
    seed: int = 0
    octaves: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("texture scale must be > 0")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")

    def mix_factor(self, points: np.ndarray) -> np.ndarray:
        """Blend weight in [0, 1] between ``color_a`` and ``color_b``."""
        points = np.asarray(points, dtype=np.float64)
        if self.kind == "solid":
            return np.zeros(points.shape[:-1])
        if self.kind == "checker":
            return checker(points, self.scale)
        return fbm(points, self.scale, self.seed, self.octaves)

    def albedo(self, points: np.ndarray) -> np.ndarray:
        t = self.mix_factor(points)[..., None]
        a = np.asarray(self.color_a)
        b = np.asarray(self.color_b)
        return a + t * (b - a)


def _hash01(ix, iy, iz, seed: int) -> np.ndarray:
    """Deterministic hash of integer lattice coordinates to [0, 1)."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.int64).view(np.uint64) * _PX
             ^ iy.astype(np.int64).view(np.uint64) * _PY
             ^ iz.astype(np.int64).view(np.uint64) * _PZ
             ^ np.uint64(seed & 0xFFFFFFFF) * _PS)
        h ^= h >> np.uint64(33)
        h *= np.uint64(0xFF51AFD7ED558CCD)
        h ^= h >> np.uint64(33)
        h *= np.uint64(0xC4CEB9FE1A85EC53)
        h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _fade(t):
    return t * t * (3.0 - 2.0 * t)


def value_noise(points: np.ndarray, seed: int = 0) -> np.ndarray:
    """Trilinearly interpolated lattice noise with unit cell size, in [0, 1)."""
    p = np.asarray(points, dtype=np.float64)
    base = np.floor(p)
    frac = p - base
    base = base.astype(np.int64)
    u = _fade(frac)
    ix, iy, iz = base[..., 0], base[..., 1], base[..., 2]
    ux, uy, uz = u[..., 0], u[..., 1], u[..., 2]

    def corner(dx, dy, dz):
        return _hash01(ix + dx, iy + dy, iz + dz, seed)

    x00 = corner(0, 0, 0) + ux * (corner(1, 0, 0) - corner(0, 0, 0))
    x10 = corner(0, 1, 0) + ux * (corner(1, 1, 0) - corner(0, 1, 0))
    x01 = corner(0, 0, 1) + ux * (corner(1, 0, 1) - corner(0, 0, 1))
    x11 = corner(0, 1, 1) + ux * (corner(1, 1, 1) - corner(0, 1, 1))
    y0 = x00 + uy * (x10 - x00)
    y1 = x01 + uy * (x11 - x01)
    return y0 + uz * (y1 - y0)


def fbm(points: np.ndarray, scale: float, seed: int = 0, octaves: int = 2) -> np.ndarray:
    """Fractal sum of value noise octaves, normalized to [0, 1)."""
    p = np.asarray(points, dtype=np.float64) * scale
    total = np.zeros(p.shape[:-1])
    amp, norm = 1.0, 0.0
    for octave in range(octaves):
        total += amp * value_noise(p, seed + 7919 * octave)
        norm += amp
        amp *= 0.5
        p = p * 2.0
    return total / norm


def checker(points: np.ndarray, scale: float) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64) * scale + _CHECKER_OFFSET
    cells = np.floor(p).astype(np.int64).sum(axis=-1)
    return (cells & 1).astype(np.float64)


def noise_image(height: int, width: int, cell_px: float = 4.0, seed: int = 0,
                octaves: int = 3) -> np.ndarray:
    """2D fbm image in [0, 1), handy for synthetic matcher tests."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    pts = np.stack([xs, ys, np.zeros_like(xs)], axis=-1)
    img = fbm(pts, 1.0 / cell_px, seed, octaves)
    lo, hi = img.min(), img.max()
    return (img - lo) / max(hi - lo, 1e-12)
