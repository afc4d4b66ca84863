"""Vectorized ray/primitive intersection in primitive-local coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Primitive

EPS = 1e-6


@dataclass
class Placed:
    """A primitive with cached numpy pose."""

    prim: Primitive
    R: np.ndarray  # local -> world
    T: np.ndarray

    @classmethod
    def of(cls, prim: Primitive) -> "Placed":
        return cls(prim, np.array(prim.rotation, dtype=np.float64),
                   np.array(prim.translation, dtype=np.float64))

    def to_local(self, O: np.ndarray, D: np.ndarray):
        return (O - self.T) @ self.R, D @ self.R

    def intersect(self, O: np.ndarray, D: np.ndarray, tmin) -> np.ndarray:
        o, d = self.to_local(O, D)
        fn = _INTERSECT[self.prim.shape]
        return fn(o, d, self.prim.extent, tmin)

    def local_hit(self, O: np.ndarray, D: np.ndarray, t: np.ndarray):
        """Local hit point and world-space outward normal for rays hitting at ``t``."""
        o, d = self.to_local(O, D)
        p = o + d * t[:, None]
        n_local = _NORMAL[self.prim.shape](p, self.prim.extent)
        return p, n_local @ self.R.T


def _first_root(a, b, c, tmin):
    """Smallest root of a t^2 + b t + c above tmin, inf if none."""
    disc = b * b - 4 * a * c
    ok = (disc >= 0) & (a > 1e-15)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    a2 = np.where(ok, 2 * a, 1.0)
    t0 = (-b - sq) / a2
    t1 = (-b + sq) / a2
    t = np.where(t0 > tmin, t0, np.where(t1 > tmin, t1, np.inf))
    return np.where(ok, t, np.inf)


def _plane(o, d, ext, tmin):
    hx, hy = ext
    dz = d[:, 2]
    safe = np.abs(dz) > 1e-12
    t = np.where(safe, -o[:, 2] / np.where(safe, dz, 1.0), np.inf)
    x = o[:, 0] + t * d[:, 0]
    y = o[:, 1] + t * d[:, 1]
    hit = safe & (t > tmin) & (np.abs(x) <= hx) & (np.abs(y) <= hy)
    return np.where(hit, t, np.inf)


def _box(o, d, ext, tmin):
    h = np.asarray(ext, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-h - o) * inv
        t2 = (h - o) * inv
    # rays parallel to a slab: inside -> unconstrained, outside -> miss
    parallel = d == 0
    inside_slab = np.abs(o) <= h
    lo = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
    hi = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
    tnear = lo.max(axis=1)
    tfar = hi.min(axis=1)
    t = np.where(tnear > tmin, tnear, tfar)
    hit = (tfar >= tnear) & (t > tmin)
    return np.where(hit, t, np.inf)


def _sphere(o, d, ext, tmin):
    r = ext[0]
    a = np.einsum("ij,ij->i", d, d)
    b = 2 * np.einsum("ij,ij->i", o, d)
    c = np.einsum("ij,ij->i", o, o) - r * r
    return _first_root(a, b, c, tmin)


def _rod(o, d, ext, tmin):
    r, hl = ext
    a = d[:, 0] ** 2 + d[:, 2] ** 2
    b = 2 * (o[:, 0] * d[:, 0] + o[:, 2] * d[:, 2])
    c = o[:, 0] ** 2 + o[:, 2] ** 2 - r * r
    t = _first_root(a, b, c, tmin)
    y = o[:, 1] + np.where(np.isfinite(t), t, 0.0) * d[:, 1]
    t = np.where(np.abs(y) <= hl, t, np.inf)
    for cap in (-hl, hl):
        oc = o - np.array([0.0, cap, 0.0])
        ts = _sphere(oc, d, (r,), tmin)
        t = np.minimum(t, ts)
    return t


def _plane_normal(p, ext):
    n = np.zeros_like(p)
    n[:, 2] = 1.0
    return n


def _box_normal(p, ext):
    h = np.asarray(ext, dtype=np.float64)
    rel = np.abs(p) / h
    axis = rel.argmax(axis=1)
    n = np.zeros_like(p)
    rows = np.arange(len(p))
    n[rows, axis] = np.sign(p[rows, axis])
    return n


def _sphere_normal(p, ext):
    return p / np.linalg.norm(p, axis=1, keepdims=True)


def _rod_normal(p, ext):
    r, hl = ext
    axis_pt = np.zeros_like(p)
    axis_pt[:, 1] = np.clip(p[:, 1], -hl, hl)
    v = p - axis_pt
    return v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)


_INTERSECT = {"plane": _plane, "box": _box, "sphere": _sphere, "rod": _rod}
_NORMAL = {"plane": _plane_normal, "box": _box_normal, "sphere": _sphere_normal,
           "rod": _rod_normal}


def nearest_hit(placed: list[Placed], O: np.ndarray, D: np.ndarray, tmin=EPS):
    """Index of the first primitive hit per ray (-1 for misses) and its distance."""
    n = len(O)
    best_t = np.full(n, np.inf)
    best_i = np.full(n, -1, dtype=np.int64)
    for i, pl in enumerate(placed):
        t = pl.intersect(O, D, tmin)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_i[closer] = i
    return best_i, best_t
