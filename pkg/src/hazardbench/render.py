"""Whitted-style stereo renderer with dense float ground truth.

Both cameras of a rectified rig are traced with the same deterministic code
path. Ground truth (depth, instance id, material flags) always comes from the
first surface a primary ray hits, including transparent surfaces, so at glass
and mirror pixels the photometric content deliberately disagrees with GT.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io_formats as iof
from .errors import EmptyMask, NonPositiveDepth, ShapeMismatch
from .geometry import EPS, Placed, nearest_hit
from .scene import Pose, SceneGraph, StereoRig, scene_to_dict

log = logging.getLogger(__name__)

FLAG_SPECULAR = 1
FLAG_TRANSPARENT = 2
FLAG_BUDGET = 4  # bounce cap hit somewhere below this pixel

_SURFACE_OFFSET = 1e-4


@dataclass(frozen=True)
class RenderSettings:
    samples_per_pixel: int = 1
    max_bounce_depth: int = 4
    metallic_threshold: float = 0.5
    roughness_threshold: float = 0.6
    gamma: float = 2.2
    seed: int = 0
    mirror_reflectance: float = 0.9

    def __post_init__(self):
        if self.samples_per_pixel < 1 or self.max_bounce_depth < 1:
            raise ValueError("samples_per_pixel and max_bounce_depth must be >= 1")
        for name in ("metallic_threshold", "roughness_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")


@dataclass
class CameraFrame:
    rgb: np.ndarray  # (H, W, 3) float32, display-encoded, multiples of 1/255
    depth: np.ndarray  # (H, W) float32 meters, +inf for background
    disparity: np.ndarray  # (H, W) float32 pixels, 0 for background
    instance: np.ndarray  # (H, W) uint16
    flags: np.ndarray  # (H, W) uint16 bitset of FLAG_*


@dataclass
class FrameBundle:
    left: CameraFrame
    right: CameraFrame
    rig: StereoRig
    pose: Pose
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.depth.shape


@dataclass
class WarpReport:
    rmse_photometric: float
    coverage: float
    per_mask: dict[str, float | None] = field(default_factory=dict)


# ---------------------------------------------------------------- depth / disparity


def depth_to_disparity(depth: np.ndarray, rig: StereoRig) -> np.ndarray:
    """d = f * B / z elementwise; infinite depth maps to disparity 0."""
    z = np.asarray(depth, dtype=np.float64)
    if not np.all(z > 0):
        raise NonPositiveDepth("depth must be positive or +inf")
    with np.errstate(divide="ignore"):
        d = np.where(np.isinf(z), 0.0, rig.fb / z)
    return d.astype(np.float32)


def disparity_to_depth(disparity: np.ndarray, rig: StereoRig) -> np.ndarray:
    d = np.asarray(disparity, dtype=np.float64)
    with np.errstate(divide="ignore"):
        z = np.where(d > 0, rig.fb / np.where(d > 0, d, 1.0), np.inf)
    return z.astype(np.float32)


# ---------------------------------------------------------------- tracer


class _Tracer:
    def __init__(self, scene: SceneGraph, settings: RenderSettings):
        self.scene = scene
        self.settings = settings
        self.placed = [Placed.of(p) for p in scene.primitives]
        mats = [p.material for p in scene.primitives]
        rt = settings.roughness_threshold
        self.specular = np.array([m.is_specular(settings.metallic_threshold, rt) for m in mats])
        self.transparent = np.array([m.is_transparent for m in mats])
        if rt > 0:
            self.mirror_weight = np.array([np.clip(1.0 - m.roughness / rt, 0.0, 1.0) for m in mats])
        else:
            self.mirror_weight = np.array([1.0 if m.roughness == 0 else 0.0 for m in mats])
        self.mirror_weight[~self.specular] = 0.0
        self.shadow_pass = np.where(self.transparent, [1.0 - m.opacity for m in mats], 0.0)
        self.background = np.asarray(scene.background_radiance, dtype=np.float64)

    def shadow(self, O, L, dist):
        vis = np.ones(len(O))
        for i, pl in enumerate(self.placed):
            t = pl.intersect(O, L, EPS)
            blocked = t < dist
            if blocked.any():
                vis = np.where(blocked, vis * self.shadow_pass[i], vis)
        return vis

    def direct(self, P, n, albedo):
        scene = self.scene
        light_sum = np.full((len(P), 3), scene.ambient)
        for light in scene.lights:
            color = np.asarray(light.color) * light.intensity
            if light.kind == "point":
                vec = np.asarray(light.vector) - P
                dist = np.linalg.norm(vec, axis=1)
                L = vec / dist[:, None]
                atten = 1.0 / dist ** 2
            else:
                L = np.broadcast_to(-np.asarray(light.vector) / np.linalg.norm(light.vector),
                                    P.shape).copy()
                dist = np.full(len(P), np.inf)
                atten = np.ones(len(P))
            ndl = np.einsum("ij,ij->i", n, L)
            lit = ndl > 0
            if not lit.any():
                continue
            vis = np.zeros(len(P))
            idx = np.nonzero(lit)[0]
            vis[idx] = self.shadow(P[idx] + n[idx] * _SURFACE_OFFSET, L[idx], dist[idx])
            light_sum += color[None, :] * (np.maximum(ndl, 0) * atten * vis)[:, None]
        return albedo * light_sum

    def trace(self, O, D, depth, tmin=EPS):
        """Radiance, budget flag, first-hit primitive index and distance per ray."""
        n = len(O)
        idx, t = nearest_hit(self.placed, O, D, tmin)
        rad = np.broadcast_to(self.background, (n, 3)).copy()
        budget = np.zeros(n, dtype=bool)
        capped = depth >= self.settings.max_bounce_depth
        for i in np.unique(idx[idx >= 0]):
            sel = np.nonzero(idx == i)[0]
            pl = self.placed[i]
            o, d, ts = O[sel], D[sel], t[sel]
            P = o + d * ts[:, None]
            p_local, nrm = pl.local_hit(o, d, ts)
            inside = np.einsum("ij,ij->i", nrm, d) > 0
            nrm = np.where(inside[:, None], -nrm, nrm)
            color = self.direct(P, nrm, pl.prim.material.texture.albedo(p_local))
            flag = np.zeros(len(sel), dtype=bool)

            w = self.mirror_weight[i]
            if w > 0:
                if capped:
                    flag[:] = True
                else:
                    refl = d - 2 * np.einsum("ij,ij->i", d, nrm)[:, None] * nrm
                    r, b, _, _ = self.trace(P + nrm * _SURFACE_OFFSET, refl, depth + 1)
                    color = (1 - w) * color + w * self.settings.mirror_reflectance * r
                    flag |= b

            if self.transparent[i]:
                opacity = pl.prim.material.opacity
                if capped:
                    flag[:] = True
                else:
                    T = self._transmit(pl, d, nrm, inside)
                    tr, b, _, _ = self.trace(P - nrm * _SURFACE_OFFSET, T, depth + 1)
                    flag |= b
                    front = (~inside)[:, None]
                    color = np.where(front, opacity * color + (1 - opacity) * tr, tr)
            rad[sel] = color
            budget[sel] = flag
        return rad, budget, idx, t

    @staticmethod
    def _transmit(pl: Placed, d, nrm, inside):
        if pl.prim.shape == "plane":
            return d  # zero-thickness sheet: no net bending
        ior = pl.prim.material.ior
        eta = np.where(inside, ior, 1.0 / ior)
        cos_i = -np.einsum("ij,ij->i", d, nrm)
        k = 1 - eta ** 2 * (1 - cos_i ** 2)
        tir = k < 0
        T = eta[:, None] * d + (eta * cos_i - np.sqrt(np.maximum(k, 0)))[:, None] * nrm
        # total internal reflection bounces back inside
        refl = d - 2 * np.einsum("ij,ij->i", d, nrm)[:, None] * nrm
        T = np.where(tir[:, None], -refl, T)
        return T / np.linalg.norm(T, axis=1, keepdims=True)


def _encode(linear: np.ndarray, gamma: float) -> np.ndarray:
    encoded = np.clip(linear, 0.0, 1.0) ** (1.0 / gamma)
    return iof.uint8_to_float(iof.float_to_uint8(encoded))


def _camera_rays(rig: StereoRig, pose: Pose, rows: np.ndarray, jitter: np.ndarray | None):
    ys, xs = np.meshgrid(rows.astype(np.float64), np.arange(rig.width, dtype=np.float64),
                         indexing="ij")
    if jitter is not None:
        xs = xs + jitter[..., 0]
        ys = ys + jitter[..., 1]
    cam = np.stack([(xs - rig.cx) / rig.focal_px, (ys - rig.cy) / rig.focal_px,
                    np.ones_like(xs)], axis=-1).reshape(-1, 3)
    norm = np.linalg.norm(cam, axis=1)
    D = (cam / norm[:, None]) @ pose.R.T
    O = np.broadcast_to(pose.C, D.shape).copy()
    return O, D, norm  # depth = t / norm


def _render_rows(tracer: _Tracer, rig: StereoRig, pose: Pose, rows: np.ndarray,
                 jitter: np.ndarray | None):
    O, D, norm = _camera_rays(rig, pose, rows, None)
    rad, budget, idx, t = tracer.trace(O, D, 0, tmin=rig.near_m * norm)
    depth = t / norm
    far = depth > rig.far_m
    idx = np.where(far, -1, idx)
    depth = np.where(idx >= 0, depth, np.inf)
    rad = np.where(idx[:, None] >= 0, rad, tracer.background)
    if jitter is not None:
        for s in range(jitter.shape[0]):
            Oj, Dj, nj = _camera_rays(rig, pose, rows, jitter[s])
            r, b, _, _ = tracer.trace(Oj, Dj, 0, tmin=rig.near_m * nj)
            rad = rad + r
            budget |= b
        rad = rad / (jitter.shape[0] + 1)
    return rad, budget, idx, depth


def _render_camera(tracer: _Tracer, rig: StereoRig, pose: Pose, settings: RenderSettings,
                   workers: int) -> CameraFrame:
    H, W = rig.height, rig.width
    jitter = None
    if settings.samples_per_pixel > 1:
        rng = np.random.default_rng(settings.seed)
        jitter = rng.uniform(-0.5, 0.5, (settings.samples_per_pixel - 1, H, W, 2))
    chunks = np.array_split(np.arange(H), max(1, min(workers, H)))

    def job(rows):
        jit = None if jitter is None else jitter[:, rows[0]:rows[-1] + 1]
        return _render_rows(tracer, rig, pose, rows, jit)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(rows) for rows in chunks]
    rad = np.concatenate([p[0] for p in parts]).reshape(H, W, 3)
    budget = np.concatenate([p[1] for p in parts]).reshape(H, W)
    idx = np.concatenate([p[2] for p in parts]).reshape(H, W)
    depth = np.concatenate([p[3] for p in parts]).reshape(H, W).astype(np.float32)

    ids = np.array([0] + [p.instance_id for p in tracer.scene.primitives], dtype=np.uint16)
    prim_flags = np.zeros(len(tracer.placed) + 1, dtype=np.uint16)
    prim_flags[1:] = (tracer.specular * FLAG_SPECULAR) | (tracer.transparent * FLAG_TRANSPARENT)
    instance = ids[idx + 1]
    flags = prim_flags[idx + 1] | np.where(budget, FLAG_BUDGET, 0).astype(np.uint16)
    return CameraFrame(rgb=_encode(rad, settings.gamma), depth=depth,
                       disparity=depth_to_disparity(depth, rig), instance=instance, flags=flags)


def render_stereo(scene: SceneGraph, rig: StereoRig, pose: Pose,
                  settings: RenderSettings | None = None, workers: int = 1) -> FrameBundle:
    """Render the left (reference) and right cameras of ``rig`` at ``pose``.

    Scanline shards are traced independently, so the result does not depend
    on ``workers``. Pixels whose ray tree hit the bounce cap are shaded
    without the missing secondary term and carry ``FLAG_BUDGET``.
    """
    settings = settings or RenderSettings()
    tracer = _Tracer(scene, settings)
    left = _render_camera(tracer, rig, pose, settings, workers)
    right = _render_camera(tracer, rig, rig.right_pose(pose), settings, workers)
    n_budget = int(((left.flags & FLAG_BUDGET) > 0).sum() + ((right.flags & FLAG_BUDGET) > 0).sum())
    if n_budget:
        log.info("bounce budget exceeded on %d pixels", n_budget)
    meta = {
        "scene": scene_to_dict(scene),
        "factor": scene.factor.value if scene.factor else None,
        "level": scene.level,
        "settings": asdict(settings),
        "budget_exceeded_pixels": n_budget,
    }
    return FrameBundle(left, right, rig, pose, meta)


# ---------------------------------------------------------------- checks


def occlusion_mask(disp_left: np.ndarray, disp_right: np.ndarray, tol: float = 1.0) -> np.ndarray:
    """Ground-truth left/right cross-check; True where the left pixel is visible in both views."""
    dl = np.asarray(disp_left, dtype=np.float64)
    dr = np.asarray(disp_right, dtype=np.float64)
    if dl.shape != dr.shape:
        raise ShapeMismatch(f"{dl.shape} vs {dr.shape}")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    H, W = dl.shape
    xs = np.arange(W)[None, :]
    finite = np.isfinite(dl)
    xr = np.floor(xs - np.where(finite, dl, 0.0) + 0.5).astype(np.int64)
    inb = finite & (xr >= 0) & (xr < W)
    probe = dr[np.arange(H)[:, None], np.clip(xr, 0, W - 1)]
    with np.errstate(invalid="ignore"):
        return inb & (np.abs(dl - probe) <= tol)


def _bilinear_row(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    W = img.shape[1]
    x0 = np.floor(xs).astype(np.int64)
    x0 = np.clip(x0, 0, W - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    a = (xs - x0)[:, None]
    return (1 - a) * img[ys, x0] + a * img[ys, x1]


def verify_by_warp(bundle: FrameBundle, nonoccluded: np.ndarray,
                   masks: dict[str, np.ndarray] | None = None) -> WarpReport:
    """Warp-compare the left image against the right via GT disparity.

    Each non-occluded left pixel (x, y) is compared with the right image
    sampled bilinearly at (x - d, y).
    """
    nonocc = np.asarray(nonoccluded, dtype=bool)
    if nonocc.shape != bundle.shape:
        raise ShapeMismatch("mask shape differs from bundle")
    if not nonocc.any():
        raise EmptyMask("non-occluded mask is empty")
    H, W = bundle.shape
    d = bundle.left.disparity.astype(np.float64)
    ys, xs = np.nonzero(nonocc)
    src = xs - d[ys, xs]
    inb = (src >= 0) & (src <= W - 1)
    if not inb.any():
        raise EmptyMask("no non-occluded pixel warps inside the right image")
    ys, xs, src = ys[inb], xs[inb], src[inb]
    warped = _bilinear_row(bundle.right.rgb.astype(np.float64), ys, src)
    err2 = ((bundle.left.rgb[ys, xs].astype(np.float64) - warped) ** 2).mean(axis=1)
    per_mask: dict[str, float | None] = {}
    for name, m in (masks or {}).items():
        sel = np.asarray(m, dtype=bool)[ys, xs]
        per_mask[name] = float(np.sqrt(err2[sel].mean())) if sel.any() else None
    return WarpReport(float(np.sqrt(err2.mean())), float(inb.mean()), per_mask)


def visibility_oracle(scene: SceneGraph, bundle: FrameBundle, rel_tol: float = 1e-3) -> np.ndarray:
    """Brute-force visibility: re-cast each left GT point toward the right camera.

    A left pixel counts as visible when the right camera's first hit along the
    ray to the reconstructed 3D point is the same instance at the same
    distance and the point projects inside the right image.
    """
    rig, pose = bundle.rig, bundle.pose
    H, W = bundle.shape
    z = bundle.left.depth.astype(np.float64)
    ys, xs = np.nonzero(np.isfinite(z))
    zz = z[ys, xs]
    cam = np.stack([(xs - rig.cx) / rig.focal_px * zz, (ys - rig.cy) / rig.focal_px * zz, zz], 1)
    P = cam @ pose.R.T + pose.C
    right = rig.right_pose(pose)
    vec = P - right.C
    dist = np.linalg.norm(vec, axis=1)
    D = vec / dist[:, None]
    placed = [Placed.of(p) for p in scene.primitives]
    idx, t = nearest_hit(placed, np.broadcast_to(right.C, D.shape).copy(), D)
    ids = np.array([0] + [p.instance_id for p in scene.primitives])
    same = (ids[idx + 1] == bundle.left.instance[ys, xs]) & (np.abs(t - dist) <= rel_tol * dist + 1e-4)
    pr = (P - right.C) @ right.R
    col = np.floor(rig.focal_px * pr[:, 0] / pr[:, 2] + rig.cx + 0.5)
    inside = (col >= 0) & (col < W) & (pr[:, 2] > 0)
    vis = np.zeros((H, W), dtype=bool)
    vis[ys, xs] = same & inside
    return vis


# ---------------------------------------------------------------- persistence


def save_bundle(bundle: FrameBundle, directory: str | Path) -> list[Path]:
    """Write a bundle directory; returns the files written."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for side in ("left", "right"):
        cam: CameraFrame = getattr(bundle, side)
        files = {
            f"{side}.png": iof.encode_png8(iof.float_to_uint8(cam.rgb)),
            f"{side}_depth.pfm": iof.write_pfm(cam.depth),
            f"{side}_disp.pfm": iof.write_pfm(cam.disparity),
            f"{side}_instance.png": iof.encode_png16(cam.instance),
            f"{side}_flags.png": iof.encode_png16(cam.flags),
        }
        for name, data in files.items():
            (out / name).write_bytes(data)
            written.append(out / name)
    meta = {"rig": bundle.rig.to_dict(), "pose": bundle.pose.to_dict(), **bundle.metadata}
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1))
    written.append(out / "meta.json")
    return written


def load_bundle(directory: str | Path) -> FrameBundle:
    src = Path(directory)
    meta = json.loads((src / "meta.json").read_text())
    rig = StereoRig(**meta.pop("rig"))
    pose = Pose.from_dict(meta.pop("pose"))
    cams = {}
    for side in ("left", "right"):
        cams[side] = CameraFrame(
            rgb=iof.uint8_to_float(iof.decode_png8((src / f"{side}.png").read_bytes())),
            depth=iof.read_pfm((src / f"{side}_depth.pfm").read_bytes()).data,
            disparity=iof.read_pfm((src / f"{side}_disp.pfm").read_bytes()).data,
            instance=iof.decode_png16((src / f"{side}_instance.png").read_bytes()),
            flags=iof.decode_png16((src / f"{side}_flags.png").read_bytes()),
        )
    return FrameBundle(cams["left"], cams["right"], rig, pose, meta)
