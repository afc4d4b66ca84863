"""Automatic hazardous-region masks derived from a rendered FrameBundle.

Specular and transparent masks come straight from the per-pixel material
flags, so they depend only on scene annotation. Textureless, disparity-jump
and boundary masks are computed from the image, GT disparity and instance
map respectively. All masks are referenced to the left camera.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io_formats as iof
from .errors import WindowTooLarge
from .render import FLAG_SPECULAR, FLAG_TRANSPARENT, FrameBundle, occlusion_mask

MASK_NAMES = ("specular", "transparent", "textureless", "disparity_jump", "nonoccluded", "boundary")

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class MaskParams:
    window: int = 9
    grad_thresh: float = 0.01
    jump_thresh: float = 2.0
    jump_radius: int = 2
    boundary_radius: int = 2
    occlusion_tol: float = 1.0


@dataclass
class HazardMasks:
    specular: np.ndarray
    transparent: np.ndarray
    textureless: np.ndarray
    disparity_jump: np.ndarray
    nonoccluded: np.ndarray
    boundary: np.ndarray
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in MASK_NAMES}

    def save(self, directory: str | Path) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, mask in self.as_dict().items():
            path = out / f"{name}.png"
            path.write_bytes(iof.write_mask_png(mask))
            written.append(path)
        prov = out / "provenance.json"
        prov.write_text(json.dumps(self.provenance, sort_keys=True, indent=1))
        return written + [prov]

    @classmethod
    def load(cls, directory: str | Path) -> "HazardMasks":
        src = Path(directory)
        masks = {name: iof.read_mask_png((src / f"{name}.png").read_bytes()) for name in MASK_NAMES}
        prov = json.loads((src / "provenance.json").read_text())
        return cls(**masks, provenance=prov)


def luminance(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    return img if img.ndim == 2 else img[..., :3] @ LUMA


def _check_window(window: int, shape) -> None:
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if window > min(shape[:2]):
        raise WindowTooLarge(f"window {window} exceeds image size {shape[:2]}")


def gradient_magnitude(lum: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude from half-sample central differences.

    Each axis uses the mean absolute difference to the two neighbors (edges
    replicated). On smooth ramps this equals the usual central difference; it
    also responds to Nyquist-rate texture, which full-step central
    differences cancel exactly.
    """
    p = np.pad(lum, 1, mode="edge")
    c = p[1:-1, 1:-1]
    gx = 0.5 * (np.abs(p[1:-1, 2:] - c) + np.abs(c - p[1:-1, :-2]))
    gy = 0.5 * (np.abs(p[2:, 1:-1] - c) + np.abs(c - p[:-2, 1:-1]))
    return np.hypot(gx, gy)


def textureless_mask(image: np.ndarray, window: int = 9, grad_thresh: float = 0.01) -> np.ndarray:
    """True where the window-mean luminance gradient is below ``grad_thresh``."""
    lum = luminance(image)
    _check_window(window, lum.shape)
    mean_grad = ndimage.uniform_filter(gradient_magnitude(lum), size=window, mode="nearest")
    return mean_grad < grad_thresh


def _spread(a: np.ndarray, lo: int, hi: int, axis: int) -> np.ndarray:
    """out[i] = OR of a[i - k] for k in [lo, hi] along ``axis`` (out of range is False)."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    for k in range(lo, hi + 1):
        if abs(k) >= n:
            continue
        src = [slice(None)] * a.ndim
        dst = [slice(None)] * a.ndim
        if k >= 0:
            src[axis], dst[axis] = slice(0, n - k), slice(k, n)
        else:
            src[axis], dst[axis] = slice(-k, n), slice(0, n + k)
        out[tuple(dst)] |= a[tuple(src)]
    return out


def edge_band(edges_h: np.ndarray, edges_v: np.ndarray, radius: int) -> np.ndarray:
    """Pixels within Chebyshev distance ``radius`` of a marked neighbor edge.

    ``edges_h[y, x]`` marks the edge between (y, x) and (y, x + 1);
    ``edges_v[y, x]`` the edge between (y, x) and (y + 1, x). Distances are
    measured to the edge midpoint, so a straight edge yields a band exactly
    2 * radius pixels wide.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    H = edges_v.shape[0] + 1
    W = edges_h.shape[1] + 1
    a = np.zeros((H, W), dtype=bool)
    a[:, :-1] = edges_h
    band = _spread(_spread(a, -(radius - 1), radius, axis=1), -radius, radius, axis=0)
    b = np.zeros((H, W), dtype=bool)
    b[:-1, :] = edges_v
    band |= _spread(_spread(b, -(radius - 1), radius, axis=0), -radius, radius, axis=1)
    return band


def disparity_jump_mask(gt_disp: np.ndarray, jump_thresh: float = 2.0, radius: int = 2) -> np.ndarray:
    """Band of ``radius`` px around every 4-neighbor disparity step above ``jump_thresh``."""
    if not jump_thresh > 0:
        raise ValueError("jump_thresh must be > 0")
    d = np.asarray(gt_disp, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        eh = np.abs(np.diff(d, axis=1)) > jump_thresh
        ev = np.abs(np.diff(d, axis=0)) > jump_thresh
    return edge_band(eh, ev, radius)


def boundary_mask(instance_map: np.ndarray, radius: int = 2) -> np.ndarray:
    inst = np.asarray(instance_map)
    return edge_band(inst[:, 1:] != inst[:, :-1], inst[1:, :] != inst[:-1, :], radius)


def specular_mask(bundle: FrameBundle) -> np.ndarray:
    return (bundle.left.flags & FLAG_SPECULAR) > 0


def transparent_mask(bundle: FrameBundle) -> np.ndarray:
    return (bundle.left.flags & FLAG_TRANSPARENT) > 0


def derive_all(bundle: FrameBundle, params: MaskParams | None = None) -> HazardMasks:
    params = params or MaskParams()
    return HazardMasks(
        specular=specular_mask(bundle),
        transparent=transparent_mask(bundle),
        textureless=textureless_mask(bundle.left.rgb, params.window, params.grad_thresh),
        disparity_jump=disparity_jump_mask(bundle.left.disparity, params.jump_thresh,
                                           params.jump_radius),
        nonoccluded=occlusion_mask(bundle.left.disparity, bundle.right.disparity,
                                   params.occlusion_tol),
        boundary=boundary_mask(bundle.left.instance, params.boundary_radius),
        provenance={"params": asdict(params), "reference": "left"},
    )


def footprint(instance_map: np.ndarray, instance_ids) -> np.ndarray:
    """Pixels whose first-hit instance is one of ``instance_ids``."""
    return np.isin(instance_map, np.asarray(list(instance_ids), dtype=np.int64))
