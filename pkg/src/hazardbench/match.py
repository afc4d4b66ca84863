"""Reference stereo matchers over a census or absolute-difference cost volume.

``block_match`` is the local method: box aggregation, winner-take-all and
parabola refinement. ``sgm`` adds a truncated-linear smoothness term
(P1 for unit disparity changes, P2 for larger ones) minimized by dynamic
programming along 4 or 8 scanline directions.

Path costs are combined as ``C + sum_r (L_r - C)`` so the data term is counted
once. On a single scanline this makes the summed cost the exact min-marginal
of the chain energy, hence the winner-take-all labeling is the exact 1D
minimizer; with P1 = P2 = 0 it reduces to the raw cost volume.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io_formats as iof
from .errors import ShapeMismatch, WindowTooLarge
from .hazard import luminance

INVALID = iof.INVALID
COST_KINDS = ("census", "ad")
MAX_CENSUS_WINDOW = 7  # 48 comparison bits fit a uint64


@dataclass
class CostVolume:
    costs: np.ndarray  # (H, W, d_max + 1)
    cost_kind: str
    d_max: int
    border_cost: float
    reference: str = "left"

    @property
    def shape(self):
        return self.costs.shape


@dataclass(frozen=True)
class EnergyParams:
    p1: float = 10.0
    p2: float = 120.0
    path_count: int = 4
    lambda_smooth: float = 1.0

    def __post_init__(self):
        if self.path_count not in (4, 8):
            raise ValueError("path_count must be 4 or 8")
        if self.p1 < 0 or self.p2 < 0 or self.p1 > self.p2:
            raise ValueError("need 0 <= p1 <= p2")
        if self.lambda_smooth < 0:
            raise ValueError("lambda_smooth must be >= 0")


@dataclass
class DisparityEstimate:
    disparity: np.ndarray  # float32, INVALID where not valid
    valid: np.ndarray  # bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.disparity = np.where(self.valid, self.disparity, INVALID).astype(np.float32)

    def save(self, directory: str | Path) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "disp.pfm").write_bytes(iof.write_pfm(self.disparity))
        (out / "valid.png").write_bytes(iof.write_mask_png(self.valid))
        (out / "meta.json").write_text(json.dumps(self.meta, sort_keys=True, indent=1))
        return [out / "disp.pfm", out / "valid.png", out / "meta.json"]

    @classmethod
    def load(cls, directory: str | Path) -> "DisparityEstimate":
        src = Path(directory)
        disp = iof.read_pfm((src / "disp.pfm").read_bytes()).data
        valid = iof.read_mask_png((src / "valid.png").read_bytes())
        meta_path = src / "meta.json"
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(disp, valid, meta)


# ---------------------------------------------------------------- data term


def census_offsets(window: int) -> list[tuple[int, int]]:
    """Neighbor offsets (dy, dx) in bit order: raster order, center skipped."""
    r = window // 2
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if (dy, dx) != (0, 0)]


def census_transform(image: np.ndarray, window: int = 5) -> np.ndarray:
    """Bit i of a pixel's code is set iff neighbor i is brighter than the center.

    Borders are handled by clamping coordinates into the image.
    """
    lum = luminance(image)
    if window < 3 or window % 2 == 0:
        raise ValueError("census window must be odd and >= 3")
    if window > MAX_CENSUS_WINDOW:
        raise ValueError(f"census window above {MAX_CENSUS_WINDOW} does not fit 64 bits")
    if window > min(lum.shape):
        raise WindowTooLarge(f"window {window} exceeds image size {lum.shape}")
    r = window // 2
    H, W = lum.shape
    padded = np.pad(lum, r, mode="edge")
    code = np.zeros((H, W), dtype=np.uint64)
    for bit, (dy, dx) in enumerate(census_offsets(window)):
        neighbor = padded[r + dy:r + dy + H, r + dx:r + dx + W]
        code |= (neighbor > lum).astype(np.uint64) << np.uint64(bit)
    return code


def _cost_rows(left_f, right_f, d_max, kind, border):
    H, W = left_f.shape[:2]
    out = np.empty((H, W, d_max + 1), dtype=np.float32)
    for d in range(d_max + 1):
        if d >= W:
            out[:, :, d] = border
            continue
        if kind == "census":
            c = np.bitwise_count(left_f[:, d:] ^ right_f[:, :W - d]).astype(np.float32)
        else:
            c = np.abs(left_f[:, d:] - right_f[:, :W - d]).astype(np.float32)
        out[:, d:, d] = c
        out[:, :d, d] = border
    return out


def build_cost_volume(left: np.ndarray, right: np.ndarray, d_max: int, cost_kind: str = "census",
                      census_window: int = 5, reference: str = "left",
                      workers: int = 1) -> CostVolume:
    """Matching cost for every pixel and disparity 0..d_max.

    Left-referenced: cost(x, y, d) compares left (x, y) with right (x - d, y).
    Right-referenced volumes compare right (x, y) with left (x + d, y).
    Out-of-image correspondences get the largest attainable cost.
    """
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape:
        raise ShapeMismatch(f"{left.shape} vs {right.shape}")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    if cost_kind not in COST_KINDS:
        raise ValueError(f"cost_kind must be one of {COST_KINDS}")
    if reference == "right":
        vol = build_cost_volume(right[:, ::-1], left[:, ::-1], d_max, cost_kind, census_window,
                                "left", workers)
        return CostVolume(np.ascontiguousarray(vol.costs[:, ::-1]), cost_kind, d_max,
                          vol.border_cost, "right")
    if reference != "left":
        raise ValueError("reference must be 'left' or 'right'")
    if cost_kind == "census":
        fl, fr = census_transform(left, census_window), census_transform(right, census_window)
        border = float(census_window * census_window - 1)
    else:
        fl, fr = luminance(left), luminance(right)
        border = 1.0
    chunks = np.array_split(np.arange(fl.shape[0]), max(1, min(workers, fl.shape[0])))

    def job(rows):
        return _cost_rows(fl[rows], fr[rows], d_max, cost_kind, border)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(rows) for rows in chunks]
    return CostVolume(np.concatenate(parts, axis=0), cost_kind, d_max, border, "left")


# ---------------------------------------------------------------- optimizers


def winner_take_all(costs: np.ndarray, subpixel: bool = True) -> np.ndarray:
    """Per-pixel argmin over disparity, ties to the smaller disparity.

    With ``subpixel`` a parabola through the winner and its two neighbors
    refines the estimate; the refinement is skipped at 0 and d_max.
    """
    c = np.asarray(costs, dtype=np.float64)
    D = c.shape[-1]
    best = np.argmin(c, axis=-1)
    disp = best.astype(np.float64)
    if subpixel and D >= 3:
        inner = (best > 0) & (best < D - 1)
        b = np.clip(best, 1, D - 2)
        cm = np.take_along_axis(c, (b - 1)[..., None], -1)[..., 0]
        c0 = np.take_along_axis(c, b[..., None], -1)[..., 0]
        cp = np.take_along_axis(c, (b + 1)[..., None], -1)[..., 0]
        denom = cm - 2 * c0 + cp
        ok = inner & (denom > 0)
        offset = np.where(ok, (cm - cp) / (2 * np.where(ok, denom, 1.0)), 0.0)
        disp = disp + offset
    return disp


def block_match(volume: CostVolume, agg_window: int = 9, subpixel: bool = True) -> DisparityEstimate:
    if agg_window < 1 or agg_window % 2 == 0:
        raise ValueError("agg_window must be odd")
    costs = volume.costs.astype(np.float64)
    if agg_window > 1:
        costs = ndimage.uniform_filter(costs, size=(agg_window, agg_window, 1), mode="nearest")
    disp = winner_take_all(costs, subpixel)
    meta = {"method": "block", "cost_kind": volume.cost_kind, "d_max": volume.d_max,
            "agg_window": agg_window, "subpixel": subpixel, "reference": volume.reference}
    return DisparityEstimate(disp.astype(np.float32), np.ones(disp.shape, dtype=bool), meta)


def _directions(path_count: int) -> list[tuple[int, int]]:
    dirs = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if path_count == 8:
        dirs += [(1, 1), (-1, -1), (1, -1), (-1, 1)]
    return dirs


def _step(prev: np.ndarray, cost: np.ndarray, p1: float, p2: float) -> np.ndarray:
    """One DP step: cost + min over predecessor labels - min of predecessor."""
    m = prev.min(axis=-1, keepdims=True)
    best = prev.copy()
    best[..., 1:] = np.minimum(best[..., 1:], prev[..., :-1] + p1)
    best[..., :-1] = np.minimum(best[..., :-1], prev[..., 1:] + p1)
    best = np.minimum(best, m + p2)
    return cost + (best - m)


def path_cost(C: np.ndarray, dx: int, dy: int, p1: float, p2: float) -> np.ndarray:
    """Aggregated cost L_r for one scanline direction (dx, dy)."""
    H, W, _ = C.shape
    L = np.empty_like(C)
    if dx != 0:
        cols = range(W) if dx > 0 else range(W - 1, -1, -1)
        first = True
        for x in cols:
            if first:
                L[:, x] = C[:, x]
                first = False
                continue
            prev = L[:, x - dx]
            if dy == 0:
                L[:, x] = _step(prev, C[:, x], p1, p2)
                continue
            # rows whose predecessor (y - dy) exists continue the path
            cur = C[:, x].copy()
            if dy > 0:
                cur[dy:] = _step(prev[:-dy], C[dy:, x], p1, p2)
            else:
                cur[:dy] = _step(prev[-dy:], C[:dy, x], p1, p2)
            L[:, x] = cur
    else:
        rows = range(H) if dy > 0 else range(H - 1, -1, -1)
        first = True
        for y in rows:
            if first:
                L[y] = C[y]
                first = False
                continue
            L[y] = _step(L[y - dy], C[y], p1, p2)
    return L


def sgm_aggregate(volume: CostVolume, params: EnergyParams) -> np.ndarray:
    C = volume.costs.astype(np.float64)
    p1 = params.lambda_smooth * params.p1
    p2 = params.lambda_smooth * params.p2
    S = C.copy()
    for dx, dy in _directions(params.path_count):
        S += path_cost(C, dx, dy, p1, p2) - C
    return S


def sgm(volume: CostVolume, params: EnergyParams | None = None,
        subpixel: bool = True) -> DisparityEstimate:
    params = params or EnergyParams()
    disp = winner_take_all(sgm_aggregate(volume, params), subpixel)
    meta = {"method": "sgm", "cost_kind": volume.cost_kind, "d_max": volume.d_max,
            "subpixel": subpixel, "reference": volume.reference, **asdict(params),
            "smoothness": "truncated-linear (0 / p1 / p2)"}
    return DisparityEstimate(disp.astype(np.float32), np.ones(disp.shape, dtype=bool), meta)


def chain_energy(labels, costs: np.ndarray, p1: float, p2: float, lambda_smooth: float = 1.0) -> float:
    """Data + smoothness energy of a labeling on one scanline (costs: W x D)."""
    labels = np.asarray(labels, dtype=np.int64)
    data = float(costs[np.arange(len(labels)), labels].sum())
    jumps = np.abs(np.diff(labels))
    smooth = float(np.where(jumps == 0, 0.0, np.where(jumps == 1, p1, p2)).sum())
    return data + lambda_smooth * smooth


# ---------------------------------------------------------------- post filters


def lr_consistency(left: DisparityEstimate, right: DisparityEstimate,
                   tol: float = 1.0) -> DisparityEstimate:
    """Invalidate left pixels whose right-view probe disagrees by more than ``tol``."""
    dl, dr = left.disparity.astype(np.float64), right.disparity.astype(np.float64)
    if dl.shape != dr.shape:
        raise ShapeMismatch(f"{dl.shape} vs {dr.shape}")
    H, W = dl.shape
    xr = np.arange(W)[None, :] - np.floor(dl + 0.5).astype(np.int64)
    inb = (xr >= 0) & (xr < W)
    probe = dr[np.arange(H)[:, None], np.clip(xr, 0, W - 1)]
    ok = left.valid & inb & (np.abs(dl - probe) <= tol)
    meta = {**left.meta, "lr_check_tol": tol}
    return DisparityEstimate(left.disparity, ok, meta)


# ---------------------------------------------------------------- convenience


@dataclass(frozen=True)
class MatcherConfig:
    name: str
    kind: str = "block"  # "block" | "sgm"
    cost_kind: str = "census"
    census_window: int = 5
    agg_window: int = 9
    d_max: int = 64
    p1: float = 10.0
    p2: float = 120.0
    path_count: int = 4
    lambda_smooth: float = 1.0
    lr_check: bool = False
    lr_tol: float = 1.0

    def __post_init__(self):
        if self.kind not in ("block", "sgm"):
            raise ValueError(f"unknown matcher kind {self.kind!r}")
        if self.cost_kind not in ("census", "ad"):
            raise ValueError(f"unknown cost kind {self.cost_kind!r}")
        if self.d_max < 1 or self.agg_window < 1 or self.agg_window % 2 == 0:
            raise ValueError("need d_max >= 1 and an odd agg_window")
        EnergyParams(self.p1, self.p2, self.path_count, self.lambda_smooth)


def _run(cfg: MatcherConfig, left, right, reference: str, workers: int) -> DisparityEstimate:
    vol = build_cost_volume(left, right, cfg.d_max, cfg.cost_kind, cfg.census_window,
                            reference, workers)
    if cfg.kind == "block":
        return block_match(vol, cfg.agg_window)
    return sgm(vol, EnergyParams(cfg.p1, cfg.p2, cfg.path_count, cfg.lambda_smooth))


def run_matcher(cfg: MatcherConfig, left: np.ndarray, right: np.ndarray,
                workers: int = 1) -> DisparityEstimate:
    est = _run(cfg, left, right, "left", workers)
    if cfg.lr_check:
        est = lr_consistency(est, _run(cfg, left, right, "right", workers), cfg.lr_tol)
    est.meta.update({"name": cfg.name, "config": asdict(cfg)})
    return est


def ingest_external(path: str | Path, convention: str = "auto",
                    expected_shape: tuple[int, int] | None = None) -> DisparityEstimate:
    """Load a disparity map produced elsewhere as a DisparityEstimate.

    Conventions: ``pfm`` (non-finite or negative values invalid, covers
    Middlebury's inf and this package's -1 sentinel), ``kitti-png`` (16-bit
    PNG, 0 invalid) or ``auto`` (by file suffix).
    """
    path = Path(path)
    if convention == "auto":
        convention = "kitti-png" if path.suffix.lower() == ".png" else "pfm"
    if convention == "pfm":
        raw = iof.read_pfm(path.read_bytes()).data
        if raw.ndim == 3:
            raw = raw[..., 0]
        d = raw.astype(np.float32)
    elif convention == "kitti-png":
        d = iof.read_disp_png16(path.read_bytes())
    else:
        raise ValueError(f"unknown convention {convention!r}")
    if expected_shape is not None and tuple(d.shape) != tuple(expected_shape):
        raise ShapeMismatch(f"estimate {d.shape} vs expected {expected_shape}")
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(d) & (d >= 0)
    return DisparityEstimate(d, valid, {"method": "external", "source": path.name,
                                        "convention": convention})
