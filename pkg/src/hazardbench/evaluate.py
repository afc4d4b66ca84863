"""Region-masked disparity metrics, sweep aggregation and correlation.

Every hazard region is intersected with the non-occluded mask and with the
set of pixels that have valid ground truth before any metric is computed.
Regions left empty report ``pixel_count = 0`` and ``None`` metrics.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, EmptyRegion, IncompleteGrid, ShapeMismatch

REGIONS = ("full", "nonoccluded", "specular", "textureless", "transparent", "disparity_jump",
           "boundary")
REPORT_COLUMNS = ("region", "pixel_count", "epe_count", "epe_px", "badpix_pct", "tau_px",
                  "epe_policy", "badpix_policy")
SWEEP_COLUMNS = ("factor", "region", "method", "level", "viewpoints", "epe_mean", "badpix_mean",
                 "epe_n", "badpix_n")


class InvalidPolicy(str, enum.Enum):
    EXCLUDE = "exclude"
    COUNT_AS_BAD = "count-as-bad"


def gt_valid(gt: np.ndarray) -> np.ndarray:
    gt = np.asarray(gt, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.isfinite(gt) & (gt > 0)


def _unpack(est):
    """Disparity array and validity from a DisparityEstimate or a plain map."""
    if hasattr(est, "valid"):
        return np.asarray(est.disparity, dtype=np.float64), np.asarray(est.valid, dtype=bool)
    d = np.asarray(est, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return d, np.isfinite(d) & (d >= 0)


def _prepare(est, gt, mask):
    d, valid = _unpack(est)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not (d.shape == gt.shape == mask.shape):
        raise ShapeMismatch(f"estimate {d.shape}, gt {gt.shape}, mask {mask.shape}")
    region = mask & gt_valid(gt)
    err = np.abs(np.where(valid, d, 0.0) - np.where(region, gt, 0.0))
    return err, valid, region


def epe(est, gt, mask, policy: InvalidPolicy | str = InvalidPolicy.EXCLUDE) -> float:
    """Mean absolute disparity error over mask, valid GT and valid estimate."""
    if InvalidPolicy(policy) is not InvalidPolicy.EXCLUDE:
        raise ValueError("EPE supports only the 'exclude' invalid policy")
    err, valid, region = _prepare(est, gt, mask)
    sel = region & valid
    n = int(sel.sum())
    if n == 0:
        raise EmptyRegion("no valid pixels in region")
    return math.fsum(err[sel]) / n


def badpix(est, gt, mask, tau: float = 3.0,
           policy: InvalidPolicy | str = InvalidPolicy.COUNT_AS_BAD) -> float:
    """Percentage of evaluated pixels whose error exceeds ``tau``."""
    err, valid, region = _prepare(est, gt, mask)
    if InvalidPolicy(policy) is InvalidPolicy.EXCLUDE:
        region = region & valid
    n = int(region.sum())
    if n == 0:
        raise EmptyRegion("no pixels in region")
    bad = region & (~valid | (err > tau))
    return float(100.0 * bad.sum() / n)


@dataclass(frozen=True)
class RegionStats:
    pixel_count: int
    epe_count: int
    epe_px: float | None
    badpix_pct: float | None


@dataclass
class EvalReport:
    regions: dict[str, RegionStats]
    tau: float = 3.0
    epe_policy: str = InvalidPolicy.EXCLUDE.value
    badpix_policy: str = InvalidPolicy.COUNT_AS_BAD.value
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        # canonical order: standard regions first, then extras alphabetically
        order = [r for r in REGIONS if r in self.regions]
        order += sorted(set(self.regions) - set(REGIONS))
        self.regions = {r: self.regions[r] for r in order}

    def __getitem__(self, region: str) -> RegionStats:
        return self.regions[region]

    def rows(self) -> list[dict]:
        return [{"region": name, "pixel_count": s.pixel_count, "epe_count": s.epe_count,
                 "epe_px": s.epe_px, "badpix_pct": s.badpix_pct, "tau_px": self.tau,
                 "epe_policy": self.epe_policy, "badpix_policy": self.badpix_policy}
                for name, s in self.regions.items()]

    def to_csv(self) -> str:
        return rows_to_csv(self.rows(), REPORT_COLUMNS)

    def to_dict(self) -> dict:
        return {"regions": {k: vars(v) for k, v in self.regions.items()}, "tau": self.tau,
                "epe_policy": self.epe_policy, "badpix_policy": self.badpix_policy,
                "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        regions = {k: RegionStats(**v) for k, v in d["regions"].items()}
        return cls(regions, d["tau"], d["epe_policy"], d["badpix_policy"], d.get("meta", {}))

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def region_stats(est, gt, region_mask, tau: float = 3.0,
                 badpix_policy: InvalidPolicy | str = InvalidPolicy.COUNT_AS_BAD) -> RegionStats:
    err, valid, region = _prepare(est, gt, region_mask)
    count = int(region.sum())
    epe_sel = region & valid
    epe_count = int(epe_sel.sum())
    epe_val = math.fsum(err[epe_sel]) / epe_count if epe_count else None
    bad_region = region & valid if InvalidPolicy(badpix_policy) is InvalidPolicy.EXCLUDE else region
    n_bad = int(bad_region.sum())
    bad_val = None
    if n_bad:
        bad_val = float(100.0 * (bad_region & (~valid | (err > tau))).sum() / n_bad)
    return RegionStats(count, epe_count, epe_val, bad_val)


def region_report(est, bundle_or_gt, masks, tau: float = 3.0,
                  badpix_policy: InvalidPolicy | str = InvalidPolicy.COUNT_AS_BAD,
                  extra_regions: dict[str, np.ndarray] | None = None,
                  meta: dict | None = None) -> EvalReport:
    """Evaluate one estimate on the full image and every hazard region.

    ``masks`` is a HazardMasks or a dict with at least ``nonoccluded``;
    missing hazard masks are treated as empty. ``extra_regions`` are
    additional named masks, also intersected with the non-occluded mask.
    """
    gt = bundle_or_gt.left.disparity if hasattr(bundle_or_gt, "left") else bundle_or_gt
    gt = np.asarray(gt, dtype=np.float64)
    m = masks.as_dict() if hasattr(masks, "as_dict") else dict(masks)
    nonocc = np.asarray(m["nonoccluded"], dtype=bool)
    empty = np.zeros(gt.shape, dtype=bool)
    regions = {"full": region_stats(est, gt, np.ones(gt.shape, dtype=bool), tau, badpix_policy),
               "nonoccluded": region_stats(est, gt, nonocc, tau, badpix_policy)}
    named = {name: m.get(name, empty) for name in REGIONS[2:]}
    named.update(extra_regions or {})
    for name, mask in named.items():
        regions[name] = region_stats(est, gt, np.asarray(mask, dtype=bool) & nonocc, tau,
                                     badpix_policy)
    return EvalReport(regions, float(tau), InvalidPolicy.EXCLUDE.value,
                      InvalidPolicy(badpix_policy).value, dict(meta or {}))


def pearson(xs, ys) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInput("pearson needs two 1-D sequences of equal length")
    if len(x) < 2:
        raise DegenerateInput("pearson needs at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepCell:
    method: str
    level: float
    viewpoints: int
    epe_mean: float | None
    badpix_mean: float | None
    epe_n: int
    badpix_n: int


@dataclass
class SweepResult:
    factor: str
    region: str
    levels: list[float]
    methods: list[str]
    cells: dict[tuple[str, float], SweepCell]

    def curve(self, method: str, metric: str = "epe") -> list[float | None]:
        attr = "epe_mean" if metric == "epe" else "badpix_mean"
        return [getattr(self.cells[(method, lv)], attr) for lv in self.levels]

    def rows(self) -> list[dict]:
        out = []
        for method in self.methods:
            for lv in self.levels:
                c = self.cells[(method, lv)]
                out.append({"factor": self.factor, "region": self.region, "method": method,
                            "level": lv, "viewpoints": c.viewpoints, "epe_mean": c.epe_mean,
                            "badpix_mean": c.badpix_mean, "epe_n": c.epe_n,
                            "badpix_n": c.badpix_n})
        return out

    def to_csv(self) -> str:
        return rows_to_csv(self.rows(), SWEEP_COLUMNS)


def aggregate_sweep(reports, region: str, factor: str = "") -> SweepResult:
    """Unweighted mean over viewpoints per (method, level).

    ``reports`` holds (method, level, viewpoint, EvalReport) tuples. Every
    method and level must cover the same viewpoint set. A viewpoint where
    the region is empty contributes nothing; the count used is recorded.
    """
    grid: dict[tuple[str, float], dict] = {}
    for method, level, vp, rep in reports:
        key = (method, float(level))
        if vp in grid.setdefault(key, {}):
            raise ValueError(f"duplicate report for {key} viewpoint {vp}")
        grid[key][vp] = rep
    if not grid:
        raise IncompleteGrid("no reports")
    methods = sorted({k[0] for k in grid})
    levels = sorted({k[1] for k in grid})
    vps = set(next(iter(grid.values())))
    for m in methods:
        for lv in levels:
            if (m, lv) not in grid:
                raise IncompleteGrid(f"missing cell method={m} level={lv}")
            if set(grid[(m, lv)]) != vps:
                raise IncompleteGrid(f"viewpoint set differs at method={m} level={lv}")
    cells = {}
    for key, by_vp in grid.items():
        stats = [by_vp[v][region] for v in sorted(by_vp)]
        epes = [s.epe_px for s in stats if s.epe_px is not None]
        bads = [s.badpix_pct for s in stats if s.badpix_pct is not None]
        cells[key] = SweepCell(key[0], key[1], len(stats),
                               math.fsum(epes) / len(epes) if epes else None,
                               math.fsum(bads) / len(bads) if bads else None, len(epes), len(bads))
    return SweepResult(factor, region, levels, methods, cells)


def relative_drops(values) -> list[float]:
    """Relative size of every adjacent decrease in a curve."""
    return [(a - b) / a if a > 0 else math.inf
            for a, b in zip(values[:-1], values[1:]) if b < a]


def nearly_monotone(values, max_inversions: int = 1, max_drop: float = 0.05) -> bool:
    """Non-decreasing up to ``max_inversions`` drops each at most ``max_drop``."""
    drops = relative_drops(values)
    return len(drops) <= max_inversions and all(d <= max_drop for d in drops)


# ---------------------------------------------------------------- csv


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
