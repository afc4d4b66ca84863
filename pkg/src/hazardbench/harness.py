"""Sweep orchestration: config -> render -> masks -> match -> evaluate -> CSV.

A sweep is a grid of (level, viewpoint) cells. Each cell renders one stereo
pair, derives its masks, runs every configured matcher and evaluates each
estimate. Cells are independent jobs; a cell's ``cell.json`` is written last
and doubles as its completion marker, so an interrupted sweep resumes by
recomputing only the cells without one.

Scenes are seeded procedural builds rather than sampled asset scenes; the
manifest states this.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__ as CODE_VERSION
from . import io_formats as iof
from .errors import ConfigError, DegenerateInput, HazardBenchError, IncompleteGrid
from .evaluate import (REGIONS, REPORT_COLUMNS, EvalReport, InvalidPolicy, RegionStats,
                       SweepResult, aggregate_sweep, pearson, read_csv_rows, region_report,
                       rows_to_csv)
from .hazard import MaskParams, derive_all, disparity_jump_mask, footprint
from .match import MatcherConfig, ingest_external, run_matcher
from .render import RenderSettings, render_stereo, save_bundle
from .scene import HazardFactor, StereoRig, build_case, set_hazard_level, viewpoint_ring

log = logging.getLogger(__name__)

HAZARD_REGION = "hazard"
SCENE_NOTE = "seeded procedural scenes stand in for sampled asset scenes"
TABLE_COLUMNS = ("label", "method", "factor", "level", "viewpoint") + REPORT_COLUMNS


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class SweepConfig:
    name: str
    factor: str
    levels: tuple[float, ...]
    matchers: tuple[MatcherConfig, ...]
    viewpoints: int = 4
    viewpoint_seed: int = 0
    scene_seed: int = 0
    rig: dict = field(default_factory=dict)
    render: dict = field(default_factory=dict)
    masks: dict = field(default_factory=dict)
    tau: float = 3.0
    badpix_policy: str = InvalidPolicy.COUNT_AS_BAD.value
    region: str = HAZARD_REGION
    output_dir: str = "runs/sweep"
    workers: int = 1
    save_artifacts: bool = True
    svg: bool = False

    def __post_init__(self):
        try:
            factor = HazardFactor.parse(self.factor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not factor.controllable:
            raise ConfigError(f"factor {factor.value} has no hazard level to sweep")
        lv = list(self.levels)
        if not lv:
            raise ConfigError("levels must not be empty")
        if any(not 0.0 <= x <= 1.0 for x in lv):
            raise ConfigError("levels must lie in [0, 1]")
        if any(b <= a for a, b in zip(lv[:-1], lv[1:])):
            raise ConfigError("levels must be strictly increasing")
        if not self.matchers:
            raise ConfigError("at least one matcher is required")
        names = [m.name for m in self.matchers]
        if len(set(names)) != len(names):
            raise ConfigError("matcher names must be unique")
        if self.viewpoints < 1:
            raise ConfigError("viewpoints must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.region not in REGIONS + (HAZARD_REGION,):
            raise ConfigError(f"unknown region {self.region!r}")
        InvalidPolicy(self.badpix_policy)
        # surface bad sub-blocks at load time rather than inside a worker
        self.make_rig(), self.make_render_settings(), self.make_mask_params()

    @property
    def hazard_factor(self) -> HazardFactor:
        return HazardFactor.parse(self.factor)

    def make_rig(self) -> StereoRig:
        return _build(StereoRig, self.rig, "rig")

    def make_render_settings(self) -> RenderSettings:
        return _build(RenderSettings, self.render, "render")

    def make_mask_params(self) -> MaskParams:
        return _build(MaskParams, self.masks, "masks")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels"] = list(self.levels)
        d["matchers"] = [asdict(m) for m in self.matchers]
        d["factor"] = self.hazard_factor.value
        return d

    def fingerprint(self) -> str:
        """Hash of every field that can change the results."""
        d = self.to_dict()
        for k in ("output_dir", "workers", "save_artifacts", "svg"):
            d.pop(k)
        return sha256_bytes(json.dumps(d, sort_keys=True).encode())

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            d["levels"] = tuple(float(x) for x in d["levels"])
            d["matchers"] = tuple(_build(MatcherConfig, m, "matcher") for m in d["matchers"])
            return cls(**d)
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, text_or_path: str | Path) -> "SweepConfig":
        p = Path(text_or_path)
        text = p.read_text() if p.suffix in (".yaml", ".yml", ".json") else str(text_or_path)
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)


def _build(kind, values, label):
    if isinstance(values, kind):
        return values
    try:
        return kind(**dict(values or {}))
    except TypeError as exc:
        raise ConfigError(f"bad {label} block: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad {label} block: {exc}") from exc


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha_file(path: Path) -> str:
    return sha256_bytes(path.read_bytes())


# ---------------------------------------------------------------- cells


def cell_name(level_index: int, viewpoint: int) -> str:
    return f"L{level_index:02d}_V{viewpoint:02d}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run_cell(config: SweepConfig, level_index: int, viewpoint: int, out_dir: str | Path) -> dict:
    """Compute one (level, viewpoint) cell and persist its artifacts."""
    out = Path(out_dir)
    cdir = out / "cells" / cell_name(level_index, viewpoint)
    level = config.levels[level_index]
    base = build_case(config.hazard_factor, config.scene_seed)
    scene = set_hazard_level(base, config.hazard_factor, level)
    pose = viewpoint_ring(base, config.viewpoints, config.viewpoint_seed)[viewpoint]
    rig = config.make_rig()
    bundle = render_stereo(scene, rig, pose, config.make_render_settings())
    masks = derive_all(bundle, config.make_mask_params())
    hazard = footprint(bundle.left.instance, scene.hazard_instance_ids)
    written: list[Path] = []
    if config.save_artifacts:
        written += save_bundle(bundle, cdir / "bundle")
        written += masks.save(cdir / "masks")
        (cdir / "masks").mkdir(parents=True, exist_ok=True)
        (cdir / "masks" / f"{HAZARD_REGION}.png").write_bytes(iof.write_mask_png(hazard))
        written.append(cdir / "masks" / f"{HAZARD_REGION}.png")
    reports = {}
    for mcfg in config.matchers:
        est = run_matcher(mcfg, bundle.left.rgb, bundle.right.rgb)
        rep = region_report(est, bundle, masks, config.tau, config.badpix_policy,
                            extra_regions={HAZARD_REGION: hazard},
                            meta={"factor": config.hazard_factor.value, "level": level,
                                  "viewpoint": viewpoint, "method": mcfg.name,
                                  "matcher": asdict(mcfg)})
        reports[mcfg.name] = rep.to_dict()
        if config.save_artifacts:
            written += est.save(cdir / "estimates" / mcfg.name)
    cdir.mkdir(parents=True, exist_ok=True)
    files = {p.relative_to(out).as_posix(): _sha_file(p) for p in sorted(written)}
    record = {"cell": cell_name(level_index, viewpoint), "level_index": level_index,
              "level": level, "viewpoint": viewpoint, "status": "ok", "files": files,
              "reports": reports, "config_sha256": config.fingerprint()}
    _write_atomic(cdir / "cell.json", json.dumps(record, sort_keys=True, indent=1))
    return record


def _load_cell(config: SweepConfig, out: Path, li: int, vp: int) -> dict | None:
    """A previously completed cell, or None if it must be recomputed."""
    path = out / "cells" / cell_name(li, vp) / "cell.json"
    if not path.exists():
        return None
    try:
        record = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    if record.get("config_sha256") != config.fingerprint():
        return None
    if set(record.get("reports", {})) != {m.name for m in config.matchers}:
        return None
    for rel, digest in record["files"].items():
        f = out / rel
        if not f.exists() or _sha_file(f) != digest:
            return None
    return record


def _cell_job(args):
    config, li, vp, out = args
    try:
        return run_cell(config, li, vp, out)
    except Exception as exc:  # recorded in the manifest, the sweep carries on
        log.exception("cell %s failed", cell_name(li, vp))
        return {"cell": cell_name(li, vp), "level_index": li, "level": config.levels[li],
                "viewpoint": vp, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}


# ---------------------------------------------------------------- sweep


@dataclass
class SweepOutcome:
    result: SweepResult | None
    results: dict[str, SweepResult]
    output_dir: Path
    computed: list[str]
    reused: list[str]
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures and self.result is not None


def report_entries(records: list[dict]) -> list[tuple[str, float, int, EvalReport]]:
    entries = []
    for rec in records:
        if rec.get("status") != "ok":
            continue
        for method in sorted(rec["reports"]):
            entries.append((method, rec["level"], rec["viewpoint"],
                            EvalReport.from_dict(rec["reports"][method])))
    return entries


def run_sweep(config: SweepConfig, output_dir: str | Path | None = None,
              workers: int | None = None, restart: bool = True) -> SweepOutcome:
    """Run every cell of the sweep grid, persist artifacts and aggregate.

    With ``restart`` completed cells found on disk are reused. Output bytes
    depend only on the config, never on ``workers``.
    """
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or config.workers
    grid = [(li, vp) for li in range(len(config.levels)) for vp in range(config.viewpoints)]
    records: dict[tuple[int, int], dict] = {}
    todo = []
    for li, vp in grid:
        rec = _load_cell(config, out, li, vp) if restart else None
        if rec is None:
            todo.append((li, vp))
        else:
            records[(li, vp)] = rec
    reused = [cell_name(*k) for k in sorted(records)]
    jobs = [(config, li, vp, str(out)) for li, vp in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            done = list(pool.map(_cell_job, jobs))
    else:
        done = [_cell_job(j) for j in jobs]
    for (li, vp), rec in zip(todo, done):
        records[(li, vp)] = rec
    ordered = [records[k] for k in grid]
    failures = [{"cell": r["cell"], "error": r["error"]} for r in ordered if r["status"] != "ok"]

    entries = report_entries(ordered)
    (out / "reports.csv").write_text(_reports_csv(entries))
    results: dict[str, SweepResult] = {}
    if not failures:
        for region in REGIONS + (HAZARD_REGION,):
            results[region] = aggregate_sweep(entries, region, config.hazard_factor.value)
        sweep_csv = "".join(r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1]
                            for i, r in enumerate(results.values()))
        (out / "sweep.csv").write_text(sweep_csv)
        if config.svg:
            (out / "sweep.svg").write_text(sweep_svg(results[config.region]))
    _write_manifest(config, out, ordered, failures)
    return SweepOutcome(results.get(config.region), results, out,
                        [cell_name(*k) for k in todo], reused, failures)


def _reports_csv(entries) -> str:
    rows = []
    for method, level, vp, rep in entries:
        for row in rep.rows():
            rows.append({"label": f"level={level!r}/viewpoint={vp}", "method": method,
                         "factor": rep.meta.get("factor"), "level": level, "viewpoint": vp,
                         **row})
    return rows_to_csv(rows, TABLE_COLUMNS)


def _write_manifest(config: SweepConfig, out: Path, records: list[dict], failures) -> None:
    cells = []
    for r in records:
        entry = {"cell": r["cell"], "level": r["level"], "viewpoint": r["viewpoint"],
                 "status": r["status"]}
        if r["status"] == "ok":
            cell_json = f"cells/{r['cell']}/cell.json"
            entry["record"] = {cell_json: _sha_file(out / cell_json)}
            entry["files"] = r["files"]
        else:
            entry["error"] = r["error"]
        cells.append(entry)
    (out / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=1))
    outputs = {name: _sha_file(out / name)
               for name in ("config.json", "reports.csv", "sweep.csv", "sweep.svg")
               if (out / name).exists()}
    manifest = {"code_version": CODE_VERSION, "config_sha256": config.fingerprint(),
                "factor": config.hazard_factor.value, "levels": list(config.levels),
                "viewpoints": config.viewpoints, "methods": [m.name for m in config.matchers],
                "scene_note": SCENE_NOTE, "cells": cells, "failures": failures,
                "outputs": outputs}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))


def load_sweep_reports(output_dir: str | Path, config: SweepConfig,
                       region: str | None = None) -> SweepResult:
    """Re-aggregate persisted cell reports; missing cells raise IncompleteGrid."""
    out = Path(output_dir)
    records = []
    for li in range(len(config.levels)):
        for vp in range(config.viewpoints):
            path = out / "cells" / cell_name(li, vp) / "cell.json"
            if not path.exists():
                raise IncompleteGrid(f"missing cell {cell_name(li, vp)} under {out}")
            records.append(json.loads(path.read_text()))
    return aggregate_sweep(report_entries(records), region or config.region,
                           config.hazard_factor.value)


def sweep_svg(result: SweepResult, metric: str = "epe", width: int = 480,
              height: int = 320) -> str:
    """Minimal line chart of metric vs level, one polyline per method."""
    pad = 40
    curves = {m: result.curve(m, metric) for m in result.methods}
    vals = [v for c in curves.values() for v in c if v is not None]
    vmax = max(vals, default=1.0) or 1.0
    lv = result.levels
    span = (lv[-1] - lv[0]) or 1.0

    def xy(level, v):
        x = pad + (level - lv[0]) / span * (width - 2 * pad)
        y = height - pad - v / vmax * (height - 2 * pad)
        return f"{x:.1f},{y:.1f}"

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20">{result.factor} / {result.region} / {metric}</text>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
             'stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for i, (method, curve) in enumerate(curves.items()):
        pts = " ".join(xy(l, v) for l, v in zip(lv, curve) if v is not None)
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 15 * i}" fill="{color}" '
                     f'text-anchor="end">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------- tables


@dataclass
class ReportTable:
    """EvalReports keyed by (label, method), e.g. one per scene and method."""

    entries: list[tuple[str, str, EvalReport]] = field(default_factory=list)

    @property
    def methods(self) -> list[str]:
        return sorted({m for _, m, _ in self.entries})

    def method_means(self, region: str, metric: str = "epe") -> dict[str, float]:
        attr = "epe_px" if metric == "epe" else "badpix_pct"
        out = {}
        for method in self.methods:
            vals = [getattr(rep[region], attr) for _, m, rep in self.entries
                    if m == method and region in rep.regions]
            vals = [v for v in vals if v is not None]
            if vals:
                out[method] = float(np.mean(vals))
        return out

    def to_csv(self) -> str:
        rows = [{"label": label, "method": method, **row}
                for label, method, rep in self.entries for row in rep.rows()]
        return rows_to_csv(rows, TABLE_COLUMNS)

    @classmethod
    def from_csv(cls, text: str) -> "ReportTable":
        grouped: dict[tuple[str, str], dict] = {}
        meta: dict[tuple[str, str], dict] = {}
        for row in read_csv_rows(text):
            key = (row["label"], row["method"])
            grouped.setdefault(key, {})[row["region"]] = RegionStats(
                int(row["pixel_count"]), int(row["epe_count"]), _num(row["epe_px"]),
                _num(row["badpix_pct"]))
            meta[key] = row
        entries = []
        for key, regions in grouped.items():
            row = meta[key]
            entries.append((key[0], key[1], EvalReport(regions, float(row["tau_px"]),
                                                       row["epe_policy"], row["badpix_policy"])))
        return cls(entries)


def _num(text: str) -> float | None:
    return float(text) if text != "" else None


def correlate(table_a, table_b, region: str, metric: str = "epe") -> float:
    """Pearson r across the methods shared by two tables."""
    a = table_a.method_means(region, metric) if hasattr(table_a, "method_means") else table_a
    b = table_b.method_means(region, metric) if hasattr(table_b, "method_means") else table_b
    common = sorted(set(a) & set(b))
    if len(common) < 2:
        raise DegenerateInput(f"need >= 2 shared methods, have {common}")
    return pearson([a[m] for m in common], [b[m] for m in common])


# ---------------------------------------------------------------- external data

GT_NAMES = ("disp0GT.pfm", "gt.pfm", "gt.png")


@dataclass
class ExternalEvalResult:
    table: ReportTable
    skipped: dict[str, str]

    @property
    def ok(self) -> bool:
        return not self.skipped


def _find_gt(scene_dir: Path) -> Path | None:
    for name in GT_NAMES:
        if (scene_dir / name).exists():
            return scene_dir / name
    return None


def _find_estimate(method_dir: Path, scene: str) -> Path | None:
    for suffix in (".pfm", ".png"):
        if (method_dir / f"{scene}{suffix}").exists():
            return method_dir / f"{scene}{suffix}"
    return None


def run_external_eval(root: str | Path, annotations: str | Path | None = None,
                      estimates: str | Path | None = None, tau: float = 3.0,
                      badpix_policy: str = InvalidPolicy.COUNT_AS_BAD.value,
                      downsample: int = 1, downsample_method: str = "nearest",
                      color_keys: dict | None = None, tolerance: int = 0,
                      jump_thresh: float = 2.0) -> ExternalEvalResult:
    """Evaluate externally produced disparity maps on annotated real scenes.

    Layout: ``root/<scene>/`` holds GT (``disp0GT.pfm``, ``gt.pfm`` or
    ``gt.png``) and optionally ``mask0nocc.png`` (255 = non-occluded).
    Annotations default to ``root/annotations/<scene>.png`` and estimates to
    ``root/estimates/<method>/<scene>.pfm|png``. GT is downsampled by
    ``downsample`` with disparities divided by the same factor.
    """
    root = Path(root)
    ann_dir = Path(annotations) if annotations else root / "annotations"
    est_dir = Path(estimates) if estimates else root / "estimates"
    scenes = sorted(p.name for p in root.iterdir() if p.is_dir() and _find_gt(p))
    methods = sorted(p.name for p in est_dir.iterdir() if p.is_dir()) if est_dir.exists() else []
    table = ReportTable()
    skipped: dict[str, str] = {}
    for scene in scenes:
        try:
            ann_path = ann_dir / f"{scene}.png"
            if not ann_path.exists():
                raise FileNotFoundError(f"no annotation {ann_path.name}")
            gt = iof.load_disparity(_find_gt(root / scene))
            ann = iof.read_annotation_mask(ann_path.read_bytes(), color_keys, tolerance)
            nocc_path = root / scene / "mask0nocc.png"
            if nocc_path.exists():
                nonocc = iof.decode_png8(nocc_path.read_bytes()) == 255
                if nonocc.ndim == 3:
                    nonocc = nonocc[..., 0]
            else:
                nonocc = np.ones(gt.shape, dtype=bool)
            full_shape = gt.shape
            gt = iof.downsample_disparity(gt, downsample, downsample_method)
            masks = {"nonoccluded": iof.downsample_mask(nonocc, downsample),
                     "disparity_jump": disparity_jump_mask(gt, jump_thresh)}
            for name, m in ann.masks.items():
                masks[name] = iof.downsample_mask(m, downsample)
            for name, m in masks.items():
                if m.shape != gt.shape:
                    raise ValueError(f"{name} mask shape {m.shape} != GT {gt.shape}")
            for method in methods:
                path = _find_estimate(est_dir / method, scene)
                if path is None:
                    skipped[f"{scene}/{method}"] = "missing estimate"
                    continue
                est = ingest_external(path)
                if est.disparity.shape == full_shape and downsample > 1:
                    d = iof.downsample_disparity(np.where(est.valid, est.disparity, np.nan),
                                                 downsample, downsample_method)
                    est = type(est)(d, d >= 0, est.meta)
                rep = region_report(est, gt, masks, tau, badpix_policy,
                                    meta={"scene": scene, "method": method})
                table.entries.append((scene, method, rep))
        except (HazardBenchError, OSError, ValueError) as exc:
            log.warning("skipping scene %s: %s", scene, exc)
            skipped[scene] = f"{type(exc).__name__}: {exc}"
    return ExternalEvalResult(table, skipped)
