"""Command-line entry point: ``hazardbench <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io_formats as iof
from .errors import HazardBenchError
from .evaluate import InvalidPolicy, region_report
from .harness import ReportTable, SweepConfig, correlate, run_external_eval, run_sweep
from .hazard import HazardMasks, MaskParams, derive_all
from .match import DisparityEstimate, MatcherConfig, ingest_external, run_matcher
from .render import RenderSettings, load_bundle, render_stereo, save_bundle
from .scene import HazardFactor, StereoRig, build_case, set_hazard_level, viewpoint_ring

log = logging.getLogger("hazardbench")


def _add_rig(p: argparse.ArgumentParser) -> None:
    p.add_argument("--focal", type=float, default=300.0, help="focal length in pixels")
    p.add_argument("--baseline", type=float, default=0.2, help="baseline in meters")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)


def _add_matcher(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("block", "sgm"), default="block")
    p.add_argument("--cost", choices=("census", "ad"), default="census")
    p.add_argument("--d-max", type=int, default=64)
    p.add_argument("--census-window", type=int, default=5)
    p.add_argument("--agg-window", type=int, default=9)
    p.add_argument("--p1", type=float, default=10.0)
    p.add_argument("--p2", type=float, default=120.0)
    p.add_argument("--paths", type=int, choices=(4, 8), default=4)
    p.add_argument("--lambda-smooth", type=float, default=1.0)
    p.add_argument("--lr-check", action="store_true")
    p.add_argument("--lr-tol", type=float, default=1.0)


def _add_masks(p: argparse.ArgumentParser) -> None:
    d = MaskParams()
    p.add_argument("--window", type=int, default=d.window)
    p.add_argument("--grad-thresh", type=float, default=d.grad_thresh)
    p.add_argument("--jump-thresh", type=float, default=d.jump_thresh)
    p.add_argument("--jump-radius", type=int, default=d.jump_radius)
    p.add_argument("--boundary-radius", type=int, default=d.boundary_radius)
    p.add_argument("--occlusion-tol", type=float, default=d.occlusion_tol)


def _mask_params(a) -> MaskParams:
    return MaskParams(a.window, a.grad_thresh, a.jump_thresh, a.jump_radius, a.boundary_radius,
                      a.occlusion_tol)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hazardbench",
                                 description="Synthetic stereo hazard workbench.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a stereo pair of a hazard case")
    p.add_argument("--factor", required=True, choices=[f.value for f in HazardFactor])
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="scene seed")
    p.add_argument("--viewpoint", type=int, default=0)
    p.add_argument("--viewpoints", type=int, default=4)
    p.add_argument("--view-seed", type=int, default=0)
    p.add_argument("--spp", type=int, default=1)
    p.add_argument("--max-bounces", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_rig(p)

    p = sub.add_parser("masks", help="derive hazard masks for a rendered bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    _add_masks(p)

    p = sub.add_parser("match", help="run a reference matcher")
    p.add_argument("--bundle", help="bundle directory (uses left.png/right.png)")
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_matcher(p)

    p = sub.add_parser("eval", help="evaluate an estimate against a bundle's GT")
    p.add_argument("--estimate", required=True, help="estimate directory, PFM or PNG")
    p.add_argument("--bundle", required=True)
    p.add_argument("--masks", help="mask directory (derived on the fly if omitted)")
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--badpix-policy", choices=[x.value for x in InvalidPolicy],
                   default=InvalidPolicy.COUNT_AS_BAD.value)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = sub.add_parser("sweep", help="run a hazard-level sweep from a YAML config")
    p.add_argument("config")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--fresh", action="store_true", help="ignore completed cells on disk")
    p.add_argument("--svg", action="store_true", help="also write sweep.svg")

    p = sub.add_parser("external-eval", help="evaluate external estimates on annotated scenes")
    p.add_argument("--root", required=True)
    p.add_argument("--annotations")
    p.add_argument("--estimates")
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--badpix-policy", choices=[x.value for x in InvalidPolicy],
                   default=InvalidPolicy.COUNT_AS_BAD.value)
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--downsample-method", choices=("nearest", "area"), default="nearest")
    p.add_argument("--tolerance", type=int, default=0, help="color-key tolerance")
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = sub.add_parser("correlate", help="Pearson r across methods of two report tables")
    p.add_argument("table_a")
    p.add_argument("table_b")
    p.add_argument("--region", default="specular")
    p.add_argument("--metric", choices=("epe", "badpix"), default="epe")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_render(a) -> int:
    base = build_case(a.factor, a.seed)
    scene = set_hazard_level(base, a.factor, a.level) if base.factor.controllable else base
    pose = viewpoint_ring(base, a.viewpoints, a.view_seed)[a.viewpoint]
    rig = StereoRig(focal_px=a.focal, baseline_m=a.baseline, width=a.width, height=a.height)
    settings = RenderSettings(samples_per_pixel=a.spp, max_bounce_depth=a.max_bounces)
    bundle = render_stereo(scene, rig, pose, settings, workers=a.workers)
    save_bundle(bundle, a.out)
    log.info("wrote bundle to %s", a.out)
    return 0


def cmd_masks(a) -> int:
    derive_all(load_bundle(a.bundle), _mask_params(a)).save(a.out)
    return 0


def cmd_match(a) -> int:
    if a.bundle:
        b = Path(a.bundle)
        left, right = iof.load_image(b / "left.png"), iof.load_image(b / "right.png")
    elif a.left and a.right:
        left, right = iof.load_image(a.left), iof.load_image(a.right)
    else:
        raise SystemExit("match needs --bundle or both --left and --right")
    cfg = MatcherConfig(a.method, a.method, a.cost, a.census_window, a.agg_window, a.d_max,
                        a.p1, a.p2, a.paths, a.lambda_smooth, a.lr_check, a.lr_tol)
    run_matcher(cfg, left, right, workers=a.workers).save(a.out)
    return 0


def cmd_eval(a) -> int:
    bundle = load_bundle(a.bundle)
    src = Path(a.estimate)
    est = DisparityEstimate.load(src) if src.is_dir() else ingest_external(src)
    masks = HazardMasks.load(a.masks) if a.masks else derive_all(bundle)
    _emit(region_report(est, bundle, masks, a.tau, a.badpix_policy).to_csv(), a.out)
    return 0


def cmd_sweep(a) -> int:
    cfg = SweepConfig.from_yaml(a.config)
    if a.svg:
        cfg = replace(cfg, svg=True)
    outcome = run_sweep(cfg, a.out, a.workers, restart=not a.fresh)
    log.info("computed %d cells, reused %d", len(outcome.computed), len(outcome.reused))
    for f in outcome.failures:
        log.error("cell %s failed: %s", f["cell"], f["error"])
    if outcome.result is not None:
        sys.stdout.write(outcome.result.to_csv())
    return 0 if outcome.ok else 1


def cmd_external_eval(a) -> int:
    res = run_external_eval(a.root, a.annotations, a.estimates, a.tau, a.badpix_policy,
                            a.downsample, a.downsample_method, tolerance=a.tolerance)
    _emit(res.table.to_csv(), a.out)
    for key, why in res.skipped.items():
        log.error("skipped %s: %s", key, why)
    return 0 if res.ok else 1


def cmd_correlate(a) -> int:
    ta = ReportTable.from_csv(Path(a.table_a).read_text())
    tb = ReportTable.from_csv(Path(a.table_b).read_text())
    print(f"{correlate(ta, tb, a.region, a.metric):.6f}")
    return 0


COMMANDS = {"render": cmd_render, "masks": cmd_masks, "match": cmd_match, "eval": cmd_eval,
            "sweep": cmd_sweep, "external-eval": cmd_external_eval, "correlate": cmd_correlate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except HazardBenchError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
