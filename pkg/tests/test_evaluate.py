import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hazardbench import evaluate as ev
from hazardbench.errors import DegenerateInput, EmptyRegion, IncompleteGrid, ShapeMismatch
from hazardbench.match import DisparityEstimate


def est_of(d, valid=None):
    d = np.asarray(d, np.float32)
    return DisparityEstimate(d, np.ones(d.shape, bool) if valid is None else np.asarray(valid))


def brute(est, gt, mask, tau, policy):
    """Loop oracle over explicit pixel lists."""
    errs, n_region, n_bad = [], 0, 0
    for e, v, g, m in zip(est.disparity.ravel(), est.valid.ravel(), np.ravel(gt), np.ravel(mask)):
        if not (m and np.isfinite(g) and g > 0):
            continue
        if v:
            errs.append(abs(float(e) - float(g)))
        if policy == "exclude" and not v:
            continue
        n_region += 1
        n_bad += (not v) or abs(float(e) - float(g)) > tau
    epe = math.fsum(errs) / len(errs) if errs else None
    return epe, (100.0 * n_bad / n_region if n_region else None)


# ---------------------------------------------------------------- hand examples


def test_hand_epe_and_badpix():
    gt = np.zeros((1, 4))
    m = np.ones((1, 4), bool)
    gt_pos = gt + 10
    e = est_of(gt_pos + [[0, 2, 4, 6]])
    assert ev.epe(e, gt_pos, m) == 3.0
    assert ev.badpix(e, gt_pos, m, tau=3) == 50.0
    assert ev.badpix(e, gt_pos, m, tau=0) == 75.0
    half = np.array([[True, True, False, False]])
    assert ev.epe(e, gt_pos, half) == 1.0
    e2 = est_of(gt_pos + [[0, 2, 4, 5]])
    assert ev.badpix(e2, gt_pos, m, tau=3) == 50.0
    assert ev.badpix(est_of(gt_pos + 1), gt_pos, m, tau=0) == 100.0


def test_invalid_policies():
    gt = np.full((1, 4), 5.0)
    m = np.ones((1, 4), bool)
    e = est_of([[5, 5, 9, 0]], [[True, True, True, False]])
    assert ev.epe(e, gt, m) == pytest.approx(4 / 3)
    assert ev.badpix(e, gt, m, 3, "count-as-bad") == 50.0
    assert ev.badpix(e, gt, m, 3, "exclude") == pytest.approx(100 / 3)
    with pytest.raises(ValueError):
        ev.epe(e, gt, m, "count-as-bad")


def test_invalid_gt_never_counted():
    gt = np.array([[np.inf, 0.0, np.nan, 4.0]])
    e = est_of([[100, 100, 100, 5]])
    m = np.ones((1, 4), bool)
    assert ev.epe(e, gt, m) == 1.0
    assert ev.badpix(e, gt, m) == 0.0
    with pytest.raises(EmptyRegion):
        ev.epe(e, gt, np.array([[True, True, True, False]]))


def test_plain_array_estimate_and_shape_check():
    gt = np.full((2, 2), 3.0)
    assert ev.epe(np.full((2, 2), 4.0), gt, np.ones((2, 2), bool)) == 1.0
    with pytest.raises(ShapeMismatch):
        ev.epe(np.zeros((2, 3)), gt, np.ones((2, 2), bool))


# ---------------------------------------------------------------- properties

arrays = hnp.arrays(np.float64, (6, 7), elements=st.floats(0, 40))


@settings(max_examples=80, deadline=None)
@given(arrays, arrays, hnp.arrays(bool, (6, 7)), hnp.arrays(bool, (6, 7)),
       st.floats(0, 10), st.sampled_from(["exclude", "count-as-bad"]))
def test_matches_brute_force_oracle(d, gt, mask, valid, tau, policy):
    e = est_of(d, valid)
    epe, bad = brute(e, gt, mask, tau, policy)
    s = ev.region_stats(e, gt, mask, tau, policy)
    assert s.epe_px == epe
    assert s.badpix_pct == bad


@settings(max_examples=60, deadline=None)
@given(arrays, arrays, st.floats(0, 10), st.floats(0, 10))
def test_badpix_non_increasing_in_tau(d, gt, t1, t2):
    m = np.ones(d.shape, bool)
    if not ev.gt_valid(gt).any():
        return
    lo, hi = sorted((t1, t2))
    assert ev.badpix(d, gt, m, hi) <= ev.badpix(d, gt, m, lo)


@settings(max_examples=60, deadline=None)
@given(arrays, arrays, st.integers(0, 2**16))
def test_permutation_invariant(d, gt, seed):
    if not ev.gt_valid(gt).any():
        return
    perm = np.random.default_rng(seed).permutation(d.size)
    m = np.ones(d.shape, bool)
    p = lambda a: a.ravel()[perm].reshape(a.shape)  # noqa: E731
    assert ev.epe(p(d), p(gt), m) == pytest.approx(ev.epe(d, gt, m), rel=1e-12)
    assert ev.badpix(p(d), p(gt), m) == ev.badpix(d, gt, m)


@settings(max_examples=60, deadline=None)
@given(arrays, arrays, hnp.arrays(bool, (6, 7)))
def test_partition_identity(d, gt, split):
    # pixel-weighted means of a two-way partition give the whole
    m = np.ones(d.shape, bool)
    whole = ev.region_stats(d, gt, m)
    parts = [ev.region_stats(d, gt, split), ev.region_stats(d, gt, ~split)]
    assert sum(p.pixel_count for p in parts) == whole.pixel_count
    if whole.epe_count:
        combined = sum(p.epe_px * p.epe_count for p in parts if p.epe_count) / whole.epe_count
        assert combined == pytest.approx(whole.epe_px, rel=1e-9, abs=1e-12)
        combined = sum(p.badpix_pct * p.pixel_count for p in parts if p.pixel_count)
        assert combined / whole.pixel_count == pytest.approx(whole.badpix_pct, rel=1e-9)


# ---------------------------------------------------------------- reports


def _masks(shape):
    m = {"nonoccluded": np.ones(shape, bool)}
    m["nonoccluded"][0, 0] = False
    m["specular"] = np.zeros(shape, bool)
    m["specular"][:, :2] = True
    return m


def test_region_report_intersects_nonoccluded():
    gt = np.full((3, 4), 5.0)
    d = gt.copy()
    d[0, 0] = 100.0
    rep = ev.region_report(est_of(d), gt, _masks(gt.shape))
    assert rep["full"].pixel_count == 12 and rep["full"].badpix_pct == pytest.approx(100 / 12)
    assert rep["nonoccluded"].pixel_count == 11 and rep["nonoccluded"].epe_px == 0.0
    assert rep["specular"].pixel_count == 5 and rep["specular"].epe_px == 0.0
    assert rep["transparent"].pixel_count == 0 and rep["transparent"].epe_px is None
    assert list(rep.regions) == list(ev.REGIONS)


def test_region_report_extra_regions_sorted_after_standard():
    gt = np.full((3, 4), 5.0)
    extra = {"zeta": np.ones((3, 4), bool), "alpha": np.ones((3, 4), bool)}
    rep = ev.region_report(gt, gt, _masks(gt.shape), extra_regions=extra)
    assert list(rep.regions)[-2:] == ["alpha", "zeta"]
    assert rep["alpha"].pixel_count == 11


def test_report_csv_and_json_round_trip():
    gt = np.random.default_rng(0).uniform(1, 30, (5, 6))
    d = gt + np.random.default_rng(1).normal(0, 2, gt.shape)
    rep = ev.region_report(d, gt, _masks(gt.shape), tau=2.5, meta={"method": "x"})
    back = ev.EvalReport.from_json(rep.to_json())
    assert back == rep and back.to_csv() == rep.to_csv()
    rows = ev.read_csv_rows(rep.to_csv())
    assert [r["region"] for r in rows] == list(ev.REGIONS)
    specular_row = rows[2]
    assert float(specular_row["epe_px"]) == rep["specular"].epe_px
    assert rows[4]["epe_px"] == "" and rows[0]["tau_px"] == "2.5"


# ---------------------------------------------------------------- pearson


def test_pearson_closed_form():
    # deviations x: (-1, 0, 1), y: (-4/3, -1/3, 5/3); r = 3 / sqrt(2 * 14/3)
    assert ev.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(3 / math.sqrt(28 / 3), rel=1e-12)
    assert ev.pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=10), st.integers(0, 2**16),
       st.floats(0.1, 10), st.floats(-50, 50))
def test_pearson_affine_invariant(xs, seed, a, b):
    ys = list(np.random.default_rng(seed).normal(size=len(xs)))
    if np.ptp(xs) < 1e-3:
        return
    r = ev.pearson(xs, ys)
    assert ev.pearson([a * x + b for x in xs], ys) == pytest.approx(r, abs=1e-6)
    assert -1 <= r <= 1


def test_pearson_degenerate():
    with pytest.raises(DegenerateInput):
        ev.pearson([1], [2])
    with pytest.raises(DegenerateInput):
        ev.pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        ev.pearson([1, 2], [1, 2, 3])


# ---------------------------------------------------------------- sweeps


def _rep(e, b=None, n=1):
    return ev.EvalReport({"specular": ev.RegionStats(n, n if e is not None else 0, e,
                                                     b if b is not None else e)})


def test_aggregate_hand_example():
    reports = [("m", 0.0, 0, _rep(2.0)), ("m", 0.0, 1, _rep(4.0))]
    res = ev.aggregate_sweep(reports, "specular", "specularity")
    cell = res.cells[("m", 0.0)]
    assert cell.epe_mean == 3.0 and cell.viewpoints == 2 and cell.epe_n == 2
    assert res.curve("m") == [3.0]


def test_aggregate_empty_region_viewpoint_skipped():
    reports = [("m", 0.0, 0, _rep(2.0)), ("m", 0.0, 1, _rep(None, n=0))]
    cell = ev.aggregate_sweep(reports, "specular").cells[("m", 0.0)]
    assert cell.epe_mean == 2.0 and cell.epe_n == 1 and cell.viewpoints == 2
    none = ev.aggregate_sweep([("m", 0.0, 0, _rep(None, n=0))], "specular")
    assert none.cells[("m", 0.0)].epe_mean is None


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(0)
    reports = [(m, lv, v, _rep(float(rng.uniform(0, 10))))
               for m in ("a", "b") for lv in (0.0, 0.5, 1.0) for v in range(3)]
    a = ev.aggregate_sweep(reports, "specular")
    b = ev.aggregate_sweep([reports[i] for i in rng.permutation(len(reports))], "specular")
    assert a.to_csv() == b.to_csv()
    assert a.levels == [0.0, 0.5, 1.0] and a.methods == ["a", "b"]


def test_aggregate_incomplete_grid():
    base = [("a", 0.0, 0, _rep(1.0)), ("a", 1.0, 0, _rep(1.0)), ("b", 0.0, 0, _rep(1.0))]
    with pytest.raises(IncompleteGrid):
        ev.aggregate_sweep(base, "specular")
    with pytest.raises(IncompleteGrid):
        ev.aggregate_sweep(base[:2] + [("a", 1.0, 1, _rep(1.0))], "specular")
    with pytest.raises(IncompleteGrid):
        ev.aggregate_sweep([], "specular")
    with pytest.raises(ValueError):
        ev.aggregate_sweep(base[:1] * 2, "specular")


def test_sweep_csv_columns():
    res = ev.aggregate_sweep([("m", 0.5, 0, _rep(1.5))], "specular", "specularity")
    rows = ev.read_csv_rows(res.to_csv())
    assert tuple(rows[0]) == ev.SWEEP_COLUMNS
    assert rows[0]["epe_mean"] == "1.5" and rows[0]["factor"] == "specularity"


def test_nearly_monotone():
    assert ev.nearly_monotone([1, 2, 3])
    assert ev.nearly_monotone([1, 2, 1.95, 3])
    assert not ev.nearly_monotone([1, 2, 1.5, 3])
    assert not ev.nearly_monotone([1, 2, 1.95, 3, 2.9])
    assert ev.relative_drops([2, 1]) == [0.5]
