import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import fronto_plane, front_pose, simple_scene
from hazardbench import hazard as hz
from hazardbench import render as rd
from hazardbench import scene as sc
from hazardbench.errors import WindowTooLarge
from hazardbench.scene import HazardFactor as F

MID = sc.StereoRig(focal_px=150.0, baseline_m=0.2, width=160, height=120)


def _bundle(factor, level, viewpoint=1, rig=MID):
    base = sc.build_case(factor, 0)
    s = sc.set_hazard_level(base, factor, level) if factor.controllable else base
    return s, rd.render_stereo(s, rig, sc.viewpoint_ring(base, 2, 0)[viewpoint])


# ---------------------------------------------------------------- textureless


def test_constant_image_all_textureless():
    assert hz.textureless_mask(np.full((12, 12, 3), 0.4)).all()


def test_one_pixel_checkerboard_not_textureless():
    img = (np.indices((16, 16)).sum(axis=0) % 2).astype(float)
    g = hz.gradient_magnitude(img)
    # interior: both neighbours differ by 1 along each axis
    np.testing.assert_allclose(g[1:-1, 1:-1], np.sqrt(2.0))
    assert not hz.textureless_mask(img).any()


def _brute_textureless(lum, window, thresh):
    H, W = lum.shape

    def at(y, x):
        return lum[min(max(y, 0), H - 1), min(max(x, 0), W - 1)]

    grad = np.zeros((H, W))
    for y in range(H):
        for x in range(W):
            gx = (abs(at(y, x + 1) - at(y, x)) + abs(at(y, x) - at(y, x - 1))) / 2
            gy = (abs(at(y + 1, x) - at(y, x)) + abs(at(y, x) - at(y - 1, x))) / 2
            grad[y, x] = (gx * gx + gy * gy) ** 0.5
    r = window // 2
    out = np.zeros((H, W), bool)
    mean = np.zeros((H, W))
    for y in range(H):
        for x in range(W):
            vals = [grad[min(max(y + dy, 0), H - 1), min(max(x + dx, 0), W - 1)]
                    for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
            mean[y, x] = sum(vals) / len(vals)
            out[y, x] = mean[y, x] < thresh
    return out, mean


def test_half_flat_half_noisy_matches_brute_force():
    rng = np.random.default_rng(9)
    img = np.full((9, 9), 0.5)
    img[:, 5:] = rng.random((9, 4))
    expected, mean = _brute_textureless(img, 3, 0.01)
    np.testing.assert_array_equal(hz.textureless_mask(img, window=3), expected)
    assert expected[:, :3].all() and not expected[:, 4:].any()
    # and the thresholded quantity itself agrees
    from scipy import ndimage
    np.testing.assert_allclose(
        ndimage.uniform_filter(hz.gradient_magnitude(img), 3, mode="nearest"), mean, atol=1e-12)


def test_textureless_window_errors():
    with pytest.raises(WindowTooLarge):
        hz.textureless_mask(np.zeros((5, 5)), window=9)
    with pytest.raises(ValueError):
        hz.textureless_mask(np.zeros((20, 20)), window=4)


# ---------------------------------------------------------------- jumps and boundaries


def test_constant_disparity_no_jumps():
    assert not hz.disparity_jump_mask(np.full((10, 10), 7.0)).any()


def test_vertical_step_band():
    d = np.zeros((6, 12))
    d[:, 6:] = 10.0  # edge between columns 5 and 6
    m = hz.disparity_jump_mask(d, 2.0, 2)
    expected = np.zeros((6, 12), bool)
    expected[:, 4:8] = True  # columns 4, 5 | 6, 7
    np.testing.assert_array_equal(m, expected)


def test_jump_below_threshold_ignored():
    d = np.zeros((4, 8))
    d[:, 4:] = 1.5
    assert not hz.disparity_jump_mask(d, 2.0, 2).any()


def test_horizontal_step_band_radius_one():
    d = np.zeros((8, 5))
    d[3:, :] = 5.0  # edge between rows 2 and 3
    m = hz.disparity_jump_mask(d, 2.0, 1)
    assert m.any(axis=1).tolist() == [False, False, True, True, False, False, False, False]


def test_boundary_two_halves():
    inst = np.ones((6, 14), np.uint16)
    c = 7
    inst[:, c:] = 2
    for r in (1, 2, 3):
        m = hz.boundary_mask(inst, r)
        expected = np.zeros_like(m)
        expected[:, c - r:c + r] = True
        np.testing.assert_array_equal(m, expected)


def test_boundary_single_instance_empty():
    assert not hz.boundary_mask(np.full((5, 5), 3)).any()


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.int64, (8, 9), elements=st.integers(0, 3)), st.integers(1, 3))
def test_boundary_contains_edge_pixels(inst, r):
    edge = np.zeros(inst.shape, bool)
    dh = inst[:, 1:] != inst[:, :-1]
    dv = inst[1:, :] != inst[:-1, :]
    edge[:, 1:] |= dh
    edge[:, :-1] |= dh
    edge[1:, :] |= dv
    edge[:-1, :] |= dv
    m = hz.boundary_mask(inst, r)
    assert np.all(m[edge])
    assert np.all(hz.boundary_mask(inst, r + 1) >= m)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, (7, 7), elements=st.floats(0, 50)), st.floats(-20, 20))
def test_jump_mask_shift_invariant(d, c):
    c = round(c)  # integer offsets keep differences exact in floating point
    np.testing.assert_array_equal(hz.disparity_jump_mask(d), hz.disparity_jump_mask(d + c))


def test_rod_field_jump_mask_covers_silhouettes():
    s, b = _bundle(F.DISPARITY_JUMPS, 0.0, viewpoint=0)
    m = hz.disparity_jump_mask(b.left.disparity)
    inst = b.left.instance
    rods = np.isin(inst, s.hazard_instance_ids)
    d = b.left.disparity
    # rod pixels whose 4-neighbour is a non-rod surface much farther away
    sil = np.zeros_like(rods)
    for axis in (0, 1):
        for shift in (1, -1):
            nb_rod = np.roll(rods, shift, axis)
            nb_d = np.roll(d, shift, axis)
            sil |= rods & ~nb_rod & (d - nb_d > 2.0)
    sil[0, :] = sil[-1, :] = False
    sil[:, 0] = sil[:, -1] = False
    assert sil.sum() > 100
    assert np.all(m[sil])


# ---------------------------------------------------------------- material masks


def test_specular_mask_is_screen_footprint_and_level_invariant():
    masks = []
    for level in (0.0, 0.5, 1.0):
        s, b = _bundle(F.SPECULARITY, level)
        m = hz.specular_mask(b)
        np.testing.assert_array_equal(m, hz.footprint(b.left.instance, s.hazard_instance_ids))
        masks.append(m)
    assert masks[0].sum() > 1000
    assert all(np.array_equal(masks[0], m) for m in masks)


def test_no_metal_no_specular_mask():
    b = rd.render_stereo(simple_scene(fronto_plane(4.0)), MID, front_pose())
    assert not hz.specular_mask(b).any()


def test_transparent_mask_glass_footprint():
    s0, b0 = _bundle(F.TRANSPARENCY, 0.0)
    assert not hz.transparent_mask(b0).any()
    masks = []
    for level in (0.25, 1.0):
        s, b = _bundle(F.TRANSPARENCY, level)
        m = hz.transparent_mask(b)
        np.testing.assert_array_equal(m, hz.footprint(b.left.instance, s.hazard_instance_ids))
        masks.append(m)
    assert masks[0].sum() > 1000
    np.testing.assert_array_equal(masks[0], masks[1])
    np.testing.assert_array_equal(masks[0], hz.footprint(b0.left.instance, s0.hazard_instance_ids))


def test_textureless_area_grows_with_level():
    areas = []
    for level in (0.0, 0.25, 0.5, 0.75, 1.0):
        s, b = _bundle(F.TEXTURELESSNESS, level, viewpoint=0)
        walls = hz.footprint(b.left.instance, s.hazard_instance_ids)
        areas.append(int((hz.textureless_mask(b.left.rgb) & walls).sum()))
    assert all(b >= a for a, b in zip(areas, areas[1:]))
    assert areas[-1] > 0.8 * walls.sum() and areas[0] < 0.2 * walls.sum()


@pytest.mark.parametrize("factor, name", [(F.SPECULARITY, "specular"),
                                          (F.TEXTURELESSNESS, "textureless"),
                                          (F.TRANSPARENCY, "transparent"),
                                          (F.DISPARITY_JUMPS, "disparity_jump")])
def test_factor_mask_nonempty_at_positive_level(factor, name):
    _, b = _bundle(factor, 0.75)
    assert getattr(hz.derive_all(b), name).sum() > 100


# ---------------------------------------------------------------- composition


def test_derive_all_composes_and_round_trips(tmp_path):
    _, b = _bundle(F.TRANSPARENCY, 0.5)
    p = hz.MaskParams(window=7, grad_thresh=0.02, jump_radius=1)
    m = hz.derive_all(b, p)
    np.testing.assert_array_equal(m.specular, hz.specular_mask(b))
    np.testing.assert_array_equal(m.transparent, hz.transparent_mask(b))
    np.testing.assert_array_equal(m.textureless, hz.textureless_mask(b.left.rgb, 7, 0.02))
    np.testing.assert_array_equal(m.disparity_jump, hz.disparity_jump_mask(b.left.disparity, 2.0, 1))
    np.testing.assert_array_equal(m.boundary, hz.boundary_mask(b.left.instance, 2))
    np.testing.assert_array_equal(m.nonoccluded, rd.occlusion_mask(b.left.disparity,
                                                                   b.right.disparity))
    assert m.provenance["params"]["window"] == 7
    m.save(tmp_path)
    back = hz.HazardMasks.load(tmp_path)
    for name, arr in m.as_dict().items():
        np.testing.assert_array_equal(getattr(back, name), arr)
    assert back.provenance == m.provenance


def test_masks_reproducible_from_persisted_bundle(tmp_path):
    _, b = _bundle(F.SPECULARITY, 1.0)
    rd.save_bundle(b, tmp_path)
    a, c = hz.derive_all(b), hz.derive_all(rd.load_bundle(tmp_path))
    for name in hz.MASK_NAMES:
        np.testing.assert_array_equal(getattr(a, name), getattr(c, name))
