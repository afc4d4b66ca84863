import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hazardbench import scene as sc
from hazardbench.errors import FactorMismatch, InvalidScene, LevelOutOfRange
from hazardbench.render import RenderSettings
from hazardbench.scene import HazardFactor as F

CONTROLLABLE = [F.SPECULARITY, F.TEXTURELESSNESS, F.TRANSPARENCY]
RS = RenderSettings()


def _specular_prims(scene):
    return [p for p in scene.primitives
            if p.material.is_specular(RS.metallic_threshold, RS.roughness_threshold)]


def _controlled(scene):
    return [p for p in scene.primitives if p.material.material_id == scene.controlled_material_id]


def test_specular_case_has_exactly_one_specular_primitive():
    s = sc.build_case(F.SPECULARITY, 7)
    prims = _specular_prims(s)
    assert len(prims) == 1
    assert prims[0].instance_id in s.hazard_instance_ids
    assert len(_specular_prims(sc.set_hazard_level(s, F.SPECULARITY, 1.0))) == 1


@pytest.mark.parametrize("factor", list(F))
def test_build_case_deterministic(factor):
    assert sc.build_case(factor, 7) == sc.build_case(factor, 7)
    assert sc.build_case(factor, 7).to_json() == sc.build_case(factor, 7).to_json()


def test_disparity_jumps_seed_varies_layout():
    a, b = sc.build_case(F.DISPARITY_JUMPS, 1), sc.build_case(F.DISPARITY_JUMPS, 2)
    assert a.primitives != b.primitives
    assert len(a.hazard_instance_ids) == 24
    assert all(a.instance(i).shape == "rod" for i in a.hazard_instance_ids)


def test_texturelessness_walls_share_one_texture():
    s = sc.build_case(F.TEXTURELESSNESS, 3)
    walls = _controlled(s)
    assert {p.instance_id for p in walls} >= set(s.hazard_instance_ids)
    assert len(walls) == 5  # four walls + ceiling
    assert len({p.material for p in walls}) == 1
    s2 = sc.set_hazard_level(s, F.TEXTURELESSNESS, 0.5)
    assert {p.material.texture.scale for p in _controlled(s2)} == {12.0 * 0.5 + 0.01}


def test_transparency_case_glass():
    s = sc.build_case(F.TRANSPARENCY, 0)
    (glass,) = _controlled(s)
    assert glass.material.opacity == 1.0 and glass.material.ior > 1
    assert sc.set_hazard_level(s, F.TRANSPARENCY, 1.0).instance(glass.instance_id).material.opacity == 0.0


def test_endpoints():
    s = sc.build_case(F.SPECULARITY, 0)
    (screen,) = _controlled(sc.set_hazard_level(s, F.SPECULARITY, 0.0))
    assert screen.material.roughness == pytest.approx(0.6)
    (screen,) = _controlled(sc.set_hazard_level(s, F.SPECULARITY, 1.0))
    assert screen.material.roughness == 0.0
    t = sc.build_case(F.TEXTURELESSNESS, 0)
    assert _controlled(sc.set_hazard_level(t, F.TEXTURELESSNESS, 1.0))[0].material.texture.scale \
        == pytest.approx(0.01)


@pytest.mark.parametrize("factor", CONTROLLABLE)
def test_set_level_idempotent(factor):
    s = sc.build_case(factor, 0)
    a = sc.set_hazard_level(s, factor, 0.5)
    assert sc.set_hazard_level(a, factor, 0.5) == a


def _param(scene):
    m = _controlled(scene)[0].material
    return {F.SPECULARITY: m.roughness, F.TEXTURELESSNESS: m.texture.scale,
            F.TRANSPARENCY: m.opacity}[scene.factor]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CONTROLLABLE), st.floats(0, 1), st.floats(0, 1))
def test_controlled_parameter_strictly_decreasing(factor, l1, l2):
    lo, hi = sorted((l1, l2))
    assume(hi - lo > 1e-9)  # below float resolution of the mapped parameter
    s = sc.build_case(factor, 0)
    assert _param(sc.set_hazard_level(s, factor, hi)) < _param(sc.set_hazard_level(s, factor, lo))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CONTROLLABLE), st.floats(0, 1))
def test_set_level_touches_only_the_controlled_field(factor, level):
    s = sc.build_case(factor, 5)
    t = sc.set_hazard_level(s, factor, level)
    assert t.lights == s.lights and t.ambient == s.ambient
    for a, b in zip(s.primitives, t.primitives):
        assert (a.shape, a.rotation, a.translation, a.extent, a.instance_id) == \
            (b.shape, b.rotation, b.translation, b.extent, b.instance_id)
        if a.material.material_id != s.controlled_material_id:
            assert a.material == b.material
        else:
            neutral = {F.SPECULARITY: dict(roughness=0.0),
                       F.TEXTURELESSNESS: dict(texture=replace(a.material.texture, scale=1.0)),
                       F.TRANSPARENCY: dict(opacity=0.0)}[factor]
            assert replace(a.material, **neutral) == replace(b.material, **neutral)


def test_level_errors():
    s = sc.build_case(F.SPECULARITY, 0)
    with pytest.raises(LevelOutOfRange):
        sc.set_hazard_level(s, F.SPECULARITY, 1.5)
    with pytest.raises(FactorMismatch):
        sc.set_hazard_level(s, F.TRANSPARENCY, 0.5)
    jumps = sc.build_case(F.DISPARITY_JUMPS, 0)
    with pytest.raises(FactorMismatch):
        sc.set_hazard_level(jumps, F.DISPARITY_JUMPS, 0.5)


def test_factor_parse_aliases():
    assert F.parse("Specularity") is F.SPECULARITY
    assert F.parse(F.TRANSPARENCY) is F.TRANSPARENCY
    assert not F.DISPARITY_JUMPS.controllable
    with pytest.raises(ValueError):
        F.parse("fog")


def test_viewpoint_ring_single_is_fronto_parallel():
    s = sc.build_case(F.SPECULARITY, 0)
    (pose,) = sc.viewpoint_ring(s, 1, 0)
    optical_axis = pose.R[:, 2]
    assert np.allclose(optical_axis, -np.array(s.focus_normal), atol=1e-12)


@pytest.mark.parametrize("factor", list(F))
def test_viewpoint_ring_projects_focus_inside(factor):
    s = sc.build_case(factor, 0)
    rig = sc.StereoRig()
    poses = sc.viewpoint_ring(s, 10, 4)
    assert poses == sc.viewpoint_ring(s, 10, 4)
    angles = []
    for pose in poses:
        for cam in (pose, rig.right_pose(pose)):
            x, y, z = rig.project(cam, s.focus)
            assert z > 0 and 0 <= x < rig.width and 0 <= y < rig.height
        cosang = -pose.R[:, 2] @ np.array(s.focus_normal)
        angles.append(math.degrees(math.acos(np.clip(cosang, -1, 1))))
    assert angles[0] < 1e-6
    assert max(angles) >= 20.0


def test_rig_disparity_definition():
    rig = sc.StereoRig(focal_px=200, baseline_m=0.5)
    pose = sc.look_at((0, 0, 0), (0, 0, -1))
    xl, _, z = rig.project(pose, (0.3, 0.1, -5.0))
    xr, _, _ = rig.project(rig.right_pose(pose), (0.3, 0.1, -5.0))
    assert z == pytest.approx(5.0)
    assert xl - xr == pytest.approx(200 * 0.5 / 5.0)


@pytest.mark.parametrize("factor", list(F))
def test_scene_json_round_trip(factor):
    s = sc.set_hazard_level(sc.build_case(factor, 2), factor, 0.25) if factor.controllable \
        else sc.build_case(factor, 2)
    assert sc.scene_from_json(s.to_json()) == s


def test_scene_validation():
    mat = sc.Material()
    with pytest.raises(InvalidScene):
        sc.Material(roughness=1.5)
    with pytest.raises(InvalidScene):
        sc.Material(ior=0.9)
    plane = sc.Primitive("plane", sc.IDENTITY, (0, 0, 0), (1, 1), mat, 1)
    with pytest.raises(InvalidScene):
        sc.Primitive("plane", sc.IDENTITY, (0, 0, 0), (1, 0), mat, 2)
    with pytest.raises(InvalidScene):
        sc.SceneGraph((plane, replace(plane, translation=(0, 0, 1))), ambient=1.0)
    with pytest.raises(InvalidScene):
        sc.SceneGraph((plane,))
    with pytest.raises(InvalidScene):
        sc.StereoRig(near_m=2.0, far_m=1.0)
