"""Parametric scenes, the four designed hazard cases and hazard-level control.

World frame: meters, +Y up. Camera frame: +X right, +Y down, +Z forward, so
pixel column x = focal_px * X / Z + cx and depth is the camera-frame Z.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import FactorMismatch, InvalidScene, LevelOutOfRange
from .textures import Texture

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]

SHAPES = ("plane", "box", "sphere", "rod")
IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

# level -> parameter mappings
MAX_ROUGHNESS = 0.6
TEXTURE_FLOOR = 0.01


class HazardFactor(str, enum.Enum):
    SPECULARITY = "specularity"
    TEXTURELESSNESS = "texturelessness"
    TRANSPARENCY = "transparency"
    DISPARITY_JUMPS = "disparity_jumps"

    @classmethod
    def parse(cls, value: "HazardFactor | str") -> "HazardFactor":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"specular": "specularity", "textureless": "texturelessness",
                   "transparent": "transparency", "jumps": "disparity_jumps",
                   "disparityjumps": "disparity_jumps"}
        return cls(aliases.get(key, key))

    @property
    def controllable(self) -> bool:
        return self is not HazardFactor.DISPARITY_JUMPS


@dataclass(frozen=True)
class Material:
    texture: Texture = field(default_factory=Texture)
    roughness: float = 1.0
    metallic: float = 0.0
    opacity: float = 1.0
    ior: float = 1.0
    material_id: int = 0

    def __post_init__(self):
        for name in ("roughness", "metallic", "opacity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidScene(f"material {self.material_id}: {name}={value} outside [0, 1]")
        if self.ior < 1.0:
            raise InvalidScene(f"material {self.material_id}: ior must be >= 1")

    def is_specular(self, metallic_threshold: float, roughness_threshold: float) -> bool:
        return self.metallic >= metallic_threshold and self.roughness <= roughness_threshold

    @property
    def is_transparent(self) -> bool:
        return self.opacity < 1.0


@dataclass(frozen=True)
class Primitive:
    """A posed shape. ``rotation`` maps local to world coordinates.

    Extents are half-sizes: plane (hx, hy) in its local XY plane with normal +Z;
    box (hx, hy, hz); sphere (radius,); rod (radius, half_length) along local Y.
    """

    shape: str
    rotation: Mat3
    translation: Vec3
    extent: tuple[float, ...]
    material: Material
    instance_id: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidScene(f"unknown shape {self.shape!r}")
        expected = {"plane": 2, "box": 3, "sphere": 1, "rod": 2}[self.shape]
        if len(self.extent) != expected or min(self.extent) <= 0:
            raise InvalidScene(f"{self.shape} needs {expected} positive extents, got {self.extent}")
        if self.instance_id < 1:
            raise InvalidScene("instance ids start at 1 (0 is background)")


@dataclass(frozen=True)
class Light:
    kind: str  # "point" | "directional"
    vector: Vec3  # position for point lights, travel direction for directional
    intensity: float
    color: Vec3 = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("point", "directional"):
            raise InvalidScene(f"unknown light kind {self.kind!r}")
        if self.intensity < 0:
            raise InvalidScene("light intensity must be >= 0")


@dataclass(frozen=True)
class Pose:
    """Left-camera pose; ``rotation`` columns are the camera axes in world."""

    rotation: Mat3
    position: Vec3

    @property
    def R(self) -> np.ndarray:
        return np.array(self.rotation, dtype=np.float64)

    @property
    def C(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"rotation": [list(r) for r in self.rotation], "position": list(self.position)}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(_mat3(d["rotation"]), _vec3(d["position"]))


@dataclass(frozen=True)
class StereoRig:
    focal_px: float = 300.0
    baseline_m: float = 0.2
    width: int = 320
    height: int = 240
    cx: float | None = None
    cy: float | None = None
    near_m: float = 0.1
    far_m: float = 1000.0

    def __post_init__(self):
        if self.focal_px <= 0 or self.baseline_m <= 0:
            raise InvalidScene("focal_px and baseline_m must be > 0")
        if self.width < 1 or self.height < 1:
            raise InvalidScene("image size must be positive")
        if not 0 < self.near_m < self.far_m:
            raise InvalidScene("need 0 < near_m < far_m")
        if self.cx is None:
            object.__setattr__(self, "cx", (self.width - 1) / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", (self.height - 1) / 2.0)

    @property
    def fb(self) -> float:
        return self.focal_px * self.baseline_m

    def right_pose(self, left: Pose) -> Pose:
        c = left.C + left.R[:, 0] * self.baseline_m
        return Pose(left.rotation, _vec3(c))

    def project(self, pose: Pose, point: Sequence[float]) -> tuple[float, float, float]:
        """World point -> (column, row, depth) in the camera at ``pose``."""
        p = pose.R.T @ (np.asarray(point, dtype=np.float64) - pose.C)
        return (self.focal_px * p[0] / p[2] + self.cx,
                self.focal_px * p[1] / p[2] + self.cy, float(p[2]))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SceneGraph:
    primitives: tuple[Primitive, ...]
    lights: tuple[Light, ...] = ()
    ambient: float = 0.0
    background_radiance: Vec3 = (0.0, 0.0, 0.0)
    # case bookkeeping; set by build_case
    factor: HazardFactor | None = None
    seed: int = 0
    level: float = 0.0
    controlled_material_id: int | None = None
    base_texture_scale: float | None = None
    hazard_instance_ids: tuple[int, ...] = ()
    focus: Vec3 = (0.0, 0.0, 0.0)
    focus_normal: Vec3 = (0.0, 0.0, 1.0)
    standoff_m: float = 3.5
    bounds: tuple[Vec3, Vec3] = ((-1e3, -1e3, -1e3), (1e3, 1e3, 1e3))

    def __post_init__(self):
        validate_scene(self)

    def instance(self, instance_id: int) -> Primitive:
        for prim in self.primitives:
            if prim.instance_id == instance_id:
                return prim
        raise KeyError(instance_id)

    def materials(self) -> dict[int, Material]:
        return {p.material.material_id: p.material for p in self.primitives}

    def to_dict(self) -> dict:
        return scene_to_dict(self)

    def to_json(self) -> str:
        return json.dumps(scene_to_dict(self), sort_keys=True, indent=1)


def validate_scene(scene: SceneGraph) -> None:
    ids = [p.instance_id for p in scene.primitives]
    if len(set(ids)) != len(ids):
        raise InvalidScene("instance ids must be unique")
    if scene.ambient < 0:
        raise InvalidScene("ambient must be >= 0")
    if not scene.lights and scene.ambient <= 0:
        raise InvalidScene("scene needs a light or nonzero ambient")
    for prim in scene.primitives:
        if not all(math.isfinite(v) for v in prim.translation + prim.extent):
            raise InvalidScene("scene bounding volume must be finite")


# ---------------------------------------------------------------- geometry


def _vec3(v) -> Vec3:
    return tuple(float(x) for x in v)  # type: ignore[return-value]


def _mat3(m) -> Mat3:
    return tuple(_vec3(row) for row in m)  # type: ignore[return-value]


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def frame_from_normal(normal, up=(0.0, 1.0, 0.0)) -> Mat3:
    """Rotation whose local +Z is ``normal`` and local +Y leans toward ``up``."""
    z = _normalize(normal)
    up = np.asarray(up, dtype=np.float64)
    if abs(np.dot(z, _normalize(up))) > 0.999:
        up = np.array([0.0, 0.0, -1.0]) if abs(z[2]) < 0.999 else np.array([0.0, 1.0, 0.0])
    x = _normalize(np.cross(up, z))
    y = np.cross(z, x)
    return _mat3(np.stack([x, y, z], axis=1))


def axis_rotation(axis, angle_rad: float) -> np.ndarray:
    a = _normalize(axis)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle_rad) * k + (1 - math.cos(angle_rad)) * (k @ k)


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> Pose:
    f = _normalize(np.asarray(target, dtype=np.float64) - np.asarray(eye, dtype=np.float64))
    r = np.cross(f, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(r) < 1e-9:
        r = np.cross(f, np.array([0.0, 0.0, -1.0]))
    r = _normalize(r)
    d = np.cross(f, r)
    return Pose(_mat3(np.stack([r, d, f], axis=1)), _vec3(eye))


# ---------------------------------------------------------------- builders


class _Builder:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.prims: list[Primitive] = []
        self._next_material = 1

    def material(self, texture: Texture, **kw) -> Material:
        mat = Material(texture=texture, material_id=self._next_material, **kw)
        self._next_material += 1
        return mat

    def noise(self, a, b, scale, octaves=2) -> Texture:
        return Texture("value-noise", _vec3(a), _vec3(b), float(scale),
                       int(self.rng.integers(0, 2**31 - 1)), octaves)

    def add(self, shape, rotation, translation, extent, material) -> int:
        iid = len(self.prims) + 1
        self.prims.append(Primitive(shape, _mat3(rotation), _vec3(translation),
                                    tuple(float(e) for e in extent), material, iid))
        return iid

    def plane(self, center, normal, half_w, half_h, material, up=(0.0, 1.0, 0.0)) -> int:
        return self.add("plane", frame_from_normal(normal, up), center, (half_w, half_h), material)

    def box(self, center, half, material, rotation=IDENTITY) -> int:
        return self.add("box", rotation, center, half, material)


ROOM = {"x": 4.0, "height": 3.0, "z_front": -6.0, "z_back": 4.0}


def _room(b: _Builder, walls: Material, ceiling: Material, floor: Material,
          back: Material) -> dict[str, int]:
    x, h, zf, zb = ROOM["x"], ROOM["height"], ROOM["z_front"], ROOM["z_back"]
    zc, hz = (zf + zb) / 2, (zb - zf) / 2
    ids = {
        "front": b.plane((0, h / 2, zf), (0, 0, 1), x, h / 2, walls),
        "left": b.plane((-x, h / 2, zc), (1, 0, 0), hz, h / 2, walls),
        "right": b.plane((x, h / 2, zc), (-1, 0, 0), hz, h / 2, walls),
        "back": b.plane((0, h / 2, zb), (0, 0, -1), x, h / 2, back),
        "floor": b.plane((0, 0, zc), (0, 1, 0), x, hz, floor),
        "ceiling": b.plane((0, h, zc), (0, -1, 0), x, hz, ceiling),
    }
    return ids


def _room_bounds(margin: float = 0.4) -> tuple[Vec3, Vec3]:
    return ((-ROOM["x"] + margin, 0.3, ROOM["z_front"] + margin),
            (ROOM["x"] - margin, ROOM["height"] - 0.3, ROOM["z_back"] - margin))


def _lights(key_z: float = -1.0) -> tuple[Light, ...]:
    return (Light("point", (0.5, 2.7, key_z), 9.0),
            Light("point", (-2.0, 2.5, 2.5), 5.0, (1.0, 0.95, 0.9)))


def _clutter(b: _Builder, z_range, x_range, count: int) -> None:
    for _ in range(count):
        kind = b.rng.integers(0, 2)
        tex = b.noise(b.rng.uniform(0.1, 0.5, 3), b.rng.uniform(0.5, 0.95, 3),
                      b.rng.uniform(8, 14))
        mat = b.material(tex, roughness=1.0)
        x = b.rng.uniform(*x_range)
        z = b.rng.uniform(*z_range)
        if kind == 0:
            half = b.rng.uniform(0.15, 0.4, 3)
            yaw = axis_rotation((0, 1, 0), b.rng.uniform(-0.6, 0.6))
            b.box((x, half[1], z), half, mat, rotation=yaw)
        else:
            r = b.rng.uniform(0.15, 0.35)
            b.add("sphere", IDENTITY, (x, r, z), (r,), mat)


# base texture frequency (cycles/m) of the controlled wall texture at level 0
TEXTURELESS_BASE_SCALE = 12.0


def _build_specularity(seed: int) -> SceneGraph:
    b = _Builder(seed)
    walls = b.material(b.noise((0.35, 0.3, 0.25), (0.85, 0.8, 0.7), 9.0))
    _room(b, walls, walls, b.material(b.noise((0.25, 0.2, 0.15), (0.7, 0.55, 0.4), 7.0)),
          b.material(b.noise((0.15, 0.3, 0.2), (0.8, 0.85, 0.6), 8.0)))
    screen_tex = b.noise((0.1, 0.12, 0.2), (0.75, 0.8, 0.9), 10.0)
    screen = b.material(screen_tex, roughness=MAX_ROUGHNESS, metallic=1.0)
    body = b.material(b.noise((0.05, 0.05, 0.05), (0.35, 0.35, 0.35), 12.0))
    center = (0.0, 1.35, -3.5)
    b.box((0.0, 1.35, -3.58), (1.3, 0.75, 0.06), body)
    b.box((0.0, 0.3, -3.55), (0.9, 0.3, 0.3),
          b.material(b.noise((0.3, 0.2, 0.1), (0.6, 0.45, 0.3), 11.0)))
    sid = b.plane(center, (0, 0, 1), 1.2, 0.675, screen)
    _clutter(b, (-5.0, -2.5), (-3.3, -1.8), 2)
    _clutter(b, (-5.0, -2.5), (1.8, 3.3), 2)
    return SceneGraph(tuple(b.prims), _lights(), ambient=0.25,
                      factor=HazardFactor.SPECULARITY, seed=seed, level=0.0,
                      controlled_material_id=screen.material_id, hazard_instance_ids=(sid,),
                      focus=center, focus_normal=(0.0, 0.0, 1.0), standoff_m=3.5,
                      bounds=_room_bounds())


def _build_texturelessness(seed: int) -> SceneGraph:
    b = _Builder(seed)
    wall_tex = b.noise((0.3, 0.28, 0.25), (0.9, 0.88, 0.82), TEXTURELESS_BASE_SCALE)
    walls = b.material(wall_tex)
    ids = _room(b, walls, walls,
                b.material(b.noise((0.25, 0.18, 0.12), (0.7, 0.5, 0.35), 9.0)), walls)
    _clutter(b, (-5.2, -3.5), (-2.5, 2.5), 3)
    hazard = tuple(sorted(ids[k] for k in ("front", "left", "right", "back", "ceiling")))
    return SceneGraph(tuple(b.prims), _lights(), ambient=0.25,
                      factor=HazardFactor.TEXTURELESSNESS, seed=seed, level=0.0,
                      controlled_material_id=walls.material_id,
                      base_texture_scale=TEXTURELESS_BASE_SCALE,
                      hazard_instance_ids=hazard, focus=(0.0, 1.5, ROOM["z_front"]),
                      focus_normal=(0.0, 0.0, 1.0), standoff_m=4.0, bounds=_room_bounds())


def _build_transparency(seed: int) -> SceneGraph:
    b = _Builder(seed)
    walls = b.material(b.noise((0.3, 0.3, 0.35), (0.85, 0.8, 0.75), 9.0))
    _room(b, walls, walls, b.material(b.noise((0.25, 0.2, 0.15), (0.7, 0.55, 0.4), 7.0)),
          walls)
    glass = b.material(b.noise((0.3, 0.38, 0.42), (0.78, 0.8, 0.84), 10.0),
                       roughness=0.3, opacity=1.0, ior=1.5)
    center = (0.0, 1.25, -2.0)
    gid = b.box(center, (1.2, 1.2, 0.02), glass)
    # frame posts either side of the sliding door
    post = b.material(b.noise((0.2, 0.15, 0.1), (0.5, 0.4, 0.3), 14.0))
    b.box((-1.28, 1.25, -2.0), (0.08, 1.25, 0.06), post)
    b.box((1.28, 1.25, -2.0), (0.08, 1.25, 0.06), post)
    _clutter(b, (-5.0, -3.5), (-1.8, 1.8), 4)
    return SceneGraph(tuple(b.prims), _lights(key_z=1.0), ambient=0.25,
                      factor=HazardFactor.TRANSPARENCY, seed=seed, level=0.0,
                      controlled_material_id=glass.material_id, hazard_instance_ids=(gid,),
                      focus=center, focus_normal=(0.0, 0.0, 1.0), standoff_m=3.5,
                      bounds=_room_bounds())


def _build_disparity_jumps(seed: int) -> SceneGraph:
    b = _Builder(seed)
    walls = b.material(b.noise((0.3, 0.3, 0.3), (0.85, 0.85, 0.8), 9.0))
    _room(b, walls, walls, b.material(b.noise((0.25, 0.2, 0.15), (0.7, 0.55, 0.4), 7.0)),
          walls)
    rod_ids = []
    for _ in range(24):
        tex = b.noise(b.rng.uniform(0.1, 0.3, 3), b.rng.uniform(0.5, 0.9, 3), 15.0)
        mat = b.material(tex)
        radius = b.rng.uniform(0.015, 0.04)
        half = b.rng.uniform(0.9, 1.35)
        tilt = axis_rotation((0, 0, 1), b.rng.uniform(-0.15, 0.15)) @ \
            axis_rotation((1, 0, 0), b.rng.uniform(-0.1, 0.1))
        x = b.rng.uniform(-1.6, 1.6)
        z = b.rng.uniform(-3.5, -1.5)
        rod_ids.append(b.add("rod", tilt, (x, half, z), (radius, half), mat))
    return SceneGraph(tuple(b.prims), _lights(), ambient=0.25,
                      factor=HazardFactor.DISPARITY_JUMPS, seed=seed, level=0.0,
                      hazard_instance_ids=tuple(rod_ids), focus=(0.0, 1.2, -2.5),
                      focus_normal=(0.0, 0.0, 1.0), standoff_m=3.5, bounds=_room_bounds())


_BUILDERS = {
    HazardFactor.SPECULARITY: _build_specularity,
    HazardFactor.TEXTURELESSNESS: _build_texturelessness,
    HazardFactor.TRANSPARENCY: _build_transparency,
    HazardFactor.DISPARITY_JUMPS: _build_disparity_jumps,
}


def build_case(factor: HazardFactor | str, seed: int = 0) -> SceneGraph:
    """Build the designed scene for one hazard factor at hazard level 0.

    The same ``(factor, seed)`` always yields an identical scene.
    """
    return _BUILDERS[HazardFactor.parse(factor)](int(seed))


def controlled_value(scene: SceneGraph, level: float) -> float:
    """The controlling material parameter for ``level`` (no scene mutation)."""
    if scene.factor is HazardFactor.SPECULARITY:
        return MAX_ROUGHNESS * (1.0 - level)
    if scene.factor is HazardFactor.TEXTURELESSNESS:
        return scene.base_texture_scale * (1.0 - level) + TEXTURE_FLOOR
    if scene.factor is HazardFactor.TRANSPARENCY:
        return 1.0 - level
    raise FactorMismatch(f"{scene.factor} has no continuous hazard parameter")


def set_hazard_level(scene: SceneGraph, factor: HazardFactor | str, level: float) -> SceneGraph:
    """Return a copy of ``scene`` with the factor's controlling parameter set for ``level``.

    Specularity sets the screen roughness to 0.6 * (1 - level), Texturelessness
    sets the wall texture frequency to s0 * (1 - level) + 0.01 and Transparency
    sets the glass opacity to 1 - level. Nothing else changes.
    """
    factor = HazardFactor.parse(factor)
    if not 0.0 <= level <= 1.0:
        raise LevelOutOfRange(f"hazard level {level} outside [0, 1]")
    if scene.factor is not factor:
        raise FactorMismatch(f"scene built for {scene.factor}, not {factor}")
    if not factor.controllable:
        raise FactorMismatch("disparity jumps are fixed at build time; vary the seed instead")
    value = controlled_value(scene, level)
    mid = scene.controlled_material_id

    def update(mat: Material) -> Material:
        if factor is HazardFactor.SPECULARITY:
            return replace(mat, roughness=value)
        if factor is HazardFactor.TEXTURELESSNESS:
            return replace(mat, texture=replace(mat.texture, scale=value))
        return replace(mat, opacity=value)

    prims = tuple(replace(p, material=update(p.material)) if p.material.material_id == mid else p
                  for p in scene.primitives)
    return replace(scene, primitives=prims, level=float(level))


def viewpoint_ring(scene: SceneGraph, count: int, seed: int = 0) -> list[Pose]:
    """Camera poses orbiting the hazard focus, first one fronto-parallel.

    Subsequent views alternate left/right at 20-40 degrees azimuth with a
    small random elevation, so every ring with two or more poses contains a
    slanted view. Every pose looks straight at the focus point.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    focus = np.array(scene.focus)
    normal = _normalize(scene.focus_normal)
    side = _normalize(np.cross((0.0, 1.0, 0.0), normal))
    lo, hi = np.array(scene.bounds[0]), np.array(scene.bounds[1])
    poses = []
    for i in range(count):
        if i == 0:
            az, el, dist = 0.0, 0.0, scene.standoff_m
        else:
            sign = 1.0 if i % 2 else -1.0
            az = sign * math.radians(rng.uniform(20.0, 40.0))
            el = math.radians(rng.uniform(-4.0, 10.0))
            dist = scene.standoff_m * rng.uniform(0.85, 1.1)
        offset = dist * (math.cos(el) * (math.cos(az) * normal + math.sin(az) * side)
                         + math.sin(el) * np.array([0.0, 1.0, 0.0]))
        eye = np.clip(focus + offset, lo, hi)
        poses.append(look_at(eye, focus))
    return poses


# ---------------------------------------------------------------- serialization


def scene_to_dict(scene: SceneGraph) -> dict[str, Any]:
    d = asdict(scene)
    d["factor"] = scene.factor.value if scene.factor else None
    return _listify(d)


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def scene_from_dict(d: dict[str, Any]) -> SceneGraph:
    prims = []
    for p in d["primitives"]:
        m = dict(p["material"])
        t = dict(m.pop("texture"))
        tex = Texture(t["kind"], _vec3(t["color_a"]), _vec3(t["color_b"]), float(t["scale"]),
                      int(t["seed"]), int(t["octaves"]))
        mat = Material(texture=tex, **{k: (int(v) if k == "material_id" else float(v))
                                       for k, v in m.items()})
        prims.append(Primitive(p["shape"], _mat3(p["rotation"]), _vec3(p["translation"]),
                               tuple(float(e) for e in p["extent"]), mat, int(p["instance_id"])))
    lights = tuple(Light(l["kind"], _vec3(l["vector"]), float(l["intensity"]), _vec3(l["color"]))
                   for l in d["lights"])
    return SceneGraph(
        primitives=tuple(prims), lights=lights, ambient=float(d["ambient"]),
        background_radiance=_vec3(d["background_radiance"]),
        factor=HazardFactor(d["factor"]) if d.get("factor") else None,
        seed=int(d.get("seed", 0)), level=float(d.get("level", 0.0)),
        controlled_material_id=d.get("controlled_material_id"),
        base_texture_scale=d.get("base_texture_scale"),
        hazard_instance_ids=tuple(int(i) for i in d.get("hazard_instance_ids", ())),
        focus=_vec3(d.get("focus", (0, 0, 0))),
        focus_normal=_vec3(d.get("focus_normal", (0, 0, 1))),
        standoff_m=float(d.get("standoff_m", 3.5)),
        bounds=tuple(_vec3(b) for b in d.get("bounds", ((-1e3,) * 3, (1e3,) * 3))),
    )


def scene_from_json(text: str) -> SceneGraph:
    return scene_from_dict(json.loads(text))
