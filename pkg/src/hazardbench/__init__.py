"""Synthetic stereo hazard workbench.

Procedural scenes with one controllable stereo hazard each (specularity,
texturelessness, transparency, disparity jumps), a ray tracer producing
exact ground truth, automatic hazard masks, reference matchers and a sweep
harness that measures how error grows with the hazard level.
"""

__version__ = "0.1.0"

from .errors import HazardBenchError  # noqa: F401
from .scene import HazardFactor, StereoRig, build_case, set_hazard_level, viewpoint_ring  # noqa: F401
