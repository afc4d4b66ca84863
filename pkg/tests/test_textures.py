import numpy as np
import pytest

from hazardbench.textures import Texture, checker, fbm, noise_image, value_noise


def _pts(n=500, seed=0, span=10.0):
    return np.random.default_rng(seed).uniform(-span, span, size=(n, 3))


def test_value_noise_range_and_determinism():
    p = _pts()
    a = value_noise(p, seed=3)
    assert a.min() >= 0 and a.max() < 1
    np.testing.assert_array_equal(a, value_noise(p, seed=3))
    assert not np.array_equal(a, value_noise(p, seed=4))


def test_value_noise_interpolates_lattice():
    # at integer points the noise equals the hashed lattice value, and it is continuous
    p = np.array([[2.0, -1.0, 5.0]])
    eps = np.array([[1e-9, 0.0, 0.0]])
    assert abs(value_noise(p + eps)[0] - value_noise(p)[0]) < 1e-6


def test_fbm_normalized():
    v = fbm(_pts(), scale=3.0, seed=1, octaves=4)
    assert v.min() >= 0 and v.max() < 1


def test_checker_alternates():
    # neighbours one half-period apart along x land on opposite colours
    p = np.array([[0.1, 0.2, 0.3]])
    assert checker(p, 2.0)[0] != checker(p + [0.5, 0, 0], 2.0)[0]
    assert checker(p, 2.0)[0] == checker(p + [1.0, 0, 0], 2.0)[0]


def test_solid_texture_is_constant():
    t = Texture("solid", color_a=(0.2, 0.4, 0.6))
    np.testing.assert_allclose(t.albedo(_pts(10)), np.tile([0.2, 0.4, 0.6], (10, 1)))


def test_low_scale_texture_is_nearly_flat():
    # shrinking the frequency stretches the pattern: local variation vanishes
    p = _pts(200, span=1.0)
    hi = Texture("value-noise", scale=12.0).mix_factor(p)
    lo = Texture("value-noise", scale=0.01).mix_factor(p)
    assert np.ptp(lo) < 0.05 < np.ptp(hi)


@pytest.mark.parametrize("kw", [{"kind": "marble"}, {"scale": 0.0}, {"octaves": 0}])
def test_texture_validation(kw):
    with pytest.raises(ValueError):
        Texture(**kw)


def test_noise_image_normalized():
    img = noise_image(32, 48, cell_px=4, seed=2)
    assert img.shape == (32, 48)
    assert img.min() == 0.0 and img.max() == 1.0
