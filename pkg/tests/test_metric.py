import math

import numpy as np
import pytest

from horodyn.geometry import (
    GeometryError,
    polydisk,
    sample_interior,
    unit_ball,
    unit_disk,
)
from horodyn.metric import (
    bounds,
    convexity_combination_check,
    kobayashi,
    kobayashi_ball_contains,
    mobius_translate,
    poincare,
    segment_parameter_check,
)

D1 = unit_disk()
D2 = polydisk(2)
B2 = unit_ball(2)

HALF_LOG3 = 0.5 * math.log(3.0)


def test_poincare_frozen_values():
    assert poincare(0.0, 0.5) == pytest.approx(HALF_LOG3, abs=1e-14)
    assert poincare(0.3 + 0.4j, 0.3 + 0.4j) == 0.0
    # first order ~ |dz| / (1 - |z|^2) = (4/3)*1e-12 at z = 0.5
    tiny = poincare(0.5, 0.5 + 1e-12)
    assert tiny > 0.0
    assert tiny == pytest.approx((4.0 / 3.0) * 1e-12, rel=1e-2)


def test_poincare_symmetry_and_errors():
    rng = np.random.Generator(np.random.Philox(3))
    z = 0.99 * np.sqrt(rng.uniform(size=500)) * np.exp(2j * np.pi * rng.uniform(size=500))
    w = 0.99 * np.sqrt(rng.uniform(size=500)) * np.exp(2j * np.pi * rng.uniform(size=500))
    assert np.max(np.abs(poincare(z, w) - poincare(w, z))) < 1e-12
    assert np.all(poincare(z, w) >= 0.0)
    with pytest.raises(GeometryError):
        poincare(1.0, 0.0)
    with pytest.raises(GeometryError):
        poincare(0.0, 1.0 + 1e-16)


def test_mobius_translate():
    assert mobius_translate(0.5, 0.8)[0] == pytest.approx(0.5)
    z = np.array([0.3 + 0.2j, -0.5j])
    assert np.allclose(mobius_translate(z, z), 0.0)
    w = np.array([0.1, 0.2])
    assert np.allclose(mobius_translate(np.zeros(2), w), w)
    # boundary modulus is preserved by the extension
    xi = np.exp(1j * np.linspace(0, 2 * np.pi, 7))
    img = mobius_translate(np.full(7, 0.4 - 0.1j), xi, allow_boundary=True)
    assert np.allclose(np.abs(img), 1.0)
    with pytest.raises(GeometryError):
        mobius_translate(1.0, 0.5)
    with pytest.raises(GeometryError):
        mobius_translate(0.5, 1.0)


def test_kobayashi_closed_forms():
    assert kobayashi(D2, [0, 0], [0.5, 0]) == pytest.approx(HALF_LOG3, abs=1e-14)
    # product formula is attained at the worst coordinate
    z = np.array([0.1 + 0.2j, -0.3])
    w = np.array([0.4, 0.5j])
    per = [poincare(z[j], w[j]) for j in range(2)]
    assert kobayashi(D2, z, w) == pytest.approx(max(per), abs=1e-14)
    # ball reduces to the disk on a diameter
    assert kobayashi(B2, [0, 0], [0.5, 0]) == pytest.approx(math.atanh(0.5), abs=1e-14)
    assert kobayashi(B2, [0, 0], [0.3, 0.4]) == pytest.approx(math.atanh(0.5), abs=1e-14)
    assert kobayashi(D1, 0.0, 0.5) == pytest.approx(HALF_LOG3, abs=1e-14)


def test_kobayashi_near_boundary_finite():
    for d in (D2, B2):
        val = kobayashi(d, [1 - 1e-12, 0], [0.5, 0])
        assert np.isfinite(val) and val > 10.0
    with pytest.raises(GeometryError):
        kobayashi(D2, [1.0, 0.0], [0.0, 0.0])
    with pytest.raises(GeometryError):
        kobayashi(B2, [0.0, 0.0], [0.8, 0.8])


@pytest.mark.parametrize("dom", [D2, B2])
def test_kobayashi_axioms_sampled(dom):
    rng = np.random.Generator(np.random.Philox(17))
    z = sample_interior(dom, rng, 800)
    w = sample_interior(dom, rng, 800)
    v = sample_interior(dom, rng, 800)
    kzw = kobayashi(dom, z, w)
    assert np.max(np.abs(kzw - kobayashi(dom, w, z))) < 1e-12
    assert np.max(kzw - (kobayashi(dom, z, v) + kobayashi(dom, v, w))) < 1e-9
    assert np.all(kzw >= 0.0)
    assert np.allclose(kobayashi(dom, z, z), 0.0)


def test_holomorphic_contraction_sampled():
    # coordinate scaling by 1/2 is a holomorphic self-map of the bidisk
    rng = np.random.Generator(np.random.Philox(23))
    z = sample_interior(D2, rng, 500)
    w = sample_interior(D2, rng, 500)
    assert np.all(kobayashi(D2, 0.5 * z, 0.5 * w) <= kobayashi(D2, z, w) + 1e-12)


def test_bounds_examples():
    bp = bounds(D2, [0, 0], [0.5, 0])
    assert bp.lower == pytest.approx(HALF_LOG3, abs=1e-6)
    assert bp.upper == pytest.approx(HALF_LOG3, abs=1e-6)
    bp2 = bounds(B2, [0, 0], [0.3, 0.4])
    target = math.atanh(0.5)
    assert bp2.lower - 1e-6 <= target <= bp2.upper + 1e-6
    assert bounds(D2, [0.2, 0.1], [0.2, 0.1]) == bounds(D2, [0.2, 0.1], [0.2, 0.1])
    assert bounds(D2, [0.2, 0.1], [0.2, 0.1]).upper == 0.0
    with pytest.raises(GeometryError):
        bounds(D2, [0, 0], [0.5, 0], budget=0)
    with pytest.raises(GeometryError):
        bounds(D2, [1.0, 0], [0.5, 0])


@pytest.mark.parametrize("dom", [D2, B2])
def test_bounds_sandwich_sampled(dom):
    rng = np.random.Generator(np.random.Philox(29))
    z = sample_interior(dom, rng, 120)
    w = sample_interior(dom, rng, 120)
    for zi, wi in zip(z, w):
        k = kobayashi(dom, zi, wi)
        bp = bounds(dom, zi, wi)
        assert bp.lower <= k + 1e-6
        assert k <= bp.upper + 1e-6
        assert bp.lower <= bp.upper + 1e-6


def test_kobayashi_ball_contains():
    r = kobayashi(D2, [0, 0], [0.5, 0])
    assert kobayashi_ball_contains(D2, [0, 0], r + 1e-9, [0.5, 0])
    assert not kobayashi_ball_contains(D2, [0, 0], r, [0.5, 0])
    with pytest.raises(GeometryError):
        kobayashi_ball_contains(D2, [0, 0], -1.0, [0.5, 0])


@pytest.mark.parametrize("dom", [D2, B2])
def test_convexity_estimates(dom):
    rng = np.random.Generator(np.random.Philox(31))
    n = 400
    z1 = sample_interior(dom, rng, n)
    z2 = sample_interior(dom, rng, n)
    w1 = sample_interior(dom, rng, n)
    w2 = sample_interior(dom, rng, n)
    s = rng.uniform(size=n)
    t = rng.uniform(size=n)
    rep = convexity_combination_check(dom, z1, z2, w1, w2, s)
    assert rep.ok and rep.total == n
    rep2 = segment_parameter_check(dom, z1, z2, s, t)
    assert rep2.ok and rep2.failures == 0


def test_bounded_sequences_force_boundary_segments():
    # pinned equal unimodular coordinate keeps the distance bounded
    nus = np.arange(2, 1000, 7)
    z = np.stack([1 - 1 / nus, np.full(nus.size, 0.2)], axis=1).astype(complex)
    w = np.stack([1 - 1 / nus, np.full(nus.size, 0.8)], axis=1).astype(complex)
    ks = kobayashi(D2, z, w)
    assert np.max(ks) <= poincare(0.2, 0.8) + 1e-12
    # distinct boundary faces make the distance blow up
    w2 = np.stack([np.full(nus.size, 0.2), 1 - 1 / nus], axis=1).astype(complex)
    ks2 = kobayashi(D2, z, w2)
    assert ks2[-1] > 3.0
    assert np.all(np.diff(ks2) > -1e-12)
