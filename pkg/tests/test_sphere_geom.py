import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kleinian.moebius import INF, Moebius, apply, compose, random_moebius, random_unitary
from kleinian.sphere_geom import (
    GeometryError, GeneralizedCircle, chordal_diameter, chordal_distance, containment_margin,
    disjoint, disk_distance, disk_from_center, disk_from_form, exterior_of, from_sphere,
    half_plane, image_caps, image_disk, invariant_arc, invariant_disk_check, invariant_strip,
    same_disk, tangency, to_sphere,
)

DIL4 = Moebius(2, 0, 0, 0.5)
INV = Moebius(0, 1j, 1j, 0)


def fit_circle(pts):
    # algebraic least-squares fit x^2 + y^2 + Dx + Ey + F = 0
    x, y = np.real(pts), np.imag(pts)
    M = np.stack([x, y, np.ones_like(x)], axis=1)
    D, E, F = np.linalg.lstsq(M, -(x ** 2 + y ** 2), rcond=None)[0]
    c = complex(-D / 2, -E / 2)
    return c, math.sqrt(abs(c) ** 2 - F)


def brute_diameter(d, n=720):
    pts = d.boundary_points(n)
    xyz = np.array([to_sphere(p) for p in pts])
    return float(np.max(np.linalg.norm(xyz[:, None] - xyz[None], axis=-1)))


def test_sphere_roundtrip():
    assert np.allclose(to_sphere(INF), [0, 0, 1])
    assert np.allclose(to_sphere(0), [0, 0, -1])
    for z in (1 + 2j, -0.3j, 1e-8):
        assert abs(from_sphere(to_sphere(z)) - z) < 1e-12
    assert from_sphere(np.array([0, 0, 1.0])) is INF


def test_circle_normalization_and_degenerate():
    c = GeneralizedCircle(2.0, 0, -8.0)
    assert abs(abs(c.B) ** 2 - c.A * c.D - 1) < 1e-12
    assert c.center_radius() == (0, pytest.approx(2))
    with pytest.raises(GeometryError):
        GeneralizedCircle(1.0, 0, 0.0)
    with pytest.raises(GeometryError):
        disk_from_center(0, 0.0)


def test_membership_and_complement():
    d = disk_from_center(1, 0.5)
    assert d.contains(1.2) and not d.contains(2)
    e = d.complement()
    assert e.contains(2) and e.contains(INF) and not e.contains(1.2)
    assert exterior_of(1, 0.5).contains(INF)
    h = half_plane(0, 1)
    assert h.contains(1) and not h.contains(-1)


def test_chordal_distance_examples():
    assert chordal_distance(0, INF) == pytest.approx(2)
    assert chordal_distance(0, 0) == 0
    assert chordal_distance(1, 1j) == pytest.approx(math.sqrt(2))


def test_chordal_diameter_examples():
    unit = disk_from_center(0, 1)
    assert chordal_diameter(unit) == pytest.approx(2)
    assert brute_diameter(unit) == pytest.approx(2, abs=1e-6)
    assert chordal_diameter(half_plane(0, 1)) == pytest.approx(2)
    prev = 2.0
    for eps in (0.5, 0.1, 0.01, 1e-4):
        cur = chordal_diameter(disk_from_center(0, eps))
        assert cur < prev
        prev = cur
    assert prev < 1e-3


@pytest.mark.parametrize("c,r", [(3, 1), (0.5 + 0.5j, 0.2), (-2j, 1.5)])
def test_chordal_diameter_matches_brute_force(c, r):
    d = disk_from_center(c, r)
    assert chordal_diameter(d) == pytest.approx(brute_diameter(d), abs=1e-5)


def test_chordal_diameter_beyond_hemisphere():
    # a cap larger than a hemisphere holds antipodal pairs
    d = disk_from_center(-2j, 4)
    assert d.contains(0) and d.contains(-4j)
    assert chordal_diameter(d) == 2.0


def test_image_disk_examples():
    unit = disk_from_center(0, 1)
    assert same_disk(image_disk(Moebius(1, 0, 0, 1), unit), unit)
    assert same_disk(image_disk(Moebius(math.sqrt(2), 0, 0, 1 / math.sqrt(2)), unit), disk_from_center(0, 2))
    d = disk_from_center(3, 1)
    img = image_disk(INV, d)
    assert img.contains(1 / 3) and not img.contains(0)
    # oracle: fit a circle through mapped boundary samples
    pts = [apply(INV, 3 + cmath.exp(2j * math.pi * k / 20)) for k in range(20)]
    c, r = fit_circle(np.array(pts))
    c2, r2 = img.center_radius()
    assert abs(c - c2) < 1e-10 and abs(r - r2) < 1e-10
    assert c == pytest.approx(3 / 8) and r == pytest.approx(1 / 8)


def test_tangency_examples():
    d1, d2 = disk_from_center(1.5, 0.5), disk_from_center(2.5, 0.5)
    p = tangency(d1, d2)
    assert p is not None and abs(p - 2) < 1e-9
    far = (disk_from_center(0, 1), disk_from_center(5, 1))
    over = (disk_from_center(0, 1), disk_from_center(1, 1))
    assert tangency(*far) is None and tangency(*over) is None
    assert [disjoint(*pair, margin=1e-9) for pair in ((d1, d2), far, over)] == [False, True, False]


def test_tangency_at_infinity():
    # Im z > 1 and Im z < -1: closures meet only at infinity
    assert tangency(half_plane(1j, 1j), half_plane(-1j, -1j)) is INF
    # complementary half-planes share a whole circle
    assert tangency(half_plane(0, 1j), half_plane(0, -1j)) is None


def test_disk_distance_and_containment():
    a, b = disk_from_center(0, 1), disk_from_center(5, 1)
    assert disk_distance(a, b) > 0 > disk_distance(a, disk_from_center(1, 1))
    big = disk_from_center(0, 3)
    assert containment_margin(big, a) > 0 > containment_margin(big, b)


def test_invariant_disk_examples():
    assert invariant_disk_check(DIL4, half_plane(0, 1))
    assert not invariant_disk_check(DIL4, disk_from_center(0, 1))
    assert invariant_disk_check(Moebius(1, 1, 0, 1), half_plane(0, 1j))


def test_image_caps_vectorized(rng):
    d = disk_from_center(0.3 - 1j, 0.7)
    ms = [random_moebius(rng, 3) for _ in range(20)]
    centers, angles = image_caps(np.array([m.matrix for m in ms]), d)
    for k, m in enumerate(ms):
        img = image_disk(m, d)
        assert np.allclose(centers[k], img.cap_center, atol=1e-9)
        assert angles[k] == pytest.approx(img.cap_angle, abs=1e-9)


disks = st.builds(
    disk_from_center,
    st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
    st.floats(0.05, 3),
)
seeds = st.integers(0, 2 ** 32 - 1)


@given(disks, seeds, seeds)
def test_image_composition(d, s1, s2):
    m1 = random_moebius(np.random.default_rng(s1), 3)
    m2 = random_moebius(np.random.default_rng(s2), 3)
    lhs = image_disk(m1, image_disk(m2, d))
    rhs = image_disk(compose(m1, m2), d)
    assert same_disk(lhs, rhs, 1e-8 * max(1, np.abs(m1.matrix).max() ** 2 * np.abs(m2.matrix).max() ** 2))


def test_diameter_unitary_invariant(rng):
    for _ in range(100):
        u = random_unitary(rng)
        d = disk_from_center(complex(*rng.normal(size=2)), rng.uniform(0.05, 2))
        assert chordal_diameter(image_disk(u, d)) == pytest.approx(chordal_diameter(d), rel=1e-9)


@given(disks, disks)
def test_tangency_symmetric(d1, d2):
    p, q = tangency(d1, d2), tangency(d2, d1)
    assert (p is None) == (q is None)
    if p is not None:
        assert chordal_distance(p, q) < 1e-8


@given(st.floats(0.1, 3), st.floats(-2, 2))
def test_constructed_tangent_pairs(r, theta):
    # two disks touching at a chosen point along direction theta
    u = cmath.exp(1j * theta)
    d1, d2 = disk_from_center(-r * u, r), disk_from_center(0.5 * u, 0.5)
    p = tangency(d1, d2, 1e-9)
    assert p is not None and abs(p) < 1e-7


def test_invariant_arc_examples():
    arc = invariant_arc(DIL4, 1, 16)
    assert all(abs(s.imag) < 1e-12 and 1 - 1e-12 <= s.real <= 4 + 1e-12 for s in arc.samples)
    assert arc.samples[-1] == pytest.approx(4)
    assert arc.endpoints[0] is INF and abs(arc.endpoints[1]) == 0
    arc = invariant_arc(DIL4, 1j, 16)
    assert all(abs(s.real) < 1e-12 for s in arc.samples) and arc.samples[-1] == pytest.approx(4j)
    with pytest.raises(GeometryError):
        invariant_arc(DIL4, 0)


@given(st.floats(0.05, 3), st.floats(-3, 3), st.complex_numbers(min_magnitude=0.1, max_magnitude=5,
                                                                    allow_nan=False, allow_infinity=False))
def test_invariant_arc_invariance(ell, rot, seed):
    g = Moebius(cmath.exp((ell + 1j * rot) / 2), 0, 0, cmath.exp(-(ell + 1j * rot) / 2))
    c = random_moebius(np.random.default_rng(7), 2)
    g = compose(c, compose(g, c.inverse()))
    try:
        arc = invariant_arc(g, apply(c, seed), 8)
    except GeometryError:
        return
    for k in range(8):
        assert chordal_distance(apply(g, arc.sample(k)), arc.sample(k + 8)) < 1e-8


def test_spiral_arc():
    g = Moebius(2 * cmath.exp(1j * math.pi / 12), 0, 0, 0.5 * cmath.exp(-1j * math.pi / 12))
    arc = invariant_arc(g, 1, 12)
    assert abs(arc.samples[6].imag) > 0.1
    for k in range(12):
        assert abs(apply(g, arc.sample(k)) - arc.sample(k + 12)) < 1e-9


def test_invariant_strip_examples():
    core = invariant_arc(DIL4, 1)
    strip = invariant_strip(DIL4, core, 0.2, within=half_plane(0, 1))
    assert strip.contains(5 * cmath.exp(0.1j)) and not strip.contains(5 * cmath.exp(0.3j))
    assert abs(cmath.phase(strip.rho1.sample(3)) - 0.2) < 1e-12
    with pytest.raises(GeometryError):
        invariant_strip(DIL4, core, 2.0, within=half_plane(0, 1))
    core = invariant_arc(DIL4, 1j)
    strip = invariant_strip(DIL4, core, 0.1, within=half_plane(0, 1j))
    assert strip.contains(3j) and strip.contains(0.2 * cmath.exp(1j * (math.pi / 2 + 0.05)))


def test_disk_from_form_sides():
    d = disk_from_form(1, 0, -1, 1)
    assert d.contains(0)
    assert disk_from_form(1, 0, -1, -1).contains(INF)
