import numpy as np
import pytest
from conftest import schottky_triples

from kleinian.combination import (
    AmalgamData, CombinationError, HNNData, amalgamate, hnn_extend, orbit_gaps,
    parabolic_tangent_disks, precisely_invariant,
)
from kleinian.group_engine import DomainSpec, MarkedGroup, freeness_oracle, validate_pairing
from kleinian.moebius import INF, Moebius, apply, compose, maps_equal, random_moebius
from kleinian.sphere_geom import (
    chordal_diameter, chordal_distance, disk_from_center, exterior_of, half_plane, image_disk,
    invariant_disk_check, same_disk, tangency,
)

DIL4 = Moebius(2, 0, 0, 0.5)
LEFT, RIGHT = half_plane(0, -1), half_plane(0, 1)


def pair(c1, c2, r):
    return Moebius(c2, r * r - c1 * c2, 1, -c1)


def factor(x, name, gamma=DIL4, conj=None):
    """<gamma, f> with gamma's caps |z| < 1, |z| > 4 and f pairing two small disks at x +- 0.9i."""
    c1, c2, r = x - 0.9j, x + 0.9j, 0.35
    disks = [disk_from_center(0, 1), exterior_of(0, 4), disk_from_center(c1, r), disk_from_center(c2, r)]
    maps = [gamma, pair(c1, c2, r)]
    if conj is not None:
        maps = [compose(conj, compose(m, conj.inverse())) for m in maps]
        disks = [image_disk(conj, d) for d in disks]
    return MarkedGroup(("g", name), tuple(maps)), DomainSpec(tuple(disks), ((0, 1), (2, 3)))


def amalgam_data(conj=None, b1=LEFT, b2=RIGHT):
    g1, d1 = factor(2.2, "f", conj=conj)
    g2, d2 = factor(-2.2, "k", conj=conj)
    if conj is not None:
        b1, b2 = image_disk(conj, b1), image_disk(conj, b2)
    return AmalgamData(g1, d1, (1,), g2, d2, (1,), b1, b2)


def test_factors_are_valid():
    for x in (2.2, -2.2):
        g, d = factor(x, "f")
        validate_pairing(g, d)
        assert freeness_oracle(g, d, 4).ok


def test_precisely_invariant_cyclic():
    g = MarkedGroup(("g",), (DIL4,))
    rep = precisely_invariant(RIGHT, (1,), g, 4)
    assert rep.ok and rep.invariance > 0 and rep.words == 0 and rep.margin == 2.0


def test_precisely_invariant_reports_violation(genus2):
    g, d = genus2
    rep = precisely_invariant(d.disks[0], (1,), g, 3)
    assert not rep.ok and rep.invariance < 0


def test_precisely_invariant_empty_h(genus2):
    g, _ = genus2
    with pytest.raises(CombinationError):
        precisely_invariant(disk_from_center(10, 1), (), g, 3)


def test_amalgamate_accepts():
    cert = amalgamate(amalgam_data(), 4)
    assert cert.verdict == "accept"
    assert [c.ok for c in cert.conditions] == [True] * 6
    orbit = [c.margin for c in cert.conditions if c.name.startswith("D")][:2]
    assert orbit == pytest.approx([0.0859, 0.0859], abs=1e-3)
    assert cert.group.names == ("g", "f", "k")
    assert len(cert.domain.disks) == 6
    validate_pairing(cert.group, cert.domain)
    assert freeness_oracle(cert.group, cert.domain, 4).ok


def test_amalgamate_depth_monotone():
    data = amalgam_data()
    assert amalgamate(data, 4).accepted
    for depth in range(4):
        assert amalgamate(data, depth).accepted


def test_amalgamate_swapped_sides_rejected():
    cert = amalgamate(amalgam_data(b1=RIGHT, b2=LEFT), 3)
    assert cert.verdict == "reject" and cert.failed is not None


def test_amalgam_data_invariants():
    with pytest.raises(CombinationError):
        amalgam_data(b1=RIGHT, b2=RIGHT)
    g1, d1 = factor(2.2, "f")
    g2, d2 = factor(-2.2, "k", gamma=Moebius(3, 0, 0, 1 / 3))
    with pytest.raises(CombinationError):
        AmalgamData(g1, d1, (1,), g2, d2, (1,), LEFT, RIGHT)


@pytest.mark.parametrize("seed", range(10))
def test_amalgamate_conjugation_covariant(seed):
    rng = np.random.default_rng(seed)
    # small conjugators keep the chordal margins comparable
    c = Moebius(1 + 0.2 * complex(*rng.normal(size=2)), 0.3 * complex(*rng.normal(size=2)),
                0.05 * complex(*rng.normal(size=2)), 1)
    base = amalgamate(amalgam_data(), 3)
    cert = amalgamate(amalgam_data(conj=c), 3)
    assert cert.verdict == base.verdict == "accept"
    for m0, m in zip(base.group.maps, cert.group.maps):
        assert maps_equal(compose(c, compose(m0, c.inverse())), m, 1e-8)


def hnn_setup(b1, b2, a=None):
    g, d = schottky_triples()
    if a is None:
        c1, r1 = b1.center_radius()
        c2, r2 = b2.center_radius()
        a = Moebius(c2, r1 * r2 - c1 * c2, 1, -c1)
    return HNNData(g, d, (), (), a, b1, b2)


def test_hnn_accepts_free_handle():
    cert = hnn_extend(hnn_setup(disk_from_center(6 + 6j, 1), disk_from_center(-6 - 6j, 1)), 4)
    assert cert.verdict == "accept", cert.failed
    assert cert.group.names == ("a", "b", "A")
    validate_pairing(cert.group, cert.domain)
    assert freeness_oracle(cert.group, cert.domain, 3).ok


def test_hnn_bullet2_mismatch():
    b1, b2 = disk_from_center(6 + 6j, 1), disk_from_center(-6 - 6j, 1)
    a = pair(6 + 6j, -6 - 6j, 1.2)
    cert = hnn_extend(hnn_setup(b1, b2, a), 3)
    assert cert.failed.name == "A(b1) is the complement of b2"


def test_hnn_bullet3_witness():
    # b1 sits inside the deleted disk around 3, so a^-1 carries it onto the region near b2
    b1 = disk_from_center(3, 0.2)
    b2 = disk_from_center(-3, 0.3)
    cert = hnn_extend(hnn_setup(b1, b2), 3)
    assert cert.verdict == "reject"
    bad = [c for c in cert.conditions if not c.ok]
    assert any(c.name.startswith("g(b1) disjoint") and c.witness for c in bad)


def test_hnn_invariants(genus2):
    g, d = genus2
    with pytest.raises(CombinationError):
        HNNData(g, d, (1,), (), DIL4, LEFT, RIGHT)
    with pytest.raises(CombinationError):
        HNNData(g, d, (1,), (2,), Moebius(1, 0, 0, 1), LEFT, RIGHT)


def test_orbit_gaps_identity(genus2):
    g, d = genus2
    gap, w, used, _ = orbit_gaps(g, d.disks[0], d.disks[1], 0, include_identity=True)
    # both disks sit in the northern hemisphere: the nearest points are -4 and 4, via infinity
    assert used == 1 and w == () and gap == pytest.approx(chordal_distance(-4, 4), abs=1e-12)


@pytest.mark.parametrize("p,fix", [(Moebius(1, 1, 0, 1), INF), (Moebius(1, 0, 1, 1), 0)])
def test_parabolic_tangent_disks(p, fix):
    d1, d2 = parabolic_tangent_disks(p, 0.5)
    for d in (d1, d2):
        assert invariant_disk_check(p, d)
        assert chordal_diameter(d) <= 0.5
    t = tangency(d1, d2)
    assert t is not None and chordal_distance(t, fix) < 1e-9


def test_parabolic_translation_half_planes():
    d1, d2 = parabolic_tangent_disks(Moebius(1, 1, 0, 1), 2.0)
    assert same_disk(d1, half_plane(1j, 1j)) and same_disk(d2, half_plane(-1j, -1j))


def test_parabolic_conjugate_matches():
    # conjugating the translation answer by z -> 1/z gives disks tangent at 0
    p = Moebius(1, 0, 1, 1)
    d1, d2 = parabolic_tangent_disks(p, 0.5)
    for d in (d1, d2):
        z = d.interior_point()
        assert d.contains(apply(p, z))


def test_parabolic_rejects_loxodromic():
    with pytest.raises(CombinationError):
        parabolic_tangent_disks(DIL4, 0.5)
    rng = np.random.default_rng(0)
    m = random_moebius(rng)
    with pytest.raises(CombinationError):
        parabolic_tangent_disks(m, 0.5)
