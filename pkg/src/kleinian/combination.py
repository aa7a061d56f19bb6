"""Klein-Maskit combination along cyclic subgroups, checked at finite word depth.

Every hypothesis quantifying over a whole group is tested on the reduced words of
length <= depth; certificates record that depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .group_engine import (
    DomainSpec, MarkedGroup, Word, evaluate, fibonacci_sphere, format_word,
    power_codes, power_mask, reduce_word, word_levels,
)
from .moebius import INF, MapClass, Moebius, classify, fixed_points, maps_equal
from .sphere_geom import (
    DEFAULT_MARGIN, Disk, GeneralizedCircle, caps_gap, chordal_diameter, disk_deviation,
    from_sphere, half_plane, image_caps, image_disk, signed_chord,
)

FORM_TOL = 1e-8


class CombinationError(ValueError):
    pass


@dataclass
class Condition:
    name: str
    margin: float
    depth: int
    witness: str = ""

    @property
    def ok(self) -> bool:
        return self.margin > 0


@dataclass
class CombinationCertificate:
    conditions: list = field(default_factory=list)
    group: Optional[MarkedGroup] = None
    domain: Optional[DomainSpec] = None
    truncated: bool = False

    @property
    def accepted(self) -> bool:
        return bool(self.conditions) and all(c.ok for c in self.conditions) and not self.truncated

    @property
    def verdict(self) -> str:
        if any(not c.ok for c in self.conditions):
            return "reject"
        return "truncated" if self.truncated else "accept"

    @property
    def failed(self) -> Optional[Condition]:
        return next((c for c in self.conditions if not c.ok), None)


# -- precise invariance -------------------------------------------------------------


@dataclass
class InvarianceReport:
    ok: bool
    invariance: float     # slack of h(b) inside b
    margin: float         # smallest chordal gap between b and w(b), w outside <h>
    depth: int
    words: int
    violation: Optional[Word] = None
    truncated: bool = False


def orbit_gaps(g: MarkedGroup, src: Disk, dst: Disk, depth: int, skip: Optional[Word] = None,
               include_identity: bool = False):
    """Smallest chordal gap between w(src) and dst over words of length <= depth.

    Words in the cyclic group generated by ``skip`` are ignored.  Returns
    (gap, witness word, words checked, truncated).
    """
    levels, truncated = word_levels(g, depth)
    powers = power_codes(skip, depth) if skip else {}
    n2, t2 = dst.cap_center[None], dst.cap_angle
    best, witness, used = math.inf, None, 0
    for lev in levels if include_identity else levels[1:]:
        keep = ~power_mask(lev, powers)
        if not keep.any():
            continue
        n1, t1 = image_caps(lev.mats[keep], src)
        gap = caps_gap(n1, t1, n2, t2)
        used += len(gap)
        i = int(np.argmin(gap))
        if gap[i] < best:
            best = float(gap[i])
            witness = lev.word(int(np.flatnonzero(keep)[i]))
    return (float(signed_chord(best)) if used else 2.0), witness, used, truncated


def precisely_invariant(b: Disk, h: Word, g: MarkedGroup, depth: int,
                        margin: float = DEFAULT_MARGIN) -> InvarianceReport:
    """h(b) inside b, and w(b) disjoint from b for words w of length <= depth not in <h>."""
    h = reduce_word(h)
    if not h:
        raise CombinationError("h is the empty word; precise invariance needs a nontrivial subgroup")
    hb = image_disk(evaluate(g, h), b)
    slack = b.cap_angle - float(np.arctan2(np.linalg.norm(np.cross(b.cap_center, hb.cap_center)),
                                           b.cap_center @ hb.cap_center)) - hb.cap_angle
    inv = float(signed_chord(slack)) + FORM_TOL
    gap, witness, used, truncated = orbit_gaps(g, b, b, depth, skip=h)
    ok = inv > 0 and gap >= margin
    return InvarianceReport(ok, inv, gap, depth, used, None if gap >= margin else witness, truncated)


# -- amalgamation ---------------------------------------------------------------------


@dataclass
class AmalgamData:
    g1: MarkedGroup
    d1: DomainSpec
    h1: Word
    g2: MarkedGroup
    d2: DomainSpec
    h2: Word
    b1: Disk
    b2: Disk
    j: Optional[GeneralizedCircle] = None

    def __post_init__(self):
        self.h1 = reduce_word(self.h1)
        self.h2 = reduce_word(self.h2)
        if not self.h1 or not self.h2:
            raise CombinationError("the common subgroup must be generated by a nontrivial word")
        if not maps_equal(evaluate(self.g1, self.h1), evaluate(self.g2, self.h2), 1e-9):
            raise CombinationError("h1 and h2 evaluate to different maps")
        if disk_deviation(self.b1.complement(), self.b2) > FORM_TOL:
            raise CombinationError("b1 and b2 must be the two sides of one circle")
        if self.j is not None:
            c = Disk(self.j, 1)
            if min(disk_deviation(c, self.b1), disk_deviation(c.complement(), self.b1)) > FORM_TOL:
                raise CombinationError("j is not the common boundary of b1 and b2")

    @property
    def h(self) -> Moebius:
        return evaluate(self.g1, self.h1)


def _invariance_condition(name: str, m: Moebius, b: Disk, depth: int) -> Condition:
    dev = disk_deviation(image_disk(m, b), b)
    return Condition(name, FORM_TOL - dev, depth, f"deviation {dev:.3g}")


def orbit_containment(g: MarkedGroup, d: DomainSpec, b: Disk, depth: int,
                      skip: Optional[Word] = None) -> tuple[float, str, bool]:
    """Every w(b), |w| <= depth, lies in b or inside a single deleted disk of d.

    Powers of ``skip`` (the subgroup keeping b invariant) are left out.  Returns (margin, witness text, truncated); the margin is the worst over words of
    the best available containment slack (chordal).
    """
    levels, truncated = word_levels(g, depth)
    powers = power_codes(skip, depth) if skip else {}
    targets = [(b.cap_center, b.cap_angle)] + [(x.cap_center, x.cap_angle) for x in d.disks]
    worst, witness = math.inf, ""
    for lev in levels[1:]:
        keep = np.flatnonzero(~power_mask(lev, powers))
        if not len(keep):
            continue
        n, t = image_caps(lev.mats[keep], b)
        slack = np.full(len(t), -np.inf)
        for c, th in targets:
            ang = np.arctan2(np.linalg.norm(np.cross(n, c), axis=1), n @ c)
            slack = np.maximum(slack, th - ang - t)
        i = int(np.argmin(slack))
        if slack[i] < worst:
            worst = float(slack[i])
            witness = format_word(g, lev.word(int(keep[i])))
    return (float(signed_chord(worst)) if math.isfinite(worst) else 2.0), witness, truncated


def interior_witness(regions: list, samples: int = 20000) -> tuple[float, Optional[complex]]:
    """Best point of the intersection of the given regions (callables xyz -> margins)."""
    xyz = fibonacci_sphere(samples)
    m = np.min([f(xyz) for f in regions], axis=0)
    i = int(np.argmax(m))
    return float(m[i]), from_sphere(xyz[i])


def _dedupe_union(g1: MarkedGroup, d1: DomainSpec, g2: MarkedGroup, d2: DomainSpec,
                  drop: Optional[int]):
    """Merge generator lists and domains, dropping generator ``drop`` of g2 and any
    disks of d2 already present in d1."""
    names, maps = list(g1.names), list(g1.maps)
    disks = list(d1.disks)
    index = {}
    for k, x in enumerate(d2.disks):
        hit = next((i for i, y in enumerate(disks) if disk_deviation(x, y) <= FORM_TOL), None)
        if hit is None:
            disks.append(x)
            hit = len(disks) - 1
        index[k] = hit
    pairing = list(d1.pairing) if d1.pairing is not None and d2.pairing is not None else None
    for k, (n, m) in enumerate(zip(g2.names, g2.maps)):
        if k == drop:
            continue
        if n in names:
            n = n + "'"
        names.append(n)
        maps.append(m)
        if pairing is not None:
            i, j = d2.pairing[k]
            pairing.append((index[i], index[j]))
    return MarkedGroup(tuple(names), tuple(maps)), DomainSpec(tuple(disks), pairing)


def amalgamate(data: AmalgamData, depth: int = 4) -> CombinationCertificate:
    cert = CombinationCertificate()
    conds = cert.conditions
    h = data.h
    conds.append(_invariance_condition("b1 invariant under H in G1", h, data.b1, 0))
    conds.append(_invariance_condition("b2 invariant under H in G2", h, data.b2, 0))
    for name, g, d, b, hw in (("G1", data.g1, data.d1, data.b1, data.h1),
                              ("G2", data.g2, data.d2, data.b2, data.h2)):
        m, w, tr = orbit_containment(g, d, b, depth, hw)
        cert.truncated |= tr
        bj = "b1" if name == "G1" else "b2"
        conds.append(Condition(f"D{name[1]} meets {name}({bj}) only inside {bj}", m, depth, w))
    # D1' = D1 cap b1 (up to the orbit check above); nonempty interior witnesses
    for name, dj, bj, dk in (("D1' cap D2", data.d1, data.b1, data.d2),
                             ("D1 cap D2'", data.d2, data.b2, data.d1)):
        m, z = interior_witness([dj.margins, bj.margins, dk.margins])
        conds.append(Condition(f"{name} has nonempty interior", m, 0, f"point {z}"))
    if cert.accepted:
        drop = abs(data.h2[0]) - 1 if len(data.h2) == 1 else None
        cert.group, cert.domain = _dedupe_union(data.g1, data.d1, data.g2, data.d2, drop)
    return cert


# -- HNN extension --------------------------------------------------------------------


@dataclass
class HNNData:
    g0: MarkedGroup
    d0: DomainSpec
    h1: Word
    h2: Word
    a: Moebius
    b1: Disk
    b2: Disk
    name: str = "A"

    def __post_init__(self):
        self.h1 = reduce_word(self.h1)
        self.h2 = reduce_word(self.h2)
        if bool(self.h1) != bool(self.h2):
            raise CombinationError("h1 and h2 must both be trivial or both nontrivial")
        if self.h1:
            m1 = evaluate(self.g0, self.h1)
            m2 = evaluate(self.g0, self.h2)
            conj = self.a @ m1 @ self.a.inverse()
            if not (maps_equal(conj, m2, 1e-9) or maps_equal(conj, m2.inverse(), 1e-9)):
                raise CombinationError("A h1 A^-1 is not h2^(+-1)")


def hnn_extend(data: HNNData, depth: int = 4) -> CombinationCertificate:
    cert = CombinationCertificate()
    conds = cert.conditions
    g0 = data.g0
    for k, (b, h) in enumerate(((data.b1, data.h1), (data.b2, data.h2)), start=1):
        if h:
            rep = precisely_invariant(b, h, g0, depth)
            cert.truncated |= rep.truncated
            m = min(rep.invariance, rep.margin)
            w = format_word(g0, rep.violation) if rep.violation else ""
        else:
            m, w, _, tr = orbit_gaps(g0, b, b, depth)
            cert.truncated |= tr
            w = format_word(g0, w) if w is not None and m <= 0 else ""
        conds.append(Condition(f"b{k} precisely invariant under H{k} in G0", m, depth, w))
    dev = disk_deviation(image_disk(data.a, data.b1), data.b2.complement())
    conds.append(Condition("A(b1) is the complement of b2", FORM_TOL - dev, 0, f"deviation {dev:.3g}"))
    gap, w, _, tr = orbit_gaps(g0, data.b1, data.b2, depth, include_identity=True)
    cert.truncated |= tr
    conds.append(Condition("g(b1) disjoint from b2 for g in G0", gap, depth,
                           format_word(g0, w) if w is not None else ""))
    m, z = _hnn_witness(data, depth)
    conds.append(Condition("D0 outside G0(b1 u b2) has nonempty interior", m, depth, f"point {z}"))
    if cert.accepted:
        a = MarkedGroup((data.name,), (data.a,))
        cert.group = g0 + a
        pairing = None
        if data.d0.pairing is not None:
            n = len(data.d0.disks)
            pairing = data.d0.pairing + ((n, n + 1),)
        cert.domain = DomainSpec(data.d0.disks + (data.b1, data.b2), pairing)
    return cert


def _hnn_witness(data: HNNData, depth: int, samples: int = 4000) -> tuple[float, Optional[complex]]:
    xyz = fibonacci_sphere(samples)
    best = data.d0.margins(xyz)
    levels, _ = word_levels(data.g0, depth)
    for b in (data.b1, data.b2):
        for lev in levels:
            for lo in range(0, len(lev), 2000):
                n, t = image_caps(lev.mats[lo:lo + 2000], b)
                ang = np.arctan2(np.linalg.norm(np.cross(xyz[:, None], n[None]), axis=2), xyz @ n.T)
                outside = (ang - t[None]).min(axis=1)
                best = np.minimum(best, signed_chord(outside))
    i = int(np.argmax(best))
    return float(best[i]), from_sphere(xyz[i])


# -- parabolic tangent disks -------------------------------------------------------------


def parabolic_tangent_disks(p: Moebius, size: float) -> tuple[Disk, Disk]:
    """Two p-invariant disks tangent at the fixed point of p, each of chordal
    diameter <= size."""
    if classify(p) is not MapClass.PARABOLIC:
        raise CombinationError("a parabolic map is required")
    if not size > 0:
        raise CombinationError("size must be positive")
    (fix,) = fixed_points(p)
    # conjugate so that p fixes infinity: q = t^-1 p t is a translation z -> z + tau
    t = Moebius(1, 0, 0, 1) if fix is INF else Moebius(fix, -1, 1, 0)
    q = t.inverse() @ p @ t
    tau = q.b / q.a
    n = 1j * tau / abs(tau)
    c = max(1.0, abs(tau))
    while True:
        up = image_disk(t, half_plane(c * n, n))
        down = image_disk(t, half_plane(-c * n, -n))
        if max(chordal_diameter(up), chordal_diameter(down)) <= size:
            return up, down
        c *= 2



