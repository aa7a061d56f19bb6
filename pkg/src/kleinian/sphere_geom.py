"""Round circles and disks on the Riemann sphere.

A disk is the set where a Hermitian form A|z|^2 + 2Re(conj(B) z) + D is
negative (``side`` flips the sign).  All metric predicates are evaluated on the
spherical cap obtained by inverse stereographic projection, so disks through
infinity need no special casing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .moebius import (
    INF, MapClass, Moebius, SpherePoint, apply, axis_chart, classify,
    fixed_points, homogeneous,
)

DEFAULT_MARGIN = 1e-6


class GeometryError(ValueError):
    pass


def to_sphere(z: SpherePoint) -> np.ndarray:
    """Inverse stereographic projection onto the unit sphere (0 -> south pole)."""
    if z is INF:
        return np.array([0.0, 0.0, 1.0])
    z = complex(z)
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, r2 - 1]) / (r2 + 1)


def from_sphere(x) -> SpherePoint:
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    if x[2] > 0:
        # near the north pole divide by the stable quantity 1 + x3
        den = 1 - x[2]
        if den <= 1e-300:
            return INF
        # (x1 + i x2)/(1 - x3) = (1 + x3)/(x1 - i x2)
        w = complex(x[0], -x[1])
        if w == 0:
            return INF
        return (1 + x[2]) / w
    return complex(x[0], x[1]) / (1 - x[2])


def sphere_points(zs) -> np.ndarray:
    """Vectorized inverse stereographic projection of homogeneous coordinates (n, 2)."""
    zs = np.asarray(zs, dtype=complex)
    z1, z2 = zs[..., 0], zs[..., 1]
    n1 = np.abs(z1) ** 2
    n2 = np.abs(z2) ** 2
    tot = n1 + n2
    p = z1 * np.conj(z2)
    return np.stack([2 * p.real / tot, 2 * p.imag / tot, (n1 - n2) / tot], axis=-1)


def angle_between(x: np.ndarray, y: np.ndarray) -> float:
    return math.atan2(float(np.linalg.norm(np.cross(x, y))), float(np.dot(x, y)))


def chord_from_angle(theta: float) -> float:
    return 2.0 * math.sin(theta / 2.0)


def angle_from_chord(chord: float) -> float:
    return 2.0 * math.asin(min(1.0, max(-1.0, chord / 2.0)))


def chordal_distance(p: SpherePoint, q: SpherePoint) -> float:
    if p is INF and q is INF:
        return 0.0
    if p is INF:
        return 2.0 / math.sqrt(1 + abs(q) ** 2)
    if q is INF:
        return 2.0 / math.sqrt(1 + abs(p) ** 2)
    return 2 * abs(p - q) / math.sqrt((1 + abs(p) ** 2) * (1 + abs(q) ** 2))


@dataclass(frozen=True)
class GeneralizedCircle:
    """Zero set of A|z|^2 + 2Re(conj(B) z) + D, scaled so that |B|^2 - AD = 1."""

    A: float
    B: complex
    D: float

    def __post_init__(self):
        A, B, D = float(self.A), complex(self.B), float(self.D)
        disc = abs(B) ** 2 - A * D
        if not disc > 1e-14 * max(1.0, A * A, abs(B) ** 2, D * D):
            raise GeometryError(f"degenerate circle (discriminant {disc:g})")
        s = math.sqrt(disc)
        object.__setattr__(self, "A", A / s)
        object.__setattr__(self, "B", B / s)
        object.__setattr__(self, "D", D / s)

    @property
    def hermitian(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.B.conjugate(), self.D]], dtype=complex)

    def value(self, z: SpherePoint) -> float:
        z1, z2 = homogeneous(z)
        return (self.A * abs(z1) ** 2 + 2 * (self.B.conjugate() * z1 * z2.conjugate()).real
                + self.D * abs(z2) ** 2)

    @property
    def is_line(self) -> bool:
        return abs(self.A) < 1e-15

    def center_radius(self) -> tuple[complex, float]:
        if self.is_line:
            raise GeometryError("a line has no Euclidean center")
        return -self.B / self.A, 1.0 / abs(self.A)


@dataclass(frozen=True)
class Disk:
    """Open round disk {side * form(z) < 0}; ``side`` is +1 or -1."""

    circle: GeneralizedCircle
    side: int = 1
    _cap: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.side not in (1, -1):
            raise GeometryError("side must be +1 or -1")
        A, B, D = self.signed_form()
        v = np.array([2 * B.real, 2 * B.imag, A - D])
        n = -v / np.linalg.norm(v)
        theta = math.atan2(2.0, A + D)
        object.__setattr__(self, "_cap", (n, theta))

    def signed_form(self) -> tuple[float, complex, float]:
        c = self.circle
        return (self.side * c.A, self.side * c.B, self.side * c.D)

    @property
    def cap_center(self) -> np.ndarray:
        return self._cap[0]

    @property
    def cap_angle(self) -> float:
        """Angular radius of the spherical cap, in (0, pi)."""
        return self._cap[1]

    def complement(self) -> "Disk":
        return Disk(self.circle, -self.side)

    def contains(self, z: SpherePoint, margin: float = 0.0) -> bool:
        return self.point_margin(z) > margin

    def point_margin(self, z: SpherePoint) -> float:
        """Signed chordal distance from z to the boundary circle, positive inside."""
        ang = angle_between(self.cap_center, to_sphere(z))
        return chord_from_angle(self.cap_angle - ang) if ang <= self.cap_angle \
            else -chord_from_angle(ang - self.cap_angle)

    def margins(self, xyz: np.ndarray) -> np.ndarray:
        """Vectorized ``point_margin`` for unit vectors of shape (n, 3)."""
        n = self.cap_center
        cr = np.linalg.norm(np.cross(xyz, n), axis=-1)
        ang = np.arctan2(cr, xyz @ n)
        return 2 * np.sin((self.cap_angle - ang) / 2)

    def center_radius(self) -> tuple[complex, float]:
        return self.circle.center_radius()

    def boundary_points(self, n: int) -> list[SpherePoint]:
        """n points evenly spaced on the boundary circle (spherical parametrization)."""
        nvec, th = self.cap_center, self.cap_angle
        helper = np.array([1.0, 0, 0]) if abs(nvec[0]) < 0.9 else np.array([0, 1.0, 0])
        u = np.cross(nvec, helper)
        u /= np.linalg.norm(u)
        v = np.cross(nvec, u)
        out = []
        for k in range(n):
            phi = 2 * math.pi * k / n
            x = math.cos(th) * nvec + math.sin(th) * (math.cos(phi) * u + math.sin(phi) * v)
            out.append(from_sphere(x))
        return out

    def interior_point(self) -> SpherePoint:
        return from_sphere(self.cap_center)

    def __repr__(self):
        A, B, D = self.signed_form()
        return f"Disk(A={A:.6g}, B={B:.6g}, D={D:.6g})"


def disk_from_center(center: complex, radius: float) -> Disk:
    if not radius > 0:
        raise GeometryError("radius must be positive")
    c = complex(center)
    return Disk(GeneralizedCircle(1.0, -c, abs(c) ** 2 - radius ** 2), 1)


def exterior_of(center: complex, radius: float) -> Disk:
    return disk_from_center(center, radius).complement()


def half_plane(point: complex, normal: complex) -> Disk:
    """{z : Re(conj(normal) (z - point)) > 0}."""
    n = complex(normal) / abs(normal)
    p = complex(point)
    return Disk(GeneralizedCircle(0.0, -n, 2 * (n.conjugate() * p).real), 1)


def disk_from_form(A: float, B: complex, D: float, side: int = 1) -> Disk:
    return Disk(GeneralizedCircle(A, B, D), side)


def image_disk(m: Moebius, d: Disk) -> Disk:
    """m(d), obtained by pulling the Hermitian form back through m^-1."""
    inv = m.inverse().matrix
    h = inv.conj().T @ d.circle.hermitian @ inv
    A = h[0, 0].real
    D = h[1, 1].real
    B = 0.5 * (h[0, 1] + h[1, 0].conjugate())
    return Disk(GeneralizedCircle(A, B, D), d.side)


def image_caps(mats: np.ndarray, d: Disk) -> tuple[np.ndarray, np.ndarray]:
    """Caps (unit centers (n, 3), angular radii (n,)) of the images of d under an
    array of SL(2, C) matrices (n, 2, 2)."""
    A0, B0, D0 = d.signed_form()
    H = np.array([[A0, B0], [np.conj(B0), D0]], dtype=complex)
    inv = np.empty_like(mats)
    inv[:, 0, 0] = mats[:, 1, 1]
    inv[:, 0, 1] = -mats[:, 0, 1]
    inv[:, 1, 0] = -mats[:, 1, 0]
    inv[:, 1, 1] = mats[:, 0, 0]
    h = np.conj(np.swapaxes(inv, 1, 2)) @ H @ inv
    A = h[:, 0, 0].real
    D = h[:, 1, 1].real
    B = 0.5 * (h[:, 0, 1] + np.conj(h[:, 1, 0]))
    v = np.stack([2 * B.real, 2 * B.imag, A - D], axis=1)
    nv = np.linalg.norm(v, axis=1)
    disc = np.sqrt(np.maximum(np.abs(B) ** 2 - A * D, 0.0))
    return -v / nv[:, None], np.arctan2(2 * disc, A + D)


def caps_gap(n1: np.ndarray, t1: np.ndarray, n2: np.ndarray, t2) -> np.ndarray:
    """Vectorized ``cap_gap``: angular gap between caps, negative on overlap."""
    cr = np.linalg.norm(np.cross(n1, n2), axis=-1)
    return np.arctan2(cr, np.sum(n1 * n2, axis=-1)) - t1 - t2


def signed_chord(angle) -> np.ndarray:
    return np.sign(angle) * 2 * np.sin(np.abs(angle) / 2)


def chordal_diameter(d: Disk) -> float:
    th = d.cap_angle
    return 2.0 if th >= math.pi / 2 else 2 * math.sin(th)


def cap_gap(d1: Disk, d2: Disk) -> float:
    """Angular gap between closed caps; negative when they overlap."""
    return angle_between(d1.cap_center, d2.cap_center) - d1.cap_angle - d2.cap_angle


def tangency(d1: Disk, d2: Disk, tol: float = 1e-9) -> Optional[SpherePoint]:
    """The single common point of two externally tangent closed disks, else None."""
    gap = cap_gap(d1, d2)
    if abs(gap) > tol:
        return None
    n1, n2 = d1.cap_center, d2.cap_center
    ang = angle_between(n1, n2)
    if ang < 1e-15 or math.pi - ang < 1e-12:
        return None  # concentric, or complementary caps sharing their whole boundary
    # rotate n1 towards n2 by the cap angle of d1, splitting the residual gap evenly
    perp = n2 - np.dot(n1, n2) * n1
    perp /= np.linalg.norm(perp)
    t = d1.cap_angle + gap / 2
    return from_sphere(math.cos(t) * n1 + math.sin(t) * perp)


def disjoint(d1: Disk, d2: Disk, margin: float = DEFAULT_MARGIN) -> bool:
    return disk_distance(d1, d2) >= margin


def disk_distance(d1: Disk, d2: Disk) -> float:
    """Chordal distance between closed disks, negative (by overlap depth) if they meet."""
    gap = cap_gap(d1, d2)
    return chord_from_angle(gap) if gap >= 0 else -chord_from_angle(-gap)


def containment_margin(outer: Disk, inner: Disk) -> float:
    """Chordal room left when ``inner`` sits inside ``outer``; negative if it sticks out."""
    slack = outer.cap_angle - angle_between(outer.cap_center, inner.cap_center) - inner.cap_angle
    return chord_from_angle(slack) if slack >= 0 else -chord_from_angle(-slack)


def contains_disk(outer: Disk, inner: Disk, margin: float = DEFAULT_MARGIN) -> bool:
    return containment_margin(outer, inner) >= margin


def disk_deviation(d1: Disk, d2: Disk) -> float:
    """Distance between two disks as caps (center displacement plus radius change)."""
    return float(np.linalg.norm(d1.cap_center - d2.cap_center) + abs(d1.cap_angle - d2.cap_angle))


def same_disk(d1: Disk, d2: Disk, tol: float = 1e-9) -> bool:
    return disk_deviation(d1, d2) <= tol


def invariant_disk_check(g: Moebius, d: Disk, tol: float = 1e-9) -> bool:
    return same_disk(image_disk(g, d), d, tol)


# -- invariant arcs and strips -------------------------------------------------


def _model(g: Moebius) -> tuple[Moebius, complex]:
    """Chart T and log-multiplier ell with T^-1 g T = (w -> exp(ell) w), Re ell > 0."""
    if classify(g) is not MapClass.LOXODROMIC:
        raise GeometryError("a loxodromic map is required")
    attract, repel = fixed_points(g)
    t = axis_chart(attract, repel)
    conj = t.inverse() @ g @ t
    mu = conj.a / conj.d
    return t, cmath.log(mu)


@dataclass(frozen=True)
class InvariantArc:
    """The orbit curve t -> g^t(seed); ``samples`` covers one period t in [0, 1]."""

    g: Moebius
    seed: SpherePoint
    samples_per_period: int
    chart: Moebius
    log_multiplier: complex
    seed_model: complex
    samples: tuple
    endpoints: tuple

    def model_point(self, t: float) -> complex:
        return self.seed_model * cmath.exp(t * self.log_multiplier)

    def point(self, t: float) -> SpherePoint:
        return apply(self.chart, self.model_point(t))

    def sample(self, k: int) -> SpherePoint:
        return self.point(k / self.samples_per_period)


def invariant_arc(g: Moebius, seed: SpherePoint, samples_per_period: int = 32) -> InvariantArc:
    t, ell = _model(g)
    w0 = apply(t.inverse(), seed)
    if w0 is INF or abs(w0) < 1e-14:
        raise GeometryError("seed is a fixed point")
    n = int(samples_per_period)
    if n < 1:
        raise GeometryError("need at least one sample per period")
    samples = tuple(apply(t, w0 * cmath.exp(k / n * ell)) for k in range(n + 1))
    return InvariantArc(g, seed, n, t, ell, w0, samples, tuple(fixed_points(g)))


@dataclass(frozen=True)
class Strip:
    """Region between two invariant arcs flanking ``core`` at model angle +-halfwidth."""

    core: InvariantArc
    halfwidth: float
    rho1: InvariantArc
    rho2: InvariantArc

    def angular_offset(self, z: SpherePoint) -> float:
        """Model-angle offset of z from the core spiral (wrapped to (-pi, pi])."""
        w = apply(self.core.chart.inverse(), z)
        if w is INF or w == 0:
            return 0.0
        ell = self.core.log_multiplier
        t = (math.log(abs(w)) - math.log(abs(self.core.seed_model))) / ell.real
        ref = cmath.phase(self.core.seed_model) + t * ell.imag
        return math.remainder(cmath.phase(w) - ref, 2 * math.pi)

    def contains(self, z: SpherePoint) -> bool:
        return abs(self.angular_offset(z)) < self.halfwidth


def invariant_strip(g: Moebius, core: InvariantArc, halfwidth: float,
                    within: Optional[Disk] = None, margin: float = DEFAULT_MARGIN,
                    samples: int = 64) -> Strip:
    if not 0 < halfwidth < math.pi:
        raise GeometryError("halfwidth must lie in (0, pi)")
    t = core.chart
    rot = [cmath.exp(1j * halfwidth), cmath.exp(-1j * halfwidth)]
    arcs = [invariant_arc(g, apply(t, core.seed_model * r), core.samples_per_period) for r in rot]
    strip = Strip(core, halfwidth, arcs[0], arcs[1])
    if within is not None:
        # one period suffices when ``within`` is g-invariant
        for k in range(samples + 1):
            s = k / samples
            for arc in (core, *arcs):
                if within.point_margin(arc.point(s)) < margin:
                    raise GeometryError(
                        f"strip of halfwidth {halfwidth:.4g} leaves the target disk")
    return strip
