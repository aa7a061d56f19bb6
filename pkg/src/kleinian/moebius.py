"""Moebius transformations of the Riemann sphere.

Maps are stored as normalized SL(2, C) matrices and compared up to sign.
Points of the sphere are Python complex numbers plus the singleton ``INF``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-9
_EPS = float(np.finfo(float).eps)


class Infinity:
    """The point at infinity of the Riemann sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (Infinity, ())


INF = Infinity()

SpherePoint = Union[complex, Infinity]


class MoebiusError(ValueError):
    pass


def is_inf(z) -> bool:
    return z is INF


def as_point(z) -> SpherePoint:
    if z is INF:
        return INF
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise MoebiusError(f"non-finite coordinate {z!r}; use INF for the point at infinity")
    return z


def homogeneous(z: SpherePoint) -> tuple[complex, complex]:
    if z is INF:
        return (1.0 + 0j, 0j)
    return (complex(z), 1.0 + 0j)


def from_homogeneous(z1: complex, z2: complex) -> SpherePoint:
    if z2 == 0:
        return INF
    w = z1 / z2
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return INF
    return w


class MapClass(Enum):
    IDENTITY = "identity"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True, eq=False)
class Moebius:
    """z -> (az + b)/(cz + d), normalized so that ad - bc = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        a, b, c, d = (complex(x) for x in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if not abs(det) > 1e-300:
            raise MoebiusError(f"degenerate matrix, det = {det!r}")
        # already normalized input is kept bit for bit (files round-trip exactly)
        s = 1.0 if abs(det - 1) <= 8 * _EPS * (abs(a * d) + abs(b * c)) else cmath.sqrt(det)
        object.__setattr__(self, "a", a / s)
        object.__setattr__(self, "b", b / s)
        object.__setattr__(self, "c", c / s)
        object.__setattr__(self, "d", d / s)

    @classmethod
    def from_matrix(cls, m) -> "Moebius":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def __call__(self, z: SpherePoint) -> SpherePoint:
        return apply(self, z)

    def __matmul__(self, other: "Moebius") -> "Moebius":
        return compose(self, other)

    def inverse(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)

    def __pow__(self, n: int) -> "Moebius":
        base = self if n >= 0 else self.inverse()
        out = IDENTITY
        for _ in range(abs(n)):
            out = compose(out, base)
        return out

    def entries(self) -> tuple[complex, complex, complex, complex]:
        return (self.a, self.b, self.c, self.d)

    def __repr__(self):
        return f"Moebius({self.a:.6g}, {self.b:.6g}, {self.c:.6g}, {self.d:.6g})"


IDENTITY = Moebius(1, 0, 0, 1)


def maps_equal(m1: Moebius, m2: Moebius, tol: float = DEFAULT_TOL) -> bool:
    """Entrywise equality up to the global sign ambiguity of PSL(2, C)."""
    e1 = np.array(m1.entries())
    e2 = np.array(m2.entries())
    return bool(min(np.max(np.abs(e1 - e2)), np.max(np.abs(e1 + e2))) <= tol)


def roundoff_tol(m: Moebius, tol: float) -> float:
    """tol, widened to a first-order roundoff bound for images under m."""
    size = abs(m.a) ** 2 + abs(m.b) ** 2 + abs(m.c) ** 2 + abs(m.d) ** 2
    return max(tol, 64 * np.finfo(float).eps * size)


def compose(m1: Moebius, m2: Moebius) -> Moebius:
    """m1 o m2 (m2 acts first)."""
    return Moebius(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
    )


def inverse(m: Moebius) -> Moebius:
    return m.inverse()


def apply(m: Moebius, z: SpherePoint) -> SpherePoint:
    if z is INF:
        if m.c == 0:
            return INF
        return m.a / m.c
    den = m.c * z + m.d
    if den == 0:
        return INF
    w = (m.a * z + m.b) / den
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return INF
    return w


def classify(m: Moebius, tol: float = DEFAULT_TOL) -> MapClass:
    if maps_equal(m, IDENTITY, tol):
        return MapClass.IDENTITY
    t2 = m.trace ** 2
    if abs(t2 - 4) <= tol:
        return MapClass.PARABOLIC
    if abs(t2.imag) <= tol and -tol <= t2.real < 4:
        return MapClass.ELLIPTIC
    return MapClass.LOXODROMIC


def _eigvec_point(m: Moebius, lam: complex) -> SpherePoint:
    # Two candidate eigenvectors of M for eigenvalue lam; keep the better conditioned one.
    v1 = (m.b, lam - m.a)
    v2 = (lam - m.d, m.c)
    n1 = abs(v1[0]) + abs(v1[1])
    n2 = abs(v2[0]) + abs(v2[1])
    v = v1 if n1 >= n2 else v2
    return from_homogeneous(*v)


def multiplier(m: Moebius, z: SpherePoint) -> complex:
    """Derivative of m at a fixed point z (in the chart 1/z at infinity)."""
    if z is INF:
        return m.d / m.a
    return 1 / (m.c * z + m.d) ** 2


def fixed_points(m: Moebius, tol: float = DEFAULT_TOL) -> list[SpherePoint]:
    """Fixed points; loxodromic maps return [attracting, repelling]."""
    cls = classify(m, tol)
    if cls is MapClass.IDENTITY:
        raise MoebiusError("the identity fixes every point")
    tr = m.trace
    if cls is MapClass.PARABOLIC:
        return [_eigvec_point(m, tr / 2)]
    s = cmath.sqrt(tr * tr - 4)
    lam1 = (tr + s) / 2
    lam2 = (tr - s) / 2
    if abs(lam1) < abs(lam2):
        lam1, lam2 = lam2, lam1
    p = _eigvec_point(m, lam1)
    q = _eigvec_point(m, lam2)
    if cls is MapClass.LOXODROMIC and abs(multiplier(m, p)) > abs(multiplier(m, q)):
        p, q = q, p
    return [p, q]


def attracting_fixed_point(m: Moebius) -> SpherePoint:
    return fixed_points(m)[0]


def spherical_derivative_norm(m: Moebius, z: SpherePoint) -> float:
    """Norm of Dm at z for the round metric of the unit sphere."""
    z1, z2 = homogeneous(z)
    w1 = m.a * z1 + m.b * z2
    w2 = m.c * z1 + m.d * z2
    return (abs(z1) ** 2 + abs(z2) ** 2) / (abs(w1) ** 2 + abs(w2) ** 2)


def axis_chart(p_attract: SpherePoint, p_repel: SpherePoint) -> Moebius:
    """A map T with T(0) = p_repel and T(inf) = p_attract.

    For finite points T(-1) = inf, so far-away points sit near |w| = 1 in the chart.
    """
    if p_attract is INF and p_repel is INF:
        raise MoebiusError("coincident fixed points")
    if p_attract is INF:
        return Moebius(1, p_repel, 0, 1)
    if p_repel is INF:
        return Moebius(p_attract, 1, 1, 0)
    if p_attract == p_repel:
        raise MoebiusError("coincident fixed points")
    return Moebius(p_attract, p_repel, 1, 1)


def _dilation(k: complex) -> Moebius:
    s = cmath.sqrt(k)
    return Moebius(s, 0, 0, 1 / s)


def loxodromic_from_axis(p_attract: SpherePoint, p_repel: SpherePoint, length: float,
                         rotation: float = 0.0) -> Moebius:
    """Loxodromic with the given fixed points and complex translation length."""
    if not length > 0:
        raise MoebiusError(f"translation length must be positive, got {length}")
    t = axis_chart(p_attract, p_repel)
    m = _dilation(cmath.exp(complex(length, rotation)))
    return compose(t, compose(m, t.inverse()))


def c_lambda(p2: SpherePoint, p3: SpherePoint, lam: float) -> Moebius:
    """Purely hyperbolic map fixing p2, p3 with derivative 1/lam at p2 and lam at p3."""
    if not lam > 0:
        raise MoebiusError("lambda must be positive")
    t = axis_chart(p3, p2)
    return compose(t, compose(_dilation(1.0 / lam), t.inverse()))


def _to_zero_one_inf(z1: SpherePoint, z2: SpherePoint, z3: SpherePoint) -> Moebius:
    if z1 is INF:
        return Moebius(0, z2 - z3, 1, -z3)
    if z2 is INF:
        return Moebius(1, -z1, 1, -z3)
    if z3 is INF:
        return Moebius(1, -z1, 0, z2 - z1)
    return Moebius(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))


def _distinct(triple: Sequence[SpherePoint]) -> bool:
    for i in range(3):
        for j in range(i + 1, 3):
            p, q = triple[i], triple[j]
            if p is INF or q is INF:
                if p is q:
                    return False
            elif p == q:
                return False
    return True


def triple_transitive(src: Sequence[SpherePoint], dst: Sequence[SpherePoint]) -> Moebius:
    """The unique map with src[k] -> dst[k]."""
    src = [as_point(z) for z in src]
    dst = [as_point(z) for z in dst]
    if len(src) != 3 or len(dst) != 3 or not _distinct(src) or not _distinct(dst):
        raise MoebiusError("triples must consist of three distinct points")
    s = _to_zero_one_inf(*src)
    t = _to_zero_one_inf(*dst)
    return compose(t.inverse(), s)


def random_moebius(rng: np.random.Generator, bound: float = 10.0) -> Moebius:
    while True:
        e = rng.uniform(-bound, bound, 4) + 1j * rng.uniform(-bound, bound, 4)
        if abs(e[0] * e[3] - e[1] * e[2]) > 1e-3:
            return Moebius(*e)


def random_unitary(rng: np.random.Generator) -> Moebius:
    """A random rotation of the sphere (SU(2) element)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a = complex(q[0], q[1])
    b = complex(q[2], q[3])
    return Moebius(a, b, -b.conjugate(), a.conjugate())
