"""Marked groups of Moebius maps: words, orbits, limit sets and ping-pong checks.

Words are tuples of nonzero ints: ``i + 1`` is generator ``i`` and ``-(i + 1)`` its
inverse.  Enumeration runs level by level over numpy arrays of matrices in
length-then-lexicographic order, with the alphabet ordered g0, g0^-1, g1, g1^-1, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .moebius import (
    IDENTITY, MapClass, Moebius, SpherePoint, apply, axis_chart, classify, compose, fixed_points,
    homogeneous, roundoff_tol,
)
from .sphere_geom import (
    DEFAULT_MARGIN, disk_distance, from_sphere, image_disk, same_disk, sphere_points,
)

MAX_DEPTH = 30
MAX_WORDS = 10 ** 7
CLASS_TOL = 1e-9

Word = tuple


class WordBudgetError(ValueError):
    pass


class MalformedPairing(ValueError):
    pass


class NotLoxodromic(ValueError):
    pass


# -- groups and words ------------------------------------------------------------


@dataclass(frozen=True)
class MarkedGroup:
    names: tuple
    maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "maps", tuple(self.maps))
        if len(self.names) != len(self.maps):
            raise ValueError("names and maps differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"generator names must be unique: {self.names}")
        for n, m in zip(self.names, self.maps):
            if not n or any(ch.isspace() for ch in n) or n.endswith("^-1"):
                raise ValueError(f"bad generator name {n!r}")
            if classify(m) is MapClass.IDENTITY:
                raise ValueError(f"generator {n} is the identity")

    @property
    def rank(self) -> int:
        return len(self.maps)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def word(self, text: str) -> Word:
        return parse_word(self, text)

    def alphabet(self) -> np.ndarray:
        """Matrices of g0, g0^-1, g1, g1^-1, ... as an array (2k, 2, 2)."""
        out = np.empty((2 * self.rank, 2, 2), dtype=complex)
        for i, m in enumerate(self.maps):
            out[2 * i] = m.matrix
            out[2 * i + 1] = m.inverse().matrix
        return out

    def __add__(self, other: "MarkedGroup") -> "MarkedGroup":
        return MarkedGroup(self.names + other.names, self.maps + other.maps)


TRIVIAL_GROUP = MarkedGroup((), ())


def letter_code(letter: int) -> int:
    """Position of a signed letter in the ordered alphabet."""
    return 2 * (abs(letter) - 1) + (1 if letter < 0 else 0)


def code_letter(code: int) -> int:
    i, neg = divmod(int(code), 2)
    return -(i + 1) if neg else i + 1


def reduce_word(w: Sequence[int]) -> Word:
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def word_power(w: Word, k: int) -> Word:
    base = w if k >= 0 else invert_word(w)
    return reduce_word(base * abs(k))


def format_word(g: MarkedGroup, w: Word) -> str:
    if not w:
        return "e"
    return " ".join(g.names[abs(x) - 1] + ("^-1" if x < 0 else "") for x in w)


def parse_word(g: MarkedGroup, text: str) -> Word:
    out = []
    for tok in text.split():
        if tok == "e":
            continue
        neg = tok.endswith("^-1")
        name = tok[:-3] if neg else tok
        i = g.index(name)
        out.append(-(i + 1) if neg else i + 1)
    return reduce_word(out)


def word_count(rank: int, depth: int) -> int:
    """Number of reduced words of length <= depth in a free group of the given rank."""
    if rank == 0:
        return 1
    if rank == 1:
        return 1 + 2 * depth
    return 1 + 2 * rank * ((2 * rank - 1) ** depth - 1) // (2 * rank - 2)


@dataclass
class WordLevel:
    length: int
    codes: np.ndarray  # (n, length) alphabet positions
    mats: np.ndarray   # (n, 2, 2)

    def __len__(self):
        return len(self.mats)

    def word(self, i: int) -> Word:
        return tuple(code_letter(c) for c in self.codes[i])


def _check_depth(depth: int):
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > MAX_DEPTH:
        raise WordBudgetError(f"depth {depth} exceeds the budget guard of {MAX_DEPTH}")


def word_levels(g: MarkedGroup, depth: int, max_words: int = MAX_WORDS,
                ) -> tuple[list[WordLevel], bool]:
    """All reduced words of length <= depth with their matrices, grouped by length.

    Returns (levels, truncated); a level that would push the total past
    ``max_words`` is dropped and ``truncated`` is set.
    """
    _check_depth(depth)
    levels = [WordLevel(0, np.zeros((1, 0), dtype=np.int16), np.eye(2, dtype=complex)[None])]
    if g.rank == 0:
        return levels, False
    alpha = g.alphabet()
    k2 = 2 * g.rank
    inv_code = np.arange(k2) ^ 1
    total = 1
    for length in range(1, depth + 1):
        prev = levels[-1]
        n = len(prev)
        parent = np.repeat(np.arange(n), k2)
        codes = np.tile(np.arange(k2), n)
        if length > 1:
            keep = codes != inv_code[prev.codes[parent, -1]]
            parent, codes = parent[keep], codes[keep]
        if total + len(codes) > max_words:
            return levels, True
        new_codes = np.concatenate([prev.codes[parent], codes[:, None].astype(np.int16)], axis=1)
        mats = np.matmul(prev.mats[parent], alpha[codes])
        levels.append(WordLevel(length, new_codes, mats))
        total += len(codes)
    return levels, False


def enumerate_words(g: MarkedGroup, depth: int) -> Iterator[Word]:
    """Reduced words of length <= depth in length-then-lexicographic order."""
    _check_depth(depth)
    if word_count(g.rank, depth) > MAX_WORDS:
        raise WordBudgetError(f"more than {MAX_WORDS} words at depth {depth}")

    def extend(prefix: Word, length: int):
        if len(prefix) == length:
            yield prefix
            return
        for code in range(2 * g.rank):
            x = code_letter(code)
            if prefix and prefix[-1] == -x:
                continue
            yield from extend(prefix + (x,), length)

    for length in range(depth + 1):
        yield from extend((), length)


def letter_map(g: MarkedGroup, x: int) -> Moebius:
    m = g.maps[abs(x) - 1]
    return m if x > 0 else m.inverse()


def evaluate(g: MarkedGroup, w: Word) -> Moebius:
    """Product of the letters read left to right (the last letter acts first)."""
    out = IDENTITY
    for x in w:
        out = compose(out, letter_map(g, x))
    return out


# -- fundamental domains ------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Complement of a union of disks; ``pairing[k] = (i, j)`` means generator k
    carries the exterior of disk i onto disk j."""

    disks: tuple = ()
    pairing: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))
        if self.pairing is not None:
            object.__setattr__(self, "pairing", tuple(tuple(p) for p in self.pairing))

    def margin(self, z: SpherePoint) -> float:
        """Chordal distance from z to the deleted disks (negative inside one)."""
        if not self.disks:
            return 2.0
        return min(-d.point_margin(z) for d in self.disks)

    def margins(self, xyz: np.ndarray) -> np.ndarray:
        if not self.disks:
            return np.full(len(xyz), 2.0)
        return np.min([-d.margins(xyz) for d in self.disks], axis=0)

    def shifted(self, offset: int) -> tuple:
        return tuple((i + offset, j + offset) for i, j in (self.pairing or ()))


def validate_pairing(g: MarkedGroup, d: DomainSpec, tol: float = 1e-8, samples: int = 8):
    if d.pairing is None:
        return
    if len(d.pairing) != g.rank:
        raise MalformedPairing(f"{len(d.pairing)} pairs for {g.rank} generators")
    for k, (i, j) in enumerate(d.pairing):
        if not (0 <= i < len(d.disks) and 0 <= j < len(d.disks)) or i == j:
            raise MalformedPairing(f"generator {g.names[k]} pairs invalid disks ({i}, {j})")
        src, dst = d.disks[i], d.disks[j]
        m = g.maps[k]
        t = roundoff_tol(m, tol)
        if not same_disk(image_disk(m, src.complement()), dst, t):
            raise MalformedPairing(
                f"generator {g.names[k]} does not carry the exterior of disk {i} onto disk {j}")
        for z in src.boundary_points(samples):
            if abs(dst.point_margin(apply(m, z))) > t:
                raise MalformedPairing(f"generator {g.names[k]}: boundary sample misses disk {j}")
        if not dst.contains(apply(m, src.complement().interior_point())):
            raise MalformedPairing(f"generator {g.names[k]} reverses the pairing orientation")


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    r = np.sqrt(1 - z * z)
    phi = k * math.pi * (3 - math.sqrt(5))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def interior_points(d: DomainSpec, count: int, margin: float = 1e-4) -> list[SpherePoint]:
    """Deterministic sample of points of the domain at chordal distance >= margin
    from every deleted disk."""
    n = 256
    while n <= 1 << 22:
        xyz = fibonacci_sphere(n)
        ok = d.margins(xyz) >= margin
        if ok.sum() >= count:
            idx = np.flatnonzero(ok)
            pick = idx[np.linspace(0, len(idx) - 1, count).round().astype(int)] if count else []
            return [from_sphere(xyz[i]) for i in pick]
        n *= 4
    raise ValueError("domain interior too thin to sample")


# -- ping-pong ---------------------------------------------------------------------


@dataclass
class PingPongResult:
    accepted: bool
    margin: float
    group: Optional[MarkedGroup] = None
    domain: Optional[DomainSpec] = None
    violation: Optional[str] = None
    witness: Optional[tuple] = None


def pingpong_verify(g1: MarkedGroup, d1: DomainSpec, g2: MarkedGroup, d2: DomainSpec,
                    margin: float = DEFAULT_MARGIN) -> PingPongResult:
    """Check that each group's deleted disks sit inside the other's domain interior."""
    validate_pairing(g1, d1)
    validate_pairing(g2, d2)
    best = 2.0
    for j, b in enumerate(d2.disks):
        for i, a in enumerate(d1.disks):
            dist = disk_distance(a, b)
            best = min(best, dist)
            if dist < margin:
                return PingPongResult(
                    False, dist,
                    violation=f"complement of D2 not inside int(D1): disk {j} of G2 meets disk {i} of G1",
                    witness=(j, i))
    pairing = None
    if d1.pairing is not None and d2.pairing is not None:
        pairing = d1.pairing + d2.shifted(len(d1.disks))
    return PingPongResult(True, best, g1 + g2, DomainSpec(d1.disks + d2.disks, pairing))


# -- freeness and limit sets ------------------------------------------------------------


@dataclass
class FreenessReport:
    ok: bool
    depth: int
    words_checked: int
    points: int
    violation: Optional[Word] = None
    violation_text: str = ""
    truncated: bool = False


def _point_array(points: Sequence[SpherePoint]) -> np.ndarray:
    return np.array([homogeneous(z) for z in points], dtype=complex).reshape(-1, 2)


def freeness_oracle(g: MarkedGroup, d: DomainSpec, depth: int, testpoints: int = 10,
                    margin: float = 1e-4) -> FreenessReport:
    """Every nontrivial word must push sampled interior points into a deleted disk."""
    levels, truncated = word_levels(g, depth)
    pts = interior_points(d, testpoints, margin)
    P = _point_array(pts)
    checked = 0
    for lev in levels[1:]:
        for lo in range(0, len(lev), 20000):
            mats = lev.mats[lo:lo + 20000]
            img = np.einsum("nij,pj->npi", mats, P)
            xyz = sphere_points(img).reshape(-1, 3)
            inside = (d.margins(xyz) < 0).reshape(len(mats), len(P))
            bad = np.flatnonzero(~inside.all(axis=1))
            if len(bad):
                w = lev.word(lo + bad[0])
                return FreenessReport(False, depth, checked + bad[0] + 1, len(P), w,
                                      format_word(g, w), truncated)
            checked += len(mats)
    return FreenessReport(True, depth, checked, len(P), truncated=truncated)


@dataclass
class LimitSetSample:
    depth: int
    method: str
    xyz: np.ndarray
    truncated: bool = False

    @property
    def points(self) -> list[SpherePoint]:
        return [from_sphere(x) for x in self.xyz]

    def __len__(self):
        return len(self.xyz)


def _classify_array(mats: np.ndarray, tol: float = CLASS_TOL) -> np.ndarray:
    """0 identity, 1 elliptic, 2 parabolic, 3 loxodromic."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    t2 = (a + d) ** 2
    ident = (np.maximum(np.abs(b), np.abs(c)) <= tol) & (np.abs(a - d) <= tol)
    para = np.abs(t2 - 4) <= tol
    ell = (np.abs(t2.imag) <= tol) & (t2.real >= -tol) & (t2.real < 4)
    out = np.full(len(mats), 3, dtype=np.int8)
    out[ell] = 1
    out[para] = 2
    out[ident] = 0
    return out


def _eigvecs(mats: np.ndarray, lam: np.ndarray) -> np.ndarray:
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    v1 = np.stack([b, lam - a], axis=1)
    v2 = np.stack([lam - d, c], axis=1)
    use1 = (np.abs(v1).sum(axis=1) >= np.abs(v2).sum(axis=1))[:, None]
    return np.where(use1, v1, v2)


def attracting_points(mats: np.ndarray, tol: float = CLASS_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous attracting fixed points (parabolic fixed points included) and a mask."""
    cls = _classify_array(mats, tol)
    tr = mats[:, 0, 0] + mats[:, 1, 1]
    s = np.sqrt(tr * tr - 4 + 0j)
    l1 = (tr + s) / 2
    l2 = (tr - s) / 2
    lam = np.where(np.abs(l1) >= np.abs(l2), l1, l2)
    lam = np.where(cls == 2, tr / 2, lam)
    return _eigvecs(mats, lam), cls >= 2


def repelling_points(mats: np.ndarray) -> np.ndarray:
    tr = mats[:, 0, 0] + mats[:, 1, 1]
    s = np.sqrt(tr * tr - 4 + 0j)
    l1 = (tr + s) / 2
    l2 = (tr - s) / 2
    lam = np.where(np.abs(l1) >= np.abs(l2), l2, l1)
    return _eigvecs(mats, lam)


def _dedupe(xyz: np.ndarray, seen: dict) -> list[int]:
    keys = np.round(xyz * 1e10).astype(np.int64)
    keep = []
    for i, k in enumerate(map(tuple, keys)):
        if k not in seen:
            seen[k] = True
            keep.append(i)
    return keep


def limit_set_sample(g: MarkedGroup, depth: int, method: str = "attracting-fixed-points",
                     max_words: int = MAX_WORDS) -> LimitSetSample:
    """Finite-depth point cloud approximating the limit set (duplicates removed,
    first occurrence kept)."""
    if method not in ("attracting-fixed-points", "orbit-of-point"):
        raise ValueError(f"unknown method {method!r}")
    levels, truncated = word_levels(g, depth, max_words)
    seen: dict = {}
    chunks = []
    if method == "attracting-fixed-points":
        for lev in levels[1:]:
            v, ok = attracting_points(lev.mats)
            xyz = sphere_points(v[ok])
            chunks.append(xyz[_dedupe(xyz, seen)])
    elif g.rank:
        seed = homogeneous(fixed_points(g.maps[0])[0])
        for lev in levels:
            xyz = sphere_points(lev.mats @ np.array(seed))
            chunks.append(xyz[_dedupe(xyz, seen)])
    xyz = np.concatenate(chunks) if chunks else np.zeros((0, 3))
    return LimitSetSample(depth, method, xyz, truncated)


# -- upper half-space ------------------------------------------------------------------


@dataclass(frozen=True)
class HPoint:
    z: complex
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("height must be positive")
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "t", float(self.t))


def hyperbolic_distance(p: HPoint, q: HPoint) -> float:
    num = abs(p.z - q.z) ** 2 + (p.t - q.t) ** 2
    return math.acosh(1 + num / (2 * p.t * q.t))


def apply_isometry(m: Moebius, p: HPoint) -> HPoint:
    """Poincare extension of m acting on upper half-space."""
    den = abs(m.c * p.z + m.d) ** 2 + abs(m.c) ** 2 * p.t ** 2
    z = ((m.a * p.z + m.b) * (m.c * p.z + m.d).conjugate() + m.a * m.c.conjugate() * p.t ** 2) / den
    return HPoint(z, p.t / den)


def _isometry_array(mats: np.ndarray, p: HPoint) -> tuple[np.ndarray, np.ndarray]:
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    q = c * p.z + d
    den = np.abs(q) ** 2 + np.abs(c) ** 2 * p.t ** 2
    z = ((a * p.z + b) * np.conj(q) + a * np.conj(c) * p.t ** 2) / den
    return z, p.t / den


def _geodesic_distance(c: np.ndarray, d: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Distance from the geodesic (0, inf) to geodesics with homogeneous endpoints c, d.

    Returns (distance, same_axis).  Uses tanh^2(delta/2) = c/d for the complex distance.
    """
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    c1, c2, d1, d2 = c[:, 0], c[:, 1], d[:, 0], d[:, 1]
    def at_zero(v1, v2):
        return np.abs(v1) <= tol * np.abs(v2)

    def at_inf(v1, v2):
        return np.abs(v2) <= tol * np.abs(v1)

    same = (at_zero(c1, c2) & at_inf(d1, d2)) | (at_inf(c1, c2) & at_zero(d1, d2))
    shared = at_zero(c1, c2) | at_inf(c1, c2) | at_zero(d1, d2) | at_inf(d1, d2)
    den = c2 * d1
    with np.errstate(divide="ignore", invalid="ignore"):
        X = c1 * d2 / den
        one_minus = (den - c1 * d2) / den
        dist = 2 * np.log(np.abs(1 + np.sqrt(X))) - np.log(np.abs(one_minus))
    dist = np.where(shared, 0.0, np.maximum(dist, 0.0))
    return dist, same


def axis_endpoints(m: Moebius) -> tuple[SpherePoint, SpherePoint]:
    if classify(m) is not MapClass.LOXODROMIC:
        raise NotLoxodromic("axis requires a loxodromic map")
    p, q = fixed_points(m)
    return p, q


def _chart_inverse(p: SpherePoint, q: SpherePoint) -> np.ndarray:
    """Matrix of a map sending p -> inf and q -> 0."""
    return axis_chart(p, q).inverse().matrix


def axis_distance(g1: Moebius, g2: Moebius) -> float:
    """Hyperbolic distance between the axes of two loxodromics (0 if they meet)."""
    p1, q1 = axis_endpoints(g1)
    p2, q2 = axis_endpoints(g2)
    tinv = _chart_inverse(p1, q1)
    c = (tinv @ np.array(homogeneous(q2)))[None]
    d = (tinv @ np.array(homogeneous(p2)))[None]
    dist, same = _geodesic_distance(c, d)
    return 0.0 if same[0] else float(dist[0])


def power_codes(w: Word, depth: int) -> dict:
    """Alphabet codes of the nontrivial reduced powers of w up to length depth, by length."""
    w = reduce_word(w)
    out: dict = {}
    if not w:
        return out
    for k in range(1, depth + 1):
        for p in (word_power(w, k), word_power(w, -k)):
            if 0 < len(p) <= depth:
                out.setdefault(len(p), []).append(np.array([letter_code(x) for x in p]))
    return out


def power_mask(level: WordLevel, powers: dict) -> np.ndarray:
    """Boolean mask of the words in ``level`` listed in ``powers``."""
    hit = np.zeros(len(level), dtype=bool)
    for pc in powers.get(level.length, ()):
        hit |= (level.codes == pc).all(axis=1)
    return hit


@dataclass
class CollarReport:
    width: float
    depth: int
    words: int
    witness: Optional[Word] = None
    truncated: bool = False


def collar_estimate(g: MarkedGroup, gamma: Word, depth: int,
                    max_words: int = MAX_WORDS) -> CollarReport:
    """Half the smallest distance from the axis of gamma to its translates w(axis),
    over nontrivial words of length <= depth that are not powers of gamma."""
    m = evaluate(g, gamma)
    p, q = axis_endpoints(m)
    tinv = _chart_inverse(p, q)
    levels, truncated = word_levels(g, depth, max_words)
    powers = power_codes(gamma, depth)
    P = np.array(homogeneous(p))
    Q = np.array(homogeneous(q))
    best, witness, used = math.inf, None, 0
    for lev in levels[1:]:
        keep = ~power_mask(lev, powers)
        mats = tinv @ lev.mats[keep]
        dist, same = _geodesic_distance(mats @ Q, mats @ P)
        dist = np.where(same, np.inf, dist)
        used += int(keep.sum())
        if len(dist) and dist.min() < best:
            i = int(np.argmin(dist))
            best = float(dist[i])
            witness = lev.word(int(np.flatnonzero(keep)[i]))
    return CollarReport(best / 2, depth, used, witness, truncated)


def injectivity_radius_witness(g: MarkedGroup, p: HPoint, depth: int,
                               max_words: int = MAX_WORDS) -> float:
    """Half the smallest displacement of p by a nontrivial word of length <= depth."""
    levels, _ = word_levels(g, depth, max_words)
    best = math.inf
    for lev in levels[1:]:
        z, t = _isometry_array(lev.mats, p)
        arg = 1 + (np.abs(z - p.z) ** 2 + (t - p.t) ** 2) / (2 * t * p.t)
        best = min(best, float(np.arccosh(np.maximum(arg, 1.0)).min()))
    return best / 2
