"""Handle extensions of Kleinian groups.

Two constructions live here:

* ``attach_one_handle`` adds a loxodromic h with prescribed fixed points inside a
  fundamental domain, searching for a translation length that makes ping-pong work.
* ``handle_extension`` builds a periodic chain of tangent disks along an invariant
  ray of a loxodromic gamma, pairs the disks, and tunes the pairing so that the
  product around the tangency points becomes parabolic.

Chains are built in the chart where gamma is w -> mu w with mu > 1 real and the
invariant disk B is a half-plane through 0.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .group_engine import (
    CLASS_TOL, CollarReport, DomainSpec, MarkedGroup, PingPongResult, Word, collar_estimate,
    evaluate, letter_map, limit_set_sample, pingpong_verify, validate_pairing,
)
from .moebius import (
    INF, MapClass, Moebius, SpherePoint, apply, axis_chart, c_lambda, classify, compose,
    fixed_points, loxodromic_from_axis, maps_equal, roundoff_tol, spherical_derivative_norm,
    triple_transitive,
)
from .sphere_geom import (
    DEFAULT_MARGIN, Disk, GeometryError, Strip, chordal_distance, containment_margin,
    disk_distance, disk_from_center, exterior_of, image_disk, invariant_arc,
    invariant_disk_check, invariant_strip, same_disk, tangency, to_sphere,
)

CHAIN_TOL = 1e-9


class ExtensionError(ValueError):
    pass


class ChainValidationError(ExtensionError):
    def __init__(self, family: str, detail: str):
        super().__init__(f"{family}: {detail}")
        self.family = family
        self.detail = detail


# -- one-handle attachment -------------------------------------------------------


@dataclass
class OneHandleResult:
    group: MarkedGroup
    domain: DomainSpec
    handle: Moebius
    length: float
    certificate: PingPongResult


def isometric_disks(h: Moebius) -> tuple[Disk, Disk]:
    """Isometric disks |cz + d| < 1 of h and |cz - a| < 1 of h^-1."""
    if abs(h.c) < 1e-14:
        raise ExtensionError("map fixes infinity; isometric circles undefined")
    r = 1 / abs(h.c)
    return disk_from_center(-h.d / h.c, r), disk_from_center(h.a / h.c, r)


def _handle_domain(h: Moebius) -> DomainSpec:
    src, dst = isometric_disks(h)
    return DomainSpec((src, dst), ((0, 1),))


def attach_one_handle(g: MarkedGroup, d: DomainSpec, x1: SpherePoint, x2: SpherePoint,
                      lambda_max: float, name: str = "h", resolution: float = 1e-3,
                      margin: float = DEFAULT_MARGIN) -> OneHandleResult:
    """Smallest translation length (to ``resolution``) for which the loxodromic with
    fixed points x1 (attracting), x2 plays ping-pong with g on the domain d."""
    for x in (x1, x2):
        if x is INF:
            raise ExtensionError("fixed points must be finite")
        if d.margin(x) < 1e-4:
            raise ExtensionError(f"point {x} is within 1e-4 of a deleted disk")
    if chordal_distance(x1, x2) < 1e-12:
        raise ExtensionError("fixed points coincide")

    def admissible(lam: float) -> bool:
        h = loxodromic_from_axis(x1, x2, lam)
        try:
            src, dst = isometric_disks(h)
        except ExtensionError:
            return False
        return all(disk_distance(a, b) >= margin for a in (src, dst) for b in d.disks) \
            and disk_distance(src, dst) >= margin

    if not admissible(lambda_max):
        raise ExtensionError(f"no admissible translation length <= {lambda_max}")
    lo, hi = 0.0, float(lambda_max)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    h = loxodromic_from_axis(x1, x2, hi)
    hg = MarkedGroup((name,), (h,))
    cert = pingpong_verify(g, d, hg, _handle_domain(h), margin)
    if not cert.accepted:
        raise ExtensionError(f"ping-pong failed: {cert.violation}")
    return OneHandleResult(cert.group, cert.domain, h, hi, cert)


# -- disk chains ------------------------------------------------------------------


@dataclass
class DiskChain:
    gamma: Moebius
    N: int
    B: Disk
    chart: Moebius
    mu: float
    phi: float
    seed: float
    strip: Strip
    disks: list = field(default_factory=list)
    points: list = field(default_factory=list)

    @property
    def period(self) -> int:
        return 4 * self.N

    def model_point(self, i: int) -> complex:
        return self.seed * self.mu ** (i / self.period) * cmath.exp(1j * self.phi)

    def model_disk(self, i: int) -> tuple[complex, float]:
        p, q = self.model_point(i), self.model_point(i + 1)
        return (p + q) / 2, abs(q - p) / 2

    def disk(self, i: int) -> Disk:
        """Delta_i for any integer i; Delta_{i+4N} = gamma(Delta_i)."""
        if 0 <= i < self.period and self.disks:
            return self.disks[i]
        c, r = self.model_disk(i)
        return image_disk(self.chart, disk_from_center(c, r))

    def point(self, i: int) -> SpherePoint:
        if 0 <= i <= self.period and self.points:
            return self.points[i]
        return apply(self.chart, self.model_point(i))

    def anchor(self, i: int) -> SpherePoint:
        """Boundary point of Delta_i a quarter turn from the chord p_i p_{i+1}."""
        c, r = self.model_disk(i)
        return apply(self.chart, c + 1j * r * cmath.exp(1j * self.phi))

    def caps(self) -> tuple[Disk, Disk]:
        """Disks around the repelling and attracting fixed points bounding one period."""
        s0 = self.seed
        inner = image_disk(self.chart, disk_from_center(0, s0))
        outer = image_disk(self.chart, exterior_of(0, s0 * self.mu))
        return inner, outer


def _chain_model(gamma: Moebius, B: Disk) -> tuple[Moebius, float, float]:
    if classify(gamma) is not MapClass.LOXODROMIC:
        raise ExtensionError("gamma must be loxodromic")
    if not invariant_disk_check(gamma, B, 1e-8):
        raise ExtensionError("B is not gamma-invariant")
    attract, repel = fixed_points(gamma)
    t = axis_chart(attract, repel)
    conj = t.inverse() @ gamma @ t
    mu = conj.a / conj.d
    if abs(mu.imag) > 1e-8 * abs(mu) or mu.real <= 1:
        raise ExtensionError("an invariant round disk needs a purely hyperbolic gamma")
    Bm = image_disk(t.inverse(), B)
    A, Bc, _ = Bm.signed_form()
    # model B is a half-plane through 0: form 2 Re(conj(Bc) w) < 0, inward normal -Bc
    phi = cmath.phase(-Bc)
    return t, mu.real, phi


def handle_count(N: int, shrink: float) -> int:
    """Handle pairs per period; disk radii scale with ``shrink``."""
    if not 0 < shrink <= 1:
        raise ExtensionError("shrink must lie in (0, 1]")
    return max(1, math.ceil(N / shrink - 1e-9))


def build_disk_chain(gamma: Moebius, B: Disk, N: int, shrink: float = 1.0,
                     seed_modulus: float = 1.0, validate: bool = True) -> DiskChain:
    """4N' tangent disks per period along the gamma-invariant ray bisecting B,
    with N' = ceil(N / shrink)."""
    if N < 1:
        raise ExtensionError("N must be at least 1")
    t, mu, phi = _chain_model(gamma, B)
    n = handle_count(N, shrink)
    q = mu ** (1 / (4 * n))
    disk_angle = math.asin((q - 1) / (q + 1))
    halfwidth = 0.5 * (disk_angle + math.pi / 2)
    core = invariant_arc(gamma, apply(t, seed_modulus * cmath.exp(1j * phi)))
    try:
        strip = invariant_strip(gamma, core, halfwidth, within=B)
    except GeometryError as exc:
        raise ExtensionError(str(exc)) from exc
    chain = DiskChain(gamma, n, B, t, mu, phi, seed_modulus, strip)
    chain.disks = [chain.disk(i) for i in range(chain.period)]
    chain.points = [chain.point(i) for i in range(chain.period + 1)]
    if validate:
        validate_chain(chain)
    return chain


@dataclass
class ChainReport:
    tangency: float
    disjointness: float
    containment: float


def validate_chain(chain: DiskChain, tol: float = CHAIN_TOL,
                   margin: float = DEFAULT_MARGIN) -> ChainReport:
    """Check tangency, disjointness and containment over three consecutive periods.

    Raises ChainValidationError naming the first failing family.
    """
    P = chain.period
    gamma = chain.gamma
    disks = {i: chain.disks[i] for i in range(P)}
    for i in range(P):
        disks[i - P] = image_disk(gamma.inverse(), chain.disks[i])
        disks[i + P] = image_disk(gamma, chain.disks[i])
    idx = sorted(disks)

    # disjointness: non-adjacent closed disks apart, adjacent ones not overlapping
    worst_gap = math.inf
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            i, j = idx[a], idx[b]
            dist = disk_distance(disks[i], disks[j])
            if j - i >= 2:
                worst_gap = min(worst_gap, dist)
                if dist < tol:
                    raise ChainValidationError("disjointness", f"Delta_{i} and Delta_{j} meet")
            elif dist < -tol:
                raise ChainValidationError("disjointness", f"Delta_{i} and Delta_{j} overlap")

    worst_tan = 0.0
    for i in range(P):
        nxt = disks[i + 1]
        p = tangency(disks[i], nxt, tol)
        if p is None:
            raise ChainValidationError("tangency", f"Delta_{i} and Delta_{i + 1} are not tangent")
        err = chordal_distance(p, chain.point(i + 1))
        worst_tan = max(worst_tan, err)
        if err > tol:
            raise ChainValidationError("tangency", f"tangency point p_{i + 1} off by {err:.3g}")

    worst_in = math.inf
    for i in range(P):
        m = containment_margin(chain.B, chain.disks[i])
        worst_in = min(worst_in, m)
        if m < margin:
            raise ChainValidationError("containment", f"Delta_{i} not inside B with margin")
        for z in chain.disks[i].boundary_points(16):
            if not chain.strip.contains(z):
                raise ChainValidationError("containment", f"Delta_{i} leaves the strip B'")
    return ChainReport(worst_tan, worst_gap, worst_in)


# -- pairings ---------------------------------------------------------------------


@dataclass
class ChainPairing:
    maps: list

    @property
    def N(self) -> int:
        return len(self.maps) // 4

    def a(self, i: int) -> Moebius:
        return self.maps[4 * i]

    def b(self, i: int) -> Moebius:
        return self.maps[4 * i + 1]


def pairing_map(chain: DiskChain, i: int) -> Moebius:
    """f_i: exterior of Delta_i onto Delta_{i+2}, p_i -> p_{i+3}, p_{i+1} -> p_{i+2}."""
    src = (chain.point(i), chain.anchor(i), chain.point(i + 1))
    dst = (chain.point(i + 3), chain.anchor(i + 2), chain.point(i + 2))
    return triple_transitive(src, dst)


def check_pairing_map(chain: DiskChain, i: int, f: Moebius, tol: float = CHAIN_TOL):
    tol = roundoff_tol(f, tol)
    if not same_disk(image_disk(f, chain.disk(i).complement()), chain.disk(i + 2), tol):
        raise ChainValidationError("pairing", f"f_{i} does not carry ext(Delta_{i}) onto Delta_{i + 2}")
    for src, dst in ((i, i + 3), (i + 1, i + 2)):
        err = chordal_distance(apply(f, chain.point(src)), chain.point(dst))
        if err > tol:
            raise ChainValidationError("pairing", f"f_{i}(p_{src}) misses p_{dst} by {err:.3g}")


def select_pairings(chain: DiskChain) -> ChainPairing:
    maps = []
    for i in range(chain.period):
        f = pairing_map(chain, i)
        check_pairing_map(chain, i, f)
        maps.append(f)
    return ChainPairing(maps)


def equivariance_defect(chain: DiskChain, pairing: ChainPairing) -> float:
    """Largest entrywise gap between the rule applied one period up (or down) and the
    gamma-conjugate of the stored pairing."""
    g, gi = chain.gamma, chain.gamma.inverse()
    worst = 0.0
    for i, f in enumerate(pairing.maps):
        for shift, conj in ((chain.period, g @ f @ gi), (-chain.period, gi @ f @ g)):
            other = pairing_map(chain, i + shift)
            e1 = np.array(other.entries())
            e2 = np.array(conj.entries())
            scale = max(1.0, float(np.abs(e1).max()))
            worst = max(worst, min(np.abs(e1 - e2).max(), np.abs(e1 + e2).max()) / scale)
    return worst


def generator_names(N: int, suffix: str = "") -> tuple:
    names = []
    for k in range(N):
        names += [f"a{k}{suffix}", f"b{k}{suffix}"]
    return tuple(names + [f"g{suffix}"])


def chain_group(chain: DiskChain, pairing: ChainPairing, suffix: str = "") -> MarkedGroup:
    maps = []
    for k in range(chain.N):
        maps += [pairing.a(k), pairing.b(k)]
    return MarkedGroup(generator_names(chain.N, suffix), maps + [chain.gamma])


def chain_domain(chain: DiskChain) -> DomainSpec:
    """Deleted disks: one period of the chain plus the two caps bounding it."""
    inner, outer = chain.caps()
    disks = list(chain.disks) + [inner, outer]
    pairing = []
    for k in range(chain.N):
        pairing += [(4 * k, 4 * k + 2), (4 * k + 1, 4 * k + 3)]
    pairing.append((chain.period, chain.period + 1))
    return DomainSpec(tuple(disks), tuple(pairing))


def commutator_word(N: int) -> Word:
    """The word fixing p_0: gamma^-1 [b_{N-1}, a_{N-1}^-1] ... [b_0, a_0^-1].

    Generators are ordered a_0, b_0, ..., a_{N-1}, b_{N-1}, gamma and [x, y] = x y x^-1 y^-1.
    """
    if N < 1:
        raise ExtensionError("N must be at least 1")
    w = [-(2 * N + 1)]
    for k in reversed(range(N)):
        a, b = 2 * k + 1, 2 * k + 2
        w += [b, -a, -b, a]
    return tuple(w)


# -- parabolic tuning ---------------------------------------------------------------


@dataclass
class ExtensionResult:
    group: MarkedGroup
    domain: DomainSpec
    chain: DiskChain
    pairing: ChainPairing
    alpha: Word
    lambda_star: float
    residual: float
    class_tol: float = CLASS_TOL
    sphere_residual: float = 0.0
    collar: Optional[CollarReport] = None
    containment: Optional["ContainmentReport"] = None
    history: list = field(default_factory=list)

    @property
    def gamma_word(self) -> Word:
        return (self.group.rank,)


def word_derivative(g: MarkedGroup, w: Word, z: SpherePoint) -> float:
    """Spherical derivative of evaluate(g, w) at z by the chain rule along the orbit of z.

    Better conditioned than differentiating the evaluated product for long words.
    """
    r = 1.0
    for x in reversed(w):
        m = letter_map(g, x)
        r *= spherical_derivative_norm(m, z)
        z = apply(m, z)
    return r


def word_roundoff(g: MarkedGroup, w: Word) -> tuple[float, float]:
    """First-order roundoff bound for the entries of the evaluated word, and its trace."""
    mats = [letter_map(g, x).matrix for x in w]
    norms = [np.linalg.norm(m, 2) for m in mats]
    prefix = [np.eye(2)]
    for m in mats:
        prefix.append(prefix[-1] @ m)
    suffix = [np.eye(2)]
    for m in reversed(mats):
        suffix.append(m @ suffix[-1])
    suffix.reverse()
    acc = sum(np.linalg.norm(prefix[k], 2) * norms[k] * np.linalg.norm(suffix[k + 1], 2)
              for k in range(len(mats)))
    return float(8 * len(mats) * np.finfo(float).eps * acc), abs(np.trace(prefix[-1]))


def trace_error_bound(g: MarkedGroup, w: Word) -> float:
    """First-order roundoff bound for trace^2 of the evaluated word."""
    err, tr = word_roundoff(g, w)
    return err * max(tr, 1.0)


def alpha_derivative(chain: DiskChain, pairing: ChainPairing, lam: float = 1.0) -> float:
    """r(lam): derivative at p_0 of the commutator product with a_0 -> c_lam o a_0."""
    g = chain_group(chain, _tuned(chain, pairing, lam))
    return word_derivative(g, commutator_word(chain.N), chain.point(0))


def _tuned(chain: DiskChain, pairing: ChainPairing, lam: float) -> ChainPairing:
    if lam == 1.0:
        return pairing
    c = c_lambda(chain.point(2), chain.point(3), lam)
    maps = list(pairing.maps)
    maps[0] = compose(c, maps[0])
    return ChainPairing(maps)


def model_chain(chain: DiskChain) -> DiskChain:
    """The same chain in its chart, where gamma is w -> mu w and p_0 sits at modulus seed."""
    k = math.sqrt(chain.mu)
    gm = Moebius(k, 0, 0, 1 / k)
    Bm = image_disk(chain.chart.inverse(), chain.B)
    return build_disk_chain(gm, Bm, chain.N, 1.0, chain.seed)  # N is already the effective count


def _model_pairing(chain: DiskChain, pairing: ChainPairing, model: DiskChain) -> ChainPairing:
    """The pairing transported to the model chain.

    The rule pairing is rebuilt in the model, which is better conditioned than
    conjugating; any other pairing is conjugated across.
    """
    rule = [pairing_map(chain, i) for i in range(chain.period)]
    if all(maps_equal(f, r, roundoff_tol(r, 1e-9)) for f, r in zip(pairing.maps, rule)):
        return select_pairings(model)
    t = model.chart @ chain.chart.inverse()
    return ChainPairing([t @ f @ t.inverse() for f in pairing.maps])


def tune_parabolic(chain: DiskChain, pairing: ChainPairing, tol: float = 1e-9,
                   suffix: str = "") -> ExtensionResult:
    """Replace a_0 by c_lambda o a_0 so that the product around p_0 has derivative 1.

    The multiplier of the product at its fixed point is a conjugacy invariant, so
    lambda and the residual are computed in the chart, where the maps are well
    conditioned even for tiny chains.
    """
    N = chain.N
    word = commutator_word(N)
    model = model_chain(chain)
    mpair = _model_pairing(chain, pairing, model)
    m0 = chain_group(model, mpair)
    q0 = model.point(0)
    if chordal_distance(apply(evaluate(m0, word), q0), q0) > 1e-8:
        raise ExtensionError("the commutator product does not fix p_0")
    lam = word_derivative(m0, word, q0) ** -0.5
    mgroup = chain_group(model, _tuned(model, mpair, lam))
    residual = abs(word_derivative(mgroup, word, q0) - 1)
    if residual > tol:
        raise ExtensionError(f"tuning residual {residual:.3g} exceeds {tol:g}")
    class_tol = max(CLASS_TOL, trace_error_bound(mgroup, word))
    cls = classify(evaluate(mgroup, word), class_tol)
    if cls is not MapClass.PARABOLIC:
        raise ExtensionError(f"tuned product is {cls.value}, not parabolic")

    tuned = _tuned(chain, pairing, lam)
    check_pairing_map(chain, 0, tuned.maps[0])
    group = chain_group(chain, tuned, suffix)
    p0 = chain.point(0)
    if chordal_distance(apply(evaluate(group, word), p0), p0) > max(1e-8, word_roundoff(group, word)[0]):
        raise ExtensionError("the tuned product does not fix p_0")
    domain = chain_domain(chain)
    validate_pairing(group, domain)
    res = ExtensionResult(group, domain, chain, tuned, word, lam, residual, class_tol)
    res.sphere_residual = abs(word_derivative(group, word, p0) - 1)
    return res


# -- collar targeting -------------------------------------------------------------------


@dataclass
class ContainmentReport:
    depth: int
    points: int
    excluded: int
    margin: float
    truncated: bool

    @property
    def ok(self) -> bool:
        return self.margin >= DEFAULT_MARGIN


def limit_set_containment(group: MarkedGroup, B: Disk, gamma: Moebius, depth: int = 6,
                          ) -> ContainmentReport:
    """Smallest chordal margin of sampled limit points inside B.

    The fixed points of gamma lie on the boundary of every gamma-invariant disk and
    are excluded from the margin.
    """
    sample = limit_set_sample(group, depth)
    xyz = sample.xyz
    fix = np.array([to_sphere(p) for p in fixed_points(gamma)])
    on_axis = np.zeros(len(xyz), dtype=bool)
    for f in fix:
        on_axis |= np.linalg.norm(xyz - f, axis=1) < 1e-9
    margins = B.margins(xyz[~on_axis])
    worst = float(margins.min()) if len(margins) else 2.0
    return ContainmentReport(depth, len(xyz), int(on_axis.sum()), worst, sample.truncated)


def extension_for(gamma: Moebius, B: Disk, N: int, shrink: float = 1.0,
                  seed_modulus: float = 1.0, suffix: str = "") -> ExtensionResult:
    chain = build_disk_chain(gamma, B, N, shrink, seed_modulus)
    return tune_parabolic(chain, select_pairings(chain), suffix=suffix)


def handle_extension(gamma: Moebius, B: Disk, N: int, L: float, collar_depth: int = 4,
                     containment_depth: int = 6, max_k: int = 20, seed_modulus: float = 1.0,
                     suffix: str = "") -> ExtensionResult:
    """Halve the disks until the depth-``collar_depth`` collar estimate reaches L."""
    if L < 0:
        raise ExtensionError("L must be nonnegative")
    history = []
    best = None
    for k in range(max_k + 1):
        try:
            res = extension_for(gamma, B, N, 2.0 ** -k, seed_modulus, suffix)
        except ExtensionError as exc:
            # finer chains eventually exhaust double precision in the tuning step
            if best is None:
                raise
            raise ExtensionError(f"collar target {L} not reached; round {k} failed ({exc}); "
                                 f"best {best.collar.width:.4g}") from exc
        res.collar = collar_estimate(res.group, res.gamma_word, collar_depth)
        history.append(res.collar.width)
        if best is None or res.collar.width > best.collar.width:
            best = res
        if res.collar.width >= L:
            res.history = history
            if containment_depth:
                res.containment = limit_set_containment(res.group, B, gamma, containment_depth)
            return res
    raise ExtensionError(
        f"collar target {L} not reached after {max_k + 1} rounds; best {best.collar.width:.4g}")
