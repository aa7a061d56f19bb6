"""Nested handle extensions and their Cantor-set bookkeeping.

Each complementary component is tracked by its shadow on the sphere: a round
region that contains the limit data of everything installed inside it.  One
iteration places ``m >= 2`` disjoint child regions inside every leaf, each of at
most half the leaf's chordal diameter, and installs a handle extension in each.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .group_engine import (
    TRIVIAL_GROUP, DomainSpec, MarkedGroup,
    limit_set_sample, pingpong_verify,
)
from .handle_extension import ExtensionResult, handle_extension
from .moebius import loxodromic_from_axis
from .sphere_geom import (
    DEFAULT_MARGIN, Disk, chordal_diameter, containment_margin, disk_distance, disk_from_center,
)

CHILD_RING = 0.6
CHILD_RADIUS = 0.3
SHRINK_STEP = 0.8
AXIS_FRACTION = 1 / 8
STRUCTURE_FRACTION = 3.25 * AXIS_FRACTION  # caps of a seed-1/2 chain reach 3 delta


class CantorError(ValueError):
    pass


@dataclass
class NestingNode:
    region: Disk
    depth: int = 0
    children: list = field(default_factory=list)
    path: tuple = ()
    extension: Optional[ExtensionResult] = None
    structure: Optional[Disk] = None  # encloses the deleted disks of ``extension``

    @property
    def diameter(self) -> float:
        return chordal_diameter(self.region)

    @property
    def label(self) -> str:
        return ".".join(str(k) for k in self.path) or "root"

    def leaves(self) -> list:
        if not self.children:
            return [self]
        return [x for c in self.children for x in c.leaves()]

    def walk(self) -> Iterable["NestingNode"]:
        yield self
        for c in self.children:
            yield from c.walk()


def root_node(center: complex = 0, radius: float = 1.0) -> NestingNode:
    """Root region; the default unit disk has chordal diameter 2."""
    return NestingNode(disk_from_center(center, radius))


def _euclid(d: Disk) -> tuple[complex, float]:
    if d.circle.is_line or d.signed_form()[0] <= 0:
        raise CantorError("regions must be bounded Euclidean disks")
    return d.center_radius()


def place_children(node: NestingNode, m: int, obstacles: list,
                   margin: float = DEFAULT_MARGIN) -> list:
    """m disjoint sub-disks on a ring inside node.region, each of chordal diameter at
    most half the parent's and clear of the given obstacle disks."""
    c, r = _euclid(node.region)
    half = node.diameter / 2
    out = []
    for j in range(m):
        ang = math.pi / 2 + 2 * math.pi * j / m
        center = c + CHILD_RING * r * cmath.exp(1j * ang)
        rho = min(CHILD_RADIUS, CHILD_RING * math.sin(math.pi / m)) * r
        for _ in range(200):
            d = disk_from_center(center, rho)
            if (chordal_diameter(d) <= half
                    and containment_margin(node.region, d) >= margin
                    and all(disk_distance(d, o) >= margin for o in obstacles + out)):
                break
            rho *= SHRINK_STEP
        else:
            raise CantorError(f"cannot pack {m} children into node {node.label}")
        out.append(d)
    return out


def install(region: Disk, L: float, name: str, N: int = 1) -> tuple[ExtensionResult, Disk]:
    """Handle extension around a short axis at the center of a region."""
    c, r = _euclid(region)
    delta = AXIS_FRACTION * r
    gamma = loxodromic_from_axis(c + delta, c - delta, math.log(4))
    B = disk_from_center(c, delta)
    res = handle_extension(gamma, B, N, L, seed_modulus=0.5, suffix=f"[{name}]",
                           containment_depth=0)
    return res, disk_from_center(c, STRUCTURE_FRACTION * r)


def iterate_extension(group: MarkedGroup, domain: DomainSpec, leaves: list, L: float,
                      children_per_region: int = 2, N: int = 1):
    """One nesting step below every leaf.  Returns (group, domain, new leaves)."""
    if children_per_region < 2:
        raise CantorError("each region needs at least two children")
    obstacles = [n.structure for n in leaves if n.structure is not None]
    new = []
    for node in leaves:
        for j, d in enumerate(place_children(node, children_per_region, obstacles)):
            child = NestingNode(d, node.depth + 1, path=node.path + (j,))
            res, child.structure = install(d, L, child.label, N)
            child.extension = res
            cert = pingpong_verify(group, domain, res.group, res.domain)
            if not cert.accepted:
                raise CantorError(f"node {child.label}: {cert.violation}")
            group, domain = cert.group, cert.domain
            node.children.append(child)
            obstacles.append(child.structure)
            new.append(child)
    return group, domain, new


def run_iterations(n: int, L: float = 0.5, children_per_region: int = 2,
                   root: Optional[NestingNode] = None, N: int = 1):
    """n nesting steps from a single root region.  Returns (root, group, domain)."""
    root = root or root_node()
    group, domain = TRIVIAL_GROUP, DomainSpec((), ())
    leaves = [root]
    for _ in range(n):
        group, domain, leaves = iterate_extension(group, domain, leaves, L, children_per_region, N)
    return root, group, domain


# -- certificates ---------------------------------------------------------------------


@dataclass
class CantorCertificate:
    depth: int
    initial_diameter: float
    max_leaf_diameter: float
    min_branching: Optional[int]
    leaves: int
    accepted: bool
    reason: str = ""

    @property
    def verdict(self) -> str:
        return "accept" if self.accepted else "reject"


def validate_tree(root: NestingNode, margin: float = 0.0):
    for node in root.walk():
        for k, c in enumerate(node.children):
            if c.depth != node.depth + 1:
                raise CantorError(f"node {c.label} has depth {c.depth} under depth {node.depth}")
            if containment_margin(node.region, c.region) < margin:
                raise CantorError(f"node {c.label} is not inside its parent")
            for o in node.children[k + 1:]:
                if disk_distance(c.region, o.region) <= margin:
                    raise CantorError(f"nodes {c.label} and {o.label} overlap")


def cantor_certificate(root: NestingNode) -> CantorCertificate:
    """Check the finite-depth premises: diameters below 2^-n C, branching >= 2."""
    validate_tree(root)
    C = root.diameter
    leaves = root.leaves()
    n = max(x.depth for x in leaves) - root.depth
    dmax = max(x.diameter for x in leaves)
    branching = [len(x.children) for x in root.walk() if x.children]
    bmin = min(branching) if branching else None
    reason = ""
    for x in root.walk():
        if len(x.children) == 1:
            reason = f"node {x.label} has a single child"
            break
    if not reason and dmax > C * 2.0 ** -n * (1 + 1e-12):
        reason = f"leaf diameter {dmax:.6g} exceeds {C * 2.0 ** -n:.6g}"
    return CantorCertificate(n, C, dmax, bmin, len(leaves), not reason, reason)


def leaf_confinement(root: NestingNode, group: MarkedGroup, depth: int = 5,
                     margin: float = DEFAULT_MARGIN) -> dict:
    """Limit-sample bookkeeping: points per leaf, and the worst point of a parent lying
    outside both its children and its own installed structure."""
    sample = limit_set_sample(group, depth)
    xyz = sample.xyz
    per_leaf = {x.label: int((x.region.margins(xyz) > margin).sum()) for x in root.leaves()}
    stray = 0
    for node in root.walk():
        if not node.children:
            continue
        inside = node.region.margins(xyz) > margin
        covered = np.zeros(len(xyz), dtype=bool)
        for c in node.children:
            covered |= c.region.margins(xyz) > -margin
        if node.structure is not None:
            covered |= node.structure.margins(xyz) > -margin
        stray += int((inside & ~covered).sum())
    return {"points": len(xyz), "per_leaf": per_leaf, "stray": stray, "truncated": sample.truncated}


def export_tree(root: NestingNode) -> str:
    lines = []
    for node in root.walk():
        A, B, D = node.region.signed_form()
        lines.append(f"{'  ' * node.depth}{node.depth} {node.label} "
                     f"{A:.17g} {B.real:.17g} {B.imag:.17g} {D:.17g} {node.diameter:.17g}")
    return "\n".join(lines) + "\n"


# -- bilipschitz ledger --------------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    R: float
    eps: float
    zeta: float

    def __post_init__(self):
        if not (self.eps >= 0 and self.zeta >= 0 and math.isfinite(self.eps) and math.isfinite(self.zeta)):
            raise ValueError("defects must be finite and nonnegative")

    @property
    def constant(self) -> float:
        return (1 + self.eps) * (1 + self.zeta)


@dataclass
class BilipschitzLedger:
    stages: list = field(default_factory=list)

    def add(self, R: float, eps: float, zeta: float) -> "BilipschitzLedger":
        self.stages.append(Stage(R, eps, zeta))
        return self


def ledger_compose(ledger: BilipschitzLedger) -> list:
    return [s.constant for s in ledger.stages]


def diagonal_select(ledger: BilipschitzLedger, schedule) -> list:
    """For each target defect, the first stage (numbered from 1) whose composed
    constant is at most 1 + target, or None."""
    consts = ledger_compose(ledger)
    out = []
    for delta in schedule:
        out.append(next((i + 1 for i, c in enumerate(consts) if c <= 1 + delta), None))
    return out

