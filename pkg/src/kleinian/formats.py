"""Plain-text file formats: groups (with optional domains), limit samples, certificates.

Reals are written with 17 significant digits so that files round-trip exactly.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .group_engine import DomainSpec, LimitSetSample, MarkedGroup
from .moebius import INF, Moebius, SpherePoint
from .sphere_geom import Disk, disk_from_form

GROUP_VERSION = 1


class FormatError(ValueError):
    pass


def _r(x: float) -> str:
    return format(float(x), ".17g")


def format_disk(d: Disk) -> str:
    A, B, D = d.circle.A, d.circle.B, d.circle.D
    return f"{_r(A)} {_r(B.real)} {_r(B.imag)} {_r(D)} {d.side:d}"


def parse_disk(fields) -> Disk:
    if len(fields) != 5:
        raise FormatError(f"a disk needs 5 fields, got {len(fields)}")
    A, br, bi, D = (float(x) for x in fields[:4])
    return disk_from_form(A, complex(br, bi), D, int(fields[4]))


def write_group(g: MarkedGroup, domain: Optional[DomainSpec] = None) -> str:
    lines = [f"kleinian-group {GROUP_VERSION}", f"generators {g.rank}"]
    for name, m in zip(g.names, g.maps):
        vals = " ".join(f"{_r(z.real)} {_r(z.imag)}" for z in m.entries())
        lines.append(f"{name} {vals}")
    if domain is not None:
        lines.append(f"disks {len(domain.disks)}")
        lines += [format_disk(d) for d in domain.disks]
        if domain.pairing is not None:
            lines.append(f"pairing {len(domain.pairing)}")
            lines += [f"{i} {j}" for i, j in domain.pairing]
    return "\n".join(lines) + "\n"


def read_group(text: str) -> tuple[MarkedGroup, Optional[DomainSpec]]:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "kleinian-group":
        raise FormatError("missing kleinian-group header")
    if int(rows[0][1]) != GROUP_VERSION:
        raise FormatError(f"unsupported version {rows[0][1]}")
    pos = 1

    def section(key):
        nonlocal pos
        if pos >= len(rows) or rows[pos][0] != key:
            return None
        n = int(rows[pos][1])
        body = rows[pos + 1:pos + 1 + n]
        if len(body) != n:
            raise FormatError(f"section {key} is truncated")
        pos += 1 + n
        return body

    gens = section("generators")
    if gens is None:
        raise FormatError("missing generators section")
    names, maps = [], []
    for row in gens:
        if len(row) != 9:
            raise FormatError(f"generator line needs a name and 8 reals: {' '.join(row)}")
        v = [float(x) for x in row[1:]]
        names.append(row[0])
        maps.append(Moebius(complex(v[0], v[1]), complex(v[2], v[3]),
                            complex(v[4], v[5]), complex(v[6], v[7])))
    g = MarkedGroup(tuple(names), tuple(maps))
    domain = None
    disks = section("disks")
    if disks is not None:
        pairs = section("pairing")
        pairing = tuple((int(a), int(b)) for a, b in pairs) if pairs is not None else None
        domain = DomainSpec(tuple(parse_disk(r) for r in disks), pairing)
    if pos != len(rows):
        raise FormatError(f"unexpected content: {' '.join(rows[pos])}")
    return g, domain


def format_point(z: SpherePoint) -> str:
    if z is INF:
        return "inf"
    return f"{_r(z.real)} {_r(z.imag)}"


def parse_point(text: str) -> SpherePoint:
    t = text.split()
    if t == ["inf"]:
        return INF
    if len(t) != 2:
        raise FormatError(f"bad point {text!r}")
    return complex(float(t[0]), float(t[1]))


def write_points(points: Iterable[SpherePoint]) -> str:
    return "".join(format_point(z) + "\n" for z in points)


def read_points(text: str) -> list:
    return [parse_point(ln) for ln in text.splitlines() if ln.strip()]


def write_limit_set(sample: LimitSetSample) -> str:
    return write_points(sample.points)


def write_certificate(title: str, verdict: str, conditions: Iterable, extra: dict = None) -> str:
    """conditions: iterables of (name, margin, depth[, witness])."""
    lines = [f"certificate {title}", f"verdict {verdict}"]
    for c in conditions:
        name, margin, depth, *rest = c
        wit = f" | {rest[0]}" if rest and rest[0] else ""
        lines.append(f"condition {name} | margin {_r(margin)} | depth {depth}{wit}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} {_r(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"
