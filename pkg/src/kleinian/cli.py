"""Command line driver: ``kleinian <pipeline> --config FILE --out DIR``.

Exit codes: 0 accept, 1 usage or I/O error, 2 reject, 3 word budget truncated.
Configs are INI files; see the README for the keys of each pipeline.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from . import __version__
from .cantor import cantor_certificate, export_tree, leaf_confinement, root_node, run_iterations
from .group_engine import (
    MAX_WORDS, DomainSpec, MalformedPairing, MarkedGroup, freeness_oracle, limit_set_sample,
    pingpong_verify, validate_pairing, word_count,
)
from .formats import FormatError, read_group, write_certificate, write_group, write_limit_set
from .handle_extension import ExtensionError, attach_one_handle, handle_extension
from .moebius import INF, Moebius, MoebiusError, classify, fixed_points, loxodromic_from_axis
from .render import RenderError, Scene, default_scene, render, write_ppm
from .sphere_geom import (
    DEFAULT_MARGIN, Disk, GeometryError, disk_distance, disk_from_center, exterior_of, half_plane,
)

EXIT_ACCEPT, EXIT_ERROR, EXIT_REJECT, EXIT_TRUNCATED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- config helpers -------------------------------------------------------------------


def _complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    if t.lower() in ("inf", "infinity"):
        raise UsageError("infinity is not allowed here")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def _point(text: str):
    return INF if text.strip().lower() in ("inf", "infinity") else _complex(text)


def _map(text: str) -> Moebius:
    parts = text.split()
    if len(parts) != 4:
        raise UsageError(f"a map needs four complex entries a b c d, got {text!r}")
    return Moebius(*(_complex(p) for p in parts))


def _read_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc}") from None
    return cfg


def _section(cfg, name):
    if not cfg.has_section(name):
        raise UsageError(f"config lacks a [{name}] section")
    return cfg[name]


def _disk(sec) -> Disk:
    kind = sec.get("kind", "disk")
    if kind == "disk":
        return disk_from_center(_complex(sec["center"]), float(sec["radius"]))
    if kind == "exterior":
        return exterior_of(_complex(sec["center"]), float(sec["radius"]))
    if kind == "half-plane":
        return half_plane(_complex(sec.get("point", "0")), _complex(sec["normal"]))
    raise UsageError(f"unknown disk kind {kind!r}")


def schottky_from_config(cfg) -> tuple[MarkedGroup, DomainSpec]:
    """[disk NAME] sections and [generator NAME] sections with from/to disk names.

    Without an explicit ``map`` the generator is z -> c' + r r' / (z - c), which
    carries the exterior of the first disk onto the second.
    """
    disk_names = [s.split(None, 1)[1] for s in cfg.sections() if s.startswith("disk ")]
    disks = [_disk(cfg[f"disk {n}"]) for n in disk_names]
    names, maps, pairing = [], [], []
    for s in cfg.sections():
        if not s.startswith("generator "):
            continue
        sec = cfg[s]
        try:
            i, j = disk_names.index(sec["from"]), disk_names.index(sec["to"])
        except (KeyError, ValueError):
            raise UsageError(f"[{s}] needs from/to naming [disk ...] sections") from None
        if "map" in sec:
            m = _map(sec["map"])
        else:
            c, r = disks[i].center_radius()
            c2, r2 = disks[j].center_radius()
            m = Moebius(c2, r * r2 - c * c2, 1, -c)
        names.append(s.split(None, 1)[1])
        maps.append(m)
        pairing.append((i, j))
    if not names:
        raise UsageError("no [generator ...] sections")
    return MarkedGroup(tuple(names), tuple(maps)), DomainSpec(tuple(disks), tuple(pairing))


# -- outputs ---------------------------------------------------------------------------


def _write(out: Path, name: str, text):
    out.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(out / name, mode) as fh:
        fh.write(text)


def _image(out: Path, name: str, scene: Scene):
    out.mkdir(parents=True, exist_ok=True)
    write_ppm(out / name, render(scene))


def _scene_from(cfg, points, disks) -> Scene:
    sec = cfg["render"] if cfg.has_section("render") else {}
    view = sec.get("view", "plane")
    width = int(sec.get("width", 512))
    height = int(sec["height"]) if "height" in sec else None
    return default_scene(points, disks, view, width, height,
                         _complex(sec.get("center", "0")), float(sec.get("half_width", 2.0)))


# -- pipelines ---------------------------------------------------------------------------


def run_classify(cfg, out: Path, args) -> int:
    m = _map(_section(cfg, "map")["map"])
    cls = classify(m, args.tol if args.tol is not None else 1e-9)
    lines = [f"class {cls.value}", f"trace {m.trace.real:.17g} {m.trace.imag:.17g}"]
    if cls.value != "identity":
        for p in fixed_points(m):
            lines.append("fixed " + ("inf" if p is INF else f"{p.real:.17g} {p.imag:.17g}"))
    _write(out, "classify.txt", "\n".join(lines) + "\n")
    print(lines[0])
    return EXIT_ACCEPT


def run_schottky(cfg, out: Path, args) -> int:
    g, d = schottky_from_config(cfg)
    depth = args.depth if args.depth is not None else int(cfg.get("schottky", "depth", fallback=5))
    try:
        validate_pairing(g, d, args.tol if args.tol is not None else 1e-8)
    except MalformedPairing as exc:
        _write(out, "certificate.txt", write_certificate("schottky", "reject", [("pairing", -1.0, 0, str(exc))]))
        print(f"reject: {exc}")
        return EXIT_REJECT
    # the deleted disks must be pairwise disjoint, then combine one generator at a time
    conds, verdict = [], "accept"
    gap, witness = 2.0, ""
    for i in range(len(d.disks)):
        for j in range(i + 1, len(d.disks)):
            dist = disk_distance(d.disks[i], d.disks[j])
            if dist < gap:
                gap, witness = dist, f"disks {i} and {j}"
    conds.append(("disjoint disks", gap, 0, witness if gap < DEFAULT_MARGIN else ""))
    if gap < DEFAULT_MARGIN:
        _write(out, "certificate.txt", write_certificate("schottky", "reject", conds))
        print(f"reject: {witness} meet")
        return EXIT_REJECT
    acc_g, acc_d = MarkedGroup((), ()), DomainSpec((), ())
    for k, (name, m) in enumerate(zip(g.names, g.maps)):
        i, j = d.pairing[k]
        res = pingpong_verify(acc_g, acc_d, MarkedGroup((name,), (m,)),
                              DomainSpec((d.disks[i], d.disks[j]), ((0, 1),)))
        conds.append((f"ping-pong adding {name}", res.margin, 0, res.violation or ""))
        if not res.accepted:
            verdict = "reject"
            break
        acc_g, acc_d = res.group, res.domain
    truncated = False
    if verdict == "accept":
        rep = freeness_oracle(acc_g, acc_d, depth)
        truncated = rep.truncated
        conds.append(("freeness", 1.0 if rep.ok else -1.0, depth,
                      f"{rep.words_checked} words" + (f", violation {rep.violation_text}" if not rep.ok else "")))
        if not rep.ok:
            verdict = "reject"
        elif truncated:
            verdict = "truncated"
        _write(out, "group.txt", write_group(acc_g, acc_d))
        sample = limit_set_sample(acc_g, min(depth, 8))
        _write(out, "limit.txt", write_limit_set(sample))
        _image(out, "limit.ppm", _scene_from(cfg, sample.xyz, acc_d.disks))
    _write(out, "certificate.txt", write_certificate("schottky", verdict, conds))
    print(verdict)
    return {"accept": EXIT_ACCEPT, "reject": EXIT_REJECT, "truncated": EXIT_TRUNCATED}[verdict]


def run_one_handle(cfg, out: Path, args) -> int:
    g, d = schottky_from_config(cfg)
    sec = _section(cfg, "handle")
    try:
        res = attach_one_handle(g, d, _complex(sec["x1"]), _complex(sec["x2"]),
                                float(sec["lambda_max"]), sec.get("name", "h"))
    except ExtensionError as exc:
        _write(out, "certificate.txt", write_certificate("one-handle", "reject", [("admissible length", -1.0, 0, str(exc))]))
        print(f"reject: {exc}")
        return EXIT_REJECT
    depth = args.depth if args.depth is not None else int(sec.get("depth", 4))
    rep = freeness_oracle(res.group, res.domain, depth)
    verdict = "accept" if rep.ok and not rep.truncated else ("reject" if not rep.ok else "truncated")
    conds = [("ping-pong", res.certificate.margin, 0), ("freeness", 1.0 if rep.ok else -1.0, depth,
                                                       f"{rep.words_checked} words")]
    _write(out, "group.txt", write_group(res.group, res.domain))
    _write(out, "certificate.txt", write_certificate("one-handle", verdict, conds, {"lambda": res.length}))
    print(verdict)
    return {"accept": EXIT_ACCEPT, "reject": EXIT_REJECT, "truncated": EXIT_TRUNCATED}[verdict]


def _chain_inputs(sec):
    if "gamma" in sec:
        gamma = _map(sec["gamma"])
    else:
        gamma = loxodromic_from_axis(_point(sec["attract"]), _point(sec["repel"]), float(sec["length"]))
    if "b_normal" in sec:
        B = half_plane(_complex(sec.get("b_point", "0")), _complex(sec["b_normal"]))
    else:
        B = disk_from_center(_complex(sec["b_center"]), float(sec["b_radius"]))
    return gamma, B


def run_chain(cfg, out: Path, args) -> int:
    sec = _section(cfg, "chain")
    gamma, B = _chain_inputs(sec)
    depth = args.depth if args.depth is not None else int(sec.get("collar_depth", 4))
    try:
        res = handle_extension(gamma, B, int(sec.get("N", 1)), float(sec.get("L", 0.5)),
                               collar_depth=depth, containment_depth=int(sec.get("containment_depth", 6)))
    except ExtensionError as exc:
        _write(out, "report.txt", write_certificate("chain-extend", "reject", [("extension", -1.0, 0, str(exc))]))
        print(f"reject: {exc}")
        return EXIT_REJECT
    c = res.containment
    truncated = res.collar.truncated or c.truncated
    verdict = "reject" if not c.ok else ("truncated" if truncated else "accept")
    conds = [("tuning residual", 1e-9 - res.residual, 0),
             ("collar", res.collar.width - float(sec.get("L", 0.5)), res.collar.depth),
             ("limit set in B", c.margin, c.depth, f"{c.points} points, {c.excluded} on the axis")]
    extra = {"lambda_star": res.lambda_star, "residual": res.residual, "collar": res.collar.width,
             "handles": res.chain.N, "history": " ".join(f"{h:.17g}" for h in res.history)}
    _write(out, "group.txt", write_group(res.group, res.domain))
    _write(out, "report.txt", write_certificate("chain-extend", verdict, conds, extra))
    sample = limit_set_sample(res.group, int(sec.get("image_depth", 6)))
    _image(out, "limit.ppm", _scene_from(cfg, sample.xyz, list(res.chain.disks) + [B]))
    print(verdict)
    return {"accept": EXIT_ACCEPT, "reject": EXIT_REJECT, "truncated": EXIT_TRUNCATED}[verdict]


def run_cantor(cfg, out: Path, args) -> int:
    sec = _section(cfg, "cantor")
    n = int(sec.get("iterations", 3))
    root = root_node(_complex(sec.get("center", "0")), float(sec.get("radius", 1.0)))
    root, g, d = run_iterations(n, float(sec.get("L", 0.5)), int(sec.get("children", 2)), root)
    cert = cantor_certificate(root)
    conds = [("leaf diameter", cert.initial_diameter * 2.0 ** -cert.depth - cert.max_leaf_diameter, cert.depth),
             ("branching", (cert.min_branching or 2) - 1.5, cert.depth)]
    extra = {"leaves": cert.leaves, "max_leaf_diameter": cert.max_leaf_diameter, "generators": g.rank}
    depth = args.depth if args.depth is not None else int(sec.get("limit_depth", 0))
    if depth and word_count(g.rank, depth) <= MAX_WORDS:
        conf = leaf_confinement(root, g, depth)
        conds.append(("limit points confined", 1.0 if conf["stray"] == 0 else -1.0, depth,
                      f"{conf['points']} points"))
    verdict = "accept" if cert.accepted and all(c[1] > 0 for c in conds) else "reject"
    _write(out, "tree.txt", export_tree(root))
    _write(out, "group.txt", write_group(g, d))
    _write(out, "certificate.txt", write_certificate("cantor", verdict, conds, extra))
    sc = _scene_from(cfg, None, [x.region for x in root.walk()])
    _image(out, "tree.ppm", sc)
    print(verdict)
    return EXIT_ACCEPT if verdict == "accept" else EXIT_REJECT


def run_render(cfg, out: Path, args) -> int:
    sec = _section(cfg, "render")
    try:
        with open(sec["group"]) as fh:
            g, d = read_group(fh.read())
    except KeyError:
        raise UsageError("[render] needs a group file") from None
    except OSError as exc:
        raise UsageError(f"cannot read group file: {exc.strerror}") from None
    depth = args.depth if args.depth is not None else int(sec.get("depth", 6))
    sample = limit_set_sample(g, depth)
    disks = list(d.disks) if d is not None else []
    _image(out, sec.get("image", "render.ppm"), _scene_from(cfg, sample.xyz, disks))
    _write(out, "limit.txt", write_limit_set(sample))
    print("truncated" if sample.truncated else "accept")
    return EXIT_TRUNCATED if sample.truncated else EXIT_ACCEPT


PIPELINES = {
    "classify": run_classify,
    "schottky-verify": run_schottky,
    "one-handle": run_one_handle,
    "chain-extend": run_chain,
    "cantor-iterate": run_cantor,
    "render": run_render,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kleinian", description="Kleinian group constructions and certificates")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in PIPELINES:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--depth", type=int)
        s.add_argument("--tol", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _read_config(args.config)
        return PIPELINES[args.command](cfg, Path(args.out), args)
    except (UsageError, FormatError, KeyError, ValueError, MoebiusError, GeometryError,
            RenderError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
