"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import copy
import math
import time

import numpy as np
import pytest

from conftest import schottky, schottky_triples
from test_cli import CANTOR, CHAIN, ONE_HANDLE, SCHOTTKY, run, snapshot
from kleinian.cantor import (
    BilipschitzLedger, cantor_certificate, diagonal_select, ledger_compose, run_iterations,
)
from kleinian.group_engine import (
    DomainSpec, HPoint, MarkedGroup, collar_estimate, evaluate, freeness_oracle,
    injectivity_radius_witness, pingpong_verify, word_count,
)
from kleinian.handle_extension import (
    ChainValidationError, alpha_derivative, build_disk_chain, equivariance_defect, extension_for,
    handle_extension, limit_set_containment, select_pairings, validate_chain,
)
from kleinian.moebius import (
    IDENTITY, MapClass, Moebius, apply, classify, compose, loxodromic_from_axis, maps_equal,
    random_moebius, roundoff_tol, spherical_derivative_norm,
)
from kleinian.sphere_geom import disk_from_center, half_plane

DIL4 = Moebius(2, 0, 0, 0.5)
RIGHT = half_plane(0, 1)
RESULTS = []


def criterion(n, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rotation(a):
    return Moebius(math.cos(a), -math.sin(a), math.sin(a), math.cos(a))


def test_criterion_01_moebius_core():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    ok = True
    families = [
        lambda: loxodromic_from_axis(complex(*rng.normal(size=2)), complex(*rng.normal(size=2)),
                                     rng.uniform(0.1, 3), rng.uniform(-1, 1)),
        lambda: Moebius(1, complex(*rng.normal(size=2)), 0, 1),
        lambda: rotation(rng.uniform(0.1, 3)),
    ]
    expected = [MapClass.LOXODROMIC, MapClass.PARABOLIC, MapClass.ELLIPTIC]
    for i in range(1000):
        m1, m2, m3 = (random_moebius(rng, 3) for _ in range(3))
        lhs, rhs = compose(compose(m1, m2), m3), compose(m1, compose(m2, m3))
        ok &= maps_equal(lhs, rhs, roundoff_tol(lhs, 1e-9))
        ok &= maps_equal(compose(m1, m1.inverse()), IDENTITY, roundoff_tol(m1, 1e-9))
        ok &= maps_equal(compose(IDENTITY, m1), m1, 1e-12)
        z = complex(*rng.normal(size=2))
        d12 = spherical_derivative_norm(compose(m1, m2), z)
        prod = spherical_derivative_norm(m1, apply(m2, z)) * spherical_derivative_norm(m2, z)
        err = abs(d12 - prod) / prod
        worst = max(worst, err)
        ok &= err <= 1e-8
        k = i % 3
        m = families[k]()
        c = random_moebius(rng, 2)
        ok &= classify(compose(c, compose(m, c.inverse())), 1e-8) is expected[k]
    elapsed = time.perf_counter() - start
    criterion(1, ok and elapsed < 5, f"1000 cases, chain rule rel err {worst:.1e}, {elapsed:.2f}s")


def test_criterion_02_pingpong():
    start = time.perf_counter()
    g, d = schottky_triples()
    a, b = (MarkedGroup((n,), (m,)) for n, m in zip(g.names, g.maps))
    res = pingpong_verify(a, DomainSpec(d.disks[:2], ((0, 1),)), b, DomainSpec(d.disks[2:], ((0, 1),)))
    f4 = freeness_oracle(res.group, res.domain, 4)
    f5 = freeness_oracle(res.group, res.domain, 5)
    r = 4.0

    def pair(c1, c2):
        return Moebius(c2, r * r - c1 * c2, 1, -c1)
    bad = pingpong_verify(
        MarkedGroup(("a",), (pair(-3, 3),)),
        DomainSpec((disk_from_center(-3, r), disk_from_center(3, r)), ((0, 1),)),
        MarkedGroup(("b",), (pair(-3j, 3j),)),
        DomainSpec((disk_from_center(-3j, r), disk_from_center(3j, r)), ((0, 1),)))
    elapsed = time.perf_counter() - start
    ok = (res.accepted and f4.ok and f4.words_checked == 160 and word_count(2, 4) == 161
          == 1 + 4 * (3 ** 4 - 1) // 2 and f5.ok and f5.words_checked == 484
          and not bad.accepted and bad.witness is not None and elapsed < 10)
    criterion(2, ok, f"accept, words {f4.words_checked}/{f5.words_checked} at depth 4/5, "
                     f"overlap witness {bad.witness}, {elapsed:.2f}s")


def test_criterion_03_disk_chain():
    ok = True
    defects = []
    for N in (1, 2):
        chain = build_disk_chain(DIL4, RIGHT, N)
        rep = validate_chain(chain, 1e-9)
        eq = equivariance_defect(chain, select_pairings(chain))
        defects.append(max(rep.tangency, eq))
        ok &= rep.tangency <= 1e-9 and rep.disjointness > 0 and eq <= 1e-9
        for k in range(len(chain.disks)):
            bad = build_disk_chain(DIL4, RIGHT, N)
            c, r = bad.disks[k].center_radius()
            bad.disks[k] = disk_from_center(c, 1.1 * r)
            try:
                validate_chain(bad, 1e-9)
                ok = False
            except ChainValidationError:
                pass
    criterion(3, ok, f"N=1,2 certified, worst defect {max(defects):.1e}; inflated disks rejected")


@pytest.fixture(scope="module")
def ext1():
    return extension_for(DIL4, RIGHT, 1)


def test_criterion_04_parabolic_tuning(ext1):
    chain = build_disk_chain(DIL4, RIGHT, 1)
    pairing = select_pairings(chain)
    r1 = alpha_derivative(chain, pairing)
    law = max(abs(alpha_derivative(chain, pairing, lam) / (lam ** 2 * r1) - 1) for lam in (0.5, 2, 3))
    alpha = evaluate(ext1.group, ext1.alpha)
    ok = ext1.residual <= 1e-9 and law <= 1e-8 and classify(alpha) is MapClass.PARABOLIC
    criterion(4, ok, f"residual {ext1.residual:.1e}, quadratic law rel err {law:.1e}, "
                     f"alpha {classify(alpha).value}")


def test_criterion_05_containment(ext1):
    start = time.perf_counter()
    rep = limit_set_containment(ext1.group, RIGHT, DIL4, 6)
    elapsed = time.perf_counter() - start
    ok = rep.margin >= 1e-6 and not rep.truncated and elapsed < 60
    criterion(5, ok, f"{rep.points} points, margin {rep.margin:.2e}, {elapsed:.2f}s")


def test_criterion_06_collar():
    widths = {}
    ok = True
    for L in (0.25, 0.5, 1.0):
        res = handle_extension(DIL4, RIGHT, 1, L, containment_depth=0)
        widths[L] = res.collar.width
        ok &= res.collar.width >= L and res.collar.depth == 4
    schedule = [collar_estimate(r.group, r.gamma_word, 4).width
                for r in (extension_for(DIL4, RIGHT, 1, 2.0 ** -k) for k in range(4))]
    ok &= all(a <= b for a, b in zip(schedule, schedule[1:]))
    criterion(6, ok, f"widths {[round(w, 4) for w in widths.values()]}, "
                     f"schedule {[round(w, 4) for w in schedule]}")


def test_criterion_07_cantor():
    root, _, _ = run_iterations(3)
    cert = cantor_certificate(root)
    mutated = copy.deepcopy(root)
    node = mutated.children[0]
    node.children = node.children[:1]
    bad = cantor_certificate(mutated)
    ok = (root.diameter == pytest.approx(2) and cert.accepted and cert.leaves >= 8
          and cert.max_leaf_diameter <= 0.25 and not bad.accepted)
    criterion(7, ok, f"{cert.leaves} leaves, max diameter {cert.max_leaf_diameter:.4f}, "
                     f"mutation: {bad.reason}")


def test_criterion_08_ledger():
    led = BilipschitzLedger().add(1, 0.1, 0.05).add(2, 0.05, 0.02).add(3, 0.01, 0.01)
    consts = ledger_compose(led)
    exact = [(1 + s.eps) * (1 + s.zeta) for s in led.stages]
    ok = consts == exact and ledger_compose(BilipschitzLedger().add(1, 0.1, 0.05)) == [1.1 * 1.05]
    sel = diagonal_select(led, [0.2])
    ok &= sel == [1]
    criterion(8, ok, f"constants {[round(c, 4) for c in consts]}, selection {sel}")


def test_criterion_09_injectivity():
    p = HPoint(0, 1)
    near = injectivity_radius_witness(schottky(3)[0], p, 4)
    far = injectivity_radius_witness(schottky(12)[0], p, 4)
    t = 1.3
    h = loxodromic_from_axis(5, -5, t)
    # (0, 5) lies on the axis joining -5 and 5
    axis = injectivity_radius_witness(MarkedGroup(("h",), (h,)), HPoint(0, 5), 4)
    ok = far > near and abs(axis - t / 2) <= 1e-9
    criterion(9, ok, f"witness {near:.4f} -> {far:.4f}, axis case {axis:.12f} vs {t / 2}")


def test_criterion_10_determinism(tmp_path):
    pipelines = [
        ("classify", "[map]\nmap = 1 1 0 1\n"),
        ("schottky-verify", SCHOTTKY.format(depth=4)),
        ("one-handle", ONE_HANDLE),
        ("chain-extend", CHAIN),
        ("cantor-iterate", CANTOR),
    ]
    ok = True
    files = 0
    for k, (cmd, text) in enumerate(pipelines):
        rc1, out1 = run(tmp_path, cmd, text, f"{k}a")
        rc2, out2 = run(tmp_path, cmd, text, f"{k}b")
        s1, s2 = snapshot(out1), snapshot(out2)
        ok &= rc1 == rc2 == 0 and s1 == s2
        files += len(s1)
    group = tmp_path / "1a" / "group.txt"
    text = f"[render]\ngroup = {group}\ndepth = 4\nwidth = 64\nheight = 64\n"
    r1, r2 = run(tmp_path, "render", text, "ra")[1], run(tmp_path, "render", text, "rb")[1]
    ok &= snapshot(r1) == snapshot(r2)
    files += len(snapshot(r1))
    criterion(10, ok, f"6 pipelines, {files} files byte-identical on rerun")
