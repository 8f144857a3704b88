"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(also collected into the pytest terminal summary).

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import itertools
import math
import os
import random
import time
from contextlib import contextmanager

import numpy as np

from conftest import ACCEPTANCE_LINES, fixture_path
from helpers import (
    brute_force_h2_count,
    closure_orbits,
    crossed_module_mutants,
    groupoid_mutants,
    random_cover,
)

from etalebench import bundles as B
from etalebench import cli
from etalebench import developable as D
from etalebench import extensions as X
from etalebench import groupoid as GD
from etalebench import loops as L
from etalebench.geometry import Flat, Sphere, enumerate_isometries, reflection, rotation_z, translation
from etalebench.groups import cyclic, dihedral, direct_product, symmetric
from etalebench.specfile import Loader


class Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.details = []
        self.failures = []

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)
        return ok

    def note(self, text):
        self.details.append(text)


@contextmanager
def criterion(number, title, budget):
    c = Criterion(number, title, budget)
    start = time.perf_counter()
    error = None
    try:
        yield c
    except Exception as exc:  # reported, then re-raised
        error = exc
        c.failures.append("%s: %s" % (type(exc).__name__, exc))
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        c.failures.append("took %.2f s, budget %.0f s" % (elapsed, budget))
    status = "FAIL" if c.failures else "PASS"
    info = "; ".join(c.failures[:3] if c.failures else c.details)
    line = "criterion %d: %s %s (%.2f s) %s" % (number, status, title, elapsed, info)
    ACCEPTANCE_LINES.append(line)
    print(line)
    if error is not None:
        raise error
    assert not c.failures, line


def load(name):
    return Loader().load(fixture_path(name))


GROUPOID_FIXTURES = ["A.yaml", "PT.yaml", "C4.yaml", "Z3cycle.yaml", "pair2.yaml"]


# -- 1 ----------------------------------------------------------------------


def test_criterion_01_groupoid_axioms():
    with criterion(1, "groupoid axiom suite", 5) as c:
        rng = np.random.default_rng(2024)
        gs = []
        for i in range(100):
            G = GD.random_groupoid(rng) if i % 2 == 0 else GD.random_action_groupoid(rng)
            c.check(len(G.objects) <= 8 and len(G.arrows) <= 64, "random groupoid %d too large" % i)
            gs.append(("random %d" % i, G))
        gs += [(name, load(name)) for name in GROUPOID_FIXTURES]
        mutants = 0
        for label, G in gs:
            errs = GD.validate_groupoid(G)
            c.check(not errs, "%s rejected: %s" % (label, errs[:1]))
            for kind, M in groupoid_mutants(G, rng):
                mutants += 1
                c.check(GD.validate_groupoid(M), "%s mutant %s undetected" % (label, kind))
        bad = load("pair2_bad.yaml")
        c.check(GD.validate_groupoid(bad), "pair2_bad fixture accepted")
        c.note("%d groupoids valid, %d mutants detected" % (len(gs), mutants))


# -- 2 ----------------------------------------------------------------------


def test_criterion_02_localization_equivalence():
    with criterion(2, "localization equivalence", 5) as c:
        rng = np.random.default_rng(7)
        for i in range(50):
            G = GD.random_action_groupoid(rng)
            U = random_cover(G, rng)
            loc = GD.localize(G, U)
            check = GD.is_equivalence_hom(loc.proj)
            c.check(check.ok, "pair %d: %s" % (i, check.witness))
            c.check(len(GD.orbits(loc.groupoid)) == len(closure_orbits(G)),
                    "pair %d: orbit count changed" % i)
            c.check(not GD.validate_groupoid(loc.groupoid), "pair %d: G_U invalid" % i)
        c.note("50 random (G, cover) pairs")


# -- 3 ----------------------------------------------------------------------


def _fixture_pointed_bundles(A, PT, C4):
    out = []
    for G, H, star in ((A, A, 1), (A, A, 0), (A, PT, 1), (PT, A, "*"), (C4, A, 0)):
        out += [("%s->%s #%d" % (G.name, H.name, mc.index), mc.pointed)
                for mc in B.enumerate_pointed_morphisms(G, H, star)]
    for G, star in ((A, 1), (A, 0), (C4, 0), (PT, "*")):
        out.append(("unit %s@%r" % (G.name, star), B.PointedBundle(B.unit_bundle(G), G.unit[star], star)))
    loc = GD.localize(C4, GD.OpenCover([[0, 1], [1, 2], [2, 3], [3, 0]]))
    phi = _c4_cocycle(loc.groupoid, A)
    P = B.bundle_from_cocycle(phi, loc.cover, 0, 0)
    assert len(GD.components(P.bundle.elements, P.bundle.edges)) == 1, "C4 cocycle should be twisted"
    out.append(("C4 cocycle", P))
    return out


def _c4_cocycle(CU, A):
    """Cocycle on the edge cover of C4 into A with one nontrivial transition:
    pieces i = {i, i+1}; object (i, x) -> 0, arrow (j, 1_x, i) -> (1, 0)
    exactly when {i, j} = {3, 0} and i != j."""
    omap = {o: 0 for o in CU.objects}
    amap = {}
    for a in CU.arrows:
        j, _, i = a
        amap[a] = (1, 0) if {i, j} == {0, 3} else (0, 0)
    return GD.GroupoidHom(CU, A, omap, amap)


def test_criterion_03_pointed_uniqueness(A, PT, C4):
    with criterion(3, "pointed automorphisms are trivial", 10) as c:
        bundles = _fixture_pointed_bundles(A, PT, C4)
        rng = random.Random(3)
        for label, P in bundles:
            c.check(P.bundle.right.is_connected(), "%s: base not connected" % label)
            c.check(not B.validate_bundle(P.bundle), "%s: invalid bundle" % label)
            autos = B.pointed_automorphisms_bruteforce(P)
            c.check(len(autos) == 1, "%s: %d pointed automorphisms" % (label, len(autos)))
            c.check(autos and all(k == v for k, v in autos[0].items()), "%s: automorphism is not the identity" % label)
        # order independence: a relabelled copy, 20 shuffled propagation orders
        for label, P in bundles[::7]:
            Q = _relabelled(P)
            ref = B.pointed_isomorphism(P, Q)
            c.check(ref is not None, "%s: relabelled copy not isomorphic" % label)
            for _ in range(20):
                c.check(B.pointed_isomorphism(P, Q, rng) == ref, "%s: order-dependent result" % label)
        c.note("%d pointed bundles, 20 orders each on %d" % (len(bundles), len(bundles[::7])))


def _relabelled(P):
    E = P.bundle
    r = {e: ("copy", i) for i, e in enumerate(reversed(E.elements))}
    F = B.Bundle(E.left, E.right, [r[e] for e in E.elements],
                 {r[e]: E.s[e] for e in E.elements}, {r[e]: E.t[e] for e in E.elements},
                 {(k, r[e]): r[f] for (k, e), f in E.left_act.items()},
                 {(r[e], g): r[f] for (e, g), f in E.right_act.items()},
                 [frozenset(r[e] for e in pair) for pair in E.edges], name="copy")
    return B.PointedBundle(F, r[P.basepoint], P.star)


# -- 4 ----------------------------------------------------------------------

# Frozen from the exhaustive pair enumeration (enumerate_equivariant_pairs,
# a plain product over Hom(Γ, Γ') × (X')^X).
PAIR_COUNTS = {
    ("A", 1): 10,
    ("A", 0): 10,
    ("tree-seed5", 0): 64,
    ("tree-seed10", 0): 312,
}


def test_criterion_04_developable_bijection(A):
    with criterion(4, "pointed morphisms = equivariant pairs", 60) as c:
        cases = [("A", A, 1), ("A", A, 0)]
        for s in (5, 10):
            G = D.random_tree_action(np.random.default_rng(s), name="tree-seed%d" % s)
            c.check(len(G.action[0]) <= 4 and len(G.objects) <= 5 and G.base.is_tree(), "seed %d out of range" % s)
            cases.append((G.name, G, G.objects[0]))
        for name, G, star in cases:
            pairs = D.enumerate_equivariant_pairs(G, G, star)
            c.check(len(pairs) == PAIR_COUNTS[name, star], "%s: %d pairs, frozen %d" % (name, len(pairs), PAIR_COUNTS[name, star]))
            space = B.MorphismSpace(G, G, star)
            c.check(len(space) == len(pairs), "%s: %d classes vs %d pairs" % (name, len(space), len(pairs)))
            image = D.pair_class_map(pairs, space)
            c.check(sorted(image) == list(range(len(space))), "%s: pair map is not a bijection" % name)
            orbit_pairs = len(D.pair_orbits(pairs, G))
            c.check(orbit_pairs == len(GD.orbits(space.groupoid)), "%s: orbit counts differ" % name)
            c.note("%s@%r: %d" % (name, star, len(pairs)))


# -- 5 ----------------------------------------------------------------------


def test_criterion_05_morphisms_of_a_point(PT):
    with criterion(5, "Mor(PT, G') is G'", 5) as c:
        for name in ("A.yaml", "Z3cycle.yaml", "C4.yaml", "pair2.yaml"):
            G2 = load(name)
            space = B.MorphismSpace(PT, G2, "*")
            M = space.groupoid
            iso = GD.isomorphic(M, G2)
            c.check(iso is not None, "%s: not isomorphic" % name)
            # the class of a pointed bundle over * is the target of its basepoint
            anchor = {z: space.classes[z].target_anchor for z in M.objects}
            c.check(sorted(anchor.values(), key=repr) == sorted(G2.objects, key=repr), "%s: anchors" % name)
            c.check({frozenset(anchor[x] for x in e) for e in M.edges} == set(G2.edges), "%s: topology differs" % name)
            c.check(not GD.etale_defects(M), "%s: Mor not étale" % name)
        c.note("A, Z3cycle, C4, pair2")


# -- 6 ----------------------------------------------------------------------


def _round_trip(c, label, P, H, G, space):
    cur = B.curry_morphism(P, H, G, space)
    c.check(not cur.psi.functor_defects() and not cur.psi.continuity_defects(), "%s: curried map not continuous" % label)
    Q = B.uncurry_morphism(cur.psi, H, space)
    c.check(not B.validate_bundle(Q), "%s: uncurried bundle invalid" % label)
    v0 = H.objects[0]
    i0 = cur.cover.first_piece(v0)
    z0 = cur.psi.obj_map[i0, v0]
    P0 = B.PointedBundle(P, cur.sections[i0, v0], (v0, space.star))
    Q0 = B.PointedBundle(Q, (v0, space.classes[z0].pointed.basepoint), (v0, space.star))
    c.check(B.pointed_isomorphism(P0, Q0) is not None, "%s: uncurry∘curry not pointed-isomorphic" % label)
    again = B.curry_morphism(Q, H, G, space, cur.cover)
    c.check(GD.find_natural_transformation(cur.psi, again.psi) is not None,
            "%s: curry∘uncurry not naturally isomorphic" % label)


def test_criterion_06_curry_round_trip(A, PT, C4):
    with criterion(6, "curry/uncurry round trip", 30) as c:
        # fixture 1: H = G = G' = A, P the bundle of the projection A×A -> A
        HG = B.product_of(A, A)
        pr = GD.GroupoidHom(HG, A, {o: o[1] for o in HG.objects}, {a: a[1] for a in HG.arrows})
        _round_trip(c, "A×A", B.bundle_of_hom(pr), A, A, B.MorphismSpace(A, A, 1))
        # fixture 2: every pointed class of C4×PT -> A
        HG = B.product_of(C4, PT)
        space = B.MorphismSpace(PT, A, "*")
        classes = B.enumerate_pointed_morphisms(HG, A, (0, "*"))
        for mc in classes:
            _round_trip(c, "C4×PT #%d" % mc.index, mc.pointed.bundle, C4, PT, space)
        c.note("A×A projection and %d bundles on C4×PT" % len(classes))


# -- 7 ----------------------------------------------------------------------


def _random_flat_loop(rng, N=16):
    twist = translation(rng.uniform(-1, 1, 2))
    return L.straight_seed(Flat(2), twist, N, rng, amplitude=0.2)


def _random_sphere_loop(rng, N=32):
    angle = 2 * math.pi / int(rng.integers(1, 5))
    twist = rotation_z(angle)
    if twist.is_identity():
        return L.great_circle_seed(Sphere(), twist, N, rng, amplitude=0.1)
    return L.seed_loop(Sphere(), twist, N, rng, amplitude=0.1)


def test_criterion_07_chart_machinery():
    with criterion(7, "chart round trip and gradient", 30) as c:
        rng = np.random.default_rng(11)
        worst = {"flat": 0.0, "sphere": 0.0}
        for i in range(1000):
            loop = _random_flat_loop(rng) if i % 2 == 0 else _random_sphere_loop(rng)
            G = loop.geometry
            eps = L.chart_epsilon(loop)
            radius = min(eps, 1.0) * rng.uniform(0.05, 0.95)
            raw = rng.normal(size=loop.samples.shape)
            nu = G.project(loop.samples, raw)
            nu *= radius / L.sup_norm(nu)
            back = L.chart_log(loop, L.chart_apply(loop, nu, eps))
            worst[G.kind] = max(worst[G.kind], float(np.max(np.abs(back - nu))))
        c.check(worst["flat"] <= 1e-12, "flat round trip %.3g" % worst["flat"])
        c.check(worst["sphere"] <= 1e-10, "sphere round trip %.3g" % worst["sphere"])
        rel = 0.0
        for i in range(100):
            loop = _random_flat_loop(rng, 12) if i % 2 == 0 else _random_sphere_loop(rng, 16)
            g = L.energy_gradient(loop)
            fd = L.finite_difference_gradient(loop)
            rel = max(rel, float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300)))
        c.check(rel <= 1e-5, "gradient relative error %.3g" % rel)
        c.note("round trip flat %.1e sphere %.1e, gradient %.1e" % (worst["flat"], worst["sphere"], rel))


# -- 8 ----------------------------------------------------------------------


def test_criterion_08_geodesic_lengths():
    # Flat descent at N=256 is ill-conditioned (~N^2); a gradient tolerance
    # of 1e-4 already pins the length far inside 1e-3.
    with criterion(8, "geodesic lengths", 60) as c:
        loader = Loader()
        torus = loader.load(fixture_path("torus.yaml"))
        mirror = loader.load(fixture_path("mirror.yaml"))
        sphere = loader.load(fixture_path("sphere_z3.yaml"))
        runs = [(torus, "a", 1.0), (torus, "a*b", math.sqrt(2)), (torus, "a^3*b^4", 5.0),
                (mirror, "b*a", 2.0)]
        for orb, word, expect in runs:
            t = time.perf_counter()
            row = L.length_spectrum(orb.group, orb.geometry, [orb.group.element(word)],
                                    samples=256, grad_tol=1e-4, max_iter=40000)[0]
            dt = time.perf_counter() - t
            c.check(abs(row.min_length - expect) <= 1e-3, "%s: %.6f vs %.6f" % (word, row.min_length, expect))
            c.check(dt < 10, "%s took %.1f s" % (word, dt))
            c.check(not row.degenerate, "%s flagged degenerate" % word)
            c.note("%s=%.6f" % (word, row.min_length))
        t = time.perf_counter()
        row = L.length_spectrum(sphere.group, sphere.geometry, [sphere.group.element("id")], samples=128)[0]
        dt = time.perf_counter() - t
        c.check(abs(row.min_length - 2 * math.pi) <= 1e-3, "sphere id: %.6f" % row.min_length)
        c.check(dt < 10, "sphere took %.1f s" % dt)
        c.note("sphere id=%.6f" % row.min_length)


# -- 9 ----------------------------------------------------------------------


def test_criterion_09_conjugation_invariance():
    with criterion(9, "isometry-conjugation invariance", 60) as c:
        rng = np.random.default_rng(9)
        mirror = enumerate_isometries({"a": reflection([1, 0]), "b": reflection([1, 0], 1.0),
                                       "c": reflection([0, 1]), "d": reflection([0, 1], 1.0)}, 4)
        worst_e = 0.0
        for _ in range(50):
            loop = _random_flat_loop(rng, 24)
            g = mirror.elements[int(rng.integers(0, len(mirror)))]
            worst_e = max(worst_e, abs(L.loop_energy(L.conjugate_loop(g, loop)) - L.loop_energy(loop)))
            loop = _random_sphere_loop(rng, 24)
            h = rotation_z(rng.uniform(0, 2 * math.pi)).compose(reflection([1.0, 2.0, 0.5]))
            worst_e = max(worst_e, abs(L.loop_energy(L.conjugate_loop(h, loop)) - L.loop_energy(loop)))
        c.check(worst_e <= 1e-12, "energy changed by %.3g" % worst_e)
        opts = dict(grad_tol=1e-6, max_iter=20000)
        pairs = [(L.straight_seed(Flat(2), mirror.element("b*a"), 64, np.random.default_rng(1)), mirror.element("c")),
                 (L.straight_seed(Flat(2), mirror.element("d*c"), 64, np.random.default_rng(2)), mirror.element("a*b")),
                 (L.great_circle_seed(Sphere(), rotation_z(0.0), 64, np.random.default_rng(3)),
                  rotation_z(0.7).compose(reflection([0.0, 1.0, 1.0])))]
        worst_l = 0.0
        for loop, g in pairs:
            _, r1 = L.minimize_energy(loop, **opts)
            _, r2 = L.minimize_energy(L.conjugate_loop(g, loop), **opts)
            worst_l = max(worst_l, abs(r1.length - r2.length))
        c.check(worst_l <= 1e-6, "minimized lengths differ by %.3g" % worst_l)
        c.note("energy %.1e, length %.1e" % (worst_e, worst_l))


# -- 10 ---------------------------------------------------------------------

# Every group the package can build with |Q|·|N| <= 24, up to the obvious
# duplicates (dihedral(2) is the Klein group, dihedral(3) is S3).
def _group_menu():
    out = [cyclic(n) for n in range(1, 25)]
    out += [dihedral(k) for k in (2, 4, 5, 6)]
    out += [symmetric(3), symmetric(4)]
    out += [direct_product(cyclic(2), cyclic(4)), direct_product(cyclic(3), cyclic(3)),
            direct_product(dihedral(2), cyclic(2)), direct_product(cyclic(2), cyclic(6)),
            direct_product(symmetric(3), cyclic(2)), direct_product(dihedral(2), cyclic(3)),
            direct_product(symmetric(3), cyclic(3)), direct_product(dihedral(4), cyclic(2))]
    return [g for g in out if len(g) <= 24]


def test_criterion_10_extensions():
    with criterion(10, "extension classification and obstruction", 120) as c:
        for Q, C, expect in ((cyclic(2), cyclic(2), 2), (cyclic(3), cyclic(3), 3), (cyclic(2), cyclic(3), 1)):
            classes = X.classify_extensions(Q, C)
            c.check(len(classes) == expect, "%s by %s: %d classes" % (Q.name, C.name, len(classes)))
            c.check(brute_force_h2_count(Q, C) == expect, "%s by %s: oracle disagrees" % (Q.name, C.name))
            for e in classes:
                c.check(not e.group.validate(), "realized extension of %s by %s invalid" % (Q.name, C.name))
                c.check(len(e.group) == len(Q) * len(C), "realized extension has wrong order")
        orders = sorted(len(e.group.center) for e in X.classify_extensions(cyclic(2), cyclic(2)))
        c.check(orders == [4, 4], "Z/2 by Z/2 realizations should be abelian")
        menu = _group_menu()
        cases = vanish = 0
        for Q in menu:
            for N in menu:
                if len(Q) * len(N) > 24:
                    continue
                for psi in X.outer_homs(Q, N):
                    cases += 1
                    ob = X.extension_obstruction(Q, N, psi)
                    ext = X.find_extension_with_outer_action(Q, N, psi)
                    vanish += ob.vanishes
                    c.check(ob.vanishes == (ext is not None), "%s, %s: flag disagrees" % (Q.name, N.name))
                    if ext is not None:
                        c.check(not ext.validate(), "%s, %s: oracle extension invalid" % (Q.name, N.name))
        c.note("counts 2/3/1; %d obstruction cases (%d vanish)" % (cases, vanish))


# -- 11 ---------------------------------------------------------------------


def test_criterion_11_crossed_modules():
    with criterion(11, "crossed-module axioms", 5) as c:
        rng = np.random.default_rng(11)
        modules = [("A", D.selfequivalence_crossed_module(load("A.yaml"))),
                   ("S3 on a point", D.selfequivalence_crossed_module(
                       GD.action_groupoid(symmetric(3), GD.ObjectGraph(["*"]), lambda g, x: x))),
                   ("tree5", D.selfequivalence_crossed_module(D.random_tree_action(np.random.default_rng(5)))),
                   ("tree10", D.selfequivalence_crossed_module(D.random_tree_action(np.random.default_rng(10)))),
                   ("Ad S3", D.conjugation_crossed_module(symmetric(3))),
                   ("Ad D4", D.conjugation_crossed_module(dihedral(4)))]
        mutants = 0
        for name, cm in modules:
            errs = D.validate_crossed_module(cm)
            c.check(not errs, "%s: %s" % (name, errs[:1]))
            for _ in range(5):
                for kind, m in crossed_module_mutants(cm, rng):
                    mutants += 1
                    c.check(D.validate_crossed_module(m), "%s: %s mutant undetected" % (name, kind))
        c.note("%d modules valid, %d mutants rejected" % (len(modules), mutants))


# -- 12 ---------------------------------------------------------------------


def cli_matrix():
    f = fixture_path
    rows = []
    for fmt in ("structured", "csv"):
        rows += [
            ["validate", f("A.yaml")],
            ["validate", f("pair2_bad.yaml")],
            ["validate", f("torus.yaml")],
            ["orbits", f("A.yaml")],
            ["orbits", f("Z3cycle.yaml")],
            ["localize", f("A.yaml"), "--cover", f("cover_A.yaml")],
            ["morphisms", "--source", f("A.yaml"), "--target", f("A.yaml"), "--star", "1", "--enumerate"],
            ["morphisms", "--source", f("A.yaml"), "--target", f("A.yaml"), "--star", "1", "--groupoid"],
            ["bundles", "--compose", f("A_flip.yaml"), f("A_fold.yaml")],
            ["bundles", "--invert", f("A_to_PT.yaml")],
            ["bundles", "--pointed-iso", f("A_id.yaml"), f("A_flip.yaml"), "--star", "0"],
            ["geodesics", f("torus.yaml"), "--twist", "a^3*b^4", "--twist", "a", "--samples", "32", "--tol", "1e-4"],
            ["geodesics", f("sphere_z3.yaml"), "--samples", "32"],
            ["extensions", "--quotient", f("Z2.yaml"), "--kernel", f("Z2.yaml")],
            ["extensions", "--quotient", f("Z2.yaml"), "--kernel", f("S3.yaml")],
            ["crossed-module", f("A.yaml")],
            ["crossed-module", f("S3.yaml")],
        ]
        rows = [r + ["--format", fmt] if "--format" not in r else r for r in rows]
    return rows


def test_criterion_12_cli_determinism():
    with criterion(12, "CLI determinism", 10) as c:
        matrix = cli_matrix()
        for argv in matrix:
            first = cli.run(argv)
            second = cli.run(argv)
            c.check(first == second, "%s differs between runs" % " ".join(os.path.basename(a) for a in argv))
            c.check(first[0] in (0, 1) and first[1], "%s: exit %d" % (argv[0], first[0]))
        c.note("%d invocations, each run twice" % len(matrix))
