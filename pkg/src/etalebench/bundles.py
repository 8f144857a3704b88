"""(G', G)-bundles, pointed morphisms and the morphism groupoid.

A bundle is stored extensionally: element set, the two projections, both
action tables and an adjacency relation on elements (its topology).  The
compact input form is a *presentation*: a functor phi: G -> G' read off a
set-level section sigma, together with one transition arrow per oriented
edge of the object graph of G,

    continuation of sigma(x) over y  ==  tau[y, x] . sigma(y).

Element (g', x) of a presented bundle stands for g' . sigma(x).
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

from .groupoid import (
    FiniteGroupoid,
    GroupoidError,
    GroupoidHom,
    OpenCover,
    components,
    etale_defects,
    localize,
    orbits,
    product_groupoid,
)
from .ordering import digest, order_key, sorted_ids


class BundleError(ValueError):
    pass


class EnumerationLimit(BundleError):
    pass


class Bundle:
    """A (G', G)-bundle: left G'-action along t, right G-action along s."""

    def __init__(self, left: FiniteGroupoid, right: FiniteGroupoid, elements, s: dict, t: dict,
                 left_act: dict, right_act: dict, edges=(), name: str = ""):
        self.left = left
        self.right = right
        self.elements = tuple(sorted_ids(set(elements)))
        self.s = dict(s)
        self.t = dict(t)
        self.left_act = dict(left_act)
        self.right_act = dict(right_act)
        self.edges = frozenset(frozenset(e) for e in edges)
        self.name = name

    def __len__(self):
        return len(self.elements)

    def __repr__(self):
        return "Bundle(%s: %d elements over %s)" % (self.name or "?", len(self), self.right.name)

    def act(self, g2, e):
        return self.left_act[g2, e]

    def ract(self, e, g):
        return self.right_act[e, g]

    @cached_property
    def adjacency(self) -> dict:
        adj = {e: set() for e in self.elements}
        for pair in self.edges:
            a, b = tuple(pair)
            adj[a].add(b)
            adj[b].add(a)
        return {e: tuple(sorted_ids(v)) for e, v in adj.items()}

    def neighbor_over(self, e, y):
        """The element adjacent-or-equal to e lying over object y."""
        if self.s[e] == y:
            return e
        hits = [f for f in self.adjacency[e] if self.s[f] == y]
        return hits[0] if len(hits) == 1 else None

    @cached_property
    def fibers(self) -> dict:
        out = {x: [] for x in self.right.objects}
        for e in self.elements:
            out[self.s[e]].append(e)
        return out

    def coordinates(self, base) -> dict:
        """element -> g' with g'.base == element, over the fiber of base."""
        out = {}
        for g2 in self.left.arrows_from(self.t[base]):
            out[self.left_act[g2, base]] = g2
        return out

    def with_changes(self, **fields) -> "Bundle":
        kw = dict(left=self.left, right=self.right, elements=self.elements, s=self.s, t=self.t,
                  left_act=self.left_act, right_act=self.right_act, edges=self.edges, name=self.name)
        kw.update(fields)
        return Bundle(**kw)

    def encoding(self) -> tuple:
        return (
            tuple(self.elements),
            tuple(sorted(((k, v) for k, v in self.left_act.items()), key=order_key)),
            tuple(sorted(((k, v) for k, v in self.right_act.items()), key=order_key)),
            tuple(sorted((tuple(sorted_ids(e)) for e in self.edges), key=order_key)),
        )


@dataclass(frozen=True)
class PointedBundle:
    bundle: Bundle
    basepoint: object
    star: object

    def __post_init__(self):
        if self.bundle.s[self.basepoint] != self.star:
            raise BundleError("basepoint %r does not lie over %r" % (self.basepoint, self.star))

    def moved(self, g2) -> "PointedBundle":
        """(E, g'.e0)"""
        return PointedBundle(self.bundle, self.bundle.left_act[g2, self.basepoint], self.star)


# -- validation ------------------------------------------------------------


def validate_bundle(E: Bundle) -> list[str]:
    """Bundle axioms in the finite model; empty list means valid."""
    G2, G = E.left, E.right
    errs = []
    elems = set(E.elements)
    for e in E.elements:
        if E.s.get(e) not in G.base.adjacency:
            errs.append("s(%r) is not an object of the right groupoid" % (e,))
        if E.t.get(e) not in G2.base.adjacency:
            errs.append("t(%r) is not an object of the left groupoid" % (e,))
    for pair in E.edges:
        if len(pair) != 2 or not pair <= elems:
            errs.append("malformed element edge %r" % (sorted_ids(pair),))
    if errs:
        return errs

    for e in E.elements:
        for g2 in G2.arrows_from(E.t[e]):
            f = E.left_act.get((g2, e))
            if f is None:
                errs.append("left principality fails: %r . %r undefined" % (g2, e))
            elif f not in elems or E.s[f] != E.s[e] or E.t[f] != G2.tgt[g2]:
                errs.append("left action %r . %r = %r has wrong projections" % (g2, e, f))
        for g in G.arrows_to(E.s[e]):
            f = E.right_act.get((e, g))
            if f is None:
                errs.append("right action %r . %r undefined" % (e, g))
            elif f not in elems or E.s[f] != G.src[g] or E.t[f] != E.t[e]:
                errs.append("right action %r . %r = %r has wrong projections" % (e, g, f))
    for (g2, e) in E.left_act:
        if e not in elems or G2.src.get(g2) != E.t[e]:
            errs.append("left action defined on non-composable pair (%r, %r)" % (g2, e))
    for (e, g) in E.right_act:
        if e not in elems or G.tgt.get(g) != E.s[e]:
            errs.append("right action defined on non-composable pair (%r, %r)" % (e, g))
    if errs:
        return errs

    for e in E.elements:
        if E.left_act[G2.unit[E.t[e]], e] != e:
            errs.append("left unit fails at %r" % (e,))
        if E.right_act[e, G.unit[E.s[e]]] != e:
            errs.append("right unit fails at %r" % (e,))
        for g2 in G2.arrows_from(E.t[e]):
            f = E.left_act[g2, e]
            for k in G2.arrows_from(G2.tgt[g2]):
                if E.left_act[k, f] != E.left_act[G2.comp[k, g2], e]:
                    errs.append("left action not associative at (%r, %r, %r)" % (k, g2, e))
            for g in G.arrows_to(E.s[e]):
                if E.right_act[f, g] != E.left_act[g2, E.right_act[e, g]]:
                    errs.append("actions do not commute at (%r, %r, %r)" % (g2, e, g))
        for g in G.arrows_to(E.s[e]):
            f = E.right_act[e, g]
            for k in G.arrows_to(G.src[g]):
                if E.right_act[f, k] != E.right_act[e, G.comp[g, k]]:
                    errs.append("right action not associative at (%r, %r, %r)" % (e, g, k))
    if errs:
        return errs

    for x in G.objects:
        fiber = E.fibers[x]
        if not fiber:
            errs.append("left principality fails: s is not onto %r" % (x,))
            continue
        e = fiber[0]
        images = [E.left_act[g2, e] for g2 in G2.arrows_from(E.t[e])]
        if len(set(images)) != len(images):
            errs.append("left principality fails: action on fiber over %r is not free" % (x,))
        if set(images) != set(fiber):
            errs.append("left principality fails: action on fiber over %r is not transitive" % (x,))
    if errs:
        return errs
    return errs + _topology_defects(E)


def _topology_defects(E: Bundle) -> list[str]:
    G2, G = E.left, E.right
    errs = []
    for e in E.elements:
        images = [E.s[f] for f in E.adjacency[e]]
        if len(set(images)) != len(images) or set(images) != set(G.base.neighbors(E.s[e])):
            errs.append("s is not a local bijection at %r" % (e,))
    for pair in E.edges:
        a, b = tuple(pair)
        if not G2.base.near(E.t[a], E.t[b]):
            errs.append("t not continuous on edge %r" % (sorted_ids(pair),))
    if errs:
        return errs
    for e in E.elements:
        for f in E.adjacency[e]:
            for g2 in G2.arrows_from(E.t[e]):
                k = G2.continue_src(g2, E.t[f])
                if k is None or E.left_act.get((k, f)) not in E.adjacency[E.left_act[g2, e]]:
                    errs.append("left action not continuous at (%r, %r) along %r" % (g2, e, f))
            for g in G.arrows_to(E.s[e]):
                k = G.continue_tgt(g, E.s[f])
                if k is None or E.right_act.get((f, k)) not in E.adjacency[E.right_act[e, g]]:
                    errs.append("right action not continuous at (%r, %r) along %r" % (e, g, f))
    return errs


def right_principal_defects(E: Bundle) -> list[str]:
    """Conditions for E to be invertible (a bibundle)."""
    G2, G = E.left, E.right
    errs = []
    by_t = {y: [] for y in G2.objects}
    for e in E.elements:
        by_t[E.t[e]].append(e)
    for y in G2.objects:
        fiber = by_t[y]
        if not fiber:
            errs.append("t is not onto %r" % (y,))
            continue
        e = fiber[0]
        images = [E.right_act[e, g] for g in G.arrows_to(E.s[e])]
        if len(set(images)) != len(images):
            errs.append("right action on t-fiber over %r is not free" % (y,))
        if set(images) != set(fiber):
            errs.append("right action on t-fiber over %r is not transitive" % (y,))
    for e in E.elements:
        images = [E.t[f] for f in E.adjacency[e]]
        if len(set(images)) != len(images) or set(images) != set(G2.base.neighbors(E.t[e])):
            errs.append("t is not a local bijection at %r" % (e,))
    return errs


# -- presentations ---------------------------------------------------------


def _derive_reverse(G2: FiniteGroupoid, k, phi0_x):
    """Given tau[y, x] = k, return tau[x, y] (None if the data is inconsistent)."""
    m = G2.continue_tgt(k, phi0_x)
    if m is None:
        return None
    return G2.inv[m]


@dataclass(frozen=True)
class Presentation:
    """Functor phi: G -> G' plus edge transitions tau[(y, x)] (source phi0[y])."""

    source: FiniteGroupoid
    target: FiniteGroupoid
    phi0: dict
    phi: dict
    tau: dict = field(default_factory=dict)

    def key(self) -> tuple:
        return (
            tuple((x, self.phi0[x]) for x in self.source.objects),
            tuple((g, self.phi[g]) for g in self.source.arrows),
            tuple(sorted(self.tau.items(), key=order_key)),
        )

    def hom(self) -> GroupoidHom:
        return GroupoidHom(self.source, self.target, self.phi0, self.phi)

    def to_bundle(self, name: str = "") -> Bundle:
        G, G2 = self.source, self.target
        elements = [(k, x) for x in G.objects for k in G2.arrows_from(self.phi0[x])]
        s = {e: e[1] for e in elements}
        t = {e: G2.tgt[e[0]] for e in elements}
        left_act = {}
        for k, x in elements:
            for k2 in G2.arrows_from(G2.tgt[k]):
                left_act[k2, (k, x)] = (G2.comp[k2, k], x)
        right_act = {}
        for k, x2 in elements:
            for g in G.arrows_to(x2):
                right_act[(k, x2), g] = (G2.comp[k, self.phi[g]], G.src[g])
        edges = set()
        for (y, x), tr in self.tau.items():
            for k in G2.arrows_from(self.phi0[x]):
                c = G2.continue_src(k, G2.tgt[tr])
                if c is None:
                    raise BundleError("transition on edge (%r, %r) leaves the target's sheets" % (x, y))
                edges.add(frozenset(((k, x), (G2.comp[c, tr], y))))
        return Bundle(G2, G, elements, s, t, left_act, right_act, edges, name=name)

    def pointed(self, star) -> PointedBundle:
        return PointedBundle(self.to_bundle(), (self.target.unit[self.phi0[star]], star), star)


def presentation_of_hom(phi: GroupoidHom) -> Presentation:
    """E_phi: section sigma(x) = (1, x); transitions are units."""
    G, G2 = phi.source, phi.target
    tau = {}
    for a, b in map(tuple, G.edges):
        tau[b, a] = G2.unit[phi.obj_map[b]]
        tau[a, b] = G2.unit[phi.obj_map[a]]
    return Presentation(G, G2, dict(phi.obj_map), dict(phi.arrow_map), tau)


def bundle_of_hom(phi: GroupoidHom) -> Bundle:
    """E_phi = G' x_{T'} T."""
    defects = phi.functor_defects() + phi.continuity_defects()
    if defects:
        raise BundleError("not a continuous functor: " + defects[0])
    return presentation_of_hom(phi).to_bundle(name="E_phi")


def unit_bundle(G: FiniteGroupoid) -> Bundle:
    """G as a (G, G)-bundle over itself."""
    left_act = {(k, g): G.comp[k, g] for g in G.arrows for k in G.arrows_from(G.tgt[g])}
    right_act = {(g, k): G.comp[g, k] for g in G.arrows for k in G.arrows_to(G.src[g])}
    return Bundle(G, G, G.arrows, dict(G.src), dict(G.tgt), left_act, right_act, G.arrow_edges,
                  name="unit(%s)" % G.name)


def bundle_from_cocycle(phi: GroupoidHom, cover: OpenCover, base_piece: int, star) -> PointedBundle:
    """E_{phi,U} for a continuous functor phi: G_U -> G', pointed at
    [base_piece, phi(1_star), star].

    Classes [i, g', x] are represented through the section
    sigma(x) = [i0(x), 1, x] with i0(x) the first piece containing x;
    the element (g', x) is the class [i0(x), g', x].
    """
    GU, G2 = phi.source, phi.target
    defects = phi.functor_defects()
    if defects:
        raise BundleError("cocycle is not a functor: " + defects[0])
    defects = phi.continuity_defects()
    if defects:
        raise BundleError("cocycle is not continuous: " + defects[0])
    if star not in cover.pieces[base_piece]:
        raise BundleError("star %r is not in piece %d" % (star, base_piece))
    G = _base_of_localization(GU, cover)
    if not cover.covers_edges(G.base):
        raise BundleError("cover pieces must contain every edge of the object graph")
    i0 = {x: cover.first_piece(x) for x in G.objects}
    phi0 = {x: phi.obj_map[i0[x], x] for x in G.objects}
    arrow = {g: phi((i0[G.tgt[g]], g, i0[G.src[g]])) for g in G.arrows}
    tau = {}
    for e in G.edges:
        a, b = tuple(e)
        k = next(i for i, p in enumerate(cover.pieces) if e <= p)
        for x, y in ((a, b), (b, a)):
            # sigma(x) = [k, phi(i0x, 1_x, k), x]; continue inside piece k
            rep = phi((i0[x], G.unit[x], k))
            c = G2.continue_src(rep, phi.obj_map[k, y])
            if c is None:
                raise BundleError("cocycle transition cannot be continued along %r" % (sorted_ids(e),))
            tau[y, x] = G2.comp[c, phi((k, G.unit[y], i0[y]))]
    pres = Presentation(G, G2, phi0, arrow, tau)
    E = pres.to_bundle(name="E_phi,U")
    # basepoint [base_piece, 1, star] = [i0(star), phi(i0, 1_star, base_piece), star]
    e0 = (phi((i0[star], G.unit[star], base_piece)), star)
    return PointedBundle(E, e0, star)


def _base_of_localization(GU: FiniteGroupoid, cover: OpenCover) -> FiniteGroupoid:
    base = getattr(GU, "localized_from", None)
    if base is None:
        raise BundleError("source of the cocycle must come from localize()")
    return base


def hom_from_section(E: Bundle, sigma: dict) -> GroupoidHom:
    """phi with sigma(t g) . g = phi(g) . sigma(s g)."""
    G, G2 = E.right, E.left
    for x in G.objects:
        if x not in sigma or E.s.get(sigma[x]) != x:
            raise BundleError("sigma is not a section at %r" % (x,))
    arrow_map = {}
    for g in G.arrows:
        target = E.right_act[sigma[G.tgt[g]], g]
        coords = E.coordinates(sigma[G.src[g]])
        if target not in coords:
            raise BundleError("no arrow relates the section along %r" % (g,))
        arrow_map[g] = coords[target]
    return GroupoidHom(G, G2, {x: E.t[sigma[x]] for x in G.objects}, arrow_map)


# -- composition and inversion ---------------------------------------------


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if order_key(rb) < order_key(ra):
                ra, rb = rb, ra
            self.parent[rb] = ra


def compose_bundles(E2: Bundle, E: Bundle) -> Bundle:
    """E2 ∘ E: pairs (e2, e) with s(e2) = t(e) modulo (e2.g', e) ~ (e2, g'.e)."""
    if E2.right is not E.left:
        raise BundleError("middle groupoids do not match")
    M = E.left
    pairs = [(a, b) for b in E.elements for a in E2.fibers[E.t[b]]]
    uf = _UnionFind(pairs)
    for a, b in pairs:
        for g in M.arrows_from(E.t[b]):
            # (a . g^-1, g . b) ~ (a, b)
            uf.union((a, b), (E2.right_act[a, M.inv[g]], E.left_act[g, b]))
    rep = {p: uf.find(p) for p in pairs}
    elements = sorted_ids(set(rep.values()))
    s = {c: E.s[c[1]] for c in elements}
    t = {c: E2.t[c[0]] for c in elements}
    left_act = {}
    right_act = {}
    for a, b in elements:
        for k in E2.left.arrows_from(E2.t[a]):
            left_act[k, (a, b)] = rep[E2.left_act[k, a], b]
        for g in E.right.arrows_to(E.s[b]):
            right_act[(a, b), g] = rep[a, E.right_act[b, g]]
    edges = set()
    for a, b in pairs:
        for b2 in E.adjacency[b]:
            a2 = E2.neighbor_over(a, E.t[b2])
            if a2 is not None:
                edges.add(frozenset((rep[a, b], rep[a2, b2])))
    return Bundle(E2.left, E.right, elements, s, t, left_act, right_act, edges,
                  name="%s∘%s" % (E2.name, E.name))


def invert_bundle(E: Bundle) -> Bundle | None:
    """E^-1 (swap projections, opposite actions) when E is right principal."""
    if validate_bundle(E) or right_principal_defects(E):
        return None
    G2, G = E.left, E.right
    left_act = {(g, e): E.right_act[e, G.inv[g]] for e in E.elements for g in G.arrows_from(E.s[e])}
    right_act = {(e, k): E.left_act[G2.inv[k], e] for e in E.elements for k in G2.arrows_to(E.t[e])}
    return Bundle(G, G2, E.elements, E.t, E.s, left_act, right_act, E.edges, name="%s^-1" % E.name)


# -- isomorphisms ----------------------------------------------------------


def _propagate(E: Bundle, F: Bundle, mapping: dict, seeds, rng=None):
    """Extend a partial map along both actions and adjacency.

    Returns the first conflict as a string, or None.
    """
    queue = deque(seeds)
    G2, G = E.left, E.right
    while queue:
        e = queue.popleft()
        f = mapping[e]
        moves = []
        for g2 in G2.arrows_from(E.t[e]):
            moves.append((E.left_act[g2, e], F.left_act.get((g2, f)), "left action by %r" % (g2,)))
        for g in G.arrows_to(E.s[e]):
            moves.append((E.right_act[e, g], F.right_act.get((f, g)), "right action by %r" % (g,)))
        for e2 in E.adjacency[e]:
            moves.append((e2, F.neighbor_over(f, E.s[e2]), "adjacency towards %r" % (E.s[e2],)))
        if rng is not None:
            rng.shuffle(moves)
        for e2, f2, how in moves:
            if f2 is None or F.s[f2] != E.s[e2] or F.t[f2] != E.t[e2]:
                return "no image for %r under %s" % (e2, how)
            if e2 in mapping:
                if mapping[e2] != f2:
                    return "conflict at %r: %r vs %r (%s)" % (e2, mapping[e2], f2, how)
            else:
                mapping[e2] = f2
                queue.append(e2)
    return None


def _is_isomorphism(E: Bundle, F: Bundle, m: dict) -> bool:
    if len(m) != len(E.elements) or len(set(m.values())) != len(F.elements) or len(E) != len(F):
        return False
    if any(E.s[e] != F.s[m[e]] or E.t[e] != F.t[m[e]] for e in E.elements):
        return False
    if any(F.left_act[g2, m[e]] != m[f] for (g2, e), f in E.left_act.items()):
        return False
    if any(F.right_act[m[e], g] != m[f] for (e, g), f in E.right_act.items()):
        return False
    return {frozenset(m[x] for x in pair) for pair in E.edges} == set(F.edges)


def pointed_isomorphism_trace(P: PointedBundle, Q: PointedBundle, rng=None):
    """(mapping, None) or (None, first conflict)."""
    E, F = P.bundle, Q.bundle
    if E.left is not F.left or E.right is not F.right:
        raise BundleError("pointed bundles over different groupoid pairs")
    if P.star != Q.star:
        raise BundleError("pointed bundles over different points")
    if not E.right.is_connected():
        raise BundleError("source groupoid is not connected; pointed isomorphisms need not be unique")
    if E.t[P.basepoint] != F.t[Q.basepoint]:
        return None, "basepoints have different targets"
    mapping = {P.basepoint: Q.basepoint}
    conflict = _propagate(E, F, mapping, [P.basepoint], rng)
    if conflict:
        return None, conflict
    if not _is_isomorphism(E, F, mapping):
        return None, "propagated map is not a bundle isomorphism"
    return mapping, None


def pointed_isomorphism(P: PointedBundle, Q: PointedBundle, rng=None) -> dict | None:
    """The unique basepoint-preserving isomorphism P -> Q, or None.

    Breadth-first propagation from e0 -> f0; ``rng`` shuffles the visiting
    order (the result does not depend on it).
    """
    return pointed_isomorphism_trace(P, Q, rng)[0]


def bundle_isomorphism(E: Bundle, F: Bundle) -> dict | None:
    """Some isomorphism E -> F (unpointed), by seeded propagation per component."""
    if E.left is not F.left or E.right is not F.right or len(E) != len(F):
        return None
    links = set(E.edges)
    for (g2, e), f in E.left_act.items():
        if e != f:
            links.add(frozenset((e, f)))
    for (e, g), f in E.right_act.items():
        if e != f:
            links.add(frozenset((e, f)))
    comps = components(E.elements, links)

    def search(i, mapping):
        if i == len(comps):
            return mapping if _is_isomorphism(E, F, mapping) else None
        seed = comps[i][0]
        used = set(mapping.values())
        for cand in F.elements:
            if cand in used or F.s[cand] != E.s[seed] or F.t[cand] != E.t[seed]:
                continue
            trial = dict(mapping)
            trial[seed] = cand
            if _propagate(E, F, trial, [seed]) is None and len(set(trial.values())) == len(trial):
                out = search(i + 1, trial)
                if out is not None:
                    return out
        return None

    return search(0, {})


def pointed_automorphisms_bruteforce(P: PointedBundle) -> list[dict]:
    """All basepoint-preserving automorphisms, by exhaustive search over
    fiber-respecting bijections (independent of the propagation routine)."""
    E = P.bundle
    slots = {}
    for e in E.elements:
        slots.setdefault((E.s[e], E.t[e]), []).append(e)
    choices = []
    for key, group in sorted(slots.items(), key=order_key):
        choices.append([(group, perm) for perm in itertools.permutations(group)])
    out = []
    for combo in itertools.product(*choices):
        m = {}
        for group, perm in combo:
            m.update(zip(group, perm))
        if m[P.basepoint] == P.basepoint and _is_isomorphism(E, E, m):
            out.append(m)
    return out


# -- pointed morphism spaces -----------------------------------------------


def spanning_steps(G: FiniteGroupoid, star) -> list[tuple]:
    """Breadth-first spanning steps from star: ('edge', x, y) or ('arrow', x, y, g)."""
    if star not in G.base.adjacency:
        raise GroupoidError("unknown object %r" % (star,))
    seen = {star}
    queue = deque([star])
    steps = []
    while queue:
        x = queue.popleft()
        for y in G.base.neighbors(x):
            if y not in seen:
                seen.add(y)
                queue.append(y)
                steps.append(("edge", x, y))
        for g in G.arrows_from(x):
            y = G.tgt[g]
            if y not in seen:
                seen.add(y)
                queue.append(y)
                steps.append(("arrow", x, y, g))
    if len(seen) != len(G.objects):
        raise BundleError("source groupoid is not connected")
    return steps


def canonical_presentation(P: PointedBundle, steps=None) -> Presentation:
    """Gauge-fixed presentation: sections transported along spanning steps
    from the basepoint, so every step has trivial transition."""
    E = P.bundle
    G, G2 = E.right, E.left
    if steps is None:
        steps = spanning_steps(G, P.star)
    sigma = {P.star: P.basepoint}
    for step in steps:
        if step[0] == "edge":
            _, x, y = step
            nb = E.neighbor_over(sigma[x], y)
            if nb is None:
                raise BundleError("bundle has no continuation over edge (%r, %r)" % (x, y))
            sigma[y] = nb
        else:
            _, x, y, g = step
            sigma[y] = E.right_act[sigma[x], G.inv[g]]
    coords = {x: E.coordinates(sigma[x]) for x in G.objects}
    phi0 = {x: E.t[sigma[x]] for x in G.objects}
    phi = {g: coords[G.src[g]][E.right_act[sigma[G.tgt[g]], g]] for g in G.arrows}
    tau = {}
    for a, b in map(tuple, G.edges):
        for x, y in ((a, b), (b, a)):
            tau[y, x] = coords[y][E.neighbor_over(sigma[x], y)]
    return Presentation(G, G2, phi0, phi, tau)


class _Search:
    """Constraint propagation over gauge-fixed presentations."""

    def __init__(self, G: FiniteGroupoid, G2: FiniteGroupoid, star, steps, max_nodes: int):
        self.G, self.G2, self.star = G, G2, star
        self.steps = steps
        self.max_nodes = max_nodes
        self.nodes = 0
        self.tree_edges = {}
        self.tree_arrows = {}
        for st in steps:
            if st[0] == "edge":
                self.tree_edges[st[2], st[1]] = True
            else:
                self.tree_arrows[st[3]] = st[1]
        self.directed = [(b, a) for a, b in map(tuple, G.edges)] + [(a, b) for a, b in map(tuple, G.edges)]
        self.directed = sorted_ids(self.directed)
        self.order = [st[2] for st in steps]
        self.obj_order = [star] + self.order

    def run(self) -> list[Presentation]:
        self.found = []
        self._branch({}, {}, {})
        return self.found

    # state: phi0, phi, tau dicts
    def _set(self, table, key, value, changed):
        old = table.get(key)
        if old is None:
            table[key] = value
            changed.append(True)
            return True
        return old == value

    def _propagate(self, phi0, phi, tau) -> bool:
        G, G2 = self.G, self.G2
        while True:
            changed = []
            for x, y in list(phi0.items()):
                if not self._set(phi, G.unit[x], G2.unit[y], changed):
                    return False
            for (y, x), on in self.tree_edges.items():
                if y in phi0 and not self._set(tau, (y, x), G2.unit[phi0[y]], changed):
                    return False
                if x in phi0 and y in phi0 and not G2.base.near(phi0[x], phi0[y]):
                    return False
            for g, x in self.tree_arrows.items():
                if x in phi0 and not self._set(phi, g, G2.unit[phi0[x]], changed):
                    return False
            for g, k in list(phi.items()):
                if not (self._set(phi0, G.src[g], G2.src[k], changed)
                        and self._set(phi0, G.tgt[g], G2.tgt[k], changed)
                        and self._set(phi, G.inv[g], G2.inv[k], changed)):
                    return False
                for h in G.arrows_to(G.src[g]):
                    kh = phi.get(h)
                    if kh is not None:
                        gh = G2.comp.get((k, kh))
                        if gh is None or not self._set(phi, G.comp[g, h], gh, changed):
                            return False
            for (y, x), k in list(tau.items()):
                if x in phi0 and (G2.src[k] != phi0.get(y, G2.src[k]) or not G2.base.near(G2.tgt[k], phi0[x])):
                    return False
                if y in phi0 and G2.src[k] != phi0[y]:
                    return False
                if x in phi0:
                    rev = _derive_reverse(G2, k, phi0[x])
                    if rev is None or not self._set(tau, (x, y), rev, changed):
                        return False
            for g, k in list(phi.items()):
                x, x2 = G.src[g], G.tgt[g]
                for y in G.base.neighbors(x):
                    gt = G.continue_src(g, y)
                    if gt is None:
                        return False
                    y2 = G.tgt[gt]
                    t1, t2 = tau.get((y, x)), tau.get((y2, x2))
                    if t1 is None or t2 is None:
                        continue
                    c = G2.continue_src(k, G2.tgt[t1])
                    if c is None:
                        return False
                    left = G2.comp[c, t1]
                    if G2.tgt[left] != G2.tgt[t2]:
                        return False
                    if not self._set(phi, gt, G2.comp[G2.inv[t2], left], changed):
                        return False
            if not changed:
                return True

    def _branch(self, phi0, phi, tau):
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise EnumerationLimit("search exceeded %d nodes" % self.max_nodes)
        phi0, phi, tau = dict(phi0), dict(phi), dict(tau)
        if not self._propagate(phi0, phi, tau):
            return
        G, G2 = self.G, self.G2
        for x in self.obj_order:
            if x not in phi0:
                for cand in G2.objects:
                    trial = dict(phi0)
                    trial[x] = cand
                    self._branch(trial, phi, tau)
                return
        for g in G.arrows:
            if g not in phi:
                for cand in G2.hom(phi0[G.src[g]], phi0[G.tgt[g]]):
                    trial = dict(phi)
                    trial[g] = cand
                    self._branch(phi0, trial, tau)
                return
        for y, x in self.directed:
            if (y, x) not in tau:
                for cand in G2.arrows_from(phi0[y]):
                    if G2.base.near(G2.tgt[cand], phi0[x]):
                        trial = dict(tau)
                        trial[y, x] = cand
                        self._branch(phi0, phi, trial)
                return
        pres = Presentation(G, G2, phi0, phi, tau)
        if not pres.hom().functor_defects():
            try:
                E = pres.to_bundle()
            except BundleError:
                return
            if not validate_bundle(E):
                self.found.append(pres)


@dataclass
class MorphismClass:
    """A pointed morphism [E, e0] with its canonical representative."""

    presentation: Presentation
    pointed: PointedBundle
    target_anchor: object
    index: int = -1

    @property
    def key(self):
        return self.presentation.key()

    @property
    def digest(self) -> str:
        return digest(self.key)


def _check_pair(G: FiniteGroupoid, G2: FiniteGroupoid):
    for name, K in (("source", G), ("target", G2)):
        errs = etale_defects(K)
        if errs:
            raise BundleError("%s groupoid is not étale: %s" % (name, errs[0]))
    if not G.is_connected():
        raise BundleError("source groupoid is not connected")


def enumerate_pointed_morphisms(G: FiniteGroupoid, G2: FiniteGroupoid, star,
                                max_nodes: int = 200_000) -> list[MorphismClass]:
    """All pointed morphisms G -> G' over star, one canonical class each.

    Searches gauge-fixed presentations (transition trivial along the
    spanning steps from star); these are in bijection with pointed
    isomorphism classes, so the list is duplicate-free by construction.
    """
    _check_pair(G, G2)
    steps = spanning_steps(G, star)
    found = _Search(G, G2, star, steps, max_nodes).run()
    found.sort(key=lambda p: order_key(p.key()))
    out = []
    for i, pres in enumerate(found):
        out.append(MorphismClass(pres, pres.pointed(star), pres.phi0[star], i))
    return out


def enumerate_unpointed_morphisms(G: FiniteGroupoid, G2: FiniteGroupoid, star,
                                  max_nodes: int = 200_000) -> list[Bundle]:
    """Bundle isomorphism classes (basepoint forgotten), deduplicated by
    unpointed isomorphism search."""
    reps: list[Bundle] = []
    for mc in enumerate_pointed_morphisms(G, G2, star, max_nodes):
        E = mc.pointed.bundle
        if not any(bundle_isomorphism(E, F) is not None for F in reps):
            reps.append(E)
    return reps


class MorphismSpace:
    """Mor(G', G, *) with its left G'-action, as a groupoid G' x_{T'} Mor."""

    def __init__(self, G: FiniteGroupoid, G2: FiniteGroupoid, star, max_nodes: int = 200_000):
        self.source, self.target, self.star = G, G2, star
        self.classes = enumerate_pointed_morphisms(G, G2, star, max_nodes)
        self.steps = spanning_steps(G, star)
        self._by_key = {mc.key: mc.index for mc in self.classes}
        self.groupoid = self._build()

    def __len__(self):
        return len(self.classes)

    def class_of(self, P: PointedBundle) -> int:
        key = canonical_presentation(P, self.steps).key()
        try:
            return self._by_key[key]
        except KeyError:
            raise BundleError("pointed bundle is not in the enumerated morphism space") from None

    def act(self, g2, z: int) -> int:
        """g'.[E, e0] = [E, g'.e0]"""
        return self.class_of(self.classes[z].pointed.moved(g2))

    def adjacent(self, a: int, b: int) -> bool:
        """Classes whose canonical presentations differ by one sheet step."""
        if a == b:
            return False
        p, q = self.classes[a].presentation, self.classes[b].presentation
        G2 = self.target
        if not all(G2.base.near(p.phi0[x], q.phi0[x]) for x in self.source.objects):
            return False
        for g, k in p.phi.items():
            if G2.continue_src(k, q.phi0[self.source.src[g]]) != q.phi[g]:
                return False
        for yx, k in p.tau.items():
            if G2.continue_src(k, q.phi0[yx[0]]) != q.tau[yx]:
                return False
        return True

    def _build(self) -> FiniteGroupoid:
        G2 = self.target
        n = len(self.classes)
        objects = list(range(n))
        arrows, src, tgt = [], {}, {}
        for z in objects:
            for g2 in G2.arrows_from(self.classes[z].target_anchor):
                a = (g2, z)
                arrows.append(a)
                src[a] = z
                tgt[a] = self.act(g2, z)
        unit = {z: (G2.unit[self.classes[z].target_anchor], z) for z in objects}
        inv = {(g2, z): (G2.inv[g2], tgt[g2, z]) for g2, z in arrows}
        comp = {}
        for g2, z in arrows:
            for k in G2.arrows_from(G2.tgt[g2]):
                comp[(k, tgt[g2, z]), (g2, z)] = (G2.comp[k, g2], z)
        edges = [(a, b) for a in objects for b in objects if a < b and self.adjacent(a, b)]
        arrow_edges = []
        for a, b in edges:
            for g2 in G2.arrows_from(self.classes[a].target_anchor):
                c = G2.continue_src(g2, self.classes[b].target_anchor)
                if c is not None:
                    arrow_edges.append(((g2, a), (c, b)))
        return FiniteGroupoid(objects, arrows, src, tgt, unit, inv, comp, edges, arrow_edges,
                              name="%s×Mor" % G2.name)


def morphism_groupoid(G: FiniteGroupoid, G2: FiniteGroupoid, star, max_nodes: int = 200_000) -> FiniteGroupoid:
    return MorphismSpace(G, G2, star, max_nodes).groupoid


# -- exponential morphism --------------------------------------------------


def exp_morphism_eval(space: MorphismSpace, g2, z_prime: int, g, element=None, left=None):
    """g'.(z, e).((g'', z'), g) = (z', m^-1(g'.e.g)) with z = g''.z'.

    ``element`` defaults to the basepoint of z; ``left`` (g') to a unit.
    Returns (z', image element in the representative bundle of z').
    """
    G2, G = space.target, space.source
    zp = space.classes[z_prime]
    if G2.src.get(g2) != zp.target_anchor:
        raise BundleError("arrow %r does not act on class %d" % (g2, z_prime))
    z = space.act(g2, z_prime)
    Ez = space.classes[z].pointed
    e = Ez.basepoint if element is None else element
    E = Ez.bundle
    if E.s.get(e) is None:
        raise BundleError("%r is not an element of class %d" % (e, z))
    if G.tgt.get(g) != E.s[e]:
        raise BundleError("arrow %r is not composable with %r" % (g, e))
    if left is None:
        left = G2.unit[E.t[e]]
    if G2.src.get(left) != E.t[e]:
        raise BundleError("left arrow %r is not composable with %r" % (left, e))
    moved = zp.pointed.moved(g2)
    m = pointed_isomorphism(moved, Ez)
    if m is None:
        raise BundleError("representatives are not pointed-isomorphic")
    m_inv = {v: k for k, v in m.items()}
    return z_prime, m_inv[E.left_act[left, E.right_act[e, g]]]


# -- currying --------------------------------------------------------------


def restrict_to_slice(P: Bundle, H: FiniteGroupoid, G: FiniteGroupoid, v) -> Bundle:
    """P_v: the (G', G)-bundle over {v} x T."""
    elements = [e for e in P.elements if P.s[e][0] == v]
    keep = set(elements)
    uv = H.unit[v]
    return Bundle(
        P.left, G, elements,
        {e: P.s[e][1] for e in elements}, {e: P.t[e] for e in elements},
        {(k, e): f for (k, e), f in P.left_act.items() if e in keep},
        {(e, g): P.right_act[e, (uv, g)] for e in elements for g in G.arrows_to(P.s[e][1])},
        [pair for pair in P.edges if pair <= keep],
        name="%s_%r" % (P.name, v),
    )


class Curried(NamedTuple):
    psi: GroupoidHom
    cover: OpenCover
    sections: dict


def curry_morphism(P: Bundle, H: FiniteGroupoid, G: FiniteGroupoid, space: MorphismSpace,
                   cover: OpenCover | None = None) -> Curried:
    """psi: H_V -> G' x Mor from a (G', H x G)-bundle P.

    Sections over V_i x {*} are transported along edges of each piece from
    the piece's minimal object; psi(j, h, i) = (f(j, h, i), class of
    (P_v, sigma_i(v))).
    """
    errs = validate_bundle(P)
    if errs:
        raise BundleError("bundle fails validation: " + errs[0])
    if not G.is_connected():
        raise BundleError("G must be connected")
    star = space.star
    if cover is None:
        cover = OpenCover.by_edges(H.base)
    loc = localize(H, cover)
    HV = loc.groupoid
    sections = {}
    for i, piece in enumerate(cover.pieces):
        root = sorted_ids(piece)[0]
        sections[i, root] = sorted_ids(e for e in P.fibers[root, star])[0]
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in H.base.neighbors(v):
                if w in piece and (i, w) not in sections:
                    nb = P.neighbor_over(sections[i, v], (w, star))
                    if nb is None:
                        raise BundleError("no continuation of the section along (%r, %r)" % (v, w))
                    sections[i, w] = nb
                    queue.append(w)
    slices = {v: restrict_to_slice(P, H, G, v) for v in H.objects}
    obj_map = {}
    for (i, v) in HV.objects:
        obj_map[i, v] = space.class_of(PointedBundle(slices[v], sections[i, v], star))
    arrow_map = {}
    M = space.groupoid
    for a in HV.arrows:
        j, h, i = a
        v, w = H.src[h], H.tgt[h]
        moved = P.right_act[sections[j, w], (h, G.unit[star])]
        f = P.coordinates(sections[i, v]).get(moved)
        if f is None:
            raise BundleError("sections are not related along %r" % (a,))
        arrow_map[a] = (f, obj_map[i, v])
        if M.tgt[arrow_map[a]] != obj_map[j, w]:
            raise BundleError("curried arrow %r lands in the wrong class" % (a,))
    psi = GroupoidHom(HV, M, obj_map, arrow_map, name="curry")
    return Curried(psi, cover, sections)


def uncurry_morphism(psi: GroupoidHom, H: FiniteGroupoid, space: MorphismSpace) -> Bundle:
    """EXP ∘ (psi × id_G) at the element level: a (G', H × G)-bundle."""
    defects = psi.functor_defects()
    if defects:
        raise BundleError("psi is not a functor: " + defects[0])
    HV = psi.source
    G, G2 = space.source, space.target
    pieces: dict = {}
    for i, v in HV.objects:
        pieces.setdefault(i, set()).add(v)
    cover = OpenCover([pieces[i] for i in sorted(pieces)])
    i0 = {v: cover.first_piece(v) for v in H.objects}
    reps = {z: space.classes[z].pointed for z in range(len(space))}

    def iso_between(a):
        # psi(a) = (g'', z') : z' -> z; m: (E^{z'}, g''.e0) -> (E^z, e0)
        g2, zp = psi(a)
        z = space.groupoid.tgt[psi(a)]
        m = pointed_isomorphism(reps[zp].moved(g2), reps[z])
        if m is None:
            raise BundleError("no pointed isomorphism for %r" % (a,))
        return m

    # element (v, e) with e in E^{z(i0 v, v)}
    zof = {v: psi.obj_map[i0[v], v] for v in H.objects}
    elements = [(v, e) for v in H.objects for e in reps[zof[v]].bundle.elements]
    s = {(v, e): (v, reps[zof[v]].bundle.s[e]) for v, e in elements}
    t = {(v, e): reps[zof[v]].bundle.t[e] for v, e in elements}
    left_act = {}
    for v, e in elements:
        E = reps[zof[v]].bundle
        for k in G2.arrows_from(E.t[e]):
            left_act[k, (v, e)] = (v, E.left_act[k, e])
    right_act = {}
    for h in H.arrows:
        v, w = H.src[h], H.tgt[h]
        # the arrow (i0 w, h, i0 v) of H_V: z(i0 v, v) -> z(i0 w, w)
        m_inv = {b: a for a, b in iso_between((i0[w], h, i0[v])).items()}
        Ew = reps[zof[w]].bundle
        for e in Ew.elements:
            for g in G.arrows_to(Ew.s[e]):
                right_act[(w, e), (h, g)] = (v, m_inv[Ew.right_act[e, g]])
    edges = set()
    for v in H.objects:
        E = reps[zof[v]].bundle
        for pair in E.edges:
            edges.add(frozenset((v, e) for e in pair))
    HG = _product_cache(H, G)
    for e_pair in H.edges:
        v, w = tuple(e_pair)
        i = next((k for k, p in enumerate(cover.pieces) if e_pair <= p), None)
        if i is None:
            raise BundleError("psi's cover does not contain edge %r" % (sorted_ids(e_pair),))
        # transport E^{z(i,v)} -> E^{z(i,w)} by sheet continuation, then
        # re-express through the canonical pieces i0(v), i0(w)
        Ti = _class_transport(space, psi.obj_map[i, v], psi.obj_map[i, w])
        to_v = iso_between((i, H.unit[v], i0[v]))   # z(i0 v, v) -> z(i, v)
        to_w = {b: a for a, b in iso_between((i, H.unit[w], i0[w])).items()}  # z(i, w) -> z(i0 w, w)
        for e in reps[zof[v]].bundle.elements:
            edges.add(frozenset(((v, e), (w, to_w[Ti[to_v[e]]]))))
    return Bundle(G2, HG, elements, s, t, left_act, right_act, edges, name="uncurry")


_PRODUCTS: dict = {}


def _product_cache(H, G):
    key = (id(H), id(G))
    if key not in _PRODUCTS:
        _PRODUCTS[key] = (H, G, product_groupoid(H, G))
    return _PRODUCTS[key][2]


def product_of(H: FiniteGroupoid, G: FiniteGroupoid) -> FiniteGroupoid:
    """The shared H × G instance used by curry/uncurry bundles."""
    return _product_cache(H, G)


def _class_transport(space: MorphismSpace, a: int, b: int) -> dict:
    """Element map E^a -> E^b along adjacent (or equal) classes."""
    Ea = space.classes[a].pointed.bundle
    Eb = space.classes[b].pointed.bundle
    if a == b:
        return {e: e for e in Ea.elements}
    if not space.adjacent(a, b):
        raise BundleError("classes %d and %d are not adjacent" % (a, b))
    qb = space.classes[b].presentation
    G2 = space.target
    return {(k, x): (G2.continue_src(k, qb.phi0[x]), x) for k, x in Ea.elements}
