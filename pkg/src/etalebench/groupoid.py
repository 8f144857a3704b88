"""Finite models of étale groupoids.

The space of objects is a finite graph: adjacency plays the role of the
topology.  Arrows carry their own adjacency ("sheets"): two arrows are
adjacent when one is the continuation of the other along an edge of the
object graph.  A map between such spaces is continuous when it sends every
edge to an edge or collapses it to a point.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from functools import cached_property
from typing import Hashable, Iterable, NamedTuple

from .groups import FiniteGroup, cyclic, dihedral, homomorphisms, symmetric
from .ordering import order_key, sorted_ids


class GroupoidError(ValueError):
    pass


def _edge_set(pairs) -> frozenset:
    return frozenset(frozenset(p) for p in pairs)


def _adjacency(nodes, edges) -> dict:
    adj = {x: set() for x in nodes}
    for e in edges:
        a, b = tuple(e)
        adj[a].add(b)
        adj[b].add(a)
    return {x: tuple(sorted_ids(ns)) for x, ns in adj.items()}


def _edge_problems(nodes, edges, what) -> list[str]:
    errs = []
    known = set(nodes)
    for e in sorted(edges, key=order_key):
        if len(e) != 2:
            errs.append("%s edge %r is a self-loop" % (what, sorted_ids(e)))
            continue
        for end in e:
            if end not in known:
                errs.append("%s edge %r has undeclared endpoint %r" % (what, sorted_ids(e), end))
    return errs


def components(nodes, edges) -> list[tuple]:
    """Connected components of a graph, each sorted, ordered by minimum."""
    adj = _adjacency(nodes, edges)
    seen = set()
    out = []
    for x in sorted_ids(nodes):
        if x in seen:
            continue
        comp = [x]
        seen.add(x)
        stack = [x]
        while stack:
            y = stack.pop()
            for z in adj[y]:
                if z not in seen:
                    seen.add(z)
                    comp.append(z)
                    stack.append(z)
        out.append(tuple(sorted_ids(comp)))
    return out


def is_tree(nodes, edges) -> bool:
    nodes = list(nodes)
    return len(components(nodes, edges)) == 1 and len(edges) == len(nodes) - 1


class ObjectGraph:
    """Objects plus an adjacency relation standing in for the topology."""

    def __init__(self, objects: Iterable[Hashable], edges: Iterable = ()):
        self.objects = tuple(sorted_ids(set(objects)))
        self.edges = _edge_set(edges)
        errs = _edge_problems(self.objects, self.edges, "object")
        if errs:
            raise GroupoidError("; ".join(errs))

    @cached_property
    def adjacency(self) -> dict:
        return _adjacency(self.objects, self.edges)

    def neighbors(self, x) -> tuple:
        return self.adjacency[x]

    def near(self, x, y) -> bool:
        """Adjacent or equal."""
        return x == y or y in self.adjacency.get(x, ())

    def is_tree(self) -> bool:
        return is_tree(self.objects, self.edges)

    def is_connected(self) -> bool:
        return len(components(self.objects, self.edges)) == 1

    def induced(self, subset) -> "ObjectGraph":
        sub = set(subset)
        return ObjectGraph(sub, [e for e in self.edges if e <= sub])

    def __eq__(self, other):
        return isinstance(other, ObjectGraph) and (self.objects, self.edges) == (other.objects, other.edges)

    def __hash__(self):
        return hash((self.objects, self.edges))

    def __repr__(self):
        return "ObjectGraph(%d objects, %d edges)" % (len(self.objects), len(self.edges))


class FiniteGroupoid:
    """Explicit finite groupoid over an object graph.

    ``comp[g, h]`` is ``g∘h`` and is defined exactly when src(g) == tgt(h).
    """

    def __init__(
        self,
        objects: Iterable,
        arrows: Iterable,
        src: dict,
        tgt: dict,
        unit: dict,
        inv: dict,
        comp: dict,
        edges: Iterable = (),
        arrow_edges: Iterable | None = None,
        name: str = "",
    ):
        self.base = ObjectGraph(objects, edges)
        self.objects = self.base.objects
        self.edges = self.base.edges
        self.arrows = tuple(sorted_ids(set(arrows)))
        self.src = dict(src)
        self.tgt = dict(tgt)
        self.unit = dict(unit)
        self.inv = dict(inv)
        self.comp = dict(comp)
        if arrow_edges is None:
            # default: only the unit sheet is glued along object edges
            arrow_edges = [(self.unit[a], self.unit[b]) for a, b in map(tuple, self.edges)
                           if a in self.unit and b in self.unit]
        self.arrow_edges = _edge_set(arrow_edges)
        self.name = name

    def __repr__(self):
        return "FiniteGroupoid(%s: %d objects, %d arrows)" % (
            self.name or "?", len(self.objects), len(self.arrows))

    # -- lookup -----------------------------------------------------------

    def mul(self, g, h):
        try:
            return self.comp[g, h]
        except KeyError:
            raise GroupoidError("arrows %r, %r are not composable" % (g, h)) from None

    def prod(self, *arrows):
        out = arrows[-1]
        for g in reversed(arrows[:-1]):
            out = self.mul(g, out)
        return out

    @cached_property
    def _hom_index(self) -> dict:
        idx = defaultdict(list)
        for g in self.arrows:
            idx[self.src[g], self.tgt[g]].append(g)
        return dict(idx)

    def hom(self, x, y) -> list:
        """Arrows x -> y (source x, target y)."""
        return self._hom_index.get((x, y), [])

    @cached_property
    def _from_index(self) -> dict:
        idx = defaultdict(list)
        for g in self.arrows:
            idx[self.src[g]].append(g)
        return dict(idx)

    @cached_property
    def _to_index(self) -> dict:
        idx = defaultdict(list)
        for g in self.arrows:
            idx[self.tgt[g]].append(g)
        return dict(idx)

    def arrows_from(self, x) -> list:
        return self._from_index.get(x, [])

    def arrows_to(self, x) -> list:
        return self._to_index.get(x, [])

    @cached_property
    def arrow_adjacency(self) -> dict:
        return _adjacency(self.arrows, self.arrow_edges)

    def near_arrows(self, g, h) -> bool:
        return g == h or h in self.arrow_adjacency.get(g, ())

    def continue_src(self, g, y):
        """The arrow adjacent-or-equal to g whose source is y (None if absent)."""
        if self.src[g] == y:
            return g
        hits = [h for h in self.arrow_adjacency[g] if self.src[h] == y]
        return hits[0] if len(hits) == 1 else None

    def continue_tgt(self, g, y):
        """The arrow adjacent-or-equal to g whose target is y (None if absent)."""
        if self.tgt[g] == y:
            return g
        hits = [h for h in self.arrow_adjacency[g] if self.tgt[h] == y]
        return hits[0] if len(hits) == 1 else None

    def is_connected(self) -> bool:
        """Connected orbit space: objects linked by arrows and edges."""
        links = set(self.edges)
        links |= {frozenset((self.src[g], self.tgt[g])) for g in self.arrows if self.src[g] != self.tgt[g]}
        return len(components(self.objects, links)) == 1

    def with_changes(self, **fields) -> "FiniteGroupoid":
        """Copy with some tables replaced (used for fault injection)."""
        kw = dict(objects=self.objects, arrows=self.arrows, src=self.src, tgt=self.tgt,
                  unit=self.unit, inv=self.inv, comp=self.comp, edges=self.edges,
                  arrow_edges=self.arrow_edges, name=self.name)
        kw.update(fields)
        return FiniteGroupoid(**kw)


# -- validation ------------------------------------------------------------


def validate_groupoid(G: FiniteGroupoid) -> list[str]:
    """Groupoid axioms of the finite model; empty list means valid."""
    errs = _edge_problems(G.objects, G.edges, "object")
    errs += _edge_problems(G.arrows, G.arrow_edges, "arrow")
    objs = set(G.objects)
    arrows = set(G.arrows)
    for g in G.arrows:
        for name, table in (("src", G.src), ("tgt", G.tgt)):
            if table.get(g) not in objs:
                errs.append("%s(%r) is not an object" % (name, g))
        if G.inv.get(g) not in arrows:
            errs.append("inv(%r) is not an arrow" % (g,))
    for x in G.objects:
        u = G.unit.get(x)
        if u not in arrows:
            errs.append("unit(%r) is not an arrow" % (x,))
        elif G.src.get(u) != x or G.tgt.get(u) != x:
            errs.append("unit(%r) = %r is not a loop at %r" % (x, u, x))
    if errs:
        return errs

    for g in G.arrows:
        for h in G.arrows:
            composable = G.src[g] == G.tgt[h]
            defined = (g, h) in G.comp
            if composable and not defined:
                errs.append("composite of (%r, %r) missing" % (g, h))
            elif defined and not composable:
                errs.append("composite of (%r, %r) defined for non-composable pair" % (g, h))
            elif defined:
                gh = G.comp[g, h]
                if gh not in arrows:
                    errs.append("composite of (%r, %r) = %r is not an arrow" % (g, h, gh))
                elif G.src[gh] != G.src[h] or G.tgt[gh] != G.tgt[g]:
                    errs.append("composite of (%r, %r) has wrong source/target" % (g, h))
    if errs:
        return errs

    for g in G.arrows:
        if G.comp[g, G.unit[G.src[g]]] != g:
            errs.append("right unit law fails at %r" % (g,))
        if G.comp[G.unit[G.tgt[g]], g] != g:
            errs.append("left unit law fails at %r" % (g,))
        gi = G.inv[g]
        if G.src[gi] != G.tgt[g] or G.tgt[gi] != G.src[g]:
            errs.append("inv(%r) has wrong source/target" % (g,))
            continue
        if G.inv[gi] != g:
            errs.append("inv is not an involution at %r" % (g,))
        if G.comp[g, gi] != G.unit[G.tgt[g]]:
            errs.append("g∘inv(g) is not a unit at %r" % (g,))
        if G.comp[gi, g] != G.unit[G.src[g]]:
            errs.append("inv(g)∘g is not a unit at %r" % (g,))
    for h in G.arrows:
        for g in G.arrows_from(G.tgt[h]):
            gh = G.comp[g, h]
            for k in G.arrows_to(G.src[h]):
                if G.comp[gh, k] != G.comp[g, G.comp[h, k]]:
                    errs.append("associativity fails at (%r, %r, %r)" % (g, h, k))
    return errs


def etale_defects(G: FiniteGroupoid) -> list[str]:
    """Topological axioms: s and t are local bijections on stars, and the
    structure maps are continuous."""
    errs = []
    adj = G.arrow_adjacency
    for g in G.arrows:
        for name, proj in (("source", G.src), ("target", G.tgt)):
            images = [proj[h] for h in adj[g]]
            want = set(G.base.neighbors(proj[g]))
            if len(set(images)) != len(images) or set(images) != want:
                errs.append("%s map is not a local bijection at arrow %r" % (name, g))
    for e in G.edges:
        a, b = tuple(e)
        if not G.near_arrows(G.unit[a], G.unit[b]):
            errs.append("unit map not continuous on edge %r" % (sorted_ids(e),))
    for e in G.arrow_edges:
        g, h = tuple(e)
        if not G.near_arrows(G.inv[g], G.inv[h]):
            errs.append("inverse not continuous on arrow edge %r" % (sorted_ids(e),))
    if errs:
        return errs
    for h in G.arrows:
        for y in G.base.neighbors(G.src[h]):
            h2 = G.continue_src(h, y)
            for g in G.arrows_from(G.tgt[h]):
                g2 = G.continue_src(g, G.tgt[h2])
                if g2 is None or G.continue_src(G.comp[g, h], y) != G.comp.get((g2, h2)):
                    errs.append("composition not continuous at (%r, %r) towards %r" % (g, h, y))
    return errs


# -- constructions ---------------------------------------------------------


def trivial_groupoid(graph: ObjectGraph, name: str = "") -> FiniteGroupoid:
    """Only unit arrows; arrow ids are ('1', x)."""
    arrows = [("1", x) for x in graph.objects]
    return FiniteGroupoid(
        graph.objects, arrows,
        src={a: a[1] for a in arrows}, tgt={a: a[1] for a in arrows},
        unit={x: ("1", x) for x in graph.objects}, inv={a: a for a in arrows},
        comp={(a, a): a for a in arrows}, edges=graph.edges,
        arrow_edges=[(("1", a), ("1", b)) for a, b in map(tuple, graph.edges)],
        name=name,
    )


def point_groupoid() -> FiniteGroupoid:
    """PT: one object '*', one arrow."""
    return trivial_groupoid(ObjectGraph(["*"]), name="PT")


def group_as_groupoid(group: FiniteGroup, obj="*") -> FiniteGroupoid:
    """One-object groupoid with arrow ids (g, obj), matching action_groupoid."""
    return action_groupoid(group, ObjectGraph([obj]), lambda g, x: x, name="B" + (group.name or "G"))


class ActionError(GroupoidError):
    pass


def action_groupoid(group: FiniteGroup, graph: ObjectGraph, act, name: str = "") -> FiniteGroupoid:
    """Γ ⋉ X: arrows (γ, x) from x to γ·x; composite (γ', γx)(γ, x) = (γ'γ, x).

    ``act`` is a callable act(γ, x) or a dict keyed by (γ, x).
    """
    if isinstance(act, dict):
        table = dict(act)
    else:
        table = {(g, x): act(g, x) for g in group for x in graph.objects}
    for g in group:
        for x in graph.objects:
            if table.get((g, x)) not in set(graph.objects):
                raise ActionError("action of %r on %r is not an object" % (g, x))
    for x in graph.objects:
        if table[group.identity, x] != x:
            raise ActionError("identity does not act trivially on %r" % (x,))
    for g in group:
        for h in group:
            for x in graph.objects:
                if table[group.mul(g, h), x] != table[g, table[h, x]]:
                    raise ActionError("not an action at (%r, %r, %r)" % (g, h, x))
    for g in group:
        for e in graph.edges:
            if frozenset(table[g, x] for x in e) not in graph.edges:
                raise ActionError("element %r does not preserve edge %r" % (g, sorted_ids(e)))
    arrows = [(g, x) for g in group for x in graph.objects]
    src = {a: a[1] for a in arrows}
    tgt = {a: table[a] for a in arrows}
    unit = {x: (group.identity, x) for x in graph.objects}
    inv = {(g, x): (group.inv(g), table[g, x]) for g, x in arrows}
    comp = {}
    for g, x in arrows:
        y = table[g, x]
        for g2 in group:
            comp[(g2, y), (g, x)] = (group.mul(g2, g), x)
    arrow_edges = [((g, a), (g, b)) for g in group for a, b in map(tuple, graph.edges)]
    G = FiniteGroupoid(graph.objects, arrows, src, tgt, unit, inv, comp, graph.edges, arrow_edges,
                       name=name or "%s⋉X" % (group.name or "Γ"))
    G.action = (group, graph, table)
    return G


def restrict(G: FiniteGroupoid, subset: Iterable) -> FiniteGroupoid:
    """Full subgroupoid on the given objects (induced topology)."""
    T0 = set(subset)
    if not T0:
        raise GroupoidError("cannot restrict to an empty set of objects")
    unknown = T0 - set(G.objects)
    if unknown:
        raise GroupoidError("unknown objects %r" % sorted_ids(unknown))
    arrows = [g for g in G.arrows if G.src[g] in T0 and G.tgt[g] in T0]
    keep = set(arrows)
    return FiniteGroupoid(
        T0, arrows,
        {g: G.src[g] for g in arrows}, {g: G.tgt[g] for g in arrows},
        {x: G.unit[x] for x in T0}, {g: G.inv[g] for g in arrows},
        {k: v for k, v in G.comp.items() if k[0] in keep and k[1] in keep},
        edges=[e for e in G.edges if e <= T0],
        arrow_edges=[e for e in G.arrow_edges if e <= keep],
        name="%s|%s" % (G.name, sorted_ids(T0)),
    )


# -- orbits and isotropy ---------------------------------------------------


def orbits(G: FiniteGroupoid) -> list[tuple]:
    """Partition of the objects into orbits, each sorted, ordered by minimum."""
    links = [(G.src[g], G.tgt[g]) for g in G.arrows if G.src[g] != G.tgt[g]]
    return components(G.objects, _edge_set(links))


def orbit_map(G: FiniteGroupoid) -> dict:
    """object -> representative (minimum object of its orbit)."""
    return {x: block[0] for block in orbits(G) for x in block}


def isotropy(G: FiniteGroupoid, x) -> FiniteGroup:
    """Isotropy group at x; elements are the loop arrows at x."""
    if x not in G.base.adjacency:
        raise GroupoidError("unknown object %r" % (x,))
    loops = G.hom(x, x)
    table = {(g, h): G.comp[g, h] for g in loops for h in loops}
    return FiniteGroup(loops, table, "Iso(%r)" % (x,))


# -- homomorphisms ---------------------------------------------------------


class GroupoidHom:
    """Functor between finite groupoids: object map plus arrow map."""

    def __init__(self, source: FiniteGroupoid, target: FiniteGroupoid, obj_map: dict, arrow_map: dict,
                 name: str = ""):
        self.source = source
        self.target = target
        self.obj_map = dict(obj_map)
        self.arrow_map = dict(arrow_map)
        self.name = name

    def __call__(self, g):
        return self.arrow_map[g]

    def __repr__(self):
        return "GroupoidHom(%s -> %s)" % (self.source.name, self.target.name)

    def functor_defects(self) -> list[str]:
        S, T = self.source, self.target
        errs = []
        for x in S.objects:
            if self.obj_map.get(x) not in T.base.adjacency:
                errs.append("object %r maps outside the target" % (x,))
        for g in S.arrows:
            if self.arrow_map.get(g) not in T.src:
                errs.append("arrow %r maps outside the target" % (g,))
        if errs:
            return errs
        for g in S.arrows:
            fg = self.arrow_map[g]
            if T.src[fg] != self.obj_map[S.src[g]] or T.tgt[fg] != self.obj_map[S.tgt[g]]:
                errs.append("arrow %r: source/target not preserved" % (g,))
        for x in S.objects:
            if self.arrow_map[S.unit[x]] != T.unit[self.obj_map[x]]:
                errs.append("unit at %r not preserved" % (x,))
        if errs:
            return errs
        for (g, h), gh in S.comp.items():
            if T.comp.get((self.arrow_map[g], self.arrow_map[h])) != self.arrow_map[gh]:
                errs.append("composition not preserved at (%r, %r)" % (g, h))
        return errs

    def is_functor(self) -> bool:
        return not self.functor_defects()

    def continuity_defects(self) -> list[str]:
        S, T = self.source, self.target
        errs = []
        for e in S.edges:
            a, b = tuple(e)
            if not T.base.near(self.obj_map[a], self.obj_map[b]):
                errs.append("object edge %r torn apart" % (sorted_ids(e),))
        for e in S.arrow_edges:
            g, h = tuple(e)
            if not T.near_arrows(self.arrow_map[g], self.arrow_map[h]):
                errs.append("arrow edge %r torn apart" % (sorted_ids(e),))
        return errs

    def is_continuous(self) -> bool:
        return not self.continuity_defects()

    def then(self, other: "GroupoidHom") -> "GroupoidHom":
        """other ∘ self"""
        return GroupoidHom(
            self.source, other.target,
            {x: other.obj_map[y] for x, y in self.obj_map.items()},
            {g: other.arrow_map[h] for g, h in self.arrow_map.items()},
        )


def identity_hom(G: FiniteGroupoid) -> GroupoidHom:
    return GroupoidHom(G, G, {x: x for x in G.objects}, {g: g for g in G.arrows}, name="id")


def inclusion(sub: FiniteGroupoid, G: FiniteGroupoid) -> GroupoidHom:
    return GroupoidHom(sub, G, {x: x for x in sub.objects}, {g: g for g in sub.arrows}, name="incl")


def constant_hom(G: FiniteGroupoid, H: FiniteGroupoid, obj) -> GroupoidHom:
    return GroupoidHom(G, H, {x: obj for x in G.objects}, {g: H.unit[obj] for g in G.arrows})


class EquivalenceCheck(NamedTuple):
    ok: bool
    witness: str


def is_equivalence_hom(phi: GroupoidHom) -> EquivalenceCheck:
    """Bijective on orbits and fully faithful (isotropy and hom-sets)."""
    S, T = phi.source, phi.target
    defects = phi.functor_defects()
    if defects:
        return EquivalenceCheck(False, "not a functor: " + defects[0])
    rep_S = orbit_map(S)
    rep_T = orbit_map(T)
    induced = {}
    for x in S.objects:
        induced.setdefault(rep_S[x], rep_T[phi.obj_map[x]])
    if len(set(induced.values())) != len(induced):
        return EquivalenceCheck(False, "orbit map not injective")
    missing = sorted_ids(set(rep_T.values()) - set(induced.values()))
    if missing:
        return EquivalenceCheck(False, "orbit of %r not hit" % (missing[0],))
    for x in S.objects:
        for y in S.objects:
            if rep_S[x] != rep_S[y]:
                continue
            here = S.hom(x, y)
            there = T.hom(phi.obj_map[x], phi.obj_map[y])
            images = {phi.arrow_map[g] for g in here}
            if len(images) != len(here) or len(here) != len(there):
                label = "isotropy" if x == y else "arrows"
                return EquivalenceCheck(False, "%s %r -> %r not mapped bijectively" % (label, x, y))
    blocks = ", ".join("%r->%r" % kv for kv in sorted(induced.items(), key=order_key))
    return EquivalenceCheck(True, "orbit bijection " + blocks)


def find_natural_transformation(phi: GroupoidHom, psi: GroupoidHom) -> dict | None:
    """h with psi(g) = h(tgt g) phi(g) h(src g)^-1, or None.

    Per orbit, h is determined by its value at the minimal object, so the
    search runs over the arrows phi(x0) -> psi(x0).
    """
    S, T = phi.source, phi.target
    h: dict = {}
    for block in orbits(S):
        x0 = block[0]
        paths = {x0: S.unit[x0]}
        for y in block[1:]:
            paths[y] = S.hom(x0, y)[0]
        found = None
        for cand in T.hom(phi.obj_map[x0], psi.obj_map[x0]):
            trial = {}
            for y, a in paths.items():
                # h(y) = psi(a) h(x0) phi(a)^-1
                trial[y] = T.prod(psi(a), cand, T.inv[phi(a)])
            if all(psi(g) == T.prod(trial[S.tgt[g]], phi(g), T.inv[trial[S.src[g]]])
                   for y in block for g in S.arrows_from(y)):
                found = trial
                break
        if found is None:
            return None
        h.update(found)
    return h


# -- covers and localization -----------------------------------------------


class OpenCover:
    """Indexed family of connected object subsets covering the objects."""

    def __init__(self, pieces: Iterable[Iterable]):
        self.pieces = tuple(frozenset(p) for p in pieces)

    def __len__(self):
        return len(self.pieces)

    def __repr__(self):
        return "OpenCover(%r)" % [sorted_ids(p) for p in self.pieces]

    def problems(self, graph: ObjectGraph) -> list[str]:
        errs = []
        objs = set(graph.objects)
        for i, p in enumerate(self.pieces):
            if not p:
                errs.append("piece %d is empty" % i)
            elif not p <= objs:
                errs.append("piece %d has unknown objects %r" % (i, sorted_ids(p - objs)))
            elif len(components(p, [e for e in graph.edges if e <= p])) != 1:
                errs.append("piece %d is not connected" % i)
        covered = set().union(*self.pieces) if self.pieces else set()
        if covered != objs:
            errs.append("cover misses objects %r" % sorted_ids(objs - covered))
        return errs

    def covers_edges(self, graph: ObjectGraph) -> bool:
        return all(any(e <= p for p in self.pieces) for e in graph.edges)

    def first_piece(self, x) -> int:
        for i, p in enumerate(self.pieces):
            if x in p:
                return i
        raise GroupoidError("object %r not covered" % (x,))

    @classmethod
    def trivial(cls, graph: ObjectGraph) -> "OpenCover":
        return cls([graph.objects])

    @classmethod
    def by_edges(cls, graph: ObjectGraph) -> "OpenCover":
        """One piece per edge, plus singletons for isolated objects."""
        pieces = [frozenset(e) for e in sorted(graph.edges, key=order_key)]
        covered = set().union(*pieces) if pieces else set()
        pieces += [frozenset([x]) for x in graph.objects if x not in covered]
        return cls(pieces)


class Localization(NamedTuple):
    groupoid: FiniteGroupoid
    proj: GroupoidHom
    cover: OpenCover


def localize(G: FiniteGroupoid, cover: OpenCover) -> Localization:
    """G_U: objects (i, x) with x in U_i, arrows (j, g, i) with src g in U_i
    and tgt g in U_j; (k, g', j)(j, g, i) = (k, g'g, i)."""
    errs = cover.problems(G.base)
    if errs:
        raise GroupoidError("bad cover: " + "; ".join(errs))
    P = cover.pieces
    objects = [(i, x) for i, p in enumerate(P) for x in sorted_ids(p)]
    arrows = [(j, g, i) for g in G.arrows
              for i, pi in enumerate(P) if G.src[g] in pi
              for j, pj in enumerate(P) if G.tgt[g] in pj]
    src = {a: (a[2], G.src[a[1]]) for a in arrows}
    tgt = {a: (a[0], G.tgt[a[1]]) for a in arrows}
    unit = {(i, x): (i, G.unit[x], i) for i, x in objects}
    inv = {(j, g, i): (i, G.inv[g], j) for j, g, i in arrows}
    by_src = defaultdict(list)
    for a in arrows:
        by_src[src[a]].append(a)
    comp = {}
    for j, g, i in arrows:
        for (k, g2, j2) in by_src[(j, G.tgt[g])]:
            comp[(k, g2, j2), (j, g, i)] = (k, G.comp[g2, g], i)
    edges = [((i, a), (i, b)) for i, p in enumerate(P) for a, b in map(tuple, G.edges) if a in p and b in p]
    arrow_set = set(arrows)
    arrow_edges = []
    for e in G.arrow_edges:
        g, h = tuple(e)
        for i, pi in enumerate(P):
            for j, pj in enumerate(P):
                if (j, g, i) in arrow_set and (j, h, i) in arrow_set:
                    arrow_edges.append(((j, g, i), (j, h, i)))
    GU = FiniteGroupoid(objects, arrows, src, tgt, unit, inv, comp, edges, arrow_edges,
                        name="%s_U" % G.name)
    GU.localized_from = G
    proj = GroupoidHom(GU, G, {o: o[1] for o in objects}, {a: a[1] for a in arrows}, name="proj")
    return Localization(GU, proj, cover)


# -- products --------------------------------------------------------------


def product_groupoid(H: FiniteGroupoid, G: FiniteGroupoid) -> FiniteGroupoid:
    """H × G with the box-product topology on objects and arrows."""
    objects = [(v, x) for v in H.objects for x in G.objects]
    arrows = [(h, g) for h in H.arrows for g in G.arrows]
    comp = {}
    for (h1, h2), h in H.comp.items():
        for (g1, g2), g in G.comp.items():
            comp[(h1, g1), (h2, g2)] = (h, g)
    edges = [((a, x), (b, x)) for a, b in map(tuple, H.edges) for x in G.objects]
    edges += [((v, a), (v, b)) for v in H.objects for a, b in map(tuple, G.edges)]
    arrow_edges = [((a, g), (b, g)) for a, b in map(tuple, H.arrow_edges) for g in G.arrows]
    arrow_edges += [((h, a), (h, b)) for h in H.arrows for a, b in map(tuple, G.arrow_edges)]
    return FiniteGroupoid(
        objects, arrows,
        {(h, g): (H.src[h], G.src[g]) for h, g in arrows},
        {(h, g): (H.tgt[h], G.tgt[g]) for h, g in arrows},
        {(v, x): (H.unit[v], G.unit[x]) for v, x in objects},
        {(h, g): (H.inv[h], G.inv[g]) for h, g in arrows},
        comp, edges, arrow_edges, name="%s×%s" % (H.name, G.name),
    )


def isomorphic(G: FiniteGroupoid, H: FiniteGroupoid) -> GroupoidHom | None:
    """Exhaustive search for a groupoid isomorphism (structure only)."""
    if len(G.objects) != len(H.objects) or len(G.arrows) != len(H.arrows):
        return None
    Gx, Hx = list(G.objects), list(H.objects)

    def sig(K, x):
        return (len(K.hom(x, x)), len(K.arrows_from(x)))

    cands = [[y for y in Hx if sig(H, y) == sig(G, x)] for x in Gx]
    for images in itertools.product(*cands):
        if len(set(images)) != len(images):
            continue
        omap = dict(zip(Gx, images))
        amap = _match_arrows(G, H, omap)
        if amap is not None:
            return GroupoidHom(G, H, omap, amap)
    return None


def _match_arrows(G, H, omap) -> dict | None:
    # a functor bijective on objects is determined by generators of each hom-set
    # block; brute force over isotropy and one connecting arrow per object
    amap: dict = {}
    for block in orbits(G):
        x0 = block[0]
        iso_G = isotropy(G, x0)
        iso_H_elems = H.hom(omap[x0], omap[x0])
        if len(iso_G) != len(iso_H_elems):
            return None
        iso_H = isotropy(H, omap[x0])
        auts = [f for f in homomorphisms(iso_G, iso_H) if len(set(f.values())) == len(iso_G)]
        conn_choices = [H.hom(omap[x0], omap[y]) for y in block[1:]]
        ok = False
        for f in auts:
            for conns in itertools.product(*conn_choices):
                trial = {}
                path = {x0: (G.unit[x0], H.unit[omap[x0]])}
                for y, c in zip(block[1:], conns):
                    path[y] = (G.hom(x0, y)[0], c)
                for y in block:
                    for z in block:
                        for g in G.hom(y, z):
                            # g = pz ∘ (pz^-1 g py) ∘ py^-1 with middle in isotropy
                            py_G, py_H = path[y]
                            pz_G, pz_H = path[z]
                            mid = G.prod(G.inv[pz_G], g, py_G)
                            trial[g] = H.prod(pz_H, f[mid], H.inv[py_H])
                if len(set(trial.values())) == len(trial) and all(
                        trial[G.comp[a, b]] == H.comp.get((trial[a], trial[b])) for (a, b) in G.comp
                        if a in trial and b in trial):
                    amap.update(trial)
                    ok = True
                    break
            if ok:
                break
        if not ok:
            return None
    return amap


def random_groupoid(rng, max_objects: int = 8, max_arrows: int = 64) -> FiniteGroupoid:
    """Disjoint union of transitive blocks (pair groupoid × group), relabelled.

    Arrow ids are shuffled integers so nothing about the labels gives the
    structure away.  The topology is discrete.
    """
    menu = [cyclic(1), cyclic(2), cyclic(3), cyclic(4), dihedral(2), symmetric(3)]
    while True:
        n_obj = int(rng.integers(1, max_objects + 1))
        sizes = []
        left = n_obj
        while left:
            k = int(rng.integers(1, left + 1))
            sizes.append(k)
            left -= k
        groups = [menu[int(rng.integers(0, len(menu)))] for _ in sizes]
        total = sum(k * k * len(g) for k, g in zip(sizes, groups))
        if total <= max_arrows:
            break
    raw = []
    obj = 0
    for b, (k, grp) in enumerate(zip(sizes, groups)):
        objs = list(range(obj, obj + k))
        obj += k
        for y in objs:
            for x in objs:
                for h in grp:
                    raw.append((b, grp, y, h, x))
    labels = list(range(len(raw)))
    rng.shuffle(labels)
    name = {(r[0], r[2], r[3], r[4]): labels[i] for i, r in enumerate(raw)}
    src, tgt, inv, comp, unit = {}, {}, {}, {}, {}
    for b, grp, y, h, x in raw:
        a = name[b, y, h, x]
        src[a], tgt[a] = x, y
        inv[a] = name[b, x, grp.inv(h), y]
        if h == grp.identity and x == y:
            unit[x] = a
    for b, grp, y, h, x in raw:
        for b2, grp2, z, h2, y2 in raw:
            if b2 == b and y2 == y:
                comp[name[b, z, h2, y], name[b, y, h, x]] = name[b, z, grp.mul(h2, h), x]
    perm = list(range(n_obj))
    rng.shuffle(perm)
    relabel = {i: perm[i] for i in range(n_obj)}
    return FiniteGroupoid(
        [relabel[x] for x in range(n_obj)], list(src),
        {a: relabel[x] for a, x in src.items()}, {a: relabel[y] for a, y in tgt.items()},
        {relabel[x]: a for x, a in unit.items()}, inv, comp, name="random",
    )


def random_action_groupoid(rng, max_objects: int = 8, max_arrows: int = 64) -> FiniteGroupoid:
    """Random Γ ⋉ X with X a union of coset spaces and Γ-invariant edges."""
    menu = [cyclic(1), cyclic(2), cyclic(3), cyclic(4), dihedral(2), symmetric(3)]
    while True:
        grp = menu[int(rng.integers(0, len(menu)))]
        objects, table = [], {}
        for k in range(int(rng.integers(1, 4))):
            h = grp.elements[int(rng.integers(0, len(grp)))]
            sub = grp.closure([h])
            cosets = []
            for g in grp:
                c = frozenset(grp.mul(g, s) for s in sub)
                if c not in cosets:
                    cosets.append(c)
            for c in cosets:
                objects.append((k, cosets.index(c)))
            for g in grp:
                for c in cosets:
                    image = frozenset(grp.mul(g, x) for x in c)
                    table[g, (k, cosets.index(c))] = (k, cosets.index(image))
        if len(objects) <= max_objects and len(objects) * len(grp) <= max_arrows:
            break
    edges = set()
    for _ in range(int(rng.integers(0, 4))):
        a, b = (objects[int(i)] for i in rng.integers(0, len(objects), size=2))
        if a != b:
            edges |= {frozenset((table[g, a], table[g, b])) for g in grp}
    return action_groupoid(grp, ObjectGraph(objects, edges), table, name="random-action")
