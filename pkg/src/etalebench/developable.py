"""Developable groupoids Γ⋉X: equivariant pairs and the crossed module of
self-equivalences."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .bundles import (
    BundleError,
    MorphismSpace,
    PointedBundle,
    canonical_presentation,
    presentation_of_hom,
    spanning_steps,
)
from .groupoid import FiniteGroupoid, GroupoidError, GroupoidHom, orbits
from .groups import (
    FiniteGroup,
    automorphisms,
    hom_key,
    homomorphisms,
)
from .ordering import order_key, sorted_ids


class DevelopableError(ValueError):
    pass


def action_data(G: FiniteGroupoid):
    """(group, graph, table) of an action groupoid."""
    data = getattr(G, "action", None)
    if data is None:
        raise DevelopableError("%s is not an action groupoid" % (G.name or "groupoid"))
    return data


@dataclass(frozen=True)
class EquivariantPair:
    f: tuple        # ((x, f(x)), ...) in object order
    psi: tuple      # ((γ, ψ(γ)), ...) in element order

    @classmethod
    def make(cls, f: dict, psi: dict) -> "EquivariantPair":
        return cls(tuple(sorted(f.items(), key=order_key)), tuple(sorted(psi.items(), key=order_key)))

    @property
    def fmap(self) -> dict:
        return dict(self.f)

    @property
    def psimap(self) -> dict:
        return dict(self.psi)


def check_equivariant_pair(pair: EquivariantPair, source: FiniteGroupoid, target: FiniteGroupoid):
    """(ok, first violation or None)."""
    Gam, X, act = action_data(source)
    Gam2, X2, act2 = action_data(target)
    f, psi = pair.fmap, pair.psimap
    if set(f) != set(X.objects) or not set(f.values()) <= set(X2.objects):
        return False, "f is not a map between object sets"
    if set(psi) != set(Gam.elements) or not set(psi.values()) <= set(Gam2.elements):
        return False, "psi is not a map between groups"
    for a in Gam:
        for b in Gam:
            if psi[Gam.mul(a, b)] != Gam2.mul(psi[a], psi[b]):
                return False, "psi is not a homomorphism at (%r, %r)" % (a, b)
    for e in X.edges:
        x, y = tuple(e)
        if not X2.near(f[x], f[y]):
            return False, "f tears edge %r" % (sorted_ids(e),)
    for g in Gam:
        for x in X.objects:
            if f[act[g, x]] != act2[psi[g], f[x]]:
                return False, "equivariance fails at (%r, %r): f(%r)=%r but %r" % (
                    g, x, act[g, x], f[act[g, x]], act2[psi[g], f[x]])
    return True, None


def enumerate_equivariant_pairs(source: FiniteGroupoid, target: FiniteGroupoid, star=None) -> list[EquivariantPair]:
    """All (f, ψ): ψ ∈ Hom(Γ, Γ'), f continuous ψ-equivariant.

    Exhaustive over Hom(Γ, Γ') × (X')^X; independent of the bundle search.
    """
    Gam, X, act = action_data(source)
    Gam2, X2, act2 = action_data(target)
    if not X.is_tree():
        raise DevelopableError("object graph of the source is not a tree")
    out = []
    homs = homomorphisms(Gam, Gam2)
    for fvals in itertools.product(X2.objects, repeat=len(X.objects)):
        f = dict(zip(X.objects, fvals))
        if any(not X2.near(f[a], f[b]) for a, b in map(tuple, X.edges)):
            continue
        for psi in homs:
            if all(f[act[g, x]] == act2[psi[g], f[x]] for g in Gam for x in X.objects):
                out.append(EquivariantPair.make(f, psi))
    return sorted(out, key=order_key)


def act_on_pair(gamma2, pair: EquivariantPair, target: FiniteGroupoid) -> EquivariantPair:
    """γ'.(f, ψ) = (t_γ' ∘ f, Ad(γ') ∘ ψ)"""
    Gam2, X2, act2 = action_data(target)
    f = {x: act2[gamma2, y] for x, y in pair.f}
    psi = {g: Gam2.conj(gamma2, h) for g, h in pair.psi}
    return EquivariantPair.make(f, psi)


def pair_orbits(pairs, target: FiniteGroupoid) -> list[tuple]:
    Gam2 = action_data(target)[0]
    index = {p: i for i, p in enumerate(pairs)}
    seen, out = set(), []
    for p in pairs:
        if p in seen:
            continue
        orbit = {act_on_pair(g, p, target) for g in Gam2}
        seen |= orbit
        out.append(tuple(sorted(index[q] for q in orbit)))
    return out


def pair_hom(pair: EquivariantPair, source: FiniteGroupoid, target: FiniteGroupoid) -> GroupoidHom:
    """(γ, x) ↦ (ψγ, f x)"""
    f, psi = pair.fmap, pair.psimap
    return GroupoidHom(source, target, f, {(g, x): (psi[g], f[x]) for g, x in source.arrows})


def pair_to_bundle(pair: EquivariantPair, source: FiniteGroupoid, target: FiniteGroupoid, star) -> PointedBundle:
    """E_φ for φ = (f, ψ), pointed at (1, star)."""
    phi = pair_hom(pair, source, target)
    errs = phi.functor_defects() + phi.continuity_defects()
    if errs:
        raise DevelopableError("pair does not define a continuous functor: " + errs[0])
    return presentation_of_hom(phi).pointed(star)


def pair_class_map(pairs, space: MorphismSpace) -> list[int]:
    """Index of the pointed morphism class of each pair."""
    G, G2 = space.source, space.target
    return [space.class_of(pair_to_bundle(p, G, G2, space.star)) for p in pairs]


# -- crossed modules -------------------------------------------------------


@dataclass
class CrossedModule:
    Gamma: FiniteGroup
    S: FiniteGroup
    mu: dict            # γ -> s
    action: dict        # (s, γ) -> s·γ
    labels: dict | None = None   # s -> human-readable (f, ψ)


def _graph_automorphisms(X) -> list[dict]:
    objs = X.objects
    out = []
    for perm in itertools.permutations(objs):
        f = dict(zip(objs, perm))
        if all(frozenset((f[a], f[b])) in X.edges for a, b in map(tuple, X.edges)):
            out.append(f)
    return out


def selfequivalence_crossed_module(G: FiniteGroupoid) -> CrossedModule:
    """μ: Γ → S, S = {(f, ψ): f graph automorphism, ψ ∈ Aut Γ, f ψ-equivariant},
    μ(γ) = (t_γ, Ad γ), S acting on Γ through ψ."""
    Gam, X, act = action_data(G)
    if not X.is_tree():
        raise DevelopableError("object graph is not a tree")
    objs = X.objects
    auts = automorphisms(Gam)
    elements, lookup = [], {}
    for f in _graph_automorphisms(X):
        for psi in auts:
            if all(f[act[g, x]] == act[psi[g], f[x]] for g in Gam for x in objs):
                key = (tuple(f[x] for x in objs), hom_key(Gam, psi))
                elements.append(key)
                lookup[key] = (f, psi)
    elements = sorted_ids(elements)

    def mul(a, b):
        f1, p1 = lookup[a]
        f2, p2 = lookup[b]
        return (tuple(f1[f2[x]] for x in objs), tuple(p1[p2[g]] for g in Gam.elements))

    S = FiniteGroup.from_function(elements, mul, "S(%s)" % G.name)
    mu = {}
    for g in Gam:
        key = (tuple(act[g, x] for x in objs), tuple(Gam.conj(g, h) for h in Gam.elements))
        if key not in lookup:
            raise DevelopableError("t_γ, Ad γ is not an element of S for γ=%r" % (g,))
        mu[g] = key
    action = {(s, g): lookup[s][1][g] for s in elements for g in Gam}
    labels = {s: {"f": dict(lookup[s][0]), "psi": dict(lookup[s][1])} for s in elements}
    return CrossedModule(Gam, S, mu, action, labels)


def conjugation_crossed_module(Gam: FiniteGroup) -> CrossedModule:
    """μ = Ad: Γ → Aut(Γ) with the tautological action."""
    auts = automorphisms(Gam)
    keys = sorted_ids(hom_key(Gam, a) for a in auts)
    lookup = {hom_key(Gam, a): a for a in auts}
    S = FiniteGroup.from_function(
        keys, lambda a, b: tuple(lookup[a][lookup[b][g]] for g in Gam.elements), "Aut(%s)" % Gam.name)
    mu = {g: tuple(Gam.conj(g, h) for h in Gam.elements) for g in Gam}
    action = {(s, g): lookup[s][g] for s in keys for g in Gam}
    return CrossedModule(Gam, S, mu, action)


def validate_crossed_module(cm: CrossedModule) -> list[str]:
    """Whitehead axioms, exhaustively; empty list means valid."""
    Gam, S, mu, act = cm.Gamma, cm.S, cm.mu, cm.action
    errs = ["group Γ: " + e for e in Gam.validate()] + ["group S: " + e for e in S.validate()]
    if errs:
        return errs
    for g in Gam:
        if mu.get(g) not in S:
            errs.append("μ(%r) is not in S" % (g,))
        for s in S:
            if act.get((s, g)) not in Gam:
                errs.append("action of %r on %r undefined" % (s, g))
    if errs:
        return errs
    for a in Gam:
        for b in Gam:
            if mu[Gam.mul(a, b)] != S.mul(mu[a], mu[b]):
                errs.append("μ is not a homomorphism at (%r, %r)" % (a, b))
    for s in S:
        for a in Gam:
            for b in Gam:
                if act[s, Gam.mul(a, b)] != Gam.mul(act[s, a], act[s, b]):
                    errs.append("action of %r is not an automorphism at (%r, %r)" % (s, a, b))
        if len({act[s, a] for a in Gam}) != len(Gam):
            errs.append("action of %r is not bijective" % (s,))
    for a in Gam:
        if act[S.identity, a] != a:
            errs.append("identity of S moves %r" % (a,))
        for s in S:
            for t in S:
                if act[S.mul(s, t), a] != act[s, act[t, a]]:
                    errs.append("action law fails at (%r, %r, %r)" % (s, t, a))
    for s in S:
        for a in Gam:
            if mu[act[s, a]] != S.conj(s, mu[a]):
                errs.append("equivariance fails at (%r, %r)" % (s, a))
    for a in Gam:
        for b in Gam:
            if act[mu[a], b] != Gam.conj(a, b):
                errs.append("Peiffer identity fails at (%r, %r)" % (a, b))
    return errs


def random_tree_action(rng, max_group: int = 4, max_objects: int = 5, name: str = "") -> FiniteGroupoid:
    """Γ⋉X for a random tree X (each new vertex hangs off an earlier one)
    and a random homomorphism Γ → Aut(X)."""
    from .groupoid import ObjectGraph, action_groupoid
    from .groups import cyclic, dihedral

    n = int(rng.integers(2, max_objects + 1)) if hasattr(rng, "integers") else rng.randint(2, max_objects)
    pick = (lambda k: int(rng.integers(0, k))) if hasattr(rng, "integers") else (lambda k: rng.randrange(k))
    edges = [(i, pick(i)) for i in range(1, n)]
    X = ObjectGraph(range(n), edges)
    menu = [g for g in (cyclic(1), cyclic(2), cyclic(3), cyclic(4), dihedral(2)) if len(g) <= max_group]
    Gam = menu[pick(len(menu))]
    autos = _graph_automorphisms(X)
    keys = [tuple(f[x] for x in X.objects) for f in autos]
    lookup = dict(zip(keys, autos))
    AutX = FiniteGroup.from_function(keys, lambda a, b: tuple(lookup[a][lookup[b][x]] for x in X.objects))
    homs = homomorphisms(Gam, AutX)
    h = homs[pick(len(homs))]
    table = {(g, x): lookup[h[g]][x] for g in Gam for x in X.objects}
    return action_groupoid(Gam, X, table, name=name or "tree%d" % n)
