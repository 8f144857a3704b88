"""Test-side oracles and fault injectors, kept apart from the package so the
checks do not share code with what they check."""

import itertools

from etalebench.groupoid import OpenCover


def groupoid_mutants(G, rng):
    """Single-fault copies of G, one per applicable fault kind."""
    arrows = list(G.arrows)
    out = []
    pick = lambda seq: seq[int(rng.integers(0, len(seq)))]  # noqa: E731

    pairs = sorted(G.comp, key=repr)
    g, h = pick(pairs)
    comp = dict(G.comp)
    del comp[g, h]
    out.append(("comp-deleted", G.with_changes(comp=comp)))
    if len(arrows) > 1:
        g, h = pick(pairs)
        others = [a for a in arrows if a != G.comp[g, h]]
        comp = dict(G.comp)
        comp[g, h] = pick(others)
        out.append(("comp-corrupted", G.with_changes(comp=comp)))

        g = pick(arrows)
        inv = dict(G.inv)
        inv[g] = pick([a for a in arrows if a != G.inv[g]])
        out.append(("inv-corrupted", G.with_changes(inv=inv)))

        x = pick(list(G.objects))
        unit = dict(G.unit)
        unit[x] = pick([a for a in arrows if a != G.unit[x]])
        out.append(("unit-corrupted", G.with_changes(unit=unit)))
    if len(G.objects) > 1:
        g = pick(arrows)
        tgt = dict(G.tgt)
        tgt[g] = pick([x for x in G.objects if x != G.tgt[g]])
        out.append(("tgt-corrupted", G.with_changes(tgt=tgt)))
    return out


def closure_orbits(G):
    """Orbits by transitive closure of the relation x ~ y iff hom(x, y) is
    nonempty (Floyd-Warshall style)."""
    objs = list(G.objects)
    reach = {(x, y): x == y for x in objs for y in objs}
    for g in G.arrows:
        reach[G.src[g], G.tgt[g]] = True
    for k in objs:
        for i in objs:
            for j in objs:
                if reach[i, k] and reach[k, j]:
                    reach[i, j] = True
    blocks = {frozenset(y for y in objs if reach[x, y]) for x in objs}
    return sorted((sorted(b, key=repr) for b in blocks), key=repr)


def random_cover(G, rng):
    """Connected pieces: a star around every object (random subset of its
    neighbours), plus a few duplicated singletons."""
    pieces = []
    for x in G.objects:
        nbrs = [y for y in G.base.neighbors(x) if rng.random() < 0.5]
        pieces.append([x] + nbrs)
    for _ in range(int(rng.integers(0, 3))):
        pieces.append([G.objects[int(rng.integers(0, len(G.objects)))]])
    return OpenCover(pieces)


def crossed_module_mutants(cm, rng):
    """Copies of cm with a fault that must break an axiom: one action entry
    changed (the action of that element stops being a bijection of Γ), or
    μ(1) moved off the identity (μ stops being a homomorphism).  Changing
    some other μ value is not used: it can land on a different valid
    crossed module."""
    from etalebench.developable import CrossedModule

    out = []
    S, Gam = cm.S, cm.Gamma
    keys = sorted(cm.action, key=repr)
    if len(Gam) > 1:
        s, g = keys[int(rng.integers(0, len(keys)))]
        action = dict(cm.action)
        action[s, g] = [a for a in Gam.elements if a != cm.action[s, g]][int(rng.integers(0, len(Gam) - 1))]
        out.append(("action-corrupted", CrossedModule(Gam, S, cm.mu, action)))
    if len(S) > 1:
        mu = dict(cm.mu)
        e = Gam.identity
        mu[e] = [s for s in S.elements if s != cm.mu[e]][int(rng.integers(0, len(S) - 1))]
        out.append(("mu-corrupted", CrossedModule(Gam, S, mu, cm.action)))
    return out


def brute_force_h2_count(Q, C):
    """|H^2(Q, C)| for trivial action by listing every normalized 2-cochain.

    Independent of the package's backtracking: plain product over all
    cochain values, cocycle test, then orbits under coboundaries.
    """
    e, ce = Q.identity, C.identity
    pairs = [(a, b) for a in Q.elements for b in Q.elements if a != e and b != e]
    cocycles = []
    for vals in itertools.product(C.elements, repeat=len(pairs)):
        c = dict(zip(pairs, vals))
        f = lambda a, b: ce if e in (a, b) else c[a, b]  # noqa: E731
        if all(C.mul(f(b, d), f(a, Q.mul(b, d))) == C.mul(f(Q.mul(a, b), d), f(a, b))
               for a in Q.elements for b in Q.elements for d in Q.elements):
            cocycles.append(tuple(f(a, b) for a in Q.elements for b in Q.elements))
    bounds = set()
    for vals in itertools.product(C.elements, repeat=len(Q) - 1):
        beta = dict(zip([q for q in Q.elements if q != e], vals))
        beta[e] = ce
        bounds.add(tuple(C.mul(C.mul(beta[a], beta[b]), C.inv(beta[Q.mul(a, b)]))
                         for a in Q.elements for b in Q.elements))
    seen, classes = set(), 0
    for z in cocycles:
        if z in seen:
            continue
        classes += 1
        for b in bounds:
            seen.add(tuple(C.mul(x, y) for x, y in zip(z, b)))
    return classes
