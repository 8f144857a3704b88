"""Group extensions by factor sets: H² classification, the H³ obstruction for
outer actions, and split sections of groupoid extensions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .groupoid import GroupoidHom
from .groups import (
    FiniteGroup,
    automorphisms,
    compose_maps,
    hom_key,
    homomorphisms,
    identity_map,
    inner_automorphism,
    invert_map,
)
from .ordering import order_key, sorted_ids


class ExtensionError(ValueError):
    pass


class CapExceeded(ExtensionError):
    pass


def trivial_action(Q: FiniteGroup, C: FiniteGroup) -> dict:
    return {q: identity_map(C) for q in Q}


@dataclass
class ExtensionClass:
    cocycle: dict          # (q1, q2) -> C, normalized
    group: FiniteGroup     # pairs (a, q)
    zero: object

    @property
    def split(self) -> bool:
        return all(v == self.zero for v in self.cocycle.values())


def _check_action(Q, C, action):
    for q in Q:
        a = action.get(q)
        if a is None or set(a) != set(C.elements) or len(set(a.values())) != len(C):
            raise ExtensionError("action of %r is not a bijection of C" % (q,))
        for x in C:
            for y in C:
                if a[C.mul(x, y)] != C.mul(a[x], a[y]):
                    raise ExtensionError("action of %r is not an automorphism" % (q,))
    for p in Q:
        for q in Q:
            if compose_maps(action[p], action[q]) != action[Q.mul(p, q)]:
                raise ExtensionError("not an action at (%r, %r)" % (p, q))


def _pairs(Q):
    e = Q.identity
    return [(a, b) for a in Q.elements for b in Q.elements if a != e and b != e]


def _cocycle_defect(Q, C, action, c, q1, q2, q3):
    """q1·c(q2,q3) − c(q1q2,q3) + c(q1,q2q3) − c(q1,q2)"""
    add, neg = C.mul, C.inv
    val = action[q1][c[q2, q3]]
    val = add(val, neg(c[Q.mul(q1, q2), q3]))
    val = add(val, c[q1, Q.mul(q2, q3)])
    return add(val, neg(c[q1, q2]))


def normalized_cocycles(Q: FiniteGroup, C: FiniteGroup, action: dict, max_nodes: int = 2_000_000) -> list[tuple]:
    """All normalized 2-cocycles, as value tuples over _pairs(Q)."""
    e0 = C.identity
    pairs = _pairs(Q)
    index = {p: i for i, p in enumerate(pairs)}
    # each triple is checked once all its non-trivial entries are known
    triples_at = {i: [] for i in range(len(pairs))}
    for q1, q2, q3 in itertools.product(Q.elements, repeat=3):
        need = [(q2, q3), (Q.mul(q1, q2), q3), (q1, Q.mul(q2, q3)), (q1, q2)]
        last = max((index[p] for p in need if p in index), default=-1)
        if last >= 0:
            triples_at[last].append((q1, q2, q3))
    c = {(a, b): e0 for a in Q for b in Q}
    out = []
    nodes = 0

    def go(i):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise CapExceeded("cocycle search exceeded %d nodes" % max_nodes)
        if i == len(pairs):
            out.append(tuple(c[p] for p in pairs))
            return
        for v in C.elements:
            c[pairs[i]] = v
            if all(_cocycle_defect(Q, C, action, c, *t) == e0 for t in triples_at[i]):
                go(i + 1)
        c[pairs[i]] = e0

    go(0)
    return out


def coboundaries(Q: FiniteGroup, C: FiniteGroup, action: dict) -> set:
    """δb(q1,q2) = q1·b(q2) − b(q1q2) + b(q1) over normalized 1-cochains b."""
    nonunit = [q for q in Q.elements if q != Q.identity]
    pairs = _pairs(Q)
    out = set()
    for vals in itertools.product(C.elements, repeat=len(nonunit)):
        b = dict(zip(nonunit, vals))
        b[Q.identity] = C.identity
        out.add(tuple(C.mul(C.mul(action[q1][b[q2]], C.inv(b[Q.mul(q1, q2)])), b[q1]) for q1, q2 in pairs))
    return out


def extension_group(Q: FiniteGroup, C: FiniteGroup, action: dict, c: dict) -> FiniteGroup:
    """(a, q)(a', q') = (a + q·a' + c(q, q'), qq')"""
    els = [(a, q) for q in Q.elements for a in C.elements]

    def mul(x, y):
        a, q = x
        b, r = y
        return (C.mul(C.mul(a, action[q][b]), c[q, r]), Q.mul(q, r))

    return FiniteGroup.from_function(els, mul, "%s.%s" % (C.name, Q.name))


def classify_extensions(Q: FiniteGroup, C: FiniteGroup, action: dict | None = None,
                        max_nodes: int = 2_000_000) -> list[ExtensionClass]:
    """One normalized factor set per H² class (the smallest in its coset),
    each with its realized extension group."""
    if not C.is_abelian():
        raise ExtensionError("coefficient group must be abelian")
    if action is None:
        action = trivial_action(Q, C)
    _check_action(Q, C, action)
    pairs = _pairs(Q)
    cocycles = normalized_cocycles(Q, C, action, max_nodes)
    bounds = sorted(coboundaries(Q, C, action), key=order_key)
    seen = set()
    reps = []
    for z in cocycles:
        if z in seen:
            continue
        coset = {tuple(C.mul(a, b) for a, b in zip(z, w)) for w in bounds}
        seen |= coset
        reps.append(min(coset, key=order_key))
    out = []
    for rep in sorted(reps, key=order_key):
        c = {(a, b): C.identity for a in Q for b in Q}
        c.update(zip(pairs, rep))
        E = extension_group(Q, C, action, c)
        errs = E.validate()
        if errs:
            raise ExtensionError("realized extension is not a group: " + errs[0])
        out.append(ExtensionClass(c, E, C.identity))
    return out


# -- obstruction -----------------------------------------------------------


@dataclass
class Obstruction:
    cocycle: dict            # (q1, q2, q3) -> Z(N)
    vanishes: bool
    witness: dict | None     # 2-cochain b with δb = k when it vanishes
    lifts: dict              # q -> automorphism of N
    correction: dict         # (q1, q2) -> n with Ad n = φ(q1)φ(q2)φ(q1q2)^-1


def _aut_key(N, a):
    return hom_key(N, a)


def outer_homs(Q: FiniteGroup, N: FiniteGroup) -> list[dict]:
    """Representatives q -> Aut(N) of all homomorphisms Q -> Out(N)."""
    auts = automorphisms(N)
    lookup = {_aut_key(N, a): a for a in auts}
    cosets, rep_of = [], {}
    for k in sorted_ids(lookup):
        if k in rep_of:
            continue
        coset = {_aut_key(N, compose_maps(lookup[k], inner_automorphism(N, n))) for n in N}
        for j in coset:
            rep_of[j] = k
        cosets.append(k)
    Out = FiniteGroup.from_function(
        cosets, lambda a, b: rep_of[_aut_key(N, compose_maps(lookup[a], lookup[b]))], "Out(%s)" % N.name)
    out = []
    for h in homomorphisms(Q, Out):
        out.append({q: lookup[h[q]] for q in Q})
    return out


def _inner_witness(N: FiniteGroup, aut: dict):
    """Smallest n with Ad n = aut, or None."""
    for n in sorted(N.elements, key=order_key):
        if all(N.conj(n, x) == aut[x] for x in N):
            return n
    return None


def _normalize_lifts(Q, N, psi):
    lifts = dict(psi)
    if _inner_witness(N, lifts[Q.identity]) is None:
        raise ExtensionError("psi(1) is not inner")
    lifts[Q.identity] = identity_map(N)
    return lifts


def extension_obstruction(Q: FiniteGroup, N: FiniteGroup, psi: dict, max_nodes: int = 2_000_000) -> Obstruction:
    """Obstruction class for an outer action ψ: Q → Out(N) given by lifts.

    With φ(q) the lifts and n(q1,q2) the smallest element with
    Ad n = φ(q1)φ(q2)φ(q1q2)^-1, the 3-cocycle k is defined by
    φ(q1)(n(q2,q3))·n(q1,q2q3) = k·n(q1,q2)·n(q1q2,q3), valued in Z(N).
    """
    lifts = _normalize_lifts(Q, N, psi)
    for q in Q:
        if set(lifts[q]) != set(N.elements) or len(set(lifts[q].values())) != len(N):
            raise ExtensionError("lift of %r is not a bijection" % (q,))
    n = {}
    for q1 in Q:
        for q2 in Q:
            defect = compose_maps(compose_maps(lifts[q1], lifts[q2]), invert_map(lifts[Q.mul(q1, q2)]))
            w = _inner_witness(N, defect)
            if w is None:
                raise ExtensionError("psi is not a homomorphism into Out(N) at (%r, %r)" % (q1, q2))
            n[q1, q2] = w
    Z = set(N.center)
    k = {}
    for q1, q2, q3 in itertools.product(Q.elements, repeat=3):
        lhs = N.mul(lifts[q1][n[q2, q3]], n[q1, Q.mul(q2, q3)])
        rhs = N.mul(n[q1, q2], n[Q.mul(q1, q2), q3])
        val = N.mul(lhs, N.inv(rhs))
        if val not in Z:
            raise ExtensionError("associativity defect is not central")
        k[q1, q2, q3] = val
    witness = _solve_coboundary(Q, N, lifts, k, sorted_ids(Z), max_nodes)
    return Obstruction(k, witness is not None, witness, lifts, n)


def _solve_coboundary(Q, N, lifts, k, Z, max_nodes):
    """b: Q×Q → Z(N) normalized with δb = k, by backtracking; None if none."""
    pairs = _pairs(Q)
    index = {p: i for i, p in enumerate(pairs)}
    triples_at = {i: [] for i in range(len(pairs))}
    free = []
    for t in itertools.product(Q.elements, repeat=3):
        q1, q2, q3 = t
        need = [(q2, q3), (Q.mul(q1, q2), q3), (q1, Q.mul(q2, q3)), (q1, q2)]
        last = max((index[p] for p in need if p in index), default=-1)
        if last >= 0:
            triples_at[last].append(t)
        else:
            free.append(t)
    e = N.identity
    if any(k[t] != e for t in free):
        return None
    b = {(x, y): e for x in Q for y in Q}
    nodes = 0

    def delta(q1, q2, q3):
        # q1·b(q2,q3) · b(q1q2,q3)^-1 · b(q1,q2q3) · b(q1,q2)^-1   (Z abelian)
        v = lifts[q1][b[q2, q3]]
        v = N.mul(v, N.inv(b[Q.mul(q1, q2), q3]))
        v = N.mul(v, b[q1, Q.mul(q2, q3)])
        return N.mul(v, N.inv(b[q1, q2]))

    def go(i):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise CapExceeded("coboundary search exceeded %d nodes" % max_nodes)
        if i == len(pairs):
            return True
        for z in Z:
            b[pairs[i]] = z
            if all(delta(*t) == k[t] for t in triples_at[i]) and go(i + 1):
                return True
        b[pairs[i]] = e
        return False

    return dict(b) if go(0) else None


def find_extension_with_outer_action(Q: FiniteGroup, N: FiniteGroup, psi: dict, max_nodes: int = 2_000_000):
    """Exhaustive search for a group N×Q, (n,q)(n',q') = (n·φ(q)(n')·f(q,q'), qq'),
    whose conjugation on N induces ψ; returns the group or None."""
    lifts = _normalize_lifts(Q, N, psi)
    pairs = _pairs(Q)
    options = {}
    for q1, q2 in pairs:
        defect = compose_maps(compose_maps(lifts[q1], lifts[q2]), invert_map(lifts[Q.mul(q1, q2)]))
        options[q1, q2] = [m for m in N if all(N.conj(m, x) == defect[x] for x in N)]
        if not options[q1, q2]:
            return None
    f = {(a, b): N.identity for a in Q for b in Q}
    nodes = 0
    assigned = set()

    def ok_all():
        for q1, q2, q3 in itertools.product(Q.elements, repeat=3):
            need = [(q2, q3), (Q.mul(q1, q2), q3), (q1, Q.mul(q2, q3)), (q1, q2)]
            if all(p in assigned or p not in options for p in need):
                lhs = N.mul(lifts[q1][f[q2, q3]], f[q1, Q.mul(q2, q3)])
                rhs = N.mul(f[q1, q2], f[Q.mul(q1, q2), q3])
                if lhs != rhs:
                    return False
        return True

    def go(i):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise CapExceeded("extension search exceeded %d nodes" % max_nodes)
        if i == len(pairs):
            return True
        for m in options[pairs[i]]:
            f[pairs[i]] = m
            assigned.add(pairs[i])
            if ok_all() and go(i + 1):
                return True
            assigned.discard(pairs[i])
        f[pairs[i]] = N.identity
        return False

    if not go(0):
        return None
    els = [(m, q) for q in Q.elements for m in N.elements]

    def mul(x, y):
        a, q = x
        b, r = y
        return (N.mul(N.mul(a, lifts[q][b]), f[q, r]), Q.mul(q, r))

    return FiniteGroup.from_function(els, mul, "%s.%s" % (N.name, Q.name))


# -- groupoid extensions ---------------------------------------------------


def check_split_section(phi: GroupoidHom) -> bool:
    """Whether φ: Ĝ → G has a set-theoretic section with σ(1_x) = 1_x.

    Precondition: φ is a functor bijective on objects whose kernel consists
    of loops forming isomorphic groups at every object.
    """
    H, G = phi.source, phi.target
    errs = phi.functor_defects()
    if errs:
        raise ExtensionError("not a functor: " + errs[0])
    if sorted_ids(phi.obj_map.values()) != sorted_ids(G.objects) or len(H.objects) != len(G.objects):
        raise ExtensionError("kernel mismatch: map is not bijective on objects")
    kernel = {x: [] for x in H.objects}
    for h in H.arrows:
        if phi(h) == G.unit[phi.obj_map[H.src[h]]]:
            if H.src[h] != H.tgt[h]:
                raise ExtensionError("kernel mismatch: kernel arrow %r is not a loop" % (h,))
            kernel[H.src[h]].append(h)
    groups = []
    for x in H.objects:
        loops = kernel[x]
        table = {(a, b): H.comp[a, b] for a in loops for b in loops}
        if any(v not in loops for v in table.values()):
            raise ExtensionError("kernel mismatch: kernel at %r is not closed" % (x,))
        groups.append(FiniteGroup(loops, table))
    ref = groups[0]
    for K in groups[1:]:
        if not _isomorphic_groups(ref, K):
            raise ExtensionError("kernel mismatch: kernel groups differ between objects")
    # exhaustive: every arrow needs a preimage, units go to units
    preimages = {g: [] for g in G.arrows}
    for h in H.arrows:
        preimages[phi(h)].append(h)
    section = {}
    for g in G.arrows:
        if G.unit.get(G.src[g]) == g:
            x = next(y for y in H.objects if phi.obj_map[y] == G.src[g])
            section[g] = H.unit[x]
        elif preimages[g]:
            section[g] = sorted(preimages[g], key=order_key)[0]
        else:
            return False
    return True


def _isomorphic_groups(A: FiniteGroup, B: FiniteGroup) -> bool:
    if len(A) != len(B):
        return False
    return any(len(set(h.values())) == len(B) for h in homomorphisms(A, B))
