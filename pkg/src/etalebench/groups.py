"""Finite groups given by multiplication tables."""

from __future__ import annotations

import itertools
from functools import cached_property
from typing import Callable, Hashable, Iterable

from .ordering import order_key, sorted_ids


class GroupError(ValueError):
    pass


class FiniteGroup:
    """A finite group stored as an explicit multiplication table.

    ``table[a, b]`` is the product ``a*b`` (apply b first when the elements
    are maps).
    """

    def __init__(self, elements: Iterable[Hashable], table: dict, name: str = ""):
        self.elements = tuple(elements)
        self.table = dict(table)
        self.name = name
        self._index = {g: i for i, g in enumerate(self.elements)}
        if len(self._index) != len(self.elements):
            raise GroupError("duplicate group elements")
        if not self.elements:
            raise GroupError("a group needs at least one element")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_function(cls, elements, mul: Callable, name: str = "") -> "FiniteGroup":
        elements = list(elements)
        table = {(a, b): mul(a, b) for a in elements for b in elements}
        return cls(elements, table, name)

    # -- basic structure --------------------------------------------------

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g):
        return g in self._index

    def __repr__(self):
        return "FiniteGroup(%s, order=%d)" % (self.name or "?", len(self))

    def mul(self, a, b):
        return self.table[a, b]

    def prod(self, *items):
        out = self.identity
        for g in items:
            out = self.table[out, g]
        return out

    @cached_property
    def identity(self):
        for e in self.elements:
            if all(self.table.get((e, g)) == g for g in self.elements):
                return e
        raise GroupError("no identity element")

    @cached_property
    def _inverse(self) -> dict:
        e = self.identity
        inv = {}
        for a in self.elements:
            for b in self.elements:
                if self.table.get((a, b)) == e:
                    inv[a] = b
                    break
            else:
                raise GroupError("element %r has no inverse" % (a,))
        return inv

    def inv(self, a):
        return self._inverse[a]

    def conj(self, a, b):
        """a b a^-1"""
        return self.prod(a, b, self.inv(a))

    def order_of(self, a) -> int:
        n, x = 1, a
        while x != self.identity:
            x = self.table[x, a]
            n += 1
        return n

    def is_abelian(self) -> bool:
        return all(self.table[a, b] == self.table[b, a] for a in self for b in self)

    @cached_property
    def center(self) -> tuple:
        return tuple(z for z in self.elements if all(self.table[z, g] == self.table[g, z] for g in self))

    @cached_property
    def generators(self) -> tuple:
        """A small generating set, chosen greedily in element order."""
        gens: list = []
        span = {self.identity}
        for g in sorted(self.elements, key=lambda x: (-self.order_of(x), order_key(x))):
            if g not in span:
                gens.append(g)
                span = set(self.closure(gens))
            if len(span) == len(self):
                break
        return tuple(gens)

    def closure(self, gens) -> list:
        seen = [self.identity]
        found = {self.identity}
        frontier = [self.identity]
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = self.table[x, g]
                    if y not in found:
                        found.add(y)
                        seen.append(y)
                        nxt.append(y)
            frontier = nxt
        return seen

    # -- validation -------------------------------------------------------

    def validate(self) -> list[str]:
        """Group axioms; returns a list of violations (empty = valid)."""
        errs = []
        els = self.elements
        for a in els:
            for b in els:
                if (a, b) not in self.table:
                    errs.append("product %r*%r undefined" % (a, b))
                elif self.table[a, b] not in self._index:
                    errs.append("product %r*%r = %r not an element" % (a, b, self.table[a, b]))
        if errs:
            return errs
        try:
            e = self.identity
        except GroupError as exc:
            return [str(exc)]
        for a in els:
            if self.table[a, e] != a:
                errs.append("right identity fails at %r" % (a,))
        try:
            self._inverse
        except GroupError as exc:
            errs.append(str(exc))
        for a in els:
            for b in els:
                ab = self.table[a, b]
                for c in els:
                    if self.table[ab, c] != self.table[a, self.table[b, c]]:
                        errs.append("associativity fails at (%r, %r, %r)" % (a, b, c))
                        return errs
        return errs

    def relabel(self, mapping: dict, name: str = "") -> "FiniteGroup":
        table = {(mapping[a], mapping[b]): mapping[c] for (a, b), c in self.table.items()}
        return FiniteGroup([mapping[g] for g in self.elements], table, name or self.name)


# -- built-in groups -------------------------------------------------------


def cyclic(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("cyclic group order must be positive")
    return FiniteGroup.from_function(range(n), lambda a, b: (a + b) % n, "Z%d" % n)


def trivial_group() -> FiniteGroup:
    return cyclic(1)


def dihedral(n: int) -> FiniteGroup:
    """Symmetries of the regular n-gon, order 2n.

    Elements are pairs (k, s) standing for rot^k ref^s.
    """
    if n < 1:
        raise GroupError("dihedral parameter must be positive")
    els = [(k, s) for s in (0, 1) for k in range(n)]

    def mul(a, b):
        k1, s1 = a
        k2, s2 = b
        k = (k1 + (-k2 if s1 else k2)) % n
        return (k, (s1 + s2) % 2)

    return FiniteGroup.from_function(els, mul, "D%d" % n)


def symmetric(n: int) -> FiniteGroup:
    els = list(itertools.permutations(range(n)))

    def mul(p, q):
        return tuple(p[q[i]] for i in range(n))

    return FiniteGroup.from_function(els, mul, "S%d" % n)


def direct_product(G: FiniteGroup, H: FiniteGroup) -> FiniteGroup:
    els = [(g, h) for g in G for h in H]
    return FiniteGroup.from_function(
        els, lambda a, b: (G.mul(a[0], b[0]), H.mul(a[1], b[1])), "%sx%s" % (G.name, H.name)
    )


BUILTINS = {"cyclic": cyclic, "dihedral": dihedral, "symmetric": symmetric}


def builtin(name: str, n: int) -> FiniteGroup:
    try:
        return BUILTINS[name](n)
    except KeyError:
        raise GroupError("unknown built-in group %r" % name) from None


# -- homomorphisms ---------------------------------------------------------


def extend_hom(G: FiniteGroup, H: FiniteGroup, images: dict) -> dict | None:
    """Extend generator images to a homomorphism G -> H, or None."""
    hom = {G.identity: H.identity}
    frontier = [G.identity]
    gens = list(images)
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = G.mul(x, g)
                val = H.mul(hom[x], images[g])
                if y in hom:
                    if hom[y] != val:
                        return None
                else:
                    hom[y] = val
                    nxt.append(y)
        frontier = nxt
    if len(hom) != len(G):
        return None
    for a in G:
        for b in G:
            if hom[G.mul(a, b)] != H.mul(hom[a], hom[b]):
                return None
    return hom


def homomorphisms(G: FiniteGroup, H: FiniteGroup) -> list[dict]:
    """All homomorphisms G -> H, in a deterministic order."""
    gens = G.generators
    out = []
    candidates = [[h for h in H if H.order_of(h) and G.order_of(g) % H.order_of(h) == 0] for g in gens]
    for imgs in itertools.product(*candidates):
        hom = extend_hom(G, H, dict(zip(gens, imgs)))
        if hom is not None:
            out.append(hom)
    return out


def automorphisms(G: FiniteGroup) -> list[dict]:
    return [h for h in homomorphisms(G, G) if len(set(h.values())) == len(G)]


def is_hom(G: FiniteGroup, H: FiniteGroup, f: dict) -> bool:
    return all(f[G.mul(a, b)] == H.mul(f[a], f[b]) for a in G for b in G)


def hom_key(G: FiniteGroup, f: dict) -> tuple:
    """Hashable encoding of a map on G (images in element order)."""
    return tuple(f[g] for g in G.elements)


def inner_automorphism(G: FiniteGroup, a) -> dict:
    return {g: G.conj(a, g) for g in G}


def compose_maps(f: dict, g: dict) -> dict:
    """f after g"""
    return {x: f[y] for x, y in g.items()}


def invert_map(f: dict) -> dict:
    return {v: k for k, v in f.items()}


def identity_map(G: FiniteGroup) -> dict:
    return {g: g for g in G}


def automorphism_group(G: FiniteGroup) -> tuple[FiniteGroup, dict]:
    """Aut(G) as a FiniteGroup on hom_keys, plus key -> map lookup."""
    auts = automorphisms(G)
    lookup = {hom_key(G, a): a for a in auts}
    keys = sorted_ids(lookup)
    table = {
        (k1, k2): hom_key(G, compose_maps(lookup[k1], lookup[k2])) for k1 in keys for k2 in keys
    }
    return FiniteGroup(keys, table, "Aut(%s)" % G.name), lookup
