"""Model geometries (flat R^d, unit 2-sphere) and their isometry groups."""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9
KEY_DIGITS = 9


class GeometryError(ValueError):
    pass


class Geometry:
    kind = "?"
    dim = 0
    ambient = 0
    convexity_radius = math.inf

    def dist(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def exp(self, x, v) -> np.ndarray:
        raise NotImplementedError

    def log(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def transport(self, x, y, v) -> np.ndarray:
        raise NotImplementedError

    def project(self, x, v) -> np.ndarray:
        """Orthogonal projection of ambient vectors onto T_x."""
        return np.asarray(v, dtype=float)

    def normalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def tangent_basis(self, x) -> np.ndarray:
        """Rows: orthonormal basis of T_x (single point)."""
        return np.eye(self.ambient)

    def describe(self) -> str:
        return "%s%d" % (self.kind, self.dim)


class Flat(Geometry):
    """Euclidean R^d; exp is addition and balls are convex at every radius."""

    kind = "flat"

    def __init__(self, dim: int = 2):
        if dim not in (2, 3):
            raise GeometryError("flat geometry needs dimension 2 or 3")
        self.dim = self.ambient = dim

    def dist(self, x, y):
        return np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)

    def exp(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def log(self, x, y):
        return np.asarray(y) - np.asarray(x)

    def transport(self, x, y, v):
        return np.array(v, dtype=float)


class Sphere(Geometry):
    """Unit 2-sphere in R^3 with the round metric."""

    kind = "sphere"
    dim = 2
    ambient = 3
    convexity_radius = math.pi / 2

    def dist(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        return np.arctan2(np.linalg.norm(np.cross(x, y), axis=-1), np.sum(x * y, axis=-1))

    def exp(self, x, v):
        x, v = np.asarray(x), np.asarray(v)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(n > 0, n, 1.0)
        out = np.cos(n) * x + np.sin(n) * v / safe
        return np.where(n > 0, out / np.linalg.norm(out, axis=-1, keepdims=True), x)

    def log(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        w = y - np.sum(x * y, axis=-1, keepdims=True) * x
        wn = np.linalg.norm(w, axis=-1, keepdims=True)
        theta = self.dist(x, y)[..., None]
        safe = np.where(wn > 0, wn, 1.0)
        return np.where(wn > 0, theta * w / safe, 0.0)

    def transport(self, x, y, v):
        """Parallel transport of v in T_x along the minimizing arc to y."""
        x, y, v = (np.asarray(a, dtype=float) for a in (x, y, v))
        u = self.log(x, y)
        theta = np.linalg.norm(u)
        if theta == 0:
            return v.copy()
        u = u / theta
        a = float(u @ v)
        return v + a * ((math.cos(theta) - 1.0) * u - math.sin(theta) * x)

    def project(self, x, v):
        x, v = np.asarray(x), np.asarray(v)
        return v - np.sum(x * v, axis=-1, keepdims=True) * x

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def tangent_basis(self, x):
        x = np.asarray(x, dtype=float)
        helper = np.eye(3)[int(np.argmin(np.abs(x)))]
        e1 = np.cross(x, helper)
        e1 /= np.linalg.norm(e1)
        return np.array([e1, np.cross(x, e1)])


def make_geometry(kind: str, dim: int = 2) -> Geometry:
    if kind == "flat":
        return Flat(dim)
    if kind == "sphere":
        if dim != 2:
            raise GeometryError("only the 2-sphere is supported")
        return Sphere()
    raise GeometryError("unknown geometry kind %r" % kind)


# -- isometries ------------------------------------------------------------


def _clean(a) -> np.ndarray:
    return np.round(np.asarray(a, dtype=float), KEY_DIGITS) + 0.0


@dataclass(frozen=True, eq=False)
class IsometryElement:
    """x -> linear @ x + translation; the differential is ``linear``."""

    linear: np.ndarray
    translation: np.ndarray
    word: str = "id"

    def __post_init__(self):
        A = np.asarray(self.linear, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GeometryError("linear part must be square")
        if np.max(np.abs(A @ A.T - np.eye(A.shape[0]))) > ORTHO_TOL:
            raise GeometryError("linear part of %s is not orthogonal" % self.word)
        b = np.asarray(self.translation, dtype=float).reshape(A.shape[0])
        object.__setattr__(self, "linear", A)
        object.__setattr__(self, "translation", b)

    @classmethod
    def identity(cls, n: int) -> "IsometryElement":
        return cls(np.eye(n), np.zeros(n), "id")

    @property
    def key(self) -> tuple:
        return tuple(_clean(self.linear).ravel()) + tuple(_clean(self.translation))

    def __eq__(self, other):
        return isinstance(other, IsometryElement) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return "Isometry(%s)" % self.word

    def apply(self, x) -> np.ndarray:
        return np.asarray(x) @ self.linear.T + self.translation

    def differential(self) -> np.ndarray:
        return self.linear

    def compose(self, other: "IsometryElement", word: str | None = None) -> "IsometryElement":
        """self ∘ other"""
        return IsometryElement(
            self.linear @ other.linear,
            self.linear @ other.translation + self.translation,
            word if word is not None else join_words(self.word, other.word),
        )

    def inverse(self) -> "IsometryElement":
        At = self.linear.T
        return IsometryElement(At, -At @ self.translation, invert_word(self.word))

    def conjugate(self, g: "IsometryElement") -> "IsometryElement":
        """g ∘ self ∘ g^-1"""
        return g.compose(self).compose(g.inverse())

    def is_identity(self) -> bool:
        return self == IsometryElement.identity(len(self.translation))

    def renamed(self, word: str) -> "IsometryElement":
        return IsometryElement(self.linear, self.translation, word)


_TOKEN = re.compile(r"^([A-Za-z])(?:\^(-?\d+))?$")


def parse_letters(word: str) -> list[tuple[str, int]]:
    """'a^3*b^-1' -> [('a', 3), ('b', -1)]; 'id' -> []."""
    word = word.strip()
    if word in ("", "id", "1", "e"):
        return []
    out = []
    for tok in word.split("*"):
        m = _TOKEN.match(tok.strip())
        if not m:
            raise GeometryError("bad word token %r" % tok)
        out.append((m.group(1), int(m.group(2) or 1)))
    return out


def format_letters(letters) -> str:
    merged: list[list] = []
    for name, p in letters:
        if merged and merged[-1][0] == name:
            merged[-1][1] += p
            if merged[-1][1] == 0:
                merged.pop()
        else:
            merged.append([name, p])
    if not merged:
        return "id"
    return "*".join(n if p == 1 else "%s^%d" % (n, p) for n, p in merged)


def join_words(a: str, b: str) -> str:
    return format_letters(parse_letters(a) + parse_letters(b))


def invert_word(w: str) -> str:
    return format_letters([(n, -p) for n, p in reversed(parse_letters(w))])


def generator_names(n: int) -> list[str]:
    if n > 26:
        raise GeometryError("at most 26 generators")
    return [chr(ord("a") + i) for i in range(n)]


def word_element(word: str, gens: dict) -> IsometryElement:
    """Evaluate a word; the product reads left to right as composition."""
    letters = parse_letters(word)
    n = len(next(iter(gens.values())).translation)
    out = IsometryElement.identity(n)
    for name, p in letters:
        if name not in gens:
            raise GeometryError("unknown generator %r" % name)
        g = gens[name] if p > 0 else gens[name].inverse()
        for _ in range(abs(p)):
            out = out.compose(g)
    return out.renamed(format_letters(letters))


@dataclass
class IsometryGroup:
    generators: dict                      # name -> IsometryElement
    word_bound: int
    elements: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {g.key: i for i, g in enumerate(self.elements)}

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g.key in self._index

    def find(self, g: IsometryElement) -> IsometryElement | None:
        i = self._index.get(g.key)
        return None if i is None else self.elements[i]

    def element(self, word: str) -> IsometryElement:
        g = word_element(word, self.generators)
        found = self.find(g)
        if found is None:
            raise GeometryError("word %r is not in the enumerated group (bound %d)" % (word, self.word_bound))
        return g

    def conjugacy_class(self, g: IsometryElement) -> list[IsometryElement]:
        """Conjugates h g h^-1 by enumerated h that land in the enumerated ball."""
        out, seen = [], set()
        for h in self.elements:
            c = g.conjugate(h)
            f = self.find(c)
            if f is not None and f.key not in seen:
                seen.add(f.key)
                out.append(f)
        return out


def enumerate_isometries(gens, word_bound: int) -> IsometryGroup:
    """All distinct products of at most ``word_bound`` letters (generators
    and their inverses), breadth first; each element keeps its first word."""
    if isinstance(gens, dict):
        named = dict(gens)
    else:
        gens = list(gens)
        named = dict(zip(generator_names(len(gens)), gens))
    named = {k: v.renamed(k) for k, v in named.items()}
    if not named:
        raise GeometryError("need at least one generator")
    n = len(next(iter(named.values())).translation)
    letters = []
    for name in sorted(named):
        letters.append(named[name])
        letters.append(named[name].inverse())
    ident = IsometryElement.identity(n)
    found = {ident.key: ident}
    elements = [ident]
    frontier = deque([(ident, 0)])
    while frontier:
        g, depth = frontier.popleft()
        if depth == word_bound:
            continue
        for a in letters:
            h = g.compose(a)
            if h.key not in found:
                found[h.key] = h
                elements.append(h)
                frontier.append((h, depth + 1))
    return IsometryGroup(named, word_bound, elements)


def translation(v) -> IsometryElement:
    v = np.asarray(v, dtype=float)
    return IsometryElement(np.eye(len(v)), v)


def reflection(normal, offset: float = 0.0) -> IsometryElement:
    """Reflection in the hyperplane {x : n·x = offset}."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    A = np.eye(len(n)) - 2.0 * np.outer(n, n)
    return IsometryElement(A, 2.0 * offset * n)


def rotation_z(angle: float) -> IsometryElement:
    c, s = math.cos(angle), math.sin(angle)
    return IsometryElement(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3))


def rotation_2d(angle: float) -> IsometryElement:
    c, s = math.cos(angle), math.sin(angle)
    return IsometryElement(np.array([[c, -s], [s, c]]), np.zeros(2))
