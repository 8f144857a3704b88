"""Spec files: YAML documents with a ``kind`` tag and schema ``version``.

Kinds: groupoid-explicit, groupoid-action, group, orbifold, plus the helper
kinds hom, cover and action used by the bundle and extension commands.
Errors carry the line of the offending node.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import GeometryError, IsometryElement, enumerate_isometries, make_geometry
from .groupoid import (
    FiniteGroupoid,
    GroupoidError,
    GroupoidHom,
    ObjectGraph,
    OpenCover,
    action_groupoid,
    constant_hom,
    trivial_groupoid,
)
from .groups import BUILTINS, FiniteGroup, builtin

VERSION = "1"
KINDS = ("groupoid-explicit", "groupoid-action", "group", "orbifold", "hom", "cover", "action")


class SpecError(ValueError):
    def __init__(self, errors, path: str = ""):
        self.errors = list(errors)
        self.path = path
        where = (os.path.basename(path) + ": ") if path else ""
        super().__init__(where + "; ".join(self.errors))


def _ids(x):
    """YAML lists become tuples so they can serve as ids."""
    if isinstance(x, list):
        return tuple(_ids(y) for y in x)
    return x


def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k))
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


@dataclass
class SpecFile:
    kind: str
    version: str
    data: dict
    path: str = ""
    text: str = ""
    lines: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    @property
    def name(self) -> str:
        return str(self.data.get("name") or os.path.splitext(os.path.basename(self.path))[0] or self.kind)

    def line(self, *path) -> int:
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path, 1)

    def err(self, msg: str, *path) -> str:
        return "line %d: %s" % (self.line(*path), msg)


def parse_spec(source: str, text: str | None = None) -> SpecFile:
    """Parse and schema-check a spec file (path, or ``text`` with a label)."""
    path = source
    if text is None:
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise SpecError(["cannot read file: %s" % exc.strerror], source) from None
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        raise SpecError(["line %d: malformed syntax: %s" % (line, getattr(exc, "problem", exc))], path) from None
    if not isinstance(data, dict):
        raise SpecError(["line 1: top level must be a mapping"], path)
    spec = SpecFile(str(data.get("kind")), str(data.get("version")), data, path, text, _line_map(node))
    errs = []
    if "version" not in data:
        errs.append(spec.err("missing schema version"))
    elif spec.version != VERSION:
        errs.append(spec.err("unsupported version %r (expected %r)" % (spec.version, VERSION), "version"))
    if spec.kind not in KINDS:
        errs.append(spec.err("unknown kind %r" % (data.get("kind"),), "kind"))
    if errs:
        raise SpecError(errs, path)
    errs = _CHECKS[spec.kind](spec)
    if errs:
        raise SpecError(errs, path)
    return spec


# -- schema checks ---------------------------------------------------------


def _need(spec, key, typ, errs, what=None):
    if key not in spec.data:
        errs.append(spec.err("missing field %r" % key))
        return None
    val = spec.data[key]
    if typ is not None and not isinstance(val, typ):
        errs.append(spec.err("field %r must be %s" % (key, what or typ.__name__), key))
        return None
    return val


def _check_objects_edges(spec, errs):
    objects = _need(spec, "objects", list, errs, "a list")
    if objects is None:
        return None
    objs = [_ids(o) for o in objects]
    if len(set(objs)) != len(objs):
        errs.append(spec.err("duplicate objects", "objects"))
    known = set(objs)
    for i, e in enumerate(spec.data.get("edges") or []):
        if not isinstance(e, list) or len(e) != 2:
            errs.append(spec.err("edge must be a pair", "edges", i))
            continue
        for end in e:
            if _ids(end) not in known:
                errs.append(spec.err("edge %r references unknown object %r" % (e, end), "edges", i))
    return known


def _check_group(spec, errs, data=None, path=()):
    data = spec.data if data is None else data
    if "builtin" in data:
        if data["builtin"] not in BUILTINS:
            errs.append(spec.err("unknown built-in group %r" % (data["builtin"],), *path, "builtin"))
        if not isinstance(data.get("n"), int) or data["n"] < 1:
            errs.append(spec.err("built-in group needs a positive integer n", *path))
        return
    els = data.get("elements")
    table = data.get("table")
    if not isinstance(els, list) or not isinstance(table, list):
        errs.append(spec.err("group needs 'builtin' or 'elements' + 'table'", *path))
        return
    known = {_ids(e) for e in els}
    if len(table) != len(els):
        errs.append(spec.err("table must have one row per element", *path, "table"))
    for i, row in enumerate(table):
        if not isinstance(row, list) or len(row) != len(els):
            errs.append(spec.err("table row %d has the wrong length" % i, *path, "table", i))
            continue
        for j, v in enumerate(row):
            if _ids(v) not in known:
                errs.append(spec.err("table entry %r is not an element" % (v,), *path, "table", i, j))


def _check_groupoid_explicit(spec):
    errs = []
    known = _check_objects_edges(spec, errs)
    if known is None:
        return errs
    arrows = spec.data.get("arrows")
    if arrows is None:
        return errs
    if not isinstance(arrows, list):
        return errs + [spec.err("arrows must be a list", "arrows")]
    ids = set()
    for i, a in enumerate(arrows):
        if not isinstance(a, dict) or "id" not in a:
            errs.append(spec.err("arrow entry needs an id", "arrows", i))
            continue
        aid = _ids(a["id"])
        if aid in ids:
            errs.append(spec.err("duplicate arrow %r" % (aid,), "arrows", i))
        ids.add(aid)
        for end in ("src", "tgt"):
            if _ids(a.get(end)) not in known:
                errs.append(spec.err("arrow %r: unknown %s object %r" % (aid, end, a.get(end)), "arrows", i, end))
    for i, row in enumerate(spec.data.get("composition") or []):
        if not isinstance(row, list) or len(row) != 3:
            errs.append(spec.err("composition rows are [g, h, g∘h]", "composition", i))
            continue
        for v in row:
            if _ids(v) not in ids:
                errs.append(spec.err("composition references unknown arrow %r" % (v,), "composition", i))
    for key in ("units", "inverses"):
        for k, v in (spec.data.get(key) or {}).items():
            if _ids(v) not in ids:
                errs.append(spec.err("%s entry references unknown arrow %r" % (key, v), key, k))
    for i, e in enumerate(spec.data.get("arrow_edges") or []):
        if not isinstance(e, list) or len(e) != 2 or any(_ids(x) not in ids for x in e):
            errs.append(spec.err("arrow edge %r references unknown arrows" % (e,), "arrow_edges", i))
    return errs


def _check_groupoid_action(spec):
    errs = []
    known = _check_objects_edges(spec, errs)
    group = _need(spec, "group", dict, errs, "a mapping")
    if group is not None:
        _check_group(spec, errs, group, ("group",))
    action = _need(spec, "action", dict, errs, "a mapping")
    if known is None or action is None:
        return errs
    n = len(spec.data["objects"])
    for g, images in action.items():
        if not isinstance(images, list) or len(images) != n:
            errs.append(spec.err("action of %r must list one image per object" % (g,), "action", g))
            continue
        for img in images:
            if _ids(img) not in known:
                errs.append(spec.err("action of %r sends to unknown object %r" % (g, img), "action", g))
    return errs


def _check_group_kind(spec):
    errs = []
    _check_group(spec, errs)
    return errs


def _check_orbifold(spec):
    errs = []
    kind = _need(spec, "geometry", str, errs, "a string")
    dim = spec.data.get("dimension", 2)
    if kind not in (None, "flat", "sphere"):
        errs.append(spec.err("unknown geometry %r" % kind, "geometry"))
    gens = _need(spec, "generators", list, errs, "a list")
    if not isinstance(spec.data.get("word_bound", 4), int):
        errs.append(spec.err("word_bound must be an integer", "word_bound"))
    if gens is None or kind not in ("flat", "sphere"):
        return errs
    n = 3 if kind == "sphere" else dim
    for i, g in enumerate(gens):
        if not isinstance(g, dict) or "matrix" not in g:
            errs.append(spec.err("generator needs a matrix", "generators", i))
            continue
        label = g.get("name", i)
        try:
            A = np.array(g["matrix"], dtype=float)
            b = np.array(g.get("translation", [0.0] * n), dtype=float)
        except (TypeError, ValueError):
            errs.append(spec.err("generator %r has non-numeric entries" % (label,), "generators", i))
            continue
        if A.shape != (n, n) or b.shape != (n,):
            errs.append(spec.err("generator %r must be %dx%d with a length-%d translation" % (label, n, n, n),
                                 "generators", i))
            continue
        if kind == "sphere" and np.any(b != 0):
            errs.append(spec.err("sphere generator %r cannot translate" % (label,), "generators", i, "translation"))
        row = _bad_row(A)
        if row is not None:
            errs.append(spec.err("generator %r: matrix row %d %r is not orthonormal" % (label, row, g["matrix"][row]),
                                 "generators", i, "matrix", row))
    return errs


def _bad_row(A, tol: float = 1e-9):
    """First row that is not unit length or not orthogonal to an earlier row."""
    for i in range(A.shape[0]):
        if abs(A[i] @ A[i] - 1.0) > tol or any(abs(A[i] @ A[j]) > tol for j in range(i)):
            return i
    return None


def _check_hom(spec):
    errs = []
    for key in ("source", "target"):
        _need(spec, key, str, errs, "a path")
    modes = [k for k in ("constant", "pair", "objects") if k in spec.data]
    if len(modes) != 1:
        errs.append(spec.err("hom needs exactly one of 'constant', 'pair' or 'objects' + 'arrows'"))
    return errs


def _check_cover(spec):
    errs = []
    pieces = _need(spec, "pieces", list, errs, "a list")
    for i, p in enumerate(pieces or []):
        if not isinstance(p, list) or not p:
            errs.append(spec.err("cover piece must be a non-empty list", "pieces", i))
    return errs


def _check_action(spec):
    errs = []
    _need(spec, "images", dict, errs, "a mapping")
    return errs


_CHECKS = {
    "groupoid-explicit": _check_groupoid_explicit,
    "groupoid-action": _check_groupoid_action,
    "group": _check_group_kind,
    "orbifold": _check_orbifold,
    "hom": _check_hom,
    "cover": _check_cover,
    "action": _check_action,
}


# -- builders --------------------------------------------------------------


def build_group(data: dict, name: str = "") -> FiniteGroup:
    if "builtin" in data:
        return builtin(data["builtin"], data["n"])
    els = [_ids(e) for e in data["elements"]]
    table = {(a, b): _ids(v) for a, row in zip(els, data["table"]) for b, v in zip(els, row)}
    return FiniteGroup(els, table, data.get("name", name))


def _graph(spec) -> ObjectGraph:
    return ObjectGraph([_ids(o) for o in spec.data["objects"]], [tuple(_ids(x) for x in e) for e in spec.data.get("edges") or []])


def _build_explicit(spec) -> FiniteGroupoid:
    graph = _graph(spec)
    if spec.data.get("arrows") is None:
        return trivial_groupoid(graph, name=spec.name)
    arrows = [_ids(a["id"]) for a in spec.data["arrows"]]
    src = {_ids(a["id"]): _ids(a["src"]) for a in spec.data["arrows"]}
    tgt = {_ids(a["id"]): _ids(a["tgt"]) for a in spec.data["arrows"]}
    comp = {(_ids(g), _ids(h)): _ids(k) for g, h, k in spec.data.get("composition") or []}
    # units and inverses are inferred where the table allows it; gaps are
    # left for validate_groupoid to report
    units = {_ids(k): _ids(v) for k, v in (spec.data.get("units") or {}).items()}
    for x in graph.objects:
        if x not in units:
            cands = [u for u in arrows if src[u] == x and tgt[u] == x
                     and all(comp.get((u, g)) == g for g in arrows if tgt[g] == x)
                     and all(comp.get((g, u)) == g for g in arrows if src[g] == x)]
            if cands:
                units[x] = cands[0]
    inverses = {_ids(k): _ids(v) for k, v in (spec.data.get("inverses") or {}).items()}
    for g in arrows:
        if g not in inverses and tgt[g] in units and src[g] in units:
            cands = [h for h in arrows if comp.get((g, h)) == units[tgt[g]] and comp.get((h, g)) == units[src[g]]]
            # fall back to a one-sided inverse so a broken law is reported as such
            cands = cands or [h for h in arrows if src[h] == tgt[g] and tgt[h] == src[g]
                              and (comp.get((g, h)) == units[tgt[g]] or comp.get((h, g)) == units[src[g]])]
            if cands:
                inverses[g] = cands[0]
    arrow_edges = spec.data.get("arrow_edges")
    if arrow_edges is not None:
        arrow_edges = [tuple(_ids(x) for x in e) for e in arrow_edges]
    return FiniteGroupoid(graph.objects, arrows, src, tgt, units, inverses, comp, graph.edges, arrow_edges,
                          name=spec.name)


def _build_action(spec) -> FiniteGroupoid:
    graph = _graph(spec)
    group = build_group(spec.data["group"])
    objs = [_ids(o) for o in spec.data["objects"]]
    table = {}
    lookup = {str(g): g for g in group}
    for key, images in spec.data["action"].items():
        g = _ids(key) if _ids(key) in group else lookup.get(str(key))
        if g is None:
            raise SpecError([spec.err("action key %r is not a group element" % (key,), "action", key)], spec.path)
        for x, y in zip(objs, images):
            table[g, x] = _ids(y)
    for g in group:
        for x in objs:
            if (g, x) not in table:
                if g == group.identity:
                    table[g, x] = x
                else:
                    raise SpecError([spec.err("action of %r is missing" % (g,), "action")], spec.path)
    try:
        return action_groupoid(group, graph, table, name=spec.name)
    except GroupoidError as exc:
        raise SpecError([spec.err(str(exc), "action")], spec.path) from None


@dataclass
class Orbifold:
    geometry: object
    group: object
    generators: dict


def _build_orbifold(spec) -> Orbifold:
    kind = spec.data["geometry"]
    geom = make_geometry(kind, spec.data.get("dimension", 2))
    gens = {}
    for i, g in enumerate(spec.data["generators"]):
        name = str(g.get("name", chr(ord("a") + i)))
        n = geom.ambient
        try:
            gens[name] = IsometryElement(np.array(g["matrix"], dtype=float),
                                         np.array(g.get("translation", [0.0] * n), dtype=float), name)
        except GeometryError as exc:
            raise SpecError([spec.err(str(exc), "generators", i)], spec.path) from None
    group = enumerate_isometries(gens, int(spec.data.get("word_bound", 4)))
    return Orbifold(geom, group, gens)


class Loader:
    """Builds domain objects from spec files; the same path always yields
    the same object (bundles compare groupoids by identity)."""

    def __init__(self):
        self._cache: dict = {}
        self.specs: list = []

    def spec(self, path: str) -> SpecFile:
        key = os.path.abspath(path)
        if key not in self._cache:
            spec = parse_spec(path)
            self._cache[key] = (spec, None)
            self.specs.append(spec)
        return self._cache[key][0]

    def load(self, path: str):
        key = os.path.abspath(path)
        spec = self.spec(path)
        obj = self._cache[key][1]
        if obj is None:
            obj = self._build(spec)
            self._cache[key] = (spec, obj)
        return obj

    def _rel(self, spec, p):
        return p if os.path.isabs(p) else os.path.join(os.path.dirname(spec.path), p)

    def _build(self, spec):
        if spec.kind == "groupoid-explicit":
            return _build_explicit(spec)
        if spec.kind == "groupoid-action":
            return _build_action(spec)
        if spec.kind == "group":
            return build_group(spec.data, spec.name)
        if spec.kind == "orbifold":
            return _build_orbifold(spec)
        if spec.kind == "cover":
            return OpenCover([[_ids(x) for x in p] for p in spec.data["pieces"]])
        if spec.kind == "action":
            return {_ids(q): {_ids(a): _ids(b) for a, b in m.items()} for q, m in spec.data["images"].items()}
        if spec.kind == "hom":
            return self._build_hom(spec)
        raise SpecError(["unknown kind %r" % spec.kind], spec.path)

    def _build_hom(self, spec) -> GroupoidHom:
        G = self.load(self._rel(spec, spec.data["source"]))
        H = self.load(self._rel(spec, spec.data["target"]))
        if not isinstance(G, FiniteGroupoid) or not isinstance(H, FiniteGroupoid):
            raise SpecError([spec.err("source and target must be groupoid specs")], spec.path)
        d = spec.data
        if "constant" in d:
            obj = coerce_object(H, d["constant"])
            return constant_hom(G, H, obj)
        if "pair" in d:
            f = {coerce_object(G, k): coerce_object(H, v) for k, v in d["pair"]["f"].items()}
            psi = {_ids(k): _ids(v) for k, v in d["pair"]["psi"].items()}
            try:
                arrows = {(g, x): (psi[g], f[x]) for g, x in G.arrows}
            except KeyError as exc:
                raise SpecError([spec.err("pair does not cover %r" % (exc.args[0],), "pair")], spec.path) from None
            return GroupoidHom(G, H, f, arrows, name=spec.name)
        omap = {coerce_object(G, k): coerce_object(H, v) for k, v in d["objects"].items()}
        amap = {_ids(a): _ids(b) for a, b in d.get("arrows") or []}
        return GroupoidHom(G, H, omap, amap, name=spec.name)


def coerce_object(G: FiniteGroupoid, raw):
    """Match a command-line or YAML value against the objects of G."""
    if _ids(raw) in G.base.adjacency:
        return _ids(raw)
    if isinstance(raw, str):
        try:
            val = _ids(yaml.safe_load(raw))
        except yaml.YAMLError:
            val = raw
        if val in G.base.adjacency:
            return val
    for x in G.objects:
        if str(x) == str(raw):
            return x
    raise GroupoidError("unknown object %r (objects: %s)" % (raw, ", ".join(map(str, G.objects))))

