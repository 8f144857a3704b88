"""Command-line front end.  Every command parses spec files, calls one module
operation and prints a deterministic report (JSON or CSV).

Exit status: 0 success, 1 domain error (including a failed validation),
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

from . import bundles as B
from . import developable as D
from . import extensions as X
from . import groupoid as GD
from . import loops as L
from .geometry import GeometryError
from .groups import FiniteGroup, GroupError
from .ordering import digest, jsonable, order_key
from .specfile import Loader, Orbifold, SpecError, coerce_object

DOMAIN_ERRORS = (SpecError, GD.GroupoidError, B.BundleError, D.DevelopableError,
                 X.ExtensionError, GeometryError, GroupError, L.LoopError)


class Report:
    def __init__(self, command: str, options: dict, loader: Loader):
        self.command = command
        self.options = options
        self.loader = loader
        self.result: dict = {}
        self.table: tuple[list, list] | None = None
        self.ok = True
        self.elapsed: float | None = None

    def payload(self) -> dict:
        out = {
            "command": self.command,
            "options": jsonable(self.options),
            "inputs": [{"file": os.path.basename(s.path), "kind": s.kind, "sha256": s.digest}
                       for s in self.loader.specs],
            "result": jsonable(self.result),
        }
        if self.elapsed is not None:
            out["timing_seconds"] = round(self.elapsed, 6)
        return out


def emit_report(report: Report, fmt: str) -> bytes:
    if fmt == "structured":
        return (json.dumps(report.payload(), indent=2, ensure_ascii=False) + "\n").encode()
    if fmt == "csv":
        header, rows = report.table if report.table else (["key", "value"], _flatten(report.result))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue().encode()
    raise ValueError("unknown format %r" % fmt)


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(jsonable(v), separators=(",", ":"))
    return v


def _flatten(d, prefix=""):
    rows = []
    for k, v in d.items():
        key = prefix + str(k)
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        else:
            rows.append([key, v])
    return rows


# -- commands --------------------------------------------------------------


def _groupoid(loader, path) -> GD.FiniteGroupoid:
    obj = loader.load(path)
    if not isinstance(obj, GD.FiniteGroupoid):
        raise SpecError(["expected a groupoid spec, got kind %r" % loader.spec(path).kind], path)
    errs = GD.validate_groupoid(obj)
    if errs:
        raise GD.GroupoidError("%s is not a groupoid: %s" % (os.path.basename(path), errs[0]))
    return obj


def _group(loader, path) -> FiniteGroup:
    obj = loader.load(path)
    if isinstance(obj, GD.FiniteGroupoid) and getattr(obj, "action", None) is not None:
        return obj.action[0]
    if not isinstance(obj, FiniteGroup):
        raise SpecError(["expected a group spec, got kind %r" % loader.spec(path).kind], path)
    return obj


def cmd_validate(args, rep: Report):
    spec = rep.loader.spec(args.spec)
    obj = rep.loader.load(args.spec)
    res = {"kind": spec.kind}
    if isinstance(obj, GD.FiniteGroupoid):
        errs = GD.validate_groupoid(obj)
        etale = GD.etale_defects(obj) if not errs else []
        res.update(objects=len(obj.objects), arrows=len(obj.arrows), valid=not errs, errors=errs,
                   etale=not errs and not etale, etale_defects=etale)
    elif isinstance(obj, FiniteGroup):
        errs = obj.validate()
        res.update(order=len(obj), valid=not errs, errors=errs)
    elif isinstance(obj, GD.GroupoidHom):
        errs = obj.functor_defects()
        errs += obj.continuity_defects() if not errs else []
        res.update(valid=not errs, errors=errs)
    elif isinstance(obj, Orbifold):
        res.update(geometry=obj.geometry.describe(), generators=sorted(obj.generators),
                   elements=len(obj.group), valid=True, errors=[])
    else:
        res.update(valid=True, errors=[])
    rep.result = res
    rep.ok = res["valid"]
    rep.table = (["check", "message"], [["error", e] for e in res["errors"]] +
                 [["etale", e] for e in res.get("etale_defects", [])])


def cmd_orbits(args, rep: Report):
    G = _groupoid(rep.loader, args.spec)
    orbs = GD.orbits(G)
    rows = [{"objects": list(o), "isotropy_order": len(GD.isotropy(G, o[0]))} for o in orbs]
    rep.result = {"groupoid": G.name, "orbit_count": len(orbs), "orbits": rows}
    rep.table = (["orbit", "objects", "isotropy_order"],
                 [[i, " ".join(map(str, r["objects"])), r["isotropy_order"]] for i, r in enumerate(rows)])


def cmd_localize(args, rep: Report):
    G = _groupoid(rep.loader, args.spec)
    cover = rep.loader.load(args.cover)
    if not isinstance(cover, GD.OpenCover):
        raise SpecError(["--cover must be a cover spec"], args.cover)
    cover = GD.OpenCover([[coerce_object(G, x) for x in p] for p in cover.pieces])
    loc = GD.localize(G, cover)
    eq = GD.is_equivalence_hom(loc.proj)
    rep.result = {
        "objects": len(loc.groupoid.objects), "arrows": len(loc.groupoid.arrows),
        "valid": not GD.validate_groupoid(loc.groupoid),
        "equivalence": eq.ok, "equivalence_witness": eq.witness,
        "orbits_before": len(GD.orbits(G)), "orbits_after": len(GD.orbits(loc.groupoid)),
    }


def cmd_morphisms(args, rep: Report):
    G = _groupoid(rep.loader, args.source)
    H = _groupoid(rep.loader, args.target)
    star = coerce_object(G, args.star)
    if args.groupoid:
        space = B.MorphismSpace(G, H, star, args.max_size)
        M = space.groupoid
        orbs = GD.orbits(M)
        rep.result = {"objects": len(M.objects), "arrows": len(M.arrows), "edges": len(M.edges),
                      "valid": not GD.validate_groupoid(M), "etale": not GD.etale_defects(M),
                      "orbit_count": len(orbs), "orbits": [list(o) for o in orbs]}
        rep.table = (["orbit", "classes"], [[i, " ".join(map(str, o))] for i, o in enumerate(orbs)])
        return
    classes = B.enumerate_pointed_morphisms(G, H, star, args.max_size)
    rows = [{"index": c.index, "digest": c.digest, "anchor": c.target_anchor,
             "phi0": [[x, c.presentation.phi0[x]] for x in G.objects]} for c in classes]
    rep.result = {"star": star, "count": len(classes), "classes": rows}
    if getattr(G, "action", None) is not None and getattr(H, "action", None) is not None and G.base.is_tree():
        rep.result["equivariant_pairs"] = len(D.enumerate_equivariant_pairs(G, H, star))
    rep.table = (["index", "digest", "anchor"], [[r["index"], r["digest"], r["anchor"]] for r in rows])


def _hom(loader, path) -> GD.GroupoidHom:
    obj = loader.load(path)
    if not isinstance(obj, GD.GroupoidHom):
        raise SpecError(["expected a hom spec"], path)
    return obj


def _bundle_summary(E: B.Bundle) -> dict:
    return {"elements": len(E), "digest": digest(E.encoding()), "errors": B.validate_bundle(E)}


def cmd_bundles(args, rep: Report):
    if args.compose:
        f, g = (_hom(rep.loader, p) for p in args.compose)
        E = B.compose_bundles(B.bundle_of_hom(g), B.bundle_of_hom(f))
        direct = B.bundle_of_hom(f.then(g))
        rep.result = {"operation": "compose", **_bundle_summary(E),
                      "isomorphic_to_composite_hom": B.bundle_isomorphism(E, direct) is not None}
        rep.ok = not rep.result["errors"]
    elif args.invert:
        E = B.bundle_of_hom(_hom(rep.loader, args.invert))
        inv = B.invert_bundle(E)
        rep.result = {"operation": "invert", "invertible": inv is not None,
                      "right_principal_defects": B.right_principal_defects(E),
                      "inverse": _bundle_summary(inv) if inv is not None else None}
    else:
        f, g = (_hom(rep.loader, p) for p in args.pointed_iso)
        if args.star is None:
            raise SpecError(["--pointed-iso needs --star"])
        star = coerce_object(f.source, args.star)
        P = B.presentation_of_hom(f).pointed(star)
        Q = B.presentation_of_hom(g).pointed(star)
        mapping, conflict = B.pointed_isomorphism_trace(P, Q)
        rep.result = {"operation": "pointed-iso", "isomorphic": mapping is not None, "conflict": conflict,
                      "mapping": sorted(([k, v] for k, v in mapping.items()), key=order_key) if mapping else None}
    if rep.result.get("mapping"):
        rep.table = (["element", "image"], rep.result["mapping"])


def cmd_geodesics(args, rep: Report):
    orb = rep.loader.load(args.spec)
    if not isinstance(orb, Orbifold):
        raise SpecError(["expected an orbifold spec"], args.spec)
    twists = [orb.group.element(w) for w in (args.twist or ["id"])]
    rows = L.length_spectrum(orb.group, orb.geometry, twists, seeds=args.seeds, samples=args.samples,
                             seed=args.seed, grad_tol=args.tol, max_iter=args.max_iter)
    rep.result = {"geometry": orb.geometry.describe(), "group_elements": len(orb.group),
                  "rows": [{"class_word": r.class_word, "min_length": r.min_length, "iterations": r.iterations,
                            "converged": r.converged, "degenerate": r.degenerate, "class_size": r.members}
                           for r in rows]}
    rep.table = (["class_word", "min_length", "iterations", "converged", "degenerate"],
                 [[r.class_word, r.min_length, r.iterations, r.converged, r.degenerate] for r in rows])


def _cocycle_rows(c: dict, zero) -> list:
    return sorted(([a, b, v] for (a, b), v in c.items() if v != zero), key=order_key)


def cmd_extensions(args, rep: Report):
    Q = _group(rep.loader, args.quotient)
    C = _group(rep.loader, args.kernel)
    action = rep.loader.load(args.action) if args.action else None
    if C.is_abelian():
        classes = X.classify_extensions(Q, C, action, args.max_size)
        rows = [{"cocycle": _cocycle_rows(e.cocycle, e.zero), "split": e.split, "order": len(e.group),
                 "abelian": e.group.is_abelian(), "valid": not e.group.validate()} for e in classes]
        rep.result = {"mode": "classify", "quotient": Q.name, "kernel": C.name, "count": len(rows),
                      "classes": rows}
        rep.table = (["class", "split", "order", "abelian", "cocycle"],
                     [[i, r["split"], r["order"], r["abelian"], r["cocycle"]] for i, r in enumerate(rows)])
        return
    lifts = [action] if action is not None else X.outer_homs(Q, C)
    cases = []
    for psi in lifts:
        ob = X.extension_obstruction(Q, C, psi, args.max_size)
        cases.append({"lifts": [[q, [psi[q][n] for n in C.elements]] for q in Q.elements],
                      "vanishes": ob.vanishes,
                      "cocycle": sorted(([*t, v] for t, v in ob.cocycle.items() if v != C.identity), key=order_key)})
    rep.result = {"mode": "obstruction", "quotient": Q.name, "kernel": C.name, "count": len(cases),
                  "cases": cases}
    rep.table = (["case", "vanishes"], [[i, c["vanishes"]] for i, c in enumerate(cases)])


def cmd_crossed_module(args, rep: Report):
    obj = rep.loader.load(args.spec)
    if isinstance(obj, FiniteGroup):
        cm = D.conjugation_crossed_module(obj)
    elif isinstance(obj, GD.FiniteGroupoid):
        cm = D.selfequivalence_crossed_module(obj)
    else:
        raise SpecError(["expected a group or action-groupoid spec"], args.spec)
    errs = D.validate_crossed_module(cm)
    s_index = {s: i for i, s in enumerate(cm.S.elements)}
    rep.result = {"gamma_order": len(cm.Gamma), "s_order": len(cm.S),
                  "mu": [[g, s_index[cm.mu[g]]] for g in cm.Gamma.elements],
                  "kernel_of_mu": [g for g in cm.Gamma.elements if cm.mu[g] == cm.S.identity],
                  "valid": not errs, "errors": errs}
    rep.ok = not errs
    rep.table = (["gamma", "mu_index"], rep.result["mu"])


COMMANDS = {
    "validate": cmd_validate, "orbits": cmd_orbits, "localize": cmd_localize, "morphisms": cmd_morphisms,
    "bundles": cmd_bundles, "geodesics": cmd_geodesics, "extensions": cmd_extensions,
    "crossed-module": cmd_crossed_module,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("structured", "csv"), default="structured")
    common.add_argument("--max-size", type=int, default=200_000, help="search cap (nodes)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identity)")

    p = argparse.ArgumentParser(prog="etalebench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("validate", "orbits", "crossed-module"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("spec")
    sp = sub.add_parser("localize", parents=[common])
    sp.add_argument("spec")
    sp.add_argument("--cover", required=True)
    sp = sub.add_parser("morphisms", parents=[common])
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--star", required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--enumerate", action="store_true")
    mode.add_argument("--groupoid", action="store_true")
    sp = sub.add_parser("bundles", parents=[common])
    mode = sp.add_mutually_exclusive_group(required=True)
    mode.add_argument("--compose", nargs=2, metavar=("FIRST", "SECOND"))
    mode.add_argument("--invert", metavar="HOM")
    mode.add_argument("--pointed-iso", nargs=2, metavar=("HOM1", "HOM2"))
    sp.add_argument("--star")
    sp = sub.add_parser("geodesics", parents=[common])
    sp.add_argument("spec")
    sp.add_argument("--twist", action="append")
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--seeds", type=int, default=1)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp = sub.add_parser("extensions", parents=[common])
    sp.add_argument("--quotient", required=True)
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--action")
    return p


def run(argv) -> tuple[int, bytes]:
    """(exit status, report bytes) without touching stdout."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), b""
    options = {k: v for k, v in sorted(vars(args).items())
               if k not in ("command", "out", "timing", "format") and v is not None}
    rep = Report(args.command, options, Loader())
    start = time.perf_counter()
    try:
        COMMANDS[args.command](args, rep)
    except DOMAIN_ERRORS as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1, b""
    if args.timing:
        rep.elapsed = time.perf_counter() - start
    data = emit_report(rep, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        data = b""
    return (0 if rep.ok else 1), data


def main(argv=None) -> int:
    code, data = run(sys.argv[1:] if argv is None else argv)
    if data:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
