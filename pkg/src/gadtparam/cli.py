"""Command-line entry point.

Exit codes: 0 all checks passed or query answered, 1 a checked property
was violated (counterexample emitted), 2 usage or parse error, 3 type or
kind error, 4 resource cap exceeded (inconclusive).  Diagnostics go to
stderr, reports to stdout; `--json` emits the versioned report schema.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analyses, prelude
from .completion import complete
from .kernel import (
    Arrow, Caps, CapsExceeded, CheckedDecl, Env, FinFun, GadtError, KindError,
    Prod, Term, TypeCheckError, carrier, enumerate_values, type_of,
)
from .lifting import INCONCLUSIVE, Lifter, derive_rules, lift_relation
from .parser import (
    ParseError, parse_fun, parse_rel, parse_term, parse_type, print_decl,
    print_rel, print_term,
)
from .prelude import Workspace, load_texts
from .relations import Rel, graph
from . import render

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_TYPE = 3
EXIT_CAPS = 4

HARD_MAX_CARRIER = 64
HARD_MAX_DEPTH = 6
HARD_MAX_REL_ENUM = 1 << 20

ENV_MAX_REL_ENUM = "GADTPARAM_MAX_REL_ENUM"


@dataclass
class RunConfig:
    command: str
    paths: list[str] = field(default_factory=list)
    mode: str = "completion"
    depth: int = 2
    caps: Caps = field(default_factory=Caps)
    as_json: bool = False
    with_timings: bool = False
    witness: bool = False

    def validate(self) -> None:
        if self.depth < 0 or self.depth > HARD_MAX_DEPTH:
            raise ValueError(f"depth must be within 0..{HARD_MAX_DEPTH}")
        if self.caps.max_carrier > HARD_MAX_CARRIER:
            raise ValueError(f"max carrier bounded by {HARD_MAX_CARRIER}")
        if self.caps.max_rel_enum > HARD_MAX_REL_ENUM:
            raise ValueError(f"relation cap bounded by {HARD_MAX_REL_ENUM}")
        if self.depth > self.caps.max_depth:
            raise ValueError(
                f"depth {self.depth} exceeds cap {self.caps.max_depth}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gadtparam",
        description="Derived relational liftings for declared data types: "
                    "completion, embeddings, and exhaustive finite checks.")
    p.add_argument("--json", action="store_true", dest="as_json",
                   help="emit a machine-readable report")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report")
    p.add_argument("--max-rel-enum", type=int, default=None,
                   help="override the relation enumeration cap "
                        f"(also {ENV_MAX_REL_ENUM})")
    p.add_argument("--max-depth", type=int, default=None,
                   help="override the enumeration depth cap")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, files=True, decl=True, mode=False, depth=False):
        if files:
            sp.add_argument("files", nargs="+", help="input .gadt files")
        if decl:
            sp.add_argument("--decl", required=True,
                            help="declaration to operate on")
        if mode:
            sp.add_argument("--mode", choices=("naive", "completion"),
                            default="completion")
        if depth:
            sp.add_argument("--depth", type=int, default=2)

    sp = sub.add_parser("check", help="parse and kind-check declarations")
    sp.add_argument("files", nargs="+")

    sp = sub.add_parser("complete", help="print the completed declaration")
    common(sp)

    sp = sub.add_parser("enumerate", help="list values at an instance")
    common(sp, depth=True)
    sp.add_argument("--instance", required=True,
                    help="comma-separated instance types")

    sp = sub.add_parser("lift", help="print rules or materialize a lifting")
    common(sp, mode=True, depth=True)
    sp.add_argument("--print-rules", action="store_true")
    sp.add_argument("--rel", help="relation file or named relation")

    sp = sub.add_parser("relate", help="decide one lifting judgement")
    common(sp, mode=True)
    sp.add_argument("--rel", required=True)
    sp.add_argument("--lhs", required=True)
    sp.add_argument("--rhs", required=True)
    sp.add_argument("--witness", action="store_true")

    sp = sub.add_parser("preservation", help="inclusion-preservation audit")
    common(sp, mode=True, depth=True)
    sp.add_argument("--universe", help="comma-separated instance types")
    sp.add_argument("--rel-pair", nargs=2, metavar=("SMALLER", "LARGER"),
                    help="check one explicit relation pair")

    sp = sub.add_parser("gmap", help="partial map through a function graph")
    common(sp)
    sp.add_argument("--fun", required=True)
    sp.add_argument("--arg", required=True)
    sp.add_argument("--witness", action="store_true")

    sp = sub.add_parser("graphlemma", help="at most one partner per term")
    common(sp, depth=True)
    sp.add_argument("--instance", required=True)
    sp.add_argument("--funs", choices=("product", "all"), default="all",
                    help="function universe on the instance type")
    sp.add_argument("--extra", action="append", default=[],
                    help="additional term files to spot-check")

    sp = sub.add_parser("mappable", help="structural mappability over a term")
    common(sp)
    sp.add_argument("--fun", required=True)
    sp.add_argument("--term", required=True)

    sp = sub.add_parser("freetheorem", help="free theorem audit")
    common(sp)
    sp.add_argument("--universe", required=True)
    sp.add_argument("--candidate", default="leaf",
                    help="'leaf', 'corrupted', or TYPE=FUN pairs "
                         "(semicolon-separated)")
    sp.add_argument("--sweep", action="store_true",
                    help="exhaustively sweep all candidates instead")
    sp.add_argument("--result-depth", type=int, default=1)

    sp = sub.add_parser("demo", help="bundled end-to-end demonstrations")
    sp.add_argument("what", choices=("counterexample",))
    return p


# --------------------------------------------------------------------------
# Input resolution
# --------------------------------------------------------------------------

def load_workspace(paths: Sequence[str], caps: Caps) -> Workspace:
    texts = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            texts.append((path, fh.read()))
    return load_texts(texts, caps)


def resolve_term(ws: Workspace, value: str) -> Term:
    if os.path.exists(value):
        return parse_term(_read(value), ws.env)
    return ws.named_term(value)


def resolve_rel(ws: Workspace, value: str) -> Rel:
    if os.path.exists(value):
        return parse_rel(_read(value), ws.env)
    return ws.named_rel(value)


def resolve_fun(ws: Workspace, value: str) -> FinFun:
    if os.path.exists(value):
        return parse_fun(_read(value), ws.env)
    return ws.named_fun(value)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _universe(ws: Workspace, spec: str):
    return [parse_type(part.strip(), ws.env)
            for part in spec.split(",") if part.strip()]


# --------------------------------------------------------------------------
# Command handlers: each returns (report dict, text, exit code)
# --------------------------------------------------------------------------

def cmd_check(args, cfg: RunConfig):
    ws = load_workspace(args.files, cfg.caps)
    decls = [d.name for s in ws.sources for d in s.decls]
    text = "\n".join(f"checked {n}" for n in decls) or "no declarations"
    return ({"verdict": "ok", "data": {"decls": decls}}, text, EXIT_OK)


def cmd_complete(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    comp = complete(ws.env.decl(args.decl), ws.env)
    text = print_decl(comp.completed.decl)
    data = {
        "completed": text,
        "ctor_map": [{"original": n, "completed": e.completed_name,
                      "rewritten": e.rewritten} for n, e in comp.ctor_map],
    }
    return ({"verdict": "ok", "data": data}, text, EXIT_OK)


def cmd_enumerate(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    instance = _universe(ws, args.instance)
    values = enumerate_values(decl, instance, args.depth, ws.env)
    rendered = [print_term(v) for v in values]
    return ({"verdict": "ok",
             "data": {"count": len(values), "values": rendered}},
            "\n".join(rendered) or "(no values)", EXIT_OK)


def cmd_lift(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    if args.print_rules or not args.rel:
        rules = derive_rules(decl, args.mode, ws.env)
        text = rules.render()
        return ({"verdict": "ok", "data": {"rules": text}}, text, EXIT_OK)
    rel = resolve_rel(ws, args.rel)
    lifted = lift_relation(decl, args.mode, rel, args.depth, ws.env)
    text = print_rel(lifted)
    return ({"verdict": "ok", "data": {"lifted": render.rel_json(lifted)}},
            text, EXIT_OK)


def cmd_relate(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    rel = resolve_rel(ws, args.rel)
    lhs = resolve_term(ws, args.lhs)
    rhs = resolve_term(ws, args.rhs)
    result = Lifter(decl, args.mode, ws.env).check(rel, lhs, rhs)
    if result.status == INCONCLUSIVE:
        return ({"verdict": "inconclusive", "data": {"reason": result.reason}},
                "inconclusive: " + result.reason, EXIT_CAPS)
    witnesses = []
    text = f"relate[{args.mode}]: {result.status.upper()}"
    if result.related and args.witness:
        witnesses.append(render.derivation_json(result.derivation))
        text += "\n" + render.render_derivation(result.derivation)
    return ({"verdict": result.status, "witnesses": witnesses}, text, EXIT_OK)


def cmd_preservation(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    pairs = None
    universe = _universe(ws, args.universe) if args.universe else []
    if args.rel_pair:
        pairs = [(resolve_rel(ws, args.rel_pair[0]),
                  resolve_rel(ws, args.rel_pair[1]))]
    elif not universe:
        raise ValueError("preservation needs --universe or --rel-pair")
    report = analyses.check_preservation(decl, args.mode, universe,
                                         args.depth, ws.env, pairs)
    code = {"pass": EXIT_OK, "fail": EXIT_VIOLATION,
            "inconclusive": EXIT_CAPS}[report.verdict]
    return (render.preservation_json(report),
            render.preservation_text(report), code)


def cmd_gmap(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    f = resolve_fun(ws, args.fun)
    x = resolve_term(ws, args.arg)
    result = analyses.gmap(decl, f, x, ws.env)
    code = {"defined": EXIT_OK, "undefined": EXIT_OK,
            "non_unique": EXIT_VIOLATION,
            "inconclusive": EXIT_CAPS}[result.status]
    return (render.gmap_json(result, args.witness),
            render.gmap_text(result, args.witness), code)


def cmd_graphlemma(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    instance = parse_type(args.instance, ws.env)
    funs = _function_universe(ws.env, instance, args.funs)
    extra = [resolve_term(ws, e) for e in args.extra]
    report = analyses.check_graph_lemma(decl, funs, args.depth, ws.env, extra)
    code = {"pass": EXIT_OK, "fail": EXIT_VIOLATION,
            "inconclusive": EXIT_CAPS}[report.verdict]
    return (render.graph_lemma_json(report),
            render.graph_lemma_text(report), code)


def _function_universe(env: Env, instance, which: str) -> list[FinFun]:
    if which == "all":
        return carrier(Arrow(instance, instance), env)
    if not isinstance(instance, Prod):
        raise ValueError("--funs product needs a product instance type")
    from .kernel import product_fun
    lefts = carrier(Arrow(instance.left, instance.left), env)
    rights = carrier(Arrow(instance.right, instance.right), env)
    return [product_fun(f1, f2, env) for f1 in lefts for f2 in rights]


def cmd_mappable(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    f = resolve_fun(ws, args.fun)
    s = resolve_term(ws, args.term)
    result = analyses.mappable_structural(decl, f, s, ws.env)
    return (render.mappable_json(result), render.mappable_text(result),
            EXIT_OK)


def cmd_freetheorem(args, cfg):
    ws = load_workspace(args.files, cfg.caps)
    decl = ws.env.decl(args.decl)
    universe = _universe(ws, args.universe)
    if args.sweep:
        return _freetheorem_sweep(ws, decl, universe, args.result_depth)
    candidate = _build_candidate(ws, decl, universe, args.candidate)
    report = analyses.check_free_theorem(candidate, universe, decl, ws.env)
    code = {"holds": EXIT_OK, "not_applicable": EXIT_OK,
            "violated": EXIT_VIOLATION, "inconclusive": EXIT_CAPS}[report.verdict]
    return (render.free_theorem_json(report),
            render.free_theorem_text(report), code)


def _build_candidate(ws: Workspace, decl: CheckedDecl, universe, spec: str):
    if spec == "leaf":
        return analyses.leaf_candidate(decl, universe, ws.env)
    if spec == "corrupted":
        return _corrupted_candidate(ws.env, decl, universe)
    tables = {}
    for part in spec.split(";"):
        ty_text, _, fun_name = part.partition("=")
        if not fun_name:
            raise ValueError("custom candidates use TYPE=FUN;TYPE=FUN ...")
        ty = parse_type(ty_text.strip(), ws.env)
        f = resolve_fun(ws, fun_name.strip())
        tables[ty] = dict(f.table)
    return analyses.candidate_of(decl, ws.env, tables)


def _corrupted_candidate(env: Env, decl: CheckedDecl, universe):
    """The leaf candidate with one boolean entry flipped."""
    from .kernel import BOOL, BoolLit, Con
    roles = analyses.seq_roles(decl)
    mapping = {}
    for ty in universe:
        table = {a: Con(roles.leaf, (ty,), (a,)) for a in carrier(ty, env)}
        if ty == BOOL:
            table[BoolLit(True)] = Con(roles.leaf, (ty,), (BoolLit(False),))
        mapping[ty] = table
    return analyses.candidate_of(decl, env, mapping)


def _freetheorem_sweep(ws: Workspace, decl, universe, result_depth):
    passed = held = 0
    failures = []
    for cand in analyses.enumerate_candidates(decl, universe, ws.env,
                                              result_depth):
        report = analyses.check_free_theorem(cand, universe, decl, ws.env)
        if report.verdict == "holds":
            passed += 1
            held += 1
        elif report.verdict == "violated":
            failures.append(render.free_theorem_json(report))
        elif report.verdict == "inconclusive":
            return ({"verdict": "inconclusive", "data": {}},
                    "inconclusive candidate cell", EXIT_CAPS)
    verdict = "fail" if failures else "pass"
    data = {"parametric_candidates": passed, "conclusion_held": held}
    text = (f"candidate sweep: {verdict.upper()} "
            f"({passed} parametric candidates, conclusion held for {held})")
    code = EXIT_VIOLATION if failures else EXIT_OK
    return ({"verdict": verdict, "witnesses": failures, "data": data},
            text, code)


def cmd_demo(args, cfg):
    if args.what != "counterexample":
        raise ValueError(f"unknown demo {args.what}")
    ws = prelude.standard_workspace(cfg.caps)
    seq = ws.env.decl("Seq")
    smaller, larger = prelude.counterexample_relations(ws)
    naive = analyses.check_preservation(seq, "naive", [], 2, ws.env,
                                        pairs=[(smaller, larger)])
    repaired = analyses.check_preservation(seq, "completion", [], 2, ws.env,
                                           pairs=[(smaller, larger)])
    sections = [
        {"name": "naive", **render.preservation_json(naive)},
        {"name": "completion", **render.preservation_json(repaired)},
    ]
    text = "\n".join([
        "== naive lifting violates inclusion preservation ==",
        render.preservation_text(naive),
        "",
        "== lifting through the completion repairs it ==",
        render.preservation_text(repaired),
    ])
    verdict = "fail" if naive.verdict == "fail" else "unexpected-pass"
    code = EXIT_VIOLATION if naive.verdict == "fail" else EXIT_OK
    return ({"verdict": verdict, "sections": sections}, text, code)


HANDLERS = {
    "check": cmd_check,
    "complete": cmd_complete,
    "enumerate": cmd_enumerate,
    "lift": cmd_lift,
    "relate": cmd_relate,
    "preservation": cmd_preservation,
    "gmap": cmd_gmap,
    "graphlemma": cmd_graphlemma,
    "mappable": cmd_mappable,
    "freetheorem": cmd_freetheorem,
    "demo": cmd_demo,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    max_rel = args.max_rel_enum
    if max_rel is None and os.environ.get(ENV_MAX_REL_ENUM):
        try:
            max_rel = int(os.environ[ENV_MAX_REL_ENUM])
        except ValueError:
            print(f"error: {ENV_MAX_REL_ENUM} must be an integer",
                  file=sys.stderr)
            return EXIT_USAGE
    caps = Caps(
        max_rel_enum=max_rel if max_rel is not None else Caps().max_rel_enum,
        max_depth=(args.max_depth if args.max_depth is not None
                   else Caps().max_depth))
    cfg = RunConfig(command=args.command,
                    paths=getattr(args, "files", []),
                    mode=getattr(args, "mode", "completion"),
                    depth=getattr(args, "depth", 2),
                    caps=caps,
                    as_json=args.as_json,
                    with_timings=args.timings,
                    witness=getattr(args, "witness", False))
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    started = time.perf_counter()
    try:
        report, text, code = HANDLERS[args.command](args, cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: unknown named item {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KindError, TypeCheckError) as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return EXIT_TYPE
    except CapsExceeded as exc:
        print(f"caps exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPS

    full = {"schema_version": render.SCHEMA_VERSION,
            "command": args.command,
            "exit_code": code,
            **report}
    if cfg.with_timings:
        full["timings"] = {"seconds": round(time.perf_counter() - started, 6)}
    if cfg.as_json:
        print(json.dumps(full, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        print(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
