"""Text and JSON renderings of derivations and analysis reports.

Text and JSON carry the same verdicts and witnesses; JSON output is
deterministic (sorted keys, no timestamps) and follows the versioned
schema shipped in `schema/report.schema.json`.
"""
from __future__ import annotations

from typing import Optional

from .analyses import (
    FreeTheoremReport, GmapResult, GraphLemmaReport, MappableResult,
    PreservationReport,
)
from .lifting import (
    ArrowCond, BaseFact, Derivation, LiftResult, PairSplit, PremiseNode,
    SubLift, VarFact,
)
from .parser import print_rel, print_term, print_type
from .relations import Rel

SCHEMA_VERSION = 1


def rel_json(r: Rel) -> dict:
    return {
        "src": print_type(r.src),
        "tgt": print_type(r.tgt),
        "pairs": [[print_term(a), print_term(b)] for a, b in r.sorted_pairs()],
    }


def derivation_json(d: Derivation) -> dict:
    names = d.param_names or tuple(v for v, _ in d.assignment)
    return {
        "rule": d.rule_name,
        "ctor": d.ctor,
        "decl": d.decl_name,
        "query": [rel_json(r) for r in d.query],
        "chosen": [{"param": name, "var": v, "rel": rel_json(r)}
                   for (v, r), name in zip(d.assignment, names)],
        "lhs": print_term(d.lhs),
        "rhs": print_term(d.rhs),
        "premises": [_premise_json(p) for p in d.premises],
    }


def _premise_json(p: PremiseNode) -> dict:
    if isinstance(p, VarFact):
        return {"kind": "pair_in_rel", "var": p.var,
                "lhs": print_term(p.lhs), "rhs": print_term(p.rhs)}
    if isinstance(p, BaseFact):
        return {"kind": "base_equal", "lhs": print_term(p.lhs),
                "rhs": print_term(p.rhs)}
    if isinstance(p, PairSplit):
        return {"kind": "pair_split", "left": _premise_json(p.left),
                "right": _premise_json(p.right)}
    if isinstance(p, ArrowCond):
        return {"kind": "arrow_condition", "dom": rel_json(p.dom_rel),
                "cod": rel_json(p.cod_rel), "lhs": print_term(p.lhs),
                "rhs": print_term(p.rhs)}
    if isinstance(p, SubLift):
        return {"kind": "sub_lift", "derivation": derivation_json(p.derivation)}
    raise TypeError(f"unknown premise node {p!r}")


def render_derivation(d: Derivation, indent: int = 0) -> str:
    """Nested prefix notation: the rule head applied to its chosen
    relations, with leaf facts and sub-derivations indented beneath."""
    pad = "  " * indent
    names = d.param_names or tuple(v for v, _ in d.assignment)
    lines = [f"{pad}{d.rule_name} " + " ".join(names)]
    for (v, r), name in zip(d.assignment, names):
        lines.append(f"{pad}  {name} = {print_rel(r)}")
    for p in d.premises:
        lines.extend(_render_premise(p, indent + 1, d))
    return "\n".join(lines)


def _render_premise(p: PremiseNode, indent: int, d: Derivation) -> list[str]:
    pad = "  " * indent
    if isinstance(p, VarFact):
        return [f"{pad}fact: ({print_term(p.lhs)}, {print_term(p.rhs)}) "
                f"in {d.display_name(p.var)}"]
    if isinstance(p, BaseFact):
        return [f"{pad}fact: {print_term(p.lhs)} = {print_term(p.rhs)}"]
    if isinstance(p, PairSplit):
        return (_render_premise(p.left, indent, d)
                + _render_premise(p.right, indent, d))
    if isinstance(p, ArrowCond):
        return [f"{pad}cond: (dom ->^ cod) {_show_fun(p.lhs)} "
                f"{_show_fun(p.rhs)}",
                f"{pad}      dom = {print_rel(p.dom_rel)}",
                f"{pad}      cod = {print_rel(p.cod_rel)}"]
    if isinstance(p, SubLift):
        return render_derivation(p.derivation, indent).split("\n")
    raise TypeError(f"unknown premise node {p!r}")


def _show_fun(f) -> str:
    if all(k == v for k, v in f.table):
        return "id"
    return print_term(f)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

def preservation_json(r: PreservationReport) -> dict:
    witnesses = []
    if r.witness is not None:
        w = r.witness
        witnesses.append({
            "smaller": rel_json(w.smaller),
            "larger": rel_json(w.larger),
            "lhs": print_term(w.lhs),
            "rhs": print_term(w.rhs),
            "derivation": derivation_json(w.derivation) if w.derivation else None,
        })
    return {
        "verdict": r.verdict,
        "universe": [print_type(t) for t in r.universe],
        "witnesses": witnesses,
        "data": {
            "decl": r.decl,
            "mode": r.mode,
            "depth": r.depth,
            "pairs_tested": r.pairs_tested,
            "inconclusive": list(r.inconclusive),
        },
    }


def preservation_text(r: PreservationReport) -> str:
    lines = [f"preservation[{r.mode}] on {r.decl} at depth {r.depth}: "
             f"{r.verdict.upper()}"]
    if r.universe:
        lines.append(f"universe: {', '.join(print_type(t) for t in r.universe)}")
    else:
        lines.append("explicit relation pairs")
    lines.append(f"relation pairs tested: {r.pairs_tested}")
    for note in r.inconclusive:
        lines.append(f"inconclusive: {note}")
    if r.witness is not None:
        w = r.witness
        lines.append("violation witness:")
        lines.append(f"  smaller = {print_rel(w.smaller)}")
        lines.append(f"  larger  = {print_rel(w.larger)}")
        lines.append(f"  related under smaller but not larger:")
        lines.append(f"    lhs = {print_term(w.lhs)}")
        lines.append(f"    rhs = {print_term(w.rhs)}")
        if w.derivation is not None:
            lines.append("  derivation under smaller:")
            lines.append(render_derivation(w.derivation, 2))
    return "\n".join(lines)


def gmap_json(r: GmapResult, witness: bool) -> dict:
    data = {"status": r.status}
    if r.value is not None:
        data["value"] = print_term(r.value)
    if r.second is not None:
        data["second"] = print_term(r.second)
    witnesses = []
    if witness and r.derivation is not None:
        witnesses.append(derivation_json(r.derivation))
    if witness and r.second_derivation is not None:
        witnesses.append(derivation_json(r.second_derivation))
    return {"verdict": r.status, "witnesses": witnesses, "data": data}


def gmap_text(r: GmapResult, witness: bool) -> str:
    lines = [f"gmap: {r.status.upper()}"]
    if r.value is not None:
        lines.append(f"result: {print_term(r.value)}")
    if r.second is not None:
        lines.append(f"second partner: {print_term(r.second)}")
    if witness and r.derivation is not None:
        lines.append("derivation:")
        lines.append(render_derivation(r.derivation, 1))
    if witness and r.second_derivation is not None:
        lines.append("second derivation:")
        lines.append(render_derivation(r.second_derivation, 1))
    return "\n".join(lines)


def graph_lemma_json(r: GraphLemmaReport) -> dict:
    return {
        "verdict": r.verdict,
        "witnesses": [{
            "fun": print_term(v.fun),
            "lhs": print_term(v.lhs),
            "partners": [print_term(p) for p in v.partners],
            "kind": v.kind,
        } for v in r.violations],
        "data": {
            "decl": r.decl,
            "depth": r.depth,
            "functions": r.functions,
            "terms_checked": r.terms_checked,
            "defined_count": r.defined_count,
            "inconclusive": list(r.inconclusive),
        },
    }


def graph_lemma_text(r: GraphLemmaReport) -> str:
    lines = [f"graph lemma on {r.decl} at depth {r.depth}: {r.verdict.upper()}",
             f"functions: {r.functions}, terms checked: {r.terms_checked}, "
             f"defined: {r.defined_count}"]
    for v in r.violations:
        lines.append(f"violation ({v.kind}) at {print_term(v.lhs)} under "
                     f"{print_term(v.fun)}:")
        for p in v.partners:
            lines.append(f"  partner: {print_term(p)}")
    for note in r.inconclusive:
        lines.append(f"inconclusive: {note}")
    return "\n".join(lines)


def mappable_json(r: MappableResult) -> dict:
    data = {"status": r.status}
    if r.value is not None:
        data["value"] = print_term(r.value)
    return {"verdict": r.status, "witnesses": [], "data": data}


def mappable_text(r: MappableResult) -> str:
    if r.value is not None:
        return f"mappable: {r.status.upper()}\nresult: {print_term(r.value)}"
    return f"mappable: {r.status.upper()}"


def free_theorem_json(r: FreeTheoremReport) -> dict:
    witnesses = []
    if r.parametricity_witness is not None:
        w = r.parametricity_witness
        witnesses.append({
            "phase": "parametricity",
            "rel": rel_json(w.rel),
            "is_delta": w.is_delta,
            "delta_element": (print_term(w.delta_element)
                              if w.delta_element is not None else None),
            "left": print_term(w.left),
            "right": print_term(w.right),
        })
    if r.conclusion_witness is not None:
        a, s = r.conclusion_witness
        witnesses.append({"phase": "conclusion", "element": print_term(a),
                          "value": print_term(s)})
    return {
        "verdict": r.verdict,
        "universe": [print_type(t) for t in r.universe],
        "witnesses": witnesses,
        "data": {"cells_checked": r.cells_checked,
                 "inconclusive": list(r.inconclusive)},
    }


def free_theorem_text(r: FreeTheoremReport) -> str:
    lines = [f"free theorem: {r.verdict.upper()}",
             f"universe: {', '.join(print_type(t) for t in r.universe)}",
             f"cells checked: {r.cells_checked}"]
    if r.parametricity_witness is not None:
        w = r.parametricity_witness
        if w.is_delta:
            lines.append(f"parametricity fails at the singleton relation of "
                         f"{print_term(w.delta_element)}")
        else:
            lines.append("parametricity fails at:")
        lines.append(f"  rel  = {print_rel(w.rel)}")
        lines.append(f"  pair = ({print_term(w.left)}, {print_term(w.right)})")
    if r.conclusion_witness is not None:
        a, s = r.conclusion_witness
        lines.append(f"conclusion fails: {print_term(s)} does not contain "
                     f"only {print_term(a)} as data")
    for note in r.inconclusive:
        lines.append(f"inconclusive: {note}")
    return "\n".join(lines)
