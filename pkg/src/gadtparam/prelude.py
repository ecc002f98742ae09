"""Bundled example declarations and the standard worked objects.

Loads the packaged `.gadt` sources and exposes the sequence/list
declarations together with the swap and negate tables used throughout the
documentation and the demo subcommand.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .kernel import Caps, Env, FinFun, Prod, BOOL, Term, product_fun
from .parser import SourceFile, parse_source
from .relations import Rel, eq_rel, graph


def data_text(name: str) -> str:
    return resources.files("gadtparam").joinpath(f"data/{name}").read_text(
        encoding="utf-8")


@dataclass
class Workspace:
    env: Env
    sources: list[SourceFile]

    def named_term(self, name: str) -> Term:
        for s in self.sources:
            if name in s.terms:
                return s.terms[name]
        raise KeyError(name)

    def named_rel(self, name: str) -> Rel:
        for s in self.sources:
            if name in s.rels:
                return s.rels[name]
        raise KeyError(name)

    def named_fun(self, name: str) -> FinFun:
        for s in self.sources:
            if name in s.funs:
                return s.funs[name]
        raise KeyError(name)


def load_texts(texts: list[tuple[str, str]], caps: Caps = Caps()) -> Workspace:
    env = Env(caps)
    sources = []
    for path, text in texts:
        src, env = parse_source(text, env, path)
        sources.append(src)
    return Workspace(env, sources)


def standard_workspace(caps: Caps = Caps()) -> Workspace:
    return load_texts([("list.gadt", data_text("list.gadt")),
                       ("seq.gadt", data_text("seq.gadt"))], caps)


def swap_negate_objects(ws: Workspace):
    """The swap/negate tables, their componentwise product, and its graph."""
    swap = ws.named_fun("swap")
    negate = ws.named_fun("negate")
    fxg = product_fun(swap, negate, ws.env)
    return swap, negate, fxg, graph(fxg)


def counterexample_relations(ws: Workspace) -> tuple[Rel, Rel]:
    """Equality on Bool x Bool and the all-but-one relation containing it."""
    bb = Prod(BOOL, BOOL)
    return eq_rel(bb, ws.env), ws.named_rel("almost_full")
