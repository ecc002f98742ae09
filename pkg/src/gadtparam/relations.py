"""Finite, proof-irrelevant relations between closed types.

A relation is just a set of well-typed term pairs; two relations are equal
exactly when they relate the same elements.  This module provides the
primitive relational interpretations used everywhere else: equality,
singletons, function graphs, the product and arrow actions, inclusion, and
exhaustive enumeration of a relation universe.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .kernel import (
    CapsExceeded, Env, FinFun, Pair, Term, TypeCheckError, TypeExpr,
    Prod, Arrow, carrier, term_key, type_of,
)


@dataclass(frozen=True)
class Rel:
    src: TypeExpr
    tgt: TypeExpr
    pairs: frozenset[tuple[Term, Term]]

    def sorted_pairs(self) -> list[tuple[Term, Term]]:
        return sorted(self.pairs, key=lambda p: (term_key(p[0]), term_key(p[1])))

    def __contains__(self, pair: tuple[Term, Term]) -> bool:
        return pair in self.pairs

    def is_empty(self) -> bool:
        return not self.pairs

    def validate(self, env: Env) -> None:
        for a, b in self.pairs:
            ta, tb = type_of(a, env), type_of(b, env)
            if ta != self.src:
                raise TypeCheckError(f"left element typed {ta!r}, not {self.src!r}")
            if tb != self.tgt:
                raise TypeCheckError(f"right element typed {tb!r}, not {self.tgt!r}")


def rel(src: TypeExpr, tgt: TypeExpr,
        pairs: Sequence[tuple[Term, Term]]) -> Rel:
    return Rel(src, tgt, frozenset(pairs))


def empty_rel(src: TypeExpr, tgt: TypeExpr) -> Rel:
    return Rel(src, tgt, frozenset())


def full_rel(src: TypeExpr, tgt: TypeExpr, env: Env) -> Rel:
    return Rel(src, tgt, frozenset(
        (a, b) for a in carrier(src, env) for b in carrier(tgt, env)))


def eq_rel(ty: TypeExpr, env: Env) -> Rel:
    """The diagonal over the carrier of `ty`."""
    return Rel(ty, ty, frozenset((x, x) for x in carrier(ty, env)))


def delta(a: Term, ty: TypeExpr, env: Env) -> Rel:
    """The singleton relating `a` to itself and nothing else."""
    ta = type_of(a, env)
    if ta != ty:
        raise TypeCheckError(f"delta element typed {ta!r}, not {ty!r}")
    return Rel(ty, ty, frozenset(((a, a),)))


def graph(f: FinFun) -> Rel:
    """The relation {(a, f a)} of a total table."""
    return Rel(f.dom, f.cod, frozenset(f.table))


def product_rel(r1: Rel, r2: Rel) -> Rel:
    """The componentwise action on pairs."""
    pairs = frozenset(
        (Pair(a1, a2), Pair(b1, b2))
        for a1, b1 in r1.pairs for a2, b2 in r2.pairs)
    return Rel(Prod(r1.src, r2.src), Prod(r1.tgt, r2.tgt), pairs)


def arrow_related(r: Rel, s: Rel, f: FinFun, g: FinFun) -> bool:
    """Membership in the relational action on function types:
    every pair related by `r` is sent by (f, g) to a pair related by `s`."""
    return all((f(a), g(b)) in s.pairs for a, b in r.pairs)


def arrow_rel(r: Rel, s: Rel, env: Env) -> Rel:
    """The arrow action materialized as a set of table pairs."""
    src = Arrow(r.src, s.src)
    tgt = Arrow(r.tgt, s.tgt)
    pairs = frozenset(
        (f, g)
        for f in carrier(src, env) for g in carrier(tgt, env)
        if arrow_related(r, s, f, g))
    return Rel(src, tgt, pairs)


def includes(r: Rel, s: Rel) -> bool:
    """Whether `s` contains every pair of `r` (same endpoints required)."""
    if r.src != s.src or r.tgt != s.tgt:
        raise TypeCheckError("inclusion between relations of different types")
    return r.pairs <= s.pairs


def decompose_product(r: Rel) -> tuple[Rel, Rel] | None:
    """The unique componentwise factorization of a nonempty relation on
    product types, if one exists.  Empty relations factor in many ways and
    are handled by the callers that care."""
    if not isinstance(r.src, Prod) or not isinstance(r.tgt, Prod):
        return None
    if not r.pairs:
        return None
    lefts = set()
    rights = set()
    for a, b in r.pairs:
        if not isinstance(a, Pair) or not isinstance(b, Pair):
            return None
        lefts.add((a.fst, b.fst))
        rights.add((a.snd, b.snd))
    r1 = Rel(r.src.left, r.tgt.left, frozenset(lefts))
    r2 = Rel(r.src.right, r.tgt.right, frozenset(rights))
    if product_rel(r1, r2) == r:
        return (r1, r2)
    return None


def rel_universe_size(src: TypeExpr, tgt: TypeExpr, env: Env) -> int:
    n = len(carrier(src, env)) * len(carrier(tgt, env))
    if 2 ** n > env.caps.max_rel_enum:
        raise CapsExceeded(
            f"2^{n} relations between {src!r} and {tgt!r} "
            f"(cap {env.caps.max_rel_enum})")
    return n


def enumerate_rels(src: TypeExpr, tgt: TypeExpr, env: Env) -> Iterator[Rel]:
    """All relations between two carriers, in ascending bitmask order over
    the (src-major) pair list."""
    n = rel_universe_size(src, tgt, env)
    pair_list = [(a, b) for a in carrier(src, env) for b in carrier(tgt, env)]
    assert len(pair_list) == n
    for mask in range(2 ** n):
        yield Rel(src, tgt, frozenset(
            p for i, p in enumerate(pair_list) if mask >> i & 1))


def rel_to_json(r: Rel, render_term, render_type) -> dict:
    return {
        "src": render_type(r.src),
        "tgt": render_type(r.tgt),
        "pairs": [[render_term(a), render_term(b)] for a, b in r.sorted_pairs()],
    }
