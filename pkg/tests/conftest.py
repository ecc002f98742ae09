"""Shared fixtures and independent oracles.

The oracles here deliberately re-derive expected answers by the most
literal route available (hand enumeration, brute-force search over whole
relation universes, structural recursion written from scratch) so the
production code paths are cross-checked against something that shares
none of their machinery.
"""
from __future__ import annotations

import itertools

import pytest

from gadtparam.completion import complete, embed
from gadtparam.kernel import (
    BOOL, Con, Env, Pair, Prod, Term, carrier, term_key,
)
from gadtparam.prelude import (
    Workspace, counterexample_relations, standard_workspace,
    swap_negate_objects,
)
from gadtparam.relations import (
    Rel, arrow_related, enumerate_rels, product_rel,
)

BB = Prod(BOOL, BOOL)
BBB = Prod(Prod(BOOL, BOOL), BOOL)


@pytest.fixture(scope="session")
def ws() -> Workspace:
    return standard_workspace()


@pytest.fixture(scope="session")
def env(ws) -> Env:
    return ws.env


@pytest.fixture(scope="session")
def seq(env):
    return env.decl("Seq")


@pytest.fixture(scope="session")
def lst(env):
    return env.decl("List")


@pytest.fixture(scope="session")
def swap_negate(ws):
    """(swap, negate, swap x negate, graph of the product)."""
    return swap_negate_objects(ws)


@pytest.fixture(scope="session")
def eq_and_almost_full(ws):
    return counterexample_relations(ws)


@pytest.fixture(scope="session")
def worked_terms(ws):
    return {name: ws.named_term(name)
            for name in ("s", "s_image", "t", "t_image")}


# --------------------------------------------------------------------------
# Independent oracles
# --------------------------------------------------------------------------

def list_spine(t: Term):
    """Unfold a list term into its elements, independent of the engine."""
    elems = []
    while t.ctor == "cons":
        elems.append(t.args[0])
        t = t.args[1]
    assert t.ctor == "nil"
    return elems


def listlift_oracle(r: Rel, xs: Term, ys: Term) -> bool:
    """Elementwise zipping: equal length and every aligned pair related."""
    ea, eb = list_spine(xs), list_spine(ys)
    if len(ea) != len(eb):
        return False
    return all((a, b) in r.pairs for a, b in zip(ea, eb))


def seqlift_naive_oracle(r: Rel, x: Term, y: Term, env: Env) -> bool:
    """Literal transcription of the direct rules: injections need the data
    pair in the relation; pairings need the relation to factor exactly as a
    componentwise product, searched over both whole relation universes."""
    if x.ctor != y.ctor:
        return False
    if x.ctor == "inj":
        return (x.args[0], y.args[0]) in r.pairs
    a1, a2 = x.type_args
    b1, b2 = y.type_args
    for r1 in enumerate_rels(a1, b1, env):
        for r2 in enumerate_rels(a2, b2, env):
            if product_rel(r1, r2) != r:
                continue
            if seqlift_naive_oracle(r1, x.args[0], y.args[0], env) and \
                    seqlift_naive_oracle(r2, x.args[1], y.args[1], env):
                return True
    return False


def slift_completion_oracle(r: Rel, x: Term, y: Term, seq, env: Env) -> bool:
    """Literal existential search on embedded terms: enumerate every pair
    of candidate relations, check the arrow condition and recurse."""
    comp = complete(seq, env)
    return _slift_on_embedded(r, embed(comp, x, env), embed(comp, y, env), env)


def _slift_on_embedded(r: Rel, u: Term, v: Term, env: Env) -> bool:
    if u.ctor != v.ctor:
        return False
    if u.ctor == "inj":
        return (u.args[0], v.args[0]) in r.pairs
    a1, a2, _ = u.type_args
    b1, b2, _ = v.type_args
    h, g = u.args[0], v.args[0]
    for r1 in enumerate_rels(a1, b1, env):
        for r2 in enumerate_rels(a2, b2, env):
            if not arrow_related(product_rel(r1, r2), r, h, g):
                continue
            if _slift_on_embedded(r1, u.args[1], v.args[1], env) and \
                    _slift_on_embedded(r2, u.args[2], v.args[2], env):
                return True
    return False


def hand_seq_bb_depth2() -> list[Term]:
    """The eight terms of the sequence type at Bool x Bool within two
    constructor layers, written out by hand."""
    bools = [Con("inj", (BOOL,), (b,))
             for b in carrier(BOOL, Env())]
    out = [Con("inj", (BB,), (Pair(a, b),))
           for a in carrier(BOOL, Env()) for b in carrier(BOOL, Env())]
    out += [Con("pairing", (BOOL, BOOL), (s1, s2))
            for s1 in bools for s2 in bools]
    return out


def all_bool_tables(env: Env):
    from gadtparam.kernel import Arrow
    return carrier(Arrow(BOOL, BOOL), env)


def subset_pairs(rels):
    """All ordered pairs (r, s) with r included in s."""
    out = []
    for r in rels:
        for s in rels:
            if r.pairs <= s.pairs:
                out.append((r, s))
    return out
