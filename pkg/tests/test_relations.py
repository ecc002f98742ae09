import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BB, subset_pairs
from gadtparam.kernel import (
    Arrow, BOOL, CapsExceeded, FALSE, Pair, Prod, TRUE, TypeCheckError, UNIT,
    UnitLit, carrier, identity_fun,
)
from gadtparam.parser import parse_fun, parse_rel
from gadtparam.relations import (
    Rel, arrow_related, decompose_product, delta, empty_rel, enumerate_rels,
    eq_rel, full_rel, graph, includes, product_rel, rel,
)


def bool_rels(env):
    return list(enumerate_rels(BOOL, BOOL, env))


# --------------------------------------------------------------------------
# eq, delta, graph
# --------------------------------------------------------------------------

def test_eq_rel_bool(env):
    assert eq_rel(BOOL, env).pairs == {(FALSE, FALSE), (TRUE, TRUE)}


def test_eq_rel_product_has_four_diagonal_pairs(env):
    r = eq_rel(BB, env)
    assert len(r.pairs) == 4
    assert all(a == b for a, b in r.pairs)


def test_eq_rel_unit(env):
    assert eq_rel(UNIT, env).pairs == {(UnitLit(), UnitLit())}


def test_delta_is_the_singleton(env):
    assert delta(TRUE, BOOL, env).pairs == {(TRUE, TRUE)}
    assert len(delta(Pair(TRUE, FALSE), BB, env).pairs) == 1


def test_delta_included_in_equality_for_every_element(env):
    for a in carrier(BB, env):
        assert includes(delta(a, BB, env), eq_rel(BB, env))


def test_delta_rejects_ill_typed_element(env):
    with pytest.raises(TypeCheckError):
        delta(TRUE, BB, env)


def test_graph_of_identity_is_equality(env):
    assert graph(identity_fun(BOOL, env)) == eq_rel(BOOL, env)


def test_graph_of_swap(env, swap_negate):
    swap, negate, _, _ = swap_negate
    assert graph(swap).pairs == {
        (Pair(x, y), Pair(y, x))
        for x in carrier(BOOL, env) for y in carrier(BOOL, env)}
    assert graph(negate).pairs == {(TRUE, FALSE), (FALSE, TRUE)}


def test_graph_is_a_total_function_graph(env, swap_negate):
    _, _, fxg, _ = swap_negate
    g = graph(fxg)
    for a in carrier(fxg.dom, env):
        assert len([b for (x, b) in g.pairs if x == a]) == 1


# --------------------------------------------------------------------------
# product and arrow actions
# --------------------------------------------------------------------------

def test_product_of_equalities_is_product_equality(env):
    assert product_rel(eq_rel(BOOL, env), eq_rel(BOOL, env)) == eq_rel(BB, env)


@given(st.integers(0, 15), st.integers(0, 15))
@settings(max_examples=40, deadline=None)
def test_product_cardinality_law(i, j):
    from gadtparam.kernel import Env
    env = Env()
    rs = bool_rels(env)
    r1, r2 = rs[i], rs[j]
    assert len(product_rel(r1, r2).pairs) == len(r1.pairs) * len(r2.pairs)


def test_almost_full_relation_is_not_a_product(env, eq_and_almost_full):
    # Brute force over every pair of boolean relations: no componentwise
    # product has exactly the fifteen pairs.
    _, almost_full = eq_and_almost_full
    assert len(almost_full.pairs) == 15
    for r1 in enumerate_rels(BOOL, BOOL, env):
        for r2 in enumerate_rels(BOOL, BOOL, env):
            assert product_rel(r1, r2) != almost_full
    assert decompose_product(almost_full) is None


def test_decompose_product_recovers_factors(env):
    rs = bool_rels(env)
    for r1 in rs:
        for r2 in rs:
            p = product_rel(r1, r2)
            got = decompose_product(p)
            if p.pairs:
                assert got is not None
                assert product_rel(*got) == p
            else:
                assert got is None  # empty products factor ambiguously


def test_arrow_related_identity(env):
    e = eq_rel(BOOL, env)
    i = identity_fun(BOOL, env)
    assert arrow_related(e, e, i, i)


def test_arrow_related_on_singletons_tests_one_application(env, swap_negate):
    # With singleton components {(a1, b1)} and {(a2, b2)}, membership in
    # the arrow action against a graph unfolds to one application:
    # f(a1, a2) == (b1, b2).
    swap, _, _, _ = swap_negate
    i = identity_fun(BB, env)
    bools = carrier(BOOL, env)
    for a1, b1, a2, b2 in itertools.product(bools, repeat=4):
        dom = product_rel(rel(BOOL, BOOL, [(a1, b1)]),
                          rel(BOOL, BOOL, [(a2, b2)]))
        expected = swap(Pair(a1, a2)) == Pair(b1, b2)
        assert arrow_related(dom, graph(swap), i, i) == expected


def test_arrow_related_vacuous_on_empty_relation(env):
    e = empty_rel(BOOL, BOOL)
    anything = full_rel(BOOL, BOOL, env)
    for f in carrier(Arrow(BOOL, BOOL), env):
        for g in carrier(Arrow(BOOL, BOOL), env):
            assert arrow_related(e, anything, f, g)
            assert arrow_related(e, empty_rel(BOOL, BOOL), f, g)


def test_arrow_related_variance(env):
    # Antitone in the domain relation, monotone in the codomain relation.
    rs = bool_rels(env)
    fs = carrier(Arrow(BOOL, BOOL), env)
    for (r_small, r_big) in subset_pairs(rs[:8]):
        for (s_small, s_big) in subset_pairs(rs[:8]):
            for f in fs[:2]:
                for g in fs[:2]:
                    if arrow_related(r_big, s_small, f, g):
                        assert arrow_related(r_small, s_big, f, g)


# --------------------------------------------------------------------------
# inclusion and enumeration
# --------------------------------------------------------------------------

def test_almost_full_contains_equality(env, eq_and_almost_full):
    req, almost_full = eq_and_almost_full
    assert includes(req, almost_full)


def test_enumerate_rels_yields_sixteen_boolean_relations(env):
    rs = bool_rels(env)
    assert len(rs) == 16
    assert len({frozenset(r.pairs) for r in rs}) == 16
    assert rs[0].pairs == frozenset()
    assert len(rs[-1].pairs) == 4


def test_enumerate_rels_cap(env):
    with pytest.raises(CapsExceeded):
        list(enumerate_rels(Prod(BB, BB), Prod(BB, BB), env))


def test_includes_is_reflexive_and_transitive(env):
    rs = bool_rels(env)
    for r in rs:
        assert includes(r, r)
    for a in rs[:6]:
        for b in rs[:6]:
            for c in rs[:6]:
                if includes(a, b) and includes(b, c):
                    assert includes(a, c)


def test_includes_requires_matching_endpoints(env):
    with pytest.raises(TypeCheckError):
        includes(eq_rel(BOOL, env), eq_rel(BB, env))


def test_product_rel_is_monotone(env):
    rs = bool_rels(env)
    pairs = subset_pairs(rs[:8])
    for (a_small, a_big) in pairs[:30]:
        for (b_small, b_big) in pairs[:30]:
            assert includes(product_rel(a_small, b_small),
                            product_rel(a_big, b_big))


def test_relation_equality_is_extensional(env):
    built = rel(BOOL, BOOL, [(FALSE, FALSE), (TRUE, TRUE)])
    assert built == eq_rel(BOOL, env)
    parsed = parse_rel("rel Bool Bool { eq }", env)
    assert parsed == built


def test_rel_validate_checks_types(env):
    bad = rel(BOOL, BOOL, [(TRUE, UnitLit())])
    with pytest.raises(TypeCheckError):
        bad.validate(env)
