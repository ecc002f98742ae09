import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BB, BBB, hand_seq_bb_depth2
from gadtparam.kernel import (
    App, Arrow, BOOL, BoolLit, Caps, CapsExceeded, Con, CtorSig, DataDecl,
    Env, FALSE, KindError, Pair, Prod, TRUE, TypeCheckError, UNIT, UnitLit,
    Var, carrier, enumerate_values, kind_check, match_instance, term_key,
    type_of,
)
from gadtparam.parser import parse_term


# --------------------------------------------------------------------------
# kind_check
# --------------------------------------------------------------------------

def test_list_constructors_flagged_variable_return(lst):
    assert lst.ctor_info("nil").variable_return
    assert lst.ctor_info("cons").variable_return
    assert lst.is_adt()


def test_seq_pairing_flagged_constrained_return(seq):
    assert seq.ctor_info("inj").variable_return
    assert not seq.ctor_info("pairing").variable_return
    assert not seq.is_adt()


def test_unquantified_variable_is_a_diagnostic(env):
    decl = DataDecl("Broken", 1, (
        CtorSig("c", (), (App("List", (Var("b"),)),), (Var("b"),)),))
    with pytest.raises(KindError) as exc:
        kind_check(decl, env)
    assert any("unquantified variable" in d.message
               for d in exc.value.diagnostics)


def test_unknown_constructor_and_arity_mismatch(env):
    with pytest.raises(KindError) as exc:
        kind_check(DataDecl("B1", 1, (
            CtorSig("c", ("a",), (App("Nope", (Var("a"),)),), (Var("a"),)),)),
            env)
    assert any("unknown type constructor" in d.message
               for d in exc.value.diagnostics)
    with pytest.raises(KindError) as exc:
        kind_check(DataDecl("B2", 1, (
            CtorSig("c", ("a",), (App("List", (Var("a"), Var("a"))),),
                    (Var("a"),)),)), env)
    assert any("arity mismatch" in d.message for d in exc.value.diagnostics)


def test_recursion_grammar_rejected_under_arrow_and_nested(env):
    under_arrow = DataDecl("B3", 1, (
        CtorSig("c", ("a",), (Arrow(BOOL, App("B3", (Var("a"),))),),
                (Var("a"),)),))
    with pytest.raises(KindError):
        kind_check(under_arrow, env)
    nested = DataDecl("B4", 1, (
        CtorSig("c", ("a",), (App("B4", (App("B4", (Var("a"),)),)),),
                (Var("a"),)),))
    with pytest.raises(KindError):
        kind_check(nested, env)


def test_duplicate_constructor_names_rejected(env):
    decl = DataDecl("B5", 1, (
        CtorSig("c", ("a",), (), (Var("a",),)),
        CtorSig("c", ("a",), (Var("a"),), (Var("a"),))))
    with pytest.raises(KindError) as exc:
        kind_check(decl, env)
    assert any("duplicate constructor" in d.message
               for d in exc.value.diagnostics)


# --------------------------------------------------------------------------
# type_of
# --------------------------------------------------------------------------

def test_type_of_injection(env):
    t = parse_term("inj [Bool] true", env)
    assert type_of(t, env) == App("Seq", (BOOL,))


def test_type_of_pairing_constrains_instance(env):
    t = parse_term("pairing [Bool, Bool] (inj [Bool] true) (inj [Bool] false)",
                   env)
    assert type_of(t, env) == App("Seq", (BB,))


def test_type_of_pair_literal(env):
    assert type_of(Pair(TRUE, UnitLit()), env) == Prod(BOOL, UNIT)


def test_type_of_rejects_argument_mismatch(env):
    bad = Con("inj", (BOOL,), (UnitLit(),))
    with pytest.raises(TypeCheckError):
        type_of(bad, env)


def test_type_of_rejects_non_total_table(env):
    from gadtparam.kernel import FinFun
    partial = FinFun(BOOL, BOOL, ((FALSE, TRUE),))
    with pytest.raises(TypeCheckError):
        type_of(partial, env)


# --------------------------------------------------------------------------
# carriers
# --------------------------------------------------------------------------

def test_carrier_sizes(env):
    assert len(carrier(BOOL, env)) == 2
    assert len(carrier(BB, env)) == 4
    assert len(carrier(Arrow(BOOL, BOOL), env)) == 4
    assert len(carrier(UNIT, env)) == 1


def test_carrier_order_is_frozen(env):
    assert carrier(BOOL, env) == [FALSE, TRUE]
    assert carrier(BB, env) == [Pair(FALSE, FALSE), Pair(FALSE, TRUE),
                                Pair(TRUE, FALSE), Pair(TRUE, TRUE)]


def test_carrier_caps(env):
    big = Prod(BB, Prod(BB, BB))  # 64 elements
    with pytest.raises(CapsExceeded):
        carrier(big, env)
    with pytest.raises(CapsExceeded):
        carrier(Arrow(BBB, BBB), env)  # 8^8 tables


def test_carrier_needs_closed_constructor_free_type(env):
    with pytest.raises(TypeCheckError):
        carrier(Var("a"), env)
    with pytest.raises(TypeCheckError):
        carrier(App("Seq", (BOOL,)), env)


# --------------------------------------------------------------------------
# enumerate_values
# --------------------------------------------------------------------------

def test_seq_at_bool_depth_1_exactly_two_injections(seq, env):
    got = enumerate_values(seq, [BOOL], 1, env)
    assert got == [Con("inj", (BOOL,), (FALSE,)),
                   Con("inj", (BOOL,), (TRUE,))]


def test_seq_at_bb_depth_2_matches_hand_enumeration(seq, env):
    got = enumerate_values(seq, [BB], 2, env)
    assert len(got) == 8
    assert sorted(map(term_key, got)) == sorted(
        map(term_key, hand_seq_bb_depth2()))


def test_depth_0_keeps_only_leaf_constructors(seq, lst, env):
    assert len(enumerate_values(seq, [BB], 0, env)) == 4  # injections only
    got = enumerate_values(lst, [BOOL], 0, env)
    assert got == [Con("nil", (BOOL,), ())]


def test_enumeration_is_monotone_and_duplicate_free(seq, lst, env):
    for decl, inst in ((seq, [BB]), (lst, [BOOL])):
        previous: set = set()
        for depth in range(0, 4):
            got = enumerate_values(decl, inst, depth, env)
            keys = [term_key(t) for t in got]
            assert len(set(keys)) == len(keys)
            assert previous <= set(keys)
            previous = set(keys)


def test_enumerated_values_are_well_typed(seq, lst, env):
    for decl, inst in ((seq, (BB,)), (lst, (BOOL,)), (seq, (BBB,))):
        for t in enumerate_values(decl, inst, 2, env):
            assert type_of(t, env) == App(decl.name, inst)


def test_enumeration_depth_cap(seq, env):
    with pytest.raises(CapsExceeded):
        enumerate_values(seq, [BOOL], 4, env)


def test_enumeration_deterministic_across_runs(seq, env):
    a = enumerate_values(seq, [BB], 2, env)
    b = enumerate_values(seq, [BB], 2, env)
    assert a == b


# --------------------------------------------------------------------------
# match_instance
# --------------------------------------------------------------------------

def test_match_instance_binds_product_components():
    sigma = match_instance((Prod(Var("a"), Var("b")),), (BB,))
    assert sigma == {"a": BOOL, "b": BOOL}


def test_match_instance_repeated_variable_requires_equal_types():
    pat = (Prod(Var("a"), Var("a")),)
    assert match_instance(pat, (BB,)) == {"a": BOOL}
    assert match_instance(pat, (Prod(BOOL, UNIT),)) is None


def test_match_instance_rejects_shape_mismatch():
    assert match_instance((Prod(Var("a"), Var("b")),), (BOOL,)) is None


# --------------------------------------------------------------------------
# determinism / keys
# --------------------------------------------------------------------------

@given(st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=20, deadline=None)
def test_term_keys_totally_order_a_carrier(i, j):
    env = Env()
    c = carrier(BB, env)
    a, b = c[i], c[j]
    assert (term_key(a) < term_key(b)) == (i < j)


def test_caps_must_be_positive():
    with pytest.raises(ValueError):
        Caps(max_carrier=0)
    with pytest.raises(ValueError):
        Caps(max_depth=-1)
