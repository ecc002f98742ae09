"""Functorial completion of a declared GADT, with its embedding and map.

Completion rewrites each constructor whose return instance constrains the
type indices into one that returns fresh variables and stores a conversion
function per index.  The original type embeds into the completed one by
inserting identity tables at every rewritten constructor; the completed
type, being variable-return throughout, carries a total map function.
"""
from __future__ import annotations

from dataclasses import dataclass

from .kernel import (
    App, Arrow, CheckedDecl, Con, CtorSig, DataDecl, Env, FinFun, Pair, Prod,
    Term, TypeCheckError, TypeExpr, UnsupportedMap, Var, compose_fun,
    contains_app, identity_fun, kind_check, rename_app, subst_type,
)


@dataclass(frozen=True)
class CtorEntry:
    completed_name: str
    rewritten: bool


@dataclass(frozen=True)
class CompletedDecl:
    original: CheckedDecl
    completed: CheckedDecl
    ctor_map: tuple[tuple[str, CtorEntry], ...]

    def entry(self, original_ctor: str) -> CtorEntry:
        for name, e in self.ctor_map:
            if name == original_ctor:
                return e
        raise TypeCheckError(f"unknown constructor {original_ctor}")


def fresh_index_vars(count: int, taken: set[str]) -> tuple[str, ...]:
    """Deterministic fresh names beta1, beta2, ... skipping collisions."""
    out: list[str] = []
    n = 1
    while len(out) < count:
        name = f"beta{n}"
        n += 1
        if name not in taken:
            out.append(name)
            taken.add(name)
    return tuple(out)


def complete(checked: CheckedDecl, env: Env) -> CompletedDecl:
    """Rewrite constrained-return constructors c : forall as. Phi -> G Psis
    into c_c : forall as bs. (Psis -> bs) -> Phi -> G bs, keeping the rest."""
    decl = checked.decl
    new_name = decl.name + "_c"
    new_ctors: list[CtorSig] = []
    mapping: list[tuple[str, CtorEntry]] = []
    for ctor in decl.ctors:
        args = tuple(rename_app(a, decl.name, new_name) for a in ctor.args)
        if checked.ctor_info(ctor.name).variable_return:
            new_ctors.append(CtorSig(ctor.name, ctor.quantified, args,
                                     ctor.ret_instance))
            mapping.append((ctor.name, CtorEntry(ctor.name, False)))
            continue
        betas = fresh_index_vars(len(ctor.ret_instance), set(ctor.quantified))
        arrows = tuple(Arrow(psi, Var(b))
                       for psi, b in zip(ctor.ret_instance, betas))
        new_ctors.append(CtorSig(
            ctor.name + "_c",
            ctor.quantified + betas,
            arrows + args,
            tuple(Var(b) for b in betas)))
        mapping.append((ctor.name, CtorEntry(ctor.name + "_c", True)))
    completed = kind_check(DataDecl(new_name, decl.arity, tuple(new_ctors)), env)
    return CompletedDecl(checked, completed, tuple(mapping))


def completed_env(env: Env, comp: CompletedDecl) -> Env:
    """An environment where the completed declaration replaces the original,
    so constructor names resolve unambiguously on embedded terms."""
    decls = {n: d for n, d in env.decls.items() if n != comp.original.name}
    decls[comp.completed.name] = comp.completed
    out = Env(env.caps, decls)
    return out


def embed(comp: CompletedDecl, term: Term, env: Env) -> Term:
    """The embedding of the original type into its completion: kept
    constructors map head-for-head, rewritten ones gain identity tables at
    their concrete instance."""
    original = comp.original

    def go(t: Term, declared: TypeExpr | None) -> Term:
        if isinstance(t, Pair) and isinstance(declared, Prod):
            return Pair(go(t.fst, declared.left), go(t.snd, declared.right))
        if not isinstance(t, Con):
            return t
        if declared is not None and not (
                isinstance(declared, App) and declared.con == original.name):
            return t
        ctor = original.ctor(t.ctor)
        sigma = dict(zip(ctor.quantified, t.type_args))
        new_args = tuple(go(a, d) for a, d in zip(t.args, ctor.args))
        entry = comp.entry(t.ctor)
        if not entry.rewritten:
            return Con(ctor.name, t.type_args, new_args)
        instances = tuple(subst_type(psi, sigma) for psi in ctor.ret_instance)
        ids = tuple(identity_fun(inst, env) for inst in instances)
        return Con(entry.completed_name, t.type_args + instances,
                   ids + new_args)

    return go(term, App(original.name, ()))


def map_completion(comp: CompletedDecl, funs, x: Term, env: Env) -> Term:
    """The total map of the completed type.

    Takes one table per type index.  Stored conversion functions are
    composed with the new ones; data at a return-index variable is mapped
    directly; arguments at existentially quantified variables are left
    untouched.  Occurrences of return indices anywhere else are rejected.
    """
    if isinstance(funs, FinFun):
        funs = (funs,)
    funs = tuple(funs)
    decl = comp.completed
    if len(funs) != decl.arity:
        raise TypeCheckError(
            f"expected {decl.arity} tables, got {len(funs)}")
    return _map_term(comp, funs, x, env)


def _map_term(comp: CompletedDecl, funs: tuple[FinFun, ...], x: Term,
              env: Env) -> Term:
    decl = comp.completed
    if not isinstance(x, Con):
        raise TypeCheckError(f"cannot map over non-constructor term {x!r}")
    ctor = decl.ctor(x.ctor)
    ret_vars = [t.name for t in ctor.ret_instance if isinstance(t, Var)]
    fun_of = dict(zip(ret_vars, funs))
    sigma = dict(zip(ctor.quantified, x.type_args))
    for v, f in fun_of.items():
        if sigma[v] != f.dom:
            raise TypeCheckError(
                f"table domain {f.dom!r} does not match instance {sigma[v]!r}")
    new_type_args = tuple(
        fun_of[q].cod if q in fun_of else sigma[q] for q in ctor.quantified)

    new_args: list[Term] = []
    for declared, value in zip(ctor.args, x.args):
        new_args.append(_map_arg(comp, declared, value, fun_of, sigma, env))
    return Con(x.ctor, new_type_args, tuple(new_args))


def _map_arg(comp: CompletedDecl, declared: TypeExpr, value: Term,
             fun_of: dict[str, FinFun], sigma: dict[str, TypeExpr],
             env: Env) -> Term:
    mentioned = _mentions_ret_var(declared, fun_of)
    if not mentioned:
        return value
    if isinstance(declared, Var):
        return fun_of[declared.name](value)
    if isinstance(declared, Arrow) and isinstance(declared.cod, Var) \
            and declared.cod.name in fun_of \
            and not _mentions_ret_var(declared.dom, fun_of):
        if not isinstance(value, FinFun):
            raise TypeCheckError("expected a function table argument")
        return compose_fun(fun_of[declared.cod.name], value)
    if isinstance(declared, App) and declared.con == comp.completed.name \
            and all(isinstance(a, Var) for a in declared.args):
        sub_funs = []
        for a in declared.args:
            if a.name in fun_of:
                sub_funs.append(fun_of[a.name])
            else:
                sub_funs.append(identity_fun(sigma[a.name], env))
        return _map_term(comp, tuple(sub_funs), value, env)
    raise UnsupportedMap(
        f"return index used outside a mappable position: {declared!r}")


def _mentions_ret_var(ty: TypeExpr, fun_of: dict[str, FinFun]) -> bool:
    if isinstance(ty, Var):
        return ty.name in fun_of
    if isinstance(ty, Prod):
        return _mentions_ret_var(ty.left, fun_of) or _mentions_ret_var(ty.right, fun_of)
    if isinstance(ty, Arrow):
        return _mentions_ret_var(ty.dom, fun_of) or _mentions_ret_var(ty.cod, fun_of)
    if isinstance(ty, App):
        return any(_mentions_ret_var(a, fun_of) for a in ty.args)
    return False


def map_adt(checked: CheckedDecl, f: FinFun, x: Term, env: Env) -> Term:
    """The usual map of a variable-return declaration, computed through its
    completion (which is a structural copy for such declarations)."""
    if not checked.is_adt():
        raise UnsupportedMap(f"{checked.name} has constrained-return "
                             f"constructors and no total map")
    comp = complete(checked, env)
    return map_completion(comp, f, embed(comp, x, env), env)


def decl_isomorphic(a: CheckedDecl, b: CheckedDecl) -> bool:
    """Structural isomorphism of declarations up to the declaration name and
    positional renaming of quantified variables."""
    if a.arity != b.arity or len(a.ctors) != len(b.ctors):
        return False
    for ca, cb in zip(a.ctors, b.ctors):
        if len(ca.quantified) != len(cb.quantified):
            return False
        if len(ca.args) != len(cb.args):
            return False
        ren = dict(zip(ca.quantified, cb.quantified))

        def eq(t1: TypeExpr, t2: TypeExpr) -> bool:
            t1r = subst_type(t1, {k: Var(v) for k, v in ren.items()})
            t1r = rename_app(t1r, a.name, b.name)
            return t1r == t2

        if not all(eq(t1, t2) for t1, t2 in zip(ca.args, cb.args)):
            return False
        if not all(eq(t1, t2) for t1, t2 in zip(ca.ret_instance, cb.ret_instance)):
            return False
    return True
