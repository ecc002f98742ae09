"""Object-language syntax, declaration checking, and finite carriers.

Types and terms are immutable values; every operation in this module is a
pure function of its inputs, so all data can be shared freely between
concurrent queries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Optional, Sequence, Union


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------

class GadtError(Exception):
    """Base class for all library errors."""


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: Optional[int] = None
    col: Optional[int] = None

    def render(self) -> str:
        if self.line is None:
            return self.message
        return f"{self.line}:{self.col}: {self.message}"


class KindError(GadtError):
    """A declaration is outside the supported grammar."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        super().__init__("; ".join(d.render() for d in self.diagnostics))


class TypeCheckError(GadtError):
    """A term or relation is ill-typed."""


class CapsExceeded(GadtError):
    """An enumeration would exceed the configured resource caps."""


class UnsupportedMap(GadtError):
    """A constructor argument falls outside the supported mapping grammar."""


# --------------------------------------------------------------------------
# Type expressions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Bool:
    pass


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Prod:
    left: "TypeExpr"
    right: "TypeExpr"


@dataclass(frozen=True)
class Arrow:
    dom: "TypeExpr"
    cod: "TypeExpr"


@dataclass(frozen=True)
class App:
    con: str
    args: tuple["TypeExpr", ...]


TypeExpr = Union[Var, Bool, Unit, Prod, Arrow, App]

BOOL = Bool()
UNIT = Unit()


def free_type_vars(ty: TypeExpr) -> frozenset[str]:
    if isinstance(ty, Var):
        return frozenset((ty.name,))
    if isinstance(ty, Prod):
        return free_type_vars(ty.left) | free_type_vars(ty.right)
    if isinstance(ty, Arrow):
        return free_type_vars(ty.dom) | free_type_vars(ty.cod)
    if isinstance(ty, App):
        out: frozenset[str] = frozenset()
        for a in ty.args:
            out |= free_type_vars(a)
        return out
    return frozenset()


def is_closed(ty: TypeExpr) -> bool:
    return not free_type_vars(ty)


def subst_type(ty: TypeExpr, mapping: Mapping[str, TypeExpr]) -> TypeExpr:
    if isinstance(ty, Var):
        return mapping.get(ty.name, ty)
    if isinstance(ty, Prod):
        return Prod(subst_type(ty.left, mapping), subst_type(ty.right, mapping))
    if isinstance(ty, Arrow):
        return Arrow(subst_type(ty.dom, mapping), subst_type(ty.cod, mapping))
    if isinstance(ty, App):
        return App(ty.con, tuple(subst_type(a, mapping) for a in ty.args))
    return ty


def rename_app(ty: TypeExpr, old: str, new: str) -> TypeExpr:
    """Rename every application of the constructor `old` to `new`."""
    if isinstance(ty, Prod):
        return Prod(rename_app(ty.left, old, new), rename_app(ty.right, old, new))
    if isinstance(ty, Arrow):
        return Arrow(rename_app(ty.dom, old, new), rename_app(ty.cod, old, new))
    if isinstance(ty, App):
        con = new if ty.con == old else ty.con
        return App(con, tuple(rename_app(a, old, new) for a in ty.args))
    return ty


def contains_app(ty: TypeExpr, name: Optional[str] = None) -> bool:
    """Whether `ty` mentions any declared constructor (or one specific name)."""
    if isinstance(ty, App):
        if name is None or ty.con == name:
            return True
        return any(contains_app(a, name) for a in ty.args)
    if isinstance(ty, Prod):
        return contains_app(ty.left, name) or contains_app(ty.right, name)
    if isinstance(ty, Arrow):
        return contains_app(ty.dom, name) or contains_app(ty.cod, name)
    return False


def type_key(ty: TypeExpr):
    """Deterministic sort key on type expressions."""
    if isinstance(ty, Var):
        return (0, ty.name)
    if isinstance(ty, Bool):
        return (1,)
    if isinstance(ty, Unit):
        return (2,)
    if isinstance(ty, Prod):
        return (3, type_key(ty.left), type_key(ty.right))
    if isinstance(ty, Arrow):
        return (4, type_key(ty.dom), type_key(ty.cod))
    return (5, ty.con, tuple(type_key(a) for a in ty.args))


def proper_subcomponents(tys: Sequence[TypeExpr]) -> tuple[TypeExpr, ...]:
    """The strict syntactic pieces of a type vector, in first-seen order."""
    seen: list[TypeExpr] = []

    def walk(t: TypeExpr) -> None:
        children: tuple[TypeExpr, ...]
        if isinstance(t, Prod):
            children = (t.left, t.right)
        elif isinstance(t, Arrow):
            children = (t.dom, t.cod)
        elif isinstance(t, App):
            children = t.args
        else:
            children = ()
        for c in children:
            if c not in seen:
                seen.append(c)
            walk(c)

    for t in tys:
        walk(t)
    return tuple(seen)


# --------------------------------------------------------------------------
# Terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class UnitLit:
    pass


@dataclass(frozen=True)
class Pair:
    fst: "Term"
    snd: "Term"


@dataclass(frozen=True)
class FinFun:
    """A total function dom -> cod as an explicit, canonically sorted table.

    Two tables are equal exactly when they have the same graph, so equality
    is extensional by construction.
    """

    dom: TypeExpr
    cod: TypeExpr
    table: tuple[tuple["Term", "Term"], ...]

    def __call__(self, arg: "Term") -> "Term":
        for k, v in self.table:
            if k == arg:
                return v
        raise TypeCheckError(f"argument outside table domain: {arg!r}")


@dataclass(frozen=True)
class Con:
    ctor: str
    type_args: tuple[TypeExpr, ...]
    args: tuple["Term", ...]


Term = Union[BoolLit, UnitLit, Pair, FinFun, Con]

TRUE = BoolLit(True)
FALSE = BoolLit(False)
UNIT_VAL = UnitLit()


def term_key(t: Term):
    """Deterministic sort key on terms (total within any one type)."""
    if isinstance(t, BoolLit):
        return (0, t.value)
    if isinstance(t, UnitLit):
        return (1,)
    if isinstance(t, Pair):
        return (2, term_key(t.fst), term_key(t.snd))
    if isinstance(t, FinFun):
        return (3, tuple((term_key(k), term_key(v)) for k, v in t.table))
    return (4, t.ctor, tuple(type_key(a) for a in t.type_args),
            tuple(term_key(a) for a in t.args))


def make_finfun(dom: TypeExpr, cod: TypeExpr, mapping: Mapping[Term, Term],
                env: "Env") -> FinFun:
    """Build a table, checking totality over the carrier of `dom`."""
    dom_c = carrier(dom, env)
    missing = [k for k in dom_c if k not in mapping]
    if missing:
        raise TypeCheckError(f"non-total table: missing {len(missing)} entries")
    extra = [k for k in mapping if k not in dom_c]
    if extra:
        raise TypeCheckError("table key outside domain carrier")
    rows = tuple(sorted(((k, mapping[k]) for k in dom_c),
                        key=lambda kv: term_key(kv[0])))
    return FinFun(dom, cod, rows)


def identity_fun(ty: TypeExpr, env: "Env") -> FinFun:
    return make_finfun(ty, ty, {x: x for x in carrier(ty, env)}, env)


def compose_fun(f: FinFun, g: FinFun) -> FinFun:
    """f after g, as a table over g's domain."""
    if g.cod != f.dom:
        raise TypeCheckError("composition type mismatch")
    rows = tuple((k, f(v)) for k, v in g.table)
    return FinFun(g.dom, f.cod, rows)


def product_fun(f: FinFun, g: FinFun, env: "Env") -> FinFun:
    """The componentwise table (f x g)(a, b) = (f a, g b)."""
    dom = Prod(f.dom, g.dom)
    cod = Prod(f.cod, g.cod)
    mapping = {Pair(a, b): Pair(f(a), g(b))
               for a in carrier(f.dom, env) for b in carrier(g.dom, env)}
    return make_finfun(dom, cod, mapping, env)


# --------------------------------------------------------------------------
# Declarations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CtorSig:
    name: str
    quantified: tuple[str, ...]
    args: tuple[TypeExpr, ...]
    ret_instance: tuple[TypeExpr, ...]


@dataclass(frozen=True)
class DataDecl:
    name: str
    arity: int
    ctors: tuple[CtorSig, ...]


@dataclass(frozen=True)
class CtorInfo:
    # Return instance is a vector of distinct type variables: the
    # ADT-versus-GADT discriminator driving completion.
    variable_return: bool
    # Positions whose declared type mentions some declared constructor;
    # these are the arguments that consume recursion budget.
    recursive_positions: tuple[int, ...]


@dataclass(frozen=True)
class CheckedDecl:
    decl: DataDecl
    info: tuple[tuple[str, CtorInfo], ...]

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def arity(self) -> int:
        return self.decl.arity

    @property
    def ctors(self) -> tuple[CtorSig, ...]:
        return self.decl.ctors

    def ctor(self, name: str) -> CtorSig:
        for c in self.decl.ctors:
            if c.name == name:
                return c
        raise TypeCheckError(f"unknown constructor {name} of {self.name}")

    def ctor_info(self, name: str) -> CtorInfo:
        for n, i in self.info:
            if n == name:
                return i
        raise TypeCheckError(f"unknown constructor {name} of {self.name}")

    def is_adt(self) -> bool:
        return all(i.variable_return for _, i in self.info)


@dataclass(frozen=True)
class Caps:
    max_carrier: int = 16
    max_depth: int = 3
    max_rel_enum: int = 65536

    def __post_init__(self):
        if self.max_carrier <= 0 or self.max_depth <= 0 or self.max_rel_enum <= 0:
            raise ValueError("caps must be strictly positive")


@dataclass
class Env:
    """Declaration table plus resource caps for every enumeration."""

    caps: Caps = field(default_factory=Caps)
    decls: dict[str, CheckedDecl] = field(default_factory=dict)

    def with_decl(self, checked: CheckedDecl) -> "Env":
        new = dict(self.decls)
        new[checked.name] = checked
        return Env(self.caps, new)

    def decl(self, name: str) -> CheckedDecl:
        if name not in self.decls:
            raise TypeCheckError(f"unknown type constructor {name}")
        return self.decls[name]

    def find_ctor(self, name: str) -> tuple[CheckedDecl, CtorSig]:
        hits = [(d, c) for d in self.decls.values()
                for c in d.ctors if c.name == name]
        if not hits:
            raise TypeCheckError(f"unknown constructor {name}")
        if len(hits) > 1:
            owners = ", ".join(d.name for d, _ in hits)
            raise TypeCheckError(f"ambiguous constructor {name} (in {owners})")
        return hits[0]


# --------------------------------------------------------------------------
# Kind checking
# --------------------------------------------------------------------------

def kind_check(decl: DataDecl, env: Env) -> CheckedDecl:
    """Validate a declaration against the supported grammar.

    Raises KindError with the full diagnostic list on failure.  The result
    records, per constructor, whether the return instance is a vector of
    distinct type variables (the discriminator completion keys on).
    """
    diags: list[Diagnostic] = []
    if decl.arity <= 0:
        diags.append(Diagnostic(f"{decl.name}: arity must be positive"))
    seen_ctors: set[str] = set()
    known_arity = {name: d.arity for name, d in env.decls.items()}
    known_arity[decl.name] = decl.arity

    def check_apps(ty: TypeExpr, where: str) -> None:
        if isinstance(ty, App):
            if ty.con not in known_arity:
                diags.append(Diagnostic(f"{where}: unknown type constructor {ty.con}"))
            elif len(ty.args) != known_arity[ty.con]:
                diags.append(Diagnostic(
                    f"{where}: arity mismatch for {ty.con} "
                    f"(expected {known_arity[ty.con]}, got {len(ty.args)})"))
            for a in ty.args:
                check_apps(a, where)
        elif isinstance(ty, Prod):
            check_apps(ty.left, where)
            check_apps(ty.right, where)
        elif isinstance(ty, Arrow):
            check_apps(ty.dom, where)
            check_apps(ty.cod, where)

    def check_arg_grammar(ty: TypeExpr, where: str, under_arrow: bool) -> None:
        # Recursive occurrences may sit at an argument's top level or under
        # products only, and must be applied to variables or to types free
        # of any further constructor application.
        if isinstance(ty, App):
            if under_arrow:
                diags.append(Diagnostic(
                    f"{where}: recursive occurrence outside the supported "
                    f"grammar (constructor application under a function type)"))
                return
            for a in ty.args:
                if isinstance(a, Var):
                    continue
                if contains_app(a):
                    diags.append(Diagnostic(
                        f"{where}: recursive occurrence outside the supported "
                        f"grammar (nested constructor application)"))
        elif isinstance(ty, Prod):
            check_arg_grammar(ty.left, where, under_arrow)
            check_arg_grammar(ty.right, where, under_arrow)
        elif isinstance(ty, Arrow):
            check_arg_grammar(ty.dom, where, True)
            check_arg_grammar(ty.cod, where, True)

    info: list[tuple[str, CtorInfo]] = []
    for ctor in decl.ctors:
        where = f"{decl.name}.{ctor.name}"
        if ctor.name in seen_ctors:
            diags.append(Diagnostic(f"{where}: duplicate constructor name"))
        seen_ctors.add(ctor.name)
        if len(set(ctor.quantified)) != len(ctor.quantified):
            diags.append(Diagnostic(f"{where}: duplicate quantified variable"))
        if len(ctor.ret_instance) != decl.arity:
            diags.append(Diagnostic(
                f"{where}: return instance has {len(ctor.ret_instance)} "
                f"indices, declaration has arity {decl.arity}"))
        quantified = set(ctor.quantified)
        for ty in (*ctor.args, *ctor.ret_instance):
            for v in sorted(free_type_vars(ty) - quantified):
                diags.append(Diagnostic(f"{where}: unquantified variable {v}"))
            check_apps(ty, where)
        for ty in ctor.args:
            check_arg_grammar(ty, where, False)
        for ty in ctor.ret_instance:
            if contains_app(ty):
                diags.append(Diagnostic(
                    f"{where}: constructor application in return instance is "
                    f"not supported"))
        ret_vars = [t.name for t in ctor.ret_instance if isinstance(t, Var)]
        variable_return = (
            len(ret_vars) == len(ctor.ret_instance)
            and len(set(ret_vars)) == len(ret_vars))
        rec = tuple(i for i, t in enumerate(ctor.args) if contains_app(t))
        info.append((ctor.name, CtorInfo(variable_return, rec)))

    if diags:
        raise KindError(diags)
    return CheckedDecl(decl, tuple(info))


def check_program(decls: Sequence[DataDecl], env: Env) -> Env:
    """Kind-check declarations in order, folding each into the environment."""
    names = set(env.decls)
    for d in decls:
        if d.name in names:
            raise KindError([Diagnostic(f"duplicate declaration {d.name}")])
        names.add(d.name)
        env = env.with_decl(kind_check(d, env))
    return env


# --------------------------------------------------------------------------
# Typing of terms
# --------------------------------------------------------------------------

def type_of(term: Term, env: Env) -> TypeExpr:
    """The unique closed type of a term, or a TypeCheckError."""
    if isinstance(term, BoolLit):
        return BOOL
    if isinstance(term, UnitLit):
        return UNIT
    if isinstance(term, Pair):
        return Prod(type_of(term.fst, env), type_of(term.snd, env))
    if isinstance(term, FinFun):
        dom_c = carrier(term.dom, env)
        keys = [k for k, _ in term.table]
        if sorted(keys, key=term_key) != sorted(dom_c, key=term_key):
            raise TypeCheckError("non-total or ill-keyed function table")
        if len(set(keys)) != len(keys):
            raise TypeCheckError("duplicate key in function table")
        for _, v in term.table:
            vt = type_of(v, env)
            if vt != term.cod:
                raise TypeCheckError(
                    f"table value typed {vt!r}, expected {term.cod!r}")
        return Arrow(term.dom, term.cod)
    decl, ctor = env.find_ctor(term.ctor)
    return _type_of_con(term, decl, ctor, env)


def type_of_at(term: Term, decl: CheckedDecl, env: Env) -> TypeExpr:
    """Type a constructor term against a specific declaration.

    Used for declarations that are not registered in the environment, such
    as freshly completed ones.
    """
    if isinstance(term, Con):
        return _type_of_con(term, decl, decl.ctor(term.ctor), env)
    return type_of(term, env)


def _type_of_con(term: Con, decl: CheckedDecl, ctor: CtorSig, env: Env) -> TypeExpr:
    if len(term.type_args) != len(ctor.quantified):
        raise TypeCheckError(
            f"{term.ctor}: expected {len(ctor.quantified)} type arguments, "
            f"got {len(term.type_args)}")
    for ta in term.type_args:
        if not is_closed(ta):
            raise TypeCheckError(f"{term.ctor}: open type argument {ta!r}")
    sigma = dict(zip(ctor.quantified, term.type_args))
    if len(term.args) != len(ctor.args):
        raise TypeCheckError(
            f"{term.ctor}: expected {len(ctor.args)} arguments, "
            f"got {len(term.args)}")
    for i, (declared, arg) in enumerate(zip(ctor.args, term.args)):
        want = subst_type(declared, sigma)
        got = _type_of_against(arg, want, decl, env)
        if got != want:
            raise TypeCheckError(
                f"{term.ctor}: argument {i} typed {got!r}, expected {want!r}")
    return App(decl.name, tuple(subst_type(t, sigma) for t in ctor.ret_instance))


def _type_of_against(term: Term, want: TypeExpr, host: CheckedDecl,
                     env: Env) -> TypeExpr:
    # Recursive occurrences of a not-yet-registered declaration (e.g. a
    # completed one) type-check against the host declaration itself.
    if isinstance(term, Con) and isinstance(want, App) and want.con == host.name:
        try:
            ctor = host.ctor(term.ctor)
        except TypeCheckError:
            pass
        else:
            return _type_of_con(term, host, ctor, env)
    if isinstance(term, Pair) and isinstance(want, Prod):
        return Prod(_type_of_against(term.fst, want.left, host, env),
                    _type_of_against(term.snd, want.right, host, env))
    return type_of(term, env)


# --------------------------------------------------------------------------
# Carriers
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _carrier(ty: TypeExpr, caps: Caps) -> tuple[Term, ...]:
    if isinstance(ty, Bool):
        return (FALSE, TRUE)
    if isinstance(ty, Unit):
        return (UNIT_VAL,)
    if isinstance(ty, Prod):
        left = _carrier(ty.left, caps)
        right = _carrier(ty.right, caps)
        if len(left) * len(right) > caps.max_carrier:
            raise CapsExceeded(
                f"carrier of {ty!r} has {len(left) * len(right)} elements "
                f"(cap {caps.max_carrier})")
        return tuple(Pair(a, b) for a in left for b in right)
    if isinstance(ty, Arrow):
        dom = _carrier(ty.dom, caps)
        cod = _carrier(ty.cod, caps)
        count = len(cod) ** len(dom)
        if count > caps.max_rel_enum:
            raise CapsExceeded(
                f"{count} tables for {ty!r} (cap {caps.max_rel_enum})")
        return tuple(FinFun(ty.dom, ty.cod, tuple(zip(dom, row)))
                     for row in itertools.product(cod, repeat=len(dom)))
    raise TypeCheckError(f"type has no carrier: {ty!r}")


def carrier(ty: TypeExpr, env: Env) -> list[Term]:
    """All values of a closed, constructor-free type, in a fixed order."""
    if not is_closed(ty):
        raise TypeCheckError(f"carrier of open type {ty!r}")
    return list(_carrier(ty, env.caps))


# --------------------------------------------------------------------------
# Value enumeration for declared types
# --------------------------------------------------------------------------

def match_instance(patterns: Sequence[TypeExpr],
                   instance: Sequence[TypeExpr]) -> Optional[dict[str, TypeExpr]]:
    """One-way syntactic matching of return patterns against closed types."""
    sigma: dict[str, TypeExpr] = {}

    def go(p: TypeExpr, t: TypeExpr) -> bool:
        if isinstance(p, Var):
            if p.name in sigma:
                return sigma[p.name] == t
            sigma[p.name] = t
            return True
        if isinstance(p, Prod) and isinstance(t, Prod):
            return go(p.left, t.left) and go(p.right, t.right)
        if isinstance(p, Arrow) and isinstance(t, Arrow):
            return go(p.dom, t.dom) and go(p.cod, t.cod)
        if isinstance(p, App) and isinstance(t, App) and p.con == t.con:
            return all(go(a, b) for a, b in zip(p.args, t.args))
        return p == t

    if len(patterns) != len(instance):
        return None
    for p, t in zip(patterns, instance):
        if not go(p, t):
            return None
    return sigma


def enumerate_values(checked: CheckedDecl, instance: Sequence[TypeExpr],
                     depth: int, env: Env,
                     exist_types: Optional[Sequence[TypeExpr]] = None) -> list[Term]:
    """All constructor terms at `instance` with nesting bounded by `depth`.

    A term's constructor nesting is the longest chain of constructor nodes
    from the root; depth 0 and depth 1 coincide (a single constructor
    layer).  Quantified variables that the return instance does not
    determine range over `exist_types`, which defaults to the proper
    syntactic subcomponents of the instance.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth > env.caps.max_depth:
        raise CapsExceeded(f"depth {depth} exceeds cap {env.caps.max_depth}")
    instance = tuple(instance)
    if len(instance) != checked.arity:
        raise TypeCheckError(
            f"{checked.name} expects {checked.arity} indices, got {len(instance)}")
    for t in instance:
        if not is_closed(t):
            raise TypeCheckError(f"open instance type {t!r}")
    return _enum_decl(checked, instance, max(depth, 1), env, exist_types)


def _enum_decl(checked: CheckedDecl, instance: tuple[TypeExpr, ...], budget: int,
               env: Env, exist_types: Optional[Sequence[TypeExpr]]) -> list[Term]:
    out: list[Term] = []
    for ctor in checked.ctors:
        sigma0 = match_instance(ctor.ret_instance, instance)
        if sigma0 is None:
            continue
        free = [q for q in ctor.quantified if q not in sigma0]
        universe = (tuple(exist_types) if exist_types is not None
                    else proper_subcomponents(instance))
        for combo in itertools.product(universe, repeat=len(free)):
            sigma = dict(sigma0)
            sigma.update(zip(free, combo))
            arg_types = [subst_type(a, sigma) for a in ctor.args]
            choices = [_enum_type(t, budget - 1, env, exist_types)
                       for t in arg_types]
            for args in itertools.product(*choices):
                out.append(Con(ctor.name,
                               tuple(sigma[q] for q in ctor.quantified),
                               tuple(args)))
    return out


def _enum_type(ty: TypeExpr, budget: int, env: Env,
               exist_types: Optional[Sequence[TypeExpr]]) -> list[Term]:
    if not contains_app(ty):
        return carrier(ty, env)
    if isinstance(ty, App):
        if budget <= 0:
            return []
        return _enum_decl(env.decl(ty.con), ty.args, budget, env, exist_types)
    if isinstance(ty, Prod):
        left = _enum_type(ty.left, budget, env, exist_types)
        right = _enum_type(ty.right, budget, env, exist_types)
        return [Pair(a, b) for a in left for b in right]
    raise TypeCheckError(
        f"cannot enumerate values of {ty!r} (constructor under a function type)")
