"""Executable checks built on the lifting engine.

Everything here quantifies over finite universes and is exhaustive within
the configured caps: inclusion-preservation audits, the partial map induced
by a function graph, the graph lemma, structural mappability for
sequence-shaped declarations, the contains-only predicate and the free
theorem for leaf-injection polymorphic functions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .completion import complete, embed, map_adt
from .kernel import (
    App, Arrow, BOOL, CapsExceeded, CheckedDecl, Con, Env, FinFun, Pair, Prod,
    Term, TypeCheckError, TypeExpr, Var, carrier, enumerate_values,
    match_instance, subst_type, term_key, type_of,
)
from .lifting import (
    Derivation, INCONCLUSIVE, Lifter, NOT_RELATED, RELATED, lift_relation,
)
from .relations import Rel, delta, enumerate_rels, graph, includes

PASS = "pass"
FAIL = "fail"


# --------------------------------------------------------------------------
# Inclusion preservation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PreservationWitness:
    smaller: Rel
    larger: Rel
    lhs: Term
    rhs: Term
    derivation: Optional[Derivation]


@dataclass(frozen=True)
class PreservationReport:
    decl: str
    mode: str
    universe: tuple[TypeExpr, ...]
    depth: int
    verdict: str
    pairs_tested: int
    witness: Optional[PreservationWitness] = None
    inconclusive: tuple[str, ...] = ()


def check_preservation(checked: CheckedDecl, mode: str,
                       universe: Sequence[TypeExpr], depth: int, env: Env,
                       pairs: Optional[Sequence[tuple[Rel, Rel]]] = None
                       ) -> PreservationReport:
    """Audit that growing the relation can only grow its lifting.

    With explicit `pairs`, tests exactly those (smaller, larger) relation
    pairs.  Otherwise sweeps, for every ordered pair of universe types, all
    relation pairs R included in S from the enumerated relation universe.
    The sweep stops at the first violation; the report carries one witness
    triple whose derivation replays.
    """
    if pairs is not None:
        return _check_pairs(checked, mode, universe, depth, env, pairs)
    universe = tuple(universe)
    tested = 0
    notes: list[str] = []
    for src, tgt in itertools.product(universe, repeat=2):
        try:
            result = _sweep_type_pair(checked, mode, src, tgt, depth, env)
        except CapsExceeded as exc:
            notes.append(f"{src!r} vs {tgt!r}: {exc}")
            continue
        if isinstance(result, PreservationWitness):
            return PreservationReport(checked.name, mode, universe, depth,
                                      FAIL, tested, result, tuple(notes))
        tested += result
    verdict = INCONCLUSIVE if notes else PASS
    return PreservationReport(checked.name, mode, universe, depth, verdict,
                              tested, None, tuple(notes))


def _check_pairs(checked, mode, universe, depth, env, pairs):
    tested = 0
    for smaller, larger in pairs:
        if not includes(smaller, larger):
            raise TypeCheckError(
                "preservation pairs must satisfy smaller <= larger")
        lifted_small = lift_relation(checked, mode, smaller, depth, env)
        lifted_large = lift_relation(checked, mode, larger, depth, env)
        tested += 1
        diff = lifted_small.pairs - lifted_large.pairs
        if diff:
            lhs, rhs = min(diff, key=lambda p: (term_key(p[0]), term_key(p[1])))
            deriv = Lifter(checked, mode, env).check(smaller, lhs, rhs).derivation
            witness = PreservationWitness(smaller, larger, lhs, rhs, deriv)
            return PreservationReport(checked.name, mode, tuple(universe),
                                      depth, FAIL, tested, witness)
    return PreservationReport(checked.name, mode, tuple(universe), depth,
                              PASS, tested)


def _sweep_type_pair(checked, mode, src, tgt, depth, env):
    """Exhaust all relation pairs R <= S between two instance types.

    Returns the number of ordered pairs verified, or a witness.  The lifted
    relation is materialized per relation as a bitmask over head-matching
    term pairs; minimal-requirement antichains make that a superset-closure
    sweep instead of one search per relation.
    """
    from .relations import rel_universe_size
    if checked.arity != 1:
        raise TypeCheckError("preservation sweeps support arity-1 declarations")
    n = rel_universe_size(src, tgt, env)
    base_pairs = [(a, b) for a in carrier(src, env) for b in carrier(tgt, env)]
    bit_of = {p: i for i, p in enumerate(base_pairs)}
    xs = enumerate_values(checked, (src,), depth, env)
    ys = enumerate_values(checked, (tgt,), depth, env)
    lifter = Lifter(checked, mode, env)

    term_pairs = []
    antichains = []
    fast = True
    for x in xs:
        for y in ys:
            if not (isinstance(x, Con) and isinstance(y, Con)):
                continue
            if x.ctor != y.ctor:
                continue
            term_pairs.append((x, y))
            chains = lifter.requirement_antichain(x, y)
            if chains is None:
                fast = False
            antichains.append(chains)

    size = 1 << n
    if fast:
        lifted = [0] * size
        for j, chains in enumerate(antichains):
            bit = 1 << j
            for vec in chains:
                mask = 0
                ok = True
                for (a, b) in vec[0]:
                    if (a, b) not in bit_of:
                        ok = False
                        break
                    mask |= 1 << bit_of[(a, b)]
                if not ok:
                    continue
                free = (size - 1) & ~mask
                sub = free
                while True:
                    lifted[mask | sub] |= bit
                    if sub == 0:
                        break
                    sub = (sub - 1) & free
    else:
        memo: dict[int, int] = {}

        def lifted_mask(mask: int) -> int:
            if mask in memo:
                return memo[mask]
            r = Rel(src, tgt, frozenset(
                p for i, p in enumerate(base_pairs) if mask >> i & 1))
            out = 0
            for j, (x, y) in enumerate(term_pairs):
                status = lifter.decide(r, x, y)
                if status == INCONCLUSIVE:
                    raise CapsExceeded("inconclusive lifting cell in sweep")
                if status == RELATED:
                    out |= 1 << j
            memo[mask] = out
            return out

        lifted = None

    tested = 0
    for s_mask in range(size):
        ls = lifted[s_mask] if fast else lifted_mask(s_mask)
        not_ls = ~ls
        r_mask = s_mask
        while True:
            lr = lifted[r_mask] if fast else lifted_mask(r_mask)
            if lr & not_ls:
                return _build_witness(checked, mode, env, lifter, src, tgt,
                                      base_pairs, term_pairs, r_mask,
                                      s_mask, lr & not_ls)
            if r_mask == 0:
                break
            r_mask = (r_mask - 1) & s_mask
        tested += 1 << bin(s_mask).count("1")
    return tested


def _build_witness(checked, mode, env, lifter, src, tgt, base_pairs,
                   term_pairs, r_mask, s_mask, diff_bits):
    smaller = Rel(src, tgt, frozenset(
        p for i, p in enumerate(base_pairs) if r_mask >> i & 1))
    larger = Rel(src, tgt, frozenset(
        p for i, p in enumerate(base_pairs) if s_mask >> i & 1))
    j = (diff_bits & -diff_bits).bit_length() - 1
    lhs, rhs = term_pairs[j]
    deriv = lifter.check(smaller, lhs, rhs).derivation
    return PreservationWitness(smaller, larger, lhs, rhs, deriv)


# --------------------------------------------------------------------------
# gmap and the graph lemma
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GmapResult:
    status: str  # defined | undefined | non_unique | inconclusive
    value: Optional[Term] = None
    derivation: Optional[Derivation] = None
    second: Optional[Term] = None
    second_derivation: Optional[Derivation] = None


def shape_candidates(checked: CheckedDecl, x: Term,
                     target: Sequence[TypeExpr], env: Env) -> list[Term]:
    """Terms with the same constructor tree as `x`, data leaves ranging over
    the carriers that the target instance induces."""
    if not isinstance(x, Con):
        raise TypeCheckError("shape candidates start from a constructor term")
    ctor = checked.ctor(x.ctor)
    sigma = match_instance(ctor.ret_instance, tuple(target))
    if sigma is None:
        return []
    sigma_x = dict(zip(ctor.quantified, x.type_args))
    for q in ctor.quantified:
        sigma.setdefault(q, sigma_x[q])
    choices: list[list[Term]] = []
    for declared, xi in zip(ctor.args, x.args):
        choices.append(_arg_candidates(checked, declared, xi, sigma, env))
    out = []
    for combo in itertools.product(*choices):
        out.append(Con(x.ctor, tuple(sigma[q] for q in ctor.quantified),
                       tuple(combo)))
    return out


def _arg_candidates(checked, declared, xi, sigma, env) -> list[Term]:
    if isinstance(declared, App):
        sub = checked if declared.con == checked.name else env.decl(declared.con)
        target = tuple(subst_type(p, sigma) for p in declared.args)
        return shape_candidates(sub, xi, target, env)
    if isinstance(declared, Prod):
        left = _arg_candidates(checked, declared.left, xi.fst, sigma, env)
        right = _arg_candidates(checked, declared.right, xi.snd, sigma, env)
        return [Pair(a, b) for a in left for b in right]
    return carrier(subst_type(declared, sigma), env)


def gmap(checked: CheckedDecl, f: FinFun, x: Term, env: Env,
         lifter: Optional[Lifter] = None) -> GmapResult:
    """The partial map induced by the graph of `f` through the lifting.

    Candidates share x's constructor tree (liftings only relate terms with
    identical heads), so the search is complete; the result carries a
    replayable derivation."""
    fs = (f,) if isinstance(f, FinFun) else tuple(f)
    ty = type_of(x, env)
    if not (isinstance(ty, App) and ty.con == checked.name):
        raise TypeCheckError(f"term is not an instance of {checked.name}")
    if tuple(ty.args) != tuple(fi.dom for fi in fs):
        raise TypeCheckError("table domains do not match the term instance")
    rels = tuple(graph(fi) for fi in fs)
    lifter = lifter or Lifter(checked, "completion", env)
    hits: list[Term] = []
    saw_inconclusive = False
    for y in shape_candidates(checked, x, tuple(fi.cod for fi in fs), env):
        status = lifter.decide(rels, x, y)
        if status == INCONCLUSIVE:
            saw_inconclusive = True
        elif status == RELATED:
            hits.append(y)
    if len(hits) >= 2:
        d0 = lifter.check(rels, x, hits[0]).derivation
        d1 = lifter.check(rels, x, hits[1]).derivation
        return GmapResult("non_unique", hits[0], d0, hits[1], d1)
    if saw_inconclusive:
        return GmapResult("inconclusive")
    if not hits:
        return GmapResult("undefined")
    d0 = lifter.check(rels, x, hits[0]).derivation
    return GmapResult("defined", hits[0], d0)


@dataclass(frozen=True)
class GraphLemmaViolation:
    fun: FinFun
    lhs: Term
    partners: tuple[Term, ...]
    kind: str  # "non_unique" | "map_disagrees"


@dataclass(frozen=True)
class GraphLemmaReport:
    decl: str
    depth: int
    verdict: str
    functions: int
    terms_checked: int
    defined_count: int
    violations: tuple[GraphLemmaViolation, ...] = ()
    inconclusive: tuple[str, ...] = ()


def check_graph_lemma(checked: CheckedDecl, funs: Sequence[FinFun], depth: int,
                      env: Env, extra_terms: Sequence[Term] = ()
                      ) -> GraphLemmaReport:
    """For every function and every enumerated term, the lifting of the
    function's graph admits at most one partner.  For declarations whose
    constructors all return variable instances, the partner must moreover
    be exactly the ordinary map image, everywhere defined."""
    violations: list[GraphLemmaViolation] = []
    notes: list[str] = []
    lifter = Lifter(checked, "completion", env)
    terms_checked = 0
    defined = 0
    for f in funs:
        xs = list(enumerate_values(checked, (f.dom,), depth, env))
        for t in extra_terms:
            if type_of(t, env) == App(checked.name, (f.dom,)) and t not in xs:
                xs.append(t)
        rels = (graph(f),)
        for x in xs:
            terms_checked += 1
            partners = []
            inconclusive_here = False
            for y in shape_candidates(checked, x, (f.cod,), env):
                status = lifter.decide(rels, x, y)
                if status == INCONCLUSIVE:
                    inconclusive_here = True
                elif status == RELATED:
                    partners.append(y)
            if inconclusive_here:
                notes.append(f"inconclusive at {x!r}")
                continue
            if len(partners) > 1:
                violations.append(GraphLemmaViolation(
                    f, x, tuple(partners), "non_unique"))
                continue
            if partners:
                defined += 1
            if checked.is_adt():
                expected = map_adt(checked, f, x, env)
                if partners != [expected]:
                    violations.append(GraphLemmaViolation(
                        f, x, tuple(partners), "map_disagrees"))
    verdict = FAIL if violations else (INCONCLUSIVE if notes else PASS)
    return GraphLemmaReport(checked.name, depth, verdict, len(funs),
                            terms_checked, defined, tuple(violations),
                            tuple(notes))


# --------------------------------------------------------------------------
# Sequence-shaped declarations: structural mappability, contains-only
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SeqRoles:
    leaf: str  # c : forall a. a -> G a
    node: str  # c : forall a1 a2. G a1 -> G a2 -> G (a1 x a2)


def seq_roles(checked: CheckedDecl) -> SeqRoles:
    leaf = node = None
    for c in checked.ctors:
        if (len(c.quantified) == 1 and len(c.args) == 1
                and c.args[0] == Var(c.quantified[0])
                and c.ret_instance == (Var(c.quantified[0]),)):
            leaf = c.name
        if (len(c.quantified) == 2 and len(c.args) == 2
                and c.args == (App(checked.name, (Var(c.quantified[0]),)),
                               App(checked.name, (Var(c.quantified[1]),)))
                and c.ret_instance == (Prod(Var(c.quantified[0]),
                                            Var(c.quantified[1])),)):
            node = c.name
    if leaf is None or node is None or len(checked.ctors) != 2:
        raise TypeCheckError(
            f"{checked.name} is not sequence-shaped (one injection "
            f"constructor and one pairing constructor)")
    return SeqRoles(leaf, node)


def decompose_fun(f: FinFun, env: Env) -> Optional[tuple[FinFun, FinFun]]:
    """Extensional factorization f(a1, a2) = (f1 a1, f2 a2), if any."""
    if not (isinstance(f.dom, Prod) and isinstance(f.cod, Prod)):
        return None
    lefts = carrier(f.dom.left, env)
    rights = carrier(f.dom.right, env)
    f1 = {a1: f(Pair(a1, rights[0])).fst for a1 in lefts}
    f2 = {a2: f(Pair(lefts[0], a2)).snd for a2 in rights}
    for a1 in lefts:
        for a2 in rights:
            if f(Pair(a1, a2)) != Pair(f1[a1], f2[a2]):
                return None
    from .kernel import make_finfun
    return (make_finfun(f.dom.left, f.cod.left, f1, env),
            make_finfun(f.dom.right, f.cod.right, f2, env))


@dataclass(frozen=True)
class MappableResult:
    status: str  # defined | not_mappable
    value: Optional[Term] = None


def mappable_structural(checked: CheckedDecl, f: FinFun, s: Term,
                        env: Env) -> MappableResult:
    """Structural recursion: any table maps over an injection; over a
    pairing only when it factors componentwise, both factors recursively
    mappable."""
    roles = seq_roles(checked)

    def go(fn: FinFun, t: Term) -> Optional[Term]:
        if t.ctor == roles.leaf:
            return Con(roles.leaf, (fn.cod,), (fn(t.args[0]),))
        d = decompose_fun(fn, env)
        if d is None:
            return None
        f1, f2 = d
        r1 = go(f1, t.args[0])
        r2 = go(f2, t.args[1])
        if r1 is None or r2 is None:
            return None
        return Con(roles.node, (f1.cod, f2.cod), (r1, r2))

    out = go(f, s)
    if out is None:
        return MappableResult("not_mappable")
    return MappableResult("defined", out)


def contains_only(checked: CheckedDecl, a: Term, s: Term, env: Env) -> bool:
    """Whether every data leaf of `s` is the matching component of `a`:
    an injection must hold `a` itself; a pairing forces `a` to be a pair
    whose components the halves contain respectively."""
    roles = seq_roles(checked)
    if not isinstance(s, Con):
        raise TypeCheckError("expected a constructor term")
    if s.ctor == roles.leaf:
        return s.args[0] == a
    if not isinstance(a, Pair):
        return False
    return (contains_only(checked, a.fst, s.args[0], env)
            and contains_only(checked, a.snd, s.args[1], env))


# --------------------------------------------------------------------------
# The free theorem for leaf-filling polymorphic candidates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CandidatePoly:
    """A finite polymorphic family: one total table A -> G A per universe
    type, standing in for a polymorphic function of that shape."""
    tables: tuple[tuple[TypeExpr, FinFun], ...]

    def table(self, ty: TypeExpr) -> FinFun:
        for t, f in self.tables:
            if t == ty:
                return f
        raise TypeCheckError(f"candidate has no table at {ty!r}")

    def types(self) -> tuple[TypeExpr, ...]:
        return tuple(t for t, _ in self.tables)


def candidate_of(checked: CheckedDecl, env: Env,
                 mapping: dict[TypeExpr, dict[Term, Term]]) -> CandidatePoly:
    from .kernel import make_finfun
    tables = []
    for ty, table in mapping.items():
        f = make_finfun(ty, App(checked.name, (ty,)), table, env)
        for v in table.values():
            if type_of(v, env) != App(checked.name, (ty,)):
                raise TypeCheckError("candidate result has the wrong type")
        tables.append((ty, f))
    return CandidatePoly(tuple(tables))


def leaf_candidate(checked: CheckedDecl, universe: Sequence[TypeExpr],
                   env: Env) -> CandidatePoly:
    """The constructor-injection candidate a |-> leaf a."""
    roles = seq_roles(checked)
    return candidate_of(checked, env, {
        ty: {a: Con(roles.leaf, (ty,), (a,)) for a in carrier(ty, env)}
        for ty in universe})


def enumerate_candidates(checked: CheckedDecl, universe: Sequence[TypeExpr],
                         env: Env, result_depth: int = 1
                         ) -> Iterator[CandidatePoly]:
    """Every candidate family over the universe whose results stay within
    the given constructor depth."""
    universe = tuple(universe)
    per_type = []
    for ty in universe:
        dom = carrier(ty, env)
        results = enumerate_values(checked, (ty,), result_depth, env)
        per_type.append([dict(zip(dom, combo))
                         for combo in itertools.product(results,
                                                        repeat=len(dom))])
    for chosen in itertools.product(*per_type):
        yield candidate_of(checked, env, dict(zip(universe, chosen)))


@dataclass(frozen=True)
class FreeTheoremWitness:
    rel: Rel
    src_type: TypeExpr
    tgt_type: TypeExpr
    left: Term
    right: Term
    is_delta: bool
    delta_element: Optional[Term] = None


@dataclass(frozen=True)
class FreeTheoremReport:
    verdict: str  # holds | not_applicable | violated | inconclusive
    universe: tuple[TypeExpr, ...]
    parametricity_witness: Optional[FreeTheoremWitness] = None
    conclusion_witness: Optional[tuple[Term, Term]] = None
    cells_checked: int = 0
    inconclusive: tuple[str, ...] = ()


def check_free_theorem(candidate: CandidatePoly, universe: Sequence[TypeExpr],
                       checked: CheckedDecl, env: Env) -> FreeTheoremReport:
    """Audit parametricity of a candidate extensionally, then check that
    every produced value contains only its argument as data.

    Phase 1 starts with the singleton relations delta_a at (a, a), the
    instances the theorem's argument actually consumes, so a failure is
    reported against the delta it breaks; then sweeps every relation and
    every related pair over the universe.  A failure classifies the
    candidate as non-parametric and skips phase 2.
    """
    universe = tuple(universe)
    lifter = Lifter(checked, "completion", env)
    notes: list[str] = []
    cells = 0

    for ty in universe:
        f = candidate.table(ty)
        for a in carrier(ty, env):
            d = delta(a, ty, env)
            cells += 1
            status = lifter.decide(d, f(a), f(a))
            if status == INCONCLUSIVE:
                notes.append(f"delta audit inconclusive at {a!r}")
            elif status == NOT_RELATED:
                witness = FreeTheoremWitness(d, ty, ty, a, a, True, a)
                return FreeTheoremReport("not_applicable", universe, witness,
                                         None, cells, tuple(notes))

    for src, tgt in itertools.product(universe, repeat=2):
        fa = candidate.table(src)
        fb = candidate.table(tgt)
        for r in enumerate_rels(src, tgt, env):
            for a, b in r.sorted_pairs():
                cells += 1
                status = lifter.decide(r, fa(a), fb(b))
                if status == INCONCLUSIVE:
                    notes.append(f"parametricity inconclusive at {(a, b)!r}")
                elif status == NOT_RELATED:
                    witness = FreeTheoremWitness(r, src, tgt, a, b, False)
                    return FreeTheoremReport("not_applicable", universe,
                                             witness, None, cells,
                                             tuple(notes))

    if notes:
        return FreeTheoremReport("inconclusive", universe, None, None, cells,
                                 tuple(notes))

    for ty in universe:
        f = candidate.table(ty)
        for a in carrier(ty, env):
            if not contains_only(checked, a, f(a), env):
                return FreeTheoremReport("violated", universe, None,
                                         (a, f(a)), cells)
    return FreeTheoremReport("holds", universe, None, None, cells)
