"""Relational liftings derived from data declarations.

Every declaration induces one lifting rule per constructor: two terms are
related exactly when they share a head constructor and their arguments are
related componentwise, for some choice of relations instantiating the
constructor's quantified variables.  Variables pinned by the return
instance are read off the queried relation (by exact pattern
decomposition); the remaining, existentially quantified ones are searched.

Two modes are offered for a declaration G:

* naive       - the rules of G itself, with constrained return instances
                handled by exact decomposition of the queried relation;
* completion  - both terms are embedded into the completion of G and the
                rules of the completed declaration are used.

The existential search is exhaustive: candidates are drawn from the
minimal relations certified by the sub-derivations (which dominate every
other valid choice, since premises grow monotonically and side conditions
shrink antitonically in each candidate), with a literal ascending-by-size
sweep of the whole subrelation lattice as a fallback whenever a variable's
variance is mixed.  `NotRelated` is therefore definitive within caps;
running out of caps reports `Inconclusive` instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .completion import CompletedDecl, complete, embed
from .kernel import (
    App, Arrow, Bool, CapsExceeded, CheckedDecl, Con, CtorSig, Env, FinFun,
    GadtError, Pair, Prod, Term, TypeCheckError, TypeExpr, Unit, UnitLit, Var,
    carrier, free_type_vars, subst_type, term_key, type_key,
)
from .relations import (
    Rel, arrow_related, arrow_rel, decompose_product, empty_rel, enumerate_rels,
    eq_rel, product_rel, rel_universe_size,
)

RELATED = "related"
NOT_RELATED = "not_related"
INCONCLUSIVE = "inconclusive"

MODES = ("naive", "completion")


class ReplayError(GadtError):
    """A derivation failed independent revalidation."""


# --------------------------------------------------------------------------
# Derivations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VarFact:
    var: str
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class BaseFact:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class PairSplit:
    left: "PremiseNode"
    right: "PremiseNode"


@dataclass(frozen=True)
class ArrowCond:
    dom_rel: Rel
    cod_rel: Rel
    lhs: FinFun
    rhs: FinFun


@dataclass(frozen=True)
class SubLift:
    derivation: "Derivation"


PremiseNode = Union[VarFact, BaseFact, PairSplit, ArrowCond, SubLift]


@dataclass(frozen=True)
class Derivation:
    """A witness tree for one lifting judgement.

    `assignment` records the relation chosen for every quantified variable
    of the constructor, pinned and existential alike, so the tree can be
    replayed bottom-up with no reference to the search that produced it.
    `param_names` carries the display names of the rule's relation
    parameters, aligned with `assignment`.
    """

    decl_name: str
    ctor: str
    rule_name: str
    query: tuple[Rel, ...]
    assignment: tuple[tuple[str, Rel], ...]
    lhs: Term
    rhs: Term
    premises: tuple[PremiseNode, ...]
    source_lhs: Optional[Term] = None
    source_rhs: Optional[Term] = None
    param_names: tuple[str, ...] = ()

    def display_name(self, var: str) -> str:
        for (v, _), name in zip(self.assignment, self.param_names):
            if v == var:
                return name
        return var

    def chosen(self, var: str) -> Rel:
        for v, r in self.assignment:
            if v == var:
                return r
        raise KeyError(var)

    def sub_derivations(self) -> list["Derivation"]:
        out: list[Derivation] = []

        def walk(node: PremiseNode) -> None:
            if isinstance(node, SubLift):
                out.append(node.derivation)
            elif isinstance(node, PairSplit):
                walk(node.left)
                walk(node.right)

        for p in self.premises:
            walk(p)
        return out


@dataclass(frozen=True)
class LiftResult:
    status: str
    derivation: Optional[Derivation] = None
    reason: str = ""

    @property
    def related(self) -> bool:
        return self.status == RELATED


def rule_name_for(ctor_name: str) -> str:
    # A combining circumflex over the first letter, as in "p̂lift".
    return ctor_name[0] + "̂" + ctor_name[1:] + "lift"


def rel_param_names(arity: int, ctor: CtorSig) -> tuple[str, ...]:
    """Display names for a rule's relation parameters, one per quantified
    variable: the single pinned return variable reads `R`, the others are
    numbered in quantification order."""
    ret_vars = [t.name for t in ctor.ret_instance if isinstance(t, Var)]
    pinned_single = (arity == 1 and len(ret_vars) == 1
                     and isinstance(ctor.ret_instance[0], Var))
    names = []
    counter = 1
    for q in ctor.quantified:
        if pinned_single and q == ret_vars[0]:
            names.append("R")
        else:
            names.append(f"R{counter}")
            counter += 1
    return tuple(names)


# --------------------------------------------------------------------------
# Rule sets (for display and structural inspection)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftRule:
    ctor: str
    rule_name: str
    rel_params: tuple[tuple[str, str], ...]  # (quantified var, display name)
    premises: tuple[TypeExpr, ...]
    conclusion: tuple[TypeExpr, ...]

    def param(self, var: str) -> str:
        for v, n in self.rel_params:
            if v == var:
                return n
        raise KeyError(var)


@dataclass(frozen=True)
class LiftRuleSet:
    decl_name: str
    mode: str
    structural_decl: CheckedDecl
    rules: tuple[LiftRule, ...]

    @property
    def lifted_name(self) -> str:
        return self.structural_decl.name + "lift"

    def rule(self, ctor: str) -> LiftRule:
        for r in self.rules:
            if r.ctor == ctor:
                return r
        raise KeyError(ctor)

    def render(self) -> str:
        lines = []
        head = f"{self.lifted_name}: relational lifting of {self.decl_name}"
        if self.mode == "completion":
            head += (f" (rules of the completion {self.structural_decl.name}; "
                     f"membership is decided on embedded terms)")
        lines.append(head)
        for r in self.rules:
            lines.append("")
            prem = "    ".join(self._premise_str(r, i, p)
                               for i, p in enumerate(r.premises)) or "(no premises)"
            concl = self._conclusion_str(r)
            width = max(len(prem), len(concl))
            lines.append(f"  {prem}")
            lines.append(f"  {'-' * width} {r.rule_name}")
            lines.append(f"  {concl}")
        return "\n".join(lines)

    def _lift_str(self, rule: LiftRule, pat: TypeExpr) -> str:
        if isinstance(pat, Var):
            return rule.param(pat.name)
        if isinstance(pat, Bool):
            return "eq_Bool"
        if isinstance(pat, Unit):
            return "eq_Unit"
        if isinstance(pat, Prod):
            return (f"({self._lift_str(rule, pat.left)} *^ "
                    f"{self._lift_str(rule, pat.right)})")
        if isinstance(pat, Arrow):
            return (f"({self._lift_str(rule, pat.dom)} ->^ "
                    f"{self._lift_str(rule, pat.cod)})")
        return f"{pat.con}lift " + " ".join(self._lift_str(rule, a) for a in pat.args)

    def _arg_names(self, rule: LiftRule, i: int, pat: TypeExpr) -> tuple[str, str]:
        if isinstance(pat, Arrow):
            return (f"f{i}", f"g{i}")
        if isinstance(pat, App):
            return (f"s{i}", f"t{i}")
        return (f"a{i}", f"b{i}")

    def _premise_str(self, rule: LiftRule, i: int, pat: TypeExpr) -> str:
        a, b = self._arg_names(rule, i, pat)
        if isinstance(pat, Var):
            return f"({a}, {b}) in {rule.param(pat.name)}"
        if isinstance(pat, (Bool, Unit)):
            return f"{a} = {b}"
        if isinstance(pat, App):
            inner = " ".join(self._lift_str(rule, p) for p in pat.args)
            return f"{pat.con}lift {inner} {a} {b}"
        return f"{self._lift_str(rule, pat)} {a} {b}"

    def _conclusion_str(self, rule: LiftRule) -> str:
        rels = " ".join(self._lift_str(rule, p) for p in rule.conclusion)
        xs = " ".join(self._arg_names(rule, i, p)[0]
                      for i, p in enumerate(rule.premises))
        ys = " ".join(self._arg_names(rule, i, p)[1]
                      for i, p in enumerate(rule.premises))
        lhs = f"({rule.ctor}{' ' + xs if xs else ''})"
        rhs = f"({rule.ctor}{' ' + ys if ys else ''})"
        return f"{self.lifted_name} {rels} {lhs} {rhs}"


def derive_rules(checked: CheckedDecl, mode: str, env: Env) -> LiftRuleSet:
    """One rule per constructor of the structural declaration for `mode`."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    struct = checked if mode == "naive" else complete(checked, env).completed
    rules = []
    for ctor in struct.ctors:
        names = rel_param_names(struct.arity, ctor)
        params = tuple(zip(ctor.quantified, names))
        rules.append(LiftRule(ctor.name, rule_name_for(ctor.name),
                              params, ctor.args, ctor.ret_instance))
    return LiftRuleSet(checked.name, mode, struct, tuple(rules))


# --------------------------------------------------------------------------
# Shared pattern helpers
# --------------------------------------------------------------------------

def pattern_pairs(pat: TypeExpr, a: Term, b: Term
                  ) -> Optional[dict[str, frozenset[tuple[Term, Term]]]]:
    """Distribute one term pair over a constructor-free pattern, yielding the
    pairs each variable must relate, or None when base components differ."""
    if isinstance(pat, Var):
        return {pat.name: frozenset(((a, b),))}
    if isinstance(pat, (Bool, Unit)):
        return {} if a == b else None
    if isinstance(pat, Prod):
        if not (isinstance(a, Pair) and isinstance(b, Pair)):
            raise TypeCheckError("pattern/term shape mismatch")
        left = pattern_pairs(pat.left, a.fst, b.fst)
        right = pattern_pairs(pat.right, a.snd, b.snd)
        if left is None or right is None:
            return None
        return _merge_buckets(left, right)
    raise TypeCheckError(f"unsupported pattern {pat!r}")


def _merge_buckets(*buckets: dict[str, frozenset]) -> dict[str, frozenset]:
    out: dict[str, frozenset] = {}
    for b in buckets:
        for k, v in b.items():
            out[k] = out.get(k, frozenset()) | v
    return out


def pattern_rel(pat: TypeExpr, rho: dict[str, Rel],
                sigma_a: dict[str, TypeExpr], sigma_b: dict[str, TypeExpr],
                env: Env) -> Rel:
    """Materialize the relational interpretation of a pattern under an
    assignment of relations to its variables."""
    if isinstance(pat, Var):
        return rho[pat.name]
    if isinstance(pat, (Bool, Unit)):
        return eq_rel(pat, env)
    if isinstance(pat, Prod):
        return product_rel(pattern_rel(pat.left, rho, sigma_a, sigma_b, env),
                           pattern_rel(pat.right, rho, sigma_a, sigma_b, env))
    if isinstance(pat, Arrow):
        return arrow_rel(pattern_rel(pat.dom, rho, sigma_a, sigma_b, env),
                         pattern_rel(pat.cod, rho, sigma_a, sigma_b, env), env)
    raise TypeCheckError(f"constructor application inside a pattern: {pat!r}")


def _rel_key(r: Rel):
    return (len(r.pairs),
            tuple(sorted((term_key(a), term_key(b)) for a, b in r.pairs)))


def _mask_key(m: frozenset):
    return (len(m), tuple(sorted((term_key(a), term_key(b)) for a, b in m)))


_FAIL = "fail"


# --------------------------------------------------------------------------
# The lifting engine
# --------------------------------------------------------------------------

class Lifter:
    """Decides lifting judgements for one declaration in one mode.

    Instances hold memo tables keyed by immutable values, so results are
    deterministic; distinct instances never share state and can be used
    concurrently.
    """

    def __init__(self, checked: CheckedDecl, mode: str, env: Env):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.checked = checked
        self.mode = mode
        self.base_env = env
        if mode == "completion":
            self.comp: Optional[CompletedDecl] = complete(checked, env)
            self.struct = self.comp.completed
            self.env = env.with_decl(self.comp.completed)
        else:
            self.comp = None
            self.struct = checked
            self.env = env
        self._memo: dict = {}
        self._req: dict = {}
        self._fast: dict[str, bool] = {}
        self._embed: dict[Term, Term] = {}

    # -- public queries ----------------------------------------------------

    def _prepare(self, rels, x: Term, y: Term):
        rels = (rels,) if isinstance(rels, Rel) else tuple(rels)
        if len(rels) != self.checked.arity:
            raise TypeCheckError(
                f"expected {self.checked.arity} relations, got {len(rels)}")
        if self.mode == "completion":
            x = self._embedded(x)
            y = self._embedded(y)
        return rels, x, y

    def _embedded(self, t: Term) -> Term:
        if t not in self._embed:
            self._embed[t] = embed(self.comp, t, self.base_env)
        return self._embed[t]

    def decide(self, rels, x: Term, y: Term) -> str:
        rels, u, v = self._prepare(rels, x, y)
        req = self._requirements_for(self.struct, u, v)
        if req is not None:
            return RELATED if any(
                all(m <= r.pairs for m, r in zip(vec, rels)) for vec in req
            ) else NOT_RELATED
        status, _ = self._check(self.struct, rels, u, v)
        return status

    def check(self, rels, x: Term, y: Term) -> LiftResult:
        rels, u, v = self._prepare(rels, x, y)
        status, deriv = self._check(self.struct, rels, u, v)
        if status == RELATED and self.mode == "completion":
            deriv = Derivation(deriv.decl_name, deriv.ctor, deriv.rule_name,
                               deriv.query, deriv.assignment, deriv.lhs,
                               deriv.rhs, deriv.premises, x, y,
                               deriv.param_names)
        if status == INCONCLUSIVE:
            return LiftResult(INCONCLUSIVE, None, "relation enumeration caps exceeded")
        return LiftResult(status, deriv)

    def requirement_antichain(self, x: Term, y: Term):
        """Minimal query vectors under which the pair relates, or None when
        the declaration is outside the monotone fragment."""
        if self.mode == "completion":
            x = self._embedded(x)
            y = self._embedded(y)
        return self._requirements_for(self.struct, x, y)

    # -- requirements (minimal-query antichains) ----------------------------

    def _fastpath(self, decl: CheckedDecl) -> bool:
        name = decl.name
        if name in self._fast:
            return self._fast[name]
        self._fast[name] = True  # optimistic for self-recursion
        ok = all(self._fast_ctor(decl, c) for c in decl.ctors)
        self._fast[name] = ok
        return ok

    def _fast_ctor(self, decl: CheckedDecl, ctor: CtorSig) -> bool:
        if not decl.ctor_info(ctor.name).variable_return:
            return False
        ret_vars = {t.name for t in ctor.ret_instance}
        for a in ctor.args:
            if _plain_pattern(a):
                continue
            if isinstance(a, App):
                sub = decl if a.con == decl.name else self.env.decls.get(a.con)
                if sub is None or not all(_plain_pattern(p) for p in a.args):
                    return False
                if not self._fastpath(sub):
                    return False
                continue
            if isinstance(a, Arrow):
                if not (isinstance(a.cod, Var) and a.cod.name in ret_vars):
                    return False
                if not _plain_pattern(a.dom):
                    return False
                if free_type_vars(a.dom) & ret_vars:
                    return False
                continue
            return False
        return True

    def _requirements_for(self, decl: CheckedDecl, x: Term, y: Term):
        key = (decl.name, x, y)
        if key in self._req:
            return self._req[key]
        result = self._requirements(decl, x, y)
        self._req[key] = result
        return result

    def _requirements(self, decl: CheckedDecl, x: Term, y: Term):
        if not self._fastpath(decl):
            return None
        if not (isinstance(x, Con) and isinstance(y, Con)) or x.ctor != y.ctor:
            return ()
        ctor = decl.ctor(x.ctor)
        sigma_a = dict(zip(ctor.quantified, x.type_args))
        sigma_b = dict(zip(ctor.quantified, y.type_args))
        ret_vars = [t.name for t in ctor.ret_instance]
        var_index = {v: i for i, v in enumerate(ret_vars)}

        const_buckets: dict[str, frozenset] = {}
        choice_lists: list[list[dict[str, frozenset]]] = []
        arrow_specs: list[tuple[TypeExpr, str, FinFun, FinFun]] = []
        for declared, xi, yi in zip(ctor.args, x.args, y.args):
            if isinstance(declared, Arrow):
                arrow_specs.append((declared.dom, declared.cod.name, xi, yi))
                continue
            if isinstance(declared, App):
                sub = decl if declared.con == decl.name else self.env.decl(declared.con)
                sub_req = self._requirements_for(sub, xi, yi)
                if sub_req is None:
                    return None
                choices = []
                for vec in sub_req:
                    buckets: dict[str, frozenset] = {}
                    dead = False
                    for pat, mask in zip(declared.args, vec):
                        for (u, v) in mask:
                            d = pattern_pairs(pat, u, v)
                            if d is None:
                                dead = True
                                break
                            buckets = _merge_buckets(buckets, d)
                        if dead:
                            break
                    if not dead:
                        choices.append(buckets)
                if not choices:
                    return ()
                choice_lists.append(choices)
                continue
            d = pattern_pairs(declared, xi, yi)
            if d is None:
                return ()
            const_buckets = _merge_buckets(const_buckets, d)

        vectors = []
        for combo in itertools.product(*choice_lists):
            buckets = _merge_buckets(const_buckets, *combo)
            vec = [frozenset() for _ in ret_vars]
            for v, i in var_index.items():
                vec[i] |= buckets.get(v, frozenset())
            for dom_pat, cod_var, h, g in arrow_specs:
                dom_pairs = self._pattern_pair_set(dom_pat, buckets)
                image = frozenset((h(a), g(b)) for a, b in dom_pairs)
                vec[var_index[cod_var]] |= image
            vectors.append(tuple(vec))
        return _minimalize(vectors)

    def _pattern_pair_set(self, pat: TypeExpr, buckets: dict[str, frozenset]
                          ) -> frozenset:
        if isinstance(pat, Var):
            return buckets.get(pat.name, frozenset())
        if isinstance(pat, (Bool, Unit)):
            return frozenset((c, c) for c in carrier(pat, self.env))
        if isinstance(pat, Prod):
            left = self._pattern_pair_set(pat.left, buckets)
            right = self._pattern_pair_set(pat.right, buckets)
            return frozenset((Pair(a1, a2), Pair(b1, b2))
                             for a1, b1 in left for a2, b2 in right)
        raise TypeCheckError(f"unsupported pattern {pat!r}")

    # -- the structural check -----------------------------------------------

    def _check(self, decl: CheckedDecl, rels: tuple[Rel, ...], x: Term, y: Term):
        key = (decl.name, rels, x, y)
        if key in self._memo:
            return self._memo[key]
        self._memo[key] = (INCONCLUSIVE, None)  # cycle guard; overwritten below
        result = self._check_uncached(decl, rels, x, y)
        self._memo[key] = result
        return result

    def _check_uncached(self, decl, rels, x, y):
        if not (isinstance(x, Con) and isinstance(y, Con)):
            raise TypeCheckError("lifting judgements relate constructor terms")
        if x.ctor != y.ctor:
            return (NOT_RELATED, None)
        ctor = decl.ctor(x.ctor)
        sigma_a = dict(zip(ctor.quantified, x.type_args))
        sigma_b = dict(zip(ctor.quantified, y.type_args))
        for i, pat in enumerate(ctor.ret_instance):
            want_src = subst_type(pat, sigma_a)
            want_tgt = subst_type(pat, sigma_b)
            if rels[i].src != want_src or rels[i].tgt != want_tgt:
                raise TypeCheckError(
                    f"relation {i} has endpoints ({rels[i].src!r}, {rels[i].tgt!r}), "
                    f"terms require ({want_src!r}, {want_tgt!r})")

        req = self._requirements_for(decl, x, y)
        if req is not None and not any(
                all(m <= r.pairs for m, r in zip(vec, rels)) for vec in req):
            return (NOT_RELATED, None)

        branches, branch_inc = self._solve_ret(ctor, rels, sigma_a, sigma_b)
        saw_inconclusive = branch_inc
        for assign0 in branches:
            exist = [q for q in ctor.quantified if q not in assign0]
            cand_lists = []
            dead = False
            for e in exist:
                cands, complete_flag = self._exist_candidates(
                    decl, ctor, e, sigma_a, sigma_b, x, y)
                if not cands:
                    if not complete_flag:
                        saw_inconclusive = True
                    dead = True
                    break
                if not complete_flag:
                    saw_inconclusive = True
                cand_lists.append(cands)
            if dead:
                continue
            for combo in _ordered_combos(cand_lists):
                rho = dict(assign0)
                rho.update(zip(exist, combo))
                status, premises = self._eval_premises(
                    decl, ctor, rho, sigma_a, sigma_b, x, y)
                if status == INCONCLUSIVE:
                    saw_inconclusive = True
                    continue
                if status == RELATED:
                    deriv = self._finish(decl, ctor, rels, rho, sigma_a,
                                         sigma_b, x, y, premises, exist)
                    return (RELATED, deriv)
        return (INCONCLUSIVE if saw_inconclusive else NOT_RELATED, None)

    def _finish(self, decl, ctor, rels, rho, sigma_a, sigma_b, x, y,
                premises, exist):
        upgraded = self._try_upgrade(decl, ctor, rels, rho, sigma_a, sigma_b,
                                     x, y, exist)
        if upgraded is not None:
            rho, premises = upgraded
        assignment = tuple((q, rho[q]) for q in ctor.quantified)
        return Derivation(decl.name, ctor.name, rule_name_for(ctor.name),
                          rels, assignment, x, y, premises,
                          param_names=rel_param_names(decl.arity, ctor))

    # -- return pattern solving ---------------------------------------------

    def _solve_ret(self, ctor, rels, sigma_a, sigma_b):
        branches = [dict()]
        inconclusive = False
        for pat, r in zip(ctor.ret_instance, rels):
            new = []
            for st in branches:
                solved, inc = self._solve_one(pat, r, st, sigma_a, sigma_b)
                inconclusive = inconclusive or inc
                new.extend(solved)
            branches = new
            if not branches:
                break
        return branches, inconclusive

    def _solve_one(self, pat, r: Rel, st: dict, sigma_a, sigma_b):
        if isinstance(pat, Var):
            if pat.name in st:
                return ([st] if st[pat.name] == r else []), False
            st2 = dict(st)
            st2[pat.name] = r
            return [st2], False
        if isinstance(pat, (Bool, Unit)):
            return ([st] if r == eq_rel(pat, self.env) else []), False
        if isinstance(pat, Prod):
            if r.pairs:
                d = decompose_product(r)
                if d is None:
                    return [], False
                out, inc1 = self._solve_one(pat.left, d[0], st, sigma_a, sigma_b)
                final = []
                inc = inc1
                for s in out:
                    more, inc2 = self._solve_one(pat.right, d[1], s, sigma_a, sigma_b)
                    inc = inc or inc2
                    final.extend(more)
                return final, inc
            # Empty product: one component must be empty, the other is free
            # (its variables become existentials).
            out = []
            inc = False
            for side, other in ((pat.left, pat.right), (pat.right, pat.left)):
                e = empty_rel(subst_type(side, sigma_a), subst_type(side, sigma_b))
                solved, inc1 = self._solve_one(side, e, st, sigma_a, sigma_b)
                inc = inc or inc1
                for s in solved:
                    if s not in out:
                        out.append(s)
            return out, inc
        if isinstance(pat, Arrow):
            # Exact factorizations of r through the arrow action; bounded
            # search over both component universes.
            try:
                dom_rels = list(enumerate_rels(subst_type(pat.dom, sigma_a),
                                               subst_type(pat.dom, sigma_b),
                                               self.env))
                cod_rels = list(enumerate_rels(subst_type(pat.cod, sigma_a),
                                               subst_type(pat.cod, sigma_b),
                                               self.env))
            except CapsExceeded:
                return [], True
            out = []
            inc = False
            for dr in dom_rels:
                for cr in cod_rels:
                    if arrow_rel(dr, cr, self.env) != r:
                        continue
                    solved, inc1 = self._solve_one(pat.dom, dr, st, sigma_a, sigma_b)
                    inc = inc or inc1
                    for s in solved:
                        more, inc2 = self._solve_one(pat.cod, cr, s, sigma_a, sigma_b)
                        inc = inc or inc2
                        for s2 in more:
                            if s2 not in out:
                                out.append(s2)
            return out, inc
        raise TypeCheckError(f"unsupported return pattern {pat!r}")

    # -- existential candidates ----------------------------------------------

    def _exist_candidates(self, decl, ctor, e, sigma_a, sigma_b, x, y):
        """Candidate relations for an existential variable, with a flag that
        is False when caps truncated the candidate space."""
        src = sigma_a[e]
        tgt = sigma_b[e]
        option_lists: list[list[frozenset]] = []
        literal = False
        for declared, xi, yi in zip(ctor.args, x.args, y.args):
            if e not in free_type_vars(declared):
                continue
            if isinstance(declared, Arrow):
                in_dom = e in free_type_vars(declared.dom)
                in_cod = e in free_type_vars(declared.cod)
                if in_cod:
                    literal = True
                    break
                assert in_dom  # antitone occurrence: no lower constraint
                continue
            if isinstance(declared, App):
                sub = decl if declared.con == decl.name else self.env.decl(declared.con)
                sub_req = self._requirements_for(sub, xi, yi)
                if sub_req is None:
                    literal = True
                    break
                options = []
                for vec in sub_req:
                    buckets: dict[str, frozenset] = {}
                    dead = False
                    for pat, mask in zip(declared.args, vec):
                        for (u, v) in mask:
                            d = pattern_pairs(pat, u, v)
                            if d is None:
                                dead = True
                                break
                            buckets = _merge_buckets(buckets, d)
                        if dead:
                            break
                    if not dead:
                        options.append(buckets.get(e, frozenset()))
                if not options:
                    return [], True  # premise unsatisfiable: no candidate works
                option_lists.append(options)
                continue
            d = pattern_pairs(declared, xi, yi)
            if d is None:
                return [], True
            option_lists.append([d.get(e, frozenset())])

        if literal:
            try:
                rel_universe_size(src, tgt, self.env)
            except CapsExceeded:
                return [], False
            cands = sorted(enumerate_rels(src, tgt, self.env), key=_rel_key)
            return cands, True

        if not option_lists:
            return [empty_rel(src, tgt)], True
        masks = set()
        for combo in itertools.product(*option_lists):
            m = frozenset()
            for part in combo:
                m |= part
            masks.add(m)
        minimal = _minimal_masks(masks)
        return [Rel(src, tgt, m) for m in sorted(minimal, key=_mask_key)], True

    # -- premise evaluation ---------------------------------------------------

    def _eval_premises(self, decl, ctor, rho, sigma_a, sigma_b, x, y):
        nodes = []
        saw_inc = False
        for declared, xi, yi in zip(ctor.args, x.args, y.args):
            r = self._arg_holds(decl, declared, xi, yi, rho, sigma_a, sigma_b)
            if r == _FAIL:
                return (NOT_RELATED, None)
            if r == INCONCLUSIVE:
                saw_inc = True
                continue
            nodes.append(r)
        if saw_inc:
            return (INCONCLUSIVE, None)
        return (RELATED, tuple(nodes))

    def _arg_holds(self, decl, declared, xi, yi, rho, sigma_a, sigma_b):
        if isinstance(declared, Var):
            if (xi, yi) in rho[declared.name].pairs:
                return VarFact(declared.name, xi, yi)
            return _FAIL
        if isinstance(declared, (Bool, Unit)):
            return BaseFact(xi, yi) if xi == yi else _FAIL
        if isinstance(declared, Prod):
            left = self._arg_holds(decl, declared.left, xi.fst, yi.fst,
                                   rho, sigma_a, sigma_b)
            if left in (_FAIL, INCONCLUSIVE):
                return left
            right = self._arg_holds(decl, declared.right, xi.snd, yi.snd,
                                    rho, sigma_a, sigma_b)
            if right in (_FAIL, INCONCLUSIVE):
                return right
            return PairSplit(left, right)
        if isinstance(declared, Arrow):
            try:
                dom = pattern_rel(declared.dom, rho, sigma_a, sigma_b, self.env)
                cod = pattern_rel(declared.cod, rho, sigma_a, sigma_b, self.env)
            except CapsExceeded:
                return INCONCLUSIVE
            if arrow_related(dom, cod, xi, yi):
                return ArrowCond(dom, cod, xi, yi)
            return _FAIL
        if isinstance(declared, App):
            sub = decl if declared.con == decl.name else self.env.decl(declared.con)
            try:
                sub_rels = tuple(pattern_rel(p, rho, sigma_a, sigma_b, self.env)
                                 for p in declared.args)
            except CapsExceeded:
                return INCONCLUSIVE
            status, d = self._check(sub, sub_rels, xi, yi)
            if status == RELATED:
                return SubLift(d)
            return INCONCLUSIVE if status == INCONCLUSIVE else _FAIL
        raise TypeCheckError(f"unsupported argument type {declared!r}")

    # -- reported-witness refinement ------------------------------------------

    def _try_upgrade(self, decl, ctor, rels, rho, sigma_a, sigma_b, x, y, exist):
        """Prefer the exact factorization of the query for existential slots
        whose recursive arguments are leaf constructors; this makes reported
        witnesses read like hand-written ones (component graphs at leaves,
        least certified relations below)."""
        if not exist:
            return None
        var_index = {t.name: i for i, t in enumerate(ctor.ret_instance)
                     if isinstance(t, Var)}
        rho2 = dict(rho)
        changed = False
        for e in exist:
            comp_rel = self._decomposition_choice(decl, ctor, e, rels,
                                                  var_index, sigma_a, sigma_b)
            if comp_rel is None or comp_rel == rho2[e]:
                continue
            children = [(a, xi, yi) for a, xi, yi in
                        zip(ctor.args, x.args, y.args)
                        if isinstance(a, App) and e in free_type_vars(a)]
            if not children:
                continue
            if not all(self._is_leaf_pair(decl, a, xi, yi)
                       for a, xi, yi in children):
                continue
            trial = dict(rho2)
            trial[e] = comp_rel
            ok = all(self._arg_holds(decl, a, xi, yi, trial, sigma_a, sigma_b)
                     not in (_FAIL, INCONCLUSIVE) for a, xi, yi in children)
            if ok:
                rho2[e] = comp_rel
                changed = True
        if not changed:
            return None
        status, premises = self._eval_premises(decl, ctor, rho2, sigma_a,
                                               sigma_b, x, y)
        if status != RELATED:
            return None
        return rho2, premises

    def _decomposition_choice(self, decl, ctor, e, rels, var_index,
                              sigma_a, sigma_b):
        for declared in ctor.args:
            if not isinstance(declared, Arrow):
                continue
            if e not in free_type_vars(declared.dom):
                continue
            if not (isinstance(declared.cod, Var)
                    and declared.cod.name in var_index):
                continue
            r = rels[var_index[declared.cod.name]]
            d = self._decompose_along(declared.dom, r)
            if d is not None and e in d:
                return d[e]
        return None

    def _decompose_along(self, pat: TypeExpr, r: Rel
                         ) -> Optional[dict[str, Rel]]:
        if isinstance(pat, Var):
            return {pat.name: r}
        if isinstance(pat, (Bool, Unit)):
            return {} if r == eq_rel(pat, self.env) else None
        if isinstance(pat, Prod):
            d = decompose_product(r)
            if d is None:
                return None
            left = self._decompose_along(pat.left, d[0])
            right = self._decompose_along(pat.right, d[1])
            if left is None or right is None:
                return None
            for k in left:
                if k in right and left[k] != right[k]:
                    return None
            return {**left, **right}
        return None

    def _is_leaf_pair(self, decl, declared: App, xi, yi) -> bool:
        if not (isinstance(xi, Con) and isinstance(yi, Con)):
            return False
        if xi.ctor != yi.ctor:
            return False
        sub = decl if declared.con == decl.name else self.env.decl(declared.con)
        return sub.ctor_info(xi.ctor).recursive_positions == ()


# --------------------------------------------------------------------------
# Ordering and antichain helpers
# --------------------------------------------------------------------------

def _ordered_combos(cand_lists: list[list[Rel]]):
    """Cartesian product of candidate lists, ascending by total pair count."""
    if not cand_lists:
        yield ()
        return
    combos = list(itertools.product(*cand_lists))
    combos.sort(key=lambda c: (sum(len(r.pairs) for r in c),
                               tuple(_rel_key(r) for r in c)))
    yield from combos


def _minimal_masks(masks):
    out = []
    uniq = sorted(set(masks), key=_mask_key)
    for m in uniq:
        if not any(w < m for w in uniq):
            out.append(m)
    return out


def _minimalize(vectors):
    uniq = sorted(set(vectors),
                  key=lambda v: (sum(len(m) for m in v),
                                 tuple(_mask_key(m) for m in v)))
    out = []
    for v in uniq:
        dominated = False
        for w in uniq:
            if w != v and all(a <= b for a, b in zip(w, v)):
                dominated = True
                break
        if not dominated:
            out.append(v)
    return tuple(out)


def _plain_pattern(ty: TypeExpr) -> bool:
    if isinstance(ty, (Var, Bool, Unit)):
        return True
    if isinstance(ty, Prod):
        return _plain_pattern(ty.left) and _plain_pattern(ty.right)
    return False


# --------------------------------------------------------------------------
# Module-level conveniences
# --------------------------------------------------------------------------

def lift_check(checked: CheckedDecl, mode: str, rels, x: Term, y: Term,
               env: Env) -> LiftResult:
    return Lifter(checked, mode, env).check(rels, x, y)


def lift_relation(checked: CheckedDecl, mode: str, rels, depth: int, env: Env,
                  exist_types: Optional[Sequence[TypeExpr]] = None) -> Rel:
    """Materialize the lifted relation over enumerated values at `depth`.

    Any inconclusive cell aborts the whole materialization (raising
    CapsExceeded) rather than being silently dropped.
    """
    from .kernel import enumerate_values  # local to avoid cycle at import
    rels = (rels,) if isinstance(rels, Rel) else tuple(rels)
    src_instance = tuple(r.src for r in rels)
    tgt_instance = tuple(r.tgt for r in rels)
    xs = enumerate_values(checked, src_instance, depth, env, exist_types)
    ys = enumerate_values(checked, tgt_instance, depth, env, exist_types)
    lifter = Lifter(checked, mode, env)
    pairs = []
    for x in xs:
        for y in ys:
            status = lifter.decide(rels, x, y)
            if status == INCONCLUSIVE:
                raise CapsExceeded(
                    "inconclusive lifting cell aborts materialization")
            if status == RELATED:
                pairs.append((x, y))
    return Rel(App(checked.name, src_instance),
               App(checked.name, tgt_instance), frozenset(pairs))


# --------------------------------------------------------------------------
# Independent replay of derivations
# --------------------------------------------------------------------------

def replay(derivation: Derivation, checked: CheckedDecl, mode: str,
           env: Env) -> None:
    """Re-validate every rule application and leaf fact in a derivation,
    independently of the search that produced it.  Raises ReplayError."""
    if mode == "completion":
        comp = complete(checked, env)
        struct = comp.completed
        struct_env = env.with_decl(struct)
        if derivation.source_lhs is not None:
            if embed(comp, derivation.source_lhs, env) != derivation.lhs:
                raise ReplayError("recorded source term does not embed to lhs")
        if derivation.source_rhs is not None:
            if embed(comp, derivation.source_rhs, env) != derivation.rhs:
                raise ReplayError("recorded source term does not embed to rhs")
    else:
        struct = checked
        struct_env = env
    _replay(derivation, struct, struct_env)


def _replay(node: Derivation, decl: CheckedDecl, env: Env) -> None:
    if node.decl_name != decl.name:
        raise ReplayError(f"derivation names declaration {node.decl_name}, "
                          f"expected {decl.name}")
    ctor = decl.ctor(node.ctor)
    if node.rule_name != rule_name_for(ctor.name):
        raise ReplayError(f"unexpected rule name {node.rule_name}")
    if not (isinstance(node.lhs, Con) and isinstance(node.rhs, Con)):
        raise ReplayError("derivation endpoints must be constructor terms")
    if node.lhs.ctor != ctor.name or node.rhs.ctor != ctor.name:
        raise ReplayError("head constructors do not match the rule")
    rho = dict(node.assignment)
    if list(rho) != list(ctor.quantified):
        raise ReplayError("assignment does not cover the quantified variables")
    sigma_a = dict(zip(ctor.quantified, node.lhs.type_args))
    sigma_b = dict(zip(ctor.quantified, node.rhs.type_args))
    for q in ctor.quantified:
        if rho[q].src != sigma_a[q] or rho[q].tgt != sigma_b[q]:
            raise ReplayError(f"chosen relation for {q} has wrong endpoints")
    if len(node.query) != len(ctor.ret_instance):
        raise ReplayError("query arity mismatch")
    for pat, r in zip(ctor.ret_instance, node.query):
        if pattern_rel(pat, rho, sigma_a, sigma_b, env) != r:
            raise ReplayError(
                "chosen relations do not reproduce the queried relation")
    if len(node.premises) != len(ctor.args):
        raise ReplayError("premise count does not match the constructor")
    for declared, xi, yi, prem in zip(ctor.args, node.lhs.args, node.rhs.args,
                                      node.premises):
        _replay_premise(declared, xi, yi, prem, rho, sigma_a, sigma_b,
                        decl, env)


def _replay_premise(declared, xi, yi, prem, rho, sigma_a, sigma_b, decl, env):
    if isinstance(declared, Var):
        if not isinstance(prem, VarFact) or prem.var != declared.name:
            raise ReplayError("malformed data premise")
        if prem.lhs != xi or prem.rhs != yi:
            raise ReplayError("data premise cites the wrong terms")
        if (xi, yi) not in rho[declared.name].pairs:
            raise ReplayError("data premise fact does not hold")
        return
    if isinstance(declared, (Bool, Unit)):
        if not isinstance(prem, BaseFact) or xi != yi:
            raise ReplayError("base premise fact does not hold")
        return
    if isinstance(declared, Prod):
        if not isinstance(prem, PairSplit):
            raise ReplayError("malformed product premise")
        _replay_premise(declared.left, xi.fst, yi.fst, prem.left,
                        rho, sigma_a, sigma_b, decl, env)
        _replay_premise(declared.right, xi.snd, yi.snd, prem.right,
                        rho, sigma_a, sigma_b, decl, env)
        return
    if isinstance(declared, Arrow):
        if not isinstance(prem, ArrowCond):
            raise ReplayError("malformed arrow premise")
        dom = pattern_rel(declared.dom, rho, sigma_a, sigma_b, env)
        cod = pattern_rel(declared.cod, rho, sigma_a, sigma_b, env)
        if prem.dom_rel != dom or prem.cod_rel != cod:
            raise ReplayError("arrow premise cites the wrong relations")
        if prem.lhs != xi or prem.rhs != yi:
            raise ReplayError("arrow premise cites the wrong tables")
        if not arrow_related(dom, cod, xi, yi):
            raise ReplayError("arrow premise condition does not hold")
        return
    if isinstance(declared, App):
        if not isinstance(prem, SubLift):
            raise ReplayError("malformed recursive premise")
        child = prem.derivation
        sub = decl if declared.con == decl.name else env.decl(declared.con)
        want = tuple(pattern_rel(p, rho, sigma_a, sigma_b, env)
                     for p in declared.args)
        if child.query != want:
            raise ReplayError("sub-derivation query mismatch")
        if child.lhs != xi or child.rhs != yi:
            raise ReplayError("sub-derivation endpoints mismatch")
        _replay(child, sub, env)
        return
    raise ReplayError(f"unsupported argument type {declared!r}")
