"""Surface syntax: parsing and pretty-printing.

The concrete syntax covers data declarations, terms, relation literals and
function tables.  Unicode forall/arrow/times are accepted alongside the
ASCII spellings `forall`, `->`, `*`.  Line comments start with `--`.

Parsing and printing round-trip: `parse(print(x)) == x` for every AST this
library produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .kernel import (
    App, Arrow, BOOL, BoolLit, Bool, CheckedDecl, Con, CtorSig, DataDecl,
    Diagnostic, Env, FinFun, GadtError, Pair, Prod, Term, TypeCheckError,
    TypeExpr, UNIT, Unit, UnitLit, Var, carrier, check_program, make_finfun,
    term_key, type_of,
)
from .relations import Rel, eq_rel, full_rel


class ParseError(GadtError):
    def __init__(self, message: str, line: int, col: int):
        self.diagnostic = Diagnostic(message, line, col)
        super().__init__(self.diagnostic.render())


# --------------------------------------------------------------------------
# Tokens
# --------------------------------------------------------------------------

KEYWORDS = {"data", "where", "rel", "fun", "term", "all", "except",
            "none", "eq", "true", "false", "unit"}

TERM_CLASSES = (BoolLit, UnitLit, Pair, FinFun, Con)

_SIMPLE = {"(": "LPAREN", ")": "RPAREN", "{": "LBRACE", "}": "RBRACE",
           "[": "LBRACK", "]": "RBRACK", ",": "COMMA", ":": "COLON",
           "×": "TIMES", "→": "ARROW", "∀": "FORALL"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)

    def error(msg: str):
        raise ParseError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("=>", i):
            toks.append(Token("DARROW", "=>", line, col))
            i += 2
            col += 2
            continue
        if text.startswith("->", i):
            toks.append(Token("ARROW", "->", line, col))
            i += 2
            col += 2
            continue
        if c == "=":
            toks.append(Token("EQUALS", "=", line, col))
            i += 1
            col += 1
            continue
        if c == "*":
            toks.append(Token("TIMES", "*", line, col))
            i += 1
            col += 1
            continue
        if c in _SIMPLE:
            toks.append(Token(_SIMPLE[c], c, line, col))
            i += 1
            col += 1
            continue
        if c.isalpha() or c == "_":
            start = i
            startcol = col
            while i < n and (text[i].isalnum() or text[i] in "_'"):
                i += 1
                col += 1
            word = text[start:i]
            if word == "forall":
                toks.append(Token("FORALL", word, line, startcol))
            elif word in KEYWORDS:
                toks.append(Token(word.upper(), word, line, startcol))
            else:
                toks.append(Token("NAME", word, line, startcol))
            continue
        error(f"unexpected character {c!r}")
    toks.append(Token("EOF", "", line, col))
    return toks


# --------------------------------------------------------------------------
# Pattern terms for function-table rows
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PLit:
    term: Term


@dataclass(frozen=True)
class PPair:
    fst: "PTerm"
    snd: "PTerm"


@dataclass(frozen=True)
class PCon:
    ctor: str
    type_args: tuple[TypeExpr, ...]
    args: tuple["PTerm", ...]


PTerm = object  # PVar | PLit | PPair | PCon


def _match_pattern(pat, value: Term, binding: dict[str, Term]) -> bool:
    if isinstance(pat, PVar):
        if pat.name in binding and binding[pat.name] != value:
            return False
        binding[pat.name] = value
        return True
    if isinstance(pat, PLit):
        return pat.term == value
    if isinstance(pat, PPair):
        return (isinstance(value, Pair)
                and _match_pattern(pat.fst, value.fst, binding)
                and _match_pattern(pat.snd, value.snd, binding))
    return False


def _eval_pattern(pat, binding: dict[str, Term], where: Token) -> Term:
    if isinstance(pat, PVar):
        if pat.name not in binding:
            raise ParseError(f"unbound variable {pat.name} in table row",
                             where.line, where.col)
        return binding[pat.name]
    if isinstance(pat, PLit):
        return pat.term
    if isinstance(pat, PPair):
        return Pair(_eval_pattern(pat.fst, binding, where),
                    _eval_pattern(pat.snd, binding, where))
    if isinstance(pat, PCon):
        return Con(pat.ctor, pat.type_args,
                   tuple(_eval_pattern(a, binding, where) for a in pat.args))
    raise ParseError("malformed table row", where.line, where.col)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

@dataclass
class SourceFile:
    path: str
    text: str
    decls: list[DataDecl] = field(default_factory=list)
    terms: dict[str, Term] = field(default_factory=dict)
    rels: dict[str, Rel] = field(default_factory=dict)
    funs: dict[str, FinFun] = field(default_factory=dict)


class _Parser:
    def __init__(self, tokens: list[Token], decl_names: set[str]):
        self.toks = tokens
        self.pos = 0
        self.decl_names = set(decl_names)

    # -- plumbing ----------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str = "") -> Token:
        t = self.peek()
        if t.kind != kind:
            shown = t.value or "end of input"
            raise ParseError(f"expected {what or kind}, found {shown!r}",
                             t.line, t.col)
        return self.next()

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- types ---------------------------------------------------------------

    def type_expr(self) -> TypeExpr:
        left = self.type_product()
        if self.peek().kind == "ARROW":
            self.next()
            return Arrow(left, self.type_expr())
        return left

    def type_product(self) -> TypeExpr:
        left = self.type_app()
        if self.peek().kind == "TIMES":
            self.next()
            right = self.type_app()
            if self.peek().kind == "TIMES":
                self.error("nested products must be parenthesized")
            return Prod(left, right)
        return left

    def type_app(self) -> TypeExpr:
        t = self.peek()
        if t.kind == "NAME" and t.value in self.decl_names:
            self.next()
            args = []
            while self._starts_type_atom():
                args.append(self.type_atom())
            if not args:
                self.error(f"type constructor {t.value} must be applied")
            return App(t.value, tuple(args))
        return self.type_atom()

    def _starts_type_atom(self) -> bool:
        t = self.peek()
        if t.kind == "LPAREN":
            return True
        if t.kind == "NAME":
            # A name followed by ':' opens the next constructor signature.
            return self.peek(1).kind != "COLON"
        return False

    def type_atom(self) -> TypeExpr:
        t = self.peek()
        if t.kind == "LPAREN":
            self.next()
            inner = self.type_expr()
            self.expect("RPAREN", "')'")
            return inner
        if t.kind == "NAME":
            self.next()
            if t.value == "Bool":
                return BOOL
            if t.value == "Unit":
                return UNIT
            if t.value in self.decl_names:
                self.error(f"type constructor {t.value} must be applied")
            return Var(t.value)
        self.error("expected a type")

    # -- declarations ----------------------------------------------------------

    def decl(self) -> DataDecl:
        self.expect("DATA", "'data'")
        name = self.expect("NAME", "declaration name").value
        self.expect("COLON", "':'")
        arity = 0
        self._expect_set()
        while self.peek().kind == "ARROW":
            self.next()
            self._expect_set()
            arity += 1
        self.expect("WHERE", "'where'")
        ctors = []
        while self.peek().kind == "NAME" and self.peek(1).kind == "COLON":
            ctors.append(self.ctor(name))
        if not ctors:
            self.error("declaration needs at least one constructor")
        return DataDecl(name, arity, tuple(ctors))

    def _expect_set(self):
        t = self.peek()
        if t.kind == "NAME" and t.value == "Set":
            self.next()
            return
        self.error("expected 'Set'")

    def ctor(self, decl_name: str) -> CtorSig:
        name = self.expect("NAME", "constructor name").value
        self.expect("COLON", "':'")
        self.expect("FORALL", "'forall'")
        self.expect("LBRACE", "'{'")
        qs = []
        while self.peek().kind == "NAME":
            qs.append(self.next().value)
            if self.peek().kind == "COMMA":
                self.next()
        self.expect("RBRACE", "'}'")
        self.expect("ARROW", "'->'")
        full = self.type_expr()
        parts = []
        while isinstance(full, Arrow):
            parts.append(full.dom)
            full = full.cod
        ret = full
        if not (isinstance(ret, App) and ret.con == decl_name):
            self.error(f"constructor {name} must return an instance of {decl_name}")
        return CtorSig(name, tuple(qs), tuple(parts), ret.args)

    # -- terms ---------------------------------------------------------------

    def term(self, env: Optional[Env], pattern: bool = False):
        t = self.peek()
        if t.kind == "NAME" and t.value not in self.decl_names:
            nxt = self.peek(1)
            if nxt.kind == "LBRACK":
                return self.con_term(env, pattern)
            if pattern:
                self.next()
                return PVar(t.value)
            self.error(f"unknown constructor or unbound name {t.value} "
                       f"(constructors take explicit type arguments)")
        if t.kind == "NAME" and self.peek(1).kind == "LBRACK":
            return self.con_term(env, pattern)
        return self.term_atom(env, pattern)

    def con_term(self, env: Optional[Env], pattern: bool):
        name = self.expect("NAME").value
        self.expect("LBRACK", "'['")
        tys = [self.type_expr()]
        while self.peek().kind == "COMMA":
            self.next()
            tys.append(self.type_expr())
        self.expect("RBRACK", "']'")
        args = []
        while self._starts_term_atom():
            args.append(self.term_atom(env, pattern))
        if pattern:
            return PCon(name, tuple(tys), tuple(args))
        return Con(name, tuple(tys), tuple(args))

    def _starts_term_atom(self) -> bool:
        return self.peek().kind in ("LPAREN", "TRUE", "FALSE", "UNIT", "FUN",
                                    "NAME")

    def term_atom(self, env: Optional[Env], pattern: bool = False):
        t = self.peek()
        if t.kind == "TRUE":
            self.next()
            lit = BoolLit(True)
            return PLit(lit) if pattern else lit
        if t.kind == "FALSE":
            self.next()
            lit = BoolLit(False)
            return PLit(lit) if pattern else lit
        if t.kind == "UNIT":
            self.next()
            lit = UnitLit()
            return PLit(lit) if pattern else lit
        if t.kind == "FUN":
            if pattern:
                self.error("function tables cannot appear in table rows")
            return self.fun_literal(env)
        if t.kind == "LPAREN":
            self.next()
            first = self.term(env, pattern)
            if self.peek().kind == "COMMA":
                self.next()
                second = self.term(env, pattern)
                self.expect("RPAREN", "')'")
                if pattern:
                    return PPair(first, second)
                return Pair(first, second)
            self.expect("RPAREN", "')'")
            return first
        if t.kind == "NAME":
            if self.peek(1).kind == "LBRACK":
                return self.con_term(env, pattern)
            if pattern and t.value not in self.decl_names:
                self.next()
                return PVar(t.value)
            self.error(f"unknown constructor or unbound name {t.value} "
                       f"(constructors take explicit type arguments)")
        self.error("expected a term")

    # -- relation and function literals ----------------------------------------

    def rel_literal(self, env: Env) -> Rel:
        self.expect("REL", "'rel'")
        src = self.type_atom_or_app()
        tgt = self.type_atom_or_app()
        self.expect("LBRACE", "'{'")
        t = self.peek()
        if t.kind == "ALL":
            self.next()
            base = full_rel(src, tgt, env)
            if self.peek().kind == "EXCEPT":
                self.next()
                removed = self.pair_entries(env, allow_braces=True)
                pairs = base.pairs - frozenset(removed)
                out = Rel(src, tgt, pairs)
            else:
                out = base
        elif t.kind == "NONE":
            self.next()
            out = Rel(src, tgt, frozenset())
        elif t.kind == "EQ":
            self.next()
            if src != tgt:
                self.error("'eq' requires identical source and target types")
            out = eq_rel(src, env)
        elif t.kind == "RBRACE":
            out = Rel(src, tgt, frozenset())
        else:
            out = Rel(src, tgt, frozenset(self.pair_entries(env)))
        self.expect("RBRACE", "'}'")
        return out

    def type_atom_or_app(self) -> TypeExpr:
        # A relation or table header type: an atom, or a bare application.
        if self.peek().kind == "NAME" and self.peek().value in self.decl_names:
            return self.type_app()
        return self.type_atom()

    def pair_entries(self, env: Env, allow_braces: bool = False):
        braced = False
        if allow_braces and self.peek().kind == "LBRACE":
            self.next()
            braced = True
        entries = [self.pair_entry(env)]
        while self.peek().kind == "COMMA":
            self.next()
            entries.append(self.pair_entry(env))
        if braced:
            self.expect("RBRACE", "'}'")
        return entries

    def pair_entry(self, env: Env) -> tuple[Term, Term]:
        where = self.peek()
        t = self.term(env)
        if not isinstance(t, Pair):
            raise ParseError("relation entries are pairs (lhs, rhs)",
                             where.line, where.col)
        return (t.fst, t.snd)

    def fun_literal(self, env: Optional[Env]) -> FinFun:
        start = self.expect("FUN", "'fun'")
        if env is None:
            self.error("function tables need declarations in scope")
        dom = self.type_atom_or_app()
        self.expect("ARROW", "'->'")
        cod = self.type_atom_or_app()
        self.expect("LBRACE", "'{'")
        rows = []
        if self.peek().kind != "RBRACE":
            rows.append(self.fun_row(env))
            while self.peek().kind == "COMMA":
                self.next()
                rows.append(self.fun_row(env))
        self.expect("RBRACE", "'}'")
        mapping: dict[Term, Term] = {}
        for element in carrier(dom, env):
            for pat, rhs, tok in rows:
                binding: dict[str, Term] = {}
                if _match_pattern(pat, element, binding):
                    mapping[element] = _eval_pattern(rhs, binding, tok)
                    break
            else:
                raise ParseError(
                    f"table does not cover every element of the domain",
                    start.line, start.col)
        try:
            return make_finfun(dom, cod, mapping, env)
        except (TypeCheckError, GadtError) as exc:
            raise ParseError(str(exc), start.line, start.col)

    def fun_row(self, env: Env):
        tok = self.peek()
        pat = self.term(env, pattern=True)
        if isinstance(pat, TERM_CLASSES):
            pat = PLit(pat)
        self.expect("DARROW", "'=>'")
        rhs = self.term(env, pattern=True)
        if isinstance(rhs, TERM_CLASSES):
            rhs = PLit(rhs)
        return (pat, rhs, tok)


# --------------------------------------------------------------------------
# Entry points
# --------------------------------------------------------------------------

def _prescan_decl_names(tokens: list[Token]) -> set[str]:
    names = set()
    for i, t in enumerate(tokens[:-1]):
        if t.kind == "DATA" and tokens[i + 1].kind == "NAME":
            names.add(tokens[i + 1].value)
    return names


def parse_decls(text: str, env: Optional[Env] = None) -> list[DataDecl]:
    """Parse the declarations of a source text (syntax only)."""
    tokens = tokenize(text)
    known = set(env.decls) if env is not None else set()
    p = _Parser(tokens, known | _prescan_decl_names(tokens))
    out = []
    while p.peek().kind == "DATA":
        out.append(p.decl())
    if p.peek().kind != "EOF":
        p.error("expected a declaration")
    return out


def parse_source(text: str, env: Env, path: str = "<string>"
                 ) -> tuple[SourceFile, Env]:
    """Parse a full source file: declarations (kind-checked in order) plus
    named terms, relations and function tables."""
    tokens = tokenize(text)
    p = _Parser(tokens, set(env.decls) | _prescan_decl_names(tokens))
    src = SourceFile(path, text)
    while p.peek().kind != "EOF":
        t = p.peek()
        if t.kind == "DATA":
            d = p.decl()
            src.decls.append(d)
            env = check_program([d], env)
            continue
        if t.kind in ("TERM", "REL", "FUN") and p.peek(1).kind == "NAME" \
                and p.peek(2).kind == "EQUALS":
            kind = p.next().kind
            name = p.next().value
            p.next()  # '='
            if kind == "TERM":
                term = p.term(env)
                type_of(term, env)
                src.terms[name] = term
            elif kind == "REL":
                r = p.rel_literal(env)
                r.validate(env)
                src.rels[name] = r
            else:
                src.funs[name] = p.fun_literal(env)
            continue
        if t.kind == "REL":
            p.error("relation literals in files must be named: rel NAME = ...")
        p.error(f"expected a declaration or named item")
    return src, env


def parse_type(text: str, env: Env) -> TypeExpr:
    p = _Parser(tokenize(text), set(env.decls))
    ty = p.type_expr()
    p.expect("EOF", "end of input")
    return ty


def parse_term(text: str, env: Env) -> Term:
    p = _Parser(tokenize(text), set(env.decls))
    t = p.term(env)
    p.expect("EOF", "end of input")
    type_of(t, env)
    return t


def parse_rel(text: str, env: Env) -> Rel:
    p = _Parser(tokenize(text), set(env.decls))
    r = p.rel_literal(env)
    p.expect("EOF", "end of input")
    r.validate(env)
    return r


def parse_fun(text: str, env: Env) -> FinFun:
    p = _Parser(tokenize(text), set(env.decls))
    f = p.fun_literal(env)
    p.expect("EOF", "end of input")
    type_of(f, env)
    return f


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

def print_type(ty: TypeExpr) -> str:
    if isinstance(ty, Var):
        return ty.name
    if isinstance(ty, Bool):
        return "Bool"
    if isinstance(ty, Unit):
        return "Unit"
    if isinstance(ty, Prod):
        return f"{_print_factor(ty.left)} × {_print_factor(ty.right)}"
    if isinstance(ty, Arrow):
        dom = print_type(ty.dom)
        if isinstance(ty.dom, Arrow):
            dom = f"({dom})"
        return f"{dom} → {print_type(ty.cod)}"
    return " ".join([ty.con] + [_print_type_atom(a) for a in ty.args])


def _print_factor(ty: TypeExpr) -> str:
    if isinstance(ty, (Prod, Arrow, App)):
        return f"({print_type(ty)})"
    return print_type(ty)


def _print_type_atom(ty: TypeExpr) -> str:
    if isinstance(ty, (Prod, Arrow, App)):
        return f"({print_type(ty)})"
    return print_type(ty)


def print_term(t: Term) -> str:
    if isinstance(t, BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, UnitLit):
        return "unit"
    if isinstance(t, Pair):
        return f"({print_term(t.fst)}, {print_term(t.snd)})"
    if isinstance(t, FinFun):
        rows = ", ".join(f"{print_term(k)} => {print_term(v)}"
                         for k, v in t.table)
        return (f"fun {_print_type_atom(t.dom)} -> {_print_type_atom(t.cod)} "
                f"{{ {rows} }}")
    tys = ", ".join(print_type(a) for a in t.type_args)
    parts = [f"{t.ctor} [{tys}]"]
    for a in t.args:
        s = print_term(a)
        if isinstance(a, Con) and a.args:
            s = f"({s})"
        elif isinstance(a, FinFun):
            s = f"({s})"
        parts.append(s)
    return " ".join(parts)


def print_rel(r: Rel) -> str:
    entries = ", ".join(f"({print_term(a)}, {print_term(b)})"
                        for a, b in r.sorted_pairs())
    src = _print_type_atom(r.src)
    tgt = _print_type_atom(r.tgt)
    if not entries:
        return f"rel {src} {tgt} {{ }}"
    return f"rel {src} {tgt} {{ {entries} }}"


def print_decl(d: DataDecl) -> str:
    kind = " → ".join(["Set"] * (d.arity + 1))
    lines = [f"data {d.name} : {kind} where"]
    for c in d.ctors:
        qs = " ".join(c.quantified)
        parts = [_print_sig_part(a) for a in c.args]
        ret = " ".join([d.name] + [_print_type_atom(t) for t in c.ret_instance])
        sig = " → ".join(parts + [ret])
        lines.append(f"  {c.name} : ∀ {{{qs}}} → {sig}")
    return "\n".join(lines)


def _print_sig_part(ty: TypeExpr) -> str:
    if isinstance(ty, Arrow):
        return f"({print_type(ty)})"
    return print_type(ty)


def print_item(item) -> str:
    """Deterministic layout for any printable surface item."""
    if isinstance(item, DataDecl):
        return print_decl(item)
    if isinstance(item, CheckedDecl):
        return print_decl(item.decl)
    if isinstance(item, Rel):
        return print_rel(item)
    if isinstance(item, (BoolLit, UnitLit, Pair, FinFun, Con)):
        return print_term(item)
    if isinstance(item, (Var, Bool, Unit, Prod, Arrow, App)):
        return print_type(item)
    raise TypeError(f"cannot print {item!r}")
