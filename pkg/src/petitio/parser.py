"""Parser and resolver for the .thy theory language.

Grammar (informally; `%` starts a comment, `%%` an annotation line):

    theory  = ident ":" "THEORY" "BEGIN" {decl} "END" ident
    decl    = ident ":" "TYPE"
            | identlist ":" "VAR" sort
            | ident "(" params ")" ":" "bool" "=" formula
            | ident ":" ("AXIOM"|"THEOREM"|"LEMMA") formula
            | ident ":" "pred" "[" sort {"," sort} "]"
            | ">" ":" "rel" "[" sort "]"
            | ident ":" "propclass" "[" sort "]"
            | ident ":" "propset" "[" ident "]" "=" setterm
            | identlist ":" sort                    (object constants; bool = 0-ary atoms)

    formula = "FORALL" binders ":" formula | "EXISTS" binders ":" formula
            | "EXISTS" "!" binders ":" formula
            | formula ("=>"|"IMPLIES") formula | formula "<=>" formula
            | formula ("AND"|"&") formula | formula "OR" formula
            | "NOT" formula | "(" formula ")" | atom
    atom    = ident "(" args ")" | expr ">" expr | expr "=" expr | "TRUE" | "FALSE"
    setterm = "{" ident ":" "(" ident ")" "|" formula "}" | ident

Binders are either bare names previously declared with VAR, or annotated
groups: `(x, y: beings)`, `(F: (P))`, `(FF: setof[(P)])`.

Annotations: `%% opaque: Name`, `%% expect: goal verdict`,
`%% class-member: Class pred`, `%% class-full: Class`,
`%% description: const pred`.

Free occurrences of declared VARs in an AXIOM/THEOREM/LEMMA body are closed
universally, in first-occurrence order.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BOOL, TRUE, FALSE,
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Param, Definition, NamedFormula, PropClass, Theory,
    mk_and, mk_or, exists_unique,
    ParseError, ResolveError, UnknownName,
)

KEYWORDS = {
    "THEORY", "BEGIN", "END", "TYPE", "VAR", "AXIOM", "THEOREM", "LEMMA",
    "FORALL", "EXISTS", "NOT", "AND", "OR", "IMPLIES", "TRUE", "FALSE",
    "pred", "rel", "propclass", "propset", "setof", "member", "bool",
}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\??")
_SKID_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*\??)!(\d+)")
_SYMBOLS = ("<=>", "=>", "(", ")", "[", "]", "{", "}", ":", ",", "=", ">", "&", "|", "!")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "skid" | "sym" | "eof"
    value: str
    line: int
    col: int


def tokenize(text: str):
    """Return (tokens, annotations); annotations are the stripped `%%` lines."""
    tokens = []
    annotations = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("%%", i):
            j = text.find("\n", i)
            if j < 0:
                j = n
            annotations.append(text[i + 2:j].strip())
            i = j
            continue
        if c == "%":
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        m = _SKID_RE.match(text, i)
        if m:
            tokens.append(Token("skid", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens, annotations


# ---------------------------------------------------------------------------
# surface syntax (pre-resolution)


@dataclass(frozen=True)
class SName:
    name: str
    span: tuple = (0, 0)


@dataclass(frozen=True)
class SApp:
    name: str
    args: tuple
    span: tuple = (0, 0)


@dataclass(frozen=True)
class SCmp:
    op: str  # "=" or ">"
    left: object
    right: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class SNot:
    body: object


@dataclass(frozen=True)
class SBin:
    op: str  # "and" | "or" | "implies" | "iff"
    left: object
    right: object


@dataclass(frozen=True)
class SQuant:
    kind: str  # "forall" | "exists" | "exists1"
    groups: tuple  # of (names tuple, sortexpr); sortexpr: None | ("sort", s) | ("class", c) | ("setof", c)
    body: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class SBuilder:
    var: str
    cls: str
    body: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class SLit:
    value: bool


class _TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, value: str) -> bool:
        return self.peek().value == value and self.peek().kind in ("ident", "sym")

    def expect(self, value: str) -> Token:
        t = self.peek()
        if t.value != value:
            raise ParseError(
                f"expected {value!r}, found {t.value!r}", t.line, t.col, expected=(value,)
            )
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.value!r}", t.line, t.col,
                             expected=("identifier",))
        return self.next()


def _parse_formula_expr(ts: _TokenStream):
    return _parse_iff(ts)


def _parse_iff(ts):
    left = _parse_implies(ts)
    while ts.at("<=>"):
        ts.next()
        right = _parse_implies(ts)
        left = SBin("iff", left, right)
    return left


def _parse_implies(ts):
    left = _parse_or(ts)
    if ts.at("=>") or ts.at("IMPLIES"):
        ts.next()
        right = _parse_implies(ts)  # right-associative
        return SBin("implies", left, right)
    return left


def _parse_or(ts):
    left = _parse_and(ts)
    while ts.at("OR"):
        ts.next()
        left = SBin("or", left, _parse_and(ts))
    return left


def _parse_and(ts):
    left = _parse_not(ts)
    while ts.at("AND") or ts.at("&"):
        ts.next()
        left = SBin("and", left, _parse_not(ts))
    return left


def _parse_not(ts):
    if ts.at("NOT"):
        ts.next()
        return SNot(_parse_not(ts))
    if ts.at("FORALL") or ts.at("EXISTS"):
        return _parse_quant(ts)
    return _parse_cmp(ts)


def _parse_quant(ts):
    t = ts.next()
    kind = "forall" if t.value == "FORALL" else "exists"
    if kind == "exists" and ts.at("!"):
        ts.next()
        kind = "exists1"
    groups = [_parse_binder_group(ts)]
    while ts.at(","):
        ts.next()
        groups.append(_parse_binder_group(ts))
    ts.expect(":")
    body = _parse_formula_expr(ts)
    return SQuant(kind, tuple(groups), body, (t.line, t.col))


def _parse_binder_group(ts):
    """One binder group: `x` (declared VAR) or `(x, y: sortexpr)`."""
    if ts.at("("):
        ts.next()
        names = [ts.expect_ident().value]
        while ts.at(","):
            ts.next()
            names.append(ts.expect_ident().value)
        ts.expect(":")
        sortexpr = _parse_sortexpr(ts)
        ts.expect(")")
        return (tuple(names), sortexpr)
    t = ts.expect_ident()
    return ((t.value,), None)


def _parse_sortexpr(ts):
    if ts.at("("):
        ts.next()
        cls = ts.expect_ident().value
        ts.expect(")")
        return ("class", cls)
    if ts.at("setof"):
        ts.next()
        ts.expect("[")
        ts.expect("(")
        cls = ts.expect_ident().value
        ts.expect(")")
        ts.expect("]")
        return ("setof", cls)
    t = ts.expect_ident()
    return ("sort", t.value)


def _parse_cmp(ts):
    left = _parse_app(ts)
    if ts.at("=") or ts.at(">"):
        op = ts.next().value
        right = _parse_app(ts)
        return SCmp(op, left, right)
    return left


def _parse_app(ts):
    t = ts.peek()
    if t.value == "(":
        ts.next()
        inner = _parse_formula_expr(ts)
        ts.expect(")")
        # allow comparisons against a parenthesised operand, e.g. (x) = y
        if ts.at("=") or ts.at(">"):
            op = ts.next().value
            right = _parse_app(ts)
            return SCmp(op, inner, right)
        return inner
    if t.value == "{":
        return _parse_builder(ts)
    if t.value == "TRUE":
        ts.next()
        return SLit(True)
    if t.value == "FALSE":
        ts.next()
        return SLit(False)
    if t.kind == "skid":
        ts.next()
        return SName(t.value, (t.line, t.col))
    if t.kind != "ident":
        raise ParseError(f"expected a formula or term, found {t.value!r}", t.line, t.col)
    ts.next()
    name = t.value
    if ts.at("("):
        ts.next()
        args = []
        if not ts.at(")"):
            args.append(_parse_formula_expr(ts))
            while ts.at(","):
                ts.next()
                args.append(_parse_formula_expr(ts))
        ts.expect(")")
        return SApp(name, tuple(args), (t.line, t.col))
    return SName(name, (t.line, t.col))


def _parse_builder(ts):
    t = ts.expect("{")
    var = ts.expect_ident().value
    ts.expect(":")
    ts.expect("(")
    cls = ts.expect_ident().value
    ts.expect(")")
    ts.expect("|")
    body = _parse_formula_expr(ts)
    ts.expect("}")
    return SBuilder(var, cls, body, (t.line, t.col))


# ---------------------------------------------------------------------------
# theory declarations


def parse_theory(text: str) -> Theory:
    """Parse and resolve a complete theory; raises ParseError / ResolveError."""
    tokens, annotations = tokenize(text)
    ts = _TokenStream(tokens)
    name_tok = ts.expect_ident()
    ts.expect(":")
    ts.expect("THEORY")
    ts.expect("BEGIN")
    theory = Theory(name=name_tok.value)
    resolver = Resolver(theory)
    pending = []  # (kind, payload) declarations processed in order
    while not ts.at("END"):
        _parse_decl(ts, theory, resolver, pending)
    ts.expect("END")
    end_tok = ts.expect_ident()
    if end_tok.value != theory.name:
        raise ParseError(
            f"theory ends with {end_tok.value!r}, expected {theory.name!r}",
            end_tok.line, end_tok.col,
        )
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input after END: {t.value!r}", t.line, t.col)
    _apply_annotations(theory, annotations)
    return theory


def _parse_decl(ts, theory: Theory, resolver: "Resolver", pending):
    t = ts.peek()
    if t.kind == "sym" and t.value == ">":
        # infix relation or infix definition
        ts.next()
        if ts.at("("):
            _parse_definition(ts, theory, resolver, ">", t)
            theory.infix.add(">")
            return
        ts.expect(":")
        ts.expect("rel")
        ts.expect("[")
        sort = ts.expect_ident().value
        ts.expect("]")
        _check_sort(theory, sort, t)
        _declare(theory, ">", t)
        theory.preds[">"] = (sort, sort)
        theory.infix.add(">")
        return
    name_tok = ts.expect_ident()
    name = name_tok.value
    if ts.at("("):
        _parse_definition(ts, theory, resolver, name, name_tok)
        return
    names = [name]
    while ts.at(","):
        ts.next()
        names.append(ts.expect_ident().value)
    ts.expect(":")
    kw = ts.peek()
    if kw.value == "TYPE":
        ts.next()
        for n in names:
            _declare(theory, n, name_tok)
            theory.sorts.append(n)
        return
    if kw.value == "VAR":
        ts.next()
        sort_tok = ts.expect_ident()
        _check_sort(theory, sort_tok.value, sort_tok)
        for n in names:
            if n in theory.vars:
                raise ResolveError(f"variable {n!r} declared twice")
            theory.vars[n] = sort_tok.value
        return
    if kw.value in ("AXIOM", "THEOREM", "LEMMA"):
        ts.next()
        if len(names) != 1:
            raise ParseError("one name per AXIOM/THEOREM/LEMMA", kw.line, kw.col)
        surface = _parse_formula_expr(ts)
        body = resolver.resolve_closed(surface)
        role = {"AXIOM": "axiom", "THEOREM": "theorem", "LEMMA": "lemma"}[kw.value]
        _declare(theory, name, name_tok)
        theory.formulas[name] = NamedFormula(name, role, body,
                                             span=(name_tok.line, name_tok.col))
        return
    if kw.value == "pred":
        ts.next()
        ts.expect("[")
        sorts = [ts.expect_ident().value]
        while ts.at(","):
            ts.next()
            sorts.append(ts.expect_ident().value)
        ts.expect("]")
        for s in sorts:
            _check_sort(theory, s, kw)
        for n in names:
            _declare(theory, n, name_tok)
            theory.preds[n] = tuple(sorts)
        return
    if kw.value == "propclass":
        ts.next()
        ts.expect("[")
        sort = ts.expect_ident().value
        ts.expect("]")
        _check_sort(theory, sort, kw)
        for n in names:
            _declare(theory, n, name_tok)
            theory.classes[n] = PropClass(n, sort)
        return
    if kw.value == "propset":
        ts.next()
        ts.expect("[")
        cls = ts.expect_ident().value
        ts.expect("]")
        if cls not in theory.classes:
            raise ResolveError(f"unknown property class {cls!r}")
        ts.expect("=")
        surface = _parse_app(ts)
        if not isinstance(surface, SBuilder):
            raise ParseError("propset definition requires a { ... | ... } builder",
                             kw.line, kw.col)
        builder = resolver.resolve_builder(surface)
        if builder.cls != cls:
            raise ResolveError(f"propset {name!r} declared over {cls!r} but built over"
                               f" {builder.cls!r}")
        _declare(theory, name, name_tok)
        theory.defs[name] = Definition(name, (), builder,
                                       span=(name_tok.line, name_tok.col))
        return
    # constant declaration: identlist ":" sort  (bool => propositional atom)
    sort_tok = ts.expect_ident()
    if sort_tok.value == BOOL:
        for n in names:
            _declare(theory, n, name_tok)
            theory.preds[n] = ()
        return
    _check_sort(theory, sort_tok.value, sort_tok)
    for n in names:
        _declare(theory, n, name_tok)
        theory.consts[n] = sort_tok.value


def _parse_definition(ts, theory, resolver, name, name_tok):
    """`name(params): bool = formula` with params `x` (declared VAR) or `x: sortexpr`."""
    ts.expect("(")
    params = []
    while True:
        group = [ts.expect_ident().value]
        while ts.at(","):
            ts.next()
            nxt = ts.peek()
            group.append(ts.expect_ident().value)
        if ts.at(":"):
            ts.next()
            sortexpr = _parse_sortexpr(ts)
        else:
            sortexpr = None
        for pname in group:
            params.append(_mk_param(theory, pname, sortexpr))
        if ts.at(","):
            ts.next()
            continue
        break
    ts.expect(")")
    ts.expect(":")
    ts.expect(BOOL)
    ts.expect("=")
    surface = _parse_formula_expr(ts)
    body = resolver.resolve_def_body(surface, params)
    if name != ">":
        _declare(theory, name, name_tok)
    elif name in theory.defs or name in theory.preds:
        raise ResolveError("symbol '>' declared twice")
    theory.defs[name] = Definition(name, tuple(params), body,
                                   span=(name_tok.line, name_tok.col))


def _mk_param(theory, pname, sortexpr) -> Param:
    if sortexpr is None:
        if pname not in theory.vars:
            raise ResolveError(f"parameter {pname!r} has no sort (not a declared VAR)")
        return Param(pname, "obj", theory.vars[pname])
    tag, value = sortexpr
    if tag == "sort":
        _check_sort(theory, value, None)
        return Param(pname, "obj", value)
    if tag == "class":
        if value not in theory.classes:
            raise ResolveError(f"unknown property class {value!r}")
        return Param(pname, "prop", value)
    if value not in theory.classes:
        raise ResolveError(f"unknown property class {value!r}")
    return Param(pname, "propset", value)


def _declare(theory, name, tok):
    taken = (name in theory.consts or name in theory.preds or name in theory.defs
             or name in theory.formulas or name in theory.sorts or name in theory.classes)
    if taken:
        line = tok.line if tok else None
        raise ResolveError(f"name {name!r} declared twice" + (f" (line {line})" if line else ""))


def _check_sort(theory, sort, tok):
    if sort != BOOL and sort not in theory.sorts:
        raise ResolveError(f"unknown sort {sort!r}")


def _apply_annotations(theory: Theory, annotations):
    for ann in annotations:
        if not ann:
            continue
        key, _, rest = ann.partition(":")
        key = key.strip()
        parts = rest.split()
        if key == "opaque":
            for n in parts:
                d = theory.definition(n)
                theory.defs[n] = Definition(d.name, d.params, d.body, opaque=True, span=d.span)
        elif key == "expect":
            if len(parts) >= 2:
                theory.expects.append((parts[0], " ".join(parts[1:])))
        elif key == "class-member":
            cls_name, member = parts[0], parts[1]
            cls = theory.classes[cls_name]
            if member not in theory.preds or len(theory.preds[member]) != 1:
                raise ResolveError(f"class member {member!r} is not a declared unary predicate")
            theory.classes[cls_name] = PropClass(cls.name, cls.elem_sort,
                                                 cls.members + (member,), cls.full)
        elif key == "class-full":
            cls = theory.classes[parts[0]]
            theory.classes[parts[0]] = PropClass(cls.name, cls.elem_sort, cls.members, True)
        elif key == "description":
            cname, pname = parts[0], parts[1]
            if cname not in theory.consts:
                raise ResolveError(f"description constant {cname!r} is not declared")
            ok = (pname in theory.preds and len(theory.preds[pname]) == 1) or (
                pname in theory.defs and not theory.defs[pname].is_propset
                and len(theory.defs[pname].params) == 1)
            if not ok:
                raise ResolveError(f"description predicate {pname!r} must be unary")
            theory.descriptions[cname] = pname
        else:
            raise ParseError(f"unknown annotation {key!r}")


# ---------------------------------------------------------------------------
# resolution


class Resolver:
    """Turns surface syntax into the typed AST against a theory's symbol tables."""

    def __init__(self, theory: Theory, env=None):
        self.theory = theory
        self.env = dict(env or {})  # extra names: skolems, choice constants, ...

    # -- entry points

    def resolve_closed(self, surface):
        """Resolve a named-formula body; free declared VARs are closed universally."""
        free_order = []
        f = self._formula(surface, {}, free_order)
        if free_order:
            f = ForAll(tuple(free_order), f)
        return f

    def resolve_formula(self, surface):
        """Resolve a formula; free declared VARs are an error."""
        free_order = []
        f = self._formula(surface, {}, free_order)
        if free_order:
            names = ", ".join(n for n, _ in free_order)
            raise ResolveError(f"unbound variables: {names}")
        return f

    def resolve_def_body(self, surface, params):
        scope = {}
        for p in params:
            if p.kind == "obj":
                scope[p.name] = Var(p.name, p.sort)
            elif p.kind == "prop":
                scope[p.name] = PropVar(p.name, p.sort)
            else:
                scope[p.name] = SetVar(p.name, p.sort)
        free_order = []
        f = self._formula(surface, scope, free_order)
        if free_order:
            names = ", ".join(n for n, _ in free_order)
            raise ResolveError(f"definition body mentions non-parameter variables: {names}")
        return f

    def resolve_builder(self, surface: SBuilder) -> SetBuilder:
        if surface.cls not in self.theory.classes:
            raise ResolveError(f"unknown property class {surface.cls!r}")
        scope = {surface.var: PropVar(surface.var, surface.cls)}
        free_order = []
        body = self._formula(surface.body, scope, free_order)
        if free_order:
            raise ResolveError("set builder body has unbound object variables")
        return SetBuilder(surface.var, surface.cls, body)

    def resolve_instance(self, surface):
        """Resolve an instantiation argument: object term, property term, or set term."""
        x = self._expr(surface, {}, [])
        if isinstance(x, (Var, Const, SkolemConst, ChoiceConst, PropConst, PropVar,
                          PropSkolem, SetVar, SetSkolem, SetConst, SetBuilder)):
            return x
        raise ResolveError("expected a term, property, or property set")

    # -- dispatch

    def _formula(self, s, scope, free_order):
        f = self._expr(s, scope, free_order)
        if _is_term(f) or _is_prop(f) or _is_set(f):
            what = getattr(f, "name", type(f).__name__)
            raise ResolveError(f"{what!r} is not a formula")
        return f

    def _term(self, s, scope, free_order):
        t = self._expr(s, scope, free_order)
        if not _is_term(t):
            raise ResolveError(f"expected an object term, found {type(t).__name__}")
        return t

    def _expr(self, s, scope, free_order):
        theory = self.theory
        if isinstance(s, SLit):
            return TRUE if s.value else FALSE
        if isinstance(s, SNot):
            return Not(self._formula(s.body, scope, free_order))
        if isinstance(s, SBin):
            left = self._formula(s.left, scope, free_order)
            right = self._formula(s.right, scope, free_order)
            if s.op == "and":
                return mk_and([left, right])
            if s.op == "or":
                return mk_or([left, right])
            if s.op == "implies":
                return Implies(left, right)
            return Iff(left, right)
        if isinstance(s, SQuant):
            return self._quant(s, scope, free_order)
        if isinstance(s, SBuilder):
            inner = Resolver(theory, self.env)
            inner_scope = dict(scope)
            inner_scope[s.var] = PropVar(s.var, s.cls)
            if s.cls not in theory.classes:
                raise ResolveError(f"unknown property class {s.cls!r}")
            body = inner._formula(s.body, inner_scope, free_order)
            return SetBuilder(s.var, s.cls, body)
        if isinstance(s, SCmp):
            return self._cmp(s, scope, free_order)
        if isinstance(s, SName):
            return self._name(s, scope, free_order)
        if isinstance(s, SApp):
            return self._app(s, scope, free_order)
        raise ResolveError(f"cannot resolve {s!r}")

    def _quant(self, s: SQuant, scope, free_order):
        theory = self.theory
        groups = []
        for names, sortexpr in s.groups:
            if sortexpr is None:
                for n in names:
                    if n not in theory.vars:
                        raise ResolveError(f"binder {n!r} is not a declared VAR")
                groups.append(("obj", tuple((n, theory.vars[n]) for n in names)))
            else:
                tag, value = sortexpr
                if tag == "sort":
                    _check_sort(theory, value, None)
                    groups.append(("obj", tuple((n, value) for n in names)))
                elif tag == "class":
                    if value not in theory.classes:
                        raise ResolveError(f"unknown property class {value!r}")
                    groups.append(("prop", tuple((n, value) for n in names)))
                else:
                    if value not in theory.classes:
                        raise ResolveError(f"unknown property class {value!r}")
                    groups.append(("set", tuple((n, value) for n in names)))
        inner = dict(scope)
        for kind, pairs in groups:
            for n, sv in pairs:
                if kind == "obj":
                    inner[n] = Var(n, sv)
                elif kind == "prop":
                    inner[n] = PropVar(n, sv)
                else:
                    inner[n] = SetVar(n, sv)
        body = self._formula(s.body, inner, free_order)
        if s.kind == "exists1":
            if len(groups) != 1 or groups[0][0] != "obj" or len(groups[0][1]) != 1:
                raise ResolveError("EXISTS! takes exactly one object binder")
            (n, sort), = groups[0][1]
            from .transforms import subst_obj
            return exists_unique(n, sort, lambda t: subst_obj(body, {n: t}))
        for kind, pairs in reversed(groups):
            if kind == "obj":
                ctor = ForAll if s.kind == "forall" else Exists
                body = ctor(pairs, body)
            elif kind == "prop":
                ctor = ForAllProp if s.kind == "forall" else ExistsProp
                for n, cls in reversed(pairs):
                    body = ctor(n, cls, body)
            else:
                ctor = ForAllSet if s.kind == "forall" else ExistsSet
                for n, cls in reversed(pairs):
                    body = ctor(n, cls, body)
        return body

    def _cmp(self, s: SCmp, scope, free_order):
        left = self._expr(s.left, scope, free_order)
        right = self._expr(s.right, scope, free_order)
        if s.op == ">":
            if not (_is_term(left) and _is_term(right)):
                raise ResolveError("'>' relates object terms")
            theory = self.theory
            if ">" in theory.defs:
                d = theory.defs[">"]
                for p, a in zip(d.params, (left, right)):
                    if _term_sort(a) != p.sort:
                        raise ResolveError(f"'>' argument has sort {_term_sort(a)},"
                                           f" expected {p.sort}")
                return DefRef(">", (left, right))
            if ">" in theory.preds:
                sig = theory.preds[">"]
                for a, want in zip((left, right), sig):
                    if _term_sort(a) != want:
                        raise ResolveError(f"'>' argument has sort {_term_sort(a)},"
                                           f" expected {want}")
                return Atom(">", (left, right))
            raise UnknownName("relation '>' is not declared")
        # "="
        if _is_term(left) and _is_term(right):
            if _term_sort(left) != _term_sort(right):
                raise ResolveError(
                    f"equation between different sorts: {_term_sort(left)} = {_term_sort(right)}")
            return Eq(left, right)
        if _is_prop(left) and _is_prop(right):
            ls = self._prop_elem_sort(left)
            rs = self._prop_elem_sort(right)
            if ls != rs:
                raise ResolveError(f"property equation across element sorts {ls} / {rs}")
            return PropEq(left, right)
        if not (_is_term(left) or _is_prop(left) or _is_set(left)) and \
           not (_is_term(right) or _is_prop(right) or _is_set(right)):
            return Iff(left, right)
        raise ResolveError("'=' operands have incompatible categories")

    def _name(self, s: SName, scope, free_order):
        theory = self.theory
        n = s.name
        if n in scope:
            return scope[n]
        if n in self.env:
            return self.env[n]
        if "!" in n:
            raise ResolveError(f"unknown skolem constant {n!r}")
        if n in theory.consts:
            return Const(n, theory.consts[n])
        if n in theory.preds:
            sig = theory.preds[n]
            if len(sig) == 0:
                return Atom(n, ())
            if len(sig) == 1:
                return PropConst(n, sig[0])
            raise ResolveError(f"predicate {n!r} expects {len(sig)} arguments")
        if n in theory.defs:
            d = theory.defs[n]
            if d.is_propset:
                return SetConst(n, d.body.cls)
            if len(d.params) == 0:
                return DefRef(n, ())
            raise ResolveError(f"definition {n!r} expects {len(d.params)} arguments")
        if n in theory.formulas:
            return theory.formulas[n].body
        if n in theory.vars:
            v = Var(n, theory.vars[n])
            if all(existing != n for existing, _ in free_order):
                free_order.append((n, theory.vars[n]))
            return v
        raise UnknownName(f"unknown identifier {n!r} (line {s.span[0]})")

    def _app(self, s: SApp, scope, free_order):
        theory = self.theory
        n = s.name
        if n == "member":
            if len(s.args) != 2 or not isinstance(s.args[1], SName):
                raise ResolveError("member(prop, Class) takes a property and a class name")
            prop = self._expr(s.args[0], scope, free_order)
            if not _is_prop(prop):
                raise ResolveError("first argument of member must be a property")
            cls = s.args[1].name
            if cls not in theory.classes:
                raise ResolveError(f"unknown property class {cls!r}")
            if self._prop_elem_sort(prop) != theory.classes[cls].elem_sort:
                raise ResolveError(f"property/class element sort mismatch in member(..., {cls})")
            return InClass(cls, prop)
        if n in scope or n in self.env:
            head = scope.get(n) or self.env.get(n)
            if _is_prop(head):
                if len(s.args) != 1:
                    raise ResolveError(f"property {n!r} applies to one object term")
                return self._mk_prop_apply(head, self._term(s.args[0], scope, free_order))
            if _is_set(head):
                if len(s.args) != 1:
                    raise ResolveError(f"property set {n!r} applies to one property")
                arg = self._expr(s.args[0], scope, free_order)
                if not _is_prop(arg):
                    raise ResolveError(f"property set {n!r} applies to a property")
                return SetApply(head, arg)
            raise ResolveError(f"{n!r} cannot be applied")
        if n in theory.preds:
            sig = theory.preds[n]
            if len(sig) != len(s.args):
                raise ResolveError(
                    f"predicate {n!r} expects {len(sig)} arguments, got {len(s.args)}")
            args = tuple(self._term(a, scope, free_order) for a in s.args)
            for t, want in zip(args, sig):
                if _term_sort(t) != want:
                    raise ResolveError(f"argument of {n!r} has sort {_term_sort(t)},"
                                       f" expected {want}")
            return Atom(n, args)
        if n in theory.defs:
            d = theory.defs[n]
            if d.is_propset:
                if len(s.args) != 1:
                    raise ResolveError(f"property set {n!r} applies to one property")
                arg = self._expr(s.args[0], scope, free_order)
                if not _is_prop(arg):
                    raise ResolveError(f"property set {n!r} applies to a property")
                return SetApply(SetConst(n, d.body.cls), arg)
            if len(d.params) != len(s.args):
                raise ResolveError(
                    f"definition {n!r} expects {len(d.params)} arguments, got {len(s.args)}")
            args = []
            for p, a in zip(d.params, s.args):
                x = self._expr(a, scope, free_order)
                if p.kind == "obj":
                    if not _is_term(x) or _term_sort(x) != p.sort:
                        raise ResolveError(f"argument {p.name!r} of {n!r} must have sort {p.sort}")
                elif p.kind == "prop":
                    if not _is_prop(x):
                        raise ResolveError(f"argument {p.name!r} of {n!r} must be a property")
                else:
                    if not _is_set(x):
                        raise ResolveError(f"argument {p.name!r} of {n!r} must be a property set")
                args.append(x)
            return DefRef(n, tuple(args))
        raise UnknownName(f"unknown identifier {n!r} (line {s.span[0]})")

    def _mk_prop_apply(self, prop, arg):
        elem = self._prop_elem_sort(prop)
        if _term_sort(arg) != elem:
            raise ResolveError(f"property over {elem} applied to a {_term_sort(arg)} term")
        if isinstance(prop, PropConst):
            return Atom(prop.name, (arg,))
        return PropApply(prop, arg)

    def _prop_elem_sort(self, prop):
        if isinstance(prop, PropConst):
            return prop.sort
        return self.theory.classes[prop.cls].elem_sort


def _is_term(x):
    return isinstance(x, (Var, Const, SkolemConst, ChoiceConst))


def _is_prop(x):
    return isinstance(x, (PropConst, PropVar, PropSkolem))


def _is_set(x):
    return isinstance(x, (SetVar, SetSkolem, SetConst, SetBuilder))


def _term_sort(t):
    return t.sort


def parse_formula(text: str, theory: Theory, env=None):
    """Parse a standalone formula in a theory's namespace (no free declared VARs)."""
    tokens, _ = tokenize(text)
    ts = _TokenStream(tokens)
    surface = _parse_formula_expr(ts)
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input after formula: {t.value!r}", t.line, t.col)
    return Resolver(theory, env).resolve_formula(surface)


def parse_closed_formula(text: str, theory: Theory, env=None):
    """Like parse_formula, but free declared VARs are universally closed."""
    tokens, _ = tokenize(text)
    ts = _TokenStream(tokens)
    surface = _parse_formula_expr(ts)
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input after formula: {t.value!r}", t.line, t.col)
    return Resolver(theory, env).resolve_closed(surface)


def parse_instance(text: str, theory: Theory, env=None):
    """Parse an instantiation argument: term, property term, or { ... } set builder."""
    tokens, _ = tokenize(text)
    ts = _TokenStream(tokens)
    surface = _parse_app(ts)
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input after term: {t.value!r}", t.line, t.col)
    return Resolver(theory, env).resolve_instance(surface)
