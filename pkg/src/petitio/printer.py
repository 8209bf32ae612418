"""Deterministic concrete-syntax printing; `parse(print(x))` round-trips."""
from __future__ import annotations

from .ast import (
    BOOL,
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Theory, PetitioError,
)

# precedence levels: iff < implies < or < and < not < atoms
_PREC_IFF = 1
_PREC_IMPLIES = 2
_PREC_OR = 3
_PREC_AND = 4
_PREC_NOT = 5
_PREC_ATOM = 6


def print_term(t) -> str:
    if isinstance(t, (Var, Const, ChoiceConst)):
        return t.name
    if isinstance(t, SkolemConst):
        return f"{t.base}!{t.index}"
    raise PetitioError(f"print_term: unhandled {type(t).__name__}")


def print_prop(p) -> str:
    if isinstance(p, (PropConst, PropVar)):
        return p.name
    if isinstance(p, PropSkolem):
        return f"{p.base}!{p.index}"
    raise PetitioError(f"print_prop: unhandled {type(p).__name__}")


def print_set(s) -> str:
    if isinstance(s, (SetVar, SetConst)):
        return s.name
    if isinstance(s, SetSkolem):
        return f"{s.base}!{s.index}"
    if isinstance(s, SetBuilder):
        return f"{{ {s.var}: ({s.cls}) | {print_formula(s.body)} }}"
    raise PetitioError(f"print_set: unhandled {type(s).__name__}")


def print_instance(x) -> str:
    """An instantiation argument of any category."""
    for fn in (print_term, print_prop, print_set):
        try:
            return fn(x)
        except PetitioError:
            continue
    raise PetitioError(f"print_instance: unhandled {type(x).__name__}")


def print_formula(f, infix=frozenset({">"})) -> str:
    return _pf(f, 0, infix)


def _paren(s, need):
    return f"({s})" if need else s


def _pf(f, ctx, infix):
    if isinstance(f, Truth):
        return "TRUE"
    if isinstance(f, Falsity):
        return "FALSE"
    if isinstance(f, Atom):
        if f.pred in infix and len(f.args) == 2:
            return f"{print_term(f.args[0])} {f.pred} {print_term(f.args[1])}"
        if not f.args:
            return f.pred
        return f"{f.pred}({', '.join(print_term(a) for a in f.args)})"
    if isinstance(f, PropApply):
        return f"{print_prop(f.prop)}({print_term(f.arg)})"
    if isinstance(f, SetApply):
        return f"{print_set(f.s)}({print_prop(f.prop)})"
    if isinstance(f, InClass):
        return f"member({print_prop(f.prop)}, {f.cls})"
    if isinstance(f, PropEq):
        return f"{print_prop(f.left)} = {print_prop(f.right)}"
    if isinstance(f, Eq):
        return f"{print_term(f.left)} = {print_term(f.right)}"
    if isinstance(f, Not):
        body = f.body
        if isinstance(body, (Eq, PropEq, Atom, PropApply, SetApply, InClass, DefRef,
                             Truth, Falsity)):
            return f"NOT {_pf(body, _PREC_NOT, infix)}"
        return f"NOT ({_pf(body, 0, infix)})"
    if isinstance(f, And):
        s = " AND ".join(_pf(a, _PREC_AND, infix) for a in f.args)
        return _paren(s, ctx >= _PREC_AND)
    if isinstance(f, Or):
        s = " OR ".join(_pf(a, _PREC_OR, infix) for a in f.args)
        return _paren(s, ctx >= _PREC_OR)
    if isinstance(f, Implies):
        left = _pf(f.left, _PREC_IMPLIES, infix)
        right = _pf(f.right, _PREC_IMPLIES - 1, infix)  # right-associative
        return _paren(f"{left} => {right}", ctx >= _PREC_IMPLIES)
    if isinstance(f, Iff):
        s = f"{_pf(f.left, _PREC_IFF, infix)} <=> {_pf(f.right, _PREC_IFF, infix)}"
        return _paren(s, ctx >= _PREC_IFF)
    if isinstance(f, (ForAll, Exists)):
        kw = "FORALL" if isinstance(f, ForAll) else "EXISTS"
        groups = _group_binders(f.vars)
        binder = ", ".join(f"({', '.join(ns)}: {sort})" for ns, sort in groups)
        s = f"{kw} {binder}: {_pf(f.body, 0, infix)}"
        return _paren(s, ctx > 0)
    if isinstance(f, (ForAllProp, ExistsProp)):
        kw = "FORALL" if isinstance(f, ForAllProp) else "EXISTS"
        s = f"{kw} ({f.var}: ({f.cls})): {_pf(f.body, 0, infix)}"
        return _paren(s, ctx > 0)
    if isinstance(f, (ForAllSet, ExistsSet)):
        kw = "FORALL" if isinstance(f, ForAllSet) else "EXISTS"
        s = f"{kw} ({f.var}: setof[({f.cls})]): {_pf(f.body, 0, infix)}"
        return _paren(s, ctx > 0)
    if isinstance(f, DefRef):
        if f.name in infix and len(f.args) == 2:
            return f"{print_term(f.args[0])} {f.name} {print_term(f.args[1])}"
        if not f.args:
            return f.name
        return f"{f.name}({', '.join(print_instance(a) for a in f.args)})"
    raise PetitioError(f"print_formula: unhandled {type(f).__name__}")


def _group_binders(vars_):
    """Consecutive binder vars of one sort share a group: (x, y: beings)."""
    groups = []
    for name, sort in vars_:
        if groups and groups[-1][1] == sort:
            groups[-1][0].append(name)
        else:
            groups.append(([name], sort))
    return [(tuple(ns), sort) for ns, sort in groups]


def print_theory(theory: Theory) -> str:
    lines = [f"{theory.name}: THEORY", "BEGIN"]
    annotations = []
    for s in theory.sorts:
        lines.append(f"  {s}: TYPE")
    if theory.vars:
        by_sort = {}
        for n, s in theory.vars.items():
            by_sort.setdefault(s, []).append(n)
        for s, ns in by_sort.items():
            lines.append(f"  {', '.join(ns)}: VAR {s}")
    for n, s in theory.consts.items():
        lines.append(f"  {n}: {s}")
    for n, sig in theory.preds.items():
        if len(sig) == 0:
            lines.append(f"  {n}: {BOOL}")
        elif n in theory.infix and len(sig) == 2:
            lines.append(f"  {n}: rel[{sig[0]}]")
        else:
            lines.append(f"  {n}: pred[{', '.join(sig)}]")
    for n, cls in theory.classes.items():
        lines.append(f"  {n}: propclass[{cls.elem_sort}]")
        for m in cls.members:
            annotations.append(f"%% class-member: {n} {m}")
        if cls.full:
            annotations.append(f"%% class-full: {n}")
    infix = theory.infix
    for n, d in theory.defs.items():
        if d.is_propset:
            lines.append(f"  {n}: propset[{d.body.cls}] = {print_set(d.body)}")
        else:
            params = ", ".join(
                f"{p.name}: " + (p.sort if p.kind == "obj"
                                 else f"({p.sort})" if p.kind == "prop"
                                 else f"setof[({p.sort})]")
                for p in d.params)
            lines.append(f"  {n}({params}): {BOOL} = {print_formula(d.body, infix)}")
        if d.opaque:
            annotations.append(f"%% opaque: {n}")
    for n, nf in theory.formulas.items():
        lines.append(f"  {n}: {nf.role.upper()} {print_formula(nf.body, infix)}")
    lines.append(f"END {theory.name}")
    for c, p in theory.descriptions.items():
        annotations.append(f"%% description: {c} {p}")
    for goal, verdict in theory.expects:
        annotations.append(f"%% expect: {goal} {verdict}")
    return "\n".join(lines + annotations) + "\n"


def print_sequent(sequent, infix=frozenset({">"})) -> str:
    """PVS-style display: numbered antecedents, a turnstile, numbered succedents."""
    out = []
    for i, a in enumerate(sequent.ants):
        out.append(f"[-{i + 1}]  {print_formula(a, infix)}")
    out.append("  |-------")
    for i, s in enumerate(sequent.succs):
        out.append(f"[{i + 1}]   {print_formula(s, infix)}")
    return "\n".join(out)
