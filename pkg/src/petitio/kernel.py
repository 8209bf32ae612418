"""Trusted sequent-calculus core.

A derivation is a tree of sequents; every non-leaf node records the rule and
arguments that produced its children, and `check_derivation` re-applies each
rule and compares the results, so anything the search layers emit is
re-checkable by this small kernel.

Rule catalogue (two-sided classical sequent calculus, ground instantiation):

    close                 leaf; some antecedent matches a succedent modulo the
                          ground equalities among the antecedents (also TRUE on
                          the right, FALSE on the left, reflexivity on the right)
    not_l/not_r i         move a negation across the turnstile
    and_l/or_r i          flatten into the same side
    and_r/or_l/imp_l i    branch
    imp_r/iff_l/iff_r i   standard
    forall_l/exists_r     (i, instances, keep) ground instantiation
    forallp_l/existsp_r   (i, prop, keep) property instantiation, class-guarded
    foralls_l/existss_r   (i, setterm, keep) property-set instantiation
    exists_l/forall_r     (i, skolems) fresh skolem constants
    existsp_l/forallp_r   (i, skolem)
    existss_l/foralls_r   (i, skolem)
    expand name           expand a transparent definition everywhere
    axiom/lemma name      install a named formula on the left
    choice                (name, var, sort, formula) constant + existence branch
    describe              (name, pred) constant + exists-unique branch
    generalize            replace the leaf by its skolem-generalized formula
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    TRUE, FALSE,
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Theory, mk_and, mk_or, mk_not, exists_unique,
    PetitioError, NameClash, UnknownName,
)
from .transforms import (
    substitute, subst_obj, subst_prop, subst_set, mk_prop_apply,
    expand_definition, alpha_equal, canon_key, collect_skolems, collect_prop_skolems,
    free_names, fresh_name, TERM_TYPES, PROP_TYPES, SET_TYPES,
)


class RuleError(PetitioError):
    pass


class CommandFailed(PetitioError):
    def __init__(self, command, reason):
        super().__init__(f"{command}: {reason}")
        self.command = command
        self.reason = reason


class IllFormedDerivation(PetitioError):
    pass


@dataclass(frozen=True)
class Sequent:
    ants: tuple = ()
    succs: tuple = ()

    def with_ants(self, *fs):
        return Sequent(self.ants + tuple(fs), self.succs)

    def with_succs(self, *fs):
        return Sequent(self.ants, self.succs + tuple(fs))

    def formula_at(self, idx: int):
        """PVS convention: -1.. index antecedents, 1.. index succedents."""
        if idx < 0:
            pos = -idx - 1
            if pos >= len(self.ants):
                raise RuleError(f"no antecedent at position {idx}")
            return ("a", pos, self.ants[pos])
        if idx > 0:
            pos = idx - 1
            if pos >= len(self.succs):
                raise RuleError(f"no succedent at position {idx}")
            return ("s", pos, self.succs[pos])
        raise RuleError("formula index 0 is not valid")


@dataclass(frozen=True)
class RuleContext:
    theory: Theory
    premises: frozenset  # names installable by the `axiom` rule
    opaque: frozenset = frozenset()  # definitions the `expand` rule must not open


# ---------------------------------------------------------------------------
# closure


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        if p != x:
            p = self.find(p)
            self.parent[x] = p
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic representative: smaller canonical key wins
            if _term_key(ra) <= _term_key(rb):
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _term_key(t):
    if isinstance(t, Const):
        return (0, t.name, 0)
    if isinstance(t, SkolemConst):
        return (1, t.base, t.index)
    if isinstance(t, ChoiceConst):
        return (2, t.name, 0)
    if isinstance(t, PropConst):
        return (0, t.name, 0)
    if isinstance(t, PropSkolem):
        return (1, t.base, t.index)
    if isinstance(t, PropVar):
        return (3, t.name, 0)
    return (9, str(t), 0)


def _ground(t):
    return isinstance(t, (Const, SkolemConst, ChoiceConst))


def _sequent_eqs(seq: Sequent):
    obj = _UnionFind()
    prop = _UnionFind()
    for a in seq.ants:
        if isinstance(a, Eq) and _ground(a.left) and _ground(a.right):
            obj.union(a.left, a.right)
        elif isinstance(a, PropEq) and not isinstance(a.left, PropVar) \
                and not isinstance(a.right, PropVar):
            prop.union(a.left, a.right)
    return obj, prop


def _normalize(f, obj: _UnionFind, prop: _UnionFind):
    def rec(x):
        if isinstance(x, (Const, SkolemConst, ChoiceConst)):
            return obj.find(x)
        if isinstance(x, Var):
            return x
        if isinstance(x, (PropConst, PropSkolem)):
            return prop.find(x)
        if isinstance(x, PropVar):
            return x
        if isinstance(x, (SetVar, SetSkolem, SetConst)):
            return x
        if isinstance(x, SetBuilder):
            return SetBuilder(x.var, x.cls, rec(x.body))
        if isinstance(x, (Truth, Falsity)):
            return x
        if isinstance(x, Atom):
            return Atom(x.pred, tuple(rec(a) for a in x.args))
        if isinstance(x, PropApply):
            return mk_prop_apply(rec(x.prop), rec(x.arg))
        if isinstance(x, SetApply):
            return SetApply(rec(x.s), rec(x.prop))
        if isinstance(x, InClass):
            return InClass(x.cls, rec(x.prop))
        if isinstance(x, PropEq):
            return PropEq(rec(x.left), rec(x.right))
        if isinstance(x, Eq):
            return Eq(rec(x.left), rec(x.right))
        if isinstance(x, Not):
            return Not(rec(x.body))
        if isinstance(x, And):
            return And(tuple(rec(a) for a in x.args))
        if isinstance(x, Or):
            return Or(tuple(rec(a) for a in x.args))
        if isinstance(x, Implies):
            return Implies(rec(x.left), rec(x.right))
        if isinstance(x, Iff):
            return Iff(rec(x.left), rec(x.right))
        if isinstance(x, (ForAll, Exists)):
            return type(x)(x.vars, rec(x.body))
        if isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(x)(x.var, x.cls, rec(x.body))
        if isinstance(x, DefRef):
            return DefRef(x.name, tuple(rec(a) for a in x.args))
        raise PetitioError(f"normalize: unhandled {type(x).__name__}")
    return rec(f)


_closure_key_cache = {}


def closure_evidence(seq: Sequent):
    """Reason the sequent is closed, or None.  Equality reasoning is ground
    congruence over the antecedent equations (theories are function-free)."""
    obj, prop = _sequent_eqs(seq)
    trivial_eqs = not obj.parent and not prop.parent
    for i, a in enumerate(seq.ants):
        if isinstance(a, Falsity):
            return ("false_l", i)
    for j, s in enumerate(seq.succs):
        if isinstance(s, Truth):
            return ("true_r", j)
        if isinstance(s, Eq) and _ground(s.left) and _ground(s.right) \
                and obj.find(s.left) == obj.find(s.right):
            return ("eq_refl", j)
        if isinstance(s, PropEq) and prop.find(_normalize(s.left, obj, prop)) == \
                prop.find(_normalize(s.right, obj, prop)):
            return ("propeq_refl", j)

    if trivial_eqs:
        sig = ()
    else:
        sig = (tuple(sorted((_term_key(k), _term_key(obj.find(k))) for k in obj.parent)),
               tuple(sorted((_term_key(k), _term_key(prop.find(k))) for k in prop.parent)))

    def key(f):
        ck = (f, sig)
        hit = _closure_key_cache.get(ck)
        if hit is not None:
            return hit
        g = f if trivial_eqs else _normalize(f, obj, prop)
        out = canon_key(g, nnf_first=False, ac=False, permute=False)
        if len(_closure_key_cache) > 200000:
            _closure_key_cache.clear()
        _closure_key_cache[ck] = out
        return out

    succ_keys = {}
    for j, s in enumerate(seq.succs):
        succ_keys.setdefault(key(s), j)
    for i, a in enumerate(seq.ants):
        j = succ_keys.get(key(a))
        if j is not None:
            return ("match", i, j)
    return None


# ---------------------------------------------------------------------------
# rule application


def _instantiate(f, instance):
    """Instantiate a prefix of the outermost binders; remaining binders stay
    quantified (so searches can instantiate one variable at a time)."""
    if isinstance(f, (ForAll, Exists)):
        if not 1 <= len(instance) <= len(f.vars):
            raise RuleError(f"expected 1..{len(f.vars)} instances")
        mapping = {}
        for (n, sort), t in zip(f.vars, instance):
            if not isinstance(t, TERM_TYPES) or t.sort != sort:
                raise RuleError(f"instance for {n!r} must be a ground {sort} term")
            mapping[n] = t
        rest = f.vars[len(instance):]
        body = subst_obj(f.body, mapping) if not rest else \
            subst_obj(type(f)(rest, f.body), mapping)
        return body
    raise RuleError("not an object quantifier")


def apply_rule(ctx: RuleContext, seq: Sequent, rule: str, args: tuple):
    """Apply one kernel rule; returns child sequents (empty list for close)."""
    theory = ctx.theory

    if rule == "close":
        if closure_evidence(seq) is None:
            raise RuleError("close: sequent is not closed")
        return []

    if rule == "not_l":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "a" or not isinstance(f, Not):
            raise RuleError("not_l expects an antecedent negation")
        return [Sequent(_drop(seq.ants, pos), seq.succs + (f.body,))]
    if rule == "not_r":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "s" or not isinstance(f, Not):
            raise RuleError("not_r expects a succedent negation")
        return [Sequent(seq.ants + (f.body,), _drop(seq.succs, pos))]

    if rule == "and_l":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "a" or not isinstance(f, And):
            raise RuleError("and_l expects an antecedent conjunction")
        return [Sequent(_drop(seq.ants, pos) + f.args, seq.succs)]
    if rule == "or_r":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "s" or not isinstance(f, Or):
            raise RuleError("or_r expects a succedent disjunction")
        return [Sequent(seq.ants, _drop(seq.succs, pos) + f.args)]

    if rule == "and_r":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "s" or not isinstance(f, And):
            raise RuleError("and_r expects a succedent conjunction")
        return [Sequent(seq.ants, _replace(seq.succs, pos, g)) for g in f.args]
    if rule == "or_l":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "a" or not isinstance(f, Or):
            raise RuleError("or_l expects an antecedent disjunction")
        return [Sequent(_replace(seq.ants, pos, g), seq.succs) for g in f.args]
    if rule == "imp_l":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "a" or not isinstance(f, Implies):
            raise RuleError("imp_l expects an antecedent implication")
        return [
            Sequent(_drop(seq.ants, pos), seq.succs + (f.left,)),
            Sequent(_replace(seq.ants, pos, f.right), seq.succs),
        ]
    if rule == "imp_r":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "s" or not isinstance(f, Implies):
            raise RuleError("imp_r expects a succedent implication")
        return [Sequent(seq.ants + (f.left,), _replace(seq.succs, pos, f.right))]
    if rule == "iff_l":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "a" or not isinstance(f, Iff):
            raise RuleError("iff_l expects an antecedent equivalence")
        return [
            Sequent(_replace(seq.ants, pos, f.left) + (f.right,), seq.succs),
            Sequent(_drop(seq.ants, pos), seq.succs + (f.left, f.right)),
        ]
    if rule == "iff_r":
        (idx,) = args
        side, pos, f = seq.formula_at(idx)
        if side != "s" or not isinstance(f, Iff):
            raise RuleError("iff_r expects a succedent equivalence")
        return [
            Sequent(seq.ants + (f.left,), _replace(seq.succs, pos, f.right)),
            Sequent(seq.ants + (f.right,), _replace(seq.succs, pos, f.left)),
        ]

    if rule in ("forall_l", "exists_r"):
        idx, instance, keep = args
        side, pos, f = seq.formula_at(idx)
        if rule == "forall_l" and (side != "a" or not isinstance(f, ForAll)):
            raise RuleError("forall_l expects an antecedent universal")
        if rule == "exists_r" and (side != "s" or not isinstance(f, Exists)):
            raise RuleError("exists_r expects a succedent existential")
        inst = _instantiate(f, instance)
        if side == "a":
            ants = seq.ants if keep else _drop(seq.ants, pos)
            return [Sequent(ants + (inst,), seq.succs)]
        succs = seq.succs if keep else _drop(seq.succs, pos)
        return [Sequent(seq.ants, succs + (inst,))]

    if rule in ("forallp_l", "existsp_r"):
        idx, p, keep = args
        side, pos, f = seq.formula_at(idx)
        if rule == "forallp_l" and (side != "a" or not isinstance(f, ForAllProp)):
            raise RuleError("forallp_l expects an antecedent property universal")
        if rule == "existsp_r" and (side != "s" or not isinstance(f, ExistsProp)):
            raise RuleError("existsp_r expects a succedent property existential")
        if not isinstance(p, PROP_TYPES):
            raise RuleError("property instantiation needs a property term")
        body = subst_prop(f.body, {f.var: p})
        guard = InClass(f.cls, p)
        if rule == "forallp_l":
            inst = Implies(guard, body)
            ants = seq.ants if keep else _drop(seq.ants, pos)
            return [Sequent(ants + (inst,), seq.succs)]
        inst = mk_and([guard, body])
        succs = seq.succs if keep else _drop(seq.succs, pos)
        return [Sequent(seq.ants, succs + (inst,))]

    if rule in ("foralls_l", "existss_r"):
        idx, s_term, keep = args
        side, pos, f = seq.formula_at(idx)
        if rule == "foralls_l" and (side != "a" or not isinstance(f, ForAllSet)):
            raise RuleError("foralls_l expects an antecedent set universal")
        if rule == "existss_r" and (side != "s" or not isinstance(f, ExistsSet)):
            raise RuleError("existss_r expects a succedent set existential")
        if not isinstance(s_term, SET_TYPES):
            raise RuleError("set instantiation needs a property-set term")
        inst = subst_set(f.body, {f.var: s_term})
        if rule == "foralls_l":
            ants = seq.ants if keep else _drop(seq.ants, pos)
            return [Sequent(ants + (inst,), seq.succs)]
        succs = seq.succs if keep else _drop(seq.succs, pos)
        return [Sequent(seq.ants, succs + (inst,))]

    if rule in ("exists_l", "forall_r"):
        idx, skolems = args
        side, pos, f = seq.formula_at(idx)
        if rule == "exists_l" and (side != "a" or not isinstance(f, Exists)):
            raise RuleError("exists_l expects an antecedent existential")
        if rule == "forall_r" and (side != "s" or not isinstance(f, ForAll)):
            raise RuleError("forall_r expects a succedent universal")
        if len(skolems) != len(f.vars):
            raise RuleError("one skolem constant per binder")
        mapping = {}
        for (n, sort), sk in zip(f.vars, skolems):
            if not isinstance(sk, SkolemConst) or sk.sort != sort:
                raise RuleError("skolem constant sort mismatch")
            _check_fresh(seq, sk)
            mapping[n] = sk
        inst = subst_obj(f.body, mapping)
        if side == "a":
            return [Sequent(_replace(seq.ants, pos, inst), seq.succs)]
        return [Sequent(seq.ants, _replace(seq.succs, pos, inst))]

    if rule in ("existsp_l", "forallp_r"):
        idx, sk = args
        side, pos, f = seq.formula_at(idx)
        if rule == "existsp_l" and (side != "a" or not isinstance(f, ExistsProp)):
            raise RuleError("existsp_l expects an antecedent property existential")
        if rule == "forallp_r" and (side != "s" or not isinstance(f, ForAllProp)):
            raise RuleError("forallp_r expects a succedent property universal")
        if not isinstance(sk, PropSkolem) or sk.cls != f.cls:
            raise RuleError("property skolem class mismatch")
        _check_fresh(seq, sk)
        body = subst_prop(f.body, {f.var: sk})
        if rule == "existsp_l":
            return [Sequent(_replace(seq.ants, pos, body) + (InClass(f.cls, sk),), seq.succs)]
        return [Sequent(seq.ants, _replace(seq.succs, pos, Implies(InClass(f.cls, sk), body)))]

    if rule in ("existss_l", "foralls_r"):
        idx, sk = args
        side, pos, f = seq.formula_at(idx)
        if rule == "existss_l" and (side != "a" or not isinstance(f, ExistsSet)):
            raise RuleError("existss_l expects an antecedent set existential")
        if rule == "foralls_r" and (side != "s" or not isinstance(f, ForAllSet)):
            raise RuleError("foralls_r expects a succedent set universal")
        if not isinstance(sk, SetSkolem) or sk.cls != f.cls:
            raise RuleError("set skolem class mismatch")
        _check_fresh(seq, sk)
        body = subst_set(f.body, {f.var: sk})
        if rule == "existss_l":
            return [Sequent(_replace(seq.ants, pos, body), seq.succs)]
        return [Sequent(seq.ants, _replace(seq.succs, pos, body))]

    if rule == "expand":
        (name,) = args
        d = theory.definition(name)
        if d.opaque or name in ctx.opaque:
            raise RuleError(f"definition {name!r} is opaque here")
        ants = tuple(expand_definition(a, name, theory) for a in seq.ants)
        succs = tuple(expand_definition(s, name, theory) for s in seq.succs)
        if ants == seq.ants and succs == seq.succs:
            raise RuleError(f"expand {name!r}: no occurrences")
        return [Sequent(ants, succs)]

    if rule == "axiom":
        (name,) = args
        if name not in ctx.premises:
            raise RuleError(f"{name!r} is not an available premise")
        nf = theory.formula(name)
        return [seq.with_ants(nf.body)]

    if rule == "lemma":
        (name,) = args
        nf = theory.formula(name)
        if nf.role not in ("lemma", "theorem"):
            raise RuleError("the lemma rule cites lemmas and theorems only")
        return [seq.with_ants(nf.body)]

    if rule == "choice":
        name, var, sort, formula = args
        _check_name_fresh(ctx, seq, name)
        free = free_names(formula)
        if free - {var}:
            raise RuleError("choice predicate must have exactly one free variable")
        c = ChoiceConst(name, sort, var, formula)
        axiom = subst_obj(formula, {var: c})
        main = seq.with_ants(axiom)
        oblig = seq.with_succs(Exists(((var, sort),), formula))
        return [main, oblig]

    if rule == "describe":
        name, pred = args
        _check_name_fresh(ctx, seq, name, allow_described=pred)
        sort, body_of = _description_pred(theory, pred)
        c = Const(name, sort)
        main = seq.with_ants(body_of(c))
        oblig = seq.with_succs(exists_unique("x", sort, body_of))
        return [main, oblig]

    if rule == "generalize":
        if args:
            raise RuleError("generalize takes no arguments")
        return [Sequent((), (generalize_sequent(seq),))]

    raise RuleError(f"unknown rule {rule!r}")


def _description_pred(theory, pred):
    if pred in theory.defs and not theory.defs[pred].is_propset \
            and len(theory.defs[pred].params) == 1:
        sort = theory.defs[pred].params[0].sort
        return sort, lambda t: DefRef(pred, (t,))
    if pred in theory.preds and len(theory.preds[pred]) == 1:
        sort = theory.preds[pred][0]
        return sort, lambda t: Atom(pred, (t,))
    raise RuleError(f"description predicate {pred!r} must be unary")


def _check_fresh(seq, sk):
    name = (type(sk).__name__, sk.base, sk.index)
    for f in seq.ants + seq.succs:
        if _mentions_skolem(f, sk):
            raise RuleError(f"skolem constant {sk.base}!{sk.index} is not fresh")


def _mentions_skolem(f, sk):
    if isinstance(sk, SkolemConst):
        return sk in collect_skolems(f)
    if isinstance(sk, PropSkolem):
        return sk in collect_prop_skolems(f)
    found = []

    def scan(x):
        from .transforms import _children
        if x == sk:
            found.append(True)
        for c in _children(x):
            scan(c)
    scan(f)
    return bool(found)


def _check_name_fresh(ctx, seq, name, allow_described=None):
    theory = ctx.theory
    if name in theory.descriptions and allow_described == theory.descriptions[name]:
        return  # a theory-level description constant bound by this very rule
    taken = (name in theory.consts or name in theory.preds or name in theory.defs
             or name in theory.formulas)
    if taken:
        raise NameClash(f"constant name {name!r} is already in use")
    for f in seq.ants + seq.succs:
        names = set()
        _collect_const_names(f, names)
        if name in names:
            raise NameClash(f"constant name {name!r} appears in the sequent")


def _collect_const_names(x, acc):
    from .transforms import _children
    if isinstance(x, (Const, ChoiceConst)):
        acc.add(x.name)
    for c in _children(x):
        _collect_const_names(c, acc)


def _drop(t, pos):
    return t[:pos] + t[pos + 1:]


def _replace(t, pos, f):
    return t[:pos] + (f,) + t[pos + 1:]


# ---------------------------------------------------------------------------
# derivations


class DerivNode:
    __slots__ = ("sequent", "rule", "args", "children", "tag")

    def __init__(self, sequent: Sequent, tag: str = ""):
        self.sequent = sequent
        self.rule = None
        self.args = ()
        self.children = []
        self.tag = tag

    def apply(self, ctx, rule, args):
        kids = apply_rule(ctx, self.sequent, rule, args)
        self.rule = rule
        self.args = args
        self.children = [DerivNode(k) for k in kids]
        return self.children

    def open_leaves(self):
        if self.rule is None:
            return [self]
        out = []
        for c in self.children:
            out.extend(c.open_leaves())
        return out

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def size(self):
        return sum(1 for _ in self.walk())


def check_derivation(ctx: RuleContext, node: DerivNode) -> bool:
    """True iff every step re-applies as an instance of a kernel rule and every
    leaf is closed.  Raises IllFormedDerivation on malformed steps."""
    if node.rule is None:
        return False
    try:
        kids = apply_rule(ctx, node.sequent, node.rule, node.args)
    except PetitioError as e:
        raise IllFormedDerivation(f"step {node.rule}: {e}") from e
    if len(kids) != len(node.children):
        raise IllFormedDerivation(
            f"step {node.rule}: recorded {len(node.children)} children, rule gives {len(kids)}")
    for want, got in zip(kids, node.children):
        if want != got.sequent:
            raise IllFormedDerivation(f"step {node.rule}: child sequent differs")
        if not check_derivation(ctx, got):
            return False
    return True


def derivation_used_names(ctx: RuleContext, node: DerivNode):
    """Names installed by axiom/lemma rules anywhere in the subtree."""
    used = set()
    for n in node.walk():
        if n.rule in ("axiom", "lemma"):
            used.add(n.args[0])
    return used


# ---------------------------------------------------------------------------
# skolem generalization


def generalize_sequent(seq: Sequent, order=None):
    """Universal closure, over fresh variables, of `AND(ants) => OR(succs)`,
    one variable per skolem/choice constant.  Ordering follows skolem
    introduction (index order; choice constants after, in occurrence order)."""
    seen = set()
    occ = []
    for f in seq.ants + seq.succs:
        for sk in collect_skolems(f):
            if sk not in seen:
                seen.add(sk)
                occ.append(sk)
    if order is not None:
        pos = {sk: i for i, sk in enumerate(order)}
        occ.sort(key=lambda sk: pos.get(sk, len(order)))
    else:
        occ.sort(key=lambda sk: (0, sk.index) if isinstance(sk, SkolemConst) else (1, 0))
    if not seq.ants:
        body = mk_or(seq.succs)
    elif not seq.succs:
        body = mk_not(mk_and(seq.ants))
    else:
        body = Implies(mk_and(seq.ants), mk_or(seq.succs))
    if not occ:
        return body
    used = free_names(body)
    mapping = {}
    vars_ = []
    for i, sk in enumerate(occ, start=1):
        name = fresh_name(f"x_{i}", used)
        used.add(name)
        v = Var(name, sk.sort)
        mapping[sk] = v
        vars_.append((name, sk.sort))
    body = _replace_consts(body, mapping)
    return ForAll(tuple(vars_), body)


def _replace_consts(f, mapping):
    def rec(x):
        if isinstance(x, (SkolemConst, ChoiceConst)):
            return mapping.get(x, x)
        if isinstance(x, (Var, Const, PropConst, PropVar, PropSkolem,
                          SetVar, SetSkolem, SetConst, Truth, Falsity)):
            return x
        if isinstance(x, SetBuilder):
            return SetBuilder(x.var, x.cls, rec(x.body))
        if isinstance(x, Atom):
            return Atom(x.pred, tuple(rec(a) for a in x.args))
        if isinstance(x, PropApply):
            return PropApply(rec(x.prop), rec(x.arg))
        if isinstance(x, SetApply):
            return SetApply(rec(x.s), rec(x.prop))
        if isinstance(x, InClass):
            return InClass(x.cls, rec(x.prop))
        if isinstance(x, PropEq):
            return PropEq(rec(x.left), rec(x.right))
        if isinstance(x, Eq):
            return Eq(rec(x.left), rec(x.right))
        if isinstance(x, Not):
            return Not(rec(x.body))
        if isinstance(x, And):
            return And(tuple(rec(a) for a in x.args))
        if isinstance(x, Or):
            return Or(tuple(rec(a) for a in x.args))
        if isinstance(x, Implies):
            return Implies(rec(x.left), rec(x.right))
        if isinstance(x, Iff):
            return Iff(rec(x.left), rec(x.right))
        if isinstance(x, (ForAll, Exists)):
            return type(x)(x.vars, rec(x.body))
        if isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(x)(x.var, x.cls, rec(x.body))
        if isinstance(x, DefRef):
            return DefRef(x.name, tuple(rec(a) for a in x.args))
        raise PetitioError(f"generalize: unhandled {type(x).__name__}")
    return rec(f)


# ---------------------------------------------------------------------------
# proof state, obligations, scripts


@dataclass
class Obligation:
    kind: str  # "exists" | "exists_unique"
    constant: str
    formula: object
    node: DerivNode
    origin: str  # rule application that spawned it
    context_before: Sequent  # sequent at spawn time, for analysis


@dataclass
class ProofState:
    ctx: RuleContext
    roots: list  # DerivNodes; first is the goal, then theory-level obligations
    counters: dict = field(default_factory=dict)
    env: dict = field(default_factory=dict)  # display name -> skolem/choice constant
    obligations: list = field(default_factory=list)
    cited_lemmas: set = field(default_factory=set)

    def fresh_skolem(self, base: str, sort: str) -> SkolemConst:
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        sk = SkolemConst(base, k, sort)
        self.env[f"{base}!{k}"] = sk
        return sk

    def fresh_prop_skolem(self, base: str, cls: str) -> PropSkolem:
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        sk = PropSkolem(base, k, cls)
        self.env[f"{base}!{k}"] = sk
        return sk

    def fresh_set_skolem(self, base: str, cls: str) -> SetSkolem:
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        sk = SetSkolem(base, k, cls)
        self.env[f"{base}!{k}"] = sk
        return sk

    def open_leaves(self):
        out = []
        for r in self.roots:
            out.extend(r.open_leaves())
        return out

    def current_leaf(self) -> DerivNode:
        leaves = self.open_leaves()
        if not leaves:
            raise CommandFailed("<state>", "no open goals")
        return leaves[0]

    def closed(self) -> bool:
        return not self.open_leaves()


def initial_sequent(theory: Theory, premise_names, goal_formula) -> Sequent:
    """Implicit class-membership facts and description axioms, the named
    premises in declaration order, and the goal on the right."""
    ants = list(theory.class_membership_axioms())
    ants.extend(theory.description_axioms().values())
    for name in theory.formulas:
        if name in premise_names:
            ants.append(theory.formulas[name].body)
    return Sequent(tuple(ants), (goal_formula,))


def obligation_sequent(theory: Theory, cname: str) -> Sequent:
    """A theory-level description obligation: implicit facts only, no premises
    and no description axioms (they are what the obligation justifies)."""
    ants = tuple(theory.class_membership_axioms())
    return Sequent(ants, (theory.description_obligation(cname),))


def new_proof_state(theory: Theory, goal_name: str, *, premises=None,
                    opaque=frozenset(), install=False) -> ProofState:
    """Proof state for a named goal.  Description constants mentioned anywhere
    in the theory spawn their exists-unique obligations as extra roots."""
    goal = theory.formula(goal_name)
    premise_names = frozenset(premises if premises is not None else theory.axiom_names())
    ctx = RuleContext(theory, premise_names, frozenset(opaque))
    root = DerivNode(initial_sequent(theory, premise_names if install else frozenset(),
                                     goal.body), tag=f"goal {goal_name}")
    state = ProofState(ctx, [root])
    for cname in theory.descriptions:
        node = DerivNode(obligation_sequent(theory, cname), tag=f"description {cname}")
        state.roots.append(node)
        state.obligations.append(Obligation(
            kind="exists_unique", constant=cname,
            formula=theory.description_obligation(cname),
            node=node, origin="theory", context_before=root.sequent))
    return state


# ---------------------------------------------------------------------------
# proof scripts


@dataclass(frozen=True)
class Command:
    kind: str
    text: str  # raw argument text
    line: int


def parse_script(text: str):
    """Line-oriented proof scripts; `#` starts a comment."""
    commands = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        head = head.lower()
        known = {"use", "lemma", "expand", "skolemize", "instantiate", "propsimplify",
                 "split", "choose", "describe", "generalize", "auto"}
        if head not in known:
            raise CommandFailed(line, f"unknown command {head!r}")
        commands.append(Command(head, rest.strip(), lineno))
    return commands


def replay_script(theory: Theory, goal_name: str, script, bounds=None, *,
                  opaque=frozenset(), capture=None):
    """Replay a proof script deterministically.  Returns a Verdict-like result
    from the prover module; obligations become sibling proof branches.

    `capture`, when given, is a list that receives Obligation records as they
    are spawned (used by the indirect-begging analysis)."""
    from . import prover  # deferred: prover builds on this module
    from .parser import parse_formula, parse_instance

    if isinstance(script, str):
        script = parse_script(script)
    if bounds is None:
        bounds = prover.Bounds.default()
    state = new_proof_state(theory, goal_name, opaque=opaque)
    ctx = state.ctx

    for cmd in script:
        leaf = state.current_leaf()
        seq = leaf.sequent
        try:
            if cmd.kind == "use":
                leaf.apply(ctx, "axiom", (cmd.text,))
            elif cmd.kind == "lemma":
                if cmd.text == goal_name:
                    raise CommandFailed(cmd.text, "a goal cannot cite itself")
                leaf.apply(ctx, "lemma", (cmd.text,))
                state.cited_lemmas.add(cmd.text)
            elif cmd.kind == "expand":
                leaf.apply(ctx, "expand", (cmd.text,))
            elif cmd.kind == "skolemize":
                idx = int(cmd.text)
                _skolemize_at(state, leaf, idx)
            elif cmd.kind == "instantiate":
                idx_text, _, inst_text = cmd.text.partition(" ")
                idx = int(idx_text)
                _instantiate_at(state, leaf, idx, inst_text.strip())
            elif cmd.kind == "propsimplify":
                prover.prop_simplify_node(ctx, leaf)
            elif cmd.kind == "split":
                _split_at(ctx, leaf)
            elif cmd.kind == "choose":
                _choose(state, leaf, cmd.text, capture)
            elif cmd.kind == "describe":
                name, _, pred = cmd.text.partition(" ")
                before = leaf.sequent
                kids = leaf.apply(ctx, "describe", (name.strip(), pred.strip()))
                ob = Obligation("exists_unique", name.strip(),
                                kids[1].sequent.succs[-1], kids[1], "describe", before)
                state.obligations.append(ob)
                if capture is not None:
                    capture.append(ob)
            elif cmd.kind == "generalize":
                leaf.apply(ctx, "generalize", ())
            elif cmd.kind == "auto":
                b = prover.Bounds.parse_overrides(cmd.text, bounds)
                node = prover.close_sequent(ctx, leaf.sequent, b)
                if node is None:
                    raise CommandFailed("auto", "bounded search did not close the goal")
                _graft(leaf, node)
            else:
                raise CommandFailed(cmd.kind, "unhandled command")
        except PetitioError as e:
            raise CommandFailed(f"line {cmd.line}: {cmd.kind} {cmd.text}", str(e)) from e

    if state.closed():
        return prover.Verdict.proved_script(state, script)
    open_info = [n.tag or "subgoal" for n in state.open_leaves()]
    return prover.Verdict.unknown(bounds, note=f"open goals after script: {len(open_info)}")


def _skolemize_at(state: ProofState, leaf: DerivNode, idx: int):
    side, pos, f = leaf.sequent.formula_at(idx)
    ctx = state.ctx
    if isinstance(f, (Exists, ForAll)):
        rule = "exists_l" if side == "a" else "forall_r"
        want = Exists if side == "a" else ForAll
        if not isinstance(f, want):
            raise RuleError("skolemize: polarity mismatch for object quantifier")
        sks = tuple(state.fresh_skolem(n, s) for n, s in f.vars)
        leaf.apply(ctx, rule, (idx, sks))
        return
    if isinstance(f, (ExistsProp, ForAllProp)):
        rule = "existsp_l" if side == "a" else "forallp_r"
        want = ExistsProp if side == "a" else ForAllProp
        if not isinstance(f, want):
            raise RuleError("skolemize: polarity mismatch for property quantifier")
        sk = state.fresh_prop_skolem(f.var, f.cls)
        leaf.apply(ctx, rule, (idx, sk))
        return
    if isinstance(f, (ExistsSet, ForAllSet)):
        rule = "existss_l" if side == "a" else "foralls_r"
        want = ExistsSet if side == "a" else ForAllSet
        if not isinstance(f, want):
            raise RuleError("skolemize: polarity mismatch for set quantifier")
        sk = state.fresh_set_skolem(f.var, f.cls)
        leaf.apply(ctx, rule, (idx, sk))
        return
    raise RuleError("skolemize: formula is not skolemizable")


def _instantiate_at(state: ProofState, leaf: DerivNode, idx: int, inst_text: str):
    from .parser import parse_instance
    side, pos, f = leaf.sequent.formula_at(idx)
    theory = state.ctx.theory
    if isinstance(f, (ForAll, Exists)):
        parts = _split_instances(inst_text)
        terms = tuple(parse_instance(p, theory, state.env) for p in parts)
        rule = "forall_l" if side == "a" else "exists_r"
        leaf.apply(state.ctx, rule, (idx, terms, False))
        return
    inst = parse_instance(inst_text, theory, state.env)
    if isinstance(f, (ForAllProp, ExistsProp)):
        rule = "forallp_l" if side == "a" else "existsp_r"
        leaf.apply(state.ctx, rule, (idx, inst, False))
        return
    if isinstance(f, (ForAllSet, ExistsSet)):
        rule = "foralls_l" if side == "a" else "existss_r"
        leaf.apply(state.ctx, rule, (idx, inst, False))
        return
    raise RuleError("instantiate: formula is not a quantifier")


def _split_instances(text: str):
    """Split on top-level commas (commas inside { } braces do not split)."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        parts.append(tail)
    return parts


def _split_at(ctx, leaf: DerivNode):
    seq = leaf.sequent
    for i, a in enumerate(seq.ants):
        idx = -(i + 1)
        if isinstance(a, Or):
            leaf.apply(ctx, "or_l", (idx,))
            return
        if isinstance(a, Implies):
            leaf.apply(ctx, "imp_l", (idx,))
            return
        if isinstance(a, Iff):
            leaf.apply(ctx, "iff_l", (idx,))
            return
    for j, s in enumerate(seq.succs):
        idx = j + 1
        if isinstance(s, And):
            leaf.apply(ctx, "and_r", (idx,))
            return
        if isinstance(s, Iff):
            leaf.apply(ctx, "iff_r", (idx,))
            return
    raise RuleError("split: no branching formula")


def _choose(state: ProofState, leaf: DerivNode, text: str, capture):
    from .parser import parse_formula
    head, _, formula_text = text.partition(":")
    parts = head.split()
    if len(parts) != 2:
        raise RuleError("choose NAME VAR: FORMULA")
    name, var = parts
    theory = state.ctx.theory
    sort = theory.object_sort()
    env = dict(state.env)
    env[var] = Var(var, sort)
    formula = parse_formula(formula_text.strip(), theory, env)
    before = leaf.sequent
    kids = leaf.apply(state.ctx, "choice", (name, var, sort, formula))
    state.env[name] = ChoiceConst(name, sort, var, formula)
    ob = Obligation("exists", name, kids[1].sequent.succs[-1], kids[1], "choose", before)
    state.obligations.append(ob)
    if capture is not None:
        capture.append(ob)


def _graft(leaf: DerivNode, proved: DerivNode):
    """Splice a prover-produced derivation onto an open leaf."""
    assert leaf.sequent == proved.sequent
    leaf.rule = proved.rule
    leaf.args = proved.args
    leaf.children = proved.children
