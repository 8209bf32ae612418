"""Finite-domain semantics: evaluation, model search, interpretation checking.

Models are explicit tables over a domain 0..n-1.  Unary predicates are bit
masks (bit i set iff element i is in the extension); binary relations use bit
i*n+j; 0-ary predicates use bit 0.  Enumeration order is constants, then
predicate tables, lexicographic, so the returned model is the
lexicographically least satisfying one and repeated calls are bit-identical.

Definitions are always evaluated by expansion: opacity is proof-theoretic
only.  Property quantifiers range over the class extension, which is either
the declared member tables (default) or all subsets of the domain ("full").
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .ast import (
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Theory, PetitioError,
)
from .transforms import expand_all, collect_skolems, collect_prop_skolems

DEFAULT_CAP = 1 << 22


class SearchSpaceExceeded(PetitioError):
    pass


class UnboundVariable(PetitioError):
    pass


class SignatureMismatch(PetitioError):
    pass


@dataclass(frozen=True)
class FiniteModel:
    size: int
    consts: tuple  # ((name, element), ...)
    preds: tuple  # ((name, bitmask), ...) for all arities
    classes: tuple  # ((name, (table, ...)), ...) tables sorted ascending

    def const(self, name):
        for n, v in self.consts:
            if n == name:
                return v
        raise SignatureMismatch(f"model does not interpret constant {name!r}")

    def pred(self, name):
        for n, v in self.preds:
            if n == name:
                return v
        raise SignatureMismatch(f"model does not interpret predicate {name!r}")

    def extension(self, cls):
        for n, v in self.classes:
            if n == cls:
                return v
        raise SignatureMismatch(f"model does not interpret class {cls!r}")

    def to_json(self, theory: Theory = None):
        constants = {n: v for n, v in sorted(self.consts)}
        predicates = {}
        relations = {}
        n = self.size
        for name, mask in sorted(self.preds):
            arity = None
            if theory is not None and name in theory.preds:
                arity = len(theory.preds[name])
            if arity == 2:
                relations[name] = [[(mask >> (i * n + j)) & 1 for j in range(n)]
                                   for i in range(n)]
            elif arity == 0:
                predicates[name] = [mask & 1]
            else:
                predicates[name] = [(mask >> i) & 1 for i in range(n)]
        classes = {name: [[(t >> i) & 1 for i in range(n)] for t in tables]
                   for name, tables in sorted(self.classes)}
        return {
            "domain_size": n,
            "constants": constants,
            "predicates": predicates,
            "relations": relations,
            "classes": classes,
        }

    @classmethod
    def from_json(cls, data, theory: Theory = None):
        n = data["domain_size"]
        consts = tuple(sorted(data.get("constants", {}).items()))
        preds = []
        for name, bits in data.get("predicates", {}).items():
            mask = 0
            for i, b in enumerate(bits):
                mask |= (1 if b else 0) << i
            preds.append((name, mask))
        for name, rows in data.get("relations", {}).items():
            mask = 0
            for i, row in enumerate(rows):
                for j, b in enumerate(row):
                    mask |= (1 if b else 0) << (i * n + j)
            preds.append((name, mask))
        classes = []
        for name, tables in data.get("classes", {}).items():
            masks = []
            for bits in tables:
                mask = 0
                for i, b in enumerate(bits):
                    mask |= (1 if b else 0) << i
                masks.append(mask)
            classes.append((name, tuple(sorted(set(masks)))))
        return cls(n, consts, tuple(sorted(preds)), tuple(sorted(classes)))


# ---------------------------------------------------------------------------
# evaluation


def eval_formula(theory: Theory, model: FiniteModel, f, assign=None, *,
                 subset_cap=256) -> bool:
    """Classical truth value; definitions are opened regardless of opacity."""
    f = expand_all(f, theory, force=True)
    return _eval(theory, model, f, dict(assign or {}), subset_cap)


def _term_value(model, t, assign):
    if isinstance(t, Var):
        if t.name not in assign:
            raise UnboundVariable(f"unbound variable {t.name!r}")
        return assign[t.name]
    if isinstance(t, (Const, SkolemConst, ChoiceConst)):
        return model.const(t.name)
    raise PetitioError(f"term value: unhandled {type(t).__name__}")


def _prop_value(model, p, assign):
    if isinstance(p, PropConst):
        return model.pred(p.name)
    if isinstance(p, PropSkolem):
        return model.pred(p.name)
    if isinstance(p, PropVar):
        if p.name not in assign:
            raise UnboundVariable(f"unbound property variable {p.name!r}")
        return assign[p.name]
    raise PetitioError(f"prop value: unhandled {type(p).__name__}")


def _set_value(theory, model, s, assign, subset_cap):
    if isinstance(s, (SetVar, SetSkolem)):
        if isinstance(s, SetVar) and s.name in assign:
            return assign[s.name]
        raise UnboundVariable(f"unbound set variable {s.name!r}")
    if isinstance(s, SetBuilder):
        ext = model.extension(s.cls)
        out = []
        for table in ext:
            inner = dict(assign)
            inner[s.var] = table
            if _eval(theory, model, s.body, inner, subset_cap):
                out.append(table)
        return frozenset(out)
    raise PetitioError(f"set value: unhandled {type(s).__name__}")


def _eval(theory, model, f, assign, subset_cap):
    n = model.size
    if isinstance(f, Truth):
        return True
    if isinstance(f, Falsity):
        return False
    if isinstance(f, Atom):
        mask = model.pred(f.pred)
        if len(f.args) == 0:
            return mask & 1 == 1
        if len(f.args) == 1:
            i = _term_value(model, f.args[0], assign)
            return (mask >> i) & 1 == 1
        i = _term_value(model, f.args[0], assign)
        j = _term_value(model, f.args[1], assign)
        return (mask >> (i * n + j)) & 1 == 1
    if isinstance(f, PropApply):
        table = _prop_value(model, f.prop, assign)
        i = _term_value(model, f.arg, assign)
        return (table >> i) & 1 == 1
    if isinstance(f, SetApply):
        sval = _set_value(theory, model, f.s, assign, subset_cap)
        return _prop_value(model, f.prop, assign) in sval
    if isinstance(f, InClass):
        return _prop_value(model, f.prop, assign) in model.extension(f.cls)
    if isinstance(f, PropEq):
        return _prop_value(model, f.left, assign) == _prop_value(model, f.right, assign)
    if isinstance(f, Eq):
        return _term_value(model, f.left, assign) == _term_value(model, f.right, assign)
    if isinstance(f, Not):
        return not _eval(theory, model, f.body, assign, subset_cap)
    if isinstance(f, And):
        return all(_eval(theory, model, a, assign, subset_cap) for a in f.args)
    if isinstance(f, Or):
        return any(_eval(theory, model, a, assign, subset_cap) for a in f.args)
    if isinstance(f, Implies):
        return (not _eval(theory, model, f.left, assign, subset_cap)) or \
            _eval(theory, model, f.right, assign, subset_cap)
    if isinstance(f, Iff):
        return _eval(theory, model, f.left, assign, subset_cap) == \
            _eval(theory, model, f.right, assign, subset_cap)
    if isinstance(f, (ForAll, Exists)):
        names = [v for v, _ in f.vars]
        want_all = isinstance(f, ForAll)
        for combo in itertools.product(range(n), repeat=len(names)):
            inner = dict(assign)
            inner.update(zip(names, combo))
            v = _eval(theory, model, f.body, inner, subset_cap)
            if want_all and not v:
                return False
            if not want_all and v:
                return True
        return want_all
    if isinstance(f, (ForAllProp, ExistsProp)):
        ext = model.extension(f.cls)
        want_all = isinstance(f, ForAllProp)
        for table in ext:
            inner = dict(assign)
            inner[f.var] = table
            v = _eval(theory, model, f.body, inner, subset_cap)
            if want_all and not v:
                return False
            if not want_all and v:
                return True
        return want_all
    if isinstance(f, (ForAllSet, ExistsSet)):
        ext = model.extension(f.cls)
        if 1 << len(ext) > subset_cap:
            raise SearchSpaceExceeded(
                f"{1 << len(ext)} subsets of class {f.cls!r} exceed the cap {subset_cap}")
        want_all = isinstance(f, ForAllSet)
        for r in range(len(ext) + 1):
            for combo in itertools.combinations(ext, r):
                inner = dict(assign)
                inner[f.var] = frozenset(combo)
                v = _eval(theory, model, f.body, inner, subset_cap)
                if want_all and not v:
                    return False
                if not want_all and v:
                    return True
        return want_all
    if isinstance(f, DefRef):
        raise PetitioError(f"unexpanded definition {f.name!r} during evaluation")
    raise PetitioError(f"eval: unhandled {type(f).__name__}")


# ---------------------------------------------------------------------------
# enumeration


def _class_tables(theory, cls, pred_masks, n):
    if cls.full:
        return tuple(range(1 << n))
    tables = sorted({pred_masks[m] for m in cls.members})
    return tuple(tables)


def _iter_models(theory: Theory, n: int, cap: int, semantics: str,
                 extra_consts=(), extra_props=()):
    """All candidate models of size n, lexicographically; raises
    SearchSpaceExceeded when the table space is over the cap."""
    const_names = list(theory.consts) + [c for c in extra_consts]
    pred_sigs = list(theory.preds.items()) + [(p, 1) for p in extra_props]
    combos = n ** len(const_names)
    for name, sig in pred_sigs:
        arity = sig if isinstance(sig, int) else len(sig)
        combos *= 1 << (n ** arity)
    if combos > cap:
        raise SearchSpaceExceeded(
            f"{combos} interpretations at domain size {n} exceed the cap {cap}")
    class_list = list(theory.classes.values())
    for const_vals in itertools.product(range(n), repeat=len(const_names)):
        consts = tuple(zip(const_names, const_vals))
        spaces = []
        for name, sig in pred_sigs:
            arity = sig if isinstance(sig, int) else len(sig)
            spaces.append(range(1 << (n ** arity)))
        for masks in itertools.product(*spaces):
            pred_masks = {name: mask for (name, _), mask in zip(pred_sigs, masks)}
            classes = []
            for cls in class_list:
                if semantics == "full" or cls.full:
                    classes.append((cls.name, tuple(range(1 << n))))
                else:
                    classes.append((cls.name, _class_tables(theory, cls, pred_masks, n)))
            yield FiniteModel(n, consts, tuple(pred_masks.items()), tuple(classes))


def _implicit_formulas(theory: Theory):
    return list(theory.description_axioms().values())


def find_model(theory: Theory, names, max_n: int, *, semantics="declared",
               cap=DEFAULT_CAP, subset_cap=256):
    """Smallest, lexicographically least model of the named formulas (plus the
    theory's implicit description axioms); None if none up to max_n."""
    formulas = [theory.formula(n).body for n in names]
    return find_model_formulas(theory, formulas, max_n, semantics=semantics,
                               cap=cap, subset_cap=subset_cap)


def find_model_formulas(theory: Theory, formulas, max_n: int, *, semantics="declared",
                        cap=DEFAULT_CAP, subset_cap=256, falsify=None,
                        include_implicit=True):
    targets = [expand_all(f, theory, force=True) for f in formulas]
    if include_implicit:
        targets += [expand_all(f, theory, force=True) for f in _implicit_formulas(theory)]
    targets.sort(key=_formula_size)
    goal = expand_all(falsify, theory, force=True) if falsify is not None else None
    for n in range(1, max_n + 1):
        for model in _iter_models(theory, n, cap, semantics):
            # the goal-falsity filter is usually the most selective: run it first
            if goal is not None and _eval(theory, model, goal, {}, subset_cap):
                continue
            if not all(_eval(theory, model, f, {}, subset_cap) for f in targets):
                continue
            return model
    return None


def _formula_size(f):
    from .transforms import _children
    return 1 + sum(_formula_size(c) for c in _children(f))


def find_countermodel(theory: Theory, premises, goal, max_n: int, *,
                      semantics="declared", cap=DEFAULT_CAP, subset_cap=256):
    """Model of the premises falsifying the goal, else None up to max_n."""
    premise_formulas = [theory.formula(n).body for n in premises]
    goal_f = theory.formula(goal).body if isinstance(goal, str) else goal
    return find_model_formulas(theory, premise_formulas, max_n, semantics=semantics,
                               cap=cap, subset_cap=subset_cap, falsify=goal_f)


def find_countermodel_formulas(theory: Theory, premise_formulas, goal_formula,
                               max_n: int, *, semantics="declared", cap=DEFAULT_CAP,
                               subset_cap=256):
    return find_model_formulas(theory, premise_formulas, max_n, semantics=semantics,
                               cap=cap, subset_cap=subset_cap, falsify=goal_formula)


def find_sequent_countermodel(theory: Theory, sequent, max_n: int, *,
                              semantics="full", cap=DEFAULT_CAP, subset_cap=256):
    """A model making every antecedent true and every succedent false, with
    skolem/choice constants treated as extra constants to interpret and
    property skolems as extra unary tables constrained into their class."""
    extra_consts = []
    extra_props = []
    constraints = []
    for f in sequent.ants + sequent.succs:
        for c in collect_skolems(f):
            if c.name not in extra_consts and c.name not in theory.consts:
                extra_consts.append(c.name)
        for p in collect_prop_skolems(f):
            if p.name not in extra_props:
                extra_props.append(p.name)
                constraints.append(InClass(p.cls, p))
    ants = [expand_all(_name_skolems(a), theory, force=True) for a in sequent.ants]
    succs = [expand_all(_name_skolems(s), theory, force=True) for s in sequent.succs]
    constraints = [expand_all(_name_skolems(c), theory, force=True) for c in constraints]
    implicit = [expand_all(f, theory, force=True) for f in _implicit_formulas(theory)]
    for n in range(1, max_n + 1):
        for model in _iter_models(theory, n, cap, semantics, extra_consts, extra_props):
            if not all(_eval(theory, model, f, {}, subset_cap)
                       for f in implicit + constraints + ants):
                continue
            if any(_eval(theory, model, f, {}, subset_cap) for f in succs):
                continue
            return model
    return None


def _name_skolems(f):
    """Rewrite skolem/choice constants to plain constants keyed by display name,
    so the enumerator can interpret them."""

    def walk(x):
        if isinstance(x, SkolemConst):
            return Const(f"{x.base}!{x.index}", x.sort)
        if isinstance(x, ChoiceConst):
            return Const(x.name, x.sort)
        if isinstance(x, PropSkolem):
            return PropConst(f"{x.base}!{x.index}", "")
        if isinstance(x, (Var, Const, PropConst, PropVar, SetVar, SetSkolem, SetConst,
                          Truth, Falsity)):
            return x
        if isinstance(x, SetBuilder):
            return SetBuilder(x.var, x.cls, walk(x.body))
        if isinstance(x, Atom):
            return Atom(x.pred, tuple(walk(a) for a in x.args))
        if isinstance(x, PropApply):
            return PropApply(walk(x.prop), walk(x.arg))
        if isinstance(x, SetApply):
            return SetApply(walk(x.s), walk(x.prop))
        if isinstance(x, InClass):
            return InClass(x.cls, walk(x.prop))
        if isinstance(x, PropEq):
            return PropEq(walk(x.left), walk(x.right))
        if isinstance(x, Eq):
            return Eq(walk(x.left), walk(x.right))
        if isinstance(x, Not):
            return Not(walk(x.body))
        if isinstance(x, And):
            return And(tuple(walk(a) for a in x.args))
        if isinstance(x, Or):
            return Or(tuple(walk(a) for a in x.args))
        if isinstance(x, Implies):
            return Implies(walk(x.left), walk(x.right))
        if isinstance(x, Iff):
            return Iff(walk(x.left), walk(x.right))
        if isinstance(x, (ForAll, Exists)):
            return type(x)(x.vars, walk(x.body))
        if isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(x)(x.var, x.cls, walk(x.body))
        if isinstance(x, DefRef):
            return DefRef(x.name, tuple(walk(a) for a in x.args))
        raise PetitioError(f"name_skolems: unhandled {type(x).__name__}")

    return walk(f)


# ---------------------------------------------------------------------------
# interpretation checking


@dataclass(frozen=True)
class InterpretationReport:
    entries: tuple  # ((name, bool), ...)
    implicit: tuple  # ((description, bool), ...)

    @property
    def passed(self):
        return all(v for _, v in self.entries) and all(v for _, v in self.implicit)

    def to_json(self):
        return {
            "axioms": {n: v for n, v in self.entries},
            "implicit": {n: v for n, v in self.implicit},
            "passed": self.passed,
        }


def check_interpretation(theory: Theory, model: FiniteModel, *,
                         subset_cap=256) -> InterpretationReport:
    """Evaluate every axiom (and implicit description axiom) in the model."""
    for name in theory.consts:
        model.const(name)
    for name in theory.preds:
        model.pred(name)
    entries = []
    for nf in theory.axioms():
        entries.append((nf.name, eval_formula(theory, model, nf.body,
                                              subset_cap=subset_cap)))
    implicit = []
    for cname, ax in theory.description_axioms().items():
        implicit.append((cname, eval_formula(theory, model, ax, subset_cap=subset_cap)))
    return InterpretationReport(tuple(entries), tuple(implicit))
