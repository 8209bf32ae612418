"""Pure syntactic transformations over the typed AST.

Substitution is capture-avoiding for all three binder kinds (object variables,
property variables, property-set variables).  Canonical keys implement
alpha-comparison, optionally after NNF and AC-flattening, with permutation of
variables inside a single quantifier block.
"""
from __future__ import annotations

import itertools

from .ast import (
    TRUE, FALSE,
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Definition, NamedFormula, PropClass, Theory,
    mk_and, mk_or, mk_not,
    PetitioError, NotAnImplication, UnknownDefinition, OpaqueDefinition, NameClash,
)

TERM_TYPES = (Var, Const, SkolemConst, ChoiceConst)
PROP_TYPES = (PropConst, PropVar, PropSkolem)
SET_TYPES = (SetVar, SetSkolem, SetConst, SetBuilder)
QUANT_TYPES = (ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet)


# ---------------------------------------------------------------------------
# free variables


def free_names(f, acc=None):
    """All free variable names in f, across the three variable kinds."""
    if acc is None:
        acc = set()
    _free(f, frozenset(), acc)
    return acc


def _free(x, bound, acc):
    if isinstance(x, Var):
        if x.name not in bound:
            acc.add(x.name)
    elif isinstance(x, (PropVar, SetVar)):
        if x.name not in bound:
            acc.add(x.name)
    elif isinstance(x, ChoiceConst):
        _free(x.defn, bound | {x.var}, acc)
    elif isinstance(x, (Const, SkolemConst, PropConst, PropSkolem, SetSkolem, SetConst,
                        Truth, Falsity)):
        pass
    elif isinstance(x, SetBuilder):
        _free(x.body, bound | {x.var}, acc)
    elif isinstance(x, Atom):
        for a in x.args:
            _free(a, bound, acc)
    elif isinstance(x, PropApply):
        _free(x.prop, bound, acc)
        _free(x.arg, bound, acc)
    elif isinstance(x, SetApply):
        _free(x.s, bound, acc)
        _free(x.prop, bound, acc)
    elif isinstance(x, InClass):
        _free(x.prop, bound, acc)
    elif isinstance(x, PropEq):
        _free(x.left, bound, acc)
        _free(x.right, bound, acc)
    elif isinstance(x, Eq):
        _free(x.left, bound, acc)
        _free(x.right, bound, acc)
    elif isinstance(x, Not):
        _free(x.body, bound, acc)
    elif isinstance(x, (And, Or)):
        for a in x.args:
            _free(a, bound, acc)
    elif isinstance(x, (Implies, Iff)):
        _free(x.left, bound, acc)
        _free(x.right, bound, acc)
    elif isinstance(x, (ForAll, Exists)):
        inner = bound | {n for n, _ in x.vars}
        _free(x.body, inner, acc)
    elif isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
        _free(x.body, bound | {x.var}, acc)
    elif isinstance(x, DefRef):
        for a in x.args:
            _free(a, bound, acc)
    else:
        raise PetitioError(f"free_names: unhandled node {type(x).__name__}")


def fresh_name(base: str, used) -> str:
    if base not in used:
        return base
    k = 1
    while f"{base}_{k}" in used:
        k += 1
    return f"{base}_{k}"


# ---------------------------------------------------------------------------
# substitution


def substitute(f, obj=None, prop=None, sets=None):
    """Simultaneous capture-avoiding substitution; beta-reduces set-builder
    applications produced along the way."""
    env = {}
    for m in (obj or {}, prop or {}, sets or {}):
        env.update(m)
    if not env:
        return f
    # names that a binder could capture: free variables of the replacements
    taken = set()
    for v in env.values():
        free_names(v, taken)
    return _subst(f, env, taken)


def subst_obj(f, mapping):
    return substitute(f, obj=mapping)


def subst_prop(f, mapping):
    return substitute(f, prop=mapping)


def subst_set(f, mapping):
    return substitute(f, sets=mapping)


def _subst(x, env, taken):
    if isinstance(x, Var):
        return env.get(x.name, x)
    if isinstance(x, PropVar):
        return env.get(x.name, x)
    if isinstance(x, SetVar):
        return env.get(x.name, x)
    if isinstance(x, (Const, SkolemConst, PropConst, PropSkolem, SetSkolem, SetConst,
                      Truth, Falsity)):
        return x
    if isinstance(x, ChoiceConst):
        return x
    if isinstance(x, SetBuilder):
        env2, var2, body = _under_binder(x.var, x.body, env, taken, kind="prop", cls=x.cls)
        return SetBuilder(var2, x.cls, _subst(body, env2, taken))
    if isinstance(x, Atom):
        return Atom(x.pred, tuple(_subst(a, env, taken) for a in x.args))
    if isinstance(x, PropApply):
        return mk_prop_apply(_subst(x.prop, env, taken), _subst(x.arg, env, taken))
    if isinstance(x, SetApply):
        return mk_set_apply(_subst(x.s, env, taken), _subst(x.prop, env, taken))
    if isinstance(x, InClass):
        return InClass(x.cls, _subst(x.prop, env, taken))
    if isinstance(x, PropEq):
        return PropEq(_subst(x.left, env, taken), _subst(x.right, env, taken))
    if isinstance(x, Eq):
        return Eq(_subst(x.left, env, taken), _subst(x.right, env, taken))
    if isinstance(x, Not):
        return mk_not(_subst(x.body, env, taken))
    if isinstance(x, And):
        return mk_and([_subst(a, env, taken) for a in x.args])
    if isinstance(x, Or):
        return mk_or([_subst(a, env, taken) for a in x.args])
    if isinstance(x, Implies):
        return Implies(_subst(x.left, env, taken), _subst(x.right, env, taken))
    if isinstance(x, Iff):
        return Iff(_subst(x.left, env, taken), _subst(x.right, env, taken))
    if isinstance(x, (ForAll, Exists)):
        names = [n for n, _ in x.vars]
        sorts = [s for _, s in x.vars]
        env2 = {k: v for k, v in env.items() if k not in names}
        if not env2:
            return x
        ren = {}
        new_names = []
        for n, s in x.vars:
            if n in taken:
                n2 = fresh_name(n, taken | set(new_names) | set(env2.keys()) | {n})
                ren[n] = Var(n2, s)
            else:
                n2 = n
            new_names.append(n2)
        body = x.body
        if ren:
            body = substitute(body, obj=ren)
        ctor = type(x)
        return ctor(tuple(zip(new_names, sorts)), _subst(body, env2, taken))
    if isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
        env2, var2, body = _under_binder(x.var, x.body, env, taken,
                                         kind="prop" if isinstance(x, (ForAllProp, ExistsProp))
                                         else "set", cls=x.cls)
        return type(x)(var2, x.cls, _subst(body, env2, taken))
    if isinstance(x, DefRef):
        return DefRef(x.name, tuple(_subst(a, env, taken) for a in x.args))
    raise PetitioError(f"substitute: unhandled node {type(x).__name__}")


def _under_binder(var, body, env, taken, kind="prop", cls=None):
    env2 = {k: v for k, v in env.items() if k != var}
    if var in taken and env2:
        var2 = fresh_name(var, taken | set(env2.keys()) | {var})
        if kind == "prop":
            body = substitute(body, prop={var: PropVar(var2, cls)})
        else:
            body = substitute(body, sets={var: SetVar(var2, cls)})
        return env2, var2, body
    return env2, var, body


def mk_prop_apply(prop, arg):
    """Property application; a constant property collapses to its atom."""
    if isinstance(prop, PropConst):
        return Atom(prop.name, (arg,))
    return PropApply(prop, arg)


def mk_set_apply(s, prop):
    """Set application; builder membership beta-reduces."""
    if isinstance(s, SetBuilder):
        return substitute(s.body, prop={s.var: prop})
    return SetApply(s, prop)


# ---------------------------------------------------------------------------
# negation normal form


def nnf(f):
    """Negation normal form.  Implications are unfolded; Iff nodes are kept
    with negation pushed into the right-hand side."""
    return _nnf(f, False)


def _nnf(f, neg):
    if isinstance(f, Truth):
        return FALSE if neg else TRUE
    if isinstance(f, Falsity):
        return TRUE if neg else FALSE
    if isinstance(f, (Atom, PropApply, SetApply, InClass, PropEq, Eq, DefRef)):
        return mk_not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.body, not neg)
    if isinstance(f, And):
        parts = [_nnf(a, neg) for a in f.args]
        return mk_or(parts) if neg else mk_and(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, neg) for a in f.args]
        return mk_and(parts) if neg else mk_or(parts)
    if isinstance(f, Implies):
        if neg:
            return mk_and([_nnf(f.left, False), _nnf(f.right, True)])
        return mk_or([_nnf(f.left, True), _nnf(f.right, False)])
    if isinstance(f, Iff):
        return Iff(_nnf(f.left, False), _nnf(f.right, neg))
    if isinstance(f, ForAll):
        return Exists(f.vars, _nnf(f.body, True)) if neg else ForAll(f.vars, _nnf(f.body, False))
    if isinstance(f, Exists):
        return ForAll(f.vars, _nnf(f.body, True)) if neg else Exists(f.vars, _nnf(f.body, False))
    if isinstance(f, ForAllProp):
        return (ExistsProp(f.var, f.cls, _nnf(f.body, True)) if neg
                else ForAllProp(f.var, f.cls, _nnf(f.body, False)))
    if isinstance(f, ExistsProp):
        return (ForAllProp(f.var, f.cls, _nnf(f.body, True)) if neg
                else ExistsProp(f.var, f.cls, _nnf(f.body, False)))
    if isinstance(f, ForAllSet):
        return (ExistsSet(f.var, f.cls, _nnf(f.body, True)) if neg
                else ForAllSet(f.var, f.cls, _nnf(f.body, False)))
    if isinstance(f, ExistsSet):
        return (ForAllSet(f.var, f.cls, _nnf(f.body, True)) if neg
                else ExistsSet(f.var, f.cls, _nnf(f.body, False)))
    raise PetitioError(f"nnf: unhandled node {type(f).__name__}")


# ---------------------------------------------------------------------------
# canonical keys (alpha / AC comparison)

_MAX_BLOCK_PERMUTE = 5


_canon_cache = {}


def canon_key(f, *, nnf_first=True, ac=True, permute=True):
    """A hashable key equal for formulas that are alpha-variants, and -- with
    the default flags -- also equal across NNF, And/Or reordering, and
    permutation of variables within one quantifier block."""
    cache_key = (f, nnf_first, ac, permute)
    hit = _canon_cache.get(cache_key)
    if hit is not None:
        return hit
    g = nnf(f) if nnf_first else f
    out = _canon(g, {}, 0, ac, permute)
    if len(_canon_cache) > 200000:
        _canon_cache.clear()
    _canon_cache[cache_key] = out
    return out


def alpha_equal(f, g) -> bool:
    return canon_key(f, nnf_first=False, ac=False, permute=False) == \
        canon_key(g, nnf_first=False, ac=False, permute=False)


def ac_equal(f, g) -> bool:
    """Equality up to NNF, AC of And/Or, renaming, and block permutation."""
    return canon_key(f) == canon_key(g)


def _canon(x, env, depth, ac, permute):
    if isinstance(x, Truth):
        return ("true",)
    if isinstance(x, Falsity):
        return ("false",)
    if isinstance(x, Var):
        if x.name in env:
            return ("bv", env[x.name])
        return ("fv", x.name)
    if isinstance(x, Const):
        return ("c", x.name)
    if isinstance(x, SkolemConst):
        return ("sk", x.base, x.index)
    if isinstance(x, ChoiceConst):
        return ("ch", x.name)
    if isinstance(x, PropConst):
        return ("pc", x.name)
    if isinstance(x, PropVar):
        if x.name in env:
            return ("bpv", env[x.name])
        return ("fpv", x.name)
    if isinstance(x, PropSkolem):
        return ("psk", x.base, x.index)
    if isinstance(x, SetVar):
        if x.name in env:
            return ("bsv", env[x.name])
        return ("fsv", x.name)
    if isinstance(x, SetSkolem):
        return ("ssk", x.base, x.index)
    if isinstance(x, SetConst):
        return ("sc", x.name)
    if isinstance(x, SetBuilder):
        env2 = dict(env)
        env2[x.var] = depth
        return ("sb", x.cls, _canon(x.body, env2, depth + 1, ac, permute))
    if isinstance(x, Atom):
        return ("atom", x.pred) + tuple(_canon(a, env, depth, ac, permute) for a in x.args)
    if isinstance(x, PropApply):
        return ("papp", _canon(x.prop, env, depth, ac, permute),
                _canon(x.arg, env, depth, ac, permute))
    if isinstance(x, SetApply):
        return ("sapp", _canon(x.s, env, depth, ac, permute),
                _canon(x.prop, env, depth, ac, permute))
    if isinstance(x, InClass):
        return ("inclass", x.cls, _canon(x.prop, env, depth, ac, permute))
    if isinstance(x, PropEq):
        pair = sorted((_canon(x.left, env, depth, ac, permute),
                       _canon(x.right, env, depth, ac, permute)))
        return ("propeq", pair[0], pair[1])
    if isinstance(x, Eq):
        pair = sorted((_canon(x.left, env, depth, ac, permute),
                       _canon(x.right, env, depth, ac, permute)))
        return ("eq", pair[0], pair[1])
    if isinstance(x, Not):
        return ("not", _canon(x.body, env, depth, ac, permute))
    if isinstance(x, (And, Or)):
        tag = "and" if isinstance(x, And) else "or"
        keys = [_canon(a, env, depth, ac, permute) for a in x.args]
        if ac:
            keys.sort()
        return (tag,) + tuple(keys)
    if isinstance(x, Implies):
        return ("implies", _canon(x.left, env, depth, ac, permute),
                _canon(x.right, env, depth, ac, permute))
    if isinstance(x, Iff):
        pair = [_canon(x.left, env, depth, ac, permute),
                _canon(x.right, env, depth, ac, permute)]
        if ac:
            pair.sort()
        return ("iff", pair[0], pair[1])
    if isinstance(x, QUANT_TYPES):
        return _canon_quant(x, env, depth, ac, permute)
    if isinstance(x, DefRef):
        return ("def", x.name) + tuple(_canon(a, env, depth, ac, permute) for a in x.args)
    raise PetitioError(f"canon: unhandled node {type(x).__name__}")


def _quant_block(x):
    """Collect a maximal run of same-kind quantifiers into one block."""
    kind = type(x)
    if isinstance(x, (ForAll, Exists)):
        vars_ = list(x.vars)
        body = x.body
        while isinstance(body, kind):
            vars_ += list(body.vars)
            body = body.body
        return [(n, s) for n, s in vars_], body
    vars_ = [(x.var, x.cls)]
    body = x.body
    while isinstance(body, kind):
        vars_.append((body.var, body.cls))
        body = body.body
    return vars_, body


_QUANT_TAG = {ForAll: "forall", Exists: "exists", ForAllProp: "forallp",
              ExistsProp: "existsp", ForAllSet: "foralls", ExistsSet: "existss"}


def _canon_quant(x, env, depth, ac, permute):
    vars_, body = _quant_block(x)
    tag = _QUANT_TAG[type(x)]
    sorts_key = tuple(sorted(s for _, s in vars_))
    if permute and len(vars_) <= _MAX_BLOCK_PERMUTE:
        best = None
        for perm in itertools.permutations(vars_):
            env2 = dict(env)
            for i, (n, _) in enumerate(perm):
                env2[n] = depth + i
            key = _canon(body, env2, depth + len(vars_), ac, permute)
            if best is None or key < best:
                best = key
        return (tag, len(vars_), sorts_key, best)
    env2 = dict(env)
    for i, (n, _) in enumerate(vars_):
        env2[n] = depth + i
    return (tag, len(vars_), sorts_key, _canon(body, env2, depth + len(vars_), ac, permute))


# ---------------------------------------------------------------------------
# contrapositive


def contrapositive(f):
    """NOT B => NOT A under the same universal prefix as A => B."""
    prefix = []
    g = f
    while isinstance(g, (ForAll, ForAllProp, ForAllSet)):
        prefix.append(g)
        g = g.body
    if not isinstance(g, Implies):
        raise NotAnImplication(f"contrapositive needs an implication, found {type(g).__name__}")
    out = Implies(mk_not(g.right), mk_not(g.left))
    for q in reversed(prefix):
        if isinstance(q, ForAll):
            out = ForAll(q.vars, out)
        else:
            out = type(q)(q.var, q.cls, out)
    return out


# ---------------------------------------------------------------------------
# definition expansion and folding


def _def_instance(d: Definition, args):
    obj, prop, sets = {}, {}, {}
    for p, a in zip(d.params, args):
        if p.kind == "obj":
            obj[p.name] = a
        elif p.kind == "prop":
            prop[p.name] = a
        else:
            sets[p.name] = a
    return substitute(d.body, obj=obj, prop=prop, sets=sets)


def expand_definition(f, name, theory: Theory, *, force=False):
    """Replace every DefRef(name, ...) by its beta-substituted body."""
    d = theory.definition(name)
    if d.opaque and not force:
        raise OpaqueDefinition(f"definition {name!r} is opaque")
    if d.is_propset:
        return _map_formula(f, lambda g: g, set_map=lambda s: d.body if (
            isinstance(s, SetConst) and s.name == name) else s)
    def step(g):
        if isinstance(g, DefRef) and g.name == name:
            return _def_instance(d, g.args)
        return g
    return _map_formula(f, step)


def expand_all(f, theory: Theory, mask=frozenset(), *, force=False):
    """Expand every transparent definition not named in mask, to a fixpoint.
    With force, opacity is ignored (model semantics opens every definition)."""
    changed = True
    while changed:
        changed = False
        for name, d in theory.defs.items():
            if (d.opaque and not force) or name in mask:
                continue
            g = expand_definition(f, name, theory, force=force)
            if g != f:
                f = g
                changed = True
    return f


def _map_formula(x, step, set_map=None):
    """Bottom-up rewrite: children first, then `step` at each formula node."""
    def rec(y):
        if isinstance(y, TERM_TYPES + PROP_TYPES):
            return y
        if isinstance(y, SetBuilder):
            return SetBuilder(y.var, y.cls, rec(y.body))
        if isinstance(y, SET_TYPES):
            return set_map(y) if set_map else y
        if isinstance(y, (Truth, Falsity)):
            return step(y)
        if isinstance(y, Atom):
            return step(y)
        if isinstance(y, PropApply):
            return step(y)
        if isinstance(y, SetApply):
            s2 = rec(y.s)
            return step(mk_set_apply(s2, y.prop))
        if isinstance(y, (InClass, PropEq, Eq)):
            return step(y)
        if isinstance(y, Not):
            return step(mk_not(rec(y.body)))
        if isinstance(y, And):
            return step(mk_and([rec(a) for a in y.args]))
        if isinstance(y, Or):
            return step(mk_or([rec(a) for a in y.args]))
        if isinstance(y, Implies):
            return step(Implies(rec(y.left), rec(y.right)))
        if isinstance(y, Iff):
            return step(Iff(rec(y.left), rec(y.right)))
        if isinstance(y, (ForAll, Exists)):
            return step(type(y)(y.vars, rec(y.body)))
        if isinstance(y, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return step(type(y)(y.var, y.cls, rec(y.body)))
        if isinstance(y, DefRef):
            args2 = tuple(rec(a) if isinstance(a, SET_TYPES) else a for a in y.args)
            return step(DefRef(y.name, args2))
        raise PetitioError(f"map_formula: unhandled {type(y).__name__}")
    return rec(x)


def fold_definition(f, name, theory: Theory):
    """Replace subformulas matching the definition body (up to alpha and
    And/Or commutativity) by DefRef(name, args)."""
    d = theory.definition(name)
    if d.opaque:
        raise OpaqueDefinition(f"definition {name!r} is opaque")
    if d.is_propset:
        raise PetitioError("fold of propset definitions is not supported")
    params = {p.name: p for p in d.params}

    def try_fold(g):
        bind = {}
        if _match(d.body, g, params, bind, {}, frozenset()):
            try:
                args = tuple(bind[p.name] for p in d.params)
            except KeyError:
                return None
            return DefRef(name, args)
        return None

    def rec(y):
        if isinstance(y, TERM_TYPES + PROP_TYPES + SET_TYPES):
            return y
        folded = try_fold(y)
        if folded is not None:
            return folded
        if isinstance(y, (Truth, Falsity, Atom, PropApply, SetApply, InClass, PropEq, Eq,
                          DefRef)):
            return y
        if isinstance(y, Not):
            return mk_not(rec(y.body))
        if isinstance(y, And):
            return mk_and([rec(a) for a in y.args])
        if isinstance(y, Or):
            return mk_or([rec(a) for a in y.args])
        if isinstance(y, Implies):
            return Implies(rec(y.left), rec(y.right))
        if isinstance(y, Iff):
            return Iff(rec(y.left), rec(y.right))
        if isinstance(y, (ForAll, Exists)):
            return type(y)(y.vars, rec(y.body))
        if isinstance(y, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(y)(y.var, y.cls, rec(y.body))
        raise PetitioError(f"fold: unhandled {type(y).__name__}")

    return rec(f)


def _match(pat, tgt, params, bind, penv, tgt_bound):
    """Match pattern against target; params bind to target terms, penv aligns
    bound variables; bindings may not mention target-locally-bound names."""
    if isinstance(pat, Var):
        if pat.name in params:
            if not isinstance(tgt, TERM_TYPES):
                return False
            if isinstance(tgt, Var) and tgt.name in tgt_bound:
                return False
            prev = bind.get(pat.name)
            if prev is not None:
                return prev == tgt
            bind[pat.name] = tgt
            return True
        return isinstance(tgt, Var) and penv.get(pat.name) == tgt.name
    if isinstance(pat, PropVar):
        if pat.name in params:
            if not isinstance(tgt, PROP_TYPES):
                return False
            prev = bind.get(pat.name)
            if prev is not None:
                return prev == tgt
            bind[pat.name] = tgt
            return True
        return isinstance(tgt, PropVar) and penv.get(pat.name) == tgt.name
    if isinstance(pat, SetVar):
        if pat.name in params:
            if not isinstance(tgt, SET_TYPES):
                return False
            prev = bind.get(pat.name)
            if prev is not None:
                return prev == tgt
            bind[pat.name] = tgt
            return True
        return isinstance(tgt, SetVar) and penv.get(pat.name) == tgt.name
    if type(pat) is not type(tgt):
        return False
    if isinstance(pat, (Const, SkolemConst, ChoiceConst, PropConst, PropSkolem, SetSkolem,
                        SetConst, Truth, Falsity)):
        return pat == tgt
    if isinstance(pat, Atom):
        if pat.pred != tgt.pred or len(pat.args) != len(tgt.args):
            return False
        return all(_match(p, t, params, bind, penv, tgt_bound)
                   for p, t in zip(pat.args, tgt.args))
    if isinstance(pat, PropApply):
        return _match(pat.prop, tgt.prop, params, bind, penv, tgt_bound) and \
            _match(pat.arg, tgt.arg, params, bind, penv, tgt_bound)
    if isinstance(pat, SetApply):
        return _match(pat.s, tgt.s, params, bind, penv, tgt_bound) and \
            _match(pat.prop, tgt.prop, params, bind, penv, tgt_bound)
    if isinstance(pat, InClass):
        return pat.cls == tgt.cls and _match(pat.prop, tgt.prop, params, bind, penv, tgt_bound)
    if isinstance(pat, (PropEq, Eq)):
        snap = dict(bind)
        if _match(pat.left, tgt.left, params, bind, penv, tgt_bound) and \
                _match(pat.right, tgt.right, params, bind, penv, tgt_bound):
            return True
        bind.clear()
        bind.update(snap)
        return _match(pat.left, tgt.right, params, bind, penv, tgt_bound) and \
            _match(pat.right, tgt.left, params, bind, penv, tgt_bound)
    if isinstance(pat, Not):
        return _match(pat.body, tgt.body, params, bind, penv, tgt_bound)
    if isinstance(pat, (And, Or)):
        if len(pat.args) != len(tgt.args):
            return False
        return _match_multiset(list(pat.args), list(tgt.args), params, bind, penv, tgt_bound)
    if isinstance(pat, (Implies, Iff)):
        return _match(pat.left, tgt.left, params, bind, penv, tgt_bound) and \
            _match(pat.right, tgt.right, params, bind, penv, tgt_bound)
    if isinstance(pat, (ForAll, Exists)):
        if len(pat.vars) != len(tgt.vars):
            return False
        penv2 = dict(penv)
        for (pn, ps), (tn, tsort) in zip(pat.vars, tgt.vars):
            if ps != tsort:
                return False
            penv2[pn] = tn
        return _match(pat.body, tgt.body, params, bind, penv2,
                      tgt_bound | {tn for tn, _ in tgt.vars})
    if isinstance(pat, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
        if pat.cls != tgt.cls:
            return False
        penv2 = dict(penv)
        penv2[pat.var] = tgt.var
        return _match(pat.body, tgt.body, params, bind, penv2, tgt_bound | {tgt.var})
    if isinstance(pat, DefRef):
        if pat.name != tgt.name or len(pat.args) != len(tgt.args):
            return False
        return all(_match(p, t, params, bind, penv, tgt_bound)
                   for p, t in zip(pat.args, tgt.args))
    return False


def _match_multiset(pats, tgts, params, bind, penv, tgt_bound):
    if not pats:
        return not tgts
    pat = pats[0]
    for i, tgt in enumerate(tgts):
        snap = dict(bind)
        if _match(pat, tgt, params, bind, penv, tgt_bound):
            rest = tgts[:i] + tgts[i + 1:]
            if _match_multiset(pats[1:], rest, params, bind, penv, tgt_bound):
                return True
        bind.clear()
        bind.update(snap)
    return False


# ---------------------------------------------------------------------------
# predicate / definition renaming


def rename_symbols(f, ren):
    def step(g):
        if isinstance(g, Atom) and g.pred in ren:
            return Atom(ren[g.pred], g.args)
        if isinstance(g, DefRef) and g.name in ren:
            return DefRef(ren[g.name], g.args)
        return g

    def fix_leaf(x):
        if isinstance(x, PropConst) and x.name in ren:
            return PropConst(ren[x.name], x.sort)
        if isinstance(x, SetConst) and x.name in ren:
            return SetConst(ren[x.name], x.cls)
        return x

    def rec(y):
        if isinstance(y, TERM_TYPES):
            return y
        if isinstance(y, PROP_TYPES):
            return fix_leaf(y)
        if isinstance(y, SetBuilder):
            return SetBuilder(y.var, y.cls, rec(y.body))
        if isinstance(y, SET_TYPES):
            return fix_leaf(y)
        if isinstance(y, (Truth, Falsity)):
            return y
        if isinstance(y, Atom):
            return step(Atom(y.pred, y.args))
        if isinstance(y, PropApply):
            return mk_prop_apply(rec(y.prop), y.arg)
        if isinstance(y, SetApply):
            return SetApply(rec(y.s), rec(y.prop))
        if isinstance(y, InClass):
            return InClass(y.cls, rec(y.prop))
        if isinstance(y, PropEq):
            return PropEq(rec(y.left), rec(y.right))
        if isinstance(y, Eq):
            return y
        if isinstance(y, Not):
            return mk_not(rec(y.body))
        if isinstance(y, And):
            return mk_and([rec(a) for a in y.args])
        if isinstance(y, Or):
            return mk_or([rec(a) for a in y.args])
        if isinstance(y, Implies):
            return Implies(rec(y.left), rec(y.right))
        if isinstance(y, Iff):
            return Iff(rec(y.left), rec(y.right))
        if isinstance(y, (ForAll, Exists)):
            return type(y)(y.vars, rec(y.body))
        if isinstance(y, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(y)(y.var, y.cls, rec(y.body))
        if isinstance(y, DefRef):
            return step(DefRef(y.name, tuple(rec(a) if isinstance(a, SET_TYPES + PROP_TYPES)
                                             else a for a in y.args)))
        raise PetitioError(f"rename: unhandled {type(y).__name__}")

    return rec(f)


def substitute_predicate(theory: Theory, renaming: dict) -> Theory:
    """Uniformly rename predicate symbols and definition names; the result is a
    well-formed theory.  Raises NameClash when a fresh name is already in use."""
    fresh_targets = [n for o, n in renaming.items() if n != o]
    for old, new in renaming.items():
        if old not in theory.preds and old not in theory.defs:
            raise PetitioError(f"cannot rename {old!r}: not a predicate or definition")
        if new == old:
            continue
        used = (new in theory.preds or new in theory.defs or new in theory.consts
                or new in theory.formulas or new in theory.sorts or new in theory.classes)
        if used or fresh_targets.count(new) > 1:
            raise NameClash(f"renamed symbol {new!r} is already in use")
    ren = {o: n for o, n in renaming.items() if o != n}
    out = Theory(name=theory.name)
    out.sorts = list(theory.sorts)
    out.vars = dict(theory.vars)
    out.consts = dict(theory.consts)
    out.preds = {ren.get(n, n): sig for n, sig in theory.preds.items()}
    out.infix = {ren.get(n, n) for n in theory.infix}
    out.classes = {
        c.name: PropClass(c.name, c.elem_sort, tuple(ren.get(m, m) for m in c.members), c.full)
        for c in theory.classes.values()
    }
    for n, d in theory.defs.items():
        body = d.body if isinstance(d.body, SetBuilder) else rename_symbols(d.body, ren)
        if isinstance(body, SetBuilder):
            body = SetBuilder(body.var, body.cls, rename_symbols(body.body, ren))
        out.defs[ren.get(n, n)] = Definition(ren.get(n, n), d.params, body, d.opaque, d.span)
    for n, nf in theory.formulas.items():
        out.formulas[n] = NamedFormula(n, nf.role, rename_symbols(nf.body, ren), nf.span)
    out.descriptions = {c: ren.get(p, p) for c, p in theory.descriptions.items()}
    out.expects = list(theory.expects)
    return out


# ---------------------------------------------------------------------------
# misc collectors


def replace_term(f, old, new):
    """Replace every occurrence of a ground term (constant/skolem/choice)."""
    def rec(x):
        if x == old:
            return new
        if isinstance(x, TERM_TYPES + PROP_TYPES):
            return x
        if isinstance(x, SetBuilder):
            return SetBuilder(x.var, x.cls, rec(x.body))
        if isinstance(x, (SetVar, SetSkolem, SetConst)):
            return x
        if isinstance(x, (Truth, Falsity)):
            return x
        if isinstance(x, Atom):
            return Atom(x.pred, tuple(rec(a) for a in x.args))
        if isinstance(x, PropApply):
            return PropApply(x.prop, rec(x.arg))
        if isinstance(x, SetApply):
            return SetApply(rec(x.s), x.prop)
        if isinstance(x, InClass):
            return x
        if isinstance(x, PropEq):
            return x
        if isinstance(x, Eq):
            return Eq(rec(x.left), rec(x.right))
        if isinstance(x, Not):
            return mk_not(rec(x.body))
        if isinstance(x, And):
            return mk_and([rec(a) for a in x.args])
        if isinstance(x, Or):
            return mk_or([rec(a) for a in x.args])
        if isinstance(x, Implies):
            return Implies(rec(x.left), rec(x.right))
        if isinstance(x, Iff):
            return Iff(rec(x.left), rec(x.right))
        if isinstance(x, (ForAll, Exists)):
            return type(x)(x.vars, rec(x.body))
        if isinstance(x, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
            return type(x)(x.var, x.cls, rec(x.body))
        if isinstance(x, DefRef):
            return DefRef(x.name, tuple(rec(a) if isinstance(a, TERM_TYPES) else a
                                        for a in x.args))
        raise PetitioError(f"replace_term: unhandled {type(x).__name__}")
    return rec(f)


_skolem_cache = {}


def collect_skolems(x, acc=None, seen=None):
    """Skolem and choice constants, in first-occurrence (pre-order) order."""
    top = acc is None
    if top:
        hit = _skolem_cache.get(x)
        if hit is not None:
            return list(hit)
        acc = []
        seen = set()
    if isinstance(x, (SkolemConst, ChoiceConst)) and x not in seen:
        seen.add(x)
        acc.append(x)
    for child in _children(x):
        collect_skolems(child, acc, seen)
    if top:
        if len(_skolem_cache) > 100000:
            _skolem_cache.clear()
        _skolem_cache[x] = tuple(acc)
    return acc


def collect_prop_skolems(x, acc=None, seen=None):
    if acc is None:
        acc = []
        seen = set()
    if isinstance(x, PropSkolem) and x not in seen:
        seen.add(x)
        acc.append(x)
    for child in _children(x):
        collect_prop_skolems(child, acc, seen)
    return acc


_consts_cache = {}


def collect_consts(x, acc=None, seen=None):
    """Object constants of every flavour, in first-occurrence order."""
    top = acc is None
    if top:
        hit = _consts_cache.get(x)
        if hit is not None:
            return list(hit)
        acc = []
        seen = set()
    if isinstance(x, (Const, SkolemConst, ChoiceConst)) and x not in seen:
        seen.add(x)
        acc.append(x)
    for child in _children(x):
        collect_consts(child, acc, seen)
    if top:
        if len(_consts_cache) > 100000:
            _consts_cache.clear()
        _consts_cache[x] = tuple(acc)
    return acc


def _children(x):
    if isinstance(x, (Var, Const, PropConst, PropVar, PropSkolem, SetVar, SetSkolem,
                      SetConst, Truth, Falsity)):
        return ()
    if isinstance(x, SkolemConst):
        return ()
    if isinstance(x, ChoiceConst):
        return (x.defn,)
    if isinstance(x, SetBuilder):
        return (x.body,)
    if isinstance(x, Atom):
        return x.args
    if isinstance(x, PropApply):
        return (x.prop, x.arg)
    if isinstance(x, SetApply):
        return (x.s, x.prop)
    if isinstance(x, InClass):
        return (x.prop,)
    if isinstance(x, (PropEq, Eq, Implies, Iff)):
        return (x.left, x.right)
    if isinstance(x, Not):
        return (x.body,)
    if isinstance(x, (And, Or)):
        return x.args
    if isinstance(x, (ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
        return (x.body,)
    if isinstance(x, DefRef):
        return x.args
    raise PetitioError(f"children: unhandled {type(x).__name__}")
