"""Independent brute-force semantics used to cross-check the package.

Deliberately separate from petitio.models: models here are dicts of python
sets, evaluation is a direct Tarski recursion, and search is a plain nested
enumeration.  Only the first-order fragment is covered, which is all the
cross-checks need."""
import itertools

from petitio.ast import (
    Var, Const, SkolemConst, ChoiceConst,
    Atom, Eq, Not, And, Or, Implies, Iff, ForAll, Exists, Truth, Falsity, DefRef,
)
from petitio.transforms import expand_all


def o_eval(model, f, env):
    """model: {"n": int, "consts": {name: elem}, "preds": {name: set of tuples}}"""
    if isinstance(f, Truth):
        return True
    if isinstance(f, Falsity):
        return False
    if isinstance(f, Atom):
        return tuple(o_term(model, a, env) for a in f.args) in model["preds"][f.pred]
    if isinstance(f, Eq):
        return o_term(model, f.left, env) == o_term(model, f.right, env)
    if isinstance(f, Not):
        return not o_eval(model, f.body, env)
    if isinstance(f, And):
        return all(o_eval(model, a, env) for a in f.args)
    if isinstance(f, Or):
        return any(o_eval(model, a, env) for a in f.args)
    if isinstance(f, Implies):
        return (not o_eval(model, f.left, env)) or o_eval(model, f.right, env)
    if isinstance(f, Iff):
        return o_eval(model, f.left, env) == o_eval(model, f.right, env)
    if isinstance(f, ForAll):
        names = [n for n, _ in f.vars]
        return all(o_eval(model, f.body, {**env, **dict(zip(names, combo))})
                   for combo in itertools.product(range(model["n"]), repeat=len(names)))
    if isinstance(f, Exists):
        names = [n for n, _ in f.vars]
        return any(o_eval(model, f.body, {**env, **dict(zip(names, combo))})
                   for combo in itertools.product(range(model["n"]), repeat=len(names)))
    raise AssertionError(f"oracle cannot evaluate {type(f).__name__}")


def o_term(model, t, env):
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Const):
        return model["consts"][t.name]
    if isinstance(t, (SkolemConst, ChoiceConst)):
        return model["consts"][t.name]
    raise AssertionError(f"oracle cannot evaluate term {type(t).__name__}")


def o_models(theory, n):
    """Every model of size n over the theory's signature, as oracle dicts."""
    const_names = list(theory.consts)
    pred_sigs = list(theory.preds.items())
    elem = range(n)
    tuple_spaces = []
    for name, sig in pred_sigs:
        cells = list(itertools.product(elem, repeat=len(sig)))
        tuple_spaces.append(cells)
    for const_vals in itertools.product(elem, repeat=len(const_names)):
        for included in _pred_choices(tuple_spaces):
            yield {
                "n": n,
                "consts": dict(zip(const_names, const_vals)),
                "preds": {name: set(ext) for (name, _), ext in zip(pred_sigs, included)},
            }


def _subsets(cells):
    for mask in range(1 << len(cells)):
        yield [c for i, c in enumerate(cells) if mask >> i & 1]


def _pred_choices(tuple_spaces):
    pools = [list(_subsets(cells)) for cells in tuple_spaces]
    return itertools.product(*pools)


def o_find_countermodel(theory, premises, goal, max_n):
    """Exhaustive search for a model of the premises falsifying the goal."""
    targets = [expand_all(theory.formula(p).body, theory, force=True) for p in premises]
    goal_f = expand_all(theory.formula(goal).body if isinstance(goal, str) else goal,
                        theory, force=True)
    for n in range(1, max_n + 1):
        for model in o_models(theory, n):
            if all(o_eval(model, f, {}) for f in targets) and not o_eval(model, goal_f, {}):
                return model
    return None


def o_find_model(theory, premises, max_n):
    targets = [expand_all(theory.formula(p).body, theory, force=True) for p in premises]
    for n in range(1, max_n + 1):
        for model in o_models(theory, n):
            if all(o_eval(model, f, {}) for f in targets):
                return model
    return None
