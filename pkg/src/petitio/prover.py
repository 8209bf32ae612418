"""Bounded automated proving on top of the kernel.

The search is a ground tableau working directly on kernel sequents: every move
is a kernel rule application, so a successful search IS a checkable
derivation.  Universals are instantiated from the branch's ground-constant
pool under an iteratively deepened per-formula budget; property quantifiers
range over declared class members and skolems on the branch; property-set
quantifiers range over the theory's named property sets only (set builders
are never invented -- scripts supply those).
"""
from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass, field, replace

from .ast import (
    TRUE, FALSE,
    Var, Const, SkolemConst, ChoiceConst,
    PropConst, PropVar, PropSkolem,
    SetVar, SetSkolem, SetConst, SetBuilder,
    Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet,
    DefRef, Truth, Falsity,
    Theory, mk_and, mk_or, mk_not,
    PetitioError,
)
from .kernel import (
    Sequent, RuleContext, DerivNode, apply_rule, closure_evidence,
    initial_sequent, obligation_sequent, generalize_sequent, derivation_used_names,
)
from .transforms import (
    nnf, expand_all, canon_key, ac_equal, collect_skolems, collect_prop_skolems,
    subst_obj, free_names, TERM_TYPES, PROP_TYPES,
)

TIME_BUDGET_ENV = "PETITIO_TIME_BUDGET_MS"


class SkolemBudgetExceeded(PetitioError):
    pass


@dataclass(frozen=True)
class Bounds:
    max_tableau_depth: int = 12
    max_quantifier_instantiations_per_formula: int = 4
    max_property_subsets: int = 256
    time_budget_ms: int = 5000

    def __post_init__(self):
        for f in (self.max_tableau_depth, self.max_quantifier_instantiations_per_formula,
                  self.max_property_subsets, self.time_budget_ms):
            if f <= 0:
                raise PetitioError("all bounds must be positive")

    @classmethod
    def default(cls) -> "Bounds":
        ms = os.environ.get(TIME_BUDGET_ENV)
        if ms:
            return cls(time_budget_ms=int(ms))
        return cls()

    @classmethod
    def parse_overrides(cls, text: str, base: "Bounds") -> "Bounds":
        """`auto` command overrides: depth=N inst=N time_ms=N subsets=N."""
        if not text.strip():
            return base
        kw = {}
        names = {"depth": "max_tableau_depth",
                 "inst": "max_quantifier_instantiations_per_formula",
                 "subsets": "max_property_subsets",
                 "time_ms": "time_budget_ms"}
        for part in text.split():
            key, _, val = part.partition("=")
            if key not in names:
                raise PetitioError(f"unknown auto option {key!r}")
            kw[names[key]] = int(val)
        return replace(base, **kw)


@dataclass(frozen=True)
class RoutineConfig:
    """What counts as routine deduction before the indirect-begging comparison."""
    skolemize: bool = True
    expand_transparent_defs: bool = True
    prop_simplify: bool = True
    forced_instantiation: bool = True
    try_skolem_instantiations: bool = False

    @classmethod
    def forced_only(cls) -> "RoutineConfig":
        return cls()

    @classmethod
    def try_skolems(cls) -> "RoutineConfig":
        return cls(try_skolem_instantiations=True)


@dataclass
class Verdict:
    kind: str  # "proved" | "countermodel" | "unknown"
    derivation: object = None  # DerivNode for the goal
    obligation_derivations: tuple = ()  # (constant, DerivNode) pairs
    script: object = None  # commands, for script-proved goals
    model: object = None  # FiniteModel for countermodels
    bounds: object = None
    cited_lemmas: tuple = ()
    note: str = ""

    PROVED = "proved"
    COUNTERMODEL = "countermodel"
    UNKNOWN = "unknown"

    @property
    def proved(self) -> bool:
        return self.kind == Verdict.PROVED

    @classmethod
    def proved_auto(cls, derivation, obligations=(), bounds=None):
        return cls(cls.PROVED, derivation=derivation,
                   obligation_derivations=tuple(obligations), bounds=bounds)

    @classmethod
    def proved_script(cls, state, script):
        obligations = tuple((ob.constant, ob.node) for ob in state.obligations)
        return cls(cls.PROVED, derivation=state.roots[0],
                   obligation_derivations=obligations, script=tuple(script),
                   cited_lemmas=tuple(sorted(state.cited_lemmas)))

    @classmethod
    def countermodel(cls, model, bounds=None):
        return cls(cls.COUNTERMODEL, model=model, bounds=bounds)

    @classmethod
    def unknown(cls, bounds, note=""):
        return cls(cls.UNKNOWN, bounds=bounds, note=note)

    def to_json(self):
        out = {"verdict": self.kind}
        if self.note:
            out["note"] = self.note
        if self.model is not None:
            out["model"] = self.model.to_json()
        if self.cited_lemmas:
            out["cited_lemmas"] = list(self.cited_lemmas)
        if self.kind == self.PROVED and self.derivation is not None:
            out["derivation_size"] = self.derivation.size()
        return out


# ---------------------------------------------------------------------------
# candidate pools


def _object_pool(theory: Theory, seq: Sequent, sort: str):
    """Ground constants of the sort occurring on the branch: declared constants
    first (declaration order), then skolem/choice constants by occurrence."""
    from .transforms import collect_consts
    occurring = []
    seen = set()
    for f in seq.ants + seq.succs:
        for c in collect_consts(f):
            if c.sort == sort and c not in seen:
                seen.add(c)
                occurring.append(c)
    pool = [Const(n, s) for n, s in theory.consts.items()
            if s == sort and Const(n, s) in seen]
    pool += [c for c in occurring if not isinstance(c, Const)]
    return pool


def _prop_pool(theory: Theory, seq: Sequent, cls: str):
    c = theory.classes[cls]
    pool = [PropConst(m, c.elem_sort) for m in c.members]
    seen = set(pool)
    for f in seq.ants + seq.succs:
        for p in _prop_terms(f):
            if isinstance(p, PropSkolem) and p.cls == cls and p not in seen:
                seen.add(p)
                pool.append(p)
            elif isinstance(p, PropConst) and p.sort == c.elem_sort and p not in seen:
                seen.add(p)
                pool.append(p)
    return pool


def _set_pool(theory: Theory, seq: Sequent, cls: str):
    pool = [SetConst(n, d.body.cls) for n, d in theory.defs.items()
            if d.is_propset and d.body.cls == cls]
    seen = set(pool)
    for f in seq.ants + seq.succs:
        for s in _set_terms(f):
            if isinstance(s, SetSkolem) and s.cls == cls and s not in seen:
                seen.add(s)
                pool.append(s)
    return pool


def _live_children(x):
    """Children of a live sequent formula; a choice constant's stored defining
    formula is bookkeeping, not part of the sequent."""
    from .transforms import _children
    if isinstance(x, ChoiceConst):
        return ()
    return _children(x)


_prop_terms_cache = {}
_set_terms_cache = {}


def _prop_terms(x):
    hit = _prop_terms_cache.get(x)
    if hit is not None:
        return hit
    acc = []
    _prop_terms_scan(x, acc)
    if len(_prop_terms_cache) > 100000:
        _prop_terms_cache.clear()
    _prop_terms_cache[x] = acc
    return acc


def _prop_terms_scan(x, acc):
    if isinstance(x, PROP_TYPES):
        acc.append(x)
        return
    for c in _live_children(x):
        _prop_terms_scan(c, acc)


def _set_terms(x):
    hit = _set_terms_cache.get(x)
    if hit is not None:
        return hit
    acc = []
    _set_terms_scan(x, acc)
    if len(_set_terms_cache) > 100000:
        _set_terms_cache.clear()
    _set_terms_cache[x] = acc
    return acc


def _set_terms_scan(x, acc):
    if isinstance(x, (SetVar, SetSkolem, SetConst)):
        acc.append(x)
        return
    if isinstance(x, SetBuilder):
        _set_terms_scan(x.body, acc)
        return
    for c in _live_children(x):
        _set_terms_scan(c, acc)


def _fresh_const(counters, sort) -> SkolemConst:
    k = counters.get(sort, 0) + 1
    counters[sort] = k
    return SkolemConst(sort, k, sort)


# ---------------------------------------------------------------------------
# literal matching (the "forced instantiation" notion)


def _polarity_literals(f, pol=True, acc=None):
    """Top-level literals of a formula with their NNF-sense polarity.
    Literals inside an Iff get polarity None (they match either way).
    Quantified subformulas contribute nothing."""
    if acc is None:
        acc = []
    if isinstance(f, Not):
        _polarity_literals(f.body, not pol, acc)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _polarity_literals(a, pol, acc)
    elif isinstance(f, Implies):
        _polarity_literals(f.left, not pol, acc)
        _polarity_literals(f.right, pol, acc)
    elif isinstance(f, Iff):
        for side in (f.left, f.right):
            for lit, _ in _polarity_literals(side, True, []):
                acc.append((lit, None))
    elif isinstance(f, (Atom, PropApply, SetApply, InClass, PropEq, Eq, DefRef)):
        acc.append((f, pol))
    # quantifiers, TRUE, FALSE: no literals
    return acc


def _branch_literals(seq: Sequent):
    """(atom, from_succedent) for every atomic formula on the branch."""
    out = []
    for a in seq.ants:
        g = a
        neg = False
        while isinstance(g, Not):
            g = g.body
            neg = not neg
        if isinstance(g, (Atom, PropApply, SetApply, InClass, PropEq, Eq, DefRef)):
            out.append((g, neg))  # Not(A) on the left behaves like A on the right
    for s in seq.succs:
        g = s
        neg = False
        while isinstance(g, Not):
            g = g.body
            neg = not neg
        if isinstance(g, (Atom, PropApply, SetApply, InClass, PropEq, Eq, DefRef)):
            out.append((g, not neg))
    return out


def _unify_literal(pat, tgt, binders):
    """One-sided match of a quantifier-matrix literal against a ground branch
    literal.  `binders` maps binder var name -> kind ("obj"/"prop").  Returns a
    binding dict or None."""
    bind = {}

    def walk_term(p, t):
        if isinstance(p, Var) and p.name in binders:
            prev = bind.get(p.name)
            if prev is not None:
                return prev == t
            if not isinstance(t, TERM_TYPES) or isinstance(t, Var):
                return False
            bind[p.name] = t
            return True
        return p == t

    def walk_prop(p, t):
        if isinstance(p, PropVar) and p.name in binders:
            prev = bind.get(p.name)
            if prev is not None:
                return prev == t
            if isinstance(t, PropVar):
                return False
            bind[p.name] = t
            return True
        return p == t

    if isinstance(pat, Atom) and isinstance(tgt, Atom):
        if pat.pred != tgt.pred or len(pat.args) != len(tgt.args):
            return None
        return bind if all(walk_term(p, t) for p, t in zip(pat.args, tgt.args)) else None
    if isinstance(pat, PropApply) and isinstance(tgt, Atom) and len(tgt.args) == 1:
        if walk_prop(pat.prop, PropConst(tgt.pred, _term_sort_of(tgt.args[0]))) and \
                walk_term(pat.arg, tgt.args[0]):
            return bind
        return None
    if isinstance(pat, PropApply) and isinstance(tgt, PropApply):
        if walk_prop(pat.prop, tgt.prop) and walk_term(pat.arg, tgt.arg):
            return bind
        return None
    if isinstance(pat, Eq) and isinstance(tgt, Eq):
        if walk_term(pat.left, tgt.left) and walk_term(pat.right, tgt.right):
            return bind
        return None
    if isinstance(pat, PropEq) and isinstance(tgt, PropEq):
        if walk_prop(pat.left, tgt.left) and walk_prop(pat.right, tgt.right):
            return bind
        return None
    if isinstance(pat, InClass) and isinstance(tgt, InClass):
        if pat.cls == tgt.cls and walk_prop(pat.prop, tgt.prop):
            return bind
        return None
    if isinstance(pat, DefRef) and isinstance(tgt, DefRef):
        if pat.name != tgt.name or len(pat.args) != len(tgt.args):
            return None
        ok = True
        for p, t in zip(pat.args, tgt.args):
            if isinstance(p, TERM_TYPES):
                ok = ok and walk_term(p, t)
            elif isinstance(p, PROP_TYPES):
                ok = ok and walk_prop(p, t)
            else:
                ok = ok and p == t
        return bind if ok else None
    return None


def _term_sort_of(t):
    return t.sort


def _matched_bindings(theory, seq, quant, side, branch=None):
    """Complete bindings for an object quantifier suggested by branch literals."""
    if isinstance(quant, (ForAll, Exists)):
        binders = {n: "obj" for n, _ in quant.vars}
        matrix = quant.body
        while isinstance(matrix, (ForAll, Exists)) and type(matrix) is type(quant):
            for n, _ in matrix.vars:
                binders[n] = "obj"
            matrix = matrix.body
        var_list = list(binders)
    elif isinstance(quant, (ForAllProp, ExistsProp)):
        binders = {quant.var: "prop"}
        matrix = quant.body
        var_list = [quant.var]
    else:
        return []
    lits = _polarity_literals(matrix)
    if branch is None:
        branch = _branch_literals(seq)
    ant_side = side == "a"
    per_literal = []
    for lit, pol in lits:
        matches = []
        for b, from_succ in branch:
            if pol is not None:
                want_succ = pol if ant_side else not pol
                if from_succ != want_succ:
                    continue
            m = _unify_literal(lit, b, binders)
            if m is not None and m not in matches:
                matches.append(m)
        if matches:
            per_literal.append(matches)
    combos = [{}]
    for matches in per_literal:
        new = []
        for c in combos:
            for m in matches:
                if all(c.get(k, v) == v for k, v in m.items()):
                    merged = dict(c)
                    merged.update(m)
                    if merged not in new:
                        new.append(merged)
            if c not in new:
                new.append(c)  # a literal may also go unused
        combos = new
        if len(combos) > 64:
            break
    complete = []
    for c in combos:
        if all(v in c for v in var_list):
            key = tuple(c[v] for v in var_list)
            if key not in complete:
                complete.append(key)
    return complete


# ---------------------------------------------------------------------------
# tableau search


class _Search:
    def __init__(self, ctx: RuleContext, bounds: Bounds, gamma_filter=None):
        self.ctx = ctx
        self.bounds = bounds
        self.counters = {}
        self.deadline = time.monotonic() + bounds.time_budget_ms / 1000.0
        self.ops = 0
        self.ops_cap = 60000
        self.gamma_filter = gamma_filter
        self.failed = set()  # memo of unclosable subproblems at this level

    def tick(self):
        self.ops += 1
        if self.ops % 256 == 0 and time.monotonic() > self.deadline:
            raise _OutOfTime(hard=True)
        if self.ops > self.ops_cap:
            raise _OutOfTime(hard=False)

    def fresh_skolem(self, base, sort):
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        return SkolemConst(base, k, sort)

    def fresh_prop_skolem(self, base, cls):
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        return PropSkolem(base, k, cls)

    def fresh_set_skolem(self, base, cls):
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        return SetSkolem(base, k, cls)


class _OutOfTime(Exception):
    def __init__(self, hard=True):
        super().__init__()
        self.hard = hard


def close_sequent(ctx: RuleContext, seq: Sequent, bounds: Bounds, gamma_filter=None):
    """Closed derivation for the sequent, or None within bounds.  Deterministic
    up to the wall-clock budget; early deepening levels get a bounded slice of
    the effort so exhaustive failure there cannot starve deeper levels."""
    search = _Search(ctx, bounds, gamma_filter)
    for f in seq.ants + seq.succs:
        for sk in collect_skolems(f):
            if isinstance(sk, SkolemConst):
                search.counters[sk.base] = max(search.counters.get(sk.base, 0), sk.index)
        for sk in collect_prop_skolems(f):
            search.counters[sk.base] = max(search.counters.get(sk.base, 0), sk.index)
        for st in _set_terms(f):
            if isinstance(st, SetSkolem):
                search.counters[st.base] = max(search.counters.get(st.base, 0), st.index)
    max_level = bounds.max_quantifier_instantiations_per_formula
    for level in range(1, max_level + 1):
        search.ops = 0
        search.failed = set()
        search.ops_cap = min(80000, 6000 * 4 ** (level - 1))
        try:
            node = _close(search, seq, level, {}, 0)
        except _OutOfTime as e:
            if e.hard:
                return None
            continue
        if node is not None:
            return node
        if time.monotonic() > search.deadline:
            return None
    return None


def _memo_key(seq: Sequent, used: dict):
    budget = tuple(sorted((hash(f), len(insts)) for f, insts in used.items() if insts))
    return (frozenset(seq.ants), frozenset(seq.succs), budget)


def _close(search: _Search, seq: Sequent, level: int, used: dict, depth: int):
    search.tick()
    ctx = search.ctx
    key = _memo_key(seq, used)
    if key in search.failed:
        return None
    node = _close_inner(search, seq, level, used, depth)
    if node is None:
        search.failed.add(key)
    return node


def _close_inner(search: _Search, seq: Sequent, level: int, used: dict, depth: int):
    ctx = search.ctx
    node = DerivNode(seq)

    if closure_evidence(seq) is not None:
        node.apply(ctx, "close", ())
        return node

    move = _alpha_move(ctx, seq)
    if move is not None:
        rule, args = move
        kids = node.apply(ctx, rule, args)
        sub = _close(search, kids[0].sequent, level, used, depth)
        if sub is None:
            return None
        node.children = [sub]
        return node

    name = _expand_move(ctx, seq)
    if name is not None:
        kids = node.apply(ctx, "expand", (name,))
        sub = _close(search, kids[0].sequent, level, used, depth)
        if sub is None:
            return None
        node.children = [sub]
        return node

    move = _delta_move(search, seq)
    if move is not None:
        rule, args = move
        kids = node.apply(ctx, rule, args)
        sub = _close(search, kids[0].sequent, level, used, depth)
        if sub is None:
            return None
        node.children = [sub]
        return node

    move = _beta_move(ctx, seq)
    if move is not None:
        if depth >= search.bounds.max_tableau_depth:
            return None
        rule, args = move
        kids = node.apply(ctx, rule, args)
        subs = []
        for kid in kids:
            branch_used = {k: set(v) for k, v in used.items()}
            sub = _close(search, kid.sequent, level, branch_used, depth + 1)
            if sub is None:
                return None
            subs.append(sub)
        node.children = subs
        return node

    moves = _gamma_moves(search, seq, level, used)
    moves.sort(key=lambda m: not m[4])  # stable: literal-matched moves first
    for rule, args, formula, instance, _pref in moves:
        search.tick()
        attempt = DerivNode(seq)
        kids = attempt.apply(ctx, rule, args)
        child_used = {k: set(v) for k, v in used.items()}
        child_used.setdefault(formula, set()).add(instance)
        sub = _close(search, kids[0].sequent, level, child_used, depth)
        if sub is not None:
            attempt.children = [sub]
            return attempt
    return None


def _alpha_move(ctx, seq: Sequent):
    for i, a in enumerate(seq.ants):
        idx = -(i + 1)
        if isinstance(a, Not):
            return ("not_l", (idx,))
        if isinstance(a, And):
            return ("and_l", (idx,))
    for j, s in enumerate(seq.succs):
        idx = j + 1
        if isinstance(s, Not):
            return ("not_r", (idx,))
        if isinstance(s, Or):
            return ("or_r", (idx,))
        if isinstance(s, Implies):
            return ("imp_r", (idx,))
    return None


def _expand_move(ctx, seq: Sequent):
    """Bool definitions expand when exposed at the top of a formula; property-set
    definitions expand wherever they occur (they are inert term leaves)."""
    theory = ctx.theory
    for f in seq.ants + seq.succs:
        if isinstance(f, DefRef):
            d = theory.defs.get(f.name)
            if d is not None and not d.opaque and f.name not in ctx.opaque:
                return f.name
    for f in seq.ants + seq.succs:
        for s in _set_terms(f):
            if isinstance(s, SetConst):
                d = theory.defs.get(s.name)
                if d is not None and not d.opaque and s.name not in ctx.opaque:
                    return s.name
    return None


def _delta_move(search: _Search, seq: Sequent):
    for i, a in enumerate(seq.ants):
        idx = -(i + 1)
        if isinstance(a, Exists):
            sks = tuple(search.fresh_skolem(n, s) for n, s in a.vars)
            return ("exists_l", (idx, sks))
        if isinstance(a, ExistsProp):
            return ("existsp_l", (idx, search.fresh_prop_skolem(a.var, a.cls)))
        if isinstance(a, ExistsSet):
            return ("existss_l", (idx, search.fresh_set_skolem(a.var, a.cls)))
    for j, s in enumerate(seq.succs):
        idx = j + 1
        if isinstance(s, ForAll):
            sks = tuple(search.fresh_skolem(n, srt) for n, srt in s.vars)
            return ("forall_r", (idx, sks))
        if isinstance(s, ForAllProp):
            return ("forallp_r", (idx, search.fresh_prop_skolem(s.var, s.cls)))
        if isinstance(s, ForAllSet):
            return ("foralls_r", (idx, search.fresh_set_skolem(s.var, s.cls)))
    return None


def _beta_move(ctx, seq: Sequent):
    for i, a in enumerate(seq.ants):
        idx = -(i + 1)
        if isinstance(a, Or):
            return ("or_l", (idx,))
        if isinstance(a, Implies):
            return ("imp_l", (idx,))
        if isinstance(a, Iff):
            return ("iff_l", (idx,))
    for j, s in enumerate(seq.succs):
        idx = j + 1
        if isinstance(s, And):
            return ("and_r", (idx,))
        if isinstance(s, Iff):
            return ("iff_r", (idx,))
    return None


def _gamma_moves(search: _Search, seq: Sequent, level: int, used: dict):
    """All allowed instantiations of universal-strength quantifiers, appended
    with keep=True; instances count against a per-formula budget."""
    theory = search.ctx.theory
    moves = []
    branch = _branch_literals(seq)
    for side, formulas in (("a", seq.ants), ("s", seq.succs)):
        for pos, f in enumerate(formulas):
            idx = -(pos + 1) if side == "a" else pos + 1
            if side == "a" and isinstance(f, ForAll) or side == "s" and isinstance(f, Exists):
                # one binder at a time: budgets stay linear in the pool
                sort = f.vars[0][1]
                pool = _object_pool(theory, seq, sort)
                if not pool:
                    pool = [search.fresh_skolem(sort, sort)]
                cands = [(c,) for c in pool]
                rule = "forall_l" if side == "a" else "exists_r"
                moves.extend(_budgeted(search, seq, side, f, idx, rule, cands, level,
                                       used, branch))
            elif side == "a" and isinstance(f, ForAllProp) or \
                    side == "s" and isinstance(f, ExistsProp):
                pool = _prop_pool(theory, seq, f.cls)
                rule = "forallp_l" if side == "a" else "existsp_r"
                moves.extend(_budgeted(search, seq, side, f, idx, rule,
                                       [(p,) for p in pool], level, used, branch))
            elif side == "a" and isinstance(f, ForAllSet) or \
                    side == "s" and isinstance(f, ExistsSet):
                pool = _set_pool(theory, seq, f.cls)
                rule = "foralls_l" if side == "a" else "existss_r"
                moves.extend(_budgeted(search, seq, side, f, idx, rule,
                                       [(s,) for s in pool], level, used, branch))
    return moves


def _budgeted(search, seq, side, f, idx, rule, cands, level, used, branch):
    done = used.get(f, set())
    budget = level - len(done)
    if budget <= 0:
        return []
    if search.gamma_filter is not None:
        cands = [(c, True) for c in
                 search.gamma_filter(search.ctx.theory, seq, f, side, cands)]
    else:
        cands = _prioritize(search.ctx.theory, seq, f, side, cands, branch)
    out = []
    for cand, preferred in cands:
        if cand in done:
            continue
        if len(out) >= budget:
            break
        inst = cand if rule in ("forall_l", "exists_r") else cand[0]
        out.append((rule, (idx, inst, True), f, cand, preferred))
    return out


def _prioritize(theory, seq, f, side, cands, branch=None):
    """Literal-suggested instances first (flagged True); the rest keep pool order."""
    matched = _matched_bindings(theory, seq, f, side, branch)
    preferred = []
    for m in matched:
        key = (m[0],)
        if key in cands and key not in preferred:
            preferred.append(key)
    return [(c, True) for c in preferred] + \
        [(c, False) for c in cands if c not in preferred]


def forced_gamma_filter(theory, seq, f, side, cands):
    """Restrict instantiation to bindings suggested by existing branch
    literals (the routine-deduction reading of a forced step).  Candidates
    instantiate the first binder, so only first components are compared."""
    matched = _matched_bindings(theory, seq, f, side)
    heads = {m[0] for m in matched}
    return [cand for cand in cands if cand[0] in heads]


# ---------------------------------------------------------------------------
# propositional simplification (invertible saturation, closing what closes)


def prop_simplify_node(ctx: RuleContext, node: DerivNode):
    seq = node.sequent
    if closure_evidence(seq) is not None:
        node.apply(ctx, "close", ())
        return
    move = _alpha_move(ctx, seq)
    if move is None:
        move = _beta_move(ctx, seq)
    if move is None:
        return
    rule, args = move
    kids = node.apply(ctx, rule, args)
    for kid in kids:
        prop_simplify_node(ctx, kid)


def prop_simplify(ctx: RuleContext, seq: Sequent):
    """Saturate propositional rules; returns (open leaf sequents, branched flag).
    Soundness is preserved: only invertible rules are applied."""
    node = DerivNode(seq)
    prop_simplify_node(ctx, node)
    leaves = [n.sequent for n in node.open_leaves()]
    return leaves, len(leaves) > 1, node


def skolemize(f, polarity=True, counters=None):
    """Strip the outermost existential (positive) or universal (negative)
    object-quantifier block, replacing binders by fresh skolem constants."""
    if counters is None:
        counters = {}
    want = Exists if polarity else ForAll
    out = f
    while isinstance(out, want):
        mapping = {}
        for n, s in out.vars:
            k = counters.get(n, 0) + 1
            counters[n] = k
            mapping[n] = SkolemConst(n, k, s)
        out = subst_obj(out.body, mapping)
    return out


# ---------------------------------------------------------------------------
# proving


def prove(theory: Theory, premises, goal, bounds=None, *, opaque=frozenset(),
          discharge_descriptions=True, countermodel_max_n=3,
          semantics="declared", extra_premises=()) -> Verdict:
    """Bounded proof attempt; falls back to finite countermodel search.

    `premises` is a collection of named-formula names; `goal` is a name or a
    closed Formula; `extra_premises` are additional closed formulas installed
    on the left (weak-begging augmentations).  Description constants' defining
    axioms are ambient; their exists-unique obligations are re-proved here only
    when `discharge_descriptions` is set (theory-acceptance semantics
    otherwise).
    """
    from . import models

    if bounds is None:
        bounds = Bounds.default()
    premise_names = frozenset(premises)
    for n in premise_names:
        theory.formula(n)
    goal_f = theory.formula(goal).body if isinstance(goal, str) else goal
    ctx = RuleContext(theory, premise_names, frozenset(opaque))
    root_seq = initial_sequent(theory, premise_names, goal_f)
    if extra_premises:
        root_seq = Sequent(root_seq.ants + tuple(extra_premises), root_seq.succs)

    premise_formulas = [theory.formulas[n].body for n in theory.formulas
                        if n in premise_names] + list(extra_premises)
    # a small countermodel settles invalid goals before any search effort; the
    # cap keeps this race cheap, larger spaces wait for the bounded search
    try:
        quick = models.find_countermodel_formulas(
            theory, premise_formulas, goal_f, countermodel_max_n,
            semantics=semantics, cap=60000)
    except models.SearchSpaceExceeded:
        quick = None
    if quick is not None:
        return Verdict.countermodel(quick, bounds)

    node = close_sequent(ctx, root_seq, bounds)

    obligation_note = ""
    oblig_derivs = []
    if node is not None and discharge_descriptions:
        for cname in theory.descriptions:
            oseq = obligation_sequent(theory, cname)
            oants = list(oseq.ants)
            for name in theory.formulas:
                if name in premise_names:
                    oants.append(theory.formulas[name].body)
            oseq = Sequent(tuple(oants), oseq.succs)
            onode = close_sequent(ctx, oseq, bounds)
            if onode is None:
                obligation_note = f"description obligation for {cname!r} not discharged"
                node = None
                break
            oblig_derivs.append((cname, onode))

    if node is not None:
        return Verdict.proved_auto(node, oblig_derivs, bounds)

    try:
        model = models.find_countermodel_formulas(
            theory, premise_formulas, goal_f, countermodel_max_n, semantics=semantics)
    except models.SearchSpaceExceeded:
        model = None
    if model is not None:
        return Verdict.countermodel(model, bounds)
    return Verdict.unknown(bounds, note=obligation_note or "bounds exhausted")


def discharge_theory_obligations(theory: Theory, bounds=None, *, opaque=frozenset()):
    """Theory-acceptance check: prove each description obligation from the
    axioms, and identify the essential premises by leave-one-out re-proving
    (a premise is essential when the remainder has a countermodel, or at least
    no proof within a short budget).  Returns {constant: (verdict, essential)}."""
    from . import models

    if bounds is None:
        bounds = Bounds.default()
    short = replace(bounds, time_budget_ms=min(bounds.time_budget_ms, 1500))
    out = {}
    axioms = theory.axiom_names()
    ctx = RuleContext(theory, frozenset(axioms), frozenset(opaque))
    for cname in theory.descriptions:
        base = obligation_sequent(theory, cname)
        goal_f = base.succs[0]

        def with_premises(names):
            ants = list(base.ants)
            for n in theory.formulas:
                if n in names:
                    ants.append(theory.formulas[n].body)
            return Sequent(tuple(ants), base.succs)

        node = close_sequent(ctx, with_premises(set(axioms)), bounds)
        if node is None:
            out[cname] = (Verdict.unknown(bounds, note="obligation not discharged"), frozenset())
            continue
        essential = set()
        for n in axioms:
            rest = set(axioms) - {n}
            try:
                cm = models.find_model_formulas(
                    theory, [theory.formulas[m].body for m in rest], 2,
                    falsify=goal_f, include_implicit=False)
            except models.SearchSpaceExceeded:
                cm = None
            if cm is not None:
                essential.add(n)
                continue
            if close_sequent(ctx, with_premises(rest), short) is None:
                essential.add(n)
        out[cname] = (Verdict.proved_auto(node, bounds=bounds), frozenset(essential))
    return out


# ---------------------------------------------------------------------------
# routine normalization


@dataclass
class _World:
    seq: Sequent
    counters: dict
    used_try: bool
    trace: list


@dataclass
class RoutineResult:
    leaves: list  # residual Sequents, all worlds, closed ones dropped
    used_try_skolems: bool
    branched: bool
    worlds: int
    trace: list = field(default_factory=list)

    @property
    def branching(self):
        return len(self.leaves)


def routine_normalize(theory: Theory, premises, goal, cfg: RoutineConfig = None, *,
                      opaque=frozenset(), max_worlds=64) -> RoutineResult:
    """Residual sequents after the routine steps: negate the goal, install the
    premises, skolemize, expand transparent definitions, propositionally
    simplify, and apply forced instantiations (instantiation replaces the
    quantifier, as in interactive-prover `inst`).  Under
    `try_skolem_instantiations`, witness choices branch into worlds."""
    if cfg is None:
        cfg = RoutineConfig.forced_only()
    premise_names = frozenset(premises)
    goal_f = theory.formula(goal).body if isinstance(goal, str) else goal
    ctx = RuleContext(theory, premise_names, frozenset(opaque))
    seq = initial_sequent(theory, premise_names, goal_f)
    counters = {}
    worlds = [_World(seq, counters, False, [])]
    finished = []
    used_try = False
    branched = False
    guard = 0
    while worlds:
        guard += 1
        if guard > 4000:
            raise PetitioError("routine normalization did not terminate")
        w = worlds.pop(0)
        seq = w.seq
        if closure_evidence(seq) is not None:
            continue
        move = _alpha_move(ctx, seq) if cfg.prop_simplify else None
        if move:
            w.seq = apply_rule(ctx, seq, *move)[0]
            w.trace.append(move[0])
            worlds.insert(0, w)
            continue
        if cfg.skolemize:
            move = _routine_delta(w, seq)
            if move:
                w.seq = apply_rule(ctx, seq, *move)[0]
                w.trace.append(move[0])
                worlds.insert(0, w)
                continue
        if cfg.expand_transparent_defs:
            name = _expand_move(ctx, seq)
            if name:
                w.seq = apply_rule(ctx, seq, "expand", (name,))[0]
                w.trace.append(f"expand {name}")
                worlds.insert(0, w)
                continue
        if cfg.prop_simplify:
            move = _beta_move(ctx, seq)
            if move:
                kids = apply_rule(ctx, seq, *move)
                if len(kids) > 1:
                    branched = True
                for kid in kids:
                    worlds.insert(0, _World(kid, dict(w.counters), w.used_try,
                                            w.trace + [move[0]]))
                continue
        if cfg.forced_instantiation:
            # with try-mode on, succedent witnesses branch below instead
            move = _forced_move(theory, seq, ant_only=cfg.try_skolem_instantiations)
            if move:
                rule, args, desc = move
                w.seq = apply_rule(ctx, seq, rule, args)[0]
                w.trace.append(desc)
                worlds.insert(0, w)
                continue
        if cfg.try_skolem_instantiations and len(finished) + len(worlds) < max_worlds:
            split = _try_split(theory, seq)
            if split:
                rule, idx, cands, f = split
                used_try = True
                for cand in cands:
                    inst = cand if rule in ("forall_l", "exists_r") else cand[0]
                    kid = apply_rule(ctx, seq, rule, (idx, inst, False))[0]
                    desc = f"{rule} {idx} (tried)"
                    worlds.append(_World(kid, dict(w.counters), True, w.trace + [desc]))
                continue
        finished.append(w)
    leaves = [w.seq for w in finished]
    traces = [w.trace for w in finished]
    return RoutineResult(leaves=leaves, used_try_skolems=used_try,
                         branched=branched, worlds=len(finished), trace=traces)


def _routine_delta(w: _World, seq: Sequent):
    for i, a in enumerate(seq.ants):
        idx = -(i + 1)
        if isinstance(a, Exists):
            sks = tuple(_w_fresh(w, n, s) for n, s in a.vars)
            return ("exists_l", (idx, sks))
        if isinstance(a, ExistsProp):
            return ("existsp_l", (idx, _w_fresh_prop(w, a.var, a.cls)))
    for j, s in enumerate(seq.succs):
        idx = j + 1
        if isinstance(s, ForAll):
            sks = tuple(_w_fresh(w, n, srt) for n, srt in s.vars)
            return ("forall_r", (idx, sks))
        if isinstance(s, ForAllProp):
            return ("forallp_r", (idx, _w_fresh_prop(w, s.var, s.cls)))
    return None


def _w_fresh(w: _World, base, sort):
    k = w.counters.get(base, 0) + 1
    w.counters[base] = k
    return SkolemConst(base, k, sort)


def _w_fresh_prop(w: _World, base, cls):
    k = w.counters.get(base, 0) + 1
    w.counters[base] = k
    return PropSkolem(base, k, cls)


def _forced_move(theory, seq: Sequent, ant_only=False):
    """The unique-binding instantiation, if any quantifier has exactly one."""
    sides = (("a", seq.ants),) if ant_only else (("a", seq.ants), ("s", seq.succs))
    for side, formulas in sides:
        for pos, f in enumerate(formulas):
            idx = -(pos + 1) if side == "a" else pos + 1
            if side == "a" and isinstance(f, ForAll) or side == "s" and isinstance(f, Exists):
                matched = _matched_bindings(theory, seq, f, side)
                if len(matched) == 1:
                    rule = "forall_l" if side == "a" else "exists_r"
                    return (rule, (idx, matched[0], False),
                            f"{rule} {idx} forced")
            elif side == "a" and isinstance(f, ForAllProp) or \
                    side == "s" and isinstance(f, ExistsProp):
                matched = _matched_bindings(theory, seq, f, side)
                if len(matched) == 1:
                    rule = "forallp_l" if side == "a" else "existsp_r"
                    return (rule, (idx, matched[0][0], False),
                            f"{rule} {idx} forced")
    return None


def _try_split(theory, seq: Sequent):
    """First quantifier with pool candidates, for try-skolem world branching."""
    for side, formulas in (("a", seq.ants), ("s", seq.succs)):
        for pos, f in enumerate(formulas):
            idx = -(pos + 1) if side == "a" else pos + 1
            if side == "a" and isinstance(f, ForAll) or side == "s" and isinstance(f, Exists):
                pool = _object_pool(theory, seq, f.vars[0][1])
                if pool:
                    cands = [tuple(c) for c in itertools.product(pool, repeat=len(f.vars))]
                    rule = "forall_l" if side == "a" else "exists_r"
                    return (rule, idx, cands, f)
            elif side == "a" and isinstance(f, ForAllProp) or \
                    side == "s" and isinstance(f, ExistsProp):
                pool = _prop_pool(theory, seq, f.cls)
                if pool:
                    rule = "forallp_l" if side == "a" else "existsp_r"
                    return (rule, idx, [(p,) for p in pool], f)
    return None


# ---------------------------------------------------------------------------
# tiered equivalence


@dataclass(frozen=True)
class EquivResult:
    tier: str  # "equal" | "fold_expand" | "prop" | "not_equivalent"
    witness: object = None

    EQUAL = "equal"
    FOLD_EXPAND = "fold_expand"
    PROP = "prop"
    NOT_EQUIVALENT = "not_equivalent"

    @property
    def equivalent(self):
        return self.tier != EquivResult.NOT_EQUIVALENT

    def at_most_fold_expand(self):
        return self.tier in (EquivResult.EQUAL, EquivResult.FOLD_EXPAND)


def equiv_up_to(f, g, theory: Theory) -> EquivResult:
    """Tiered equivalence: (1) alpha/AC equality after NNF; (2) the same after
    expanding all transparent definitions; (3) propositional tautology of
    f <=> g with quantified subformulas as alpha-normalized atoms."""
    if ac_equal(f, g):
        return EquivResult(EquivResult.EQUAL)
    fe = expand_all(f, theory)
    ge = expand_all(g, theory)
    if ac_equal(fe, ge):
        return EquivResult(EquivResult.FOLD_EXPAND)
    ok, witness = _prop_equiv(nnf(fe), nnf(ge))
    if ok:
        return EquivResult(EquivResult.PROP)
    return EquivResult(EquivResult.NOT_EQUIVALENT, witness=witness)


def _prop_skeleton_atoms(f, atoms):
    if isinstance(f, (And, Or)):
        for a in f.args:
            _prop_skeleton_atoms(a, atoms)
    elif isinstance(f, Not):
        _prop_skeleton_atoms(f.body, atoms)
    elif isinstance(f, (Implies, Iff)):
        _prop_skeleton_atoms(f.left, atoms)
        _prop_skeleton_atoms(f.right, atoms)
    elif isinstance(f, (Truth, Falsity)):
        pass
    else:
        key = canon_key(f, nnf_first=False, ac=True, permute=True)
        if key not in atoms:
            atoms[key] = len(atoms)


def _prop_eval(f, atoms, assign):
    if isinstance(f, Truth):
        return True
    if isinstance(f, Falsity):
        return False
    if isinstance(f, And):
        return all(_prop_eval(a, atoms, assign) for a in f.args)
    if isinstance(f, Or):
        return any(_prop_eval(a, atoms, assign) for a in f.args)
    if isinstance(f, Not):
        return not _prop_eval(f.body, atoms, assign)
    if isinstance(f, Implies):
        return (not _prop_eval(f.left, atoms, assign)) or _prop_eval(f.right, atoms, assign)
    if isinstance(f, Iff):
        return _prop_eval(f.left, atoms, assign) == _prop_eval(f.right, atoms, assign)
    key = canon_key(f, nnf_first=False, ac=True, permute=True)
    return assign[atoms[key]]


def _prop_equiv(f, g, max_atoms=16):
    atoms = {}
    _prop_skeleton_atoms(f, atoms)
    _prop_skeleton_atoms(g, atoms)
    n = len(atoms)
    if n > max_atoms:
        return False, f"skeleton too large ({n} atoms)"
    for bits in range(1 << n):
        assign = [(bits >> i) & 1 == 1 for i in range(n)]
        if _prop_eval(f, atoms, assign) != _prop_eval(g, atoms, assign):
            return False, {"assignment": assign, "atoms": n}
    return True, None
