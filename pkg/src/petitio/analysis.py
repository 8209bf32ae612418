"""Question-begging detectors, vacuity, Gaunilo substitution, and the
vacuous-reconstruction generator.

Three formal senses of a premise Q begging the question C, with P the other
premises:

  strict    P, Q |- C and P, C |- Q (both directions close);
  weak      strict after augmenting P with extra premises P2;
  indirect  Q equals, up to renaming/rearrangement/fold, the universal
            generalization of the residual sequent left after routine
            deduction from P toward C (or, for choice-style proofs, of the
            spawned existence obligation).

Verdicts carry their evidence: the direction verdicts, countermodels,
residual generalizations and equivalence tiers, and exoneration paths."""
from __future__ import annotations

from dataclasses import dataclass, field

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
    PetitioError, UnknownName, UnknownDefinition, NameClash,
)
from .kernel import (
    Sequent, RuleContext, generalize_sequent, replay_script, parse_script,
    initial_sequent,
)
from .parser import parse_theory, parse_formula
from .printer import print_formula, print_theory
from .prover import (
    Bounds, RoutineConfig, Verdict, EquivResult,
    prove, routine_normalize, equiv_up_to, close_sequent, forced_gamma_filter,
    discharge_theory_obligations,
)
from .transforms import (
    ac_equal, expand_all, subst_obj, subst_set, substitute_predicate,
    collect_consts, free_names, fresh_name,
)
from . import models


class InconsistentAugmentation(PetitioError):
    pass


VERDICT_BEGS = "begs"
VERDICT_EXONERATED = "exonerated"
VERDICT_NOT_DETECTED = "not_detected"
VERDICT_UNKNOWN = "unknown"


@dataclass
class BeggingReport:
    kind: str  # "strict" | "weak" | "indirect"
    theory: str
    q: tuple  # premise name(s)
    c: str
    verdict: str
    forward: Verdict = None
    reverse: Verdict = None
    augmentation: tuple = ()  # printed P2 formulas (weak)
    augmentation_consistent: object = None  # FiniteModel | None | "unknown"
    augmentation_alone_proves: object = None
    residual: object = None  # generalized Formula (indirect)
    residual_tier: str = ""
    residual_leaves: tuple = ()
    matched_context: tuple = ()  # printed context formulas kept in the match
    set_instantiation: str = ""  # property-set witness, when matched that way
    used_try_skolems: bool = False
    routine_prefix: object = None  # script mode: pre-spawn commands all routine
    exonerated: bool = False
    exoneration_reason: str = ""
    bootstrap: bool = False  # existential premise supplying the goal witness

    def to_json(self):
        ev = {}
        if self.forward is not None:
            ev["forward"] = self.forward.to_json()
        if self.reverse is not None:
            ev["reverse"] = self.reverse.to_json()
        if self.residual is not None:
            ev["residual"] = print_formula(self.residual)
            ev["tier"] = self.residual_tier
        if self.matched_context:
            ev["matched_context"] = list(self.matched_context)
        if self.set_instantiation:
            ev["set_instantiation"] = self.set_instantiation
        if self.kind == "weak":
            ev["augmentation"] = list(self.augmentation)
            ev["augmentation_consistent"] = (
                self.augmentation_consistent if isinstance(self.augmentation_consistent, str)
                else self.augmentation_consistent is not None)
        if self.kind == "indirect":
            ev["used_try_skolems"] = self.used_try_skolems
            if self.routine_prefix is not None:
                ev["routine_prefix"] = self.routine_prefix
        return {
            "theory": self.theory,
            "criterion": self.kind,
            "Q": list(self.q),
            "C": self.c,
            "verdict": self.verdict,
            "evidence": ev,
            "exoneration": {
                "flag": self.exonerated or self.bootstrap,
                "reason": self.exoneration_reason,
            },
        }


# ---------------------------------------------------------------------------
# strict begging


def _q_conjunction(theory: Theory, q_names):
    bodies = [theory.formula(n).body for n in q_names]
    return mk_and(bodies)


def _validate_q_c(theory: Theory, q_names, c_name):
    axioms = set(theory.axiom_names())
    for n in q_names:
        theory.formula(n)
        if n not in axioms:
            raise UnknownName(f"questionable premise {n!r} is not an axiom of {theory.name}")
    theory.formula(c_name)
    return [n for n in theory.axiom_names() if n not in set(q_names)]


def strict_begging(theory: Theory, q, c, bounds=None, *, obligations=None) -> BeggingReport:
    """P, Q |- C and P, C |- Q, with P the other axioms.  A premise that only
    discharges an obligation C's statement depends on is exonerated; a bare
    existential that merely supplies the goal's witness is flagged but still
    reported as formally begging."""
    q_names = (q,) if isinstance(q, str) else tuple(q)
    p_names = _validate_q_c(theory, q_names, c)
    bounds = bounds or Bounds.default()
    report = BeggingReport("strict", theory.name, q_names, c, VERDICT_UNKNOWN)
    report.forward = prove(theory, list(p_names) + list(q_names), c, bounds,
                           discharge_descriptions=False)
    q_formula = _q_conjunction(theory, q_names)
    report.reverse = prove(theory, list(p_names) + [c], q_formula, bounds,
                           discharge_descriptions=False)
    if report.forward.proved and report.reverse.proved:
        report.verdict = VERDICT_BEGS
        _apply_exoneration(theory, report, q_names, c, bounds, obligations)
    elif report.forward.kind == Verdict.UNKNOWN or report.reverse.kind == Verdict.UNKNOWN:
        report.verdict = VERDICT_UNKNOWN
    else:
        report.verdict = VERDICT_NOT_DETECTED
    return report


def _apply_exoneration(theory, report, q_names, c, bounds, obligations):
    # rule (a): obligation priority -- C's statement depends on a description
    # whose exists-unique obligation needs Q for its discharge
    c_body = theory.formula(c).body
    mentioned = {t.name for t in collect_consts(c_body) if isinstance(t, Const)}
    described = [d for d in theory.descriptions if d in mentioned]
    if described:
        if obligations is None:
            obligations = discharge_theory_obligations(theory, bounds)
        for d in described:
            verdict, essential = obligations.get(d, (None, frozenset()))
            needed = set(q_names) & set(essential)
            if verdict is not None and verdict.proved and needed:
                report.verdict = VERDICT_EXONERATED
                report.exonerated = True
                report.exoneration_reason = (
                    f"{'/'.join(sorted(needed))} discharges the exists-unique obligation "
                    f"for {d!r}, which {report.c!r} depends on; the premise is strictly "
                    f"prior to the conclusion")
                return
    # rule (b): existential bootstrap -- formally begging, flagged by convention
    if len(q_names) == 1:
        q_body = theory.formula(q_names[0]).body
        if isinstance(q_body, Exists) and _witness_feeds_goal(report.forward, q_body):
            report.bootstrap = True
            report.exoneration_reason = (
                f"{q_names[0]} is an existential premise whose skolem constant supplies "
                f"the conclusion's witness; formally strict-begging, conventionally "
                f"exonerable")


def _witness_feeds_goal(forward: Verdict, q_body):
    """The forward derivation skolemizes Q and later uses that skolem constant
    as an existential witness on the right."""
    if forward.derivation is None:
        return False
    witnesses = set()
    for node in forward.derivation.walk():
        if node.rule == "exists_l":
            idx, sks = node.args
            _, _, f = node.sequent.formula_at(idx)
            if f == q_body:
                witnesses.update(sks)
    if not witnesses:
        return False
    for node in forward.derivation.walk():
        if node.rule == "exists_r":
            _, instance, _ = node.args
            if any(t in witnesses for t in instance):
                return True
    return False


# ---------------------------------------------------------------------------
# weak begging


def augmentation_catalog(theory: Theory):
    """Built-in P2 candidates: trichotomy of >, and greatest-things-dominate
    connectivity (both over the theory's principal object sort)."""
    out = {}
    sort = theory.object_sort()
    if ">" in theory.preds or ">" in theory.defs:
        out["trichotomy"] = parse_formula(
            f"FORALL (x: {sort}), (y: {sort}): x > y OR y > x OR x = y", theory)
        if "God?" in theory.defs or "God?" in theory.preds:
            out["connectivity"] = parse_formula(
                f"FORALL (x: {sort}), (y: {sort}): God?(x) => x > y OR x = y", theory)
    return out


def weak_begging(theory: Theory, q, c, p2, bounds=None, *, obligations=None) -> BeggingReport:
    """Strict begging over P u P2.  P2 is a list of closed formulas, or the
    name of a catalog augmentation.  Reports P2's consistency with P and
    whether P2 alone already proves C (a trivializing augmentation)."""
    q_names = (q,) if isinstance(q, str) else tuple(q)
    p_names = _validate_q_c(theory, q_names, c)
    bounds = bounds or Bounds.default()
    if isinstance(p2, str):
        p2 = [augmentation_catalog(theory)[p2]]
    p2 = list(p2)
    report = BeggingReport("weak", theory.name, q_names, c, VERDICT_UNKNOWN,
                           augmentation=tuple(print_formula(f) for f in p2))

    p_bodies = [theory.formula(n).body for n in p_names]
    try:
        model = models.find_model_formulas(theory, p_bodies + p2, 3)
    except models.SearchSpaceExceeded:
        model = None
        report.augmentation_consistent = "unknown"
    if report.augmentation_consistent is None:
        report.augmentation_consistent = model
    if model is None and report.augmentation_consistent != "unknown":
        refute = prove(theory, p_names, FALSE, bounds, extra_premises=p2,
                       discharge_descriptions=False)
        if refute.proved:
            raise InconsistentAugmentation(
                f"P u P2 is unsatisfiable for {theory.name}: augmentation rejected")

    alone = prove(theory, [], theory.formula(c).body, bounds, extra_premises=p2,
                  discharge_descriptions=False)
    report.augmentation_alone_proves = alone.proved

    q_formula = _q_conjunction(theory, q_names)
    report.forward = prove(theory, list(p_names) + list(q_names), c, bounds,
                           extra_premises=p2, discharge_descriptions=False)
    report.reverse = prove(theory, list(p_names) + [c], q_formula, bounds,
                           extra_premises=p2, discharge_descriptions=False)
    if report.forward.proved and report.reverse.proved:
        report.verdict = VERDICT_BEGS
        _apply_exoneration(theory, report, q_names, c, bounds, obligations)
    elif report.forward.kind == Verdict.UNKNOWN or report.reverse.kind == Verdict.UNKNOWN:
        report.verdict = VERDICT_UNKNOWN
    else:
        report.verdict = VERDICT_NOT_DETECTED
    return report


# ---------------------------------------------------------------------------
# indirect begging


def indirect_begging(theory: Theory, q, c, cfg: RoutineConfig = None, *,
                     script=None, bounds=None) -> BeggingReport:
    """Q begs indirectly when it is (a generalization of) the universal closure
    of the residual left by routine deduction from P toward C.  With a proof
    script containing a choice/description step, the comparison runs against
    the spawned existence obligation instead."""
    q_names = (q,) if isinstance(q, str) else tuple(q)
    p_names = _validate_q_c(theory, q_names, c)
    bounds = bounds or Bounds.default()
    if cfg is None:
        cfg = RoutineConfig.try_skolems()
    q_formula = _q_conjunction(theory, q_names)
    report = BeggingReport("indirect", theory.name, q_names, c, VERDICT_NOT_DETECTED)

    if script is not None:
        candidates = _obligation_candidates(theory, c, script, q_names, report, bounds)
    else:
        rr = routine_normalize(theory, p_names, c, cfg)
        report.used_try_skolems = rr.used_try_skolems
        candidates = [(leaf, ()) for leaf in rr.leaves]

    residuals = []
    for seq, context_kept in candidates:
        g = generalize_sequent(seq)
        residuals.append(g)
        eq = equiv_up_to(g, q_formula, theory)
        if eq.at_most_fold_expand():
            report.verdict = VERDICT_BEGS
            report.residual = g
            report.residual_tier = eq.tier
            report.matched_context = context_kept
            break
        builder = _set_generalization_match(q_formula, g, theory)
        if builder is not None:
            report.verdict = VERDICT_BEGS
            report.residual = g
            report.residual_tier = "set_generalization"
            report.matched_context = context_kept
            report.set_instantiation = builder
            break
    if report.residual is None and residuals:
        report.residual = residuals[0]
        report.residual_tier = EquivResult.NOT_EQUIVALENT
    report.residual_leaves = tuple(print_formula(r) for r in residuals[:8])
    return report


def _obligation_candidates(theory, c, script, q_names, report, bounds):
    """Replay the script, capture spawned obligations, and enumerate candidate
    residual sequents: the obligation formula plus optional context formulas
    (smallest context first)."""
    if isinstance(script, str):
        script = parse_script(script)
    pre_spawn = []
    for cmd in script:
        if cmd.kind in ("choose", "describe"):
            break
        pre_spawn.append(cmd)
    for cmd in pre_spawn:
        if cmd.kind in ("use", "lemma") and cmd.text.strip() in q_names:
            raise PetitioError(
                f"script installs questionable premise {cmd.text.strip()!r} before the "
                f"choice step; the obligation comparison would be circular")
    routine_kinds = {"use", "lemma", "expand", "skolemize", "instantiate",
                     "propsimplify", "split"}
    report.routine_prefix = all(cmd.kind in routine_kinds for cmd in pre_spawn)

    captured = []
    replay_script(theory, c, script, bounds, capture=captured)
    out = []
    for ob in captured:
        context = [("a", f) for f in ob.context_before.ants] + \
                  [("s", f) for f in ob.context_before.succs]
        context = [(side, f) for side, f in context if f != ob.formula]
        n = min(len(context), 8)
        for mask in sorted(range(1 << n), key=lambda m: (bin(m).count("1"), m)):
            ants = tuple(f for i, (side, f) in enumerate(context[:n])
                         if side == "a" and mask >> i & 1)
            succs = tuple(f for i, (side, f) in enumerate(context[:n])
                          if side == "s" and mask >> i & 1)
            kept = tuple(f"{'|-' if side == 's' else ''}{print_formula(f)}"
                         for i, (side, f) in enumerate(context[:n]) if mask >> i & 1)
            out.append((Sequent(ants, succs + (ob.formula,)), kept))
    return out


def _set_generalization_match(q_formula, g, theory):
    """Does instantiating Q's leading property-set universals with set builders
    turn it into g?  Returns the printed builder witness, or None."""
    set_vars = []
    body = q_formula
    while isinstance(body, ForAllSet):
        set_vars.append((body.var, body.cls))
        body = body.body
    if not set_vars:
        return None
    g_vars = []
    g_body = g
    while isinstance(g_body, ForAll):
        g_vars.extend(g_body.vars)
        g_body = g_body.body
    binding = {}
    _sg_scan(body, g_body, {v: cls for v, cls in set_vars}, {}, binding)
    if set(binding) != {v for v, _ in set_vars}:
        return None
    inst = subst_set(body, binding)
    candidate = ForAll(tuple(g_vars), inst) if g_vars else inst
    if ac_equal(candidate, g):
        from .printer import print_set
        return ", ".join(f"{v} := {print_set(b)}" for v, b in binding.items())
    return None


def _sg_scan(qx, gx, set_vars, penv, binding):
    """Greedy structural alignment of Q's body with g's matrix, recording a set
    builder wherever Q applies a bound set variable; verification happens by
    substitution afterwards."""
    if isinstance(qx, SetApply) and isinstance(qx.s, SetVar) and qx.s.name in set_vars \
            and isinstance(qx.prop, PropVar):
        var = qx.prop.name
        cls = set_vars[qx.s.name]
        body = gx
        if qx.s.name not in binding:
            mapped = penv.get(var, var)
            if mapped != var:
                body = _rename_prop_var(gx, mapped, var)
            binding[qx.s.name] = SetBuilder(var, cls, body)
        return
    if type(qx) is not type(gx):
        return
    if isinstance(qx, (And, Or)):
        if len(qx.args) == len(gx.args):
            for a, b in zip(qx.args, gx.args):
                _sg_scan(a, b, set_vars, penv, binding)
        return
    if isinstance(qx, (Implies, Iff)):
        _sg_scan(qx.left, gx.left, set_vars, penv, binding)
        _sg_scan(qx.right, gx.right, set_vars, penv, binding)
        return
    if isinstance(qx, Not):
        _sg_scan(qx.body, gx.body, set_vars, penv, binding)
        return
    if isinstance(qx, (ForAll, Exists)):
        _sg_scan(qx.body, gx.body, set_vars, penv, binding)
        return
    if isinstance(qx, (ForAllProp, ExistsProp, ForAllSet, ExistsSet)):
        penv2 = dict(penv)
        penv2[qx.var] = gx.var
        _sg_scan(qx.body, gx.body, set_vars, penv2, binding)
        return


def _rename_prop_var(f, old, new):
    from .transforms import substitute
    return substitute(f, prop={old: PropVar(new, "")}) if old != new else f


# ---------------------------------------------------------------------------
# obviousness


@dataclass
class ObviousnessReport:
    theory: str
    q: tuple
    c: str
    classification: str  # "obvious" | "borderline" | "hidden"
    bridge: object = None  # the mechanically built obviously-begging formula
    tier: str = ""
    all_forced: object = None
    instantiations: tuple = ()

    def to_json(self):
        return {
            "theory": self.theory,
            "criterion": "obviousness",
            "Q": list(self.q),
            "C": self.c,
            "verdict": self.classification,
            "evidence": {
                "bridge": print_formula(self.bridge) if self.bridge is not None else None,
                "tier": self.tier,
                "all_forced": self.all_forced,
                "instantiations": list(self.instantiations),
            },
        }


def obviousness(theory: Theory, q, c, bounds=None) -> ObviousnessReport:
    """Is Q only flimsily hiding `the other premises entail the conclusion`?

    obvious     Q matches the mechanically built bridge formula up to
                propositional rearrangement and definition fold/expand;
    borderline  Q entails the bridge with quantifier steps, all suggested by
                existing literals (otherwise flagged), within bounds;
    hidden      the entailment needs instantiation no literal suggests
                (e.g. an invented property-set witness)."""
    q_names = (q,) if isinstance(q, str) else tuple(q)
    _validate_q_c(theory, q_names, c)
    bounds = bounds or Bounds.default()
    q_formula = _q_conjunction(theory, q_names)
    bridge = build_bridge(theory, q_names, c)
    report = ObviousnessReport(theory.name, q_names, c, "hidden", bridge=bridge)
    if bridge is None:
        return report
    eq = equiv_up_to(q_formula, bridge, theory)
    report.tier = eq.tier
    if eq.at_most_fold_expand():
        report.classification = "obvious"
        return report
    ctx = RuleContext(theory, frozenset(), frozenset())
    seq = Sequent(tuple(theory.class_membership_axioms()) + (q_formula,), (bridge,))
    node = close_sequent(ctx, seq, bounds, gamma_filter=forced_gamma_filter)
    if node is not None:
        report.classification = "borderline"
        report.all_forced = True
        report.instantiations = _instantiation_trace(node)
        return report
    node = close_sequent(ctx, seq, bounds)
    if node is not None:
        report.classification = "borderline"
        report.all_forced = False
        report.instantiations = _instantiation_trace(node)
        return report
    report.classification = "hidden"
    return report


def _instantiation_trace(node):
    out = []
    for n in node.walk():
        if n.rule in ("forall_l", "exists_r"):
            idx, instance, _ = n.args
            _, _, f = n.sequent.formula_at(idx)
            from .printer import print_term
            terms = ", ".join(print_term(t) for t in instance)
            out.append(f"{n.rule} {print_formula(f)} := {terms}")
        elif n.rule in ("forallp_l", "existsp_r"):
            idx, p, _ = n.args
            _, _, f = n.sequent.formula_at(idx)
            from .printer import print_prop
            out.append(f"{n.rule} {print_formula(f)} := {print_prop(p)}")
    return tuple(out)


def build_bridge(theory: Theory, q_names, c):
    """The obviously-begging formula: guards from the other premises'
    existentials imply what remains of the conclusion once those guards are
    spent, universally closed, under the conclusion's own hypotheses."""
    p_names = [n for n in theory.axiom_names() if n not in set(q_names)]
    c_body = theory.formula(c).body

    hyps = []
    core = c_body
    while isinstance(core, Implies):
        hyps.append(core.left)
        core = core.right

    sort = theory.object_sort()
    if isinstance(core, Exists):
        matrix_of = lambda t: subst_obj(core.body, {core.vars[0][0]: t})
    else:
        described = [d for d in theory.descriptions
                     if d in {t.name for t in collect_consts(core) if isinstance(t, Const)}]
        if not described:
            return None
        d = described[0]
        desc_axiom = theory.description_axioms()[d]
        dc = Const(d, theory.consts[d])

        def matrix_of(t):
            repl = _swap_const(core, dc, t)
            pred = _swap_const(desc_axiom, dc, t)
            return mk_and([pred, repl])

    guards = []
    used = set()
    for n in p_names:
        body = theory.formula(n).body
        if isinstance(body, Exists) and len(body.vars) == 1:
            v = fresh_name(f"v_{len(guards) + 1}", used)
            used.add(v)
            var = Var(v, body.vars[0][1])
            guards.append((v, body.vars[0][1], subst_obj(body.body, {body.vars[0][0]: var})))
    if not guards:
        return None

    expanded_guards = [expand_all(g, theory) for _, _, g in guards]
    best = None
    for v, vsort, _ in guards:
        w = Var(v, vsort)
        conjuncts = list(matrix_of(w).args) if isinstance(matrix_of(w), And) else [matrix_of(w)]
        residue = [cj for cj in conjuncts
                   if not any(ac_equal(expand_all(cj, theory), eg) for eg in expanded_guards)]
        if len(residue) < len(conjuncts):
            best = (v, residue)
            break
    if best is None:
        v, _, _ = guards[0]
        w = Var(v, guards[0][1])
        m = matrix_of(w)
        best = (v, list(m.args) if isinstance(m, And) else [m])
    _, residue = best
    inner = Implies(mk_and([g for _, _, g in guards]), mk_and(residue))
    bridge = ForAll(tuple((v, s) for v, s, _ in guards), inner)
    for h in reversed(hyps):
        bridge = Implies(h, bridge)
    return bridge


def _swap_const(f, old, new):
    from .transforms import replace_term
    return replace_term(f, old, new)


# ---------------------------------------------------------------------------
# vacuity and Gaunilo


@dataclass
class VacuityReport:
    theory: str
    c: str
    opaque: tuple
    vacuous: bool
    proof: Verdict = None
    trivialized_premises: tuple = ()
    gaunilo_renaming: tuple = ()
    gaunilo_verdict: Verdict = None
    reason: str = ""

    def to_json(self):
        return {
            "theory": self.theory,
            "criterion": "vacuity",
            "C": self.c,
            "opaque": list(self.opaque),
            "verdict": "vacuous" if self.vacuous else "not_vacuous",
            "evidence": {
                "proof": self.proof.to_json() if self.proof else None,
                "trivialized_premises": list(self.trivialized_premises),
                "gaunilo": {
                    "renaming": dict(self.gaunilo_renaming),
                    "verdict": self.gaunilo_verdict.to_json() if self.gaunilo_verdict else None,
                },
                "reason": self.reason,
            },
        }


def vacuity(theory: Theory, opaque, c, bounds=None, *, gaunilo_renaming=None) -> VacuityReport:
    """Can the goal be proved without ever opening the named definitions?
    If so the argument form accepts any reinterpretation of them, demonstrated
    by re-proving under a fresh-name substitution."""
    opaque = tuple(opaque)
    for name in opaque:
        if name not in theory.defs and name not in theory.preds:
            raise UnknownDefinition(f"{name!r} is not a definition or predicate of "
                                    f"{theory.name}")
    mask = frozenset(n for n in opaque if n in theory.defs)
    bounds = bounds or Bounds.default()
    report = VacuityReport(theory.name, c, opaque, False)

    if theory.descriptions:
        from dataclasses import replace as _replace
        short = _replace(bounds, time_budget_ms=min(bounds.time_budget_ms, 1500))
        obligations = discharge_theory_obligations(theory, short, opaque=mask)
        failed = [d for d, (v, _) in obligations.items() if not v.proved]
        if failed:
            report.reason = (f"description obligation for {'/'.join(failed)} cannot be "
                             f"discharged with {'/'.join(opaque)} opaque")
            return report

    verdict = prove(theory, theory.axiom_names(), c, bounds, opaque=mask,
                    discharge_descriptions=False)
    report.proof = verdict
    if not verdict.proved:
        report.reason = "goal not provable with the definitions kept opaque"
        return report
    report.vacuous = True
    report.trivialized_premises = _touched_premises(theory, verdict)

    if gaunilo_renaming is None:
        gaunilo_renaming = default_parody_renaming(theory, opaque)
    report.gaunilo_renaming = tuple(sorted(gaunilo_renaming.items()))
    renamed = substitute_predicate(theory, gaunilo_renaming)
    report.gaunilo_verdict = prove(renamed, renamed.axiom_names(), c, bounds,
                                   opaque=frozenset(gaunilo_renaming.get(n, n) for n in mask),
                                   discharge_descriptions=False)
    return report


def default_parody_renaming(theory: Theory, opaque):
    """God? -> Island? in the spirit of the lost-island parody; other opaque
    names get a fresh `_parody` variant."""
    ren = {}
    used = set(theory.preds) | set(theory.defs) | set(theory.consts) | set(theory.formulas)
    for name in opaque:
        if name == "God?" and "Island?" not in used:
            ren[name] = "Island?"
            used.add("Island?")
        else:
            base = name[:-1] if name.endswith("?") else name
            fresh = fresh_name(base + "_parody", used)
            fresh = fresh + "?" if name.endswith("?") else fresh
            ren[name] = fresh
            used.add(fresh)
    return ren


def _touched_premises(theory: Theory, verdict: Verdict):
    """Axioms whose bodies are principal in some step of the derivation."""
    if verdict.derivation is None:
        return ()
    by_body = {}
    for n, nf in theory.formulas.items():
        if nf.role == "axiom":
            by_body.setdefault(nf.body, n)
    touched = []
    for node in verdict.derivation.walk():
        if node.rule in ("axiom", "lemma"):
            name = node.args[0]
            if name not in touched:
                touched.append(name)
            continue
        if not node.args or not isinstance(node.args[0], int):
            continue
        try:
            _, _, f = node.sequent.formula_at(node.args[0])
        except PetitioError:
            continue
        name = by_body.get(f)
        if name is not None and name not in touched:
            touched.append(name)
    return tuple(touched)


@dataclass
class GauniloReport:
    theory: str
    goal: str
    renaming: tuple
    original: Verdict
    renamed: Verdict
    renamed_theory: Theory

    @property
    def preserved(self):
        return self.original.kind == self.renamed.kind

    def to_json(self):
        return {
            "theory": self.theory,
            "criterion": "gaunilo",
            "goal": self.goal,
            "renaming": dict(self.renaming),
            "original": self.original.to_json(),
            "renamed": self.renamed.to_json(),
            "preserved": self.preserved,
        }


def gaunilo(theory: Theory, renaming: dict, goal: str, bounds=None, *,
            opaque=frozenset()) -> GauniloReport:
    """Substitute fresh predicate names (the most perfect island) and re-prove."""
    bounds = bounds or Bounds.default()
    original = prove(theory, theory.axiom_names(), goal, bounds, opaque=opaque)
    renamed_theory = substitute_predicate(theory, renaming)
    renamed = prove(renamed_theory, renamed_theory.axiom_names(), goal, bounds,
                    opaque=frozenset(renaming.get(n, n) for n in opaque))
    return GauniloReport(theory.name, goal, tuple(sorted(renaming.items())),
                         original, renamed, renamed_theory)


# ---------------------------------------------------------------------------
# the vacuous reconstruction


def reconstruct_vacuous(god_name="God?", re_name="re?", *, sort="beings",
                        theory_name="Reconstruction") -> Theory:
    """The four-step skeleton every treatment elaborates: two uninterpreted
    predicates, an existence premise, a reverse-engineered bridge premise, and
    the conclusion; valid with everything opaque, hence open to any
    interpretation."""
    if god_name == re_name:
        raise NameClash("the two predicates need distinct names")
    text = f"""
{theory_name}: THEORY
BEGIN
  {sort}: TYPE
  x: VAR {sort}
  {god_name}: pred[{sort}]
  {re_name}: pred[{sort}]
  ExUnd: AXIOM EXISTS x: {god_name}(x)
  Greater1_vac: AXIOM FORALL x: {god_name}(x) => {re_name}(x)
  God_re_alt: THEOREM EXISTS x: {god_name}(x) AND {re_name}(x)
END {theory_name}
"""
    return parse_theory(text)
