"""Command-line frontend.

Subcommands: parse, prove, models, beg {strict,weak,indirect}, vacuity,
gaunilo, reconstruct, corpus run.  Reports go to stdout (add --json for the
machine-readable form), diagnostics to stderr.  Exit codes: 0 success,
1 usage, 2 parse/resolve error, 3 expectation mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys

from .ast import ParseError, PetitioError, ResolveError
from .corpus_run import corpus_run, load_script, load_theory, resolve_corpus_path
from .kernel import replay_script
from .parser import parse_formula
from .printer import print_formula, print_theory
from .prover import Bounds, RoutineConfig, Verdict
from . import analysis, models, prover


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "cmd"):
        parser.print_help()
        return 1
    try:
        return args.cmd(args)
    except (ParseError, ResolveError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PetitioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _build_parser():
    p = argparse.ArgumentParser(prog="petitio",
                                description="desk-scale logic workbench with "
                                            "question-begging analysis")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--time-budget-ms", type=int, default=None,
                   help="override the proof search time budget")
    sub = p.add_subparsers()

    q = sub.add_parser("parse", help="parse and echo a theory file")
    q.add_argument("file")
    q.set_defaults(cmd=_cmd_parse)

    q = sub.add_parser("prove", help="prove a goal, by search or script")
    q.add_argument("file")
    q.add_argument("--goal", required=True)
    q.add_argument("--premises", nargs="*", default=None)
    q.add_argument("--script", default=None, help="proof script file or corpus name")
    q.add_argument("--opaque", nargs="*", default=())
    q.set_defaults(cmd=_cmd_prove)

    q = sub.add_parser("models", help="find a model, or a countermodel of a goal")
    q.add_argument("file")
    q.add_argument("--max-size", type=int, default=3)
    q.add_argument("--counter", default=None, metavar="GOAL")
    q.add_argument("--class-semantics", choices=("declared", "full"), default="declared")
    q.set_defaults(cmd=_cmd_models)

    q = sub.add_parser("beg", help="question-begging analysis")
    q.add_argument("kind", choices=("strict", "weak", "indirect"))
    q.add_argument("file")
    q.add_argument("--q", required=True, nargs="+")
    q.add_argument("--c", required=True)
    q.add_argument("--aug", default=None,
                   help="weak: catalog name (trichotomy, connectivity) or formula file")
    q.add_argument("--script", default=None,
                   help="indirect: proof script with a choice/description step")
    q.add_argument("--routine", choices=("forced", "try-skolems"), default="try-skolems")
    q.set_defaults(cmd=_cmd_beg)

    q = sub.add_parser("vacuity", help="provability with definitions kept opaque")
    q.add_argument("file")
    q.add_argument("--opaque", nargs="+", required=True)
    q.add_argument("--c", required=True)
    q.set_defaults(cmd=_cmd_vacuity)

    q = sub.add_parser("gaunilo", help="rename predicates and re-prove")
    q.add_argument("file")
    q.add_argument("--rename", nargs="+", required=True, metavar="OLD=NEW")
    q.add_argument("--goal", required=True)
    q.set_defaults(cmd=_cmd_gaunilo)

    q = sub.add_parser("reconstruct", help="emit the vacuous skeleton theory")
    q.add_argument("--names", default=None, metavar="GOD,RE")
    q.set_defaults(cmd=_cmd_reconstruct)

    q = sub.add_parser("corpus", help="corpus operations")
    csub = q.add_subparsers()
    runp = csub.add_parser("run", help="run the expected-verdict manifest")
    runp.add_argument("glob", nargs="?", default="*")
    runp.add_argument("--report-dir", default=None,
                      help="write report.json, report.csv, and report.png here")
    runp.set_defaults(cmd=_cmd_corpus_run)

    q = sub.add_parser("obviousness", help="how flimsily does a premise hide the conclusion")
    q.add_argument("file")
    q.add_argument("--q", required=True, nargs="+")
    q.add_argument("--c", required=True)
    q.set_defaults(cmd=_cmd_obviousness)

    return p


def _bounds(args) -> Bounds:
    b = Bounds.default()
    if args.time_budget_ms:
        from dataclasses import replace
        b = replace(b, time_budget_ms=args.time_budget_ms)
    return b


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _cmd_parse(args) -> int:
    theory = load_theory(args.file)
    if args.json:
        print(json.dumps({
            "name": theory.name,
            "sorts": theory.sorts,
            "axioms": theory.axiom_names(),
            "goals": [n for n, f in theory.formulas.items() if f.role != "axiom"],
            "definitions": list(theory.defs),
        }, indent=2))
    else:
        print(print_theory(theory), end="")
    return 0


def _cmd_prove(args) -> int:
    theory = load_theory(args.file)
    if args.script:
        verdict = replay_script(theory, args.goal, load_script(args.script),
                                _bounds(args), opaque=frozenset(args.opaque))
    else:
        premises = args.premises if args.premises is not None else theory.axiom_names()
        verdict = prover.prove(theory, premises, args.goal, _bounds(args),
                               opaque=frozenset(args.opaque))
    text = f"{theory.name}.{args.goal}: {verdict.kind}"
    if verdict.model is not None:
        text += f" (domain size {verdict.model.size})"
    if verdict.note:
        text += f" [{verdict.note}]"
    _emit(args, {"theory": theory.name, "goal": args.goal, **verdict.to_json()}, text)
    return 0 if verdict.kind != Verdict.UNKNOWN else 3


def _cmd_models(args) -> int:
    theory = load_theory(args.file)
    if args.counter:
        model = models.find_countermodel(theory, theory.axiom_names(), args.counter,
                                         args.max_size, semantics=args.class_semantics)
        what = f"countermodel of {args.counter}"
    else:
        model = models.find_model(theory, theory.axiom_names(), args.max_size,
                                  semantics=args.class_semantics)
        what = "model of the axioms"
    if model is None:
        _emit(args, {"theory": theory.name, "model": None},
              f"{theory.name}: no {what} up to size {args.max_size}")
        return 3
    _emit(args, {"theory": theory.name, "model": model.to_json(theory)},
          f"{theory.name}: {what}\n" + json.dumps(model.to_json(theory), indent=2))
    return 0


def _cmd_beg(args) -> int:
    theory = load_theory(args.file)
    q = args.q[0] if len(args.q) == 1 else args.q
    bounds = _bounds(args)
    if args.kind == "strict":
        r = analysis.strict_begging(theory, q, args.c, bounds)
    elif args.kind == "weak":
        if args.aug is None:
            print("error: weak begging needs --aug", file=sys.stderr)
            return 1
        aug = args.aug
        if aug not in analysis.augmentation_catalog(theory):
            lines = [ln.strip() for ln in open(resolve_corpus_path(aug)).read().splitlines()
                     if ln.strip() and not ln.strip().startswith("#")]
            aug = [parse_formula(ln, theory) for ln in lines]
        r = analysis.weak_begging(theory, q, args.c, aug, bounds)
    else:
        script = load_script(args.script) if args.script else None
        cfg = RoutineConfig.try_skolems() if args.routine == "try-skolems" \
            else RoutineConfig.forced_only()
        r = analysis.indirect_begging(theory, q, args.c, cfg, script=script, bounds=bounds)
    text = f"{theory.name}: {args.kind} begging of {'/'.join(r.q)} against {r.c}: {r.verdict}"
    if r.exoneration_reason:
        text += f"\n  note: {r.exoneration_reason}"
    if r.residual is not None:
        text += f"\n  residual: {print_formula(r.residual)} [{r.residual_tier}]"
    _emit(args, r.to_json(), text)
    return 0


def _cmd_obviousness(args) -> int:
    theory = load_theory(args.file)
    q = args.q[0] if len(args.q) == 1 else args.q
    r = analysis.obviousness(theory, q, args.c, _bounds(args))
    text = f"{theory.name}: obviousness of {'/'.join(r.q)} against {r.c}: {r.classification}"
    if r.bridge is not None:
        text += f"\n  bridge: {print_formula(r.bridge)}"
    _emit(args, r.to_json(), text)
    return 0


def _cmd_vacuity(args) -> int:
    theory = load_theory(args.file)
    r = analysis.vacuity(theory, args.opaque, args.c, _bounds(args))
    text = f"{theory.name}.{args.c} with {'/'.join(args.opaque)} opaque: " + \
        ("vacuous" if r.vacuous else f"not vacuous ({r.reason})")
    if r.vacuous and r.gaunilo_verdict is not None:
        ren = ", ".join(f"{o}->{n}" for o, n in r.gaunilo_renaming)
        text += f"\n  parody [{ren}]: {r.gaunilo_verdict.kind}"
    _emit(args, r.to_json(), text)
    return 0


def _cmd_gaunilo(args) -> int:
    theory = load_theory(args.file)
    renaming = {}
    for pair in args.rename:
        old, _, new = pair.partition("=")
        if not new:
            print(f"error: --rename takes OLD=NEW, got {pair!r}", file=sys.stderr)
            return 1
        renaming[old] = new
    r = analysis.gaunilo(theory, renaming, args.goal, _bounds(args))
    text = (f"{theory.name}.{args.goal}: original {r.original.kind}, renamed "
            f"{r.renamed.kind} ({'preserved' if r.preserved else 'NOT preserved'})")
    if not args.json:
        text += "\n" + print_theory(r.renamed_theory)
    _emit(args, r.to_json(), text)
    return 0


def _cmd_reconstruct(args) -> int:
    kwargs = {}
    if args.names:
        god, _, re_name = args.names.partition(",")
        kwargs = {"god_name": god.strip(), "re_name": re_name.strip()}
    theory = analysis.reconstruct_vacuous(**kwargs)
    if args.json:
        vac = analysis.vacuity(theory, [kwargs.get("god_name", "God?")], "God_re_alt")
        print(json.dumps({"theory": print_theory(theory), "vacuous": vac.vacuous},
                         indent=2))
    else:
        print(print_theory(theory), end="")
    return 0


def _cmd_corpus_run(args) -> int:
    report = corpus_run(args.glob, _bounds(args))
    if args.report_dir:
        from .report import write_report
        paths = write_report(report, args.report_dir)
        print(f"wrote {paths['json']}, {paths['csv']}, {paths['png']}", file=sys.stderr)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        for r in report.results:
            mark = "PASS" if r.passed else "FAIL"
            print(f"{mark}  {r.id:44s} {r.ms:8.0f} ms")
            if not r.passed:
                print(f"      expected {r.expect}, got {r.got}")
        n_pass = sum(1 for r in report.results if r.passed)
        print(f"{n_pass}/{len(report.results)} expectations reproduced")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
