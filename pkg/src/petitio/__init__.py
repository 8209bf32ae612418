"""petitio: a desk-scale logic workbench.

Parses small typed first-order theories (with bounded property
quantification), proves or refutes their goals with a checkable sequent
kernel and finite model finder, and mechanically detects three formal kinds
of question-begging plus vacuity."""

from .ast import Theory, PetitioError, ParseError, ResolveError
from .parser import parse_theory, parse_formula
from .printer import print_formula, print_theory, print_sequent
from .kernel import (
    Sequent, RuleContext, DerivNode, apply_rule, check_derivation,
    generalize_sequent, replay_script, parse_script, new_proof_state,
)
from .prover import (
    Bounds, RoutineConfig, Verdict, EquivResult,
    prove, routine_normalize, equiv_up_to, skolemize, prop_simplify,
)
from .transforms import (
    nnf, contrapositive, expand_definition, fold_definition, substitute_predicate,
    alpha_equal, ac_equal,
)
from .models import (
    FiniteModel, eval_formula, find_model, find_countermodel, check_interpretation,
    SearchSpaceExceeded,
)
from .analysis import (
    strict_begging, weak_begging, indirect_begging, obviousness, vacuity,
    gaunilo, reconstruct_vacuous, BeggingReport, VacuityReport,
)
from .corpus_run import corpus_run, load_theory, load_script

__version__ = "0.1.0"
