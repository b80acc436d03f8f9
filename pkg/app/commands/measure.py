"""
validate, probs and apply: single-intervention subcommands.
"""
import logging

from app.commands.common import add_input, add_out, add_state, out_dir, read_density, read_input, read_intervention
from app.core.errors import HeterogeneousOutputDims
from app.core.intervention import apply_nonselective, apply_selective, outcome_probabilities
from app.services.codec import ApplyResultModel, ConditionalStateModel, StateModel
from app.utils.output import OutputSink

logger = logging.getLogger(__name__)

PROBABILITY_COLUMNS = ["label", "probability"]


def run_validate(args) -> int:
    kind, value = read_input(args.input)
    if kind == "state":
        value.to_density()
    print(f"ok {kind}")
    logger.info(f"✅ {args.input} is a valid {kind}")
    return 0


def _probability_rows(k, rho):
    return [{"label": label, "probability": p} for label, p in outcome_probabilities(k, rho)]


def run_probs(args) -> int:
    k, scenario = read_intervention(args.input)
    rho = read_density(args.state, scenario)
    sink = OutputSink(out_dir(args))
    sink.table("probabilities.csv", _probability_rows(k, rho), PROBABILITY_COLUMNS, primary=True)
    sink.flush()
    return 0


def run_apply(args) -> int:
    k, scenario = read_intervention(args.input)
    rho = read_density(args.state, scenario)
    outcomes = []
    for o in k.outcomes:
        out = apply_selective(k, rho, o.label)
        outcomes.append(ConditionalStateModel(label=o.label, probability=out.trace_norm, state=StateModel.from_domain(out)))
    nonselective = None
    try:
        nonselective = StateModel.from_domain(apply_nonselective(k, rho))
    except HeterogeneousOutputDims:
        logger.info("⚠️ Outcomes leave different dimensions, skipping the non-selective state")

    sink = OutputSink(out_dir(args))
    sink.document("conditional_states.json", ApplyResultModel(outcomes=outcomes, nonselective=nonselective), primary=True)
    sink.table("probabilities.csv", _probability_rows(k, rho), PROBABILITY_COLUMNS)
    sink.flush()
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("validate", help="decode and validate any input document")
    add_input(p)
    p.set_defaults(handler=run_validate)

    p = subparsers.add_parser("probs", help="outcome probabilities of an intervention")
    add_input(p)
    add_state(p)
    add_out(p)
    p.set_defaults(handler=run_probs)

    p = subparsers.add_parser("apply", help="conditional post-measurement states")
    add_input(p)
    add_state(p)
    add_out(p)
    p.set_defaults(handler=run_apply)
