"""
Input resolution shared by the subcommands.
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from app.core.dilation import kraus_from_povm
from app.core.errors import ValidationError
from app.core.intervention import Intervention
from app.core.streams import RngStream
from app.core.types import DensityMatrix, PureState
from app.services.codec import StateModel, load_document
from app.services.scenarios import Scenario, is_bundled, load_scenario

logger = logging.getLogger(__name__)


def add_input(parser, help_text: str = "input file, or bundled:NAME") -> None:
    parser.add_argument("--in", dest="input", required=True, help=help_text)


def add_state(parser) -> None:
    parser.add_argument("--state", help="state file (defaults to the scenario's initial state)")


def add_out(parser) -> None:
    parser.add_argument("--out", help="output directory (default: primary table to stdout)")


def add_seed(parser) -> None:
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed (required)")


def parse_list(text: str, cast=float, flag: str = "list") -> List:
    try:
        values = [cast(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValidationError("BadArgument", f"{flag} must be a comma-separated list, got {text!r}")
    if not values:
        raise ValidationError("BadArgument", f"{flag} is empty")
    return values


def require_seed(seed: Optional[int], fallback: Optional[int] = None) -> RngStream:
    seed = seed if seed is not None else fallback
    if seed is None:
        raise ValidationError("MissingSeed", "this command is stochastic and needs --seed")
    return RngStream(seed)


def read_input(ref: str) -> Tuple[str, object]:
    """
    Load ``--in`` as a domain object.

    Returns:
        (kind, value) where value is a Scenario for scenarios and bundled
        references, and the validated domain object otherwise
    """
    if is_bundled(ref):
        return "scenario", load_scenario(ref)
    kind, model = load_document(ref)
    if kind == "scenario":
        return kind, load_scenario(ref)
    return kind, model.to_domain() if kind != "state" else model


def read_intervention(ref: str) -> Tuple[Intervention, Optional[Scenario]]:
    """An intervention file, a POVM (square-root Kraus matrices) or a scenario's first stage."""
    kind, value = read_input(ref)
    if kind == "intervention":
        return value, None
    if kind == "povm":
        return kraus_from_povm(value), None
    if kind == "scenario":
        return value.first, value
    raise ValidationError("WrongKind", f"{ref} holds a {kind}, expected an intervention, POVM or scenario")


def read_state_model(path: str) -> StateModel:
    _, model = load_document(path, "state")
    return model


def read_density(path: Optional[str], scenario: Optional[Scenario]) -> DensityMatrix:
    if path:
        return read_state_model(path).to_density()
    if scenario is not None:
        return scenario.initial_state
    raise ValidationError("MissingState", "no --state given and the input carries no initial state")


def read_pure(path: Optional[str], scenario: Optional[Scenario]) -> PureState:
    if path:
        return read_state_model(path).to_pure()
    if scenario is not None and scenario.initial_pure is not None:
        return scenario.initial_pure
    raise ValidationError("MissingState", "this command needs a pure --state")


def out_dir(args) -> Optional[Path]:
    return Path(args.out) if getattr(args, "out", None) else None
