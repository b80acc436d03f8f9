"""
dilate and premeasure: the isometry picture of an intervention.
"""
import logging

from app.commands.common import add_input, add_out, add_state, out_dir, read_input, read_pure
from app.core.dilation import complete_to_unitary, isometry_from_kraus, kraus_from_povm, premeasure
from app.core.errors import ValidationError
from app.services.codec import CompositeStateModel, DilationModel, MatrixModel
from app.utils.output import OutputSink

logger = logging.getLogger(__name__)


def _read_dilation(ref: str):
    kind, value = read_input(ref)
    if kind == "dilation":
        return value, None
    if kind == "intervention":
        return isometry_from_kraus(value), None
    if kind == "povm":
        return isometry_from_kraus(kraus_from_povm(value)), None
    if kind == "scenario":
        return isometry_from_kraus(value.first), value
    raise ValidationError("WrongKind", f"{ref} holds a {kind}, expected an intervention, POVM, dilation or scenario")


def run_dilate(args) -> int:
    d, _ = _read_dilation(args.input)
    sink = OutputSink(out_dir(args))
    sink.document("dilation.json", DilationModel.from_domain(d), primary=True)
    if args.unitary:
        sink.document("unitary.json", MatrixModel.from_domain(complete_to_unitary(d)))
    sink.flush()
    logger.info(f"✅ Dilation {d.input_dim} -> {d.composite_dim}")
    return 0


def run_premeasure(args) -> int:
    d, scenario = _read_dilation(args.input)
    psi = read_pure(args.state, scenario)
    composite = premeasure(d, psi)
    rows = [{"label": label, "weight": w} for label, w in composite.block_weights()]
    sink = OutputSink(out_dir(args))
    sink.document("composite_state.json", CompositeStateModel.from_domain(composite))
    sink.table("block_weights.csv", rows, ["label", "weight"], primary=True)
    sink.flush()
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("dilate", help="premeasurement isometry of an intervention or POVM")
    add_input(p)
    p.add_argument("--unitary", action="store_true", help="also write a completed unitary")
    add_out(p)
    p.set_defaults(handler=run_dilate)

    p = subparsers.add_parser("premeasure", help="system-apparatus state after the premeasurement")
    add_input(p)
    add_state(p)
    add_out(p)
    p.set_defaults(handler=run_premeasure)
