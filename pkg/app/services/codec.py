"""
JSON file formats and their conversion to domain objects.

Complex numbers are [re, im] pairs. Floats are written with Python's shortest
round-trip repr, so decoding an encoded matrix gives back the same bits.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from app.core.dilation import CompositeState, Dilation, make_composite_state, make_dilation
from app.core.errors import DimMismatch, SchemaError, ValidationError
from app.core.intervention import Intervention, make_intervention
from app.core.lindblad import LindbladGenerator, make_generator
from app.core.types import DensityMatrix, Povm, PureState, make_povm, pure_state, validate_density

logger = logging.getLogger(__name__)

ComplexPair = Tuple[float, float]


class Schema(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


def _pairs(values: np.ndarray) -> List[ComplexPair]:
    return [(float(z.real), float(z.imag)) for z in np.asarray(values).reshape(-1)]


def _complex(pairs: List[ComplexPair]) -> np.ndarray:
    if not pairs:
        return np.zeros(0, dtype=np.complex128)
    arr = np.array(pairs, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1]


class MatrixModel(Schema):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    entries: List[ComplexPair]

    @model_validator(mode="after")
    def check_size(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix")
        return self

    def to_domain(self) -> np.ndarray:
        return _complex(self.entries).reshape(self.rows, self.cols)

    @classmethod
    def from_domain(cls, m: np.ndarray) -> "MatrixModel":
        return cls(rows=m.shape[0], cols=m.shape[1], entries=_pairs(m))


class StateModel(Schema):
    kind: Literal["pure", "density"]
    amplitudes: Optional[List[ComplexPair]] = None
    matrix: Optional[MatrixModel] = None

    @model_validator(mode="after")
    def check_payload(self):
        if self.kind == "pure" and self.amplitudes is None:
            raise ValueError("a pure state needs 'amplitudes'")
        if self.kind == "density" and self.matrix is None:
            raise ValueError("a density state needs 'matrix'")
        return self

    def to_density(self) -> DensityMatrix:
        if self.kind == "pure":
            return self.to_pure().density()
        return validate_density(self.matrix.to_domain())

    def to_pure(self) -> PureState:
        if self.kind != "pure":
            raise ValidationError("NeedPureState", "this operation needs a pure state with 'amplitudes'")
        return pure_state(_complex(self.amplitudes))

    @classmethod
    def from_domain(cls, state: Union[PureState, DensityMatrix]) -> "StateModel":
        if isinstance(state, PureState):
            return cls(kind="pure", amplitudes=_pairs(state.amplitudes))
        return cls(kind="density", matrix=MatrixModel.from_domain(state.matrix))


class OutcomeModel(Schema):
    label: str
    output_dim: int = Field(ge=1)
    kraus: List[MatrixModel] = Field(min_length=1)


class InterventionModel(Schema):
    input_dim: int = Field(ge=1)
    outcomes: List[OutcomeModel] = Field(min_length=1)

    def to_domain(self, strict: bool = True) -> Intervention:
        for o in self.outcomes:
            for a in o.kraus:
                if (a.rows, a.cols) != (o.output_dim, self.input_dim):
                    raise DimMismatch(
                        f"Kraus matrix of {o.label!r} is {a.rows}x{a.cols}, declared {o.output_dim}x{self.input_dim}"
                    )
        return make_intervention([(o.label, [a.to_domain() for a in o.kraus]) for o in self.outcomes], strict=strict)

    @classmethod
    def from_domain(cls, k: Intervention) -> "InterventionModel":
        return cls(
            input_dim=k.input_dim,
            outcomes=[
                OutcomeModel(label=o.label, output_dim=o.output_dim, kraus=[MatrixModel.from_domain(a) for a in o.kraus])
                for o in k.outcomes
            ],
        )


class PovmElementModel(Schema):
    label: str
    matrix: MatrixModel


class PovmModel(Schema):
    input_dim: int = Field(ge=1)
    elements: List[PovmElementModel] = Field(min_length=1)

    def to_domain(self) -> Povm:
        p = make_povm([(e.label, e.matrix.to_domain()) for e in self.elements])
        if p.input_dim != self.input_dim:
            raise DimMismatch(f"elements are {p.input_dim}x{p.input_dim}, declared input_dim {self.input_dim}")
        return p

    @classmethod
    def from_domain(cls, p: Povm) -> "PovmModel":
        return cls(
            input_dim=p.input_dim,
            elements=[PovmElementModel(label=label, matrix=MatrixModel.from_domain(e)) for label, e in p.elements],
        )


class ColumnModel(Schema):
    mu: str
    sigma: int = Field(ge=0)
    m: int = Field(ge=0)


class DilationModel(Schema):
    input_dim: int = Field(ge=1)
    columns: List[ColumnModel]
    matrix: MatrixModel

    def to_domain(self) -> Dilation:
        d = make_dilation([(c.mu, c.sigma, c.m) for c in self.columns], self.matrix.to_domain())
        if d.input_dim != self.input_dim:
            raise DimMismatch(f"matrix has {d.input_dim} rows, declared input_dim {self.input_dim}")
        return d

    @classmethod
    def from_domain(cls, d: Dilation) -> "DilationModel":
        return cls(
            input_dim=d.input_dim,
            columns=[ColumnModel(mu=mu, sigma=sigma, m=m) for mu, sigma, m in d.column_index],
            matrix=MatrixModel.from_domain(d.isometry),
        )


class CompositeStateModel(Schema):
    columns: List[ColumnModel]
    amplitudes: List[ComplexPair]

    def to_domain(self) -> CompositeState:
        return make_composite_state([(c.mu, c.sigma, c.m) for c in self.columns], _complex(self.amplitudes))

    @classmethod
    def from_domain(cls, c: CompositeState) -> "CompositeStateModel":
        return cls(
            columns=[ColumnModel(mu=mu, sigma=sigma, m=m) for mu, sigma, m in c.column_index],
            amplitudes=_pairs(c.amplitudes),
        )


class GeneratorModel(Schema):
    dim: int = Field(ge=1)
    h0: MatrixModel = Field(alias="H0")
    jumps: List[MatrixModel] = Field(default_factory=list)

    def to_domain(self) -> LindbladGenerator:
        g = make_generator(self.h0.to_domain(), [v.to_domain() for v in self.jumps])
        if g.dim != self.dim:
            raise DimMismatch(f"H0 is {g.dim}x{g.dim}, declared dim {self.dim}")
        return g

    @classmethod
    def from_domain(cls, g: LindbladGenerator) -> "GeneratorModel":
        return cls(dim=g.dim, H0=MatrixModel.from_domain(g.h0), jumps=[MatrixModel.from_domain(v) for v in g.jumps])


StageEntry = Union[InterventionModel, PovmModel, str]


class ScenarioModel(Schema):
    name: str
    initial_state: StateModel
    stages: List[Dict[str, StageEntry]] = Field(min_length=1)
    shots: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, le=2**64 - 1)


# Keys that identify a document, checked in order.
KIND_KEYS = [
    ("stages", "scenario", ScenarioModel),
    ("outcomes", "intervention", InterventionModel),
    ("elements", "povm", PovmModel),
    ("H0", "generator", GeneratorModel),
    ("amplitudes", "composite", CompositeStateModel),
    ("matrix", "dilation", DilationModel),
    ("kind", "state", StateModel),
]


def detect_kind(doc: Dict[str, Any]) -> str:
    if not isinstance(doc, dict):
        raise SchemaError("top-level JSON value must be an object")
    for key, kind, _ in KIND_KEYS:
        if key in doc:
            if kind == "composite" and "columns" not in doc:
                continue
            if kind == "dilation" and "columns" not in doc:
                continue
            return kind
    raise SchemaError(f"cannot tell the document kind from keys {sorted(doc)}")


def parse_document(doc: Dict[str, Any], kind: Optional[str] = None) -> Tuple[str, BaseModel]:
    """Validate a decoded JSON object against the schema of its kind."""
    kind = kind or detect_kind(doc)
    model = {k: m for _, k, m in KIND_KEYS}.get(kind)
    if model is None:
        raise SchemaError(f"unknown document kind {kind!r}")
    try:
        return kind, model.model_validate(doc)
    except PydanticValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise SchemaError(f"{kind} document, field {where}: {first['msg']}")


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError("MissingFile", f"no such file: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    logger.debug(f"📄 Read {path}")
    return doc


def load_document(path: Union[str, Path], kind: Optional[str] = None) -> Tuple[str, BaseModel]:
    return parse_document(read_json(path), kind)


def dumps(model: BaseModel) -> str:
    """Serialise with the standard library so floats keep their shortest repr."""
    return json.dumps(model.model_dump(mode="python", by_alias=True, exclude_none=True), indent=2) + "\n"


class ConditionalStateModel(Schema):
    label: str
    probability: float
    state: StateModel


class ApplyResultModel(Schema):
    """Unnormalised state per outcome, plus the averaged state when all outcomes share a dimension"""

    outcomes: List[ConditionalStateModel]
    nonselective: Optional[StateModel] = None
