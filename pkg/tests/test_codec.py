import json

import numpy as np
import pytest

from app.core.errors import DimMismatch, SchemaError, ValidationError
from app.core.lindblad import make_generator
from app.services.codec import (
    GeneratorModel,
    InterventionModel,
    MatrixModel,
    StateModel,
    detect_kind,
    dumps,
    load_document,
    parse_document,
    read_json,
)
from tests.builders import LOWERING, SIGMA_Z, computational_pvm


def matrix_doc(m):
    m = np.asarray(m, dtype=complex)
    return {"rows": m.shape[0], "cols": m.shape[1], "entries": [[z.real, z.imag] for z in m.reshape(-1)]}


@pytest.mark.parametrize(
    "doc, kind",
    [
        ({"name": "x", "initial_state": {}, "stages": []}, "scenario"),
        ({"input_dim": 2, "outcomes": []}, "intervention"),
        ({"input_dim": 2, "elements": []}, "povm"),
        ({"dim": 2, "H0": {}}, "generator"),
        ({"columns": [], "amplitudes": []}, "composite"),
        ({"input_dim": 2, "columns": [], "matrix": {}}, "dilation"),
        ({"kind": "pure", "amplitudes": []}, "state"),
        ({"kind": "density", "matrix": {}}, "state"),
    ],
)
def test_detect_kind(doc, kind):
    assert detect_kind(doc) == kind


def test_unknown_document():
    with pytest.raises(SchemaError):
        detect_kind({"foo": 1})
    with pytest.raises(SchemaError):
        detect_kind([1, 2])


def test_intervention_document():
    doc = {
        "input_dim": 2,
        "outcomes": [
            {"label": "0", "output_dim": 2, "kraus": [matrix_doc(np.diag([1, 0]))]},
            {"label": "1", "output_dim": 1, "kraus": [matrix_doc([[0, 1]])]},
        ],
    }
    kind, model = parse_document(doc)
    assert kind == "intervention"
    k = model.to_domain()
    assert k.labels == ["0", "1"]
    assert k.output_dim("1") == 1


def test_declared_shape_is_checked():
    doc = {"input_dim": 2, "outcomes": [{"label": "0", "output_dim": 3, "kraus": [matrix_doc(np.eye(2))]}]}
    _, model = parse_document(doc)
    with pytest.raises(DimMismatch):
        model.to_domain()


@pytest.mark.parametrize(
    "doc",
    [
        {"rows": 2, "cols": 2, "entries": [[1, 0]] * 3},
        {"rows": 0, "cols": 2, "entries": []},
        {"rows": 1, "cols": 1, "entries": [[1, 0]], "extra": True},
    ],
)
def test_bad_matrix_documents(doc):
    with pytest.raises(SchemaError):
        parse_document({"kind": "density", "matrix": doc}, "state")


def test_state_documents():
    _, pure = parse_document({"kind": "pure", "amplitudes": [[0.6, 0], [0, 0.8]]})
    rho = pure.to_density()
    assert rho.matrix[1, 1].real == pytest.approx(0.64)
    _, mixed = parse_document({"kind": "density", "matrix": matrix_doc(np.eye(2) / 2)})
    with pytest.raises(ValidationError, match="NeedPureState"):
        mixed.to_pure()
    with pytest.raises(SchemaError):
        parse_document({"kind": "pure"})


def test_generator_alias():
    g = make_generator(SIGMA_Z, [LOWERING])
    text = dumps(GeneratorModel.from_domain(g))
    assert '"H0"' in text
    _, model = parse_document(json.loads(text))
    assert np.array_equal(model.to_domain().jumps[0], g.jumps[0])


def test_encoding_keeps_exact_floats():
    k = computational_pvm()
    scaled = MatrixModel.from_domain(np.array([[0.1, 1 / 3], [np.pi, -2.5e-17]]))
    text = dumps(scaled)
    assert np.array_equal(MatrixModel.model_validate(json.loads(text)).to_domain(), scaled.to_domain())
    again = InterventionModel.model_validate(json.loads(dumps(InterventionModel.from_domain(k)))).to_domain()
    assert again.labels == k.labels


def test_read_json_errors(tmp_path):
    with pytest.raises(ValidationError, match="MissingFile"):
        read_json(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(SchemaError):
        read_json(broken)


def test_load_document_with_forced_kind(tmp_path):
    path = tmp_path / "state.json"
    path.write_text(dumps(StateModel(kind="pure", amplitudes=[(1.0, 0.0), (0.0, 0.0)])))
    kind, model = load_document(path, "state")
    assert kind == "state"
    assert model.to_pure().dim == 2
