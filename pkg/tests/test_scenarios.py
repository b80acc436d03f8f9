import numpy as np
import pytest

from app.core.errors import IncompleteIntervention, ScenarioError
from app.core.intervention import apply_selective, make_adaptive, make_intervention, outcome_probabilities, root_stage
from app.core.types import pure_state
from app.services.codec import InterventionModel, PovmModel, ScenarioModel, StateModel, dumps
from app.services.scenarios import (
    BUNDLED,
    TELEPORTED,
    check_chain,
    compose_chain,
    load_scenario,
    trine_povm,
)
from tests.builders import P0, P1, computational_pvm, identity_intervention


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_scenarios_load(name):
    scenario = load_scenario(f"bundled:{name}")
    assert scenario.initial_state.is_normalized()
    composed = compose_chain(list(scenario.stages))
    probs = [p for _, p in outcome_probabilities(composed, scenario.initial_state)]
    assert sum(probs) == pytest.approx(1.0)


def test_unknown_bundled_scenario():
    with pytest.raises(ScenarioError):
        load_scenario("bundled:nope")


def test_teleportation_recovers_the_input():
    scenario = load_scenario("bundled:teleportation")
    composed = compose_chain(list(scenario.stages))
    assert composed.labels == ["corrected.phi+", "corrected.phi-", "corrected.psi+", "corrected.psi-"]
    for label in composed.labels:
        out = apply_selective(composed, scenario.initial_state, label)
        assert out.trace_norm == pytest.approx(0.25)
        assert np.allclose(out.normalized().matrix, TELEPORTED.density().matrix, atol=1e-12)


def test_two_observer_statistics():
    scenario = load_scenario("bundled:two-observer")
    probs = dict(outcome_probabilities(compose_chain(list(scenario.stages)), scenario.initial_state))
    c2 = np.cos(np.pi / 8) ** 2
    assert probs["up.0"] == pytest.approx(0.5 * c2)
    assert probs["down.0"] == pytest.approx(0.5 * (1 - c2))
    assert probs["up.1"] == pytest.approx(0.5 * (1 - c2))


def test_amplitude_damping_scenario():
    scenario = load_scenario("bundled:amplitude-damping")
    out = apply_selective(scenario.first, scenario.initial_state, "damp")
    assert np.allclose(out.matrix, np.diag([0.3, 0.7]))


def test_check_chain_errors():
    pvm = computational_pvm()
    with pytest.raises(ScenarioError):
        check_chain([], 2)
    with pytest.raises(ScenarioError):
        check_chain([make_adaptive({"0": pvm})], 2)
    with pytest.raises(ScenarioError):
        check_chain([root_stage(pvm), make_adaptive({"0": pvm})], 2)
    with pytest.raises(ScenarioError):
        check_chain([root_stage(pvm), make_adaptive({"0": pvm, "1": identity_intervention(3)})], 2)


def test_check_chain_falls_back_to_newest_outcome():
    pvm = computational_pvm()
    stages = [root_stage(pvm), make_adaptive({"0": pvm, "1": pvm}), make_adaptive({"0": pvm, "1": pvm})]
    check_chain(stages, 2)


def scenario_file(tmp_path, follow_up, seed=7):
    pvm = computational_pvm()
    (tmp_path / "follow.json").write_text(dumps(InterventionModel.from_domain(follow_up)))
    model = ScenarioModel(
        name="file",
        initial_state=StateModel.from_domain(pure_state([1 / np.sqrt(2), 1 / np.sqrt(2)])),
        stages=[
            {"root": InterventionModel.from_domain(pvm)},
            {"0": "follow.json", "1": PovmModel.from_domain(trine_povm())},
        ],
        shots=1000,
        seed=seed,
    )
    path = tmp_path / "scenario.json"
    path.write_text(dumps(model))
    return path


def test_scenario_from_file(tmp_path):
    scenario = load_scenario(scenario_file(tmp_path, identity_intervention(2)))
    assert scenario.name == "file"
    assert scenario.seed == 7
    assert scenario.shots == 1000
    assert scenario.initial_pure is not None
    assert scenario.stages[1].branch("1").labels == ["0", "1", "2"]
    probs = dict(outcome_probabilities(compose_chain(list(scenario.stages)), scenario.initial_state))
    assert probs["id.0"] == pytest.approx(0.5)


def test_incomplete_branch_needs_lenient_loading(tmp_path):
    scaled = make_intervention([("0", [0.9 * P0]), ("1", [0.9 * P1])], strict=False)
    path = scenario_file(tmp_path, scaled)
    with pytest.raises(IncompleteIntervention):
        load_scenario(path)
    scenario = load_scenario(path, strict=False)
    assert not scenario.stages[1].branch("0").is_complete
