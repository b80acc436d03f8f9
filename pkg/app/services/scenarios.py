"""
Experiments as chains of adaptive stages, loaded from files or bundled.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from app import config
from app.core.dilation import embed_local, kraus_from_povm
from app.core.errors import ScenarioError, UnknownOutcome
from app.core.intervention import (
    AdaptiveIntervention,
    Intervention,
    compose,
    make_adaptive,
    make_intervention,
    root_stage,
)
from app.core.types import DensityMatrix, PureState, basis_state, make_povm, pure_state
from app.services.codec import (
    InterventionModel,
    PovmModel,
    ScenarioModel,
    StageEntry,
    load_document,
    parse_document,
    read_json,
)

logger = logging.getLogger(__name__)

BUNDLED_PREFIX = "bundled:"


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    initial_state: DensityMatrix
    stages: Tuple[AdaptiveIntervention, ...]
    initial_pure: Optional[PureState] = None
    shots: Optional[int] = None
    seed: Optional[int] = None

    @property
    def first(self) -> Intervention:
        return self.stages[0].branch(config.ROOT_LABEL)


def check_chain(stages: List[AdaptiveIntervention], input_dim: int) -> None:
    """Walk every reachable record prefix and check a branch exists and its input dimension fits."""
    if not stages:
        raise ScenarioError("at least one stage is required")
    if stages[0].labels != [config.ROOT_LABEL]:
        raise ScenarioError(f"the first stage must have the single key {config.ROOT_LABEL!r}, got {stages[0].labels}")
    frontier = [(config.ROOT_LABEL, input_dim)]
    for depth, stage in enumerate(stages):
        next_frontier = []
        for label, dim in frontier:
            try:
                k = stage.branch(label)
            except UnknownOutcome:
                raise ScenarioError(f"stage {depth} has no branch for record {label!r}")
            if k.input_dim != dim:
                raise ScenarioError(f"stage {depth}, branch {label!r} acts on dimension {k.input_dim}, state has {dim}")
            for o in k.outcomes:
                record = o.label if depth == 0 else f"{o.label}{config.LABEL_SEPARATOR}{label}"
                next_frontier.append((record, o.output_dim))
        frontier = next_frontier


def compose_chain(stages: List[AdaptiveIntervention]) -> Intervention:
    """Fold every stage into one intervention whose outcomes are full records."""
    total = stages[0].branch(config.ROOT_LABEL)
    for stage in stages[1:]:
        total = compose(stage, total)
    return total


def _resolve_entry(entry: StageEntry, base: Path, strict: bool) -> Intervention:
    if isinstance(entry, InterventionModel):
        return entry.to_domain(strict=strict)
    if isinstance(entry, PovmModel):
        return kraus_from_povm(entry.to_domain())
    path = (base / entry).resolve()
    kind, model = load_document(path)
    if kind == "intervention":
        return model.to_domain(strict=strict)
    if kind == "povm":
        return kraus_from_povm(model.to_domain())
    raise ScenarioError(f"stage file {path} holds a {kind}, expected an intervention or POVM")


def scenario_from_model(model: ScenarioModel, base: Path, strict: bool = True) -> Scenario:
    """Resolve every stage; with ``strict=False`` incomplete branches load so they can be inspected."""
    initial = model.initial_state.to_density()
    initial_pure = model.initial_state.to_pure() if model.initial_state.kind == "pure" else None
    stages = []
    for stage in model.stages:
        branches = {label: _resolve_entry(entry, base, strict) for label, entry in stage.items()}
        stages.append(make_adaptive(branches, strict=strict))
    check_chain(stages, initial.dim)
    return Scenario(model.name, initial, tuple(stages), initial_pure, model.shots, model.seed)


# Bundled scenarios


def _projectors(vectors: List[np.ndarray]) -> List[np.ndarray]:
    return [np.outer(v, v.conj()) for v in vectors]


def _qubit_pvm(theta: float = 0.0, labels=("0", "1")) -> Intervention:
    """Projective qubit measurement along cos(theta)|0> + sin(theta)|1> and its orthogonal partner."""
    up = np.array([np.cos(theta), np.sin(theta)])
    down = np.array([-np.sin(theta), np.cos(theta)])
    return make_intervention([(label, [p]) for label, p in zip(labels, _projectors([up, down]))])


def computational() -> Scenario:
    k = _qubit_pvm()
    psi = pure_state([1 / np.sqrt(2), 1 / np.sqrt(2)])
    return Scenario("computational", psi.density(), (root_stage(k),), psi)


def trine_povm():
    vectors = [np.array([np.cos(j * np.pi / 3), np.sin(j * np.pi / 3)]) for j in range(3)]
    return make_povm([(str(j), (2.0 / 3.0) * p) for j, p in enumerate(_projectors(vectors))])


def trine() -> Scenario:
    psi = basis_state(2, 0)
    return Scenario("trine", psi.density(), (root_stage(kraus_from_povm(trine_povm())),), psi)


def amplitude_damping(gamma: float = 0.3) -> Scenario:
    k = make_intervention(
        [("damp", [np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]]), np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])])]
    )
    psi = basis_state(2, 1)
    return Scenario("amplitude-damping", psi.density(), (root_stage(k),), psi)


BELL = {
    "phi+": np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2),
    "phi-": np.array([1.0, 0.0, 0.0, -1.0]) / np.sqrt(2),
    "psi+": np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2),
    "psi-": np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2),
}

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

# Bob's fix-up after each of Alice's Bell outcomes
CORRECTIONS = {
    "phi+": np.eye(2),
    "phi-": PAULI_Z,
    "psi+": PAULI_X,
    "psi-": PAULI_Z @ PAULI_X,
}

TELEPORTED = pure_state([np.cos(np.pi / 8), np.exp(1j * np.pi / 4) * np.sin(np.pi / 8)])


def teleportation(psi: PureState = TELEPORTED) -> Scenario:
    """
    Qubit order: input, Alice's half of |phi+>, Bob's half.

    Alice's Bell measurement discards both her qubits, so each Kraus matrix is
    the 2x8 product of a single-row bra with Bob's identity.
    """
    alice = make_intervention([(label, [np.kron(bra.conj()[None, :], np.eye(2))]) for label, bra in BELL.items()])
    bob = make_adaptive({label: make_intervention([("corrected", [c])]) for label, c in CORRECTIONS.items()})
    initial = pure_state(np.kron(psi.amplitudes, BELL["phi+"]))
    return Scenario("teleportation", initial.density(), (root_stage(alice), bob), initial)


def two_observer(angle: float = np.pi / 8) -> Scenario:
    """Bell pair; Alice reads Z, then Bob measures along +angle after "0" and -angle after "1"."""
    alice = embed_local(_qubit_pvm(), 0, [2, 2])
    bob = make_adaptive(
        {
            "0": embed_local(_qubit_pvm(angle, ("up", "down")), 1, [2, 2]),
            "1": embed_local(_qubit_pvm(-angle, ("up", "down")), 1, [2, 2]),
        }
    )
    initial = pure_state(BELL["phi+"])
    return Scenario("two-observer", initial.density(), (root_stage(alice), bob), initial)


BUNDLED: Dict[str, Callable[[], Scenario]] = {
    "computational": computational,
    "trine": trine,
    "amplitude-damping": amplitude_damping,
    "teleportation": teleportation,
    "two-observer": two_observer,
}


def bundled(name: str) -> Scenario:
    if name not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r} (available: {', '.join(BUNDLED)})")
    scenario = BUNDLED[name]()
    check_chain(list(scenario.stages), scenario.initial_state.dim)
    return scenario


def is_bundled(ref: Union[str, Path]) -> bool:
    return str(ref).startswith(BUNDLED_PREFIX)


def load_scenario(ref: Union[str, Path], strict: bool = True) -> Scenario:
    """A scenario file, or ``bundled:NAME``."""
    if is_bundled(ref):
        return bundled(str(ref)[len(BUNDLED_PREFIX) :])
    path = Path(ref)
    _, model = parse_document(read_json(path), "scenario")
    scenario = scenario_from_model(model, path.parent, strict)
    logger.info(f"📄 Loaded scenario {scenario.name!r} with {len(scenario.stages)} stage(s)")
    return scenario
