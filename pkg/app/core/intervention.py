"""
Interventions: outcome-labelled families of (possibly rectangular) Kraus matrices.

An outcome mu maps a state rho on the input space to the unnormalised state
sum_m A_{mu m} rho A_{mu m}^dagger on a space whose dimension may depend on mu.
Its trace is the probability of mu.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app import config
from app.core.errors import (
    BadTrace,
    DimMismatch,
    HeterogeneousOutputDims,
    IncompleteIntervention,
    ProbabilityOutOfRange,
    ScenarioError,
    UnknownOutcome,
    ValidationError,
    ZeroProbabilityBranch,
)
from app.core.linalg import check_dimension
from app.core.streams import RngStream
from app.core.types import (
    ComplexMatrix,
    DensityMatrix,
    MatrixLike,
    Povm,
    as_matrix,
    dagger,
    make_povm,
    max_identity_deviation,
    validate_density,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Outcome:
    label: str
    output_dim: int
    kraus: Tuple[ComplexMatrix, ...]

    def effect(self) -> ComplexMatrix:
        """E = sum_m A_m^dagger A_m"""
        return sum(dagger(a) @ a for a in self.kraus)


@dataclass(frozen=True, eq=False)
class Intervention:
    input_dim: int
    outcomes: Tuple[Outcome, ...]
    completeness_deviation: float

    @property
    def labels(self) -> List[str]:
        return [o.label for o in self.outcomes]

    @property
    def is_complete(self) -> bool:
        return self.completeness_deviation <= config.COMPLETENESS_TOL

    def outcome(self, label: str) -> Outcome:
        for o in self.outcomes:
            if o.label == label:
                return o
        raise UnknownOutcome(label, self.labels)

    def output_dim(self, label: str) -> int:
        return self.outcome(label).output_dim

    def __repr__(self) -> str:
        dims = ", ".join(f"{o.label}:{o.output_dim}x{self.input_dim}*{len(o.kraus)}" for o in self.outcomes)
        return f"Intervention({dims})"


def check_label(label: str) -> None:
    """Outcome labels are atomic: record lookups split on the separators."""
    if not label:
        raise ValidationError("BadLabel", "outcome labels must not be empty")
    for separator in (config.LABEL_SEPARATOR, config.PAIR_SEPARATOR):
        if separator in label:
            raise ValidationError("BadLabel", f"outcome label {label!r} contains the record separator {separator!r}")


def make_intervention(
    outcomes: Sequence[Tuple[str, Sequence[MatrixLike]]],
    *,
    strict: bool = True,
    records: bool = False,
) -> Intervention:
    """
    Build and validate an Intervention.

    Args:
        outcomes: ordered (label, [A_mu1, A_mu2, ...]) pairs; every A_mu has
            shape d_mu x d_in
        strict: require sum A^dagger A = 1 (disable only to inspect faulty sets)
        records: labels are composed records ("nu.mu", "mu,nu") built from
            already validated labels; otherwise separators are refused

    Returns:
        Intervention with its completeness deviation recorded
    """
    if not outcomes:
        raise ValidationError("EmptyIntervention", "an intervention needs at least one outcome")
    labels = [str(label) for label, _ in outcomes]
    if len(set(labels)) != len(labels):
        raise ValidationError("DuplicateLabel", f"outcome labels must be unique: {labels}")
    if not records:
        for label in labels:
            check_label(label)

    input_dim: Optional[int] = None
    built = []
    for label, kraus in outcomes:
        if len(kraus) == 0:
            raise ValidationError("EmptyOutcome", f"outcome {label!r} has no Kraus matrices")
        mats = tuple(as_matrix(a, f"Kraus matrix of {label!r}") for a in kraus)
        rows, cols = mats[0].shape
        if input_dim is None:
            input_dim = cols
        for a in mats:
            if a.shape != (rows, input_dim):
                raise DimMismatch(f"Kraus matrix of {label!r} has shape {a.shape}, expected {(rows, input_dim)}")
        check_dimension(rows)
        built.append(Outcome(str(label), rows, mats))
    check_dimension(input_dim)

    total = sum(o.effect() for o in built)
    deviation = max_identity_deviation(total)
    if strict and deviation > config.COMPLETENESS_TOL:
        raise IncompleteIntervention(deviation)
    return Intervention(input_dim, tuple(built), deviation)


@dataclass(frozen=True, eq=False)
class AdaptiveIntervention:
    """Interventions chosen by the label of the preceding outcome"""

    branches: Tuple[Tuple[str, Intervention], ...]

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.branches]

    def branch(self, label: str) -> Intervention:
        """Exact label first, then its most recent component (``"nu.mu"`` falls back to ``"nu"``)."""
        table = dict(self.branches)
        if label in table:
            return table[label]
        newest = label.split(config.LABEL_SEPARATOR, 1)[0]
        if newest in table:
            return table[newest]
        raise UnknownOutcome(label, self.labels)


def make_adaptive(branches: Mapping[str, Intervention], *, strict: bool = True) -> AdaptiveIntervention:
    if not branches:
        raise ValidationError("EmptyAdaptive", "an adaptive intervention needs at least one branch")
    for label, k in branches.items():
        if strict and not k.is_complete:
            raise IncompleteIntervention(k.completeness_deviation, f"branch {label!r}")
    return AdaptiveIntervention(tuple((str(label), k) for label, k in branches.items()))


def uniform(k: Intervention, labels: Sequence[str]) -> AdaptiveIntervention:
    """The same intervention whatever the preceding outcome was."""
    return make_adaptive({label: k for label in labels}, strict=k.is_complete)


def root_stage(k: Intervention) -> AdaptiveIntervention:
    return make_adaptive({config.ROOT_LABEL: k}, strict=k.is_complete)


def _check_input(k: Intervention, rho: DensityMatrix) -> None:
    if rho.dim != k.input_dim:
        raise DimMismatch(f"state has dimension {rho.dim}, intervention expects {k.input_dim}")


def _sandwich(kraus: Sequence[ComplexMatrix], rho: np.ndarray) -> np.ndarray:
    return sum(a @ rho @ dagger(a) for a in kraus)


def apply_selective(k: Intervention, rho: DensityMatrix, mu: str) -> DensityMatrix:
    """Unnormalised post-measurement state for outcome ``mu``; its trace is the probability of ``mu``."""
    _check_input(k, rho)
    outcome = k.outcome(mu)
    return validate_density(_sandwich(outcome.kraus, rho.matrix), conditional=True)


def condition(k: Intervention, rho: DensityMatrix, mu: str) -> DensityMatrix:
    """Post-measurement state for ``mu`` renormalised to trace 1."""
    out = apply_selective(k, rho, mu)
    if out.trace_norm < config.ZERO_PROBABILITY:
        raise ZeroProbabilityBranch(mu, out.trace_norm)
    return out.normalized()


def _clamp_probability(label: str, p: float) -> float:
    if p < -config.PROBABILITY_CLAMP or p > 1.0 + config.TRACE_TOL:
        raise ProbabilityOutOfRange(label, p)
    return min(max(p, 0.0), 1.0)


def outcome_probabilities(k: Intervention, rho: DensityMatrix) -> List[Tuple[str, float]]:
    """p_mu = Tr(E_mu rho) for a normalised ``rho``, clamped to [0, 1]."""
    _check_input(k, rho)
    if not rho.is_normalized():
        raise BadTrace(f"outcome probabilities need a normalised state, trace is {rho.trace_norm:.12g}")
    probabilities = []
    for o in k.outcomes:
        p = float(np.real(np.sum(o.effect() * rho.matrix.T)))
        probabilities.append((o.label, _clamp_probability(o.label, p)))
    return probabilities


def povm_of(k: Intervention) -> Povm:
    return make_povm([(o.label, o.effect()) for o in k.outcomes])


def apply_nonselective(k: Intervention, rho: DensityMatrix) -> DensityMatrix:
    """Average over unrecorded outcomes; needs one common output dimension."""
    _check_input(k, rho)
    dims = {o.output_dim for o in k.outcomes}
    if len(dims) != 1:
        raise HeterogeneousOutputDims(f"outcomes have output dimensions {sorted(dims)}")
    total = sum(_sandwich(o.kraus, rho.matrix) for o in k.outcomes)
    return validate_density(total, conditional=True)


def composed_label(later: str, earlier: str) -> str:
    return f"{later}{config.LABEL_SEPARATOR}{earlier}"


def compose(b: AdaptiveIntervention, a: Intervention) -> Intervention:
    """
    Run ``a``, then the branch of ``b`` selected by a's outcome.

    Outcome "nu.mu" has Kraus matrices C = B_{nu mu n} A_{mu m}, indexed (n, m).
    """
    outcomes = []
    for first in a.outcomes:
        follow = b.branch(first.label)
        if follow.input_dim != first.output_dim:
            raise DimMismatch(
                f"branch {first.label!r} expects dimension {follow.input_dim}, outcome leaves {first.output_dim}"
            )
        for second in follow.outcomes:
            kraus = [bn @ am for bn in second.kraus for am in first.kraus]
            outcomes.append((composed_label(second.label, first.label), kraus))
    return make_intervention(outcomes, records=True)


@dataclass(frozen=True)
class RefinementBranch:
    label: str
    complete: bool
    completeness_deviation: float
    refinement_deviation: Optional[float]

    @property
    def holds(self) -> bool:
        return (
            self.complete
            and self.refinement_deviation is not None
            and self.refinement_deviation <= config.COMPLETENESS_TOL
        )


@dataclass(frozen=True)
class RefinementReport:
    branches: Tuple[RefinementBranch, ...]

    @property
    def holds(self) -> bool:
        return all(br.holds for br in self.branches)

    @property
    def max_deviation(self) -> float:
        return max(br.completeness_deviation for br in self.branches)


def check_refinement(b: AdaptiveIntervention, a: Intervention) -> RefinementReport:
    """
    Check, per first outcome mu, whether the follow-up splits E_mu.

    A branch refines E_mu when sum_{nu,n} B^dagger B = 1; then
    sum_nu E_{nu mu} = sum_m A^dagger (sum B^dagger B) A must equal E_mu.
    """
    branches = []
    for first in a.outcomes:
        follow = b.branch(first.label)
        if follow.input_dim != first.output_dim:
            raise DimMismatch(
                f"branch {first.label!r} expects dimension {follow.input_dim}, outcome leaves {first.output_dim}"
            )
        accumulated = sum(second.effect() for second in follow.outcomes)
        deviation = max_identity_deviation(accumulated)
        complete = deviation <= config.COMPLETENESS_TOL
        refinement = None
        if complete:
            refined = sum(dagger(am) @ accumulated @ am for am in first.kraus)
            refinement = float(np.max(np.abs(refined - first.effect())))
        branches.append(RefinementBranch(first.label, complete, deviation, refinement))
        if not complete:
            logger.info(f"⚠️ Branch {first.label!r} is not complete (deviation {deviation:.3g})")
    return RefinementReport(tuple(branches))


def choi_matrix(k: Intervention, mu: str) -> ComplexMatrix:
    """sum_ij map(|i><j|) (x) |i><j|, output factor first; PSD iff the outcome map is completely positive."""
    outcome = k.outcome(mu)
    vectors = [a.reshape(-1) for a in outcome.kraus]
    return as_matrix(sum(np.outer(v, v.conj()) for v in vectors))


def split_kraus(k: Intervention, mu: str, weights: Sequence[float]) -> Intervention:
    """Replace every A_{mu m} by proportional copies sqrt(w_i / sum w) A_{mu m}."""
    w = np.asarray(weights, dtype=float)
    if w.size < 1 or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValidationError("BadWeights", f"split weights must be positive, got {list(weights)}")
    scale = np.sqrt(w / w.sum())
    k.outcome(mu)
    outcomes = []
    for o in k.outcomes:
        kraus = [s * a for a in o.kraus for s in scale] if o.label == mu else list(o.kraus)
        outcomes.append((o.label, kraus))
    return make_intervention(outcomes, strict=k.is_complete, records=True)


@dataclass(frozen=True)
class Record:
    """Chronological outcome list of one run of an experiment, with its exact probability"""

    outcome_sequence: Tuple[str, ...]
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError("BadProbability", f"record probability {self.probability} outside [0, 1]")

    @property
    def label(self) -> str:
        return config.LABEL_SEPARATOR.join(reversed(self.outcome_sequence))


@dataclass
class _Node:
    prefix: Tuple[str, ...]
    probability: float
    state: DensityMatrix
    children: List[int] = field(default_factory=list)
    cdf: Optional[np.ndarray] = None


def _build_record_tree(stages: Sequence[AdaptiveIntervention], rho0: DensityMatrix) -> List[_Node]:
    nodes = [_Node((), 1.0, rho0)]
    frontier = [0]
    for depth, stage in enumerate(stages):
        next_frontier = []
        for index in frontier:
            node = nodes[index]
            key = config.ROOT_LABEL if depth == 0 else config.LABEL_SEPARATOR.join(reversed(node.prefix))
            k = stage.branch(key)
            conditional = []
            for o in k.outcomes:
                out = apply_selective(k, node.state, o.label)
                if out.trace_norm < config.ZERO_PROBABILITY:
                    continue
                conditional.append(out.trace_norm)
                child = _Node(node.prefix + (o.label,), node.probability * out.trace_norm, out.normalized())
                nodes.append(child)
                node.children.append(len(nodes) - 1)
                next_frontier.append(len(nodes) - 1)
            if not conditional:
                raise ZeroProbabilityBranch(key, 0.0)
            weights = np.asarray(conditional)
            node.cdf = np.cumsum(weights / weights.sum())
            node.state = None
        frontier = next_frontier
    return nodes


def _sample_block(nodes: List[_Node], depth: int, shots: int, stream: RngStream) -> np.ndarray:
    u = stream.generator().random((shots, depth))
    current = np.zeros(shots, dtype=np.int64)
    for level in range(depth):
        for index in np.unique(current):
            mask = current == index
            node = nodes[index]
            choice = np.searchsorted(node.cdf, u[mask, level], side="right")
            choice = np.minimum(choice, len(node.children) - 1)
            current[mask] = np.asarray(node.children)[choice]
    return np.bincount(current, minlength=len(nodes))


def sample_records(
    stages: Sequence[AdaptiveIntervention],
    rho0: DensityMatrix,
    shots: int,
    stream: RngStream,
    workers: Optional[int] = None,
) -> Dict[Record, float]:
    """
    Monte-Carlo sample complete records of a staged experiment.

    Stage 0 is keyed by the root label; stage d > 0 by the record so far
    (newest-first label, falling back to the last outcome). Each shot draws
    an outcome from the conditional state, conditions on it and moves on.

    Args:
        stages: adaptive stages in chronological order
        rho0: normalised initial state
        shots: number of runs
        stream: random stream; block i of shots uses ``stream.child(i)``
        workers: thread count (results do not depend on it)

    Returns:
        record -> empirical frequency, where each record carries its exact
        probability from chained selective maps
    """
    if not stages:
        raise ScenarioError("at least one stage is required")
    if config.ROOT_LABEL not in stages[0].labels:
        raise ScenarioError(f"the first stage must be keyed by {config.ROOT_LABEL!r}")
    if shots < 1:
        raise ValidationError("BadShots", f"shots must be positive, got {shots}")
    if not rho0.is_normalized():
        raise BadTrace(f"initial state must be normalised, trace is {rho0.trace_norm:.12g}")

    nodes = _build_record_tree(stages, rho0)
    depth = len(stages)
    blocks = [(i, min(config.SHOT_BLOCK, shots - i * config.SHOT_BLOCK)) for i in range(-(-shots // config.SHOT_BLOCK))]
    workers = workers or config.WORKERS
    logger.info(f"🎲 Sampling {shots} shots in {len(blocks)} blocks with {workers} worker(s)")

    def run(block):
        index, size = block
        return _sample_block(nodes, depth, size, stream.child(index))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(run, blocks))
    else:
        counts = sum(run(block) for block in blocks)

    frequencies: Dict[Record, float] = {}
    for index, node in enumerate(nodes):
        if len(node.prefix) == depth:
            record = Record(node.prefix, min(node.probability, 1.0))
            frequencies[record] = float(counts[index]) / shots
    return frequencies


def total_variation(frequencies: Mapping[Record, float]) -> float:
    return 0.5 * sum(abs(f - record.probability) for record, f in frequencies.items())
