"""
Bridges between POVMs, Kraus matrices and the premeasurement isometry.

The isometry U has one row per input basis state s and one column per
composite basis state (mu, sigma, m), with U[s, (mu, sigma, m)] = A_{mu m}[sigma, s].
Columns are ordered lexicographically in (mu, sigma, m), mu in declaration order.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app import config
from app.core.errors import (
    BadPadding,
    CompletionFailure,
    DimMismatch,
    NotIsometric,
    NumericalError,
    UnknownOutcome,
)
from app.core.intervention import (
    AdaptiveIntervention,
    Intervention,
    composed_label,
    make_intervention,
)
from app.core.linalg import check_dimension, identity, psd_sqrt, tensor, tensor_all
from app.core.types import (
    ComplexMatrix,
    DensityMatrix,
    MatrixLike,
    Povm,
    PureState,
    as_matrix,
    dagger,
    max_identity_deviation,
    validate_density,
)

logger = logging.getLogger(__name__)

Column = Tuple[str, int, int]


@dataclass(frozen=True)
class Block:
    label: str
    output_dim: int
    multiplicity: int
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.output_dim * self.multiplicity


def _blocks(columns: Sequence[Column]) -> List[Block]:
    """Split the column index into per-outcome blocks, checking each is a full (sigma, m) grid."""
    blocks: List[Block] = []
    position = 0
    seen = set()
    while position < len(columns):
        label = columns[position][0]
        if label in seen:
            raise DimMismatch(f"columns of outcome {label!r} are not contiguous")
        seen.add(label)
        stop = position
        while stop < len(columns) and columns[stop][0] == label:
            stop += 1
        entries = [(sigma, m) for _, sigma, m in columns[position:stop]]
        d = max(sigma for sigma, _ in entries) + 1
        r = max(m for _, m in entries) + 1
        expected = [(sigma, m) for sigma in range(d) for m in range(r)]
        if entries != expected:
            raise DimMismatch(f"columns of outcome {label!r} are not the lexicographic (sigma, m) grid {d}x{r}")
        blocks.append(Block(label, d, r, position))
        position = stop
    return blocks


def _find_block(blocks: Sequence[Block], label: str) -> Block:
    for block in blocks:
        if block.label == label:
            return block
    raise UnknownOutcome(label, [b.label for b in blocks])


@dataclass(frozen=True, eq=False)
class Dilation:
    input_dim: int
    column_index: Tuple[Column, ...]
    isometry: ComplexMatrix

    @property
    def composite_dim(self) -> int:
        return len(self.column_index)

    def blocks(self) -> List[Block]:
        return _blocks(self.column_index)


def make_dilation(columns: Sequence[Column], matrix: MatrixLike) -> Dilation:
    """Validate a premeasurement isometry: U U^dagger = 1 within 1e-9."""
    u = as_matrix(matrix, "dilation")
    columns = tuple((str(mu), int(sigma), int(m)) for mu, sigma, m in columns)
    if len(columns) != u.shape[1]:
        raise DimMismatch(f"{len(columns)} column labels for a matrix with {u.shape[1]} columns")
    _blocks(columns)
    check_dimension(u.shape[1])
    deviation = max_identity_deviation(u @ dagger(u))
    if deviation > config.ISOMETRY_TOL:
        raise NotIsometric(deviation)
    return Dilation(u.shape[0], columns, u)


def kraus_from_povm(p: Povm, paddings: Optional[Mapping[str, Sequence[MatrixLike]]] = None) -> Intervention:
    """
    Kraus matrices A_{mu m} = S_{mu m} sqrt(E_mu).

    Args:
        p: the POVM
        paddings: optional per-outcome lists S_{mu m} (same row count, input_dim
            columns) with sum_m S^dagger S = 1; absent outcomes use S = 1

    Returns:
        Intervention whose POVM is ``p``
    """
    paddings = dict(paddings or {})
    for label in paddings:
        if label not in p.labels:
            raise UnknownOutcome(label, p.labels)

    outcomes = []
    for label, e in p.elements:
        root = psd_sqrt(e)
        pads = [as_matrix(s, f"padding of {label!r}") for s in paddings.get(label, [np.eye(p.input_dim)])]
        if not pads:
            raise BadPadding(f"padding of {label!r} is empty")
        rows = pads[0].shape[0]
        for s in pads:
            if s.shape != (rows, p.input_dim):
                raise BadPadding(f"padding of {label!r} has shape {s.shape}, expected ({rows}, {p.input_dim})")
        deviation = max_identity_deviation(sum(dagger(s) @ s for s in pads))
        if deviation > config.COMPLETENESS_TOL:
            raise BadPadding(f"padding of {label!r} is not isometric, deviation {deviation:.3g}")
        outcomes.append((label, [s @ root for s in pads]))
    return make_intervention(outcomes)


def isometry_from_kraus(k: Intervention) -> Dilation:
    """Read the Kraus family as the premeasurement isometry; isometric exactly when ``k`` is complete."""
    columns: List[Column] = []
    parts = []
    for o in k.outcomes:
        stacked = np.stack(o.kraus)  # (m, sigma, s)
        parts.append(np.transpose(stacked, (1, 0, 2)).reshape(-1, k.input_dim).T)
        columns.extend((o.label, sigma, m) for sigma in range(o.output_dim) for m in range(len(o.kraus)))
    return make_dilation(columns, np.hstack(parts))


def complete_to_unitary(d: Dilation) -> ComplexMatrix:
    """
    Extend the isometry's rows to a full unitary.

    Standard basis vectors are swept in order and orthogonalised against the
    rows collected so far (two Gram-Schmidt passes); residuals below 1e-8 are
    skipped. The first ``input_dim`` rows are the dilation rows, untouched.
    """
    size = d.composite_dim
    rows = [row for row in np.array(d.isometry)]
    basis = np.array(rows)
    for j in range(size):
        if len(rows) == size:
            break
        candidate = np.zeros(size, dtype=np.complex128)
        candidate[j] = 1.0
        for _ in range(2):
            candidate = candidate - basis.T @ (basis.conj() @ candidate)
        norm = np.linalg.norm(candidate)
        if norm < config.COMPLETION_RESIDUAL:
            continue
        rows.append(candidate / norm)
        basis = np.array(rows)
    if len(rows) != size:
        raise CompletionFailure(f"found {len(rows)} orthonormal rows, need {size}")
    unitary = np.array(rows)
    deviation = max_identity_deviation(unitary @ dagger(unitary))
    if deviation > config.UNITARY_TOL:
        raise CompletionFailure(f"completed matrix deviates from unitary by {deviation:.3g}")
    logger.debug(f"✅ Completed {d.input_dim}x{size} isometry to a {size}x{size} unitary")
    return as_matrix(unitary)


@dataclass(frozen=True, eq=False)
class CompositeState:
    """System-apparatus state after premeasurement, one amplitude per (mu, sigma, m)"""

    column_index: Tuple[Column, ...]
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.column_index)

    def blocks(self) -> List[Block]:
        return _blocks(self.column_index)

    def block_vector(self, label: str) -> np.ndarray:
        block = _find_block(self.blocks(), label)
        return self.amplitudes[block.start : block.stop]

    def block_weights(self) -> List[Tuple[str, float]]:
        return [
            (b.label, float(np.vdot(self.amplitudes[b.start : b.stop], self.amplitudes[b.start : b.stop]).real))
            for b in self.blocks()
        ]

    def density(self) -> DensityMatrix:
        rho = np.outer(self.amplitudes, self.amplitudes.conj())
        return validate_density(rho)


def make_composite_state(columns: Sequence[Column], amplitudes: Sequence[complex]) -> CompositeState:
    columns = tuple((str(mu), int(sigma), int(m)) for mu, sigma, m in columns)
    vec = np.array(amplitudes, dtype=np.complex128)
    if vec.ndim != 1 or vec.size != len(columns):
        raise DimMismatch(f"{vec.size} amplitudes for {len(columns)} columns")
    _blocks(columns)
    norm2 = float(np.vdot(vec, vec).real)
    if abs(norm2 - 1.0) > config.PURE_NORM_TOL:
        raise NumericalError("NormLoss", f"composite state has norm^2 {norm2:.15g}")
    vec.flags.writeable = False
    return CompositeState(columns, vec)


def premeasure(d: Dilation, psi0: PureState) -> CompositeState:
    """c'_{mu sigma m} = sum_s c_s U_{s,(mu sigma m)}"""
    if psi0.dim != d.input_dim:
        raise DimMismatch(f"state has dimension {psi0.dim}, dilation expects {d.input_dim}")
    amplitudes = psi0.amplitudes @ d.isometry
    norm2 = float(np.vdot(amplitudes, amplitudes).real)
    if abs(norm2 - 1.0) > config.TRACE_PRESERVATION_TOL:
        raise NumericalError("NormLoss", f"premeasured state has norm^2 {norm2:.15g}")
    amplitudes.flags.writeable = False
    return CompositeState(d.column_index, amplitudes)


def discard(c: CompositeState, mu: str) -> DensityMatrix:
    """Keep block mu and trace out its m factor: rho'_mu[sigma, tau] = sum_m c_{sigma m} c*_{tau m}."""
    block = _find_block(c.blocks(), mu)
    grid = c.amplitudes[block.start : block.stop].reshape(block.output_dim, block.multiplicity)
    return validate_density(grid @ dagger(grid), conditional=True)


def tensor_intervention(k1: Intervention, k2: Intervention) -> Intervention:
    """Independent interventions on two subsystems; outcome "mu,nu", Kraus A1_{mu m} (x) A2_{nu n}."""
    outcomes = []
    for first in k1.outcomes:
        for second in k2.outcomes:
            kraus = [tensor(a, b) for a in first.kraus for b in second.kraus]
            outcomes.append((f"{first.label}{config.PAIR_SEPARATOR}{second.label}", kraus))
    return make_intervention(outcomes, records=True)


def adaptive_tensor(k1: Intervention, k2_by_outcome: AdaptiveIntervention) -> Intervention:
    """
    Subsystem 2 is measured with a POVM chosen by subsystem 1's outcome.

    Outcome "nu.mu" has Kraus matrices A1_{mu m} (x) A2_{nu mu n}, so that
    E_{nu mu} = E1_mu (x) E2_{nu mu}.
    """
    second_dim = None
    outcomes = []
    for first in k1.outcomes:
        follow = k2_by_outcome.branch(first.label)
        if second_dim is None:
            second_dim = follow.input_dim
        if follow.input_dim != second_dim:
            raise DimMismatch(
                f"branch {first.label!r} acts on dimension {follow.input_dim}, other branches on {second_dim}"
            )
        for second in follow.outcomes:
            kraus = [tensor(a, b) for a in first.kraus for b in second.kraus]
            outcomes.append((composed_label(second.label, first.label), kraus))
    return make_intervention(outcomes, records=True)


def embed_local(k: Intervention, subsystem: int, dims: Sequence[int]) -> Intervention:
    """Act with ``k`` on one tensor factor and with the identity on all others."""
    dims = [int(x) for x in dims]
    if not 0 <= subsystem < len(dims):
        raise DimMismatch(f"subsystem {subsystem} out of range for {len(dims)} factors")
    if dims[subsystem] != k.input_dim:
        raise DimMismatch(f"factor {subsystem} has dimension {dims[subsystem]}, intervention expects {k.input_dim}")
    check_dimension(int(np.prod(dims)))
    outcomes = []
    for o in k.outcomes:
        kraus = []
        for a in o.kraus:
            factors = [a if i == subsystem else identity(dims[i]) for i in range(len(dims))]
            kraus.append(tensor_all(factors))
        outcomes.append((o.label, kraus))
    return make_intervention(outcomes, strict=k.is_complete, records=True)
