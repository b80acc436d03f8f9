"""
Validated domain types: complex matrices, density matrices, pure states, POVMs.

Every object returned from this module has passed its invariants and holds
read-only numpy arrays, so it can be shared freely between workers.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from app import config
from app.core.errors import (
    BadTrace,
    DimMismatch,
    IncompleteIntervention,
    NonFinite,
    NotHermitian,
    NotPositive,
    UnknownOutcome,
    ValidationError,
)

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]
MatrixLike = Union[ComplexMatrix, Sequence[Sequence[complex]]]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def as_matrix(m: MatrixLike, what: str = "matrix") -> ComplexMatrix:
    """Copy ``m`` into a read-only complex128 matrix, rejecting bad shapes and NaN/Inf."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimMismatch(f"{what} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{what} contains NaN or Inf entries")
    return _frozen(arr)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitian_deviation(m: np.ndarray) -> float:
    """Max |m_st - conj(m_ts)|, scaled by max(1, max |m|)."""
    scale = max(1.0, float(np.max(np.abs(m))))
    return float(np.max(np.abs(m - dagger(m)))) / scale


def check_hermitian(m: np.ndarray, what: str = "matrix", tol: float = config.HERMITIAN_TOL) -> None:
    if m.shape[0] != m.shape[1]:
        raise DimMismatch(f"{what} must be square, got {m.shape}")
    deviation = hermitian_deviation(m)
    if deviation > tol:
        raise NotHermitian(f"{what} deviates from Hermitian by {deviation:.3g}")


def min_eigenvalue(m: np.ndarray) -> float:
    hermitian_part = 0.5 * (m + dagger(m))
    return float(np.linalg.eigvalsh(hermitian_part)[0])


def check_positive(m: np.ndarray, what: str = "matrix", tol: float = config.PSD_TOL) -> None:
    lowest = min_eigenvalue(m)
    if lowest < -tol:
        raise NotPositive(f"{what} has eigenvalue {lowest:.6g} below -{tol:g}")


def max_identity_deviation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - np.eye(m.shape[0]))))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian PSD matrix; ``trace_norm`` is 1, or the outcome probability for conditional states"""

    dim: int
    matrix: ComplexMatrix
    trace_norm: float

    @property
    def probability(self) -> float:
        return self.trace_norm

    def is_normalized(self, tol: float = config.TRACE_TOL) -> bool:
        return abs(self.trace_norm - 1.0) <= tol

    def normalized(self) -> "DensityMatrix":
        if self.trace_norm <= 0.0:
            raise BadTrace("cannot normalise a zero-trace state")
        return DensityMatrix(self.dim, _frozen(self.matrix / self.trace_norm), 1.0)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, trace_norm={self.trace_norm:.6g})"


def validate_density(
    m: Union[MatrixLike, DensityMatrix],
    *,
    conditional: bool = False,
    psd_tol: float = config.PSD_TOL,
) -> DensityMatrix:
    """
    Validate a candidate density matrix.

    Args:
        m: square matrix (or an already validated DensityMatrix)
        conditional: accept a zero trace (an outcome that cannot occur)
        psd_tol: how far below zero the smallest eigenvalue may dip

    Returns:
        DensityMatrix with its trace recorded in ``trace_norm``
    """
    if isinstance(m, DensityMatrix):
        m = m.matrix
    arr = as_matrix(m, "density matrix")
    check_hermitian(arr, "density matrix")
    hermitian = 0.5 * (arr + dagger(arr))
    check_positive(hermitian, "density matrix", psd_tol)

    trace = float(np.real(np.trace(hermitian)))
    if trace > 1.0 + config.TRACE_TOL:
        raise BadTrace(f"trace {trace:.12g} exceeds 1")
    if conditional and trace <= config.TRACE_TOL:
        return DensityMatrix(arr.shape[0], _frozen(hermitian), 0.0)
    if trace <= 0.0:
        raise BadTrace(f"trace {trace:.6g} is not positive")
    return DensityMatrix(arr.shape[0], _frozen(hermitian), trace)


@dataclass(frozen=True, eq=False)
class PureState:
    dim: int
    amplitudes: npt.NDArray[np.complex128]

    def density(self) -> DensityMatrix:
        rho = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityMatrix(self.dim, _frozen(rho), 1.0)


def pure_state(amplitudes: Iterable[complex], normalize: bool = False) -> PureState:
    vec = np.array(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes, dtype=np.complex128)
    if vec.ndim != 1 or vec.size < 1:
        raise DimMismatch(f"amplitudes must be a non-empty vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise NonFinite("amplitudes contain NaN or Inf")
    norm = float(np.linalg.norm(vec))
    if normalize:
        if norm == 0.0:
            raise BadTrace("cannot normalise the zero vector")
        vec = vec / norm
    elif abs(norm**2 - 1.0) > config.PURE_NORM_TOL:
        raise BadTrace(f"state norm^2 is {norm**2:.15g}, expected 1")
    return PureState(vec.size, _frozen(vec))


def basis_state(dim: int, index: int) -> PureState:
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return PureState(dim, _frozen(vec))


@dataclass(frozen=True, eq=False)
class Povm:
    input_dim: int
    elements: Tuple[Tuple[str, ComplexMatrix], ...]

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.elements]

    def element(self, label: str) -> ComplexMatrix:
        for name, e in self.elements:
            if name == label:
                return e
        raise UnknownOutcome(label, self.labels)


def make_povm(elements: Sequence[Tuple[str, MatrixLike]]) -> Povm:
    """Build a POVM, checking each element is Hermitian PSD and that they sum to the identity."""
    if not elements:
        raise ValidationError("EmptyPovm", "a POVM needs at least one element")
    labels = [label for label, _ in elements]
    if len(set(labels)) != len(labels):
        raise ValidationError("DuplicateLabel", f"POVM labels must be unique: {labels}")

    checked = []
    dim = None
    for label, e in elements:
        arr = as_matrix(e, f"POVM element {label!r}")
        if dim is None:
            dim = arr.shape[0]
        if arr.shape != (dim, dim):
            raise DimMismatch(f"POVM element {label!r} has shape {arr.shape}, expected {(dim, dim)}")
        check_hermitian(arr, f"POVM element {label!r}")
        check_positive(arr, f"POVM element {label!r}")
        checked.append((str(label), arr))

    total = sum(e for _, e in checked)
    deviation = max_identity_deviation(total)
    if deviation > config.COMPLETENESS_TOL:
        raise IncompleteIntervention(deviation, "POVM")
    logger.debug(f"✅ POVM with {len(checked)} elements on dimension {dim}")
    return Povm(dim, tuple(checked))
