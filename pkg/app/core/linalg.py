"""
Dense complex linear algebra used across the package: Kronecker products,
partial traces, PSD square roots and trace distances.
"""
import logging
from functools import reduce
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from app import config
from app.core.errors import DimMismatch, DimensionCapExceeded, NotPositive
from app.core.types import (
    ComplexMatrix,
    DensityMatrix,
    MatrixLike,
    as_matrix,
    check_hermitian,
    dagger,
    validate_density,
)

logger = logging.getLogger(__name__)


def check_dimension(dim: int, cap: Optional[int] = None) -> None:
    cap = config.DIMENSION_CAP if cap is None else cap
    if dim > cap:
        raise DimensionCapExceeded(dim, cap)


def tensor(a: MatrixLike, b: MatrixLike, cap: Optional[int] = None) -> ComplexMatrix:
    """Kronecker product; entry (i1*b.rows + i2, j1*b.cols + j2) = a[i1, j1] * b[i2, j2]."""
    a = as_matrix(a, "left factor")
    b = as_matrix(b, "right factor")
    check_dimension(a.shape[0] * b.shape[0], cap)
    check_dimension(a.shape[1] * b.shape[1], cap)
    return as_matrix(np.kron(a, b))


def tensor_all(factors: Iterable[MatrixLike], cap: Optional[int] = None) -> ComplexMatrix:
    return reduce(lambda left, right: tensor(left, right, cap), factors)


def identity(dim: int) -> ComplexMatrix:
    return as_matrix(np.eye(dim, dtype=np.complex128))


def _check_factors(total: int, dims: Sequence[int], keep: Sequence[int]) -> list:
    if any(d < 1 for d in dims) or int(np.prod(dims)) != total:
        raise DimMismatch(f"factor dimensions {list(dims)} do not multiply to {total}")
    kept = sorted(set(int(k) for k in keep))
    if not kept:
        raise DimMismatch("at least one factor must be kept")
    if kept[0] < 0 or kept[-1] >= len(dims):
        raise DimMismatch(f"kept factors {kept} out of range for {len(dims)} factors")
    return kept


def partial_trace(rho: DensityMatrix, dims: Sequence[int], keep: Iterable[int]) -> DensityMatrix:
    """
    Trace out every factor not listed in ``keep``.

    Args:
        rho: state on the product space of ``dims``
        dims: dimension of each tensor factor, in Kronecker order
        keep: indices of the factors to retain (kept in ascending order)

    Returns:
        reduced DensityMatrix on the kept factors, with the same trace as ``rho``
    """
    dims = [int(d) for d in dims]
    kept = _check_factors(rho.dim, dims, list(keep))
    n = len(dims)
    tensor_form = rho.matrix.reshape(dims + dims)

    row_axes = list(range(n))
    col_axes = [i if i not in kept else n + i for i in range(n)]
    out_axes = [i for i in kept] + [n + i for i in kept]
    reduced = np.einsum(tensor_form, row_axes + col_axes, out_axes)

    kept_dim = int(np.prod([dims[i] for i in kept]))
    return validate_density(reduced.reshape(kept_dim, kept_dim), conditional=True)


def reduce_pure_state(amplitudes: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> ComplexMatrix:
    """Reduced matrix of |psi><psi| on the kept factors, without forming the full outer product."""
    dims = [int(d) for d in dims]
    kept = _check_factors(amplitudes.size, dims, list(keep))
    traced = [i for i in range(len(dims)) if i not in kept]
    kept_dim = int(np.prod([dims[i] for i in kept]))
    block = np.transpose(amplitudes.reshape(dims), kept + traced).reshape(kept_dim, -1)
    return block @ dagger(block)


def psd_sqrt(e: MatrixLike) -> ComplexMatrix:
    """Hermitian PSD square root by eigendecomposition; eigenvalues in [-1e-9, 0) are clamped to 0."""
    e = as_matrix(e, "PSD matrix")
    check_hermitian(e, "PSD matrix")
    w, v = np.linalg.eigh(0.5 * (e + dagger(e)))
    if w[0] < -config.PSD_TOL:
        raise NotPositive(f"cannot take square root, eigenvalue {w[0]:.6g}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)
    return as_matrix(0.5 * (root + dagger(root)))


def trace_distance(a: Union[DensityMatrix, np.ndarray], b: Union[DensityMatrix, np.ndarray]) -> float:
    a = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    b = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatch(f"cannot compare shapes {a.shape} and {b.shape}")
    diff = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + dagger(diff))))))
