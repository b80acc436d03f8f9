"""
Random environments that record which outcome block the apparatus is in.

Each outcome mu drives the environment, started in basis state omega (pure
mode) or in the mixture sum_omega p_omega |omega><omega| (mixed mode), with its
own Haar-random unitary B^(mu). What survives in the system-apparatus state is
the overlap matrix G_{mu nu} = sum_omega p_omega sum_alpha b_{mu omega alpha} b*_{nu omega alpha}.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from app import config
from app.core.dilation import CompositeState
from app.core.errors import DimMismatch, ValidationError
from app.core.linalg import check_dimension, reduce_pure_state, trace_distance
from app.core.streams import RngStream, random_haar_unitary, random_unit_vector
from app.core.types import ComplexMatrix, DensityMatrix, as_matrix, dagger, validate_density

logger = logging.getLogger(__name__)


class EnvironmentMode(str, Enum):
    PURE = "pure"
    MIXED = "mixed"


def _parse_mode(mode) -> EnvironmentMode:
    try:
        return EnvironmentMode(mode)
    except ValueError:
        raise ValidationError("BadMode", f"mode must be pure or mixed, got {mode!r}")


@dataclass(frozen=True, eq=False)
class EnvironmentModel:
    n_outcomes: int
    env_dim: int
    mode: EnvironmentMode = EnvironmentMode.PURE
    weights: Optional[np.ndarray] = None
    # Test hook: every outcome drives the environment with the same unitary.
    shared_unitary: bool = False

    @property
    def uniform_weights(self) -> bool:
        return self.weights is None


def make_environment(
    n_outcomes: int,
    env_dim: int,
    mode: str = "pure",
    weights: Optional[Sequence[float]] = None,
    shared_unitary: bool = False,
) -> EnvironmentModel:
    mode = _parse_mode(mode)
    if n_outcomes < 2 or env_dim < n_outcomes:
        raise ValidationError("BadEnvironment", f"need env_dim >= n_outcomes >= 2, got {env_dim} and {n_outcomes}")
    check_dimension(env_dim)
    w = None
    if weights is not None:
        if mode is not EnvironmentMode.MIXED:
            raise ValidationError("BadEnvironment", "weights are only meaningful in mixed mode")
        w = np.asarray(weights, dtype=float)
        if w.shape != (env_dim,) or np.any(w < 0) or abs(w.sum() - 1.0) > config.TRACE_TOL:
            raise ValidationError("BadEnvironment", f"weights must be {env_dim} non-negative numbers summing to 1")
        w.flags.writeable = False
    return EnvironmentModel(n_outcomes, env_dim, mode, w, shared_unitary)


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    matrix: ComplexMatrix

    @property
    def n_outcomes(self) -> int:
        return self.matrix.shape[0]

    def offdiagonal(self) -> np.ndarray:
        return self.matrix[~np.eye(self.n_outcomes, dtype=bool)]


def _haar_trace(dim: int, generator: np.random.Generator) -> complex:
    """
    Tr W for W Haar on U(dim), drawn in O(dim) from independent Verblunsky coefficients.

    alpha_k has |alpha_k|^2 ~ Beta(1, dim - k - 1) and a uniform phase for
    k < dim - 1; the last one lies on the unit circle. The trace is the sum of
    the CMV diagonal, -alpha_k conj(alpha_{k-1}) with alpha_{-1} = -1.
    """
    k = np.arange(dim - 1)
    radius = np.sqrt(generator.beta(1.0, dim - k - 1.0)) if dim > 1 else np.empty(0)
    phases = np.exp(2j * np.pi * generator.random(dim))
    alpha = np.append(radius, 1.0) * phases
    previous = np.concatenate(([-1.0], alpha[:-1]))
    return complex(-np.sum(alpha * previous.conj()))


def _environment_rows(model: EnvironmentModel, stream: RngStream) -> np.ndarray:
    """Row omega of each B^(mu), i.e. the environment state left behind by outcome mu (pure mode)."""
    generator = stream.generator()
    if model.shared_unitary:
        row = random_unit_vector(model.env_dim, generator)
        return np.tile(row, (model.n_outcomes, 1))
    return np.array([random_unit_vector(model.env_dim, generator) for _ in range(model.n_outcomes)])


def environment_overlaps(model: EnvironmentModel, stream: RngStream) -> OverlapMatrix:
    """
    Sample one set of environment unitaries and return G.

    Pure mode and the uniform two-outcome mixed mode only draw the marginal
    each needs (single Haar rows, or the trace of B^(0) B^(1)^dagger); any
    other model draws the full unitaries.
    """
    n, size = model.n_outcomes, model.env_dim
    if model.shared_unitary:
        g = np.ones((n, n), dtype=np.complex128)
    elif model.mode is EnvironmentMode.PURE:
        rows = _environment_rows(model, stream)
        g = rows @ dagger(rows)
    elif model.uniform_weights and n == 2:
        overlap = _haar_trace(size, stream.generator()) / size
        g = np.array([[1.0, overlap], [np.conj(overlap), 1.0]], dtype=np.complex128)
    else:
        p = np.full(size, 1.0 / size) if model.uniform_weights else model.weights
        unitaries = [random_haar_unitary(size, stream.child(mu)) for mu in range(n)]
        g = np.empty((n, n), dtype=np.complex128)
        for mu in range(n):
            for nu in range(n):
                g[mu, nu] = np.einsum("w,wa,wa->", p, unitaries[mu], unitaries[nu].conj())
    g = 0.5 * (g + dagger(g))
    np.fill_diagonal(g, np.real(np.diag(g)))
    return OverlapMatrix(as_matrix(g, "overlap matrix"))


@dataclass(frozen=True)
class ScalingRow:
    env_dim: int
    rms_offdiag: float
    stderr: float


@dataclass(frozen=True)
class ScalingResult:
    mode: EnvironmentMode
    trials: int
    rows: Tuple[ScalingRow, ...]
    slope: float
    slope_stderr: float


def _fit_log_slope(rows: Sequence[ScalingRow]) -> Tuple[float, float]:
    """Weighted least squares of log(rms) against log(N); weights from each point's standard error."""
    x = np.log([r.env_dim for r in rows])
    y = np.log([r.rms_offdiag for r in rows])
    sigma = np.array([r.stderr / r.rms_offdiag for r in rows])
    coefficients, covariance = np.polyfit(x, y, 1, w=1.0 / sigma, cov="unscaled")
    return float(coefficients[0]), float(np.sqrt(covariance[0, 0]))


def scaling_scan(
    env_dims: Sequence[int],
    trials: int,
    mode: str,
    stream: RngStream,
    n_outcomes: int = 2,
    workers: Optional[int] = None,
) -> ScalingResult:
    """
    RMS off-diagonal overlap against environment dimension.

    Args:
        env_dims: at least three dimensions spanning two octaves
        trials: samples per dimension (at least 100)
        mode: "pure" or "mixed" (uniform weights)
        stream: trial t at dimension index i uses ``stream.child(i).child(t)``
        n_outcomes: outcome blocks per sample
        workers: thread count (results do not depend on it)

    Returns:
        ScalingResult with one row per dimension and the fitted log-log slope
    """
    dims = sorted(int(n) for n in env_dims)
    if len(set(dims)) < 3 or dims[-1] < 4 * dims[0]:
        raise ValidationError("BadScan", f"need at least three dimensions spanning two octaves, got {dims}")
    if trials < 100:
        raise ValidationError("BadScan", f"need at least 100 trials, got {trials}")
    mode = _parse_mode(mode)
    workers = workers or config.WORKERS

    rows = []
    for i, size in enumerate(dims):
        model = make_environment(n_outcomes, size, mode.value)
        scan_stream = stream.child(i)

        def run(t: int) -> float:
            off = environment_overlaps(model, scan_stream.child(t)).offdiagonal()
            return float(np.mean(np.abs(off) ** 2))

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                squares = np.array(list(pool.map(run, range(trials))))
        else:
            squares = np.array([run(t) for t in range(trials)])

        rms = float(np.sqrt(squares.mean()))
        stderr = float(squares.std(ddof=1) / np.sqrt(trials) / (2.0 * rms))
        rows.append(ScalingRow(size, rms, stderr))
        logger.info(f"📊 N={size}: rms off-diagonal overlap {rms:.4g} ± {stderr:.2g}")

    slope, slope_stderr = _fit_log_slope(rows)
    logger.info(f"✅ {mode.value} scan slope {slope:.3f} ± {slope_stderr:.3f}")
    return ScalingResult(mode, trials, tuple(rows), slope, slope_stderr)


@dataclass(frozen=True, eq=False)
class DecoheredState:
    exact_reduced: DensityMatrix
    ideal_mixture: DensityMatrix
    trace_distance: float
    overlaps: OverlapMatrix


def _block_vectors(psi1: CompositeState) -> np.ndarray:
    """One row per outcome: the composite vector with every other block zeroed."""
    blocks = psi1.blocks()
    embedded = np.zeros((len(blocks), psi1.dim), dtype=np.complex128)
    for i, block in enumerate(blocks):
        embedded[i, block.start : block.stop] = psi1.amplitudes[block.start : block.stop]
    return embedded


def decohered_state(psi1: CompositeState, model: EnvironmentModel, stream: RngStream) -> DecoheredState:
    """
    Couple the premeasured state to a random environment and trace it out.

    In pure mode the joint state sum_mu |psi_mu> (x) B^(mu)|omega> is formed and
    reduced directly. In mixed mode the omega-average of that reduction,
    sum_{mu nu} G_{mu nu} |psi_mu><psi_nu|, is used.
    """
    psi = _block_vectors(psi1)
    if psi.shape[0] != model.n_outcomes:
        raise DimMismatch(f"state has {psi.shape[0]} outcome blocks, environment model expects {model.n_outcomes}")
    if model.mode is EnvironmentMode.PURE:
        rows = _environment_rows(model, stream)
        joint = psi.T @ rows
        exact = reduce_pure_state(joint.reshape(-1), [psi1.dim, model.env_dim], [0])
        overlaps = OverlapMatrix(as_matrix(rows @ dagger(rows), "overlap matrix"))
    else:
        overlaps = environment_overlaps(model, stream)
        exact = psi.T @ overlaps.matrix @ psi.conj()

    ideal = sum(np.outer(v, v.conj()) for v in psi)
    exact_state = validate_density(exact)
    ideal_state = validate_density(ideal)
    distance = trace_distance(exact_state, ideal_state)
    logger.debug(f"✅ Decohered state at N={model.env_dim}: trace distance to block mixture {distance:.3g}")
    return DecoheredState(exact_state, ideal_state, distance, overlaps)
