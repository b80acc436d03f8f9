"""
Markovian limit of repeated weak interventions.

    d rho / dt = i[rho, H0] + sum_j (V_j rho V_j^dagger - 1/2 {V_j^dagger V_j, rho})

solved either with fixed-step RK4 or as a chain of one-step Kraus interventions
(a "slow" outcome plus one "jump_j" outcome per jump operator).
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import polar
from scipy.stats import linregress

from app import config
from app.core.errors import BadTrace, DimMismatch, NegativeTime, NumericalError, PositivityLoss, StepTooLarge
from app.core.intervention import Intervention, apply_nonselective, make_intervention
from app.core.linalg import check_dimension, psd_sqrt, trace_distance
from app.core.types import (
    ComplexMatrix,
    DensityMatrix,
    MatrixLike,
    as_matrix,
    check_hermitian,
    dagger,
    max_identity_deviation,
    min_eigenvalue,
    validate_density,
)

logger = logging.getLogger(__name__)

SLOW_LABEL = "slow"


def jump_label(j: int) -> str:
    return f"jump_{j}"


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    dim: int
    h0: ComplexMatrix
    jumps: Tuple[ComplexMatrix, ...]

    def decay(self) -> np.ndarray:
        """sum_j V_j^dagger V_j"""
        total = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for v in self.jumps:
            total += dagger(v) @ v
        return total


def make_generator(h0: MatrixLike, jumps: Sequence[MatrixLike] = ()) -> LindbladGenerator:
    h = as_matrix(h0, "H0")
    check_hermitian(h, "H0")
    dim = h.shape[0]
    check_dimension(dim)
    ops = []
    for j, v in enumerate(jumps):
        v = as_matrix(v, f"jump operator {j}")
        if v.shape != (dim, dim):
            raise DimMismatch(f"jump operator {j} has shape {v.shape}, H0 is {dim}x{dim}")
        ops.append(v)
    return LindbladGenerator(dim, as_matrix(0.5 * (h + dagger(h))), tuple(ops))


def _check_state(g: LindbladGenerator, rho: DensityMatrix) -> None:
    if rho.dim != g.dim:
        raise DimMismatch(f"state has dimension {rho.dim}, generator acts on {g.dim}")


def _rhs(g: LindbladGenerator, rho: np.ndarray, decay: np.ndarray) -> np.ndarray:
    out = 1j * (rho @ g.h0 - g.h0 @ rho)
    for v in g.jumps:
        out += v @ rho @ dagger(v)
    out -= 0.5 * (rho @ decay + decay @ rho)
    return out


def lindblad_rhs(g: LindbladGenerator, rho: DensityMatrix) -> ComplexMatrix:
    _check_state(g, rho)
    return as_matrix(_rhs(g, rho.matrix, g.decay()))


def _rk4_step(g: LindbladGenerator, rho: np.ndarray, dt: float, decay: np.ndarray) -> np.ndarray:
    k1 = _rhs(g, rho, decay)
    k2 = _rhs(g, rho + 0.5 * dt * k1, decay)
    k3 = _rhs(g, rho + 0.5 * dt * k2, decay)
    k4 = _rhs(g, rho + dt * k3, decay)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_sizes(t: float, dt: float) -> List[float]:
    """Fixed steps of ``dt`` plus one shorter final step when t/dt is not an integer."""
    if dt <= 0 or t <= 0:
        raise NegativeTime(f"evolution runs forward only: got t={t}, dt={dt}")
    if dt > t:
        raise NegativeTime(f"step {dt} is longer than the evolution time {t}")
    ratio = t / dt
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9:
        return [dt] * int(nearest)
    full = int(np.floor(ratio))
    return [dt] * full + [t - full * dt]


def _revalidate(rho: np.ndarray, time: float) -> DensityMatrix:
    rho = 0.5 * (rho + dagger(rho))
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1.0) > config.INTEGRATOR_TRACE_TOL:
        raise NumericalError("TraceLoss", f"trace drifted to {trace:.12g} at t={time:.6g}")
    lowest = min_eigenvalue(rho)
    if lowest < -config.INTEGRATOR_PSD_TOL:
        raise PositivityLoss(lowest)
    return validate_density(rho, psd_tol=config.INTEGRATOR_PSD_TOL)


def _evolve(g: LindbladGenerator, rho0: DensityMatrix, t: float, dt: float) -> Iterator[Tuple[int, float, np.ndarray]]:
    _check_state(g, rho0)
    if not rho0.is_normalized():
        raise BadTrace(f"initial state must be normalised, trace is {rho0.trace_norm:.12g}")
    steps = _step_sizes(t, dt)
    decay = g.decay()
    rho = np.array(rho0.matrix)
    time = 0.0
    for n, h in enumerate(steps, start=1):
        rho = _rk4_step(g, rho, h, decay)
        time += h
        yield n, time, rho


def integrate(g: LindbladGenerator, rho0: DensityMatrix, t: float, dt: float) -> DensityMatrix:
    """
    Fixed-step RK4 solution at time ``t``.

    Raises:
        NegativeTime: dt <= 0, t <= 0 or dt > t
        PositivityLoss: the result has an eigenvalue below -1e-7
    """
    rho = rho0.matrix
    for _, _, rho in _evolve(g, rho0, t, dt):
        pass
    return _revalidate(rho, t)


def trajectory(
    g: LindbladGenerator,
    rho0: DensityMatrix,
    t: float,
    dt: float,
    every: int = 1,
) -> List[Tuple[float, DensityMatrix]]:
    """RK4 states at time 0, every ``every`` steps, and at ``t``."""
    if every < 1:
        raise NegativeTime(f"sampling interval must be at least one step, got {every}")
    points = [(0.0, rho0)]
    last = 0
    total = len(_step_sizes(t, dt))
    for n, time, rho in _evolve(g, rho0, t, dt):
        if n % every == 0 or n == total:
            points.append((time, _revalidate(rho, time)))
            last = n
    logger.debug(f"📊 Recorded {len(points)} states over {last} steps")
    return points


def kraus_step(g: LindbladGenerator, delta_t: float) -> Intervention:
    """
    One coarse time step as an intervention.

    A_slow = 1 - i H0 dt - 1/2 sum_j V_j^dagger V_j dt and A_jump_j = V_j sqrt(dt).
    A_slow is then replaced by W sqrt(1 - sum_j A_j^dagger A_j), W its polar
    unitary, so the family is exactly complete.

    Raises:
        NegativeTime: delta_t <= 0
        StepTooLarge: the raw family misses completeness by more than
            KRAUS_STEP_MAX_DEVIATION, or the jumps alone exceed the identity
    """
    if delta_t <= 0:
        raise NegativeTime(f"step must be positive, got {delta_t}")
    eye = np.eye(g.dim, dtype=np.complex128)
    decay = g.decay()
    slow = eye - 1j * g.h0 * delta_t - 0.5 * decay * delta_t
    jumps = [v * np.sqrt(delta_t) for v in g.jumps]

    jump_effect = decay * delta_t
    raw = max_identity_deviation(dagger(slow) @ slow + jump_effect)
    if raw > config.KRAUS_STEP_MAX_DEVIATION:
        raise StepTooLarge(f"step {delta_t} misses completeness by {raw:.3g} before correction")
    remainder = eye - jump_effect
    if min_eigenvalue(remainder) < -config.PSD_TOL:
        raise StepTooLarge(f"jump probabilities exceed 1 at step {delta_t}")

    unitary, _ = polar(slow, side="right")
    corrected = unitary @ psd_sqrt(0.5 * (remainder + dagger(remainder)))
    outcomes = [(SLOW_LABEL, [corrected])]
    outcomes.extend((jump_label(j), [a]) for j, a in enumerate(jumps))
    logger.debug(f"✅ Kraus step dt={delta_t:g}: raw completeness deviation {raw:.3g}")
    return make_intervention(outcomes)


@dataclass(frozen=True)
class ConvergenceRow:
    delta_t: float
    steps: int
    distance: float


@dataclass(frozen=True)
class ConvergenceResult:
    rows: Tuple[ConvergenceRow, ...]
    order: Optional[float]
    reference_dt: float


def evolve_discrete(g: LindbladGenerator, rho0: DensityMatrix, t: float, delta_t: float) -> Tuple[DensityMatrix, int]:
    """Repeated non-selective Kraus steps up to time ``t``; a shorter step closes any remainder."""
    _check_state(g, rho0)
    steps = _step_sizes(t, delta_t)
    cache = {}
    rho = rho0
    for h in steps:
        if h not in cache:
            cache[h] = kraus_step(g, h)
        rho = apply_nonselective(cache[h], rho)
    return rho, len(steps)


def compare_limit(
    g: LindbladGenerator,
    rho0: DensityMatrix,
    t: float,
    delta_ts: Sequence[float],
    dt_fine: float = 1e-3,
) -> ConvergenceResult:
    """
    Trace distance at time ``t`` between the discrete Kraus chain and the RK4 solution.

    The convergence order is the slope of log(distance) against log(delta_t),
    fitted when at least two distances are positive.
    """
    reference = integrate(g, rho0, t, min(dt_fine, t))
    rows = []
    for delta_t in delta_ts:
        discrete, steps = evolve_discrete(g, rho0, t, float(delta_t))
        distance = trace_distance(discrete, reference)
        rows.append(ConvergenceRow(float(delta_t), steps, distance))
        logger.info(f"📊 dt={delta_t:g}: {steps} steps, trace distance {distance:.3g}")

    fitted = [r for r in rows if r.distance > 0.0]
    order = None
    if len({r.delta_t for r in fitted}) >= 2:
        order = float(linregress(np.log([r.delta_t for r in fitted]), np.log([r.distance for r in fitted])).slope)
    return ConvergenceResult(tuple(rows), order, min(dt_fine, t))
