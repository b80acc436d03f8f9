import numpy as np
import pytest

from app.core.errors import BadTrace, DimMismatch, NegativeTime, NotHermitian, StepTooLarge
from app.core.intervention import apply_nonselective, outcome_probabilities
from app.core.lindblad import (
    SLOW_LABEL,
    compare_limit,
    evolve_discrete,
    integrate,
    jump_label,
    kraus_step,
    lindblad_rhs,
    make_generator,
    trajectory,
)
from app.core.linalg import trace_distance
from app.core.types import validate_density
from tests.builders import LOWERING, SIGMA_X, SIGMA_Z


@pytest.fixture
def decay():
    return make_generator(np.zeros((2, 2)), [LOWERING])


def test_rhs_of_excited_state(decay, one):
    assert np.allclose(lindblad_rhs(decay, one.density()), np.diag([1.0, -1.0]))


def test_rhs_of_hamiltonian_only(zero):
    g = make_generator(SIGMA_X)
    rho = zero.density().matrix
    expected = -1j * (SIGMA_X @ rho - rho @ SIGMA_X)
    assert np.allclose(lindblad_rhs(g, zero.density()), expected)


def test_make_generator_validation():
    with pytest.raises(NotHermitian):
        make_generator([[0, 1], [0, 0]])
    with pytest.raises(DimMismatch):
        make_generator(np.eye(2), [np.eye(3)])


def test_exponential_decay(decay, one):
    rho = integrate(decay, one.density(), 1.0, 1e-3)
    assert rho.matrix[1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-6)
    assert rho.is_normalized()


def test_dephasing(plus):
    gamma = 0.5
    g = make_generator(np.zeros((2, 2)), [np.sqrt(gamma) * SIGMA_Z])
    rho = integrate(g, plus.density(), 1.0, 1e-3)
    assert abs(rho.matrix[0, 1]) == pytest.approx(0.5 * np.exp(-2 * gamma), abs=1e-6)
    assert rho.matrix[0, 0].real == pytest.approx(0.5, abs=1e-9)


def test_hamiltonian_evolution_keeps_purity(zero):
    g = make_generator(SIGMA_X)
    rho = integrate(g, zero.density(), np.pi / 2, 1e-3)
    assert rho.purity() == pytest.approx(1.0, abs=1e-8)
    assert rho.matrix[1, 1].real == pytest.approx(1.0, abs=1e-8)


def test_time_must_run_forward(decay, one):
    with pytest.raises(NegativeTime):
        integrate(decay, one.density(), -1.0, 0.1)
    with pytest.raises(NegativeTime):
        integrate(decay, one.density(), 0.1, 0.2)
    with pytest.raises(NegativeTime):
        integrate(decay, one.density(), 1.0, 0.0)


def test_integrate_needs_normalised_state(decay):
    with pytest.raises(BadTrace):
        integrate(decay, validate_density(np.diag([0.5, 0.0]), conditional=True), 1.0, 0.1)


def test_trajectory_includes_both_ends(decay, one):
    points = trajectory(decay, one.density(), 1.0, 0.3)
    times = [time for time, _ in points]
    assert times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    sparse = trajectory(decay, one.density(), 1.0, 0.1, every=10)
    assert [time for time, _ in sparse] == pytest.approx([0.0, 1.0])


def test_kraus_step_jump_probability(decay, one):
    k = kraus_step(decay, 0.01)
    assert k.labels == [SLOW_LABEL, jump_label(0)]
    assert k.is_complete
    probs = dict(outcome_probabilities(k, one.density()))
    assert probs[jump_label(0)] == pytest.approx(0.01, abs=1e-12)
    rho = apply_nonselective(k, one.density())
    assert rho.matrix[1, 1].real == pytest.approx(0.99, abs=1e-12)


def test_kraus_step_is_complete_with_hamiltonian():
    g = make_generator(SIGMA_Z, [LOWERING, 0.3 * SIGMA_Z])
    k = kraus_step(g, 0.1)
    assert k.completeness_deviation < 1e-12


def test_kraus_step_rejects_large_steps(decay):
    with pytest.raises(StepTooLarge):
        kraus_step(decay, 1.0)
    with pytest.raises(NegativeTime):
        kraus_step(decay, 0.0)


def test_discrete_chain_step_count(decay, one):
    _, steps = evolve_discrete(decay, one.density(), 1.0, 0.3)
    assert steps == 4


def test_discrete_chain_converges(one):
    g = make_generator(0.5 * SIGMA_X, [LOWERING])
    result = compare_limit(g, one.density(), 1.0, [0.1, 0.05, 0.025, 0.0125])
    distances = [row.distance for row in result.rows]
    assert all(a > b for a, b in zip(distances, distances[1:]))
    assert result.order >= 0.9
    assert [row.steps for row in result.rows] == [10, 20, 40, 80]


def test_unitary_chain_is_nearly_exact(zero):
    g = make_generator(0.5 * SIGMA_X)
    discrete, _ = evolve_discrete(g, zero.density(), 1.0, 0.1)
    exact = integrate(g, zero.density(), 1.0, 1e-3)
    assert trace_distance(discrete, exact) < 1e-3


def test_single_kraus_step_is_first_order(one):
    g = make_generator(0.5 * SIGMA_X, [LOWERING])
    rho = one.density()
    rhs = lindblad_rhs(g, rho)

    def deviation(delta_t):
        stepped = apply_nonselective(kraus_step(g, delta_t), rho).matrix
        return float(np.max(np.abs(stepped - (rho.matrix + rhs * delta_t))))

    coarse, fine = deviation(0.02), deviation(0.01)
    constant = coarse / 0.02**2
    assert 3.0 < coarse / fine < 5.0
    for delta_t in (0.01, 0.005, 0.0025):
        assert deviation(delta_t) <= 1.2 * constant * delta_t**2


def test_unitary_chain_at_the_reference_step(zero):
    g = make_generator(0.5 * SIGMA_X)
    result = compare_limit(g, zero.density(), 1.0, [1e-3])
    assert result.rows[0].steps == 1000
    assert result.rows[0].distance < 1e-6
    assert result.order is None


def test_trajectory_keeps_purity_throughout(zero):
    g = make_generator(SIGMA_X)
    points = trajectory(g, zero.density(), np.pi / 2, 1e-3, every=50)
    assert len(points) > 30
    for _, rho in points:
        assert rho.purity() == pytest.approx(1.0, abs=1e-8)
