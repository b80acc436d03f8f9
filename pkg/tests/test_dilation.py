import numpy as np
import pytest

from app.core.dilation import (
    adaptive_tensor,
    complete_to_unitary,
    discard,
    embed_local,
    isometry_from_kraus,
    kraus_from_povm,
    make_composite_state,
    make_dilation,
    premeasure,
    tensor_intervention,
)
from app.core.ensembles import random_density, random_intervention, random_povm, random_pure_state
from app.core.errors import BadPadding, DimMismatch, NotIsometric, NumericalError, UnknownOutcome
from app.core.intervention import (
    apply_selective,
    compose,
    make_adaptive,
    make_intervention,
    outcome_probabilities,
    povm_of,
    root_stage,
    sample_records,
)
from app.core.linalg import tensor
from app.core.streams import RngStream, random_haar_unitary
from app.core.types import basis_state, dagger, pure_state, validate_density
from app.services.scenarios import trine_povm
from tests.builders import P0, P1, computational_pvm, within_sampling_error


def test_kraus_from_povm_reproduces_the_povm(stream):
    for n in (1, 2, 5):
        p = random_povm(3, n, stream.child(n))
        k = kraus_from_povm(p)
        assert k.labels == p.labels
        for label in p.labels:
            assert np.allclose(povm_of(k).element(label), p.element(label), atol=1e-10)


def test_kraus_from_povm_with_padding(stream):
    p = trine_povm()
    u = random_haar_unitary(2, stream)
    split = [np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * u]
    k = kraus_from_povm(p, {"1": split})
    assert len(k.outcome("1").kraus) == 2
    assert np.allclose(povm_of(k).element("1"), p.element("1"))


def test_kraus_from_povm_rejects_bad_padding():
    p = trine_povm()
    with pytest.raises(BadPadding):
        kraus_from_povm(p, {"0": [0.5 * np.eye(2)]})
    with pytest.raises(BadPadding):
        kraus_from_povm(p, {"0": [np.eye(3)]})
    with pytest.raises(UnknownOutcome):
        kraus_from_povm(p, {"7": [np.eye(2)]})


def test_isometry_layout(stream):
    k = random_intervention(2, [3, 1], [2, 2], stream)
    d = isometry_from_kraus(k)
    assert d.isometry.shape == (2, 8)
    assert d.column_index[:3] == (("0", 0, 0), ("0", 0, 1), ("0", 1, 0))
    for col, (mu, sigma, m) in enumerate(d.column_index):
        a = k.outcome(mu).kraus[m]
        assert np.allclose(d.isometry[:, col], a[sigma, :])
    assert np.allclose(d.isometry @ dagger(d.isometry), np.eye(2), atol=1e-12)


def test_isometry_needs_complete_kraus():
    incomplete = make_intervention([("0", [0.9 * P0]), ("1", [0.9 * P1])], strict=False)
    with pytest.raises(NotIsometric):
        isometry_from_kraus(incomplete)


def test_make_dilation_checks_columns():
    u = np.eye(2)
    with pytest.raises(DimMismatch):
        make_dilation([("0", 0, 0)], u)
    with pytest.raises(DimMismatch):
        make_dilation([("0", 0, 0), ("1", 0, 0), ("0", 1, 0)], np.eye(2, 3))
    with pytest.raises(DimMismatch):
        make_dilation([("0", 1, 0), ("0", 0, 0)], u)


def test_completion_to_unitary(stream):
    for i, (dims, mults) in enumerate([([2, 2, 2], [1, 1, 1]), ([1, 3], [2, 1]), ([4], [1])]):
        k = random_intervention(2, dims, mults, stream.child(i))
        d = isometry_from_kraus(k)
        u = complete_to_unitary(d)
        assert u.shape == (d.composite_dim, d.composite_dim)
        assert np.max(np.abs(u @ dagger(u) - np.eye(d.composite_dim))) < 1e-10
        assert np.allclose(u[: d.input_dim], d.isometry)


def test_trine_premeasurement_weights():
    d = isometry_from_kraus(kraus_from_povm(trine_povm()))
    c = premeasure(d, basis_state(2, 0))
    labels, weights = zip(*c.block_weights())
    assert labels == ("0", "1", "2")
    assert np.allclose(weights, [2 / 3, 1 / 6, 1 / 6])
    assert c.density().purity() == pytest.approx(1.0)


def test_premeasurement_weights_are_povm_probabilities():
    root = RngStream(78)
    p = random_povm(3, 4, root.child(0))
    d = isometry_from_kraus(kraus_from_povm(p))
    for i in range(100):
        psi = random_pure_state(3, root.child(1).child(i))
        weights = dict(premeasure(d, psi).block_weights())
        for label in p.labels:
            expected = np.real(np.trace(p.element(label) @ psi.density().matrix))
            assert weights[label] == pytest.approx(expected, abs=1e-9)


def test_discard_after_premeasure_is_the_selective_map():
    root = RngStream(77)
    for i in range(50):
        k = random_intervention(3, [2, 3, 1], [2, 1, 3], root.child(i).child(0))
        psi = random_pure_state(3, root.child(i).child(1))
        c = premeasure(isometry_from_kraus(k), psi)
        for label in k.labels:
            expected = apply_selective(k, psi.density(), label)
            assert np.allclose(discard(c, label).matrix, expected.matrix, atol=1e-12)


def test_premeasure_dimension_check():
    d = isometry_from_kraus(computational_pvm())
    with pytest.raises(DimMismatch):
        premeasure(d, basis_state(3, 0))


def test_composite_state_must_be_normalised():
    columns = [("0", 0, 0), ("1", 0, 0)]
    c = make_composite_state(columns, [0.6, 0.8])
    assert np.allclose(c.block_vector("1"), [0.8])
    with pytest.raises(NumericalError):
        make_composite_state(columns, [0.6, 0.6])


def test_tensor_intervention(stream):
    k1 = random_intervention(2, [2, 2], [1, 2], stream.child(0))
    k2 = random_intervention(3, [3, 1], [1, 1], stream.child(1))
    joint = tensor_intervention(k1, k2)
    assert joint.labels == ["0,0", "0,1", "1,0", "1,1"]
    assert joint.input_dim == 6
    e = povm_of(joint)
    assert np.allclose(e.element("1,0"), tensor(k1.outcome("1").effect(), k2.outcome("0").effect()), atol=1e-12)


def test_tensor_intervention_on_product_state(stream):
    k1 = random_intervention(2, [2], [2], stream.child(0))
    k2 = random_intervention(2, [2, 2], [1, 1], stream.child(1))
    rho_a = random_density(2, stream.child(2))
    rho_b = random_density(2, stream.child(3))
    joint = validate_density(tensor(rho_a.matrix, rho_b.matrix))
    probs = dict(outcome_probabilities(tensor_intervention(k1, k2), joint))
    for label, p in outcome_probabilities(k2, rho_b):
        assert probs[f"0,{label}"] == pytest.approx(p)


def test_adaptive_tensor_effects(stream):
    k1 = random_intervention(2, [2, 2], [1, 1], stream.child(0))
    branches = {
        "0": random_intervention(2, [2, 2], [1, 1], stream.child(1)),
        "1": random_intervention(2, [2, 2, 2], [1, 1, 1], stream.child(2)),
    }
    joint = adaptive_tensor(k1, make_adaptive(branches))
    e = povm_of(joint)
    assert len(joint.labels) == 5
    for mu, follow in branches.items():
        for nu in follow.labels:
            expected = tensor(k1.outcome(mu).effect(), follow.outcome(nu).effect())
            assert np.allclose(e.element(f"{nu}.{mu}"), expected, atol=1e-12)


def test_adaptive_tensor_dimension_mismatch(stream):
    k1 = computational_pvm()
    branches = {"0": computational_pvm(), "1": random_intervention(3, [3], [1], stream)}
    with pytest.raises(DimMismatch):
        adaptive_tensor(k1, make_adaptive(branches))


def test_embed_local_effects(stream):
    k = random_intervention(3, [3, 3], [1, 1], stream)
    first = povm_of(embed_local(k, 0, [3, 2]))
    second = povm_of(embed_local(k, 1, [2, 3]))
    for label in k.labels:
        assert np.allclose(first.element(label), tensor(k.outcome(label).effect(), np.eye(2)))
        assert np.allclose(second.element(label), tensor(np.eye(2), k.outcome(label).effect()))
    with pytest.raises(DimMismatch):
        embed_local(k, 0, [2, 3])
    with pytest.raises(DimMismatch):
        embed_local(k, 2, [3, 3])


def test_four_adaptive_local_rounds(stream):
    """Alice mu, Bob nu|mu, Alice sigma|nu.mu, Bob tau|sigma.nu.mu on a product state."""
    labels = ["0", "1"]
    counter = iter(range(100))

    def local():
        return random_intervention(2, [2, 2], [1, 1], stream.child(next(counter)))

    alice_first = local()
    bob_first = {mu: local() for mu in labels}
    alice_second = {f"{nu}.{mu}": local() for mu in labels for nu in labels}
    bob_second = {f"{sigma}.{nu}.{mu}": local() for mu in labels for nu in labels for sigma in labels}

    def embedded(table, subsystem):
        return make_adaptive({key: embed_local(k, subsystem, [2, 2]) for key, k in table.items()})

    total = embed_local(alice_first, 0, [2, 2])
    total = compose(embedded(bob_first, 1), total)
    total = compose(embedded(alice_second, 0), total)
    total = compose(embedded(bob_second, 1), total)

    rho_a = random_density(2, stream.child(200))
    rho_b = random_density(2, stream.child(201))
    probs = dict(outcome_probabilities(total, validate_density(tensor(rho_a.matrix, rho_b.matrix))))
    assert len(probs) == 16

    def branch_probability(first, second, rho):
        a = second @ first
        return float(np.real(np.trace(a @ rho @ dagger(a))))

    for mu in labels:
        for nu in labels:
            for sigma in labels:
                for tau in labels:
                    a = branch_probability(
                        alice_first.outcome(mu).kraus[0], alice_second[f"{nu}.{mu}"].outcome(sigma).kraus[0], rho_a.matrix
                    )
                    b = branch_probability(
                        bob_first[mu].outcome(nu).kraus[0], bob_second[f"{sigma}.{nu}.{mu}"].outcome(tau).kraus[0], rho_b.matrix
                    )
                    assert probs[f"{tau}.{sigma}.{nu}.{mu}"] == pytest.approx(a * b, abs=1e-12)


def test_adaptive_local_rounds_on_a_bell_pair(stream):
    labels = ["0", "1"]
    counter = iter(range(100))

    def local():
        return random_intervention(2, [2, 2], [1, 1], stream.child(next(counter)))

    def embedded(table, subsystem):
        return make_adaptive({key: embed_local(k, subsystem, [2, 2]) for key, k in table.items()})

    alice_first = local()
    bob_first = {mu: local() for mu in labels}
    alice_second = {f"{nu}.{mu}": local() for mu in labels for nu in labels}
    bob_second = {f"{sigma}.{nu}.{mu}": local() for mu in labels for nu in labels for sigma in labels}

    first_round = compose(embedded(bob_first, 1), embed_local(alice_first, 0, [2, 2]))
    one_shot = adaptive_tensor(alice_first, make_adaptive(bob_first))
    assert first_round.labels == one_shot.labels
    for label in one_shot.labels:
        assert np.allclose(povm_of(first_round).element(label), povm_of(one_shot).element(label), atol=1e-12)

    stages = [
        root_stage(embed_local(alice_first, 0, [2, 2])),
        embedded(bob_first, 1),
        embedded(alice_second, 0),
        embedded(bob_second, 1),
    ]
    total = compose(stages[3], compose(stages[2], first_round))
    bell = pure_state([1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)]).density()
    exact = dict(outcome_probabilities(total, bell))
    assert len(exact) == 16
    assert sum(exact.values()) == pytest.approx(1.0)

    frequencies = sample_records(stages, bell, 100_000, RngStream(9))
    for record in frequencies:
        assert record.probability == pytest.approx(exact[record.label], abs=1e-12)
    assert within_sampling_error(frequencies, exact, 100_000)
