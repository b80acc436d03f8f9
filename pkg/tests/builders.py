import numpy as np

from app.core.intervention import make_intervention
from app.core.types import pure_state

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
LOWERING = np.array([[0, 1], [0, 0]], dtype=complex)

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def computational_pvm(labels=("0", "1")):
    return make_intervention([(labels[0], [P0]), (labels[1], [P1])])


def identity_intervention(dim=2, label="id"):
    return make_intervention([(label, [np.eye(dim)])])


def plus_state():
    return pure_state([1 / np.sqrt(2), 1 / np.sqrt(2)])


def trine_vectors():
    return [np.array([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)]) for k in range(3)]




def maximally_entangled(dim):
    """|Omega><Omega| with |Omega> = sum_i |i>|i> / sqrt(dim)"""
    return pure_state(np.eye(dim).reshape(-1) / np.sqrt(dim)).density()


def within_sampling_error(frequencies, exact, shots, sigmas=3):
    """Every record frequency within ``sigmas`` worst-case binomial standard deviations of its probability."""
    sigma = np.sqrt(0.25 / shots)
    observed = {record.label: f for record, f in frequencies.items()}
    return all(abs(observed.get(label, 0.0) - p) <= sigmas * sigma for label, p in exact.items())
