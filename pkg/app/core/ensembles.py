"""
Random states, POVMs and interventions for property checks.
"""
from typing import List, Optional, Sequence

import numpy as np

from app.core.errors import ValidationError
from app.core.intervention import Intervention, make_intervention
from app.core.streams import RngStream, random_haar_unitary, random_unit_vector
from app.core.types import DensityMatrix, Povm, PureState, dagger, make_povm, pure_state, validate_density


def random_pure_state(dim: int, stream: RngStream) -> PureState:
    return pure_state(random_unit_vector(dim, stream.generator()), normalize=True)


def random_density(dim: int, stream: RngStream, rank: Optional[int] = None) -> DensityMatrix:
    """Induced measure: partial trace of a random pure state on dim x rank."""
    rank = dim if rank is None else rank
    g = stream.generator()
    z = g.standard_normal((dim, rank)) + 1j * g.standard_normal((dim, rank))
    rho = z @ dagger(z)
    return validate_density(rho / np.real(np.trace(rho)))


def random_intervention(
    input_dim: int,
    output_dims: Sequence[int],
    multiplicities: Sequence[int],
    stream: RngStream,
    labels: Optional[Sequence[str]] = None,
) -> Intervention:
    """
    Carve Kraus matrices out of the first ``input_dim`` columns of a Haar unitary.

    Outcome i gets ``multiplicities[i]`` matrices of shape ``output_dims[i] x input_dim``.
    The stacked family is an isometry, so completeness holds by construction.
    """
    if len(output_dims) != len(multiplicities) or not output_dims:
        raise ValidationError("BadShape", "output_dims and multiplicities must be non-empty and equally long")
    labels = [str(i) for i in range(len(output_dims))] if labels is None else list(labels)
    total = sum(d * r for d, r in zip(output_dims, multiplicities))
    if total < input_dim:
        raise ValidationError("BadShape", f"{total} output rows cannot hold an isometry from dimension {input_dim}")

    isometry = random_haar_unitary(total, stream)[:, :input_dim]
    outcomes = []
    row = 0
    for label, d, r in zip(labels, output_dims, multiplicities):
        kraus: List[np.ndarray] = []
        for _ in range(r):
            kraus.append(isometry[row : row + d])
            row += d
        outcomes.append((label, kraus))
    return make_intervention(outcomes)


def random_povm(dim: int, n_elements: int, stream: RngStream) -> Povm:
    """E_mu = A_mu^dagger A_mu for a random intervention with one square Kraus matrix per outcome."""
    k = random_intervention(dim, [dim] * n_elements, [1] * n_elements, stream)
    return make_povm([(o.label, o.effect()) for o in k.outcomes])
