"""
Reproducible random streams and Haar sampling.

A stream is a (seed, path) pair. ``child(i)`` extends the path, so substream i
is a pure function of the seed and i: work split across any number of workers
draws exactly the same numbers.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import qr

from app.core.errors import ValidationError
from app.core.types import ComplexMatrix, as_matrix

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValidationError("BadSeed", f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))


def _complex_gaussian(generator: np.random.Generator, shape) -> np.ndarray:
    return (generator.standard_normal(shape) + 1j * generator.standard_normal(shape)) / np.sqrt(2.0)


def random_haar_unitary(dim: int, stream: RngStream) -> ComplexMatrix:
    """Haar unitary from the QR decomposition of a Ginibre matrix, with R's diagonal phases fixed."""
    if dim < 1:
        raise ValidationError("BadDimension", f"dimension must be >= 1, got {dim}")
    z = _complex_gaussian(stream.generator(), (dim, dim))
    q, r = qr(z)
    d = np.diag(r)
    return as_matrix(q * (d / np.abs(d)))


def random_unit_vector(dim: int, generator: np.random.Generator) -> np.ndarray:
    """Uniform on the unit sphere of C^dim: the law of any single row of a Haar unitary."""
    v = _complex_gaussian(generator, dim)
    return v / np.linalg.norm(v)
