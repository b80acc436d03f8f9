import pytest

from app.core.streams import RngStream
from app.core.types import basis_state
from tests.builders import computational_pvm, plus_state


@pytest.fixture
def stream():
    return RngStream(20240611)


@pytest.fixture
def pvm():
    return computational_pvm()


@pytest.fixture
def zero():
    return basis_state(2, 0)


@pytest.fixture
def one():
    return basis_state(2, 1)


@pytest.fixture
def plus():
    return plus_state()
