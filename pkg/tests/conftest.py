import numpy as np
import pytest
from hypothesis import settings

from dissim.channels import KrausChannel

settings.register_profile("dissim", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("dissim")


def random_channel(dim: int, n_ops: int, rng: np.random.Generator) -> KrausChannel:
    """Kraus operators cut from a random isometry ``C^dim -> C^(n_ops dim)``."""
    g = rng.normal(size=(n_ops * dim, dim)) + 1j * rng.normal(size=(n_ops * dim, dim))
    q, _ = np.linalg.qr(g)
    return KrausChannel(tuple(q[i * dim:(i + 1) * dim] for i in range(n_ops)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
