import numpy as np
import pytest
from hypothesis import settings

from kernel_r2.simgen import rotation_r1, rotation_r3

# fixed example sequence so that reruns of the suite are identical
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_rotations(rng, n):
    """Products of elementary rotations; enough to cover SO(3) for testing."""
    a, b, c = rng.uniform(-np.pi, np.pi, size=(3, n))
    return rotation_r3(a) @ rotation_r1(b) @ rotation_r3(c)
