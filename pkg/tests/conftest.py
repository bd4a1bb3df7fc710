import numpy as np
import pytest

from cutcal.geometry import RigidTransform
from cutcal.simrig import random_rotation


def random_rigid(rng: np.random.Generator, trans_scale: float = 100.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-trans_scale, trans_scale, 3))


def assert_transforms_close(a: RigidTransform, b: RigidTransform, atol: float = 1e-9):
    np.testing.assert_allclose(a.rotation, b.rotation, atol=atol, rtol=0)
    np.testing.assert_allclose(a.translation, b.translation, atol=atol, rtol=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)
