import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_path_points(rng, n=6, length=12.0, wiggle=1.5):
    """Roughly x-directed control points with random lateral/vertical wiggle."""
    xs = np.sort(rng.uniform(0.0, length, n - 2))
    xs = np.concatenate([[0.0], xs, [length]])
    xs += np.arange(n) * 0.3  # keep chords clear of zero
    ys = rng.uniform(-wiggle, wiggle, n)
    zs = 1.0 + rng.uniform(-0.3, 0.3, n)
    return np.column_stack([xs, ys, zs])
