import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slef import synth

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

STEPS = (math.pi / 10, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)


def ellipse_points(theta1, theta2, n=1000, offset=(0.0, 0.0)):
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return offset[0] + np.cos(t) / math.sqrt(theta1), offset[1] + np.sin(t) / math.sqrt(theta2)


def carrier_pair(delta, size=64, periods=(3, 2)):
    """Ideal pair on a carrier with whole periods across the image.

    Every row and column then samples the ellipse uniformly, so the cloud
    centroid is exactly the ellipse center.
    """
    carrier = (2 * math.pi * periods[0] / size, 2 * math.pi * periods[1] / size)
    phase = synth.PhaseSpec(kind="linear-carrier", carrier=carrier, offset=0.4)
    return synth.ideal_pair(phase, delta, size, size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
