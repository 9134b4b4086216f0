import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def iso_profile_128():
    from apme.profile import ProfileOptions, compute_profile

    return compute_profile((2.0, 2.0), 1.0, ProfileOptions(cells=128, half_width=3.0))


@pytest.fixture(scope="session")
def aniso_profile_96():
    from apme.profile import ProfileOptions, compute_profile

    return compute_profile((2.0, 3.0), 1.0, ProfileOptions(cells=96))
