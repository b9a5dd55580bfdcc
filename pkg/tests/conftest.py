import hypothesis
import pytest

from pireg.sims import pendulum_spec

hypothesis.settings.register_profile(
    "ci", max_examples=200, deadline=None, derandomize=True
)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def pend_spec():
    return pendulum_spec()
