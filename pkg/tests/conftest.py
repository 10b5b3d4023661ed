import numpy as np
import pytest

from takeover import synth


SMALL_SPEC = synth.SessionSpec(
    n_subjects=5,
    trials_per_subject=1,
    tors_per_trial=6,
    alarm_mix=(2, 2, 2),
    separability=0.9,
    seed=11,
)


@pytest.fixture(scope="session")
def small_session():
    """One cheap deterministic session reused across test modules."""
    return synth.generate(SMALL_SPEC)


@pytest.fixture(scope="session")
def session_dir(small_session, tmp_path_factory):
    out = tmp_path_factory.mktemp("session")
    synth.export(small_session, out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
