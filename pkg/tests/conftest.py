import numpy as np
import pytest

from denma.data import Study, StudyArm, assemble


def _study(sid, arms, covariates=None):
    return Study(
        study_id=sid,
        arms=tuple(
            StudyArm(study_id=sid, agent_id=a, dose=d, events=e, sample_size=n)
            for (a, d, e, n) in arms
        ),
        covariates=covariates or {},
    )


@pytest.fixture
def small_dataset():
    """Two studies, two agents plus placebo, enough doses to place knots."""
    studies = [
        _study("S1", [("placebo", 0.0, 40, 100), ("drugA", 25.0, 55, 100)]),
        _study("S2", [("placebo", 0.0, 35, 100), ("drugA", 10.0, 45, 100), ("drugA", 30.0, 60, 100)]),
        _study("S3", [("placebo", 0.0, 42, 110), ("drugB", 12.0, 50, 110), ("drugB", 24.0, 61, 110)]),
        _study("S4", [("drugA", 20.0, 52, 100), ("drugB", 36.0, 58, 100)]),
    ]
    return assemble(studies)


@pytest.fixture
def make_study():
    return _study


@pytest.fixture
def make_dataset():
    def factory(studies, covariate_names=()):
        return assemble(studies, covariate_names)

    return factory


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
