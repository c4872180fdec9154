"""Shared fixtures: the numerical-study parameter set and run-config helpers."""

import json

import pytest

from rfrsabr.config import reset_config
from rfrsabr.model_core import AccrualPeriod, CapletSpec, CapletStyle, SabrParams

STUDY_ALPHA = 0.10
STUDY_BETA = 1.0
STUDY_RHO = -0.5
STUDY_NU = 0.5
STUDY_FORWARD = 0.05
STUDY_TAU0 = 0.5
STUDY_TAU1 = 1.0
STUDY_Q = 1.0


@pytest.fixture
def study_params():
    return SabrParams(alpha=STUDY_ALPHA, beta=STUDY_BETA, rho=STUDY_RHO, nu=STUDY_NU)


@pytest.fixture
def study_period():
    return AccrualPeriod(STUDY_TAU0, STUDY_TAU1)


@pytest.fixture
def atm_backward(study_period):
    return CapletSpec(STUDY_FORWARD, CapletStyle.BACKWARD, study_period, 1.0, STUDY_FORWARD)


@pytest.fixture
def atm_forward(study_period):
    return CapletSpec(STUDY_FORWARD, CapletStyle.FORWARD, study_period, 1.0, STUDY_FORWARD)


def study_document(**overrides):
    """Run configuration document for the numerical study; top-level keys can be replaced."""
    doc = {
        "model": {"alpha": STUDY_ALPHA, "beta": STUDY_BETA, "rho": STUDY_RHO, "nu": STUDY_NU},
        "period": {"tau0": STUDY_TAU0, "tau1": STUDY_TAU1},
        "q": STUDY_Q,
        "caplet": {"forward_rate": STUDY_FORWARD, "styles": ["backward"]},
        "mc": {"n_paths": 4000, "chunk_size": 1000, "seed": 7, "dt": 1.0 / 64.0},
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    return write


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Every test starts from default process settings."""
    for key in ("LOG_LEVEL", "MC_PATHS", "MC_DT", "MC_SEED", "MC_CHUNK", "MC_WORKERS"):
        monkeypatch.delenv(f"RFRSABR_{key}", raising=False)
    reset_config()
    yield
    reset_config()


@pytest.fixture
def make_document():
    return study_document
