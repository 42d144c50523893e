from __future__ import annotations

import json
from pathlib import Path

import pytest

from hvac_incentives import data_path
from hvac_incentives.serialization import load_building_model, load_key_points, load_sample_spec
from hvac_incentives.static_model import build_static_model, canonical_model, monte_carlo_cloud

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(str(data_path("building_model.json"))).parent


@pytest.fixture(scope="session")
def building(data_dir):
    return load_building_model(data_dir / "building_model.json")


@pytest.fixture(scope="session")
def sample_spec(data_dir):
    return load_sample_spec(data_dir / "sample_spec.json")


@pytest.fixture(scope="session")
def mc_cloud(building, sample_spec):
    return monte_carlo_cloud(building, sample_spec)


@pytest.fixture(scope="session")
def mc_static(mc_cloud):
    return build_static_model(mc_cloud.S, mc_cloud.E)


@pytest.fixture(scope="session")
def canonical(data_dir):
    return canonical_model(load_key_points(data_dir / "canonical_key_points.json"))


@pytest.fixture(scope="session")
def calibration_inputs(data_dir):
    with open(data_dir / "calibration.json") as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
