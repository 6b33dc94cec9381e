from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import pytest

from chaingen.event_chain import parse_plantuml
from chaingen.vss_catalog import parse_vss_json

FIXTURES = Path(__file__).parent / "fixtures"

SCENARIO = "Vehicle should activate hazard lights when camera or LIDAR detects a pedestrian"
CASE_RULES = [
    "order:camera before hazard",
    "order:hazard after receiving",
    "time:hazard <= 90",
]
# Must stay in sync with scripts/record_fixtures.py, which records the
# completion fixtures for exactly these strings.
REFINE_FEEDBACK = "Budget a short pause before resuming normal operation"
RULE_CONSTRAINTS = (
    "camera before hazard; hazard after receiving; "
    "reaction to pedestrian detection should be performed within 90ms"
)


@contextmanager
def criterion_print(name: str):
    """Print one acceptance PASS/FAIL line for the wrapped checks."""
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def chain_text(name: str) -> str:
    return (FIXTURES / "chains" / f"{name}.puml").read_text(encoding="utf-8")


def load_chain(name: str):
    return parse_plantuml(chain_text(name))


@pytest.fixture(scope="session")
def case_catalog():
    return parse_vss_json((FIXTURES / "vss_catalog.json").read_text(encoding="utf-8"))


@pytest.fixture
def reference_chain():
    return load_chain("reference")


@pytest.fixture
def replay_config(tmp_path):
    from dataclasses import replace

    from chaingen.config import load_config

    config = load_config(FIXTURES / "config.yaml")
    return replace(config, output_dir=tmp_path / "out")
