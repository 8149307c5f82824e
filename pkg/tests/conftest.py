"""Shared fixtures for the htlab test suite.

Also hosts the acceptance-criteria result lines: ``tests/test_acceptance.py``
appends one ``CRITERION n: PASS/FAIL`` line per criterion and the
``pytest_terminal_summary`` hook below prints them after the run so they are
visible under a plain ``pytest -v``.
"""
from __future__ import annotations

import pathlib

import pytest

from htlab import CircuitGraph, LabelSpec, parse_verilog_file, synth_corpus

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"

# Filled by tests/test_acceptance.py, printed by pytest_terminal_summary.
ACCEPTANCE_RESULTS: list[str] = []


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.v"))


def load_fixture(stem: str) -> CircuitGraph:
    path = FIXTURE_DIR / f"{stem}.v"
    sidecar = path.with_suffix(".labels")
    spec = LabelSpec.from_sidecar_file(str(sidecar)) if sidecar.exists() else None
    return parse_verilog_file(str(path), label_spec=spec)


@pytest.fixture(scope="session")
def fixture_circuits() -> dict[str, CircuitGraph]:
    """All hand-built netlist fixtures, keyed by file stem."""
    return {stem: load_fixture(stem) for stem in fixture_names()}


@pytest.fixture(scope="session")
def troj_mini(fixture_circuits) -> CircuitGraph:
    return fixture_circuits["troj_mini"]


@pytest.fixture(scope="session")
def corpus12() -> list[CircuitGraph]:
    """The 12-circuit synthetic corpus used by the desk-scale acceptance runs."""
    return synth_corpus(12, seed=2024)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
