import os

import pytest

from lgbanon.microdata import load_table
from lgbanon.pipeline import deserialize

DATA = os.path.join(os.path.dirname(__file__), "data")
EXAMPLE_DIR = os.path.join(DATA, "worked_example")
RELEASE_DIR = os.path.join(DATA, "worked_example_release")
GOLDEN_DIR = os.path.join(DATA, "golden_release")


def example_files():
    return tuple(os.path.join(EXAMPLE_DIR, f) for f in ("data.csv", "mask.csv", "schema.csv"))


@pytest.fixture
def example_table():
    return load_table(*example_files())


@pytest.fixture
def canned_release():
    return deserialize(RELEASE_DIR)


# adversary who knows Mark's gender and zip code
MARK = {"gender": "M", "zip": 53710}


# acceptance results, criterion -> list of (part, passed, detail); printed once per run
ACCEPTANCE: dict[int, list] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, passed, detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        verdict = "PASS" if all(p for _, p, _ in parts) else "FAIL"
        body = "; ".join(f"{name} {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {c}: {verdict} | {body}")
