import pathlib

import pytest

from protolite.parser import parse

PROGRAMS = pathlib.Path(__file__).resolve().parent.parent / "programs"

TWO_LEVEL_SOURCE = (PROGRAMS / "golden_sum.stl").read_text()


@pytest.fixture(scope="session")
def programs_dir() -> pathlib.Path:
    return PROGRAMS


@pytest.fixture()
def two_level_program():
    """Hierarchy A < B covering every visibility scenario; main runs sum."""
    return parse(TWO_LEVEL_SOURCE)


def program_path(name: str) -> str:
    return str(PROGRAMS / name)
