import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

DATA = HERE.parent / "src" / "minisse" / "data"


@pytest.fixture(scope="session")
def example_path():
    return DATA / "running_example.mc"


@pytest.fixture(scope="session")
def lock_path():
    return DATA / "lock.sm"


@pytest.fixture(scope="session")
def example_src(example_path):
    return example_path.read_text()


@pytest.fixture(scope="session")
def lock_spec(lock_path):
    from minisse import load_machine
    return load_machine(lock_path)


@pytest.fixture
def write(tmp_path):
    """Write text to a file under tmp_path and return its path."""
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
