import importlib.util
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


@pytest.fixture(scope="session")
def demo_writer():
    """write_demo() from the demo-corpus script (not an importable package)."""
    spec = importlib.util.spec_from_file_location(
        "make_demo_corpus", SCRIPTS / "make_demo_corpus.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod.write_demo
