"""Shared pytest setup: put the project root on sys.path so the
top-level modules (config, su2rep, hopf, asymptotics, ...) import cleanly
without needing a package install."""

import sys
from pathlib import Path

import pytest

_ROOT = Path(__file__).resolve().parent.parent
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from coherent import clear_loop_state_cache  # noqa: E402


@pytest.fixture(autouse=True)
def _fresh_loop_state_cache():
    clear_loop_state_cache()
    yield
    clear_loop_state_cache()
