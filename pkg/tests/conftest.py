import numpy as np
import pytest

from src.config import SETTINGS
from src.index import build_index


@pytest.fixture(autouse=True)
def isolated_paths(tmp_path, monkeypatch):
    """Keep run logs and the history database inside the test's tmp dir."""
    monkeypatch.setattr(SETTINGS, "log_dir", str(tmp_path / "logs"))
    monkeypatch.setattr(SETTINGS, "database_path", str(tmp_path / "history.db"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_index():
    """d0: a b, d1: a, d2: b c, d3: c, d4: nothing."""
    return build_index([
        (0, ["a", "b"]),
        (1, ["a"]),
        (2, ["b", "c"]),
        (3, ["c"]),
        (4, []),
    ])
