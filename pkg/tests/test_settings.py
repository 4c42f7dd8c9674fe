import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1]))

from core.errors import ConfigError  # noqa: E402
from core.settings import (  # noqa: E402
    default_dtype,
    default_seed,
    load_env,
    log_level,
    output_dir,
    worker_timeout,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LAB_SEED", "LAB_DTYPE", "LAB_OUTPUT_DIR", "LAB_LOG_LEVEL", "LAB_WORKER_TIMEOUT"):
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    assert default_seed() == 0
    assert default_dtype() == np.float64
    assert output_dir() == Path(".")
    assert log_level() == "INFO"
    assert worker_timeout() == 30.0


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("LAB_SEED", "17")
    monkeypatch.setenv("LAB_DTYPE", "float32")
    monkeypatch.setenv("LAB_OUTPUT_DIR", str(tmp_path))
    monkeypatch.setenv("LAB_LOG_LEVEL", "debug")
    monkeypatch.setenv("LAB_WORKER_TIMEOUT", "0.5")
    assert default_seed() == 17
    assert default_dtype() == np.float32
    assert output_dir() == tmp_path
    assert log_level() == "DEBUG"
    assert worker_timeout() == 0.5


@pytest.mark.parametrize(
    "name, value, read",
    [
        ("LAB_SEED", "seven", default_seed),
        ("LAB_DTYPE", "float16", default_dtype),
        ("LAB_WORKER_TIMEOUT", "soon", worker_timeout),
        ("LAB_WORKER_TIMEOUT", "0", worker_timeout),
    ],
)
def test_invalid_values(monkeypatch, name, value, read):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigError):
        read()


def test_dotenv_does_not_override_environment(monkeypatch, tmp_path):
    (tmp_path / ".env").write_text("LAB_SEED=5\nLAB_LOG_LEVEL=WARNING\n")
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("LAB_SEED", "9")
    # registered so the value loaded from .env is removed again afterwards
    monkeypatch.setenv("LAB_LOG_LEVEL", "INFO")
    monkeypatch.delenv("LAB_LOG_LEVEL")
    load_env()
    assert default_seed() == 9
    assert log_level() == "WARNING"
