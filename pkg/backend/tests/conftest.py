import os
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np
import pytest

from app.config import get_settings
from app.engines.dataset import Dataset
from app.engines.export import write_atomic
from app.models import TaskKind

BOSTON_CSV = Path(os.environ.get("TREEPEN_BOSTON_CSV", Path(__file__).parent / "data" / "boston.csv"))
BOSTON_URL = "https://raw.githubusercontent.com/selva86/datasets/master/BostonHousing.csv"


def regression_dataset(columns: Sequence[Sequence[float]], y: Sequence[float], names=None) -> Dataset:
    features = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    names = names or tuple(f"x{i}" for i in range(features.shape[1]))
    return Dataset(tuple(names), features, np.asarray(y, dtype=float), TaskKind.REGRESSION)


def classification_dataset(columns, y, labels=None, names=None) -> Dataset:
    features = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    y = np.asarray(y, dtype=np.int64)
    labels = labels or tuple(f"c{i}" for i in range(max(2, int(y.max()) + 1)))
    names = names or tuple(f"x{i}" for i in range(features.shape[1]))
    return Dataset(tuple(names), features, y, TaskKind.CLASSIFICATION, tuple(labels))


def counterexample_dataset() -> Dataset:
    """
    100 rows, classes (70, 30).
    x0 <= 0.5 gives children (45, 0) | (25, 30); x1 <= 0.5 gives (60, 15) | (10, 15).
    """
    x0 = [0.0] * 45 + [1.0] * 25 + [1.0] * 30
    x1 = [0.0] * 60 + [1.0] * 10 + [0.0] * 15 + [1.0] * 15
    y = [0] * 70 + [1] * 30
    return classification_dataset([x0, x1], y, labels=("A", "B"))


@pytest.fixture(autouse=True)
def _fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def counterexample() -> Dataset:
    return counterexample_dataset()


@pytest.fixture
def step_regression() -> Dataset:
    """y jumps at x0 = 5; x1 is noise"""
    rng = np.random.default_rng(7)
    x0 = np.arange(40, dtype=float) % 10
    x1 = rng.integers(0, 20, size=40).astype(float)
    y = np.where(x0 <= 4, 1.0, 9.0) + rng.normal(scale=0.1, size=40)
    return regression_dataset([x0, x1], y)


@pytest.fixture
def synthetic_regression() -> Dataset:
    rng = np.random.default_rng(2024)
    n = 200
    x = rng.uniform(0.0, 10.0, size=(n, 4))
    y = 3.0 * (x[:, 0] > 5) + 2.0 * (x[:, 1] > 3) * (x[:, 0] > 2) + 0.5 * x[:, 2] + rng.normal(scale=0.5, size=n)
    return regression_dataset([x[:, j] for j in range(4)], y, names=("a", "b", "c", "d"))


@pytest.fixture
def synthetic_classification() -> Dataset:
    rng = np.random.default_rng(99)
    n = 200
    x = rng.uniform(0.0, 1.0, size=(n, 3))
    score = x[:, 0] + 0.5 * x[:, 1] + rng.normal(scale=0.15, size=n)
    y = np.digitize(score, [0.5, 1.0])
    return classification_dataset([x[:, j] for j in range(3)], y, labels=("low", "mid", "high"))


@pytest.fixture
def write_csv(tmp_path):
    def write(text: str, name: str = "data.csv") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


@pytest.fixture(scope="session")
def boston_path() -> str:
    """The local Boston Housing CSV, fetched once into tests/data when absent"""
    if BOSTON_CSV.exists():
        return str(BOSTON_CSV)
    if "TREEPEN_BOSTON_CSV" in os.environ:
        pytest.skip(f"Boston Housing CSV not found at {BOSTON_CSV}")
    try:
        response = httpx.get(BOSTON_URL, timeout=30.0, follow_redirects=True)
        response.raise_for_status()
    except httpx.HTTPError as e:
        pytest.skip(f"Boston Housing CSV not found at {BOSTON_CSV} and download failed: {e}")
    BOSTON_CSV.parent.mkdir(parents=True, exist_ok=True)
    write_atomic(str(BOSTON_CSV), response.content)
    return str(BOSTON_CSV)
