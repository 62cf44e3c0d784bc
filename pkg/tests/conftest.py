from pathlib import Path

import numpy as np
import pytest

from kmetric.data import load_csv

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture(scope="session")
def iris_path() -> Path:
    path = DATA_DIR / "iris.csv"
    if not path.exists():
        pytest.skip("data/iris.csv missing; run scripts/prepare_datasets.py --skip-fetch")
    return path


@pytest.fixture(scope="session")
def iris(iris_path):
    return load_csv(iris_path, "species")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
