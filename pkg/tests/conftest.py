import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlqueue.model import load_model

CONFIG_DIR = Path(__file__).parent.parent / "configs"


@pytest.fixture(scope="session")
def e1_model():
    return load_model(CONFIG_DIR / "e1.yaml")


@pytest.fixture(scope="session")
def e2_model():
    return load_model(CONFIG_DIR / "e2.yaml")


@pytest.fixture(scope="session")
def mm1_model():
    return load_model(CONFIG_DIR / "mm1.yaml")


@pytest.fixture(scope="session")
def k3_model():
    return load_model(CONFIG_DIR / "k3.yaml")


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR
