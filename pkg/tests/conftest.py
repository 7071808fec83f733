from pathlib import Path

import pytest

NETWORKS_DIR = Path(__file__).parent / "networks"


@pytest.fixture(scope="session")
def networks_dir() -> Path:
    return NETWORKS_DIR


@pytest.fixture(scope="session")
def net_path():
    def lookup(name: str) -> Path:
        path = NETWORKS_DIR / name
        assert path.exists(), f"missing fixture {path}"
        return path

    return lookup
