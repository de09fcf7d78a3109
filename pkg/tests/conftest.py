import json

import pytest

from src.core.config import Config
from src.data.models import FiniteMetricSpace


@pytest.fixture
def config() -> Config:
    return Config()


@pytest.fixture
def x3(config) -> FiniteMetricSpace:
    """a=(0,0), b=(3,0), c=(0,4): d(a,b)=3, d(a,c)=4, d(b,c)=5."""
    return FiniteMetricSpace.from_coords([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]], ids=["a", "b", "c"],
                                         config=config, label="X3")


@pytest.fixture
def line4(config) -> FiniteMetricSpace:
    return FiniteMetricSpace.from_coords([0.0, 1.0, 2.0, 3.0], ids=["0", "1", "2", "3"], config=config)


@pytest.fixture
def corrupted_matrix():
    # d(p,r) = 10 > d(p,q) + d(q,r) = 2
    return [[0, 1, 10], [1, 0, 1], [10, 1, 0]]


@pytest.fixture
def x3_files(tmp_path, x3):
    """Space and subset files for X3; returns a dict of paths."""
    space = tmp_path / "x3.json"
    space.write_text(json.dumps(x3.to_dict()))
    paths = {"space": space}
    for name, members in {"a": ["a"], "bc": ["b", "c"], "ab": ["a", "b"], "b": ["b"]}.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps({"space": "x3.json", "members": members}))
        paths[name] = path
    return paths
