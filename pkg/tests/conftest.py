import pytest

from asymlab.operators.operator_family import make_operator


@pytest.fixture(autouse=True)
def asymlab_home(tmp_path_factory, monkeypatch):
    home = tmp_path_factory.mktemp("asymlab-home")
    monkeypatch.setenv("ASYMLAB_HOME", str(home))
    monkeypatch.delenv("ASYMLAB_SEED", raising=False)
    return home


@pytest.fixture(scope="session")
def minimal_graph():
    return make_operator("minimalGraph")


@pytest.fixture(scope="session")
def laplacian():
    return make_operator("pLaplacian", {"p": 2})


@pytest.fixture
def out_dir(tmp_path):
    d = tmp_path / "out"
    d.mkdir()
    return d
