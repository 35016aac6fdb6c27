import pytest

from finslergeo import catalog


@pytest.fixture(scope="session")
def entries():
    """All catalog entries, instantiated once (admissibility is verified at load)."""
    return {name: catalog.get(name) for name in catalog.names()}


@pytest.fixture(scope="session")
def pseudo_riemannian_names():
    """Entries whose Lagrangian is quadratic in xdot (smooth on TM minus 0)."""
    return ["minkowski4", "schwarzschild", "conformally-flat"]


@pytest.fixture(scope="session")
def family_names():
    return ["bogoslovsky", "kropina", "szabo-counterexample", "nonberwald-flat"]
