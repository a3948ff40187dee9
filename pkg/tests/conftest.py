import numpy as np
import pytest

from microcav import stack as st


@pytest.fixture(scope="session")
def fixture_mirror():
    return st.build_mirror()


@pytest.fixture(scope="session")
def membrane_assembly():
    """Documented membrane-cavity fixture (t_d 1420 nm, t_g2 250 nm)."""
    return st.default_assembly()


@pytest.fixture(scope="session")
def empty_assembly(fixture_mirror):
    return st.CavityAssembly(fixture_mirror, 10_000.0, None, 0.0, fixture_mirror, r_c_um=45.0)


@pytest.fixture(scope="session")
def hard_assembly():
    hm = st.hard_mirror()
    return st.CavityAssembly(hm, 10_000.0, None, 0.0, hm, r_c_um=45.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
