import pytest

from koopman_inertia.grid_model import CASE_I, CASE_II, DEFAULT_LOADING, load_network, scale_loading
from koopman_inertia.simulator import simulate

T_END = 13.0  # covers a 12 s window after either fault clears


@pytest.fixture(scope="session")
def ieee39():
    return load_network("ieee39")


@pytest.fixture(scope="session")
def study_net(ieee39):
    return scale_loading(ieee39, DEFAULT_LOADING)


@pytest.fixture(scope="session")
def case_i_run(study_net):
    return simulate(study_net, CASE_I, T_END)


@pytest.fixture(scope="session")
def case_ii_run(study_net):
    return simulate(study_net, CASE_II, T_END)


@pytest.fixture(scope="session")
def case_i(case_i_run):
    return case_i_run[0]


@pytest.fixture(scope="session")
def case_ii(case_ii_run):
    return case_ii_run[0]
