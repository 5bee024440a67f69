import pytest

from alphafair import build_instance


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run full-scale slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


E1_LINKS = [("j1", 1.0), ("j2", 10.0)]
E1_REQUESTS = [("r1", ("j1",), 1.0), ("r2", ("j1", "j2"), 1.0), ("r3", ("j2",), 1.0)]
# root of 3t^2 + 16t - 9 = 0 gives r1; r2 = 1 - r1 and r3 = 10 - r2
E1_T = (-16.0 + (16.0 ** 2 + 4 * 3 * 9) ** 0.5) / 6.0
E1_OPT = (E1_T, 1.0 - E1_T, 9.0 + E1_T)


@pytest.fixture
def e1():
    return build_instance(E1_LINKS, E1_REQUESTS)


def single_link(weights, capacity=1.0):
    return build_instance([("j1", capacity)],
                          [(f"r{k + 1}", ("j1",), w) for k, w in enumerate(weights)])
