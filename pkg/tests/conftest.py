import time

import pytest

from ewbench import solver
from ewbench.bundle import validate_bundle_spec

# regression anchors from the first certified run (n=2, eps=1, s=1, a=0.5, C=1)
REF_A = 0.5
REF_G2 = 0.1614689713481438
REF_L = 1.2576590243603276


@pytest.fixture(scope="session")
def spec_s1():
    return validate_bundle_spec({"n": 2, "epsilon": 1, "k": 1, "q": 2})


@pytest.fixture(scope="session")
def timed_solution64(spec_s1):
    start = time.perf_counter()
    sol = solver.solve(spec_s1, REF_A, 1.0, count=64, seed=0)
    return sol, time.perf_counter() - start


@pytest.fixture(scope="session")
def solution64(timed_solution64):
    return timed_solution64[0]


@pytest.fixture(scope="session")
def solution128(spec_s1):
    return solver.solve(spec_s1, REF_A, 1.0, count=128, seed=0)
