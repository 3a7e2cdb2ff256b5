import numpy as np
import pytest

from qprecond.problems import gen_sk
from qprecond.solvers import burer_monteiro, simulated_annealing


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    # compile the hot kernels once so per-test timings are not dominated
    # by JIT compilation
    prob = gen_sk(8, 0)
    simulated_annealing(prob, 2, 0)
    burer_monteiro(prob, 1, 0)
