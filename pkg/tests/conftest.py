import numpy as np
import pytest

from offsim import CalibrationTargets, ClusterConfig, calibrate


@pytest.fixture(scope="session")
def params():
    return calibrate(CalibrationTargets())


@pytest.fixture
def cluster():
    return ClusterConfig()


def naive_gemm(problem, a, b, c=None):
    """Independent triple-loop oracle over Matrix operands."""
    am, bm = a.as_array(), b.as_array()
    out = np.zeros((problem.m, problem.n))
    if problem.alpha != 0.0:
        for i in range(problem.m):
            for j in range(problem.n):
                s = 0.0
                for l in range(problem.k):
                    s += am[i, l] * bm[l, j]
                out[i, j] = problem.alpha * s
    if problem.beta != 0.0:
        out += problem.beta * c.as_array()
    return out


def align_up(x, align):
    return -(-x // align) * align


class IntervalOracle:
    """Brute-force first-fit allocator over a sorted list of live intervals."""

    def __init__(self, size):
        self.size = size
        self.live = {}  # offset -> size

    def alloc(self, size, align):
        candidate = 0
        for off in sorted(self.live):
            if candidate + size <= off:
                break
            candidate = align_up(max(candidate, off + self.live[off]), align)
        if candidate + size > self.size:
            return None
        self.live[candidate] = size
        return candidate

    def free(self, offset):
        del self.live[offset]

    def occupancy(self):
        return sorted(self.live.items())
