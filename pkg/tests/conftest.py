import os

# single-core BLAS keeps timings honest and reductions reproducible
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lwt", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lwt")


def random_grid(rng, T, V, scale=2.0):
    """Row-normalized T x V log-prob grid."""
    x = rng.normal(size=(T, V)) * scale
    m = x.max(axis=1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=1, keepdims=True))


def random_label(rng, V, U, feasible_for=None):
    """U non-blank tokens; with ``feasible_for`` set, shrink U until T suffices."""
    while True:
        for _ in range(20):
            y = [int(t) for t in rng.integers(1, V, size=U)]
            need = len(y) + sum(a == b for a, b in zip(y, y[1:]))
            if feasible_for is None or need <= feasible_for:
                return y
        U -= 1


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (k[0], int(k.split()[0][1:]))):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
