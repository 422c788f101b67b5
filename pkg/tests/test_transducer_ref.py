import math

import numpy as np
import pytest

from lwtransducer.errors import OracleLimit
from lwtransducer.tensor_core import log_softmax
from lwtransducer.transducer_ref import (
    brute_force_transducer,
    memory_footprint_report,
    transducer_forward,
    transducer_loss_grad,
)

from conftest import random_label


def random_joint(rng, T, U, V):
    return log_softmax(rng.normal(size=(T, U + 1, V)) * 1.5, axis=-1)


def test_single_path():
    joint = np.log(np.array([[[0.4, 0.6], [0.5, 0.5]]]))  # T=1, U=1, V=2
    loss, _ = transducer_forward(joint, [1])
    assert loss == pytest.approx(-math.log(0.3), abs=1e-12)
    assert brute_force_transducer(joint, [1]) == pytest.approx(loss, abs=1e-12)


def test_two_frames_one_label(rng):
    j = random_joint(rng, 2, 1, 3)
    b, y = j[:, :, 0], j[:, 0, 1]
    expect = -np.logaddexp(b[0, 0] + y[1] + b[1, 1], y[0] + b[0, 1] + b[1, 1])
    assert transducer_forward(j, [1])[0] == pytest.approx(expect, abs=1e-12)


def test_empty_label(rng):
    j = random_joint(rng, 4, 0, 3)
    assert transducer_forward(j, [])[0] == pytest.approx(-j[:, 0, 0].sum(), abs=1e-12)


def test_forced_staircase(rng):
    j = random_joint(rng, 1, 3, 4)
    y = [2, 3, 1]
    expect = -(j[0, 0, 2] + j[0, 1, 3] + j[0, 2, 1] + j[0, 3, 0])
    assert transducer_forward(j, y)[0] == pytest.approx(expect, abs=1e-12)


def test_empty_input():
    with pytest.raises(ValueError, match="empty input"):
        transducer_forward(np.zeros((0, 1, 3)), [])


def test_oracle_limit():
    with pytest.raises(OracleLimit):
        brute_force_transducer(np.zeros((40, 11, 3)), [1] * 10)


def test_alpha_boundaries(rng):
    j = random_joint(rng, 3, 2, 4)
    _, alpha = transducer_forward(j, [1, 2])
    assert alpha[0, 0] == 0.0
    np.testing.assert_allclose(alpha[1:, 0], np.cumsum(j[:-1, 0, 0]), atol=1e-12)
    assert alpha[0, 2] == pytest.approx(j[0, 0, 1] + j[0, 1, 2], abs=1e-12)


def test_relabel_symmetry(rng):
    j = random_joint(rng, 3, 2, 5)
    y = [1, 2]
    swapped = j[:, :, [0, 1, 2, 4, 3]]
    assert transducer_forward(swapped, y)[0] == pytest.approx(transducer_forward(j, y)[0], abs=1e-12)


def test_iteration_order_independent(rng):
    # a column-major recursion over the same lattice
    for _ in range(20):
        T, U, V = int(rng.integers(1, 6)), int(rng.integers(0, 5)), 4
        y = random_label(rng, V, U)
        j = random_joint(rng, T, U, V)
        b = j[:, :, 0]
        alpha = np.full((T, U + 1), -np.inf)
        for u in range(U + 1):
            for t in range(T):
                if t == 0 and u == 0:
                    alpha[t, u] = 0.0
                    continue
                terms = []
                if t > 0:
                    terms.append(alpha[t - 1, u] + b[t - 1, u])
                if u > 0:
                    terms.append(alpha[t, u - 1] + j[t, u - 1, y[u - 1]])
                alpha[t, u] = np.logaddexp.reduce(terms)
        np.testing.assert_allclose(transducer_forward(j, y)[1], alpha, atol=1e-12)


def test_grad_matches_finite_differences(rng):
    for _ in range(10):
        T, U, V = int(rng.integers(1, 4)), int(rng.integers(0, 3)), 3
        y = random_label(rng, V, U)
        j = random_joint(rng, T, U, V)
        _, g = transducer_loss_grad(j, y)
        num = np.zeros_like(j)
        eps = 1e-5
        for idx in np.ndindex(*j.shape):
            up, dn = j.copy(), j.copy()
            up[idx] += eps
            dn[idx] -= eps
            num[idx] = (transducer_forward(up, y)[0] - transducer_forward(dn, y)[0]) / (2 * eps)
        rel = np.abs(g - num) / np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-8)
        assert rel.max() <= 1e-4


def test_memory_report():
    r = memory_footprint_report(16, 100, 20, 4233)
    assert r.full_activations == 142_228_800
    assert r.frame_activations == 6_772_800
    assert r.ratio == 21
    assert r.csv() == "142228800,6772800,21"
    assert tuple(memory_footprint_report(1, 1, 0, 2)) == (2, 2, 1)
    assert memory_footprint_report(16, 100, 40, 4233).ratio / r.ratio == pytest.approx(41 / 21)
    with pytest.raises(ValueError):
        memory_footprint_report(0, 1, 1, 1)
