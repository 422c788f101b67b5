import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lwtransducer.errors import CorruptTensorFile
from lwtransducer.tensor_core import (
    MAGIC,
    BatchGrid,
    LogProbGrid,
    load_array,
    log_sum_exp,
    log_softmax_rows,
    read_tensor,
    save_array,
    write_tensor,
)

finite = st.floats(-1e4, 1e4, allow_nan=False)


def test_log_sum_exp_examples():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert log_sum_exp([-3.25]) == -3.25
    assert log_sum_exp([-10000.0, -10000.0]) == pytest.approx(-10000.0 + math.log(2), abs=1e-9)


def test_log_sum_exp_empty():
    with pytest.raises(ValueError, match="empty reduction"):
        log_sum_exp([])


@given(finite)
def test_log_sum_exp_neg_inf_absorbs(a):
    assert log_sum_exp([a, -math.inf]) == a
    assert log_sum_exp([-math.inf, -math.inf]) == -math.inf


@given(st.lists(finite, min_size=1, max_size=8), st.randoms())
def test_log_sum_exp_permutation_invariant(xs, r):
    ys = list(xs)
    r.shuffle(ys)
    assert log_sum_exp(xs) == pytest.approx(log_sum_exp(ys), abs=1e-12)


@given(st.lists(finite, min_size=1, max_size=8), st.floats(0.0, 10.0))
def test_log_sum_exp_monotone(xs, d):
    bumped = [xs[0] + d] + xs[1:]
    assert log_sum_exp(bumped) >= log_sum_exp(xs) - 1e-12


def test_log_softmax_examples():
    g = log_softmax_rows([[0.0, 0.0, 0.0], [1000.0, 0.0, 0.0]])
    np.testing.assert_allclose(g.data[0], -math.log(3), atol=1e-15)
    np.testing.assert_allclose(g.data[1], [0.0, -1000.0, -1000.0], atol=1e-12)
    assert np.all(np.isfinite(g.data))


def test_log_softmax_rejects_nan():
    with pytest.raises(ValueError, match="non-finite logits"):
        log_softmax_rows([[0.0, np.nan]])


@given(st.lists(st.lists(finite, min_size=2, max_size=6), min_size=1, max_size=5).filter(
    lambda rows: len({len(r) for r in rows}) == 1))
def test_log_softmax_normalized(rows):
    g = log_softmax_rows(rows)
    np.testing.assert_allclose(np.exp(g.data).sum(axis=1), 1.0, atol=1e-9)
    assert g.is_normalized()


def test_grids_are_read_only():
    g = LogProbGrid(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        g.data[0, 0] = 1.0


def test_batch_from_items_pads():
    b = BatchGrid.from_items([np.zeros((3, 2)), np.ones((1, 2))])
    assert b.data.shape == (2, 3, 2)
    assert list(b.lengths) == [3, 1]
    np.testing.assert_array_equal(b.item(1), np.ones((1, 2)))
    assert np.all(b.data[1, 1:] == -np.inf)


def test_batch_rejects_bad_lengths():
    with pytest.raises(ValueError):
        BatchGrid(np.zeros((2, 3, 2)), np.array([0, 3]))


def test_round_trip_bit_exact(tmp_path, rng):
    data = rng.normal(size=(2, 3, 4))
    data[0, 2] = -np.inf
    grid = BatchGrid(data, np.array([3, 2]))
    path = tmp_path / "g.ltt"
    write_tensor(grid, path)
    back = read_tensor(path)
    assert back.data.tobytes() == grid.data.tobytes()
    assert list(back.lengths) == [3, 2]
    assert path.read_bytes()[:8] == MAGIC


def test_truncated_file(tmp_path, rng):
    path = tmp_path / "g.ltt"
    save_array(path, rng.normal(size=(2, 3, 4)))
    raw = path.read_bytes()
    for cut in (4, 12, len(raw) - 8):
        path.write_bytes(raw[:cut])
        with pytest.raises(CorruptTensorFile, match="corrupt tensor file"):
            load_array(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "g.ltt"
    save_array(path, np.zeros(3))
    raw = bytearray(path.read_bytes())
    raw[0:8] = b"NOTMAGIC"
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptTensorFile):
        load_array(path)


def test_shape_payload_mismatch(tmp_path):
    path = tmp_path / "g.ltt"
    save_array(path, np.zeros((2, 3, 4)))
    raw = path.read_bytes()
    path.write_bytes(raw.replace(b"[2, 3, 4]", b"[2, 3, 5]"))
    with pytest.raises(CorruptTensorFile):
        load_array(path)
