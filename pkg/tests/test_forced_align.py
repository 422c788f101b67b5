import json
import math
import os

import numpy as np
import pytest

from lwtransducer.errors import InfeasibleLabel
from lwtransducer.forced_align import (
    backtrack_choose_final,
    brute_force_best_path,
    count_paths,
    forced_align_batch,
    forced_align_states,
    format_alignment,
)
from lwtransducer.labels import alignment_runs, runs_to_matrix
from lwtransducer.tensor_core import BatchGrid

from batched_align_reference import reference_align
from conftest import random_grid, random_label

A, B = 1, 2
FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures", "replica_alignments.json")


def align_one(logp, y, mode="viterbi"):
    return forced_align_batch(BatchGrid(logp[None]), np.array([y or [-1]]), 0, mode)[0, : len(y)]


def test_dominant_diagonal():
    logp = np.log([[0.05, 0.9, 0.05], [0.9, 0.05, 0.05]])
    np.testing.assert_array_equal(align_one(logp, [A]), [[1, 0]])


def test_choose_final():
    assert backtrack_choose_final([-5.0, -2.0, -1.0], 3) == 2
    assert backtrack_choose_final([-5.0, -1.0, -1.0], 3) == 1
    assert backtrack_choose_final([-0.5], 1) == 0


def test_uniform_tie_prefers_first_frame():
    logp = np.full((2, 3), -math.log(3))
    a, _ = brute_force_best_path(logp, [A])
    assert alignment_runs(a)[0][0] == 0
    for mode in ("viterbi", "paper_replica"):
        assert alignment_runs(align_one(logp, [A], mode))[0][0] == 0


def test_forced_path_at_minimum_length(rng):
    y = [A, A, B, B]  # A _ A B _ B is the only legal path in 6 frames
    logp = random_grid(rng, 6, 3)
    assert count_paths(6, y) == 1
    a, _ = brute_force_best_path(logp, y)
    np.testing.assert_array_equal(a, runs_to_matrix([(0, 0), (2, 2), (3, 3), (5, 5)], 6))
    np.testing.assert_array_equal(align_one(logp, y), a)


def test_empty_label_all_blank(rng):
    logp = random_grid(rng, 4, 3)
    batch = BatchGrid(logp[None])
    for mode in ("viterbi", "paper_replica"):
        states, _ = forced_align_states(batch, np.full((1, 2), -1), 0, mode)
        assert list(states[0]) == [0, 0, 0, 0]
        assert forced_align_batch(batch, np.full((1, 2), -1), 0, mode).sum() == 0


def test_infeasible_names_item(rng):
    batch = BatchGrid.from_items([random_grid(rng, 4, 3), random_grid(rng, 2, 3)])
    with pytest.raises(InfeasibleLabel, match="item 1"):
        forced_align_batch(batch, np.array([[1, 2], [1, 1]]))


def test_bad_mode(rng):
    with pytest.raises(ValueError):
        forced_align_batch(BatchGrid(random_grid(rng, 2, 3)[None]), np.array([[1]]), mode="beam")


def test_oracle_three_frames(rng):
    for _ in range(50):
        logp = random_grid(rng, 3, 3)
        a, score = brute_force_best_path(logp, [A, B])
        np.testing.assert_array_equal(align_one(logp, [A, B]), a)
        states, scores = forced_align_states(BatchGrid(logp[None]), np.array([[A, B]]))
        assert scores[0] == pytest.approx(score, abs=1e-12)


def test_padding_invariance(rng):
    for _ in range(30):
        V = 4
        items, labels = [], []
        for T in (3, 2, 6):
            items.append(random_grid(rng, T, V))
            labels.append(random_label(rng, V, int(rng.integers(0, 3)), feasible_for=T))
        U_max = max(len(y) for y in labels) + 1
        padded = np.array([y + [-1] * (U_max - len(y)) for y in labels])
        for mode in ("viterbi", "paper_replica"):
            batch = forced_align_batch(BatchGrid.from_items(items), padded, 0, mode)
            for n, (g, y) in enumerate(zip(items, labels)):
                alone = align_one(g, y, mode)
                np.testing.assert_array_equal(batch[n, : len(y), : g.shape[0]], alone)
                assert batch[n, len(y):].sum() == 0 and batch[n, :, g.shape[0]:].sum() == 0


def test_deterministic(rng):
    logp = np.stack([random_grid(rng, 6, 4) for _ in range(3)])
    labels = np.array([[1, 2], [3, -1], [2, 2]])
    for mode in ("viterbi", "paper_replica"):
        first = forced_align_batch(BatchGrid(logp), labels, 0, mode)
        assert first.tobytes() == forced_align_batch(BatchGrid(logp), labels, 0, mode).tobytes()


def test_modes_agree_on_peaked_grids(rng):
    for _ in range(100):
        T, V = int(rng.integers(2, 9)), 4
        y = random_label(rng, V, int(rng.integers(1, 4)), feasible_for=T)
        # a legal path, then one-hot rows of probability 0.995 along it
        ext = [0] + sum(([t, 0] for t in y), [])
        path = _random_legal_path(rng, ext, T)
        p = np.full((T, V), 0.005 / (V - 1))
        p[np.arange(T), [ext[s] for s in path]] = 0.995
        logp = np.log(p)
        v = align_one(logp, y, "viterbi")
        r = align_one(logp, y, "paper_replica")
        np.testing.assert_array_equal(v, r)


def _random_legal_path(rng, ext, T):
    S = len(ext)
    while True:
        s = int(rng.integers(0, 2))
        path = [s]
        for _ in range(T - 1):
            moves = [s, s + 1] + ([s + 2] if s + 2 < S and ext[s + 2] != ext[s] else [])
            s = int(rng.choice([m for m in moves if m < S]))
            path.append(s)
        if path[-1] >= S - 2:
            return path


def test_replica_fixtures_frozen():
    with open(FIXTURES) as fh:
        cases = json.load(fh)
    assert sum(len(c["labels"]) for c in cases) >= 20
    for case in cases:
        logp = np.array(case["logp"])
        labels = np.array(case["labels"])
        expect = np.array(case["alignment"])
        np.testing.assert_array_equal(reference_align(logp, labels, case["blank"]), expect)
        got = forced_align_batch(BatchGrid(logp), labels, case["blank"], "paper_replica")
        np.testing.assert_array_equal(got, expect, err_msg=case["name"])


def test_replica_matches_reference_random(rng):
    for _ in range(100):
        N, T, V = 3, int(rng.integers(2, 9)), int(rng.integers(3, 6))
        labels = [random_label(rng, V, int(rng.integers(1, 4)), feasible_for=T) for _ in range(N)]
        U = max(len(y) for y in labels)
        padded = np.array([y + [-1] * (U - len(y)) for y in labels])
        scale = float(rng.choice([0.0, 0.5, 3.0]))
        logp = np.stack([random_grid(rng, T, V, scale) for _ in range(N)])
        got = forced_align_batch(BatchGrid(logp), padded, 0, "paper_replica")
        np.testing.assert_array_equal(got, reference_align(logp, padded, 0))


def test_format_alignment():
    a = runs_to_matrix([(0, 1), (3, 3)], 5)
    assert format_alignment(a).splitlines() == ["token 0: frames [0..1]", "token 1: frames [3..3]"]
