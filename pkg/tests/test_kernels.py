"""Parity between the numba kernels and their pure-numpy fallbacks.

Both paths must be bitwise identical (same accumulation order), so backend
choice can never change artifacts.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from stancekit import kernels

needs_numba = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")


def random_vote_case(rng, n_members=None, n_examples=50, n_labels=3, one_hot=False):
    n_members = n_members or int(rng.integers(2, 6))
    if one_hot:
        hard = rng.integers(0, n_labels, (n_members, n_examples)).astype(np.int64)
        scores = np.zeros((n_members, n_examples, n_labels))
        for m in range(n_members):
            scores[m, np.arange(n_examples), hard[m]] = 1.0
    else:
        scores = rng.random((n_members, n_examples, n_labels))
        scores /= scores.sum(axis=2, keepdims=True)
        hard = scores.argmax(axis=2).astype(np.int64)
    weights = rng.uniform(0.0, 2.0, n_members)
    return scores, weights, hard


class TestConfusionCounts:
    def test_small_case(self):
        gold = np.array([0, 0, 1, 1], dtype=np.int64)
        pred = np.array([0, 1, 1, 1], dtype=np.int64)
        expected = [[1, 1], [0, 2]]
        assert kernels.confusion_counts_numpy(gold, pred, 2).tolist() == expected
        assert kernels.confusion_counts(gold, pred, 2).tolist() == expected

    @needs_numba
    def test_backend_parity_random(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n_labels = int(rng.integers(2, 7))
            n = int(rng.integers(1, 500))
            gold = rng.integers(0, n_labels, n).astype(np.int64)
            pred = rng.integers(0, n_labels, n).astype(np.int64)
            assert np.array_equal(
                kernels.confusion_counts_numpy(gold, pred, n_labels),
                kernels.confusion_counts_numba(gold, pred, n_labels),
            )


class TestVoteBatch:
    @needs_numba
    @pytest.mark.parametrize("tie_break", [kernels.TIE_HIGHEST_WEIGHT,
                                           kernels.TIE_MAJORITY_LABEL])
    @pytest.mark.parametrize("one_hot", [True, False])
    def test_backend_parity_random(self, tie_break, one_hot):
        rng = np.random.default_rng(1)
        for _ in range(30):
            scores, weights, hard = random_vote_case(rng, one_hot=one_hot)
            args = (scores, weights, hard, weights, tie_break, 0, 1e-9)
            assert np.array_equal(
                kernels.vote_batch_numpy(*args), kernels.vote_batch_numba(*args)
            )

    @needs_numba
    def test_backend_parity_forced_ties(self):
        # Every member disagrees with every other: all-tied votes everywhere.
        n_members, n_examples, n_labels = 3, 40, 3
        scores = np.zeros((n_members, n_examples, n_labels))
        hard = np.zeros((n_members, n_examples), dtype=np.int64)
        for m in range(n_members):
            hard[m, :] = m
            scores[m, :, m] = 1.0
        weights = np.array([0.2, 0.2, 0.2])
        for tie_break in (kernels.TIE_HIGHEST_WEIGHT, kernels.TIE_MAJORITY_LABEL):
            args = (scores, np.ones(n_members), hard, weights, tie_break, 2, 1e-9)
            out_np = kernels.vote_batch_numpy(*args)
            out_nb = kernels.vote_batch_numba(*args)
            assert np.array_equal(out_np, out_nb)
            expected = 0 if tie_break == kernels.TIE_HIGHEST_WEIGHT else 2
            assert np.all(out_np == expected)

    def test_unsupported_tie_falls_back_to_first_tied_label(self):
        # Two soft members produce a tie between labels 0 and 2, but both
        # members' hard labels point at label 1.
        scores = np.array([
            [[0.4, 0.5, 0.1]],
            [[0.1, 0.5, 0.4]],
        ])
        hard = np.array([[1], [1]], dtype=np.int64)
        weights = np.ones(2)
        out = kernels.vote_batch_numpy(
            scores, weights, hard, weights, kernels.TIE_HIGHEST_WEIGHT, 2, 1e-9
        )
        # totals: [0.5, 1.0, 0.5] -> no tie at top; label 1 wins outright
        assert out.tolist() == [1]
        # Now force the three-way tie.
        scores = np.array([
            [[0.5, 0.0, 0.5]],
            [[0.5, 0.0, 0.5]],
        ])
        out = kernels.vote_batch_numpy(
            scores, weights, hard, weights, kernels.TIE_HIGHEST_WEIGHT, 2, 1e-9
        )
        assert out.tolist() == [0]  # first tied label in label order


class TestAdamWUpdate:
    @needs_numba
    def test_backend_parity_bitwise(self):
        rng = np.random.default_rng(2)
        shapes = [(64,), (256,), (1000,)]
        for shape in shapes:
            p_np = rng.standard_normal(shape)
            g = rng.standard_normal(shape)
            p_nb = p_np.copy()
            m_np, v_np = np.zeros(shape), np.zeros(shape)
            m_nb, v_nb = np.zeros(shape), np.zeros(shape)
            for step in range(1, 6):
                bc1, bc2 = 1.0 - 0.9**step, 1.0 - 0.999**step
                kernels.adamw_update_numpy(p_np, g, m_np, v_np, bc1, bc2, 1e-5,
                                           0.9, 0.999, 1e-8, 0.01)
                kernels.adamw_update_numba(p_nb, g, m_nb, v_nb, bc1, bc2, 1e-5,
                                           0.9, 0.999, 1e-8, 0.01)
            assert np.array_equal(p_np, p_nb)
            assert np.array_equal(m_np, m_nb)
            assert np.array_equal(v_np, v_nb)

    def test_moves_toward_negative_gradient(self):
        param = np.zeros(4)
        grad = np.array([1.0, -1.0, 2.0, -2.0])
        m = np.zeros(4)
        v = np.zeros(4)
        kernels.adamw_update_numpy(param, grad, m, v, 0.1, 0.001, 1e-3,
                                   0.9, 0.999, 1e-8, 0.0)
        assert np.all(np.sign(param) == -np.sign(grad))


class TestBackendSelection:
    def test_active_backend_reported(self):
        assert kernels.backend_name() in ("numba", "numpy")

    def test_env_flag_forces_numpy(self):
        code = (
            "from stancekit import kernels; "
            "print(kernels.backend_name(), kernels.confusion_counts is "
            "kernels.confusion_counts_numpy)"
        )
        env = dict(os.environ, STANCEKIT_NO_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env,
        )
        assert out.stdout.split() == ["numpy", "True"]

    @needs_numba
    def test_numba_default_when_available(self):
        env = {k: v for k, v in os.environ.items() if k != "STANCEKIT_NO_NUMBA"}
        code = "from stancekit import kernels; print(kernels.backend_name())"
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env,
        )
        assert out.stdout.strip() == "numba"


class TestScalarBatchParity:
    """The batched kernel must agree with the per-example vote functions."""

    def test_weighted_batch_equals_scalar(self, task_c):
        from stancekit.ensemble import EnsembleConfig, weighted_vote

        rng = np.random.default_rng(3)
        for _ in range(20):
            scores, weights, hard = random_vote_case(rng, n_members=3, n_examples=30)
            weights = np.maximum(weights, 0.05)
            members = tuple((f"m{i}", float(w)) for i, w in enumerate(weights))
            cfg = EnsembleConfig("weighted", members)
            batch = kernels.vote_batch(
                scores, weights, hard, weights, kernels.TIE_HIGHEST_WEIGHT,
                0, 1e-9,
            )
            for n in range(30):
                preds = [
                    (
                        task_c.label_set[hard[m, n]],
                        dict(zip(task_c.label_set, map(float, scores[m, n]))),
                    )
                    for m in range(3)
                ]
                assert task_c.label_set[batch[n]] == weighted_vote(preds, cfg, task_c)
