"""Dissimilar-subset selection: agreement between the compiled and numpy
paths, quality against the exhaustive optimum at small sizes, and the
deterministic edge cases."""

import itertools
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionsearch import kernels
from motionsearch.kernels import dissimilar_subset, subset_objective


def random_sim(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 6))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    sim = np.clip(v @ v.T, -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def brute_force(sim, m):
    best, best_obj = None, np.inf
    for combo in itertools.combinations(range(sim.shape[0]), m):
        obj = subset_objective(sim, np.array(combo))
        if obj < best_obj:
            best_obj = obj
            best = combo
    return np.array(best), best_obj


class TestEdgeCases:
    def test_full_set(self):
        sim = random_sim(6, 0)
        assert np.array_equal(dissimilar_subset(sim, 6), np.arange(6))

    def test_empty(self):
        assert dissimilar_subset(random_sim(4, 0), 0).size == 0

    def test_single_picks_least_connected(self):
        sim = random_sim(8, 1)
        idx = dissimilar_subset(sim, 1)
        assert idx[0] == np.argmin(sim.sum(axis=1))

    def test_too_large_rejected(self):
        with pytest.raises(ValueError):
            dissimilar_subset(random_sim(3, 0), 5)

    def test_sorted_output_no_duplicates(self):
        sub = dissimilar_subset(random_sim(30, 2), 10)
        assert np.array_equal(sub, np.sort(sub))
        assert len(np.unique(sub)) == 10

    def test_deterministic(self):
        sim = random_sim(40, 3)
        a = dissimilar_subset(sim, 12)
        b = dissimilar_subset(sim, 12)
        assert np.array_equal(a, b)


class TestQuality:
    def test_matches_exhaustive_within_5pct(self):
        # the acceptance bound, spot-checked here on a handful of cases
        for seed in range(10):
            n = 8 + seed % 5
            m = 3 + seed % 4
            sim = random_sim(n, seed + 100)
            heur = subset_objective(sim, dissimilar_subset(sim, m))
            _, opt = brute_force(sim, m)
            span = max(abs(opt), 1e-9)
            assert heur <= opt + 0.05 * span + 1e-9

    def test_local_search_improves_or_keeps_greedy(self):
        sim = random_sim(25, 7)
        if kernels.USE_NUMBA:
            greedy = kernels._greedy_subset(sim, 8)
        else:
            greedy = kernels._greedy_subset_np(sim, 8)
        final = dissimilar_subset(sim, 8)
        assert subset_objective(sim, final) <= \
            subset_objective(sim, np.sort(greedy)) + 1e-9


class TestFallbackParity:
    def test_numpy_path_matches_compiled(self):
        for seed in (0, 1, 2):
            sim = random_sim(35, seed + 50)
            a = kernels._greedy_subset_np(sim, 10)
            b = kernels._local_search_1swap_np(sim, a, 10000)
            if kernels.USE_NUMBA:
                c = kernels._greedy_subset(sim, 10)
                d = kernels._local_search_1swap(sim, c, 10000)
                assert np.array_equal(np.sort(b), np.sort(d))
            assert subset_objective(sim, b) <= subset_objective(sim, a) + 1e-9

    def test_env_flag_selects_numpy(self):
        code = ("import os; os.environ['MOTIONSEARCH_NO_NUMBA'] = '1'; "
                "from motionsearch import kernels; "
                "print(kernels.USE_NUMBA)")
        out = subprocess.run([sys.executable, "-c", code],
                             capture_output=True, text=True)
        assert out.stdout.strip() == "False"


class TestObjective:
    def test_hand_computed(self):
        sim = np.array([[1.0, 0.5, 0.2],
                        [0.5, 1.0, 0.1],
                        [0.2, 0.1, 1.0]])
        assert subset_objective(sim, np.array([0, 1])) == pytest.approx(0.5)
        assert subset_objective(sim, np.array([0, 1, 2])) == \
            pytest.approx(0.8)
        assert subset_objective(sim, np.array([2])) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(5, 12), st.integers(2, 5))
def test_property_heuristic_never_above_exhaustive_by_much(seed, n, m):
    sim = random_sim(n, seed)
    heur = subset_objective(sim, dissimilar_subset(sim, m))
    _, opt = brute_force(sim, m)
    assert heur <= opt + 0.05 * max(abs(opt), 1e-9) + 1e-9
