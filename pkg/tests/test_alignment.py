import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abeclip import SimilarityMatrix, aggregate_score, token_score, topk_indices
from abeclip.alignment import AlignmentParams, align_tokens
from oracles import sort_oracle_aggregate, sort_oracle_topk


class TestTopK:
    def test_hand_case(self):
        assert topk_indices([0.9, 0.1, 0.5, 0.7], 2) == (0, 3)

    def test_all_equal_takes_lowest_indices(self):
        assert topk_indices([0.5, 0.5, 0.5, 0.5], 3) == (0, 1, 2)

    def test_matches_sort_oracle_random(self):
        rng = np.random.default_rng(11)
        row = rng.standard_normal(10)
        assert list(topk_indices(row, 4)) == sort_oracle_topk(list(row), 4)

    @pytest.mark.parametrize("k", [0, 5, -1])
    def test_out_of_range_k(self, k):
        with pytest.raises(ValueError):
            topk_indices([0.1, 0.2, 0.3, 0.4], k)

    @given(
        st.lists(
            st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]), min_size=1, max_size=12
        ),
        st.data(),
    )
    def test_oracle_equivalence_with_ties(self, row, data):
        k = data.draw(st.integers(1, len(row)))
        assert list(topk_indices(row, k)) == sort_oracle_topk(row, k)


class TestTokenScore:
    def test_hand_mean(self):
        # (0.9 + 0.7) / 2
        assert token_score([0.9, 0.1, 0.5, 0.7], 2) == pytest.approx(0.8, abs=1e-15)

    def test_k1_is_max(self):
        assert token_score([0.9, 0.1, 0.5, 0.7], 1) == 0.9

    def test_k_equals_n_is_full_mean(self):
        # (0.9 + 0.1 + 0.5 + 0.7) / 4
        assert token_score([0.9, 0.1, 0.5, 0.7], 4) == pytest.approx(0.55, abs=1e-15)

    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=20))
    def test_monotone_in_k(self, row):
        scores = [token_score(row, k) for k in range(1, len(row) + 1)]
        for smaller, larger in zip(scores[1:], scores):
            assert smaller <= larger + 1e-12


class TestAggregate:
    def _sim(self, values):
        return SimilarityMatrix(values=np.asarray(values, dtype=float))

    def test_single_token(self):
        sim = self._sim([[1.0, 0.0]])
        assert aggregate_score(sim, [True], 1) == 1.0

    def test_two_tokens_hand_mean(self):
        # phis 0.8 and 0.4 -> 0.6
        sim = self._sim([[0.9, 0.7, 0.1], [0.5, 0.3, 0.1]])
        assert aggregate_score(sim, [True, True], 2) == pytest.approx(0.6, abs=1e-15)

    def test_mask_excludes_rows(self):
        sim = self._sim([[1.0, 1.0], [-1.0, -1.0]])
        assert aggregate_score(sim, [True, False], 1) == 1.0

    def test_empty_mask_errors(self):
        sim = self._sim([[1.0, 0.0]])
        with pytest.raises(ValueError):
            aggregate_score(sim, [False], 1)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(5)
        values = np.clip(rng.standard_normal((5, 8)) * 0.4, -1, 1)
        sim = self._sim(values)
        mask = [True] * 5
        assert aggregate_score(sim, mask, 3) == sort_oracle_aggregate(values, mask, 3)

    def test_patch_permutation_invariance(self):
        rng = np.random.default_rng(6)
        values = np.clip(rng.standard_normal((4, 7)) * 0.4, -1, 1)
        perm = rng.permutation(7)
        mask = [True] * 4
        for k in (1, 3, 7):
            assert aggregate_score(self._sim(values), mask, k) == pytest.approx(
                aggregate_score(self._sim(values[:, perm]), mask, k), abs=1e-15
            )

    def test_bounds(self):
        rng = np.random.default_rng(7)
        values = np.clip(rng.standard_normal((6, 9)), -1, 1)
        score = aggregate_score(self._sim(values), [True] * 6, 4)
        assert -1.0 - 1e-6 <= score <= 1.0 + 1e-6

    def test_k_larger_than_n_errors(self):
        sim = self._sim([[0.1, 0.2]])
        with pytest.raises(ValueError):
            aggregate_score(sim, [True], 3)


class TestAlignTokens:
    def test_records(self):
        sim = SimilarityMatrix(values=np.array([[0.9, 0.1, 0.5, 0.7], [0.2, 0.4, 0.3, 0.1]]))
        records = align_tokens(sim, [True, True], 2)
        assert records[0].token_index == 0
        assert records[0].patch_indices == (0, 3)
        assert records[0].token_score == pytest.approx(0.8, abs=1e-15)
        assert records[1].patch_indices == (1, 2)

    def test_params_reject_bad_k(self):
        with pytest.raises(ValueError):
            AlignmentParams(k=0)
