import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberpnr import (
    ConditionalMatrix,
    InputState,
    ModeProbabilities,
    NumericalError,
    ValidationError,
    build_matrix,
    factorized_matrix,
    loss_matrix,
    occupancy_distribution,
    occupancy_matrix,
    truncation_error,
)

from oracles import balanced_occupancy_exact, enumerate_occupancy, poisson_product_form


class TestOccupancy:
    def test_single_photon_single_click(self, balanced_modes):
        np.testing.assert_allclose(occupancy_distribution(balanced_modes, 1), np.eye(9)[1], atol=1e-15)

    def test_vacuum(self, balanced_modes):
        np.testing.assert_allclose(occupancy_distribution(balanced_modes, 0), np.eye(9)[0], atol=1e-15)

    def test_two_photons(self, balanced_modes):
        expected = enumerate_occupancy([1 / 8] * 8, 0.0, 2)
        np.testing.assert_allclose(expected[1:3], [1 / 8, 7 / 8], atol=1e-15)
        np.testing.assert_allclose(occupancy_distribution(balanced_modes, 2), expected, atol=1e-14)

    def test_negative_photon_number(self, balanced_modes):
        with pytest.raises(ValidationError):
            occupancy_distribution(balanced_modes, -1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 5), st.data())
    def test_matches_enumeration(self, n_modes, n, data):
        raw = data.draw(st.lists(st.floats(0.01, 1.0), min_size=n_modes + 1, max_size=n_modes + 1))
        w = np.array(raw) / sum(raw)
        modes = ModeProbabilities(q=w[:-1], q_loss=float(w[-1]))
        expected = enumerate_occupancy(modes.q.tolist(), modes.q_loss, n)
        np.testing.assert_allclose(occupancy_distribution(modes, n), expected, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("n", range(9))
    def test_stirling_closed_form(self, balanced_modes, n):
        expected = [float(x) for x in balanced_occupancy_exact(8, n)]
        np.testing.assert_allclose(occupancy_distribution(balanced_modes, n), expected, rtol=0, atol=1e-13)

    def test_large_photon_numbers_stay_stochastic(self):
        modes = ModeProbabilities.from_q([0.2, 0.1, 0.05, 0.15, 0.1, 0.1, 0.1, 0.1])
        p = occupancy_matrix(modes, 60)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-12)


class TestLossMatrix:
    def test_lossless_is_identity(self):
        np.testing.assert_array_equal(loss_matrix(1.0, 6), np.eye(7))

    def test_half_loss_column(self):
        np.testing.assert_allclose(loss_matrix(0.5, 4)[:3, 2], [0.25, 0.5, 0.25])

    def test_binomial_entry(self):
        # 3 * 0.7**2 * 0.3
        assert loss_matrix(0.7, 5)[2, 3] == pytest.approx(0.441, abs=1e-15)

    @pytest.mark.parametrize("eta", [-0.1, 1.01])
    def test_out_of_range(self, eta):
        with pytest.raises(ValidationError):
            loss_matrix(eta, 3)

    def test_triangular_and_stochastic(self):
        L = loss_matrix(0.37, 10)
        assert np.all(np.tril(L, -1) == 0)  # L[m, n] = 0 for m > n
        np.testing.assert_allclose(L.sum(axis=0), 1.0, atol=1e-14)


class TestBuildMatrix:
    def test_shape_and_columns(self, balanced_matrix):
        assert balanced_matrix.p.shape == (9, 9)
        assert balanced_matrix.is_square
        np.testing.assert_allclose(balanced_matrix.p.sum(axis=0), 1.0, atol=1e-10)

    def test_no_clicks_beyond_photon_number(self, balanced_matrix):
        p = balanced_matrix.p
        assert np.all(p[np.tril_indices(9, -1)] == 0)

    def test_lossless_factorization_identical(self, balanced_matrix):
        np.testing.assert_array_equal(balanced_matrix.factorized, balanced_matrix.p)

    def test_lossy_factorization_agrees(self):
        m = build_matrix(ModeProbabilities.balanced(8, survival=0.7), 8)
        np.testing.assert_allclose(m.factorized, m.p, rtol=0, atol=1e-10)
        # brute force for small n
        for n in range(5):
            expected = enumerate_occupancy([0.7 / 8] * 8, 0.3, n)
            np.testing.assert_allclose(m.p[:, n], expected, atol=1e-12)

    def test_factorized_form_omitted_for_unbalanced(self):
        m = build_matrix(ModeProbabilities.from_q([0.3, 0.2, 0.2, 0.1]), 5)
        assert m.factorized is None
        assert m.p.shape == (5, 6)

    def test_factorization_fails_for_unbalanced_survivals(self):
        modes = ModeProbabilities.from_q([0.3, 0.2, 0.2, 0.1])
        direct = occupancy_matrix(modes, 5)
        assert np.max(np.abs(direct - factorized_matrix(4, 0.8, 5))) > 1e-3

    def test_invalid_n_max(self, balanced_modes):
        with pytest.raises(ValidationError):
            build_matrix(balanced_modes, 0)

    def test_non_stochastic_matrix_rejected(self):
        with pytest.raises(ValidationError):
            ConditionalMatrix(np.array([[0.5, 0.0], [0.4, 1.0]]))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=8, max_size=8), st.floats(0.05, 1.0))
    def test_columns_stochastic_for_any_tree(self, raw, survival):
        w = np.array(raw) + 1e-3
        modes = ModeProbabilities.from_q(w / w.sum() * survival)
        m = build_matrix(modes, 8)
        np.testing.assert_allclose(m.p.sum(axis=0), 1.0, atol=1e-10)
        assert m.p.min() >= 0 and m.p.max() <= 1


class TestPoissonProductForm:
    @pytest.mark.parametrize("mu", [0.25, 1.0, 3.0])
    def test_product_form(self, mu):
        modes = ModeProbabilities.from_q([0.2, 0.05, 0.1, 0.1, 0.15, 0.1, 0.1, 0.09])
        n_hi = 60
        pois = np.array([math.exp(-mu) * mu**n / math.factorial(n) for n in range(n_hi + 1)])
        direct = occupancy_matrix(modes, n_hi) @ pois
        np.testing.assert_allclose(direct, poisson_product_form(modes.q, mu), atol=1e-12)


class TestTruncationError:
    def test_vacuum(self, balanced_modes):
        assert truncation_error(balanced_modes, 8, InputState.poisson(0.0)) == 0.0

    @pytest.mark.parametrize("mean", [0.5, 1.0, 2.0, 2.9])
    def test_below_one_percent(self, balanced_modes, mean):
        assert truncation_error(balanced_modes, 8, InputState.poisson(mean)) < 0.01

    def test_grows_with_mean(self, balanced_modes):
        e3 = truncation_error(balanced_modes, 8, InputState.poisson(3.0))
        e8 = truncation_error(balanced_modes, 8, InputState.poisson(8.0))
        assert e8 > e3

    def test_against_product_form(self, balanced_modes):
        # full law from the independent product form, truncated law by hand
        mu = 3.0
        full = poisson_product_form(balanced_modes.q, mu)
        pois = np.array([math.exp(-mu) * mu**n / math.factorial(n) for n in range(9)])
        trunc = occupancy_matrix(balanced_modes, 8) @ (pois / pois.sum())
        expected = 0.5 * np.abs(full - trunc).sum()
        assert truncation_error(balanced_modes, 8, InputState.poisson(mu)) == pytest.approx(expected, abs=1e-12)

    def test_fock_inside_truncation_is_exact(self, balanced_modes):
        assert truncation_error(balanced_modes, 8, InputState.fock(5)) == pytest.approx(0.0, abs=1e-15)
