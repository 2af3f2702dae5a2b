"""Jacobi eigensolver and matrix square root against library oracles."""

import numpy as np
import pytest

from kggan.errors import ContractError
from kggan.linalg import jacobi_eigh, sym_sqrt, trace_sqrt_product


def random_symmetric(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return (a + a.T) / 2.0


def random_psd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return a @ a.T


class TestJacobi:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 16, 64])
    def test_matches_eigh_oracle(self, rng, n):
        a = random_symmetric(rng, n)
        vals, vecs = jacobi_eigh(a)
        assert np.max(np.abs(np.sort(vals) - np.sort(np.linalg.eigvalsh(a)))) < 1e-9
        # reconstruction check confirms eigenvectors pair with eigenvalues
        assert np.max(np.abs((vecs * vals) @ vecs.T - a)) < 1e-9

    def test_eigenvectors_orthonormal(self, rng):
        a = random_symmetric(rng, 10)
        _, vecs = jacobi_eigh(a)
        assert np.max(np.abs(vecs.T @ vecs - np.eye(10))) < 1e-10

    def test_zero_matrix(self):
        vals, vecs = jacobi_eigh(np.zeros((4, 4)))
        assert np.array_equal(vals, np.zeros(4))
        assert np.array_equal(vecs, np.eye(4))

    def test_non_square_rejected(self):
        with pytest.raises(ContractError):
            jacobi_eigh(np.zeros((3, 2)))


class TestSymSqrt:
    def test_square_of_root_recovers_matrix(self, rng):
        a = random_psd(rng, 6)
        root = sym_sqrt(a)
        assert np.max(np.abs(root @ root - a)) < 1e-8

    def test_identity(self):
        assert np.max(np.abs(sym_sqrt(np.eye(5)) - np.eye(5))) < 1e-12

    def test_strongly_negative_eigenvalue_warns(self):
        with pytest.warns(RuntimeWarning):
            sym_sqrt(np.diag([1.0, -0.5]))

    def test_tiny_negative_round_off_silent(self, recwarn):
        sym_sqrt(np.diag([1.0, -1e-12]))
        assert len(recwarn) == 0


class TestTraceSqrtProduct:
    def test_commuting_diagonal_case(self):
        s1 = np.diag([4.0, 9.0])
        s2 = np.diag([1.0, 16.0])
        # tr((s1 s2)^1/2) = sqrt(4) + sqrt(144) = 14
        assert abs(trace_sqrt_product(s1, s2) - 14.0) < 1e-10

    def test_matches_scipy_style_oracle(self, rng):
        # oracle: eigendecomposition of s1^(1/2) s2 s1^(1/2) via numpy
        for _ in range(10):
            s1 = random_psd(rng, 5)
            s2 = random_psd(rng, 5)
            w1, v1 = np.linalg.eigh(s1)
            root1 = (v1 * np.sqrt(np.clip(w1, 0, None))) @ v1.T
            inner = root1 @ s2 @ root1
            expected = float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0, None))))
            assert abs(trace_sqrt_product(s1, s2) - expected) < 1e-8

    def test_symmetric_in_arguments(self, rng):
        s1 = random_psd(rng, 4)
        s2 = random_psd(rng, 4)
        assert abs(trace_sqrt_product(s1, s2) - trace_sqrt_product(s2, s1)) < 1e-8
