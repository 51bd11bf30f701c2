"""Hermitian eigen utilities, real embedding, rank-one recovery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risnoma.numerics import (
    EigenDecomposition,
    RankToleranceExceeded,
    extract_rank_one,
    hermitian_eig,
    nuclear_minus_spectral,
    real_embed,
)


def random_hermitian(rng, n, psd=False, rank=None):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if psd:
        if rank is not None:
            a = a[:, :rank]
        return a @ a.conj().T
    return (a + a.conj().T) / 2


class TestHermitianEig:
    def test_identity(self):
        eig = hermitian_eig(np.eye(2))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 1.0])

    def test_two_by_two_with_imaginary_offdiag(self):
        a = np.array([[2.0, 1j], [-1j, 2.0]])
        eig = hermitian_eig(a)
        np.testing.assert_allclose(eig.eigenvalues, [3.0, 1.0], atol=1e-12)

    def test_rank_one_construction(self):
        w = np.array([1.0, 1j])
        eig = hermitian_eig(np.outer(w, w.conj()))
        np.testing.assert_allclose(eig.eigenvalues, [2.0, 0.0], atol=1e-12)
        u = eig.leading_vector
        # leading eigenvector is proportional to w
        assert abs(abs(np.vdot(u, w)) - np.linalg.norm(w)) < 1e-10

    def test_descending_order_and_reconstruction(self):
        rng = np.random.default_rng(0)
        a = random_hermitian(rng, 6)
        eig = hermitian_eig(a)
        assert np.all(np.diff(eig.eigenvalues) <= 0)
        u, lam = eig.eigenvectors, eig.eigenvalues
        recon = (u * lam) @ u.conj().T
        assert np.linalg.norm(recon - a) <= 1e-8 * max(1, np.linalg.norm(a))
        assert np.linalg.norm(u.conj().T @ u - np.eye(6)) <= 1e-8

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            hermitian_eig(np.zeros((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            hermitian_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestRealEmbed:
    def test_identity_1x1(self):
        np.testing.assert_array_equal(real_embed(np.eye(1)), np.eye(2))

    def test_eigenvalue_duplication(self):
        a = np.array([[2.0, 1j], [-1j, 2.0]])
        vals = np.sort(np.linalg.eigvalsh(real_embed(a)))
        np.testing.assert_allclose(vals, [1.0, 1.0, 3.0, 3.0], atol=1e-12)

    def test_trace_doubles_on_random_hermitian(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = random_hermitian(rng, 4)
            assert abs(np.trace(real_embed(a)) - 2 * np.real(np.trace(a))) < 1e-10

    def test_psd_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = random_hermitian(rng, 5)
            lam_a = np.linalg.eigvalsh(a)[0]
            lam_e = np.linalg.eigvalsh(real_embed(a))[0]
            assert abs(lam_a - lam_e) < 1e-8


class TestNuclearMinusSpectral:
    def test_rank_one_is_zero(self):
        w = np.array([1.0, 1j, 0.5])
        assert nuclear_minus_spectral(np.outer(w, w.conj())) < 1e-12

    def test_identity_3x3(self):
        assert abs(nuclear_minus_spectral(np.eye(3)) - 2.0) < 1e-12

    def test_diagonal(self):
        assert abs(nuclear_minus_spectral(np.diag([5.0, 3.0, 1.0])) - 4.0) < 1e-12

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError, match="PSD"):
            nuclear_minus_spectral(np.diag([1.0, -1.0]))

    def test_prop_both_directions_on_random_samples(self):
        # rank-one samples give ~0, full-rank PSD samples give strictly
        # positive values; the zero threshold separates them
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            r1 = np.outer(w, w.conj())
            full = random_hermitian(rng, n, psd=True)
            lam1 = np.linalg.eigvalsh(r1)[-1]
            assert nuclear_minus_spectral(r1) <= 1e-9 * lam1
            lam = np.sort(np.abs(np.linalg.eigvalsh(full)))
            if lam[-2] > 1e-9 * lam[-1]:
                assert nuclear_minus_spectral(full) > 1e-9 * lam[-1]

    def test_nonnegative_on_random_psd(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            assert nuclear_minus_spectral(random_hermitian(rng, 4, psd=True)) >= 0.0


class TestExtractRankOne:
    def test_exact_rank_one(self):
        w = np.array([1.0, 1j])
        a = np.outer(w, w.conj())
        rec = extract_rank_one(a, 1e-6)
        assert np.linalg.norm(a - np.outer(rec, rec.conj())) < 1e-12
        # phase convention: largest-magnitude entry real nonnegative
        pivot = rec[np.argmax(np.abs(rec))]
        assert abs(np.imag(pivot)) < 1e-12 and np.real(pivot) >= 0

    def test_full_rank_rejected(self):
        with pytest.raises(RankToleranceExceeded) as exc:
            extract_rank_one(np.eye(2), 1e-6)
        assert abs(exc.value.ratio - 1.0) < 1e-12

    def test_near_rank_one_diagonal(self):
        rec = extract_rank_one(np.diag([1.0, 1e-9]), 1e-6)
        np.testing.assert_allclose(rec, [1.0, 0.0], atol=2e-5)

    def test_recovery_up_to_global_phase(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            rec = extract_rank_one(np.outer(w, w.conj()), 1e-8)
            corr = abs(np.vdot(rec, w))
            assert abs(corr - np.linalg.norm(w) * np.linalg.norm(rec)) < 1e-8 * np.linalg.norm(w) ** 2

    def test_residual_bound(self):
        rng = np.random.default_rng(6)
        w = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        a = np.outer(w, w.conj()) + 1e-9 * np.eye(5)
        rel_tol = 1e-6
        rec = extract_rank_one(a, rel_tol)
        err = np.linalg.norm(a - np.outer(rec, rec.conj()))
        assert err <= np.sqrt(5) * rel_tol * np.linalg.norm(a)


@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_embedding_spectrum_property(n, seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, n)
    lam = np.linalg.eigvalsh(a)
    lam_e = np.linalg.eigvalsh(real_embed(a))
    np.testing.assert_allclose(np.repeat(np.sort(lam), 2), np.sort(lam_e), atol=1e-8 * max(1, abs(lam).max()))


@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_extract_roundtrip_property(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    rec = extract_rank_one(np.outer(w, w.conj()), 1e-8)
    assert abs(np.linalg.norm(rec) - np.linalg.norm(w)) < 1e-8 * max(1.0, np.linalg.norm(w))
    assert abs(abs(np.vdot(rec, w)) - np.linalg.norm(w) * np.linalg.norm(rec)) < 1e-7 * max(1.0, np.linalg.norm(w) ** 2)
