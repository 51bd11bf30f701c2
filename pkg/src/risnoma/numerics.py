"""Complex Hermitian linear-algebra primitives shared by all solver modules.

Vectors and matrices are plain complex ``numpy`` arrays; the helpers here
validate the structural invariants (Hermitian symmetry, PSD-ness within
solver tolerance) at operation boundaries instead of wrapping arrays in
custom types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_RTOL = 1e-10
PSD_ATOL = 1e-8


class RankToleranceExceeded(Exception):
    """Raised when a matrix expected to be (near) rank one is not.

    Carries the offending second-to-first eigenvalue ratio.
    """

    def __init__(self, ratio: float, rel_tol: float):
        self.ratio = float(ratio)
        self.rel_tol = float(rel_tol)
        super().__init__(
            f"rank-one residual sigma2/sigma1 = {ratio:.3e} exceeds {rel_tol:.3e}"
        )


def validate_hermitian(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Check that `a` is square, finite and Hermitian within tolerance.

    Returns the exactly symmetrized matrix ``(a + a^H)/2`` so downstream
    eigensolvers see a bitwise-Hermitian input.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.linalg.norm(a)))
    dev = float(np.linalg.norm(a - a.conj().T))
    if dev > HERMITIAN_RTOL * scale:
        raise ValueError(
            f"{name} is not Hermitian: ||A - A^H|| = {dev:.3e} > {HERMITIAN_RTOL:.0e}*{scale:.3e}"
        )
    return (a + a.conj().T) / 2.0


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def leading_vector(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


def hermitian_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    a = validate_hermitian(a)
    vals, vecs = np.linalg.eigh(a)
    order = np.arange(len(vals))[::-1]  # eigh returns ascending
    return EigenDecomposition(vals[order].copy(), vecs[:, order].copy())


def real_embed(a: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re A, -Im A], [Im A, Re A]]``.

    The embedding is PSD iff `a` is PSD, and every eigenvalue of `a`
    appears twice in the embedding.
    """
    a = validate_hermitian(a)
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def _psd_check(vals: np.ndarray) -> None:
    # tolerance scales with the spectrum so mW-scale solver output with
    # relative accuracy ~1e-9 passes; unit-scale input keeps the 1e-8 floor
    tol = PSD_ATOL * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    if vals[-1] < -tol:
        raise ValueError(
            f"matrix is not PSD within tolerance: min eigenvalue {vals[-1]:.3e}"
        )


def nuclear_minus_spectral(a: np.ndarray) -> float:
    """Nuclear norm minus spectral norm of a PSD matrix.

    Equals the sum of all singular values except the largest, and is zero
    exactly when the matrix is rank one.  Inputs only need to be PSD to
    solver tolerance (eigenvalues >= -1e-8); indefinite input is rejected.
    """
    eig = hermitian_eig(a)
    _psd_check(eig.eigenvalues)
    s = np.abs(eig.eigenvalues)
    return float(np.sum(s) - np.max(s))


def extract_rank_one(a: np.ndarray, rel_tol: float) -> np.ndarray:
    """Recover w from a near-rank-one PSD matrix ``a ~ w w^H``.

    Returns ``sqrt(sigma1) * u1`` with the global phase fixed so that the
    largest-magnitude entry is real nonnegative.  Raises
    :class:`RankToleranceExceeded` when ``sigma2/sigma1 > rel_tol``.
    """
    eig = hermitian_eig(a)
    vals = eig.eigenvalues
    _psd_check(vals)
    sigma = np.abs(vals)
    sigma1 = float(np.max(sigma))
    sigma2 = float(np.sort(sigma)[-2]) if len(sigma) > 1 else 0.0
    ratio = sigma2 / max(sigma1, np.finfo(float).tiny)
    if ratio > rel_tol:
        raise RankToleranceExceeded(ratio, rel_tol)
    w = np.sqrt(max(vals[0], 0.0)) * eig.eigenvectors[:, 0]
    return fix_global_phase(w)


def fix_global_phase(w: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude entry is real nonnegative.

    Ties in magnitude resolve to the first index, which makes the
    representative deterministic.
    """
    w = np.asarray(w, dtype=complex)
    idx = int(np.argmax(np.abs(w)))
    pivot = w[idx]
    if np.abs(pivot) == 0.0:
        return w.copy()
    return w * np.exp(-1j * np.angle(pivot))
