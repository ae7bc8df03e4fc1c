"""Empirical principal component analysis of the training-output matrix.

The eigendecomposition runs through the SVD of the centered data
matrix (eigenvalues s_i^2 / (K-1)) rather than forming the full
covariance; the covariance itself only appears in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, ShapeError, ValidationError

# relative threshold below which eigenvalues are clamped to zero
_EIG_CLAMP = 1e-12


@dataclass(frozen=True)
class ReducedBasis:
    """Mean, retained eigenvectors and the full eigenvalue spectrum.

    ``eigvecs`` holds the retained columns only; ``eigvals_all`` is the
    full descending spectrum (zero-padded past the sample rank) so
    truncation-error identities stay computable.
    """

    mean: np.ndarray            # (T+1,)
    eigvecs: np.ndarray         # (T+1, retained)
    eigvals_all: np.ndarray     # (T+1,)
    retained: int
    explained_fraction: float

    @property
    def output_length(self) -> int:
        return self.mean.shape[0]

    def to_payload(self) -> dict:
        from .io import encode_array

        return {
            "mean": encode_array(self.mean),
            "eigvecs": encode_array(self.eigvecs),
            "eigvals_all": encode_array(self.eigvals_all),
            "retained": self.retained,
            "explained_fraction": self.explained_fraction,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ReducedBasis":
        from .io import decode_array

        return cls(
            mean=decode_array(payload["mean"]),
            eigvecs=decode_array(payload["eigvecs"]),
            eigvals_all=decode_array(payload["eigvals_all"]),
            retained=int(payload["retained"]),
            explained_fraction=float(payload["explained_fraction"]),
        )


def fit(outputs: np.ndarray, target_fraction: float) -> ReducedBasis:
    """Fit the reduced basis on a K x (T+1) sample matrix.

    Retains the smallest leading set of components whose cumulative
    eigenvalue fraction reaches ``target_fraction``.  Eigenvector signs
    are fixed so each column's largest-magnitude entry is positive,
    making serialized bases reproducible.
    """
    y = np.asarray(outputs, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 2:
        raise ShapeError("shape error: need a K x (T+1) matrix with K >= 2")
    if not (0.0 < target_fraction <= 1.0):
        raise ValidationError("target fraction must lie in (0, 1]")
    n_samples, n_out = y.shape
    mean = y.mean(axis=0)
    centered = y - mean
    u_svd, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eigvals = svals**2 / (n_samples - 1)
    total = eigvals.sum()
    if total <= 0.0:
        raise DegenerateSampleError("degenerate sample: zero total variance")
    eigvals[eigvals < _EIG_CLAMP * eigvals[0]] = 0.0

    rank = int(np.count_nonzero(eigvals))
    cum = np.cumsum(eigvals) / eigvals.sum()
    retained = int(np.searchsorted(cum, target_fraction - 1e-15) + 1)
    retained = min(retained, rank)

    vecs = vt[:retained].T.copy()
    # sign convention: largest-magnitude entry of each column positive
    flip = np.sign(vecs[np.abs(vecs).argmax(axis=0), np.arange(retained)])
    flip[flip == 0] = 1.0
    vecs *= flip

    eigvals_full = np.zeros(n_out)
    eigvals_full[: eigvals.shape[0]] = eigvals
    explained = float(eigvals_full[:retained].sum() / eigvals_full.sum())
    return ReducedBasis(mean=mean, eigvecs=vecs, eigvals_all=eigvals_full,
                        retained=retained, explained_fraction=explained)


def compress(basis: ReducedBasis, y) -> np.ndarray:
    """Scores z = Phi^T (y - mean); accepts one vector or a stack of rows."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != basis.output_length:
        raise ShapeError("shape error: output length mismatch")
    return (y - basis.mean) @ basis.eigvecs


def reconstruct(basis: ReducedBasis, z) -> np.ndarray:
    """Approximate outputs mean + Phi z from scores."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != basis.retained:
        raise ShapeError("shape error: score length mismatch")
    return basis.mean + z @ basis.eigvecs.T


def scores(basis: ReducedBasis, outputs: np.ndarray) -> np.ndarray:
    """Compressed K x (retained) score matrix for a sample."""
    return compress(basis, np.asarray(outputs, dtype=np.float64))
