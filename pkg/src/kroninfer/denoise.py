"""Density estimation, centering and spectral denoising of the adjacency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import svds

from .errors import ParameterError
from .rmt import NoiseScale, shrinker
from .tensor import EvenTensor, flatten, unflatten, zeros

PK_CLAMP = 1e-12

# singular values this close to the bulk edge count as below it
EDGE_TIE = 1e-9

_DENSE_SVD_MAX = 1024


@dataclass(frozen=True)
class SpectralTriple:
    """Top singular values (descending) and the matching singular vectors as columns."""

    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self, weights=None) -> np.ndarray:
        w = self.sigma if weights is None else np.asarray(weights, dtype=np.float64)
        return (self.left * w) @ self.right.T


@dataclass
class DenoiseReport:
    pk_hat: float
    p_hat: float
    rank_cap: int
    kept: int
    estimate: EvenTensor
    sigma: np.ndarray | None = None


def estimate_pk(a: EvenTensor) -> float:
    """Mean entry of the adjacency (all-ones quadratic form over d^2), clamped away from 0 and 1."""
    return float(np.clip(a.data.mean(), PK_CLAMP, 1.0 - PK_CLAMP))


def estimate_p(pk_hat: float, K: int) -> float:
    if not 0.0 < pk_hat < 1.0:
        raise ParameterError(f"pk_hat must lie in (0, 1), got {pk_hat}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    return float(pk_hat ** (1.0 / K))


def center_adjacency(a: EvenTensor, pk_hat: float) -> EvenTensor:
    """``(A - pk_hat J) / sqrt(d)``."""
    return (a - pk_hat) / np.sqrt(a.n_rows)


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    # largest-magnitude entry of each left vector made positive
    idx = np.argmax(np.abs(u), axis=0)
    flip = np.sign(u[idx, np.arange(u.shape[1])])
    flip[flip == 0] = 1.0
    u *= flip
    v *= flip


def svd_matrix_top(m: np.ndarray, r: int) -> SpectralTriple:
    """Top-``r`` singular triples of a matrix, deterministic signs."""
    m = np.asarray(m, dtype=np.float64)
    k = min(m.shape)
    if not 0 <= r <= k:
        raise ParameterError(f"requested {r} singular triples of a {m.shape} matrix")
    if r == 0:
        return SpectralTriple(np.zeros(0), np.zeros((m.shape[0], 0)), np.zeros((m.shape[1], 0)))
    if k <= _DENSE_SVD_MAX or r >= k // 8:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
        u, s, v = u[:, :r], s[:r], vt[:r].T
    else:
        v0 = np.random.default_rng(0).standard_normal(k)
        u, s, vt = svds(m, k=r, v0=v0, tol=0)
        order = np.argsort(s)[::-1]
        u, s, v = u[:, order], s[order], vt[order].T
    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(v)
    _fix_signs(u, v)
    return SpectralTriple(s.copy(), u, v)


def svd_top(t: EvenTensor, r: int) -> SpectralTriple:
    return svd_matrix_top(flatten(t), r)


def hard_threshold_estimate(abar: EvenTensor, r: int) -> EvenTensor:
    """Best rank-``r`` approximation (truncated SVD) of ``abar``."""
    if r < 0:
        raise ParameterError(f"rank must be >= 0, got {r}")
    if r > min(abar.n_rows, abar.n_cols):
        raise ParameterError(f"rank {r} exceeds the matrix side {min(abar.n_rows, abar.n_cols)}")
    if r == 0:
        return zeros(abar.row_dims, abar.col_dims)
    return unflatten(svd_top(abar, r).reconstruct(), abar.row_dims, abar.col_dims)


def default_rank_cap(q: int, K: int) -> int:
    """Rank bound ``(q - 1) K + 1`` of the signal tensor."""
    return (q - 1) * K + 1


def listing_rank_cap(d: int, K: int) -> int:
    """The wider cap ``(d - 1) K + 1``, clipped to ``d``; kept for comparison runs."""
    return min(d, (d - 1) * K + 1)


def shrinkage_estimate(abar: EvenTensor, pk_hat: float, rank_cap: int, K: int = 1) -> DenoiseReport:
    """Shrink the top ``rank_cap`` singular values of ``abar`` with the optimal shrinker."""
    if rank_cap < 1:
        raise ParameterError(f"rank_cap must be >= 1, got {rank_cap}")
    rank_cap = min(rank_cap, abar.n_rows, abar.n_cols)
    scale = NoiseScale(pk_hat)
    trip = svd_top(abar, rank_cap)
    above = trip.sigma > scale.edge + EDGE_TIE
    f = np.where(above, shrinker(trip.sigma, scale), 0.0)
    kept = int(above.sum())
    est = unflatten(trip.reconstruct(f), abar.row_dims, abar.col_dims)
    return DenoiseReport(pk_hat, estimate_p(pk_hat, K), rank_cap, kept, est, trip.sigma)


def resolve_rank_cap(rank_cap, d: int, q: int, K: int) -> int:
    """``None`` gives the proven bound, ``"listing"`` the wider cap, an int passes through."""
    if rank_cap is None:
        return default_rank_cap(q, K)
    if rank_cap == "listing":
        return listing_rank_cap(d, K)
    if isinstance(rank_cap, str) or int(rank_cap) != rank_cap:
        raise ParameterError(f"rank_cap must be an integer or 'listing', got {rank_cap!r}")
    return int(rank_cap)


def denoise(a: EvenTensor, K: int, q: int, rank_cap=None) -> tuple[DenoiseReport, EvenTensor]:
    """Estimate the density, center, shrink. Returns the report and the centered adjacency."""
    pk_hat = estimate_pk(a)
    abar = center_adjacency(a, pk_hat)
    cap = resolve_rank_cap(rank_cap, a.n_rows, q, K)
    return shrinkage_estimate(abar, pk_hat, cap, K), abar
