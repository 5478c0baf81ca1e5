"""Sweep points behind the three synthetic figure datasets, and a planted-spike generator.

Each point function takes ``(config, d, seed)`` and returns one CSV row (or
a list of rows) so the grid runner can fan them out across processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np
import scipy.linalg

from .denoise import default_rank_cap, denoise, estimate_pk
from .errors import ParameterError
from .kron_graph import (
    InitiatorParams,
    check_dense_capacity,
    level_labels,
    uniforms,
)
from .pipeline import RunConfig, permuted_truth
from .rmt import NoiseScale, asymptotic_error, spike_location
from .tensor import flatten, spectral_norm, unflatten

LAW_POINTS = 200


def signal_singular_values(params: InitiatorParams) -> np.ndarray:
    """Nonzero-rank singular values of ``mat(S_K)`` (descending, length ``(q-1)K+1``).

    ``mat(S_K) = c E B E^T`` with ``E`` the stacked level one-hot maps and
    ``B`` block-diagonal copies of ``mat(X)``; a thin QR of ``E`` reduces
    this to a ``qK x qK`` problem.
    """
    q, K = params.q, params.K
    eye = np.eye(q)
    e = np.hstack([eye[lab] for lab in level_labels(params.m, params.l, K)])
    _, r = np.linalg.qr(e)
    b = scipy.linalg.block_diag(*([params.X.matrix] * K))
    c = params.p ** (K - 1) / params.d
    sv = np.linalg.svd(c * r @ b @ r.T, compute_uv=False)
    return sv[: default_rank_cap(q, K)]


def shrinkage_point(cfg: RunConfig, d: int, seed: int) -> dict:
    """Empirical shrinkage error against the limiting per-component sum over the signal spectrum."""
    sample = cfg.sample(d, seed)
    params = sample.truth
    report, _ = denoise(sample.adjacency, params.K, params.q, cfg.rank_cap)
    _, sk = permuted_truth(params, sample.permutation)
    empirical = float(np.sum((flatten(report.estimate) - sk) ** 2))
    scale = NoiseScale(params.p**params.K)
    theory = float(np.sum(asymptotic_error(signal_singular_values(params), scale)))
    return {"d": d, "seed": seed, "empirical_error": empirical, "theory_error": theory}


def opnorm_point(cfg: RunConfig, d: int, seed: int) -> dict:
    """Operator norm of ``abar - (S + Z / sqrt(d))``; the adjacency cancels out of it."""
    sample = cfg.sample(d, seed)
    pk_hat = estimate_pk(sample.adjacency)
    truth, perm = sample.truth, sample.permutation
    del sample
    pk, sk = permuted_truth(truth, perm)
    pk -= pk_hat
    pk /= np.sqrt(d)
    pk -= sk
    return {"d": d, "seed": seed, "opnorm_residual": spectral_norm(pk)}


def normalized_spectrum(a_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """All singular values of the centered adjacency over ``sqrt(pk_hat(1 - pk_hat))``."""
    d = a_mat.shape[0]
    pk_hat = float(np.clip(a_mat.mean(), 1e-12, 1 - 1e-12))
    abar = (a_mat - pk_hat) / np.sqrt(d)
    sv = scipy.linalg.svdvals(abar, overwrite_a=True, check_finite=False)
    return sv / NoiseScale(pk_hat).s, pk_hat


def spectrum_point(cfg: RunConfig, d: int, seed: int) -> dict:
    """Normalized spectrum plus predicted outlier locations of the planted signal."""
    sample = cfg.sample(d, seed)
    params = sample.truth
    values, _ = normalized_spectrum(sample.adjacency.matrix)
    scale = NoiseScale(params.p**params.K)
    ells = signal_singular_values(params) / scale.s
    spikes = [{"d": d, "seed": seed, "ell": float(e),
               "predicted_location": float(spike_location(e, scale) / scale.s)}
              for e in ells if e > 1.0]
    rows = [{"d": d, "seed": seed, "singular_value_normalized": float(v)} for v in values]
    return {"values": rows, "spikes": spikes}


def law_table(points: int = LAW_POINTS) -> list[dict]:
    """Quarter-circle density of the normalized singular values, ``sqrt(4 - x^2) / pi`` on ``[0, 2]``."""
    x = np.linspace(0.0, 2.0, points)
    pdf = np.sqrt(np.clip(4.0 - x**2, 0.0, None)) / np.pi
    return [{"x": float(a), "pdf": float(b)} for a, b in zip(x, pdf)]


def _call(job):
    fn, cfg, d, seed = job
    return fn(cfg, d, seed)


def run_grid(fn: Callable, cfg: RunConfig, sizes, seeds, jobs: int = 1) -> list:
    """Evaluate ``fn`` on every (d, seed); results come back in (d, seed) order."""
    if jobs < 1:
        raise ParameterError(f"jobs must be >= 1, got {jobs}")
    grid = [(fn, cfg, int(d), int(s)) for d in sorted(sizes) for s in sorted(seeds)]
    if jobs == 1 or len(grid) == 1:
        return [_call(job) for job in grid]
    with ProcessPoolExecutor(max_workers=min(jobs, len(grid))) as pool:
        return list(pool.map(_call, grid))


# -- planted spikes ---------------------------------------------------------


def planted_spike_sample(d: int, pk: float, ells, seed: int):
    """Bernoulli adjacency with ``mat(P) = pk + sqrt(d) s sum_i ell_i u_i v_i^T``.

    ``u_i``, ``v_i`` are distinct non-constant Hadamard rows over ``sqrt(d)``
    with a shared random column shuffle: orthonormal, balanced and flat, so
    every probability stays within ``pk +- s sum(ell) / sqrt(d)``.
    Returns ``(adjacency, U, V)`` with the vectors as columns.
    """
    ells = np.asarray(ells, dtype=np.float64)
    r = ells.size
    if d & (d - 1) or d < 2 * r + 2:
        raise ParameterError(f"d must be a power of two >= {2 * r + 2}, got {d}")
    check_dense_capacity(d, copies=3)
    scale = NoiseScale(pk)
    rng = np.random.default_rng(seed)
    h = scipy.linalg.hadamard(d).astype(np.float64)[:, rng.permutation(d)] / np.sqrt(d)
    rows = 1 + rng.choice(d - 1, size=2 * r, replace=False)
    u, v = h[rows[:r]].T, h[rows[r:]].T
    prob = pk + np.sqrt(d) * scale.s * (u * ells) @ v.T
    if prob.min() < 0.0 or prob.max() > 1.0:
        raise ParameterError("planted spikes push probabilities outside [0, 1]")
    draws = uniforms(seed, 0, d * d).reshape(d, d, order="F")
    a = (draws < prob).astype(np.float64)
    return unflatten(a, (d,), (d,)), u, v
