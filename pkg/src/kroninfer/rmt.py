"""Closed-form spectral predictions for the centered adjacency.

With noise standard deviation ``s = sqrt(pk (1 - pk))`` the singular values
of the centered adjacency follow a quarter-circle law on ``[0, 2s]``. A
signal singular value ``s * ell`` with ``ell > 1`` pops out of the bulk at
``s (ell + 1/ell)`` and its singular vectors keep a squared overlap of
``1 - ell**-2`` with the truth; for ``ell <= 1`` it is swallowed by the bulk.

The spike location is ``s (ell + 1/ell) = s sqrt(2 + ell^2 + ell^-2)``.
Dropping the square root gives ``s (2 + ell^2 + ell^-2)``, which does not
meet the bulk edge at ``ell = 1`` and breaks the identity
``shrinker(spike_location(ell)) = s (ell - 1/ell)`` that ties the shrinker
to the error formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseScale:
    """Effective density ``pk`` and the noise level derived from it."""

    pk: float

    def __post_init__(self):
        if not 0.0 < self.pk < 1.0:
            raise ValueError(f"pk must lie in (0, 1), got {self.pk}")

    @property
    def var(self) -> float:
        return self.pk * (1.0 - self.pk)

    @property
    def s(self) -> float:
        return float(np.sqrt(self.var))

    @property
    def edge(self) -> float:
        return 2.0 * self.s


def as_scale(scale) -> NoiseScale:
    return scale if isinstance(scale, NoiseScale) else NoiseScale(float(scale))


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def quarter_circle_pdf(x, scale):
    sc = as_scale(scale)
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= 0.0) & (x <= sc.edge)
    root = np.sqrt(np.clip(4.0 * sc.var - x**2, 0.0, None))
    return _out(np.where(inside, root / (sc.var * np.pi), 0.0))


def quarter_circle_cdf(x, scale):
    sc = as_scale(scale)
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, sc.edge)
    s2 = sc.var
    anti = 0.5 * x * np.sqrt(np.clip(4.0 * s2 - x**2, 0.0, None)) + 2.0 * s2 * np.arcsin(x / sc.edge)
    return _out(np.clip(anti / (np.pi * s2), 0.0, 1.0))


def quarter_circle_ppf(u, scale):
    """Inverse of :func:`quarter_circle_cdf` by bisection (vectorized)."""
    sc = as_scale(scale)
    u = np.asarray(u, dtype=np.float64)
    lo = np.zeros_like(u)
    hi = np.full_like(u, sc.edge)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = quarter_circle_cdf(mid, sc) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return _out(0.5 * (lo + hi))


def spike_location(ell, scale):
    """Limit of the outlier singular value produced by a signal of strength ``ell``."""
    sc = as_scale(scale)
    ell = np.asarray(ell, dtype=np.float64)
    safe = np.where(ell > 1.0, ell, 1.0)
    return _out(np.where(ell > 1.0, sc.s * (safe + 1.0 / safe), sc.edge))


def alignment(ell):
    """Limit of the squared cosine between true and estimated singular vectors."""
    ell = np.asarray(ell, dtype=np.float64)
    safe = np.where(ell >= 1.0, ell, 1.0)
    return _out(np.where(ell >= 1.0, np.maximum(0.0, 1.0 - safe**-2), 0.0))


def shrinker(t, scale):
    """``f(t) = sqrt(t^2 - 4 pk(1-pk))`` above the bulk edge, 0 below."""
    sc = as_scale(scale)
    t = np.asarray(t, dtype=np.float64)
    # (t - 2s)(t + 2s) loses less precision than t^2 - 4s^2 just above the edge
    return _out(np.where(t > sc.edge, np.sqrt(np.clip((t - sc.edge) * (t + sc.edge), 0.0, None)), 0.0))


def asymptotic_error(t, scale):
    """Per-component limiting squared Frobenius error of the shrinkage estimate."""
    sc = as_scale(scale)
    t = np.asarray(t, dtype=np.float64)
    s2 = sc.var
    safe = np.where(t > sc.s, t, 1.0)
    return _out(np.where(t > sc.s, s2 * (2.0 - s2 / safe**2), t**2))


def ks_distance(samples, scale) -> float:
    """Kolmogorov-Smirnov distance between sorted ``samples`` and the quarter-circle law."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("ks_distance needs at least one sample")
    n = x.size
    cdf = np.asarray(quarter_circle_cdf(x, scale))
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(n) / n
    return float(max(upper.max(), lower.max()))
