"""Recovering ``vec(X)`` from a denoised signal estimate.

The regression model is ``s = theta x + D`` with ``D`` sparse: ``D`` soaks
up the entries moved by an unknown, nearly-identity vertex permutation.
Both solvers alternate a ``D`` step and an exact least-squares ``x`` step,
starting from ``x = 0, D = 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError
from .kron_graph import theta_adjoint_apply, theta_adjoint_sparse, theta_apply, theta_gram

METHODS = ("iht", "lasso")
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class SolveConfig:
    method: str = "iht"
    eta: float = 0.5
    sparsity: int = 0
    gamma: float = 1.0
    max_iter: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        method = str(self.method).lower()
        object.__setattr__(self, "method", method)
        if method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if self.sparsity < 0:
            raise ParameterError(f"sparsity must be >= 0, got {self.sparsity}")
        if not self.gamma > 0.0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0.0:
            raise ParameterError(f"tol must be > 0, got {self.tol}")

    @classmethod
    def from_dict(cls, raw: dict | None) -> "SolveConfig":
        raw = dict(raw or {})
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown solver keys {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveResult:
    x_hat: np.ndarray
    d_hat: np.ndarray
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)

    def d_hat_sparse(self) -> dict[int, float]:
        nz = np.flatnonzero(self.d_hat)
        return {int(i): float(self.d_hat[i]) for i in nz}


def relaxed_sparsity(s: int, d: int) -> int:
    """Budget ``2 s d`` on ``||vec(D)||_0`` for ``s`` mismatched labels."""
    return min(d * d, 2 * s * d)


def hard_threshold_op(v, s: int) -> np.ndarray:
    """Keep the ``s`` largest-magnitude entries; on ties the lower index wins."""
    v = np.asarray(v, dtype=np.float64)
    if not 0 <= s <= v.size:
        raise ParameterError(f"need 0 <= s <= {v.size}, got {s}")
    out = np.zeros_like(v)
    if s == 0:
        return out
    if s == v.size:
        return v.copy()
    mag = np.abs(v)
    cut = np.partition(mag, v.size - s)[v.size - s]
    strict = np.flatnonzero(mag > cut)
    ties = np.flatnonzero(mag == cut)[: s - strict.size]
    keep = np.concatenate([strict, ties])
    out[keep] = v[keep]
    return out


def soft_threshold_op(v, tau: float) -> np.ndarray:
    if tau < 0:
        raise ParameterError(f"tau must be >= 0, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _pinv_solve(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    w, vecs = np.linalg.eigh(g)
    keep = w > PINV_RTOL * max(np.abs(w).max(), 0.0)
    coef = vecs[:, keep].T @ b / w[keep]
    return vecs[:, keep] @ coef


def _adjoint(params, vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(vec)
    if nz.size * 8 < vec.size:
        return theta_adjoint_sparse(params, nz, vec[nz])
    return theta_adjoint_apply(params, vec)


def ls_solve_x(s_vec, d_vec, params) -> np.ndarray:
    """Least-squares ``x`` for ``s - d ~ theta x`` via the pseudo-inverse of the Gram matrix."""
    s_vec = np.asarray(s_vec, dtype=np.float64)
    b = theta_adjoint_apply(params, s_vec)
    if d_vec is not None:
        b = b - _adjoint(params, np.asarray(d_vec, dtype=np.float64))
    return _pinv_solve(theta_gram(params), b)


def _check_finite(x, d, eta):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
        raise DivergenceError(f"non-finite iterate with step length eta={eta}")


def iht_solve(s_vec, params, config: SolveConfig) -> SolveResult:
    """Iterative hard thresholding on ``D`` alternated with least squares on ``x``."""
    if config.method != "iht":
        raise ParameterError(f"iht_solve called with method {config.method!r}")
    s_vec = np.asarray(s_vec, dtype=np.float64)
    q2 = (params.m * params.l) ** 2
    if config.sparsity > s_vec.size:
        raise ParameterError(f"sparsity {config.sparsity} exceeds {s_vec.size} entries")
    eta = config.eta
    b_s = theta_adjoint_apply(params, s_vec)
    gram = theta_gram(params)
    x = np.zeros(q2)
    d_hat = np.zeros_like(s_vec)
    fit = np.zeros_like(s_vec)  # theta @ x
    residuals = []
    it = 0
    for it in range(1, config.max_iter + 1):
        if config.sparsity:
            q_vec = (1.0 - eta) * d_hat + eta * (s_vec - fit)
            d_hat = hard_threshold_op(q_vec, config.sparsity)
        x_new = _pinv_solve(gram, b_s - _adjoint(params, d_hat))
        _check_finite(x_new, d_hat, eta)
        fit = theta_apply(params, x_new)
        residuals.append(float(np.linalg.norm(s_vec - fit - d_hat)))
        done = np.max(np.abs(x_new - x)) < config.tol
        x = x_new
        if done:
            break
    return SolveResult(x, d_hat, it, residuals, [r * r for r in residuals])


def lasso_objective(s_vec, fit, d_hat, gamma: float) -> float:
    r = s_vec - fit - d_hat
    return float(r @ r + gamma * np.abs(d_hat).sum())


def lasso_solve(s_vec, params, config: SolveConfig) -> SolveResult:
    """Block coordinate descent on ``||s - theta x - D||^2 + gamma ||D||_1``."""
    if config.method != "lasso":
        raise ParameterError(f"lasso_solve called with method {config.method!r}")
    s_vec = np.asarray(s_vec, dtype=np.float64)
    q2 = (params.m * params.l) ** 2
    b_s = theta_adjoint_apply(params, s_vec)
    gram = theta_gram(params)
    x = np.zeros(q2)
    fit = np.zeros_like(s_vec)
    d_hat = np.zeros_like(s_vec)
    residuals, objectives = [], []
    it = 0
    for it in range(1, config.max_iter + 1):
        # un-halved quadratic, so the prox threshold is gamma / 2
        d_hat = soft_threshold_op(s_vec - fit, config.gamma / 2.0)
        x_new = _pinv_solve(gram, b_s - _adjoint(params, d_hat))
        _check_finite(x_new, d_hat, config.eta)
        fit = theta_apply(params, x_new)
        residuals.append(float(np.linalg.norm(s_vec - fit - d_hat)))
        objectives.append(lasso_objective(s_vec, fit, d_hat, config.gamma))
        done = np.max(np.abs(x_new - x)) < config.tol
        x = x_new
        if done:
            break
    return SolveResult(x, d_hat, it, residuals, objectives)


def solve(s_vec, params, config: SolveConfig) -> SolveResult:
    if config.method == "iht":
        return iht_solve(s_vec, params, config)
    return lasso_solve(s_vec, params, config)


def permuted_objective(s_vec, params, x, permutation) -> float:
    """``||s - (pi (x) pi) theta x||^2`` for a single permutation."""
    d = (params.m * params.l) ** params.K
    sm = np.asarray(s_vec, dtype=np.float64).reshape(d, d)
    perm = np.asarray(permutation)
    # (Pi (x) Pi) vec(S) = vec(Pi S Pi^T); compare after undoing pi on the data
    unperm = sm[np.ix_(perm, perm)].ravel()
    r = unperm - theta_apply(params, x)
    return float(r @ r)


def _hamming_ball(d: int, s_max: int):
    for perm in itertools.permutations(range(d)):
        if sum(1 for i, p in enumerate(perm) if i != p) <= s_max:
            yield np.array(perm)


def brute_force_permuted_ls(s_vec, params, s_max: int):
    """Exhaustive minimizer of the permuted regression over a Hamming ball; test oracle, d <= 8."""
    d = (params.m * params.l) ** params.K
    if d > 8:
        raise ParameterError(f"brute force limited to d <= 8, got d={d}")
    if not 0 <= s_max <= d:
        raise ParameterError(f"need 0 <= s_max <= d, got {s_max}")
    sm = np.asarray(s_vec, dtype=np.float64).reshape(d, d)
    best = None
    for perm in _hamming_ball(d, s_max):
        x = ls_solve_x(sm[np.ix_(perm, perm)].ravel(), None, params)
        obj = permuted_objective(s_vec, params, x, perm)
        if best is None or obj < best[2] - 1e-15:
            best = (perm, x, obj)
    return best
