"""Estimate p, denoise, solve for X: the full inference run, plus evaluation metrics."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .denoise import DenoiseReport, denoise
from .errors import MalformedInputError, ParameterError, ShapeError
from .kron_graph import (
    GraphSample,
    InitiatorParams,
    KronShape,
    build_initiator,
    conjugate,
    kronecker_power,
    random_sparse_permutation,
    sample_graph,
    signal_tensor,
)
from .solve import SolveConfig, SolveResult, relaxed_sparsity, solve
from .tensor import flatten, spectral_norm


@dataclass
class InferenceResult:
    p_hat: float
    x_hat: np.ndarray
    d_hat: np.ndarray
    denoise: DenoiseReport
    solve: SolveResult
    shape: KronShape
    metrics: dict | None = None
    abar: object = field(default=None, repr=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "p_hat": self.p_hat,
            "pk_hat": self.denoise.pk_hat,
            "x_hat": [float(v) for v in self.x_hat],
            "m": self.shape.m,
            "l": self.shape.l,
            "K": self.shape.K,
            "d": self.shape.d,
            "rank_cap": self.denoise.rank_cap,
            "kept": self.denoise.kept,
            "top_singular_values": [float(v) for v in self.denoise.sigma],
            "iterations": self.solve.iterations,
            "residual_history": [float(v) for v in self.solve.residual_history],
            "d_hat": [[i, v] for i, v in sorted(self.solve.d_hat_sparse().items())],
        }
        if self.metrics is not None:
            out["metrics"] = {
                k: v for k, v in sorted(self.metrics.items())
                if include_timing or k != "wall_time_seconds"
            }
        return out


def split_sizes(n: int, L: int, K: int) -> tuple[int, int]:
    """Recover (m, l) from the graph sizes given K."""
    m = round(n ** (1.0 / K))
    l = round(L ** (1.0 / K))
    if m**K != n or l**K != L:
        raise ShapeError(f"adjacency sizes n={n}, L={L} are not K-th powers for K={K}")
    return m, l


def infer(sample: GraphSample, K: int, solve_config: SolveConfig | None = None,
          rank_cap: int | str | None = None) -> InferenceResult:
    """Run density estimation, shrinkage denoising and permuted regression on one sample.

    Theta is built from the estimated density, not the true one. Metrics are
    attached when the sample carries ground truth.
    """
    t0 = time.perf_counter()
    solve_config = solve_config or SolveConfig()
    a = sample.adjacency
    if len(a.row_dims) != 2 or a.row_dims != a.col_dims:
        raise ShapeError(f"adjacency must be n x L x n x L, got {a.shape}")
    m, l = split_sizes(a.row_dims[0], a.row_dims[1], K)
    q = m * l
    report, abar = denoise(a, K, q, rank_cap)
    shape = KronShape(report.p_hat, m, l, K)
    fit = solve(flatten(report.estimate).ravel(), shape, solve_config)
    result = InferenceResult(report.p_hat, fit.x_hat, fit.d_hat, report, fit, shape, abar=abar)
    if sample.truth is not None:
        result.metrics = evaluate(result, sample.truth, sample)
    elapsed = time.perf_counter() - t0
    if result.metrics is not None:
        result.metrics["wall_time_seconds"] = elapsed
    return result


def permuted_truth(truth: InitiatorParams, permutation) -> tuple[np.ndarray, np.ndarray]:
    """``mat(P_K)`` and ``mat(S_K)``, both conjugated by the permutation."""
    pk = flatten(kronecker_power(build_initiator(truth), truth.K))
    sk = flatten(signal_tensor(truth))
    perm = np.asarray(permutation)
    if not np.array_equal(perm, np.arange(perm.size)):
        pk, sk = conjugate(pk, perm), conjugate(sk, perm)
    return pk, sk


def evaluate(result: InferenceResult, truth: InitiatorParams | None, sample: GraphSample) -> dict:
    if truth is None:
        raise ParameterError("evaluation needs the generating parameters")
    if truth.d != sample.d:
        raise ShapeError(f"truth has d={truth.d}, sample has d={sample.d}")
    x_true = truth.x_vec
    norm = np.linalg.norm(x_true)
    x_err = np.linalg.norm(result.x_hat - x_true)
    pk_mat, sk_mat = permuted_truth(truth, sample.permutation)
    est = flatten(result.denoise.estimate)
    frob = float(np.sum((est - sk_mat) ** 2))
    d = sample.d
    # abar - (S + Z / sqrt(d)) with Z = A - P_K; the adjacency cancels
    resid = (pk_mat - result.denoise.pk_hat) / np.sqrt(d) - sk_mat
    return {
        "x_rel_error": float(x_err / norm) if norm > 0 else float(x_err),
        "signal_frobenius_error": frob,
        "opnorm_residual": spectral_norm(resid),
    }


# -- run configs --------------------------------------------------------------

STANDARD = {"m": 2, "l": 1, "K": 12, "p": 0.8, "x": [-5.5, 5.5, -1.5, 1.5]}

# 0.8 + 5.5 / sqrt(d) exceeds 1 below d = 757; halving X keeps the size
# sweeps admissible from d = 256 up
SWEEP_X = [-2.75, 2.75, -0.75, 0.75]


@dataclass
class RunConfig:
    """Model, sampling and solver settings for one run or a sweep."""

    m: int = 2
    l: int = 1
    K: int = 12
    p: float = 0.8
    x: list = field(default_factory=lambda: list(STANDARD["x"]))
    seed: int = 42
    permutation_s: int = 0
    solver: SolveConfig = field(default_factory=SolveConfig)
    rank_cap: int | str | None = None
    output_dir: str = "out"
    format: str = "csv"
    sizes: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    jobs: int = 1

    @property
    def q(self) -> int:
        return self.m * self.l

    def params(self, K: int | None = None) -> InitiatorParams:
        return InitiatorParams.from_vector(self.p, self.x, self.m, self.l, self.K if K is None else K)

    def K_for(self, d: int) -> int:
        """Depth giving flattened size ``d``."""
        K = round(np.log(d) / np.log(self.q))
        if K < 1 or self.q**K != d:
            raise ParameterError(f"size {d} is not a power of q={self.q}")
        return K

    def sample(self, d: int | None = None, seed: int | None = None) -> GraphSample:
        params = self.params(None if d is None else self.K_for(d))
        params.validate()
        seed = self.seed if seed is None else seed
        perm = random_sparse_permutation(params.d, self.permutation_s, seed)
        return sample_graph(params, seed, perm)

    def solve_config(self, d: int) -> SolveConfig:
        """Solver settings; an unset sparsity budget follows from ``permutation_s``."""
        if self.solver.sparsity == 0 and self.permutation_s > 0:
            return replace(self.solver, sparsity=relaxed_sparsity(self.permutation_s, d))
        return self.solver

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        if "output_dir" not in raw and "out" in raw:
            raw["output_dir"] = raw.pop("out")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise MalformedInputError(f"unknown config keys {sorted(unknown)}")
        solver = raw.pop("solver", None)
        try:
            cfg = cls(**raw)
            cfg.solver = SolveConfig.from_dict(solver) if not isinstance(solver, SolveConfig) else solver
        except (TypeError, ParameterError) as exc:
            raise MalformedInputError(f"bad run config: {exc}") from exc
        cfg._check()
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{path}: invalid JSON") from exc
        if not isinstance(raw, dict):
            raise MalformedInputError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def _check(self) -> None:
        for key in ("m", "l", "K", "seed", "permutation_s", "jobs"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise MalformedInputError(f"{key} must be an integer, got {value!r}")
        if len(self.x) != self.q**2:
            raise MalformedInputError(f"x needs {self.q ** 2} values for m={self.m}, l={self.l}")
        if self.format not in ("csv", "json"):
            raise MalformedInputError(f"format must be csv or json, got {self.format!r}")
        try:
            for d in self.sizes:
                self.K_for(int(d))
        except ParameterError as exc:
            raise MalformedInputError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "m": self.m, "l": self.l, "K": self.K, "p": self.p, "x": list(self.x),
            "seed": self.seed, "permutation_s": self.permutation_s,
            "solver": self.solver.to_dict(), "rank_cap": self.rank_cap,
            "output_dir": self.output_dir, "format": self.format,
            "sizes": list(self.sizes), "seeds": list(self.seeds), "jobs": self.jobs,
        }
