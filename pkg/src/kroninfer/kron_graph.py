"""Generalized random Kronecker multiplex graphs.

Dimension names used throughout:

    m  nodes of the initiator        l  layers of the initiator
    q  = m * l                       K  Kronecker depth
    n  = m**K graph nodes            L  = l**K graph layers
    d  = q**K flattened vertex-layer labels

The initiator is ``P1 = p + X / sqrt(d)``, ``P_K = P1^{(x)K}`` and the
adjacency tensor ``A`` has independent ``Bernoulli(P_K)`` entries, conjugated
by a vertex-layer permutation. A flattened label ``u`` splits as
``u = i + alpha * n``; its level-``k`` initiator label is
``i_k + m * alpha_k`` where ``i_k``, ``alpha_k`` are the base-``m`` and
base-``l`` digits of ``i`` and ``alpha`` (level 0 most significant).

The signal tensor is

    S_K = (p**(K-1) / d) * sum_j  J_{q^j} (x) X (x) J_{q^(K-1-j)}

with ``J_r`` all-ones, so ``mat(S_K)[u, v] = c * sum_k X[lab_k(u), lab_k(v)]``.
The theta operator maps ``vec(mat(X))`` (row-major, length q^2) to
``vec(mat(S_K))`` (row-major, length d^2) without forming the d^2 x q^2
coefficient array.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, ParameterError, ShapeError
from .tensor import EvenTensor, flatten, kron, ones, unflatten

DEFAULT_MAX_DENSE_BYTES = 2 * 1024**3
MAX_DENSE_ENV = "KRONINFER_MAX_DENSE_BYTES"


def max_dense_bytes() -> int:
    raw = os.environ.get(MAX_DENSE_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_DENSE_BYTES
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ParameterError(f"{MAX_DENSE_ENV}={raw!r} is not a byte count") from exc


def check_dense_capacity(d: int, copies: int = 1) -> None:
    """Raise :class:`CapacityError` if ``copies`` dense d x d float64 arrays exceed the budget."""
    need = 8 * d * d * copies
    budget = max_dense_bytes()
    if need > budget:
        raise CapacityError(
            f"dense {d}x{d} tensor needs {need} bytes, budget is {budget} "
            f"(set {MAX_DENSE_ENV} or use sample_adjacency_streaming)"
        )


@dataclass(frozen=True)
class KronShape:
    """Density and sizes, everything theta depends on."""

    p: float
    m: int
    l: int
    K: int

    @property
    def q(self) -> int:
        return self.m * self.l

    @property
    def n(self) -> int:
        return self.m**self.K

    @property
    def L(self) -> int:
        return self.l**self.K

    @property
    def d(self) -> int:
        return self.q**self.K


@dataclass(frozen=True)
class InitiatorParams:
    """Density ``p``, fluctuation tensor ``X`` (m x l x m x l) and depth ``K``."""

    p: float
    X: EvenTensor
    K: int
    centering_c: float = 10.0
    x_max: float = 20.0

    def __post_init__(self):
        if not 0.0 < float(self.p) < 1.0:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"K must be a positive integer, got {self.K}")
        if len(self.X.row_dims) != 2 or self.X.row_dims != self.X.col_dims:
            raise ShapeError(f"X must be m x l x m x l, got {self.X.shape}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "K", int(self.K))

    @classmethod
    def from_vector(cls, p: float, x: Sequence[float], m: int, l: int, K: int, **kw) -> "InitiatorParams":
        """Build from ``x`` = row-major ``vec(mat(X))`` of length (m*l)**2."""
        q = m * l
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (q * q,):
            raise ShapeError(f"x must have {q * q} entries for m={m}, l={l}, got {x.size}")
        return cls(p, unflatten(x.reshape(q, q), (m, l), (m, l)), K, **kw)

    @property
    def m(self) -> int:
        return self.X.row_dims[0]

    @property
    def l(self) -> int:
        return self.X.row_dims[1]

    @property
    def shape(self) -> KronShape:
        return KronShape(self.p, self.m, self.l, self.K)

    @property
    def q(self) -> int:
        return self.m * self.l

    @property
    def n(self) -> int:
        return self.m**self.K

    @property
    def L(self) -> int:
        return self.l**self.K

    @property
    def d(self) -> int:
        return self.q**self.K

    @property
    def x_vec(self) -> np.ndarray:
        return flatten(self.X).ravel()

    def with_K(self, K: int) -> "InitiatorParams":
        return InitiatorParams(self.p, self.X, K, self.centering_c, self.x_max)

    def validate(self) -> None:
        """Check that P1 is a probability tensor, X is bounded and roughly centered."""
        p1 = self.p + flatten(self.X) / np.sqrt(self.d)
        bad = np.argwhere((p1 <= 0.0) | (p1 >= 1.0))
        if bad.size:
            r, c = bad[0]
            raise ParameterError(
                f"initiator entry (row {r}, col {c}) = {p1[r, c]:.6g} lies outside (0, 1); "
                f"X entry {flatten(self.X)[r, c]} is too large for p={self.p}, d={self.d}"
            )
        xmax = float(np.abs(self.X.data).max())
        if xmax > self.x_max:
            raise ParameterError(f"max |X| = {xmax} exceeds x_max = {self.x_max}")
        total = float(self.X.data.sum())
        bound = self.centering_c * self.q**2 / np.sqrt(self.d)
        if abs(total) > bound:
            raise ParameterError(f"X is not centered: sum = {total:.6g}, bound {bound:.6g}")


@dataclass
class GraphSample:
    """A sampled adjacency tensor and the metadata needed to reproduce it."""

    adjacency: EvenTensor
    permutation: np.ndarray
    seed: int
    truth: InitiatorParams | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.adjacency.n_rows


# -- initiator and Kronecker powers -----------------------------------------


def build_initiator(params: InitiatorParams, validate: bool = True) -> EvenTensor:
    """``P1 = p + X / sqrt(d)`` with ``d = (m l)**K``.

    ``validate=False`` skips the probability checks, for purely algebraic
    uses such as measuring the linearization error at small ``d``.
    """
    if validate:
        params.validate()
    return params.X / np.sqrt(params.d) + params.p


def kronecker_power(p1: EvenTensor, K: int) -> EvenTensor:
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    check_dense_capacity(p1.n_rows**K)
    out = p1
    for _ in range(K - 1):
        out = kron(out, p1)
    return out


@lru_cache(maxsize=32)
def _level_labels(m: int, l: int, K: int) -> np.ndarray:
    n, L = m**K, l**K
    u = np.arange(n * L)
    i, alpha = u % n, u // n
    labels = np.empty((K, n * L), dtype=np.intp)
    for k in range(K):
        labels[k] = (i // m ** (K - 1 - k)) % m + m * ((alpha // l ** (K - 1 - k)) % l)
    labels.setflags(write=False)
    return labels


def level_labels(m: int, l: int, K: int) -> np.ndarray:
    """``(K, d)`` array: initiator label of each flattened label at each level."""
    return _level_labels(int(m), int(l), int(K))


def pk_entries(p1: EvenTensor, K: int, u, v) -> np.ndarray:
    """``mat(P_K)[u, v]`` as a product of initiator entries, one per level."""
    m, l = p1.row_dims
    labels = level_labels(m, l, K)
    p1m = flatten(p1)
    u = np.asarray(u)
    v = np.asarray(v)
    out = np.ones(np.broadcast(u, v).shape)
    for k in range(K):
        out = out * p1m[labels[k][u], labels[k][v]]
    return out


# -- sampling -----------------------------------------------------------------


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform draws ``start .. start+count-1`` of the counter-based stream keyed by ``seed``.

    Any split of an index range yields the same values as one call over it.
    """
    bitgen = np.random.Philox(key=int(seed))
    bitgen.advance(start // 4)  # Philox4x64 emits four 64-bit words per counter step
    gen = np.random.Generator(bitgen)
    if start % 4:
        gen.random(start % 4)
    return gen.random(count)


def conjugate(mat: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """``Pi M Pi^T`` where ``Pi e_u = e_{permutation[u]}``."""
    out = np.empty_like(mat)
    out[np.ix_(permutation, permutation)] = mat
    return out


def sample_adjacency(pk: EvenTensor, seed: int, permutation=None) -> GraphSample:
    """Bernoulli sample of every entry of ``pk``, then vertex-layer relabelling.

    One uniform per entry, consumed in canonical linear order; entry ``e``
    is an edge iff ``U_e < P_e``.
    """
    pm = flatten(pk)
    if pm.min() < 0.0 or pm.max() > 1.0:
        raise ParameterError("edge probabilities must lie in [0, 1]")
    d = pm.shape[0]
    check_dense_capacity(d, copies=2)
    draws = uniforms(seed, 0, pm.size).reshape(pm.shape, order="F")
    a = (draws < pm).astype(np.float64)
    del draws
    if permutation is None:
        permutation = np.arange(d)
    permutation = _check_permutation(permutation, d)
    if not np.array_equal(permutation, np.arange(d)):
        a = conjugate(a, permutation)
    return GraphSample(unflatten(a, pk.row_dims, pk.col_dims), permutation, int(seed))


def iter_edges(params: InitiatorParams, seed: int, permutation=None,
               block_cols: int | None = None) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(u, v)`` flattened label arrays of sampled edges, column block by column block.

    Entry probabilities come from :func:`pk_entries`, never from a dense
    ``P_K``; the uniform stream is the one :func:`sample_adjacency` uses, so
    the edge set equals the dense sample of ``kronecker_power(P1, K)``.
    """
    p1 = build_initiator(params)
    p1m = flatten(p1)
    d, K = params.d, params.K
    labels = level_labels(params.m, params.l, K)
    if permutation is not None:
        permutation = _check_permutation(permutation, d)
    if block_cols is None:
        block_cols = max(1, (1 << 22) // d)
    for v0 in range(0, d, block_cols):
        v1 = min(d, v0 + block_cols)
        prob = np.ones((d, v1 - v0))
        for k in range(K):
            prob *= p1m[np.ix_(labels[k], labels[k][v0:v1])]
        draws = uniforms(seed, v0 * d, d * (v1 - v0)).reshape(prob.shape, order="F")
        u, v = np.nonzero(draws < prob)
        v = v + v0
        if permutation is not None:
            u, v = permutation[u], permutation[v]
        yield u, v


def sample_adjacency_streaming(params: InitiatorParams, seed: int,
                               sink: Callable[[np.ndarray, np.ndarray], object],
                               permutation=None, block_cols: int | None = None) -> int:
    """Stream sampled edges into ``sink(u, v)``; returns the number of edges."""
    count = 0
    for u, v in iter_edges(params, seed, permutation, block_cols):
        sink(u, v)
        count += u.size
    return count


def sample_graph(params: InitiatorParams, seed: int, permutation=None) -> GraphSample:
    """Dense end-to-end sample with ground truth attached."""
    pk = kronecker_power(build_initiator(params), params.K)
    sample = sample_adjacency(pk, seed, permutation)
    sample.truth = params
    return sample


# -- signal tensor and theta ----------------------------------------------


def signal_tensor(params: InitiatorParams) -> EvenTensor:
    """Closed form ``S_K``: a sum of K Kronecker products with one X slot each."""
    m, l, K, q = params.m, params.l, params.K, params.q
    check_dense_capacity(params.d, copies=2)
    total = None
    for j in range(K):
        term = params.X
        if j > 0:
            term = kron(ones((m**j, l**j)), term)
        if K - 1 - j > 0:
            term = kron(term, ones((m ** (K - 1 - j), l ** (K - 1 - j))))
        total = term if total is None else total + term
    return total * (params.p ** (K - 1) / params.d)


def signal_tensor_recursive(params: InitiatorParams) -> EvenTensor:
    """``S_K`` via ``S_k = (p^(k-1)/d) J_{q^(k-1)} (x) X + p S_{k-1} (x) J_q``, ``S_1 = X/d``."""
    m, l, K, d, p = params.m, params.l, params.K, params.d, params.p
    check_dense_capacity(d, copies=2)
    s = params.X / d
    j_q = ones((m, l))
    for k in range(2, K + 1):
        s = kron(ones((m ** (k - 1), l ** (k - 1))), params.X) * (p ** (k - 1) / d) + kron(s, j_q) * p
    return s


def _theta_scale(shape) -> float:
    return shape.p ** (shape.K - 1) / shape.q**shape.K


def theta_apply_matrix(params, x_vec) -> np.ndarray:
    """``mat(S_K)`` for ``vec(mat(X)) = x_vec``; ``params`` needs p, m, l, K."""
    q, d = params.m * params.l, (params.m * params.l) ** params.K
    x_vec = np.asarray(x_vec, dtype=np.float64)
    if x_vec.shape != (q * q,):
        raise ShapeError(f"x_vec must have length {q * q}, got {x_vec.shape}")
    xm = x_vec.reshape(q, q)
    labels = level_labels(params.m, params.l, params.K)
    out = np.zeros((d, d))
    for lab in labels:
        out += xm[np.ix_(lab, lab)]
    out *= _theta_scale(params)
    return out


def theta_apply(params, x_vec) -> np.ndarray:
    """``theta x``: length-d^2 row-major ``vec(mat(S_K))``."""
    return theta_apply_matrix(params, x_vec).ravel()


@lru_cache(maxsize=32)
def _one_hot(m: int, l: int, K: int) -> tuple[np.ndarray, ...]:
    q = m * l
    eye = np.eye(q)
    return tuple(eye[lab] for lab in level_labels(m, l, K))


def theta_adjoint_apply(params, s_vec) -> np.ndarray:
    """``theta^T s``: block sums of ``mat(s)`` over each level's label pairs."""
    q, d = params.m * params.l, (params.m * params.l) ** params.K
    s = np.asarray(s_vec, dtype=np.float64)
    if s.size != d * d:
        raise ShapeError(f"s_vec must have length {d * d}, got {s.size}")
    sm = s.reshape(d, d)
    out = np.zeros((q, q))
    for onehot in _one_hot(params.m, params.l, params.K):
        out += onehot.T @ (sm @ onehot)
    return _theta_scale(params) * out.ravel()


def theta_adjoint_sparse(params, index, values) -> np.ndarray:
    """``theta^T s`` for ``s`` given by its nonzero row-major ``index`` and ``values``."""
    q, d = params.m * params.l, (params.m * params.l) ** params.K
    index = np.asarray(index, dtype=np.intp)
    values = np.asarray(values, dtype=np.float64)
    u, v = index // d, index % d
    out = np.zeros(q * q)
    for lab in level_labels(params.m, params.l, params.K):
        out += np.bincount(lab[u] * q + lab[v], weights=values, minlength=q * q)
    return _theta_scale(params) * out


@lru_cache(maxsize=16)
def _gram(p: float, m: int, l: int, K: int) -> np.ndarray:
    shape = KronShape(p, m, l, K)
    q = m * l
    cols = [theta_adjoint_apply(shape, theta_apply(shape, e)) for e in np.eye(q * q)]
    g = np.column_stack(cols)
    g = 0.5 * (g + g.T)
    g.setflags(write=False)
    return g


def theta_gram(params) -> np.ndarray:
    """``theta^T theta`` (q^2 x q^2), assembled column by column from basis vectors."""
    return _gram(float(params.p), int(params.m), int(params.l), int(params.K))


def linearized_pk(params: InitiatorParams) -> EvenTensor:
    """``P_K^lin = p^K J_d + sqrt(d) S_K``."""
    return signal_tensor(params) * np.sqrt(params.d) + params.p**params.K


# -- permutations -------------------------------------------------------------


def _check_permutation(permutation, d: int) -> np.ndarray:
    perm = np.asarray(permutation, dtype=np.intp)
    if perm.shape != (d,) or not np.array_equal(np.sort(perm), np.arange(d)):
        raise ParameterError(f"not a permutation of {d} labels")
    return perm


def random_sparse_permutation(d: int, s: int, seed: int) -> np.ndarray:
    """Uniform permutation of ``range(d)`` moving exactly ``s`` labels."""
    if not 0 <= s <= d:
        raise ParameterError(f"need 0 <= s <= d, got s={s}, d={d}")
    if s == 1:
        raise ParameterError("a permutation cannot displace exactly one label")
    rng = np.random.default_rng(seed)
    perm = np.arange(d)
    if s == 0:
        return perm
    moved = np.sort(rng.choice(d, size=s, replace=False))
    while True:
        shuffled = rng.permutation(s)
        if not np.any(shuffled == np.arange(s)):
            break
    perm[moved] = moved[shuffled]
    return perm


def hamming_distance(permutation) -> int:
    perm = np.asarray(permutation)
    return int(np.count_nonzero(perm != np.arange(perm.size)))
