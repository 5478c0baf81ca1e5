"""Dense even-order tensor algebra.

An :class:`EvenTensor` of order ``2M`` has row modes ``(I_1, ..., I_M)`` and
column modes ``(J_1, ..., J_M)``. Its canonical linear order puts the first
index fastest, so ``mat(A)`` is a Fortran-order reshape: row index
``i = i_1 + sum_{p>=2} (i_p - 1) prod_{q<p} I_q`` and likewise for columns.
Every product below runs in the matricized domain, where the Einstein
product is ordinary matrix multiplication.

Mode indices (``n`` in :func:`mode_n_product`) are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import svds

from .errors import ShapeError, SingularTensorError

# cond(mat(A)) above this is treated as singular
COND_LIMIT = 1e12

# dense SVD below this side length, ARPACK above
_DENSE_SVD_MAX = 1024


@dataclass(frozen=True)
class EvenTensor:
    """Real tensor of order ``2M`` with explicit row and column modes."""

    row_dims: tuple[int, ...]
    col_dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        rows = tuple(int(r) for r in self.row_dims)
        cols = tuple(int(c) for c in self.col_dims)
        if len(rows) != len(cols):
            raise ShapeError(f"row modes {rows} and column modes {cols} differ in count")
        if any(r <= 0 for r in rows + cols):
            raise ShapeError(f"mode dimensions must be positive, got {rows}, {cols}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != rows + cols:
            if data.size != prod(rows) * prod(cols):
                raise ShapeError(
                    f"data has {data.size} entries, expected {prod(rows) * prod(cols)}"
                )
            data = data.reshape(rows + cols, order="F")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        object.__setattr__(self, "row_dims", rows)
        object.__setattr__(self, "col_dims", cols)
        object.__setattr__(self, "data", data)

    @property
    def order(self) -> int:
        return 2 * len(self.row_dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.row_dims + self.col_dims

    @property
    def n_rows(self) -> int:
        return prod(self.row_dims)

    @property
    def n_cols(self) -> int:
        return prod(self.col_dims)

    @property
    def matrix(self) -> np.ndarray:
        return flatten(self)

    @property
    def T(self) -> "EvenTensor":
        return transpose(self)

    def linear(self) -> np.ndarray:
        """Entries in canonical linear order (first index fastest)."""
        return self.data.ravel(order="F")

    @classmethod
    def from_matrix(cls, m, row_dims: Sequence[int], col_dims: Sequence[int]) -> "EvenTensor":
        return unflatten(m, row_dims, col_dims)

    def __add__(self, other):
        if isinstance(other, EvenTensor):
            _same_dims(self, other)
            return EvenTensor(self.row_dims, self.col_dims, self.data + other.data)
        return EvenTensor(self.row_dims, self.col_dims, self.data + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, EvenTensor):
            _same_dims(self, other)
            return EvenTensor(self.row_dims, self.col_dims, self.data - other.data)
        return EvenTensor(self.row_dims, self.col_dims, self.data - other)

    def __mul__(self, scalar):
        return EvenTensor(self.row_dims, self.col_dims, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return EvenTensor(self.row_dims, self.col_dims, self.data / scalar)

    def __neg__(self):
        return EvenTensor(self.row_dims, self.col_dims, -self.data)


def _same_dims(a: EvenTensor, b: EvenTensor) -> None:
    if a.row_dims != b.row_dims or a.col_dims != b.col_dims:
        raise ShapeError(f"dims {a.shape} and {b.shape} differ")


def flatten(t: EvenTensor) -> np.ndarray:
    """``mat(t)``: the ``prod(I) x prod(J)`` matrix of an even-order tensor."""
    return t.data.reshape(t.n_rows, t.n_cols, order="F")


def unflatten(m, row_dims: Sequence[int], col_dims: Sequence[int]) -> EvenTensor:
    """Inverse of :func:`flatten`."""
    m = np.asarray(m, dtype=np.float64)
    row_dims, col_dims = tuple(row_dims), tuple(col_dims)
    if m.ndim != 2 or m.shape != (prod(row_dims), prod(col_dims)):
        raise ShapeError(
            f"matrix of shape {m.shape} cannot unflatten to {row_dims} x {col_dims}"
        )
    return EvenTensor(row_dims, col_dims, m.reshape(row_dims + col_dims, order="F"))


def einstein_product(a: EvenTensor, b: EvenTensor) -> EvenTensor:
    """Contract the column modes of ``a`` against the row modes of ``b``."""
    if a.col_dims != b.row_dims:
        raise ShapeError(f"contracted modes differ: {a.col_dims} vs {b.row_dims}")
    return unflatten(flatten(a) @ flatten(b), a.row_dims, b.col_dims)


def mode_n_product(t: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """``t x_n u``: replace mode ``n`` of ``t`` (size I_n) by ``u.shape[0]``."""
    t = np.asarray(t, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not 0 <= n < t.ndim:
        raise ShapeError(f"mode {n} out of range for order-{t.ndim} tensor")
    if u.ndim != 2 or u.shape[1] != t.shape[n]:
        raise ShapeError(f"matrix {u.shape} does not act on mode of size {t.shape[n]}")
    return np.moveaxis(np.tensordot(u, t, axes=(1, n)), 0, n)


def mode_n_vec_product(t: np.ndarray, v, n: int) -> np.ndarray:
    """Contract mode ``n`` of ``t`` against the vector ``v``; order drops by one."""
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not 0 <= n < t.ndim:
        raise ShapeError(f"mode {n} out of range for order-{t.ndim} tensor")
    if v.ndim != 1 or v.shape[0] != t.shape[n]:
        raise ShapeError(f"vector of length {v.shape} does not match mode size {t.shape[n]}")
    return np.tensordot(t, v, axes=(n, 0))


def _kron_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != b.ndim:
        raise ShapeError(f"kron needs equal orders, got {a.ndim} and {b.ndim}")
    n = a.ndim
    outer = np.multiply.outer(a, b)
    # interleave (i_1, j_1, i_2, j_2, ...) so j runs fastest inside each composite index
    axes = [ax for k in range(n) for ax in (k, n + k)]
    shape = tuple(sa * sb for sa, sb in zip(a.shape, b.shape))
    return outer.transpose(axes).reshape(shape)


def kron(a, b):
    """Left Kronecker product of two tensors of equal order.

    ``c[(i_1 J_1 + j_1), ..., (i_N J_N + j_N)] = a[i_1..i_N] * b[j_1..j_N]``
    (0-based), i.e. the index of ``b`` varies fastest inside each composite
    mode. For order-2 inputs this is the textbook matrix Kronecker product.
    For :class:`EvenTensor` inputs the row and column modes multiply
    pairwise; ``flatten`` of the result equals ``np.kron(flatten(a),
    flatten(b))`` after the relabelling returned by :func:`kron_index_map`.
    """
    if isinstance(a, EvenTensor) and isinstance(b, EvenTensor):
        if len(a.row_dims) != len(b.row_dims):
            raise ShapeError(f"kron needs equal orders, got {a.order} and {b.order}")
        rows = tuple(x * y for x, y in zip(a.row_dims, b.row_dims))
        cols = tuple(x * y for x, y in zip(a.col_dims, b.col_dims))
        return EvenTensor(rows, cols, _kron_arrays(a.data, b.data))
    return _kron_arrays(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def kron_index_map(a_dims: Sequence[int], b_dims: Sequence[int]) -> np.ndarray:
    """Flattened-label relabelling between tensor and matrix Kronecker products.

    For one side (rows or columns) with mode sizes ``a_dims`` and ``b_dims``
    returns ``perm`` such that
    ``flatten(kron(a, b))[r] == np.kron(flatten(a), flatten(b))[perm[r]]``
    on that side. The map is the identity when only the first mode is
    non-trivial, e.g. order-2 tensors or a single-layer multiplex.
    """
    a_dims, b_dims = tuple(a_dims), tuple(b_dims)
    c_dims = tuple(x * y for x, y in zip(a_dims, b_dims))
    r = np.arange(prod(c_dims))
    idx = np.unravel_index(r, c_dims, order="F")
    ia = [i // y for i, y in zip(idx, b_dims)]
    ib = [i % y for i, y in zip(idx, b_dims)]
    ra = np.ravel_multi_index(ia, a_dims, order="F")
    rb = np.ravel_multi_index(ib, b_dims, order="F")
    return ra * prod(b_dims) + rb


def transpose(t: EvenTensor) -> EvenTensor:
    m = len(t.row_dims)
    axes = tuple(range(m, 2 * m)) + tuple(range(m))
    return EvenTensor(t.col_dims, t.row_dims, t.data.transpose(axes))


def identity_tensor(dims: Sequence[int]) -> EvenTensor:
    dims = tuple(dims)
    return unflatten(np.eye(prod(dims)), dims, dims)


def einstein_inverse(t: EvenTensor) -> EvenTensor:
    if t.row_dims != t.col_dims:
        raise ShapeError(f"inverse needs equal row and column modes, got {t.shape}")
    m = flatten(t)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularTensorError(f"flattening is singular (condition number {cond:.3g})")
    return unflatten(np.linalg.inv(m), t.row_dims, t.col_dims)


def inner(a, b) -> float:
    """Sum over all entries of ``a * b``."""
    da = a.data if isinstance(a, EvenTensor) else np.asarray(a, dtype=np.float64)
    db = b.data if isinstance(b, EvenTensor) else np.asarray(b, dtype=np.float64)
    if da.shape != db.shape:
        raise ShapeError(f"inner product of shapes {da.shape} and {db.shape}")
    return float(np.vdot(da, db))


def frobenius_norm(t) -> float:
    return float(np.sqrt(inner(t, t)))


def spectral_norm(m: np.ndarray) -> float:
    """Largest singular value of a matrix; ARPACK with a fixed start vector for big inputs."""
    m = np.asarray(m, dtype=np.float64)
    if min(m.shape) <= _DENSE_SVD_MAX:
        return float(np.linalg.norm(m, 2)) if m.size else 0.0
    v0 = np.random.default_rng(0).standard_normal(min(m.shape))
    s = svds(m, k=1, v0=v0, tol=0, return_singular_vectors=False)
    return float(s[0])


def operator_norm(t: EvenTensor) -> float:
    return spectral_norm(flatten(t))


def ones(row_dims: Sequence[int], col_dims: Sequence[int] | None = None) -> EvenTensor:
    row_dims = tuple(row_dims)
    col_dims = row_dims if col_dims is None else tuple(col_dims)
    return EvenTensor(row_dims, col_dims, np.ones(row_dims + col_dims))


def zeros(row_dims: Sequence[int], col_dims: Sequence[int] | None = None) -> EvenTensor:
    row_dims = tuple(row_dims)
    col_dims = row_dims if col_dims is None else tuple(col_dims)
    return EvenTensor(row_dims, col_dims, np.zeros(row_dims + col_dims))
