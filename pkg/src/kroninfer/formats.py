"""On-disk formats.

KTEN1 tensor files::

    KTEN1\\n
    {"row_dims": [...], "col_dims": [...]}\\n
    <little-endian float64 entries in canonical order, first index fastest>

Edge lists::

    #kron d=<d> m=<m> l=<l> K=<K> seed=<seed>
    i alpha j beta        (1-based node/layer indices)    or
    u v                   (1-based flattened labels, --flat)

A JSON sidecar ``<edges>.json`` carries the seed, the permutation and,
for synthetic graphs, the generating parameters.
"""

from __future__ import annotations

import json
import re
import warnings
from pathlib import Path

import numpy as np

from .errors import MalformedInputError
from .kron_graph import GraphSample, InitiatorParams
from .tensor import EvenTensor, unflatten

MAGIC = b"KTEN1\n"
_HEADER_RE = re.compile(r"^#kron\s+(.*)$")


def write_kten(path, t: EvenTensor) -> None:
    header = json.dumps({"row_dims": list(t.row_dims), "col_dims": list(t.col_dims)})
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("ascii") + b"\n")
        fh.write(t.linear().astype("<f8").tobytes())


def read_kten(path) -> EvenTensor:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise MalformedInputError(f"{path}: missing KTEN1 magic")
        line = fh.readline()
        try:
            header = json.loads(line.decode("ascii"))
            rows = tuple(int(x) for x in header["row_dims"])
            cols = tuple(int(x) for x in header["col_dims"])
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise MalformedInputError(f"{path}: bad KTEN1 header") from exc
        payload = fh.read()
    count = int(np.prod(rows)) * int(np.prod(cols))
    if len(payload) != 8 * count:
        raise MalformedInputError(f"{path}: expected {8 * count} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return EvenTensor(rows, cols, data)


def edge_header(d: int, m: int, l: int, K: int, seed: int) -> str:
    return f"#kron d={d} m={m} l={l} K={K} seed={seed}"


def parse_header(line: str) -> dict:
    match = _HEADER_RE.match(line.strip())
    if not match:
        raise MalformedInputError(f"not a #kron header: {line.strip()!r}")
    fields = {}
    for item in match.group(1).split():
        key, _, value = item.partition("=")
        try:
            fields[key] = int(value)
        except ValueError as exc:
            raise MalformedInputError(f"bad header field {item!r}") from exc
    missing = {"d", "m", "l", "K"} - set(fields)
    if missing:
        raise MalformedInputError(f"header lacks {sorted(missing)}")
    return fields


class EdgeWriter:
    """Append edge blocks to an open text file."""

    def __init__(self, fh, n: int, flat: bool):
        self.fh = fh
        self.n = n
        self.flat = flat

    def __call__(self, u: np.ndarray, v: np.ndarray) -> None:
        if u.size == 0:
            return
        if self.flat:
            rows = np.column_stack([u + 1, v + 1])
        else:
            rows = np.column_stack([u % self.n + 1, u // self.n + 1, v % self.n + 1, v // self.n + 1])
        np.savetxt(self.fh, rows, fmt="%d")


def write_edges(path, adjacency: EvenTensor, *, m: int, l: int, K: int, seed: int, flat: bool = False) -> int:
    mat = adjacency.matrix
    u, v = np.nonzero(mat)
    with open(path, "w") as fh:
        fh.write(edge_header(mat.shape[0], m, l, K, seed) + "\n")
        EdgeWriter(fh, adjacency.row_dims[0], flat)(u, v)
    return int(u.size)


def read_edges(path) -> tuple[EvenTensor, dict]:
    """Dense adjacency tensor (n x L x n x L) and header fields from an edge list."""
    path = Path(path)
    with open(path) as fh:
        header = parse_header(fh.readline())
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # an edgeless graph is valid
                raw = np.loadtxt(fh, dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise MalformedInputError(f"{path}: unreadable edge rows") from exc
    d, m, l, K = header["d"], header["m"], header["l"], header["K"]
    n, L = m**K, l**K
    if n * L != d:
        raise MalformedInputError(f"{path}: header d={d} inconsistent with m={m}, l={l}, K={K}")
    mat = np.zeros((d, d))
    if raw.size:
        if raw.shape[1] == 2:
            u, v = raw[:, 0] - 1, raw[:, 1] - 1
        elif raw.shape[1] == 4:
            i, a, j, b = (raw[:, k] - 1 for k in range(4))
            if (i.min() < 0 or j.min() < 0 or a.min() < 0 or b.min() < 0
                    or max(i.max(), j.max()) >= n or max(a.max(), b.max()) >= L):
                raise MalformedInputError(f"{path}: node or layer index out of range")
            u, v = i + n * a, j + n * b
        else:
            raise MalformedInputError(f"{path}: rows must have 2 or 4 columns, got {raw.shape[1]}")
        if u.min() < 0 or v.min() < 0 or u.max() >= d or v.max() >= d:
            raise MalformedInputError(f"{path}: edge label out of range")
        mat[u, v] = 1.0
    return unflatten(mat, (n, L), (n, L)), header


def sidecar_path(edges_path) -> Path:
    p = Path(edges_path)
    return p.with_name(p.name + ".json")


def params_to_dict(params: InitiatorParams) -> dict:
    return {"p": params.p, "x": params.x_vec.tolist(), "m": params.m, "l": params.l, "K": params.K}


def params_from_dict(raw: dict) -> InitiatorParams:
    try:
        return InitiatorParams.from_vector(raw["p"], raw["x"], raw["m"], raw["l"], raw["K"])
    except (KeyError, TypeError) as exc:
        raise MalformedInputError(f"incomplete parameter block: {exc}") from exc


def write_sidecar(path, sample: GraphSample, extra: dict | None = None) -> None:
    meta = {"seed": sample.seed, "permutation": [int(x) for x in sample.permutation]}
    if sample.truth is not None:
        meta["truth"] = params_to_dict(sample.truth)
    meta.update(extra or {})
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_sidecar(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path}: invalid JSON") from exc


def load_sample(path) -> GraphSample:
    """Edge list or KTEN1 file plus optional sidecar, as a :class:`GraphSample`."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        adjacency, header = read_kten(path), {}
    else:
        adjacency, header = read_edges(path)
    d = adjacency.n_rows
    side = sidecar_path(path)
    meta = read_sidecar(side) if side.exists() else {}
    perm = np.asarray(meta.get("permutation", np.arange(d)), dtype=np.intp)
    truth = params_from_dict(meta["truth"]) if "truth" in meta else None
    seed = int(meta.get("seed", header.get("seed", 0)))
    return GraphSample(adjacency, perm, seed, truth, meta={"header": header})
