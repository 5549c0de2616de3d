"""Dense tensor algebra: matricization, mode products, Tucker/HOSVD.

Conventions (used consistently across the whole package):

* ``vec`` is column-major: ``vec(A)[i + m*j] = A[i, j]`` for an ``m x n`` matrix,
  i.e. ``A.ravel(order="F")``.
* The mode-``d`` matricization ``T_(d)`` maps tensor element ``(i_0, ..., i_{m-1})``
  to row ``i_d`` and column ``sum_{k != d} i_k * prod_{l < k, l != d} n_l`` —
  earlier remaining modes vary fastest.  Under this convention
  ``vec(T_(0) column j)`` stacks fibers in the same order as ``T.ravel(order="F")``.
* Mode products satisfy ``(T x_d A)_(d) = A @ T_(d)``.

Tensors are plain ``numpy.ndarray`` objects with ``dtype=float64``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TuckerFactors",
    "matricize",
    "fold",
    "mode_product",
    "multi_mode_product",
    "kronecker",
    "tucker_reconstruct",
    "hosvd",
    "inner_product",
    "write_tensor",
    "read_tensor",
]


# ---------------------------------------------------------------------------
# basic reshapes
# ---------------------------------------------------------------------------

def matricize(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Unfold ``tensor`` along ``mode`` (earlier remaining modes vary fastest)."""
    tensor = np.asarray(tensor)
    if not 0 <= mode < tensor.ndim:
        raise ValueError(f"mode {mode} out of range for ndim {tensor.ndim}")
    return np.reshape(
        np.moveaxis(tensor, mode, 0), (tensor.shape[mode], -1), order="F"
    )


def fold(matrix: np.ndarray, mode: int, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`matricize`: rebuild a tensor of ``shape`` from its unfolding."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    matrix = np.asarray(matrix)
    rest = shape[:mode] + shape[mode + 1 :]
    if matrix.shape != (shape[mode], int(np.prod(rest, dtype=np.int64))):
        raise ValueError(f"matrix shape {matrix.shape} inconsistent with {shape}")
    moved = np.reshape(matrix, (shape[mode],) + rest, order="F")
    return np.moveaxis(moved, 0, mode)


def mode_product(tensor: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``tensor x_mode matrix``.

    ``matrix`` has shape ``(new_dim, tensor.shape[mode])``; the result replaces
    that axis with ``new_dim``.
    """
    tensor = np.asarray(tensor)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[1] != tensor.shape[mode]:
        raise ValueError(
            f"matrix shape {matrix.shape} does not match tensor mode {mode} "
            f"of size {tensor.shape[mode]}"
        )
    out = np.tensordot(matrix, tensor, axes=(1, mode))
    # tensordot puts the new axis first; move it back into place.
    return np.moveaxis(out, 0, mode)


def multi_mode_product(
    tensor: np.ndarray, matrices: list[np.ndarray | None], transpose: bool = False
) -> np.ndarray:
    """Apply one matrix per mode (``None`` skips a mode).

    With ``transpose=True`` each matrix is applied as ``M.T`` — the usual
    projection onto factor columns.
    """
    out = np.asarray(tensor)
    for mode, mat in enumerate(matrices):
        if mat is None:
            continue
        out = mode_product(out, mat.T if transpose else mat, mode)
    return out


# np.kron already implements the column-major-compatible Kronecker product;
# exposed under the package-wide name.
kronecker = np.kron


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product ``<a, b>`` of two equally shaped tensors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.tensordot(a, b, axes=a.ndim))


# ---------------------------------------------------------------------------
# Tucker form
# ---------------------------------------------------------------------------

@dataclass
class TuckerFactors:
    """A Tucker-form tensor: ``core x_0 factors[0] x_1 factors[1] ...``."""

    core: np.ndarray
    factors: list[np.ndarray]

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=np.float64)
        self.factors = [np.asarray(f, dtype=np.float64) for f in self.factors]
        if self.core.ndim != len(self.factors):
            raise ValueError(
                f"core has {self.core.ndim} modes but {len(self.factors)} factors given"
            )
        for mode, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[1] != self.core.shape[mode]:
                raise ValueError(
                    f"factor {mode} has shape {f.shape}, expected (*, {self.core.shape[mode]})"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def full(self) -> np.ndarray:
        return tucker_reconstruct(self.core, self.factors)


def tucker_reconstruct(core: np.ndarray, factors: list[np.ndarray]) -> np.ndarray:
    """Expand a Tucker decomposition to a dense tensor."""
    out = np.asarray(core)
    if out.ndim != len(factors):
        raise ValueError(
            f"core has {out.ndim} modes but {len(factors)} factors given"
        )
    for mode, mat in enumerate(factors):
        out = mode_product(out, mat, mode)
    return out


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip singular-vector signs so each column's largest-|entry| is positive."""
    if u.size == 0:
        return u
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def hosvd(tensor: np.ndarray, ranks: list[int]) -> TuckerFactors:
    """Truncated higher-order SVD.

    Factor ``d`` holds the leading ``ranks[d]`` left singular vectors of the
    mode-``d`` unfolding (signs fixed so the largest-magnitude component of each
    column is positive); the core is the projection of ``tensor`` onto them.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    ranks = [int(r) for r in ranks]
    if len(ranks) != tensor.ndim:
        raise ValueError(f"{len(ranks)} ranks given for a {tensor.ndim}-mode tensor")
    for mode, r in enumerate(ranks):
        if not 1 <= r <= tensor.shape[mode]:
            raise ValueError(
                f"rank {r} invalid for mode {mode} of size {tensor.shape[mode]}"
            )
    factors = []
    for mode, r in enumerate(ranks):
        u, _, _ = np.linalg.svd(matricize(tensor, mode), full_matrices=False)
        factors.append(_fix_signs(u[:, :r]))
    core = multi_mode_product(tensor, factors, transpose=True)
    return TuckerFactors(core, factors)


# ---------------------------------------------------------------------------
# on-disk format: <name>.bin (little-endian float64, row-major) + <name>.bin.json
# ---------------------------------------------------------------------------

def write_tensor(path: str | Path, tensor: np.ndarray) -> None:
    """Write ``tensor`` as raw little-endian float64 plus a JSON shape sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(tensor, dtype="<f8")
    path.write_bytes(arr.tobytes())
    sidecar = {"shape": list(arr.shape), "dtype": "f64", "order": "row-major"}
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor`."""
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    if sidecar.get("dtype") != "f64" or sidecar.get("order") != "row-major":
        raise ValueError(f"unsupported tensor encoding in {path}.json: {sidecar}")
    shape = tuple(int(s) for s in sidecar["shape"])
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    expected = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if data.size != expected:
        raise ValueError(
            f"{path}: expected {expected} float64 values for shape {shape}, got {data.size}"
        )
    return data.reshape(shape).astype(np.float64)
