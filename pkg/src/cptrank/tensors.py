"""Dense tensor primitives and the rank-decomposed (Kruskal) tensor type.

Tensors are plain ``numpy.ndarray`` objects in float64.  One linearization
rule is used everywhere in this package: C order over the dimension list,
i.e. the *last* index varies fastest.  ``unfold``, ``khatri_rao`` and the
network parser all share this convention, so a flat probability list read
from a file, reshaped to its dims, indexes correctly without transposes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from math import prod
from typing import Sequence

import numpy as np

__all__ = [
    "CPModel",
    "tensor_from_flat",
    "rank_one",
    "reconstruct",
    "max_abs_diff",
    "frobenius_dist",
    "unfold",
    "fold",
    "khatri_rao",
    "tensor_to_json",
    "tensor_from_json",
    "model_to_json",
    "model_from_json",
]


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) < 1:
        raise ValueError("tensor order must be at least 1 (empty dims)")
    if any(d < 1 for d in dims):
        raise ValueError(f"all dimensions must be >= 1, got {dims}")
    return dims


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def tensor_from_flat(dims: Sequence[int], data: Sequence[float]) -> np.ndarray:
    """Build a dense tensor from a dimension list and a flat value list.

    The flat list is interpreted in C order (last index fastest).

    Raises
    ------
    ValueError
        If the data length does not equal the product of ``dims``.
    """
    dims = _check_dims(dims)
    flat = np.asarray(data, dtype=np.float64).ravel()
    expected = prod(dims)
    if flat.size != expected:
        raise ValueError(
            f"dims {list(dims)} require {expected} entries, got {flat.size}"
        )
    return flat.reshape(dims)


def rank_one(vectors: Sequence[Sequence[float]]) -> np.ndarray:
    """Outer product of k vectors: entry (i_1..i_k) = prod_j v_j[i_j]."""
    if len(vectors) == 0:
        raise ValueError("rank_one needs at least one vector")
    vecs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if any(v.size == 0 for v in vecs):
        raise ValueError("rank_one vectors must be nonempty")
    return reduce(np.multiply.outer, vecs)


@dataclass(frozen=True)
class CPModel:
    """A sum of r rank-one tensors, stored as per-mode factor matrices.

    ``factors[j]`` has shape (n_j, r); its column t is the mode-j vector of
    the t-th rank-one term.  ``weights`` (length r, default all ones) scale
    the terms, so normalized-column representations stay expressible.
    Instances are immutable; the arrays are marked read-only.
    """

    factors: tuple[np.ndarray, ...]
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        factors = tuple(_readonly(f) for f in self.factors)
        if len(factors) == 0:
            raise ValueError("CPModel needs at least one factor matrix")
        for j, f in enumerate(factors):
            if f.ndim != 2:
                raise ValueError(f"factor {j} must be a matrix, got ndim={f.ndim}")
        r = factors[0].shape[1]
        if r < 1:
            raise ValueError("rank must be >= 1")
        for j, f in enumerate(factors):
            if f.shape[1] != r:
                raise ValueError(
                    f"factor {j} has {f.shape[1]} columns, expected rank {r}"
                )
            if f.shape[0] < 1:
                raise ValueError(f"factor {j} has zero rows")
        w = self.weights
        w = np.ones(r) if w is None else np.asarray(w, dtype=np.float64).ravel()
        if w.size != r:
            raise ValueError(f"weights length {w.size} does not match rank {r}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    def with_factors(self, factors: Sequence[np.ndarray]) -> "CPModel":
        return CPModel(tuple(factors), self.weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CPModel):
            return NotImplemented
        return (
            len(self.factors) == len(other.factors)
            and all(np.array_equal(a, b) for a, b in zip(self.factors, other.factors))
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.dims, self.rank))


def reconstruct(model: CPModel) -> np.ndarray:
    """Dense tensor equal to the weighted sum of the model's rank-one terms."""
    scaled = model.factors[0] * model.weights  # fold weights into mode 0
    if model.order == 1:
        return scaled.sum(axis=1)
    rest = khatri_rao(model.factors[1:])
    return (scaled @ rest.T).reshape(model.dims)


def _check_same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"tensor dims differ: {a.shape} vs {b.shape}")


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Largest elementwise absolute difference between two same-shaped tensors."""
    _check_same_dims(a, b)
    return float(np.max(np.abs(a - b)))


def frobenius_dist(a: np.ndarray, b: np.ndarray) -> float:
    """Square root of the sum of squared entry differences."""
    _check_same_dims(a, b)
    return float(np.linalg.norm((a - b).ravel()))


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Matricize: rows index the chosen mode, columns the remaining modes.

    Column order follows the global layout: remaining modes in increasing
    order, last one fastest.  ``fold`` inverts this exactly.
    """
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


def fold(mat: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of ``unfold``: rebuild the tensor with the given dims."""
    dims = _check_dims(dims)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for dims {list(dims)}")
    rest = dims[:mode] + dims[mode + 1 :]
    return np.moveaxis(mat.reshape((dims[mode],) + rest), 0, mode)


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product of matrices sharing a column count.

    Output column t is the Kronecker product of the t-th columns, first
    matrix's row index slowest.  With this ordering,
    ``unfold(reconstruct(m), j)`` equals
    ``factors[j] @ (khatri_rao(other factors) * weights).T``.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    if len(mats) == 0:
        raise ValueError("khatri_rao needs at least one matrix")
    r = mats[0].shape[1]
    for j, m in enumerate(mats):
        if m.ndim != 2 or m.shape[1] != r:
            raise ValueError(
                f"matrix {j} has shape {m.shape}, expected {r} columns"
            )
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, r)
    return out


# --- JSON interchange ------------------------------------------------------
# {"dims": [...], "data": [...]} for tensors;
# {"dims": [...], "rank": r, "weights": [...], "factors": [[row-major]...]}
# for CP models.  Used by the CLI's --dump option and the test suite.


def tensor_to_json(t: np.ndarray) -> str:
    return json.dumps(
        {"dims": list(t.shape), "data": [float(x) for x in t.ravel()]}
    )


def tensor_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    return tensor_from_flat(obj["dims"], obj["data"])


def model_to_json(model: CPModel) -> str:
    return json.dumps(
        {
            "dims": list(model.dims),
            "rank": model.rank,
            "weights": [float(w) for w in model.weights],
            "factors": [[float(x) for x in f.ravel()] for f in model.factors],
        }
    )


def model_from_json(text: str) -> CPModel:
    obj = json.loads(text)
    dims = [int(d) for d in obj["dims"]]
    r = int(obj["rank"])
    factors = tuple(
        np.asarray(flat, dtype=np.float64).reshape(n, r)
        for n, flat in zip(dims, obj["factors"])
    )
    return CPModel(factors, np.asarray(obj["weights"], dtype=np.float64))
