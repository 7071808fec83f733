"""Per-CPT rank analytics: error-vs-rank profiles, minimal rank under a
max-error threshold, parameter counting, and matched random controls."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import prod
from typing import Sequence

import numpy as np

from .solvers import FitResult, SolverConfig, SolverNumericalError, multi_start_decompose, lm_decompose
from .tensors import CPModel, frobenius_dist, max_abs_diff, reconstruct

__all__ = [
    "AnalysisConfig",
    "ProfileEntry",
    "ProfileSource",
    "RankProfile",
    "rank_profile",
    "minimal_rank",
    "general_param_count",
    "cp_param_count",
    "cp_param_count_general",
    "random_cpt_like",
    "squeeze_unit_parents",
]

# Seed stride between ranks in a sweep; larger than any plausible start
# count so per-start seeds (seed + index) never collide across ranks.
_RANK_SEED_STRIDE = 1_000_003


@dataclass(frozen=True)
class AnalysisConfig:
    """Threshold and budget for rank sweeps.

    ``epsilon`` is the max-error acceptance threshold for "rank found";
    ``r_max`` bounds the sweep.
    """

    epsilon: float = 0.001
    r_max: int = 20
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")


@dataclass(frozen=True)
class ProfileEntry:
    """Best multi-start result for one rank."""

    rank: int
    max_error: float
    frob_error: float
    iterations: int
    converged: bool
    start_kind: str
    start_index: int | None


@dataclass(frozen=True)
class ProfileSource:
    """What a profile describes: a network CPT, a random control, or a bare tensor."""

    kind: str = "tensor"  # "cpt" | "control" | "tensor"
    network: str | None = None
    node: str | None = None
    seed: int | None = None


@dataclass(frozen=True)
class RankProfile:
    """Per-rank best errors for one tensor, ranks 1..r_max with no gaps."""

    dims: tuple[int, ...]
    entries: tuple[ProfileEntry, ...]
    source: ProfileSource = ProfileSource()

    def entry(self, rank: int) -> ProfileEntry:
        return self.entries[rank - 1]


def _entry_from_fit(rank: int, fit: FitResult) -> ProfileEntry:
    return ProfileEntry(
        rank=rank,
        max_error=fit.max_error,
        frob_error=fit.frob_error,
        iterations=fit.iterations,
        converged=fit.converged,
        start_kind=fit.start_kind,
        start_index=fit.start_index,
    )


def _rank_solver(cfg: AnalysisConfig, rank: int) -> SolverConfig:
    return replace(cfg.solver, seed=cfg.solver.seed + _RANK_SEED_STRIDE * (rank - 1))


def _extend_model(model: CPModel, column_scale: float, rng) -> CPModel:
    """Append one column per mode: the rank-r solution embedded at rank r+1."""
    factors = []
    for f in model.factors:
        col = column_scale * rng.random((f.shape[0], 1))
        factors.append(np.hstack([np.asarray(f), col]))
    return CPModel(tuple(factors), np.append(np.asarray(model.weights), 1.0))


def _fit_rank(
    target: np.ndarray,
    rank: int,
    cfg: AnalysisConfig,
    warm_model: CPModel | None = None,
) -> tuple[ProfileEntry, CPModel | None]:
    """Multi-start fit at one rank; solver aborts become non-converged entries.

    With ``warm_model`` (the previous rank's solution) two extra starts are
    tried: the model padded with a zero column, which embeds the rank-r fit
    exactly so the achieved error can never regress, and padded with a
    small random column to give the new term somewhere to go.
    """
    solver = _rank_solver(cfg, rank)
    candidates: list[FitResult] = []
    try:
        candidates.append(multi_start_decompose(target, rank, solver))
    except SolverNumericalError:
        pass
    if warm_model is not None and warm_model.rank == rank - 1:
        rng = np.random.default_rng(solver.seed + solver.n_random_starts + 1)
        for scale in (0.0, 1e-2):
            try:
                fit = lm_decompose(target, rank, _extend_model(warm_model, scale, rng), solver)
                candidates.append(replace(fit, start_kind="warm", start_index=None))
            except SolverNumericalError:
                pass
    if not candidates:
        entry = ProfileEntry(rank, float("inf"), float("inf"), 0, False, "none", None)
        return entry, None
    best = min(candidates, key=lambda f: (f.max_error, f.frob_error))
    return _entry_from_fit(rank, best), best.model


def rank_profile(
    target: np.ndarray,
    cfg: AnalysisConfig,
    source: ProfileSource = ProfileSource(),
    warm_start: bool = False,
) -> RankProfile:
    """Best achieved errors for every rank 1..r_max.

    Each rank runs an independent multi-start by default; ``warm_start``
    additionally seeds each rank from the previous solution, which makes
    the error profile non-increasing in rank.
    """
    if target.ndim < 2:
        raise ValueError("rank profiles need an order >= 2 tensor")
    entries: list[ProfileEntry] = []
    prev_model: CPModel | None = None
    for r in range(1, cfg.r_max + 1):
        entry, model = _fit_rank(target, r, cfg, prev_model if warm_start else None)
        entries.append(entry)
        prev_model = model
    return RankProfile(tuple(target.shape), tuple(entries), source)


def sweep_until_epsilon(
    target: np.ndarray, cfg: AnalysisConfig
) -> tuple[int | None, list[ProfileEntry]]:
    """Rank sweep with early exit at the first rank meeting the threshold.

    Returns (minimal rank or None, entries for the ranks actually fitted).
    """
    if target.ndim < 2:
        raise ValueError("rank sweeps need an order >= 2 tensor")
    entries: list[ProfileEntry] = []
    for r in range(1, cfg.r_max + 1):
        entry, _ = _fit_rank(target, r, cfg)
        entries.append(entry)
        if entry.max_error < cfg.epsilon:
            return r, entries
    return None, entries


def minimal_rank(target: np.ndarray, cfg: AnalysisConfig) -> int | None:
    """Smallest rank whose best max_error is below epsilon; None if none
    up to r_max qualifies."""
    found, _ = sweep_until_epsilon(target, cfg)
    return found


def general_param_count(dims: Sequence[int]) -> int:
    """Free parameters of an unstructured CPT with the child mode last:
    (n_child - 1) * prod(parent dims)."""
    dims = [int(d) for d in dims]
    if len(dims) < 1 or any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    return (dims[-1] - 1) * prod(dims[:-1])


def cp_param_count(k: int, r: int) -> int:
    """Parameters of a rank-r CP form of an all-binary order-k table: k(r-1)+r."""
    if k < 1 or r < 1:
        raise ValueError("order and rank must be >= 1")
    return k * (r - 1) + r


def cp_param_count_general(dims: Sequence[int], r: int) -> int:
    """General-cardinality extension of the binary count.

    (sum_j (n_j - 1)) * (r - 1) + r, which reduces to k(r-1)+r when every
    n_j = 2.  This is this package's convention; only the all-binary case
    has a canonical reference value.
    """
    dims = [int(d) for d in dims]
    if any(d < 2 for d in dims):
        raise ValueError(f"cp_param_count_general needs all dims >= 2, got {dims}")
    if r < 1:
        raise ValueError("rank must be >= 1")
    return sum(d - 1 for d in dims) * (r - 1) + r


def random_cpt_like(dims: Sequence[int], seed: int, mode: str = "normalized") -> np.ndarray:
    """Random table with the given dims (child mode last).

    "normalized" draws uniform [0,1) entries and rescales every child
    slice to sum to 1, producing a valid CPT; "raw" keeps the uniform
    entries as-is.  Deterministic per seed.
    """
    if mode not in ("normalized", "raw"):
        raise ValueError(f"mode must be normalized/raw, got {mode!r}")
    dims = tuple(int(d) for d in dims)
    if len(dims) < 1 or any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {list(dims)}")
    rng = np.random.default_rng(seed)
    t = rng.random(dims)
    if mode == "normalized":
        flat = t.reshape(-1, dims[-1])
        t = (flat / flat.sum(axis=1, keepdims=True)).reshape(dims)
    return t


def squeeze_unit_parents(t: np.ndarray) -> np.ndarray:
    """Drop parent modes of cardinality 1; they carry no structure.

    The child mode (last) is always kept, so the result has order >= 1.
    """
    axes = tuple(i for i in range(t.ndim - 1) if t.shape[i] == 1)
    return np.squeeze(t, axis=axes) if axes else t


def exact_rank_one_fit(target: np.ndarray) -> tuple[ProfileEntry, CPModel]:
    """Trivial exact fit for an order-1 tensor (itself a single term)."""
    if target.ndim != 1:
        raise ValueError("exact_rank_one_fit expects an order-1 tensor")
    model = CPModel((np.asarray(target, dtype=np.float64)[:, None],))
    recon = reconstruct(model)
    entry = ProfileEntry(
        rank=1,
        max_error=max_abs_diff(recon, target),
        frob_error=frobenius_dist(recon, target),
        iterations=0,
        converged=True,
        start_kind="exact",
        start_index=None,
    )
    return entry, model
