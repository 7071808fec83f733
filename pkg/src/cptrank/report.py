"""Corpus-level experiment runner and machine-readable reporting.

``run_corpus`` analyzes every CPT with enough parents across a set of
network files, optionally pairs each with a dimension-matched random
control table, and aggregates percentage-vs-rank curves.  Results
serialize to CSV (one row per record and rank, plus a separate curve
file) and to JSON (the full report, round-trippable).
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    AnalysisConfig,
    ProfileEntry,
    ProfileSource,
    RankProfile,
    cp_param_count_general,
    exact_rank_one_fit,
    general_param_count,
    random_cpt_like,
    rank_profile,
    squeeze_unit_parents,
    sweep_until_epsilon,
)
from .hugin import Network, NetError, cpt_to_tensor, load_network, select_cpts

__all__ = [
    "CorpusRecord",
    "CorpusReport",
    "run_corpus",
    "profile_single",
    "emit_report",
    "emit_curve_csv",
    "emit_profile_csv",
    "load_report_json",
]

# Offsets separating the seed streams of distinct CPTs and of their
# controls; wider than any rank/start offset used inside one sweep.
_CPT_SEED_STRIDE = 100_000_007
_CONTROL_SEED_OFFSET = 61_001_563


@dataclass(frozen=True)
class CorpusRecord:
    """Minimal-rank analysis of one table (a real CPT or its control)."""

    network: str
    node: str
    dims: tuple[int, ...]
    analyzed_dims: tuple[int, ...]
    source: str  # "cpt" | "control"
    control_seed: int | None
    minimal_rank: int | None
    entries: tuple[ProfileEntry, ...]
    general_params: int
    cp_params: int | None


@dataclass(frozen=True)
class CorpusReport:
    """All records plus the aggregate percentage-vs-rank curves."""

    records: tuple[CorpusRecord, ...]
    curve: tuple[tuple[int, float], ...]
    control_curve: tuple[tuple[int, float], ...]
    config: dict
    file_errors: tuple[tuple[str, str], ...] = ()


def _analyze_table(
    network: str,
    node: str,
    target: np.ndarray,
    cfg: AnalysisConfig,
    seed: int,
    source: str,
    control_seed: int | None,
) -> CorpusRecord:
    """Worker: minimal-rank sweep for one table (early exit at epsilon)."""
    dims = tuple(target.shape)
    analyzed = squeeze_unit_parents(target)
    cfg_seeded = replace(cfg, solver=replace(cfg.solver, seed=seed))
    if analyzed.ndim < 2:
        entry, _ = exact_rank_one_fit(analyzed.ravel())
        found, entries = (1, [entry]) if entry.max_error < cfg.epsilon else (None, [entry])
    else:
        found, entries = sweep_until_epsilon(analyzed, cfg_seeded)
    cp_params = None
    if found is not None and all(d >= 2 for d in analyzed.shape):
        cp_params = cp_param_count_general(analyzed.shape, found)
    return CorpusRecord(
        network=network,
        node=node,
        dims=dims,
        analyzed_dims=tuple(analyzed.shape),
        source=source,
        control_seed=control_seed,
        minimal_rank=found,
        entries=tuple(entries),
        general_params=general_param_count(dims),
        cp_params=cp_params,
    )


def _run_task(task) -> CorpusRecord:
    return _analyze_table(*task)


def _curve(records: list[CorpusRecord], r_max: int) -> tuple[tuple[int, float], ...]:
    if not records:
        return ()
    n = len(records)
    points = []
    for r in range(1, r_max + 1):
        hit = sum(1 for rec in records if rec.minimal_rank is not None and rec.minimal_rank <= r)
        points.append((r, 100.0 * hit / n))
    return tuple(points)


def run_corpus(
    paths,
    min_parents: int = 3,
    cfg: AnalysisConfig | None = None,
    with_controls: bool = False,
    control_mode: str = "normalized",
    strict: bool = False,
    jobs: int = 1,
    progress=None,
) -> CorpusReport:
    """Analyze every CPT with >= min_parents parents across network files.

    Each selected CPT gets a minimal-rank sweep; with ``with_controls``
    a random table of identical dimensions is generated per CPT and
    analyzed the same way.  Unreadable files abort under ``strict`` and
    become per-file error records otherwise.  Fully deterministic for a
    fixed configuration: records are ordered by (network, node) and every
    table derives its own seed from that position, so ``jobs`` never
    changes the output.
    """
    cfg = cfg or AnalysisConfig()
    networks: list[Network] = []
    file_errors: list[tuple[str, str]] = []
    for path in paths:
        try:
            networks.append(
                load_network(path, on_bad_sums="error" if strict else "warn")
            )
        except (OSError, NetError, json.JSONDecodeError) as exc:
            if strict:
                raise
            file_errors.append((str(path), str(exc)))

    selected = []
    for net in networks:
        for node in select_cpts(net, min_parents):
            selected.append((net, node))
    selected.sort(key=lambda pair: (pair[0].name, pair[1].name))

    base = cfg.solver.seed
    tasks = []
    for i, (net, node) in enumerate(selected):
        target = cpt_to_tensor(node, net)
        cpt_seed = base + _CPT_SEED_STRIDE * (i + 1)
        tasks.append((net.name, node.name, target, cfg, cpt_seed, "cpt", None))
        if with_controls:
            control_seed = cpt_seed + _CONTROL_SEED_OFFSET
            control = random_cpt_like(target.shape, control_seed, control_mode)
            tasks.append(
                (net.name, node.name, control, cfg, control_seed, "control", control_seed)
            )

    records: list[CorpusRecord] = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_run_task, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = _run_task(task)
            records.append(rec)
            if progress:
                progress(rec)

    cpt_records = [r for r in records if r.source == "cpt"]
    control_records = [r for r in records if r.source == "control"]
    config_echo = {
        "min_parents": min_parents,
        "epsilon": cfg.epsilon,
        "r_max": cfg.r_max,
        "solver": dict(cfg.solver.__dict__),
        "with_controls": with_controls,
        "control_mode": control_mode,
    }
    return CorpusReport(
        records=tuple(records),
        curve=_curve(cpt_records, cfg.r_max),
        control_curve=_curve(control_records, cfg.r_max),
        config=config_echo,
        file_errors=tuple(file_errors),
    )


def profile_single(
    path,
    node_name: str,
    cfg: AnalysisConfig | None = None,
    with_control: bool = False,
    control_mode: str = "normalized",
    min_parents: int = 3,
) -> tuple[RankProfile, RankProfile | None]:
    """Full 1..r_max error profile for one named CPT (and matched control).

    The node must have at least ``min_parents`` parents; pass
    ``min_parents=0`` to profile anything.
    """
    cfg = cfg or AnalysisConfig()
    net = load_network(path, on_bad_sums="warn")
    eligible = [n.name for n in select_cpts(net, min_parents)]
    if node_name not in net or node_name not in eligible:
        raise ValueError(
            f"node {node_name!r} not available with min_parents={min_parents}; "
            f"eligible nodes: {', '.join(eligible) if eligible else '(none)'}"
        )
    node = net.node(node_name)
    target = squeeze_unit_parents(cpt_to_tensor(node, net))
    source = ProfileSource(kind="cpt", network=net.name, node=node_name)
    profile = rank_profile(target, cfg, source)
    control_profile = None
    if with_control:
        control_seed = cfg.solver.seed + _CONTROL_SEED_OFFSET
        control = random_cpt_like(target.shape, control_seed, control_mode)
        control_cfg = replace(cfg, solver=replace(cfg.solver, seed=control_seed))
        control_profile = rank_profile(
            control, control_cfg, ProfileSource(kind="control", seed=control_seed)
        )
    return profile, control_profile


# --- serialization ------------------------------------------------------------


def _fmt_dims(dims) -> str:
    return "x".join(str(d) for d in dims)


def _fmt_opt_int(v: int | None) -> str:
    return "NA" if v is None else str(v)


def records_csv(report: CorpusReport) -> str:
    """One CSV row per (record, fitted rank)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "network",
            "node",
            "dims",
            "rank",
            "max_error",
            "frob_error",
            "minimal_rank",
            "general_params",
            "cp_params",
            "source",
        ]
    )
    for rec in report.records:
        for entry in rec.entries:
            writer.writerow(
                [
                    rec.network,
                    rec.node,
                    _fmt_dims(rec.dims),
                    entry.rank,
                    repr(entry.max_error),
                    repr(entry.frob_error),
                    _fmt_opt_int(rec.minimal_rank),
                    rec.general_params,
                    _fmt_opt_int(rec.cp_params),
                    rec.source,
                ]
            )
    return buf.getvalue()


def curve_csv(report: CorpusReport) -> str:
    """Percentage-vs-rank curve rows: rank,percentage,control_percentage."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "percentage", "control_percentage"])
    controls = dict(report.control_curve)
    for rank, pct in report.curve:
        control = controls.get(rank)
        writer.writerow([rank, repr(pct), "" if control is None else repr(control)])
    return buf.getvalue()


def profile_csv(profile: RankProfile, control: RankProfile | None = None) -> str:
    """Per-rank max errors for one CPT, with optional control column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "max_error", "control_max_error"])
    for i, entry in enumerate(profile.entries):
        control_err = repr(control.entries[i].max_error) if control else ""
        writer.writerow([entry.rank, repr(entry.max_error), control_err])
    return buf.getvalue()


def _report_to_dict(report: CorpusReport) -> dict:
    return {
        "config": report.config,
        "records": [
            {
                "network": r.network,
                "node": r.node,
                "dims": list(r.dims),
                "analyzed_dims": list(r.analyzed_dims),
                "source": r.source,
                "control_seed": r.control_seed,
                "minimal_rank": r.minimal_rank,
                "general_params": r.general_params,
                "cp_params": r.cp_params,
                "entries": [
                    {
                        "rank": e.rank,
                        "max_error": e.max_error,
                        "frob_error": e.frob_error,
                        "iterations": e.iterations,
                        "converged": e.converged,
                        "start_kind": e.start_kind,
                        "start_index": e.start_index,
                    }
                    for e in r.entries
                ],
            }
            for r in report.records
        ],
        "curve": [[rank, pct] for rank, pct in report.curve],
        "control_curve": [[rank, pct] for rank, pct in report.control_curve],
        "file_errors": [[path, msg] for path, msg in report.file_errors],
    }


def _report_from_dict(obj: dict) -> CorpusReport:
    records = tuple(
        CorpusRecord(
            network=r["network"],
            node=r["node"],
            dims=tuple(r["dims"]),
            analyzed_dims=tuple(r["analyzed_dims"]),
            source=r["source"],
            control_seed=r["control_seed"],
            minimal_rank=r["minimal_rank"],
            general_params=r["general_params"],
            cp_params=r["cp_params"],
            entries=tuple(
                ProfileEntry(
                    rank=e["rank"],
                    max_error=e["max_error"],
                    frob_error=e["frob_error"],
                    iterations=e["iterations"],
                    converged=e["converged"],
                    start_kind=e["start_kind"],
                    start_index=e["start_index"],
                )
                for e in r["entries"]
            ),
        )
        for r in obj["records"]
    )
    return CorpusReport(
        records=records,
        curve=tuple((int(r), float(p)) for r, p in obj["curve"]),
        control_curve=tuple((int(r), float(p)) for r, p in obj["control_curve"]),
        config=obj["config"],
        file_errors=tuple((p, m) for p, m in obj["file_errors"]),
    )


def report_json(report: CorpusReport) -> str:
    return json.dumps(_report_to_dict(report), indent=1)


def load_report_json(path) -> CorpusReport:
    return _report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def emit_report(report: CorpusReport, format: str, path) -> None:
    """Write the per-record CSV or the full JSON report to ``path``."""
    if format == "csv":
        text = records_csv(report)
    elif format == "json":
        text = report_json(report)
    else:
        raise ValueError(f"format must be csv or json, got {format!r}")
    Path(path).write_text(text, encoding="utf-8")


def emit_curve_csv(report: CorpusReport, path) -> None:
    Path(path).write_text(curve_csv(report), encoding="utf-8")


def emit_profile_csv(profile: RankProfile, control: RankProfile | None, path) -> None:
    Path(path).write_text(profile_csv(profile, control), encoding="utf-8")
