"""Experiment orchestration: cell grid, worker pool, persistence, replay.

A run expands its config into cells (family, d, k, N, p), computes each cell
in a spawned worker process, and persists two artifacts atomically in the
output directory:

* ``results.csv``  -- one row per cell with the pinned column set;
* ``results.json`` -- sidecar with the full config, its hash, field metadata,
  and per-record extras needed for replay and gating.

Cell seeds are derived by hashing (master seed, cell id), so records are
independent of completion order and worker count.  Reruns in the same output
directory resume: cells already present in a sidecar with a matching config
hash are not recomputed.  ``replay`` recomputes records from a prior sidecar
and demands bit-identical lhs values.
"""

from __future__ import annotations

import os

# BLAS threading is pinned before numpy loads anywhere in this process tree;
# single-threaded kernels keep results identical across worker counts and
# avoid oversubscription (each worker is already a separate process).
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_var, "1")

import hashlib
import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .config import ExperimentConfig, config_from_dict, config_hash, config_to_dict
from .sampler import ENCODING_NAME, TRANSFORM_NAME

CSV_HEADER = ("family", "d", "k", "N", "p", "samples", "seed", "lhs", "stderr",
              "rhs_max", "best_partition", "ratio", "runtime_ms")

_U64 = 0xFFFFFFFFFFFFFFFF


class RunError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Cell:
    family: str
    d: int
    k: int
    N: int
    p: float

    def cell_id(self) -> str:
        return f"{self.family}:d{self.d}:k{self.k}:N{self.N}:p{self.p:g}"


def parse_cell(text: str) -> Cell:
    """Inverse of :meth:`Cell.cell_id`, e.g. ``dense-gaussian:d1:k2:N8:p4``."""
    parts = text.split(":")
    if len(parts) != 5:
        raise RunError(f"cell id {text!r} must look like family:d1:k2:N8:p4")
    family = parts[0]
    try:
        prefixes = ("d", "k", "N", "p")
        numbers = []
        for prefix, token in zip(prefixes, parts[1:]):
            if not token.startswith(prefix):
                raise ValueError(token)
            numbers.append(token[len(prefix):])
        return Cell(family, int(numbers[0]), int(numbers[1]), int(numbers[2]),
                    float(numbers[3]))
    except ValueError as err:
        raise RunError(f"malformed cell id {text!r}") from err


def cell_seed(master_seed: int, cell: Cell) -> int:
    digest = hashlib.sha256(f"{master_seed & _U64}|{cell.cell_id()}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def enumerate_cells(config: ExperimentConfig) -> list[Cell]:
    return [Cell(family, d, k, n, p)
            for family in config.families
            for d in config.grid_d
            for k in config.grid_k
            for n in config.grid_n
            for p in config.grid_p]


def _cell_sort_key(config: ExperimentConfig):
    family_rank = {name: i for i, name in enumerate(config.families)}

    def key(record: dict):
        return (family_rank.get(record["family"], len(family_rank)),
                record["family"], record["d"], record["k"], record["N"], record["p"])

    return key


def compute_cell(config: ExperimentConfig, cell: Cell) -> dict:
    """Compute one record; pure function of (config, cell)."""
    from .estimator import (RandomTensorSpec, bound_experiment,
                            decoupling_experiment, khintchine_experiment)
    from .families import default_signs, generate_family

    seed = cell_seed(config.seed, cell)
    tol = config.tolerances
    started = time.perf_counter()
    h = generate_family(cell.family, cell.k, cell.d, cell.N, seed,
                        na=config.na, nb=config.nb, density=config.density,
                        support_budget=config.support_budget)
    spec = RandomTensorSpec(h, default_signs(cell.k))

    extra: dict = {}
    if config.command == "decoupling":
        report = decoupling_experiment(spec, cell.p, config.samples, seed,
                                       tol.sample_norm)
        lhs, stderr = report.lhs.mean_p_norm, report.lhs.stderr
        rhs_max = report.rhs
        best_partition = ""
        if report.combined_stderr > 0:
            ratio = report.slack / report.combined_stderr
        else:
            ratio = math.inf if report.slack >= 0 else -math.inf
        extra = {
            "slack": report.slack,
            "combined_stderr": report.combined_stderr,
            "rhs_over_lhs": report.ratio,
            "rhs_over_lhs_stderr": report.ratio_stderr,
            "term_means": [t.mean_p_norm for t in report.rhs_terms],
            "flagged": report.lhs.flagged,
        }
    else:
        runner = khintchine_experiment if config.command == "khintchine" else bound_experiment
        report = runner(spec, cell.p, config.samples, seed, tol.sample_norm,
                        tol.norm, tol.dense_cap)
        lhs, stderr = report.lhs.mean_p_norm, report.lhs.stderr
        rhs_max = report.rhs_max
        best_partition = report.best_partition.describe()
        ratio = report.ratio
        extra = {"denominator": report.denominator, "flagged": report.lhs.flagged}

    runtime_ms = int(round((time.perf_counter() - started) * 1000))
    return {
        "family": cell.family, "d": cell.d, "k": cell.k, "N": cell.N, "p": cell.p,
        "samples": config.samples, "seed": seed, "lhs": lhs, "stderr": stderr,
        "rhs_max": rhs_max, "best_partition": best_partition, "ratio": ratio,
        "runtime_ms": runtime_ms, "extra": extra,
    }


def _worker(payload: tuple[dict, tuple]) -> dict:
    config_doc, cell_tuple = payload
    config = config_from_dict(config_doc)
    return compute_cell(config, Cell(*cell_tuple))


# --- persistence -----------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(records: list[dict]) -> str:
    lines = [",".join(CSV_HEADER)]
    for rec in records:
        row = []
        for column in CSV_HEADER:
            value = rec[column]
            row.append(repr(value) if isinstance(value, float) else str(value))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _sidecar_doc(config: ExperimentConfig, records: list[dict],
                 gates: Optional[dict] = None) -> dict:
    return {
        "version": __version__,
        "config": config_to_dict(config),
        "config_hash": config_hash(config),
        "field_metadata": {"transform": TRANSFORM_NAME, "encoding": ENCODING_NAME,
                           "streams": "sample i uses (2i, 2i+1) for (g, g~)"},
        "gates": gates or {},
        "records": records,
    }


def _write_outputs(config: ExperimentConfig, records: list[dict],
                   gates: Optional[dict] = None) -> None:
    os.makedirs(config.output, exist_ok=True)
    _atomic_write(os.path.join(config.output, "results.csv"), _csv_text(records))
    _atomic_write(os.path.join(config.output, "results.json"),
                  json.dumps(_sidecar_doc(config, records, gates), indent=1))


def _load_sidecar(directory: str) -> Optional[dict]:
    path = os.path.join(directory, "results.json")
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --- summaries and gates -----------------------------------------------------------


def _slope_stats(points: list[tuple[float, float]]) -> Optional[tuple[float, float]]:
    """OLS slope and its standard error; None when the fit is degenerate."""
    if len(points) < 3:
        return None
    xs = [x for x, _ in points]
    ys = [y for _, y in points]
    if max(xs) - min(xs) <= 0:
        return None
    from scipy import stats as scipy_stats

    fit = scipy_stats.linregress(xs, ys)
    if not math.isfinite(fit.stderr):
        return None
    return float(fit.slope), float(fit.stderr)


def summarize(config: ExperimentConfig, records: list[dict]) -> tuple[dict, list[str]]:
    """Per-command gate booleans plus human-readable summary lines."""
    gates: dict[str, bool] = {}
    lines: list[str] = []
    if config.command in ("bound-sweep", "khintchine"):
        finite = all(math.isfinite(rec["ratio"]) for rec in records)
        gates["ratios-finite"] = finite
        for k in sorted({rec["k"] for rec in records}):
            sub = [rec for rec in records if rec["k"] == k]
            max_ratio = max(rec["ratio"] for rec in sub)
            points = [(math.log(math.log(rec["N"])), rec["ratio"]) for rec in sub]
            fit = _slope_stats(points)
            if fit is None:
                lines.append(f"k={k}: max ratio {max_ratio:.4f}; slope n/a "
                             f"(needs >=3 points over >=2 values of N)")
            else:
                slope, stderr = fit
                ok = slope <= 2.0 * stderr
                gates[f"no-growth-trend-k{k}"] = ok
                lines.append(f"k={k}: max ratio {max_ratio:.4f}; "
                             f"slope of ratio vs log log N = {slope:+.4f} "
                             f"(se {stderr:.4f}) -> {'ok' if ok else 'GROWTH'}")
    elif config.command == "decoupling":
        ok_slack = all(rec["ratio"] >= -3.0 for rec in records)
        gates["slack-above-minus-3-stderr"] = ok_slack
        k1 = [rec for rec in records if rec["k"] == 1]
        if k1:
            ok_pi = all(
                abs(rec["extra"]["rhs_over_lhs"] - math.pi / 2)
                <= 3.0 * max(rec["extra"]["rhs_over_lhs_stderr"], 1e-12)
                for rec in k1)
            gates["k1-ratio-is-pi-over-2"] = ok_pi
        for rec in records:
            lines.append(f"{Cell(rec['family'], rec['d'], rec['k'], rec['N'], rec['p']).cell_id()}: "
                         f"slack {rec['extra']['slack']:+.4f} "
                         f"({rec['ratio']:+.2f} combined stderr)")
    return gates, lines


# --- run entry points ------------------------------------------------------------


@dataclass
class RunResult:
    records: list[dict] = field(default_factory=list)
    gates: dict = field(default_factory=dict)
    summary_lines: list[str] = field(default_factory=list)
    figures: list[str] = field(default_factory=list)
    exit_code: int = 0


def _run_verify(config: ExperimentConfig) -> RunResult:
    from .verify import run_verify_merging, run_verify_wick

    if config.command == "verify-wick":
        results = run_verify_wick()
    else:
        trials = max(config.samples, 1000)
        results = run_verify_merging(trials=trials, seed=config.seed)
    gates = {g.name: g.passed for g in results}
    lines = [f"{g.name}: {'pass' if g.passed else 'FAIL'} "
             f"({g.cases} cases; {g.detail})" for g in results]
    detail = [{"name": g.name, "passed": g.passed, "cases": g.cases, "detail": g.detail}
              for g in results]
    records: list[dict] = []
    _write_outputs(config, records, gates={"detail": detail, **gates})
    return RunResult(records, gates, lines, [], 0 if all(gates.values()) else 1)


def _pool_map(config: ExperimentConfig, cells: list[Cell], workers: int,
              existing: list[dict] | None = None) -> list[dict]:
    payloads = [(config_to_dict(config), (c.family, c.d, c.k, c.N, c.p)) for c in cells]
    records = []
    if not payloads:
        return records
    kept = list(existing or [])
    context = multiprocessing.get_context("spawn")
    workers = max(1, min(workers, len(payloads)))
    with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
        futures = {pool.submit(_worker, payload): payload for payload in payloads}
        for future in as_completed(futures):
            records.append(future.result())
            # incremental, resumable persistence after each completed cell
            merged = sorted(kept + records, key=_cell_sort_key(config))
            _write_outputs(config, merged)
    return records


def _run_experiment(config: ExperimentConfig, workers: int,
                    only_cell: Optional[str]) -> RunResult:
    cells = enumerate_cells(config)
    if only_cell is not None:
        wanted = parse_cell(only_cell)
        cells = [c for c in cells if c == wanted]
        if not cells:
            raise RunError(f"cell {only_cell!r} is not part of this config's grid")

    existing: list[dict] = []
    sidecar = _load_sidecar(config.output)
    if sidecar is not None:
        if sidecar.get("config_hash") != config_hash(config):
            raise RunError(
                f"output directory {config.output!r} holds results for a different "
                f"config; refusing to mix (use a fresh --out)")
        have = {(r["family"], r["d"], r["k"], r["N"], r["p"]) for r in sidecar["records"]}
        existing = list(sidecar["records"])
        cells = [c for c in cells if (c.family, c.d, c.k, c.N, c.p) not in have]

    fresh = _pool_map(config, cells, workers, existing)
    records = sorted(existing + fresh, key=_cell_sort_key(config))
    gates, lines = summarize(config, records)
    _write_outputs(config, records, gates)

    from .report import render_figures
    figures = render_figures(config.command, records, config.output)

    exit_code = 0 if all(gates.values()) else 1
    return RunResult(records, gates, lines, figures, exit_code)


def _float_identical(a: float, b: float) -> bool:
    import struct

    return struct.pack("<d", float(a)) == struct.pack("<d", float(b))


def _run_replay(config: ExperimentConfig, workers: int,
                only_cell: Optional[str]) -> RunResult:
    sidecar = _load_sidecar(config.replay_source)
    if sidecar is None:
        raise RunError(f"no results.json under {config.replay_source!r}")
    stored = config_from_dict(sidecar["config"])
    if config_hash(stored) != sidecar.get("config_hash"):
        raise RunError("sidecar config hash mismatch; refusing to replay corrupted results")

    records = sidecar["records"]
    if only_cell is not None:
        wanted = parse_cell(only_cell)
        records = [r for r in records
                   if Cell(r["family"], r["d"], r["k"], r["N"], r["p"]) == wanted]
        if not records:
            raise RunError(f"cell {only_cell!r} not present in the stored results")

    cells = [Cell(r["family"], r["d"], r["k"], r["N"], r["p"]) for r in records]
    recomputed = _replay_pool(stored, cells, workers)
    by_cell = {(r["family"], r["d"], r["k"], r["N"], r["p"]): r for r in recomputed}

    lines = []
    all_match = True
    checks = []
    for original in records:
        key = (original["family"], original["d"], original["k"], original["N"], original["p"])
        fresh = by_cell[key]
        match = _float_identical(original["lhs"], fresh["lhs"])
        all_match &= match
        checks.append({"cell": Cell(*key).cell_id(), "stored_lhs": original["lhs"],
                       "replayed_lhs": fresh["lhs"], "bit_identical": match})
        lines.append(f"{Cell(*key).cell_id()}: lhs {fresh['lhs']!r} "
                     f"{'== stored' if match else 'DIFFERS from stored'}")

    gates = {"replay-bit-identical": all_match}
    os.makedirs(config.output, exist_ok=True)
    _atomic_write(os.path.join(config.output, "replay.json"),
                  json.dumps({"source": config.replay_source, "checks": checks,
                              "gates": gates}, indent=1))
    return RunResult(recomputed, gates, lines, [], 0 if all_match else 1)


def _replay_pool(stored: ExperimentConfig, cells: list[Cell], workers: int) -> list[dict]:
    payloads = [(config_to_dict(stored), (c.family, c.d, c.k, c.N, c.p)) for c in cells]
    context = multiprocessing.get_context("spawn")
    workers = max(1, min(workers, len(payloads)))
    records = []
    with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
        for record in pool.map(_worker, payloads):
            records.append(record)
    return records


def run(config: ExperimentConfig, workers: int = 1,
        only_cell: Optional[str] = None) -> RunResult:
    if config.command in ("verify-wick", "verify-merging"):
        return _run_verify(config)
    if config.command == "replay":
        return _run_replay(config, workers, only_cell)
    return _run_experiment(config, workers, only_cell)
