"""Expander-versus-grouped sparsity sweep."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

from .arch import desk_cnn, flop_count, param_count
from .data import Dataset
from .errors import DivergenceError, InvalidSpecError
from .model import network_sensitivity
from .trainer import TrainConfig, summarize, train

log = logging.getLogger(__name__)

COMPARE_COLUMNS = ("factor", "kind", "graph_seed", "init_seed", "final_test_acc", "params",
                   "flops", "sensitivity_fraction", "wall_seconds")
KINDS = ("expander", "grouped")


@dataclass
class SweepSpec:
    factors: Sequence[int] = (1, 2, 4, 8)
    kinds: Sequence[str] = KINDS
    seeds: Sequence[int] = (0, 1, 2)
    config: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.02))
    widths: Sequence[int] = (32, 64, 128, 128)
    arch_fn: Callable = desk_cnn

    def __post_init__(self):
        if not self.factors or any(f < 1 for f in self.factors):
            raise InvalidSpecError("factors must be >= 1")
        for k in self.kinds:
            if k not in KINDS:
                raise InvalidSpecError(f"unknown kind {k!r}")
        c1, c2, c3, c4 = self.widths
        for f in self.factors:
            for n in (c1, c2, c3, c4):
                if n % f:
                    raise InvalidSpecError(f"factor {f} does not divide channel count {n}")

    def cells(self):
        for f in self.factors:
            for k in self.kinds:
                for s in self.seeds:
                    yield f, k, s


def _run_cell(factor, kind, seed, spec: SweepSpec, train_data: Dataset, test_data: Dataset) -> dict:
    c, h, w = train_data.shape
    # graph and init seeds are shared across kinds so only the connectivity differs
    arch = spec.arch_fn(factor, kind, graph_seed=seed, num_classes=train_data.num_classes,
                        widths=tuple(spec.widths), in_channels=c, spatial=h)
    cfg = TrainConfig(**{**asdict(spec.config), "seed": seed})
    row = {
        "factor": factor, "kind": kind, "graph_seed": seed, "init_seed": seed,
        "params": param_count(arch), "flops": flop_count(arch, (c, h, w)),
        "sensitivity_fraction": network_sensitivity(arch),
    }
    start = time.perf_counter()
    try:
        _, hist = train(arch, train_data, cfg, test_data)
        row["final_test_acc"] = hist[-1].test_acc if hist else float("nan")
    except DivergenceError as exc:
        log.warning("factor=%s kind=%s seed=%s diverged: %s", factor, kind, seed, exc)
        row["final_test_acc"] = float("nan")
        row["error"] = str(exc)
    row["wall_seconds"] = time.perf_counter() - start
    return row


def run_sweep(spec: SweepSpec, train_data: Dataset, test_data: Dataset,
              jobs: int = 1, progress: Optional[Callable[[dict], None]] = None) -> list[dict]:
    """Train every (factor, kind, seed) cell; rows come back in sweep order."""
    cells = list(spec.cells())
    if jobs <= 1:
        rows = []
        for cell in cells:
            rows.append(_run_cell(*cell, spec, train_data, test_data))
            if progress:
                progress(rows[-1])
        return rows
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_cell, *cell, spec, train_data, test_data) for cell in cells]
        rows = [f.result() for f in futures]
    if progress:
        for r in rows:
            progress(r)
    return rows


def summary_rows(rows: Sequence[dict]) -> list[dict]:
    """Mean and stddev of final accuracy per (factor, kind)."""
    out = []
    keys = []
    for r in rows:
        if (r["factor"], r["kind"]) not in keys:
            keys.append((r["factor"], r["kind"]))
    for f, k in keys:
        group = [r for r in rows if r["factor"] == f and r["kind"] == k]
        accs = [r["final_test_acc"] for r in group if r["final_test_acc"] == r["final_test_acc"]]
        if not accs:
            continue
        st = summarize(accs)
        for stat in ("mean", "stddev"):
            out.append({
                "factor": f, "kind": k, "graph_seed": stat, "init_seed": stat,
                "final_test_acc": st[stat], "params": group[0]["params"],
                "flops": group[0]["flops"],
                "sensitivity_fraction": sum(r["sensitivity_fraction"] for r in group) / len(group),
                "wall_seconds": sum(r["wall_seconds"] for r in group) / len(group),
            })
    return out


def write_compare_csv(rows: Sequence[dict], path, with_summary: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARE_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
        if with_summary:
            for r in summary_rows(rows):
                writer.writerow(r)
