"""Benchmark harness: learner timings over a matrix of generated instances."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, fields
from typing import Sequence

from .generators import gen_synthetic_srl
from .learning import LearnerConfig, LearningProblem, learn

__all__ = ["BenchCell", "run_bench", "save_bench", "format_bench"]


@dataclass
class BenchCell:
    n_labels: int
    n_tuples: int
    blocks: int
    objective: str
    optimizer: str
    threads: int
    seed: int
    status: str
    best: float
    iterations: int
    seconds: float
    error: str = ""


def run_bench(
    sizes: Sequence[tuple] = ((50, 60, 2), (200, 120, 4)),
    objectives: Sequence[str] = ("mse",),
    optimizers: Sequence[str] = ("sgd-per-tuple", "sgd-single", "gd"),
    threads: Sequence[int] = (1,),
    seed: int = 0,
    max_outer_iterations: int = 500,
) -> tuple:
    """Run the learner over every combination and collect one row per cell.

    ``sizes`` holds (n_labels, n_tuples, blocks) triples.  Failures inside a
    cell are captured in its ``error`` column instead of aborting the sweep.
    """
    cells = []
    for n_labels, n_tuples, blocks in sizes:
        instance = gen_synthetic_srl(n_labels, seed=seed, n_tuples=n_tuples, blocks=blocks)
        problem = LearningProblem(instance.db, instance.labels)
        for objective in objectives:
            for optimizer in optimizers:
                for n_threads in threads:
                    cell = BenchCell(
                        n_labels=n_labels,
                        n_tuples=n_tuples,
                        blocks=blocks,
                        objective=objective,
                        optimizer=optimizer,
                        threads=n_threads,
                        seed=seed,
                        status="",
                        best=float("nan"),
                        iterations=0,
                        seconds=0.0,
                    )
                    started = time.perf_counter()
                    try:
                        result = learn(
                            problem,
                            LearnerConfig(
                                objective=objective,
                                optimizer=optimizer,
                                threads=n_threads,
                                seed=seed,
                                max_outer_iterations=max_outer_iterations,
                            ),
                        )
                        cell.status = result.status
                        cell.best = result.best
                        cell.iterations = result.iterations
                    except Exception as exc:  # keep sweeping, note the failure
                        cell.status = "error"
                        cell.error = f"{type(exc).__name__}: {exc}"
                    cell.seconds = time.perf_counter() - started
                    cells.append(cell)
    return tuple(cells)


def save_bench(cells: Sequence[BenchCell], path) -> None:
    names = [f.name for f in fields(BenchCell)]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(names)
        for cell in cells:
            writer.writerow([getattr(cell, name) for name in names])


def format_bench(cells: Sequence[BenchCell]) -> str:
    header = f"{'labels':>7} {'tuples':>7} {'blocks':>6} {'objective':>9} {'optimizer':>13} {'thr':>3} {'status':>14} {'best':>12} {'iters':>6} {'sec':>8}"
    rows = [header]
    for c in cells:
        rows.append(
            f"{c.n_labels:>7} {c.n_tuples:>7} {c.blocks:>6} {c.objective:>9} "
            f"{c.optimizer:>13} {c.threads:>3} {c.status:>14} {c.best:>12.6g} "
            f"{c.iterations:>6} {c.seconds:>8.3f}"
            + (f"  {c.error}" if c.error else "")
        )
    return "\n".join(rows)
