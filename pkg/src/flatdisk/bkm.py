"""Fraction of directions whose trajectory keeps a distance from the singular set."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .billiard import BilliardState, BilliardTable, batch_prefix_minima, validate_start
from .errors import GuardrailError
from .logging_utils import log_extra

log = logging.getLogger(__name__)

CSV_HEADER = ("T", "fraction", "samples", "delta", "seed")


@dataclass(frozen=True)
class BkmReport:
    disk_id: str
    face: str
    point: tuple[float, float]
    delta: float
    lengths: tuple[float, ...]
    samples: int
    seed: int
    fractions: tuple[float, ...]


def sample_directions(samples: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, samples)


def _chunk_minima(
    args: tuple[BilliardTable, str, tuple[float, float], np.ndarray, tuple[float, ...], int],
) -> np.ndarray:
    table, face, point, thetas, lengths, max_events = args
    return batch_prefix_minima(table, face, point, thetas, lengths, max_events)


def run_bkm(
    table: BilliardTable,
    face: str,
    point: Sequence[float],
    delta: float,
    lengths: Sequence[float],
    samples: int,
    seed: int,
    workers: int = 1,
    max_events: int = 1_000_000,
) -> BkmReport:
    if delta < 0:
        raise GuardrailError("delta must be non-negative")
    if samples < 1:
        raise GuardrailError("samples must be at least 1")
    if not lengths:
        raise GuardrailError("At least one length is required")
    ordered = tuple(sorted(set(float(t) for t in lengths)))
    q = (float(point[0]), float(point[1]))
    validate_start(table, BilliardState.from_angle(face, q, 0.0))

    thetas = sample_directions(samples, seed)
    chunks = [c for c in np.array_split(thetas, max(1, workers)) if len(c)]
    jobs = [(table, face, q, chunk, ordered, max_events) for chunk in chunks]
    log.info(
        "BKM run started",
        extra=log_extra(disk_id=table.disk_id, samples=samples, seed=seed, workers=workers),
    )
    if workers <= 1:
        results = [_chunk_minima(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_minima, jobs))

    minima = np.vstack(results)
    counts = (minima >= delta).sum(axis=0)
    fractions = tuple(float(c) / samples for c in counts)
    return BkmReport(
        disk_id=table.disk_id,
        face=face,
        point=q,
        delta=float(delta),
        lengths=ordered,
        samples=samples,
        seed=seed,
        fractions=fractions,
    )


def report_rows(report: BkmReport) -> list[tuple[str, str, str, str, str]]:
    return [
        (f"{t:g}", f"{fraction:.6f}", str(report.samples), f"{report.delta:g}", str(report.seed))
        for t, fraction in zip(report.lengths, report.fractions)
    ]


def write_csv(report: BkmReport, target: str | Path | IO[str]) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as handle:
            write_csv(report, handle)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(report_rows(report))


def report_to_csv(report: BkmReport) -> str:
    buffer = io.StringIO()
    write_csv(report, buffer)
    return buffer.getvalue()
