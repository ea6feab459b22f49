from __future__ import annotations

import asyncio
import logging
import uuid
from typing import Any

from fastmcp import FastMCP

from .billiard import BilliardState, BilliardTable, trace
from .bkm import report_rows, run_bkm
from .config import AppConfig, load_config
from .disk import CutSystem, FlatDisk, build_disk, compute_cut_system, cut_and_develop, load_spec
from .guardrails import clamp_limit, ensure_non_negative, ensure_positive, sanitize_face_id
from .logging_utils import configure_logging, log_extra
from .surface import (
    angle_label,
    build_invariant_surface,
    check_euler,
    check_fibers,
    cone_angles,
    euler_char_formula,
    genus_from_chi,
    ramification_report,
    stratum,
)
from .unfolding import render_svg, unfold

DEFAULT_MAX_EVENTS = 1000


def _request_id(value: str | None = None) -> str:
    return value or str(uuid.uuid4())


class DiskToolService:
    """Stateless operations behind the MCP tools; every call receives the disk spec itself."""

    def __init__(self, config: AppConfig) -> None:
        self._config = config
        self._log = logging.getLogger(__name__)

    def _prepare(self, spec: dict[str, Any]) -> tuple[FlatDisk, CutSystem]:
        disk = build_disk(load_spec(spec, self._config.tolerances))
        return disk, compute_cut_system(disk)

    def _trace(
        self,
        disk: FlatDisk,
        cuts: CutSystem,
        face: str,
        x: float,
        y: float,
        theta: float,
        max_events: int | None,
        max_length: float | None,
    ):
        sanitize_face_id(face, set(disk.polygons))
        requested = DEFAULT_MAX_EVENTS if max_events is None else max_events
        events = clamp_limit(requested, self._config.limits.max_events)
        length = ensure_positive(max_length, "max_length") if max_length is not None else float("inf")
        table = BilliardTable.build(disk, cuts)
        return trace(table, BilliardState.from_angle(face, (x, y), theta), events, length)

    def validate_disk(self, spec: dict[str, Any], request_id: str | None = None) -> dict[str, Any]:
        disk = build_disk(load_spec(spec, self._config.tolerances))
        self._log.info("validate_disk", extra=log_extra(request_id=request_id, disk_id=disk.disk_id))
        return {
            "disk_id": disk.disk_id,
            "vertex_classes": [
                {
                    "name": vc.name,
                    "kind": vc.kind,
                    "angle": angle_label(vc.angle, vc.rational),
                    "singular": vc.singular,
                }
                for vc in disk.vertex_classes
            ],
            "gauss_bonnet_residual": abs(disk.gauss_bonnet_residual),
            "area": disk.area,
        }

    def trace_trajectory(
        self,
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        theta: float,
        max_events: int | None = None,
        max_length: float | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        disk, cuts = self._prepare(spec)
        traj = self._trace(disk, cuts, face, x, y, theta, max_events, max_length)
        self._log.info(
            "trace_trajectory",
            extra=log_extra(request_id=request_id, disk_id=disk.disk_id, events=len(traj.events)),
        )
        return {
            "word": list(traj.word),
            "events": [
                {
                    "length": e.length,
                    "kind": e.kind,
                    "label": e.label,
                    "face": e.face,
                    "point": list(e.point),
                }
                for e in traj.events
            ],
            "termination": traj.termination.reason,
            "singular_vertex": traj.termination.vertex,
            "length": traj.length,
        }

    def unfold_trajectory(
        self,
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        theta: float,
        max_events: int | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        disk, cuts = self._prepare(spec)
        traj = self._trace(disk, cuts, face, x, y, theta, max_events, None)
        unfolding = unfold(cut_and_develop(disk, cuts), traj)
        self._log.info(
            "unfold_trajectory",
            extra=log_extra(request_id=request_id, disk_id=disk.disk_id, copies=len(unfolding.placements)),
        )
        return {
            "word": list(unfolding.word),
            "copies": len(unfolding.placements),
            "max_deviation": unfolding.max_deviation,
            "projection_error": unfolding.projection_error,
            "svg": render_svg(unfolding),
        }

    def invariant_surface(self, spec: dict[str, Any], request_id: str | None = None) -> dict[str, Any]:
        disk, cuts = self._prepare(spec)
        surface = build_invariant_surface(disk, cuts)
        direct = check_euler(surface)
        check_fibers(surface)
        report = ramification_report(surface.data)
        self._log.info(
            "invariant_surface",
            extra=log_extra(request_id=request_id, disk_id=disk.disk_id, chi=direct),
        )
        return {
            "l": surface.data.l,
            "group_order": surface.group.order,
            "chi_formula": euler_char_formula(surface.data),
            "chi_direct": direct,
            "genus": genus_from_chi(direct),
            "cone_angles": list(cone_angles(surface)),
            "stratum": list(stratum(surface)),
            "area": surface.area,
            "ramification": [
                {"point": f.point, "fiber": f.size, "index": f.index} for f in report.fibers
            ],
            "deg_r": report.deg_r,
        }

    def bkm_experiment(
        self,
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        delta: float,
        lengths: list[float],
        samples: int | None = None,
        seed: int | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        disk, cuts = self._prepare(spec)
        sanitize_face_id(face, set(disk.polygons))
        if samples is not None:
            samples = clamp_limit(samples, self._config.limits.max_samples)
        for t in lengths:
            ensure_positive(t, "length")
        report = run_bkm(
            BilliardTable.build(disk, cuts),
            face,
            (x, y),
            ensure_non_negative(delta, "delta"),
            lengths,
            self._config.bkm.samples if samples is None else samples,
            self._config.bkm.seed if seed is None else seed,
            workers=self._config.bkm.workers,
            max_events=self._config.limits.max_events,
        )
        self._log.info(
            "bkm_experiment",
            extra=log_extra(request_id=request_id, disk_id=disk.disk_id, samples=report.samples, seed=report.seed),
        )
        return {
            "rows": [dict(zip(("T", "fraction", "samples", "delta", "seed"), row)) for row in report_rows(report)],
            "fractions": list(report.fractions),
        }


def build_app(config: AppConfig, service: DiskToolService) -> FastMCP:
    app = FastMCP("flatdisk-mcp")

    @app.tool()
    async def validate_disk(spec: dict[str, Any], request_id: str | None = None) -> dict[str, Any]:
        """Validate a flat disk spec and list its vertex classes with their angles."""
        rid = _request_id(request_id)
        return await asyncio.to_thread(service.validate_disk, spec, rid)

    @app.tool()
    async def trace_trajectory(
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        theta: float,
        max_events: int | None = None,
        max_length: float | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        """Trace a billiard trajectory from (x, y) in polygon ``face`` at angle ``theta`` (radians)."""
        rid = _request_id(request_id)
        return await asyncio.to_thread(
            service.trace_trajectory, spec, face, x, y, theta, max_events, max_length, rid
        )

    @app.tool()
    async def unfold_trajectory(
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        theta: float,
        max_events: int | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        """Trace and unfold a trajectory; returns the word, collinearity checks and an SVG."""
        rid = _request_id(request_id)
        return await asyncio.to_thread(
            service.unfold_trajectory, spec, face, x, y, theta, max_events, rid
        )

    @app.tool()
    async def invariant_surface(spec: dict[str, Any], request_id: str | None = None) -> dict[str, Any]:
        """Build the invariant translation surface of a rational disk: l, group order, chi, genus, stratum."""
        rid = _request_id(request_id)
        return await asyncio.to_thread(service.invariant_surface, spec, rid)

    @app.tool()
    async def bkm_experiment(
        spec: dict[str, Any],
        face: str,
        x: float,
        y: float,
        delta: float,
        lengths: list[float],
        samples: int | None = None,
        seed: int | None = None,
        request_id: str | None = None,
    ) -> dict[str, Any]:
        """Fraction of sampled directions whose trajectory stays delta-far from singular points."""
        rid = _request_id(request_id)
        return await asyncio.to_thread(
            service.bkm_experiment, spec, face, x, y, delta, lengths, samples, seed, rid
        )

    return app


def main() -> None:
    config = load_config()
    configure_logging(config.observability.log_level)
    app = build_app(config, DiskToolService(config))
    app.run()


if __name__ == "__main__":
    main()
