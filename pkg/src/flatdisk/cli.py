from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .billiard import BilliardState, BilliardTable, trace
from .bkm import report_to_csv, run_bkm, write_csv
from .config import AppConfig, load_config
from .disk import CutSystem, FlatDisk, build_disk, compute_cut_system, cut_and_develop, load_spec
from .errors import (
    ArithmeticDomainError,
    ConfigError,
    ConsistencyError,
    GuardrailError,
    IrrationalDisk,
    SpecError,
    TraceError,
)
from .guardrails import (
    clamp_limit,
    ensure_non_negative,
    ensure_positive,
    parse_direction,
    parse_lengths,
    parse_point,
    sanitize_face_id,
)
from .logging_utils import configure_logging
from .surface import (
    angle_label,
    build_invariant_surface,
    check_euler,
    check_fibers,
    double,
    euler_char_formula,
    genus_from_chi,
    ramification_report,
    stratum_label,
    surface_to_json,
)
from .unfolding import render_svg, surface_net, unfold

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONSISTENCY = 1
EXIT_SPEC = 2
EXIT_IRRATIONAL = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flatdisk", description="Billiards and invariant surfaces of flat disks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="YAML configuration file (default: $FLATDISK_CONFIG)")
    parser.add_argument(
        "--log-level",
        choices=["debug", "info", "warning", "error", "critical"],
        help="override observability.log_level",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    validate = sub.add_parser("validate", help="check a disk spec and print its cone points")
    validate.add_argument("spec")

    for name, help_text in (("trace", "trace a billiard trajectory"), ("unfold", "unfold a trajectory to SVG")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("spec")
        cmd.add_argument("--start", required=True, help="FACE,X,Y")
        cmd.add_argument("--dir", required=True, help="radians, or p/q meaning (p/q)·π")
        cmd.add_argument("--max-events", type=int, default=100)
        cmd.add_argument("--max-length", type=float)
        if name == "unfold":
            cmd.add_argument("--svg", required=True)

    surface = sub.add_parser("surface", help="build the invariant translation surface")
    surface.add_argument("spec")
    surface.add_argument("--json")
    surface.add_argument("--svg")

    bkm = sub.add_parser("bkm", help="fraction of directions staying away from singular points")
    bkm.add_argument("spec")
    bkm.add_argument("--point", required=True, help="FACE,X,Y")
    bkm.add_argument("--delta", type=float, required=True)
    bkm.add_argument("--lengths", required=True, help="T1,T2,...")
    bkm.add_argument("--samples", type=int)
    bkm.add_argument("--seed", type=int)
    bkm.add_argument("--workers", type=int)
    bkm.add_argument("--csv")
    return parser


def _load(path: str, config: AppConfig) -> tuple[FlatDisk, CutSystem]:
    disk = build_disk(load_spec(path, config.tolerances))
    return disk, compute_cut_system(disk)


def _start_state(disk: FlatDisk, raw_point: str, raw_dir: str) -> BilliardState:
    face, x, y = parse_point(raw_point)
    sanitize_face_id(face, set(disk.polygons))
    return BilliardState.from_angle(face, (x, y), parse_direction(raw_dir))


def _trace_limits(args: argparse.Namespace, config: AppConfig) -> tuple[int, float]:
    max_events = clamp_limit(args.max_events, config.limits.max_events)
    max_length = ensure_positive(args.max_length, "max-length") if args.max_length is not None else float("inf")
    return max_events, max_length


def _cmd_validate(args: argparse.Namespace, config: AppConfig) -> int:
    disk = build_disk(load_spec(args.spec, config.tolerances))
    print(f"disk: {disk.disk_id}")
    print(f"{'class':<8}{'kind':<10}{'angle':<14}singular")
    for vc in disk.vertex_classes:
        flag = "yes" if vc.singular else "no"
        print(f"{vc.name:<8}{vc.kind:<10}{angle_label(vc.angle, vc.rational):<14}{flag}")
    print(f"gauss-bonnet residual: {abs(disk.gauss_bonnet_residual):.3e}")
    print(f"area: {disk.area:.9f}")
    return EXIT_OK


def _cmd_trace(args: argparse.Namespace, config: AppConfig) -> int:
    disk, cuts = _load(args.spec, config)
    table = BilliardTable.build(disk, cuts)
    max_events, max_length = _trace_limits(args, config)
    traj = trace(table, _start_state(disk, args.start, args.dir), max_events, max_length)
    print("word: " + " ".join(traj.word))
    print(f"{'#':<6}{'length':<14}{'kind':<12}{'label':<8}{'face':<8}point")
    for i, event in enumerate(traj.events):
        x, y = event.point
        print(
            f"{i:<6}{event.length:<14.9f}{event.kind:<12}{event.label or '-':<8}{event.face:<8}"
            f"({x:.9f}, {y:.9f})"
        )
    reason = traj.termination.reason
    if traj.termination.vertex:
        reason += f" at {traj.termination.vertex}"
    print(f"termination: {reason}")
    print(f"length: {traj.length:.9f}")
    return EXIT_OK


def _cmd_unfold(args: argparse.Namespace, config: AppConfig) -> int:
    disk, cuts = _load(args.spec, config)
    table = BilliardTable.build(disk, cuts)
    max_events, max_length = _trace_limits(args, config)
    traj = trace(table, _start_state(disk, args.start, args.dir), max_events, max_length)
    unfolding = unfold(cut_and_develop(disk, cuts), traj)
    Path(args.svg).write_text(render_svg(unfolding))
    print(f"copies: {len(unfolding.placements)}")
    print(f"max deviation: {unfolding.max_deviation:.3e}")
    print(f"projection error: {unfolding.projection_error:.3e}")
    return EXIT_OK


def _cmd_surface(args: argparse.Namespace, config: AppConfig) -> int:
    disk, cuts = _load(args.spec, config)
    surface = build_invariant_surface(disk, cuts)
    formula = euler_char_formula(surface.data)
    direct = check_euler(surface)
    check_fibers(surface)
    closed = double(disk)
    if closed.euler_characteristic != 2:
        raise ConsistencyError(f"Doubling has chi={closed.euler_characteristic}, expected 2")
    print(
        f"l={surface.data.l}, |G|={surface.group.order}, "
        f"chi={formula} (formula) = {direct} (direct), genus={genus_from_chi(direct)}"
    )
    print(f"stratum: {stratum_label(surface)}")
    print(f"area: {surface.area:.9f} = {2 * surface.data.l} x {disk.area:.9f}")
    report = ramification_report(surface.data)
    print(f"{'point':<8}{'fiber':<8}index")
    for fiber in report.fibers:
        print(f"{fiber.point:<8}{fiber.size:<8}{fiber.index}")
    print(f"deg R={report.deg_r}, 2l - deg R={report.chi}")
    print(f"doubling: chi={closed.euler_characteristic}, area={closed.area:.9f}")
    if args.json:
        Path(args.json).write_text(surface_to_json(surface))
    if args.svg:
        Path(args.svg).write_text(render_svg(surface_net(surface)))
    return EXIT_OK


def _cmd_bkm(args: argparse.Namespace, config: AppConfig) -> int:
    disk, cuts = _load(args.spec, config)
    table = BilliardTable.build(disk, cuts)
    face, x, y = parse_point(args.point)
    sanitize_face_id(face, set(disk.polygons))
    samples = config.bkm.samples if args.samples is None else clamp_limit(args.samples, config.limits.max_samples)
    workers = clamp_limit(args.workers, config.limits.max_workers) if args.workers else config.bkm.workers
    report = run_bkm(
        table,
        face,
        (x, y),
        ensure_non_negative(args.delta, "delta"),
        parse_lengths(args.lengths),
        samples,
        config.bkm.seed if args.seed is None else args.seed,
        workers=workers,
        max_events=config.limits.max_events,
    )
    if args.csv:
        write_csv(report, args.csv)
    else:
        sys.stdout.write(report_to_csv(report))
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "trace": _cmd_trace,
    "unfold": _cmd_unfold,
    "surface": _cmd_surface,
    "bkm": _cmd_bkm,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(args.log_level or config.observability.log_level)
    try:
        return _COMMANDS[args.command](args, config)
    except GuardrailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IrrationalDisk as exc:
        print(f"error: IrrationalDisk: {exc}", file=sys.stderr)
        return EXIT_IRRATIONAL
    except (SpecError, TraceError, ArithmeticDomainError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except ConsistencyError as exc:
        log.error("Consistency check failed", exc_info=exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


def main() -> None:
    sys.exit(run_cli())
