"""Command-line entry point: broker, run, eval, gen-trajectory.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from wingman.agents import circle_trajectory, ellipse_trajectory
from wingman.evaluation import AnnotationError, load_annotations, sync_report
from wingman.protocol import format_float
from wingman.scenario import (
    ConfigError,
    broker_port_default,
    config_from_dict,
    load_config,
    report_summary,
    run_scenario,
    write_report_json,
)
from wingman.transport import Broker, TcpBrokerServer

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wingman",
        description="Human-drone teaming simulator: pose-following drone with "
        "blind-spot cueing and trajectory-sync evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_broker = sub.add_parser("broker", help="run a standalone TCP broker")
    p_broker.add_argument("--host", default="127.0.0.1")
    p_broker.add_argument("--port", type=int, default=None,
                          help="default 1883, or the WINGMAN_BROKER_PORT env var")

    p_run = sub.add_parser("run", help="run a scenario and evaluate synchronization")
    p_run.add_argument("--config", type=Path, default=None, help="JSON scenario file")
    p_run.add_argument("--out", type=Path, default=None,
                       help="directory for trace.csv, report.json, messages.jsonl")
    p_run.add_argument("--mode", choices=["deterministic", "sockets"], default=None)
    p_run.add_argument("--duration", type=float, default=None, help="seconds")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--rate", type=float, default=None, help="pose rate, Hz")
    p_run.add_argument("--noise-sigma", type=float, default=None, help="pose noise, meters")
    p_run.add_argument("--trajectory", choices=["circle", "ellipse", "waypoints"], default=None)
    p_run.add_argument("--radius", type=float, default=None)
    p_run.add_argument("--semi-a", type=float, default=None, help="ellipse semi-axis a, meters")
    p_run.add_argument("--semi-b", type=float, default=None, help="ellipse semi-axis b, meters")
    p_run.add_argument("--angular-speed", type=float, default=None, help="rad/s")
    p_run.add_argument("--waypoints-csv", type=Path, default=None)
    p_run.add_argument("--world-csv", type=Path, default=None)
    p_run.add_argument("--port", type=int, default=None, help="broker port in sockets mode")
    p_run.add_argument("--set", dest="assignments", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override any config field by dotted path, e.g. "
                            "--set follower.update_period=0.05 (repeatable; "
                            "values parse as JSON, else as strings)")

    p_eval = sub.add_parser("eval", help="evaluate synchronization from recorded data")
    source = p_eval.add_mutually_exclusive_group(required=True)
    source.add_argument("--annotations", type=Path, help="bounding-box CSV "
                        "(frame,label,xmin,ymin,xmax,ymax)")
    source.add_argument("--trace", type=Path, help="trace.csv from a previous run")
    p_eval.add_argument("--fps", type=float, default=30.0, help="annotation frame rate")
    p_eval.add_argument("--label-a", default="head")
    p_eval.add_argument("--label-b", default="drone")
    p_eval.add_argument("--out", type=Path, default=None, help="write the report JSON here")

    p_gen = sub.add_parser("gen-trajectory", help="emit a trajectory CSV (t,x,y,z)")
    p_gen.add_argument("--kind", choices=["circle", "ellipse"], default="circle")
    p_gen.add_argument("--radius", type=float, default=0.5)
    p_gen.add_argument("--semi-a", type=float, default=0.75)
    p_gen.add_argument("--semi-b", type=float, default=0.5)
    p_gen.add_argument("--angular-speed", type=float, default=2 * math.pi / 20.0)
    p_gen.add_argument("--rate", type=float, default=10.0)
    p_gen.add_argument("--duration", type=float, default=60.0)
    p_gen.add_argument("--out", type=Path, default=None, help="default: stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "broker":
            return _cmd_broker(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "gen-trajectory":
            return _cmd_gen(args)
        return EXIT_CONFIG
    except (ConfigError, AnnotationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _cmd_broker(args) -> int:
    port = args.port if args.port is not None else broker_port_default()
    server = TcpBrokerServer(Broker(), args.host, port)
    try:
        server.start()
    except OSError as exc:
        print(f"error: broker bind failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"broker listening on {args.host}:{server.port}", flush=True)
    try:
        while True:
            time.sleep(0.5)
    finally:
        server.stop()


def _cmd_run(args) -> int:
    overrides: dict = {}
    trajectory: dict = {}
    if args.trajectory is not None:
        trajectory["kind"] = args.trajectory
    if args.radius is not None:
        trajectory["radius"] = args.radius
    if args.semi_a is not None:
        trajectory["semi_axis_a"] = args.semi_a
    if args.semi_b is not None:
        trajectory["semi_axis_b"] = args.semi_b
    if args.angular_speed is not None:
        trajectory["angular_speed"] = args.angular_speed
    if args.waypoints_csv is not None:
        trajectory["csv"] = str(args.waypoints_csv)
    if args.rate is not None:
        trajectory["rate"] = args.rate
    if args.noise_sigma is not None:
        trajectory["noise_sigma"] = args.noise_sigma
    if trajectory:
        overrides["trajectory"] = trajectory
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.world_csv is not None:
        overrides["world_csv"] = str(args.world_csv)
    if args.port is not None:
        overrides["broker_port"] = args.port
    for assignment in args.assignments:
        _apply_assignment(overrides, assignment)

    if args.config is not None:
        cfg = load_config(args.config, overrides)
    else:
        cfg = config_from_dict(overrides, base_dir=".")
    trace, report = run_scenario(cfg, out_dir=args.out)
    print(report_summary(report, ticks=len(trace.rows)))
    return EXIT_OK


def _apply_assignment(overrides: dict, assignment: str) -> None:
    """Merge one ``dotted.key=value`` override into the config dict."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects KEY=VALUE, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are allowed unquoted
    node = overrides
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"--set {key}: {part} is not a section")
        node = child
    node[parts[-1]] = value


def _cmd_eval(args) -> int:
    if args.annotations is not None:
        if not args.annotations.exists():
            raise ConfigError(f"annotation file {args.annotations} does not exist")
        trajectories = load_annotations(args.annotations, fps=args.fps)
        for label in (args.label_a, args.label_b):
            if label not in trajectories:
                raise ConfigError(
                    f"label {label!r} not found; file has {', '.join(sorted(trajectories)) or 'none'}"
                )
        report = sync_report(trajectories[args.label_a], trajectories[args.label_b])
    else:
        if not args.trace.exists():
            raise ConfigError(f"trace file {args.trace} does not exist")
        report = sync_report(*_trace_trajectories(args.trace))
    if args.out is not None:
        write_report_json(report, args.out)
    print(report_summary(report))
    return EXIT_OK


def _trace_trajectories(path: Path):
    """Rebuild the mapped-human and drone trajectories from a trace.csv."""
    from wingman.agents import world_to_drone_frame
    from wingman.evaluation import Trajectory
    from wingman.geometry import Vec3, wearable_delta_to_drone_delta

    rows = []
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "t,hx,hy,hz,hyaw,dx,dy,dz,dyaw,mode":
            raise ConfigError(f"{path}: not a trace.csv (unexpected header)")
        for line_no, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 10:
                raise ConfigError(f"{path} line {line_no}: expected 10 fields")
            try:
                rows.append([float(v) for v in parts[:9]])
            except ValueError as exc:
                raise ConfigError(f"{path} line {line_no}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    human_start = Vec3(rows[0][1], rows[0][2], rows[0][3])
    drone_start = Vec3(rows[0][5], rows[0][6], rows[0][7])
    times = tuple(r[0] for r in rows)
    human_points = []
    drone_points = []
    for r in rows:
        mapped = wearable_delta_to_drone_delta(Vec3(r[1], r[2], r[3]) - human_start)
        human_points.append((mapped.x, mapped.z))
        p = world_to_drone_frame(Vec3(r[5], r[6], r[7]), drone_start)
        drone_points.append((p.x, p.z))
    return (
        Trajectory(times, tuple(human_points), label="human-mapped"),
        Trajectory(times, tuple(drone_points), label="drone"),
    )


def _cmd_gen(args) -> int:
    if args.duration <= 0 or args.rate <= 0:
        raise ConfigError("duration and rate must be > 0")
    lines = ["t,x,y,z"]
    n = int(round(args.duration * args.rate))
    if n < 1:
        raise ConfigError("duration too short for the sample rate")
    for k in range(n):
        t = k / args.rate
        if args.kind == "circle":
            p = circle_trajectory(args.radius, args.angular_speed, t)
        else:
            p = ellipse_trajectory(args.semi_a, args.semi_b, args.angular_speed, t)
        lines.append(",".join(format_float(v) for v in (t, p.x, p.y, p.z)))
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
