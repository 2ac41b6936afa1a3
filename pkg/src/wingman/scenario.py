"""Scenario orchestration: config loading, run engines, trace recording.

Two run modes share one tick body:

* ``deterministic`` - every agent talks through an in-process loopback
  broker on a virtual clock with a fixed per-tick order (wearable ->
  follower -> drone -> detector). Byte-identical outputs for identical
  (config, seed); never reads the wall clock, OS RNG or network.
* ``sockets`` - the same agents over a real TCP broker, paced by the
  wall clock. Useful as a live demo; not byte-reproducible.

Per tick the trace records the human and drone world poses *entering*
the tick; the drone then integrates its current command across the tick
and the detector runs on the post-step pose, stamped with the tick time.
"""

from __future__ import annotations

import math
import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from wingman.agents import (
    Circle,
    DetectorParams,
    DroneAgent,
    Ellipse,
    TrajectorySpec,
    WearableSim,
    WorldObject,
    detect_objects,
    load_waypoints_csv,
    load_world_csv,
    world_to_drone_frame,
)
from wingman.cueing import AttentionModel, CueEngine
from wingman.evaluation import SyncReport, Trajectory, sync_report
from wingman.follower import FollowerConfig, FollowerLoop
from wingman.geometry import FrameId, Pose, Vec3, wearable_delta_to_drone_delta, wrap_angle
from wingman.protocol import (
    TOPIC_CMD,
    TOPIC_DETECTIONS,
    TOPIC_POSE,
    CommandMsg,
    DetachMsg,
    canonical_json,
    encode_message,
    format_float,
)
from wingman.transport import Broker, MemoryTransport, MqttClient, SocketTransport, TcpBrokerServer

TRACE_HEADER = "t,hx,hy,hz,hyaw,dx,dy,dz,dyaw,mode"

# one revolution per 20 s, the desk-scale walking pace
_DEFAULT_ANGULAR_SPEED = 2 * math.pi / 20.0

PORT_ENV_VAR = "WINGMAN_BROKER_PORT"


class ConfigError(Exception):
    """The scenario configuration is invalid or references missing files."""


@dataclass(frozen=True)
class ScenarioConfig:
    trajectory: TrajectorySpec
    follower: FollowerConfig = field(default_factory=FollowerConfig)
    detector: DetectorParams = field(default_factory=DetectorParams)
    world: tuple[WorldObject, ...] = ()
    duration: float = 60.0
    seed: int = 0
    mode: str = "deterministic"
    human_start: Vec3 = field(default_factory=Vec3)
    drone_offset: tuple[float, float] = (-1.0, 0.0)  # world (x, z) offset from the human start
    detach_script: tuple[tuple[float, tuple[Vec3, ...]], ...] = ()
    broker_host: str = "127.0.0.1"
    broker_port: int = 1883

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.mode not in ("deterministic", "sockets"):
            raise ConfigError(f"mode must be deterministic or sockets, got {self.mode!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if round(self.duration * self.trajectory.rate) < 1:
            raise ConfigError("duration too short for the pose rate: no ticks to run")
        ids = [obj.object_id for obj in self.world]
        if len(ids) != len(set(ids)):
            raise ConfigError("world object ids must be unique")


@dataclass(frozen=True)
class TraceRow:
    t: float
    human: Pose  # world frame
    drone: Pose  # world frame
    command: CommandMsg | None
    mode: str


@dataclass
class RunTrace:
    """Evidence record of one run: per-tick rows, bus log, mission events."""

    rows: list[TraceRow] = field(default_factory=list)
    messages: list[tuple[float, str, bytes]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    human_start: Vec3 = field(default_factory=Vec3)
    drone_start: Vec3 = field(default_factory=Vec3)

    def human_trajectory(self) -> Trajectory:
        """Human path mapped into drone-frame coordinates (the follow target)."""
        times = []
        points = []
        for row in self.rows:
            mapped = wearable_delta_to_drone_delta(row.human.position - self.human_start)
            times.append(row.t)
            points.append((mapped.x, mapped.z))
        return Trajectory(tuple(times), tuple(points), label="human-mapped")

    def drone_trajectory(self) -> Trajectory:
        times = []
        points = []
        for row in self.rows:
            p = world_to_drone_frame(row.drone.position, self.drone_start)
            times.append(row.t)
            points.append((p.x, p.z))
        return Trajectory(tuple(times), tuple(points), label="drone")


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> tuple[RunTrace, SyncReport]:
    """Run one scenario; optionally write trace.csv/report.json/messages.jsonl."""
    if cfg.mode == "deterministic":
        trace = _run_deterministic(cfg)
    else:
        trace = _run_sockets(cfg)
    report = sync_report(trace.human_trajectory(), trace.drone_trajectory())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, out / "trace.csv")
        write_report_json(report, out / "report.json")
        write_messages_jsonl(trace, out / "messages.jsonl")
    return trace, report


class _SimCore:
    """Agents and tick body shared by both run modes."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.trace = RunTrace(human_start=cfg.human_start)
        heading0 = cfg.trajectory.kind.heading(0.0)
        self.drone_start = cfg.human_start + Vec3(
            cfg.drone_offset[0], cfg.follower.altitude, cfg.drone_offset[1]
        )
        self.trace.drone_start = self.drone_start
        self.wearable = WearableSim(cfg.trajectory, cfg.seed)
        self.drone = DroneAgent(
            world_start=self.drone_start,
            max_speed=cfg.follower.max_speed,
            altitude=cfg.follower.altitude,
            start_yaw=wrap_angle(heading0 + math.pi),
        )
        self.follower = FollowerLoop(
            cfg.follower,
            on_event=lambda t, name, data: self.trace.events.append({"t": t, "event": name, **data}),
        )
        self.cues = CueEngine(AttentionModel(), human_start=cfg.human_start)
        self.det_rng = random.Random(f"{cfg.seed}:detector")
        self.now = 0.0
        self.dt = 1.0 / cfg.trajectory.rate
        self.n_ticks = int(round(cfg.duration * cfg.trajectory.rate))
        self._script_fired = [False] * len(cfg.detach_script)
        self._next_script_seq = 0

    def log_publish(self, topic: str, payload: bytes) -> None:
        self.trace.messages.append((self.now, topic, payload))

    def tick(self, k: int, publish_pose, publish_detection, publish_operator) -> None:
        t = k / self.cfg.trajectory.rate
        self.now = t
        for i, (t_script, waypoints) in enumerate(self.cfg.detach_script):
            if not self._script_fired[i] and t_script <= t:
                self._script_fired[i] = True
                order = DetachMsg(waypoints, self._next_script_seq)
                self._next_script_seq += 1
                publish_operator(TOPIC_CMD, encode_message(order))
        truth, msg = self.wearable.next_pose()
        publish_pose(TOPIC_POSE, encode_message(msg))
        human_world = Pose(
            truth.position + self.cfg.human_start, truth.yaw, FrameId.WORLD, t
        )
        self.trace.rows.append(
            TraceRow(
                t=t,
                human=human_world,
                drone=self.drone.world_pose(t),
                command=self.drone.state.command,
                mode=self.follower.mission.mode.value,
            )
        )
        self.drone.step(self.dt)
        for detection in detect_objects(
            self.drone.world_pose(t), self.cfg.world, self.cfg.detector, self.det_rng
        ):
            publish_detection(TOPIC_DETECTIONS, encode_message(detection))


def _run_deterministic(cfg: ScenarioConfig) -> RunTrace:
    core = _SimCore(cfg)
    broker = Broker()
    broker.on_publish = core.log_publish

    wear_client = MqttClient(MemoryTransport(broker), "wearable")
    follower_client = MqttClient(MemoryTransport(broker), "follower")
    cue_client = MqttClient(MemoryTransport(broker), "cueing")
    drone_client = MqttClient(MemoryTransport(broker), "drone", on_message=core.drone.on_message)
    detector_client = MqttClient(MemoryTransport(broker), "detector")
    operator_client = MqttClient(MemoryTransport(broker), "operator")

    core.follower.publish = follower_client.publish
    follower_client.on_message = core.follower.on_message
    cue_client.on_message = core.cues.on_message
    core.cues.publish = cue_client.publish

    for client in (wear_client, follower_client, cue_client, drone_client, detector_client, operator_client):
        client.connect()
    follower_client.subscribe(TOPIC_POSE)
    follower_client.subscribe(TOPIC_CMD)
    cue_client.subscribe(TOPIC_POSE)
    cue_client.subscribe(TOPIC_DETECTIONS)
    drone_client.subscribe(TOPIC_CMD)

    for k in range(core.n_ticks):
        core.tick(k, wear_client.publish, detector_client.publish, operator_client.publish)
    return core.trace


def _run_sockets(cfg: ScenarioConfig) -> RunTrace:
    core = _SimCore(cfg)
    broker = Broker()
    broker.on_publish = core.log_publish
    server = TcpBrokerServer(broker, cfg.broker_host, cfg.broker_port)
    try:
        server.start()
    except OSError as exc:
        raise RuntimeError(f"broker bind failed on {cfg.broker_host}:{cfg.broker_port}: {exc}") from exc

    clients: list[MqttClient] = []

    def make_client(client_id: str, on_message=None) -> MqttClient:
        transport = SocketTransport(cfg.broker_host, server.port)
        client = MqttClient(transport, client_id, on_message=on_message)
        clients.append(client)
        return client

    try:
        wear_client = make_client("wearable")
        follower_client = make_client("follower")
        cue_client = make_client("cueing")
        drone_client = make_client("drone", on_message=core.drone.on_message)
        detector_client = make_client("detector")
        operator_client = make_client("operator")

        core.follower.publish = follower_client.publish
        follower_client.on_message = core.follower.on_message
        cue_client.on_message = core.cues.on_message
        core.cues.publish = cue_client.publish

        for client in clients:
            client.connect()
        follower_client.subscribe(TOPIC_POSE)
        follower_client.subscribe(TOPIC_CMD)
        cue_client.subscribe(TOPIC_POSE)
        cue_client.subscribe(TOPIC_DETECTIONS)
        drone_client.subscribe(TOPIC_CMD)

        start = time.monotonic()
        for k in range(core.n_ticks):
            lead = start + k * core.dt - time.monotonic()
            if lead > 0:
                time.sleep(lead)
            core.tick(k, wear_client.publish, detector_client.publish, operator_client.publish)
        time.sleep(2 * core.dt)  # let in-flight messages drain
    finally:
        for client in clients:
            try:
                client.disconnect()
            except Exception:
                pass
        server.stop()
    return core.trace


def write_trace_csv(trace: RunTrace, path: str | Path) -> None:
    lines = [TRACE_HEADER]
    for row in trace.rows:
        h, d = row.human, row.drone
        values = [row.t, h.position.x, h.position.y, h.position.z, h.yaw,
                  d.position.x, d.position.y, d.position.z, d.yaw]
        lines.append(",".join(format_float(v) for v in values) + f",{row.mode}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(report: SyncReport, path: str | Path) -> None:
    doc = {
        "dtw_distance": report.dtw_distance,
        "similarity": report.similarity,
        "path_length": report.path_length,
        "lag_estimate": report.lag_estimate,
    }
    Path(path).write_text(canonical_json(doc) + "\n")


def write_messages_jsonl(trace: RunTrace, path: str | Path) -> None:
    lines = []
    for t, topic, payload in trace.messages:
        doc = {"t": t, "topic": topic, "payload": payload.decode("utf-8")}
        lines.append(canonical_json(doc))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def report_summary(report: SyncReport, ticks: int | None = None) -> str:
    parts = [
        f"similarity={report.similarity:.4f}",
        f"dtw_distance={report.dtw_distance:.6g}",
        f"path_length={report.path_length}",
        f"lag={report.lag_estimate:.3f}s",
    ]
    if ticks is not None:
        parts.append(f"ticks={ticks}")
    return " ".join(parts)


def broker_port_default() -> int:
    """Default broker port honoring the environment override."""
    value = os.environ.get(PORT_ENV_VAR)
    if value is None:
        return 1883
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{PORT_ENV_VAR} must be an integer, got {value!r}") from exc


def load_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    """Read a JSON scenario file and apply flag overrides on top."""
    import json

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON object expected")
    if overrides:
        doc = _merge(doc, overrides)
    return config_from_dict(doc, base_dir=path.parent)


def _merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


_TOP_KEYS = {
    "mode", "duration", "seed", "trajectory", "follower", "detector", "world",
    "world_csv", "human_start", "drone_offset", "detach", "broker_host", "broker_port",
}


def config_from_dict(doc: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    """Build and validate a ScenarioConfig from plain JSON data."""
    base_dir = Path(base_dir)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        trajectory = _trajectory_from_dict(doc.get("trajectory", {"kind": "circle"}), base_dir)
        follower = _follower_from_dict(doc.get("follower", {}))
        detector = _detector_from_dict(doc.get("detector", {}))
        world = _world_from_dict(doc, base_dir)
        human_start = _vec3(doc.get("human_start", [0.0, 0.0, 0.0]), "human_start")
        offset = doc.get("drone_offset", [-1.0, 0.0])
        if not isinstance(offset, (list, tuple)) or len(offset) != 2:
            raise ConfigError("drone_offset must be a [x, z] pair")
        detach = _detach_from_dict(doc.get("detach", []))
        port = doc.get("broker_port", broker_port_default())
        if not isinstance(port, int) or not 0 <= port <= 65535:
            raise ConfigError(f"broker_port must be 0..65535, got {port!r}")
        return ScenarioConfig(
            trajectory=trajectory,
            follower=follower,
            detector=detector,
            world=world,
            duration=_number(doc.get("duration", 60.0), "duration"),
            seed=doc.get("seed", 0),
            mode=doc.get("mode", "deterministic"),
            human_start=human_start,
            drone_offset=(float(offset[0]), float(offset[1])),
            detach_script=detach,
            broker_host=doc.get("broker_host", "127.0.0.1"),
            broker_port=port,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _vec3(value, name: str) -> Vec3:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{name} must be an [x, y, z] triple")
    return Vec3(*(float(v) for v in value))


def _trajectory_from_dict(doc: dict, base_dir: Path) -> TrajectorySpec:
    if not isinstance(doc, dict):
        raise ConfigError("trajectory must be an object")
    doc = dict(doc)
    kind_name = doc.pop("kind", "circle")
    noise_sigma = _number(doc.pop("noise_sigma", 0.0), "trajectory.noise_sigma")
    rate = _number(doc.pop("rate", 10.0), "trajectory.rate")
    if kind_name == "circle":
        kind = Circle(
            radius=_number(doc.pop("radius", 0.5), "trajectory.radius"),
            angular_speed=_number(doc.pop("angular_speed", _DEFAULT_ANGULAR_SPEED), "trajectory.angular_speed"),
        )
    elif kind_name == "ellipse":
        kind = Ellipse(
            semi_axis_a=_number(doc.pop("semi_axis_a", 0.75), "trajectory.semi_axis_a"),
            semi_axis_b=_number(doc.pop("semi_axis_b", 0.5), "trajectory.semi_axis_b"),
            angular_speed=_number(doc.pop("angular_speed", _DEFAULT_ANGULAR_SPEED), "trajectory.angular_speed"),
        )
    elif kind_name == "waypoints":
        csv_path = doc.pop("csv", None)
        if csv_path is None:
            raise ConfigError("waypoints trajectory requires a csv path")
        resolved = base_dir / csv_path
        if not resolved.exists():
            raise ConfigError(f"waypoints csv {resolved} does not exist")
        kind = load_waypoints_csv(resolved)
    else:
        raise ConfigError(f"unknown trajectory kind {kind_name!r}")
    if doc:
        raise ConfigError(f"unknown trajectory keys: {', '.join(sorted(doc))}")
    try:
        return TrajectorySpec(kind=kind, noise_sigma=noise_sigma, rate=rate)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _follower_from_dict(doc: dict) -> FollowerConfig:
    if not isinstance(doc, dict):
        raise ConfigError("follower must be an object")
    doc = dict(doc)
    kwargs = {}
    for name in ("update_period", "max_speed", "altitude", "deadband"):
        if name in doc:
            kwargs[name] = _number(doc.pop(name), f"follower.{name}")
    if "follow_offset" in doc:
        kwargs["follow_offset"] = _vec3(doc.pop("follow_offset"), "follower.follow_offset")
    if doc:
        raise ConfigError(f"unknown follower keys: {', '.join(sorted(doc))}")
    try:
        return FollowerConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _detector_from_dict(doc: dict) -> DetectorParams:
    if not isinstance(doc, dict):
        raise ConfigError("detector must be an object")
    doc = dict(doc)
    kwargs = {}
    mapping = {"fov": "fov", "range": "range_m", "p_detect": "p_detect", "pos_noise_sigma": "pos_noise_sigma"}
    for key, attr in mapping.items():
        if key in doc:
            kwargs[attr] = _number(doc.pop(key), f"detector.{key}")
    if doc:
        raise ConfigError(f"unknown detector keys: {', '.join(sorted(doc))}")
    try:
        return DetectorParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _world_from_dict(doc: dict, base_dir: Path) -> tuple[WorldObject, ...]:
    if "world" in doc and "world_csv" in doc:
        raise ConfigError("give either world or world_csv, not both")
    if "world_csv" in doc:
        resolved = base_dir / doc["world_csv"]
        if not resolved.exists():
            raise ConfigError(f"world csv {resolved} does not exist")
        return tuple(load_world_csv(resolved))
    objects = []
    for i, entry in enumerate(doc.get("world", [])):
        if not isinstance(entry, dict):
            raise ConfigError(f"world[{i}] must be an object")
        try:
            objects.append(
                WorldObject(
                    object_id=str(entry["id"]),
                    label=str(entry.get("label", "")),
                    position=Vec3(float(entry["x"]), float(entry["y"]), float(entry["z"])),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"world[{i}] missing field {exc.args[0]!r}") from exc
    return tuple(objects)


def _detach_from_dict(entries) -> tuple[tuple[float, tuple[Vec3, ...]], ...]:
    if not isinstance(entries, list):
        raise ConfigError("detach must be a list of {t, waypoints} objects")
    script = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "t" not in entry or "waypoints" not in entry:
            raise ConfigError(f"detach[{i}] must have t and waypoints")
        waypoints = tuple(_vec3(w, f"detach[{i}].waypoints") for w in entry["waypoints"])
        if not waypoints:
            raise ConfigError(f"detach[{i}] needs at least one waypoint")
        script.append((_number(entry["t"], f"detach[{i}].t"), waypoints))
    return tuple(sorted(script, key=lambda e: e[0]))
