"""Shared test helpers: seeded generators and small utilities."""

from __future__ import annotations

import random
import string
import time

from wingman.geometry import FrameId, Pose, Vec3
from wingman.protocol import PoseMsg, encode_message, wire_float
from wingman.transport import ConnAck, Connect, Disconnect, PingReq, PingResp, Publish, SubAck, Subscribe

_TOPIC_CHARS = string.ascii_lowercase + string.digits + "_-"


def random_topic(rng: random.Random) -> str:
    levels = [
        "".join(rng.choice(_TOPIC_CHARS) for _ in range(rng.randint(1, 8)))
        for _ in range(rng.randint(1, 4))
    ]
    return "/".join(levels)


def random_filter(rng: random.Random) -> str:
    levels = []
    for _ in range(rng.randint(1, 4)):
        roll = rng.random()
        if roll < 0.2:
            levels.append("+")
        else:
            levels.append("".join(rng.choice(_TOPIC_CHARS) for _ in range(rng.randint(1, 8))))
    if rng.random() < 0.25:
        levels.append("#")
    return "/".join(levels)


def random_packet(rng: random.Random):
    kind = rng.randrange(8)
    if kind == 0:
        n = rng.randint(1, 24)
        return Connect("".join(rng.choice(_TOPIC_CHARS + "é中") for _ in range(n)))
    if kind == 1:
        return ConnAck()
    if kind == 2:
        payload = rng.randbytes(rng.randint(0, 2048))
        return Publish(random_topic(rng), payload)
    if kind == 3:
        return Subscribe(rng.randint(1, 0xFFFF), random_filter(rng))
    if kind == 4:
        return SubAck(rng.randint(1, 0xFFFF))
    if kind == 5:
        return PingReq()
    if kind == 6:
        return PingResp()
    return Disconnect()


def random_wire_vec3(rng: random.Random, scale: float = 10.0) -> Vec3:
    return Vec3(
        wire_float(rng.uniform(-scale, scale)),
        wire_float(rng.uniform(-scale, scale)),
        wire_float(rng.uniform(-scale, scale)),
    )


def pose_msg_bytes(
    sequence: int, t: float, x: float, z: float, yaw: float = 0.0, source: str = "wearable"
) -> bytes:
    msg = PoseMsg(source, Pose(Vec3(x, 0.0, z), yaw, FrameId.WEARABLE, t), sequence)
    return encode_message(msg)


def wait_until(predicate, timeout: float = 5.0, interval: float = 0.01) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()
