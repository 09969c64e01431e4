"""Deterministic per-vehicle random values.

Autopilots run as separate processes but must agree with the simulator on
any per-vehicle randomness, so random values are derived by hashing
(global seed, vehicle id) rather than by sharing RNG state. SHA-256 keeps
the derivation stable across processes, platforms, and Python versions.
"""

from __future__ import annotations

import hashlib
import math


def vehicle_u64(seed: int, vehicle_id: int, label: str) -> int:
    """Derive a 64-bit value from (seed, vehicle_id) for the given label."""
    key = f"swarmlink:{label}:{seed}:{vehicle_id}".encode("ascii")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little")


def entry_heading(seed: int, vehicle_id: int) -> float:
    """Heading in [0, 2*pi) a vehicle adopts when it starts flocking.

    Depends only on (seed, vehicle_id), never on process state.
    """
    return vehicle_u64(seed, vehicle_id, "entry-heading") / 2.0**64 * math.tau
