"""Reynolds-style flocking rules: separation, alignment, cohesion.

All three rules are pure functions over neighbor snapshots. The composite
controller target is a constant-speed velocity: the weighted rule sum is
added to the vehicle's own velocity and the result is rescaled to cruise
speed, so the rules steer direction while speed stays pinned.

Flocking acts in the horizontal plane; altitude is handled separately by
the autopilot's height hold. The rule weights and radii are tuning choices
of this simulation, not reproduced from any flight system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .wire import NeighborState, Vec3

# Neighbors closer than this are treated as exactly coincident and repelled
# along +x; keeps the separation rule total and deterministic.
COINCIDENT_EPS = 1e-9

# Below this combined-vector norm the previous heading is held instead of
# normalizing numerical noise.
_NORM_EPS = 1e-9


@dataclass(frozen=True)
class FlockingParams:
    """Neighborhood geometry and rule weights for the flocking controller.

    Attributes:
        r_neighbor: Neighborhood radius in meters; distance-only, no
            field-of-view restriction.
        d_sep: Separation distance in meters; neighbors closer than this
            are repelled.
        w_sep: Separation weight.
        w_align: Alignment (velocity matching) weight.
        w_coh: Cohesion (flock centering) weight.
        v_cruise: Commanded speed in m/s; the controller output always has
            this norm.
        k_v: Velocity-tracking gain in 1/s used by the autopilot to turn
            the velocity target into an acceleration.
    """

    r_neighbor: float = 10.0
    d_sep: float = 3.0
    w_sep: float = 1.5
    w_align: float = 1.0
    w_coh: float = 1.0
    v_cruise: float = 2.0
    k_v: float = 2.0

    def __post_init__(self):
        if not self.d_sep > 0:
            raise ValueError(f"d_sep must be positive, got {self.d_sep}")
        if not self.r_neighbor > self.d_sep:
            raise ValueError(
                f"r_neighbor ({self.r_neighbor}) must exceed d_sep ({self.d_sep})"
            )
        for name in ("w_sep", "w_align", "w_coh"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.v_cruise > 0:
            raise ValueError(f"v_cruise must be positive, got {self.v_cruise}")
        if not self.k_v > 0:
            raise ValueError(f"k_v must be positive, got {self.k_v}")


def separation(own_position: Vec3, neighbor_positions: Sequence[Vec3], d_sep: float) -> Vec3:
    """Inverse-square repulsion from neighbors closer than d_sep.

    Each neighbor within d_sep contributes (own - neighbor) / distance**2;
    a coincident neighbor contributes +x at the capped distance.
    """
    sx = sy = sz = 0.0
    ox, oy, oz = own_position
    for px, py, pz in neighbor_positions:
        dx, dy, dz = ox - px, oy - py, oz - pz
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d >= d_sep:
            continue
        if d < COINCIDENT_EPS:
            sx += 1.0 / COINCIDENT_EPS**2
            continue
        inv = 1.0 / (d * d * d)  # (delta / d) / d**2
        sx += dx * inv
        sy += dy * inv
        sz += dz * inv
    return (sx, sy, sz)


def alignment(own_velocity: Vec3, neighbor_velocities: Sequence[Vec3]) -> Vec3:
    """Mean neighbor velocity minus own velocity; zero without neighbors."""
    if not neighbor_velocities:
        return (0.0, 0.0, 0.0)
    n = len(neighbor_velocities)
    mx = sum(v[0] for v in neighbor_velocities) / n
    my = sum(v[1] for v in neighbor_velocities) / n
    mz = sum(v[2] for v in neighbor_velocities) / n
    return (mx - own_velocity[0], my - own_velocity[1], mz - own_velocity[2])


def cohesion(own_position: Vec3, neighbor_positions: Sequence[Vec3]) -> Vec3:
    """Neighbor centroid minus own position; zero without neighbors."""
    if not neighbor_positions:
        return (0.0, 0.0, 0.0)
    n = len(neighbor_positions)
    cx = sum(p[0] for p in neighbor_positions) / n
    cy = sum(p[1] for p in neighbor_positions) / n
    cz = sum(p[2] for p in neighbor_positions) / n
    return (cx - own_position[0], cy - own_position[1], cz - own_position[2])


def flocking_velocity(
    own_position: Vec3,
    own_velocity: Vec3,
    last_heading: float,
    neighbors: Sequence[NeighborState],
    params: FlockingParams,
) -> Vec3:
    """Desired velocity from the weighted rules, restricted to the horizontal plane.

    The combined vector own_velocity + weighted rule terms is rescaled to
    norm v_cruise; if it vanishes, the vehicle holds course along
    last_heading at v_cruise. The z component of the result is always 0.
    """
    positions = [(nb.position[0], nb.position[1], 0.0) for nb in neighbors]
    velocities = [(nb.velocity[0], nb.velocity[1], 0.0) for nb in neighbors]
    own_p = (own_position[0], own_position[1], 0.0)
    own_v = (own_velocity[0], own_velocity[1], 0.0)

    sep = separation(own_p, positions, params.d_sep)
    ali = alignment(own_v, velocities)
    coh = cohesion(own_p, positions)

    ux = own_v[0] + params.w_sep * sep[0] + params.w_align * ali[0] + params.w_coh * coh[0]
    uy = own_v[1] + params.w_sep * sep[1] + params.w_align * ali[1] + params.w_coh * coh[1]

    norm = math.hypot(ux, uy)
    if norm < _NORM_EPS:
        return (
            params.v_cruise * math.cos(last_heading),
            params.v_cruise * math.sin(last_heading),
            0.0,
        )
    scale = params.v_cruise / norm
    return (ux * scale, uy * scale, 0.0)
