"""In-process channel set: autopilot controllers wired directly to the loop.

Runs the exact frame codec path of the real transport (encode, decode,
command bytes back) without sockets or child processes, so the simulator
cannot tell the difference. Besides speed this enables fault injection:
delivery order can be reshuffled per tick and chosen vehicles can be
silenced to exercise the barrier's timeout and hold-last paths.
"""

from __future__ import annotations

import time
from typing import Callable, Sequence

from .autopilot import AutopilotController
from .wire import Shutdown, StateReport, decode_frame, encode_actuator_command


class LoopbackChannelSet:
    """ChannelSet over a set of in-process controllers.

    reorder takes the list of (vehicle_id, frame) pairs queued for one
    recv() and returns them in delivery order; identity by default.
    silent_vehicles never answer, mimicking a hung autopilot.
    """

    def __init__(
        self,
        controllers: Sequence[AutopilotController],
        *,
        reorder: Callable[[list[tuple[int, bytes]]], list[tuple[int, bytes]]] | None = None,
        silent_vehicles: Sequence[int] = (),
    ):
        self.controllers = {c.vehicle_id: c for c in controllers}
        if len(self.controllers) != len(controllers):
            raise ValueError("duplicate vehicle ids among controllers")
        self._reorder = reorder
        self._silent = frozenset(silent_vehicles)
        self._inbox: list[tuple[int, bytes]] = []

    def send(self, vehicle_id: int, frame: bytes) -> None:
        controller = self.controllers[vehicle_id]
        msg = decode_frame(frame)
        if isinstance(msg, Shutdown):
            controller.handle_shutdown()
            return
        if not isinstance(msg, StateReport):
            raise ValueError(f"unexpected message type {type(msg).__name__}")
        if vehicle_id in self._silent:
            return
        cmd = controller.handle(msg)
        self._inbox.append((vehicle_id, encode_actuator_command(cmd)))

    def recv(self, deadline: float) -> list[tuple[int, bytes]]:
        if not self._inbox:
            # Nothing queued; yield briefly so timeout loops make progress.
            time.sleep(min(0.001, max(0.0, deadline - time.monotonic())))
            return []
        batch = self._inbox
        self._inbox = []
        if self._reorder is not None:
            batch = self._reorder(batch)
        return batch

    def close(self) -> None:
        self._inbox.clear()
