"""Virtual time and deterministic event scheduling.

Every time-dependent component in the simulation (block production, network
transfers, actor reactions) runs off one :class:`VirtualClock` and one
:class:`Scheduler`, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import heapq
from typing import Callable, Optional


class VirtualClock:
    """Monotonically non-decreasing virtual clock in milliseconds."""

    def __init__(self, start_ms: int = 0):
        if start_ms < 0:
            raise ValueError("start_ms must be non-negative")
        self._now = start_ms

    @property
    def now_ms(self) -> int:
        return self._now

    def advance_to(self, time_ms: int) -> None:
        if time_ms < self._now:
            raise ValueError(f"clock cannot go back: {self._now} -> {time_ms}")
        self._now = time_ms

    def __repr__(self) -> str:
        return f"VirtualClock(now_ms={self._now})"


class Scheduler:
    """Deterministic callback queue ordered by (time, insertion order).

    Callbacks scheduled for the past are clamped to the current time; they
    still run after everything scheduled before them.
    """

    def __init__(self, clock: VirtualClock):
        self._clock = clock
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def at(self, time_ms: int, fn: Callable[[], None]) -> None:
        when = max(time_ms, self._clock.now_ms)
        heapq.heappush(self._heap, (when, self._seq, fn))
        self._seq += 1

    def after(self, delay_ms: int, fn: Callable[[], None]) -> None:
        if delay_ms < 0:
            raise ValueError("delay_ms must be non-negative")
        self.at(self._clock.now_ms + delay_ms, fn)

    def next_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    @property
    def pending(self) -> int:
        return len(self._heap)

    def run_due(self, until_ms: int) -> int:
        """Run every callback due at or before `until_ms`; return the count.

        Callbacks may schedule further work; anything that lands inside the
        window runs in the same call.
        """
        ran = 0
        while self._heap and self._heap[0][0] <= until_ms:
            when, _, fn = heapq.heappop(self._heap)
            self._clock.advance_to(when)
            fn()
            ran += 1
        return ran
