"""Deterministic discrete-event simulation on a 1-D line with causal signals.

Units are abstract: c = 1, so a signal at speedFraction f covers distance d
in time d / f. The event queue orders deliveries by (time, agent id,
insertion sequence) so a run is a pure function of topology, handlers, and
seed.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import PvkexError, ValidationError

C = 1.0


class CausalityViolationError(PvkexError):
    """A handler tried to schedule outside its light cone or in the past."""


@dataclass(frozen=True)
class Agent:
    id: str
    position: float
    role: str = "agent"


@dataclass
class SignalRecord:
    origin: str
    destination: str
    departTime: float
    arriveTime: float
    speedFraction: float
    kind: str = "classical"
    payload: Any = None

    def export_dict(self) -> dict:
        # quantum payloads are deliberately opaque in exports: amplitudes are
        # not observable data
        payload = "<quantum>" if self.kind == "quantum" else self.payload
        return {
            "origin": self.origin,
            "destination": self.destination,
            "departTime": self.departTime,
            "arriveTime": self.arriveTime,
            "speedFraction": self.speedFraction,
            "kind": self.kind,
            "payload": payload,
        }


def timing_check(response_arrival: float, t_p: float, distance: float,
                 t_delta: float) -> bool:
    """True iff a response to a challenge issued at t_p arrived in time.

    The window is distance/c + t_delta after t_p.
    """
    if t_delta < 0:
        raise ValidationError("t_delta must be nonnegative")
    return response_arrival - t_p <= distance / C + t_delta


class Simulation:
    """Single-threaded event loop over a fixed set of agents."""

    def __init__(self, agents: list[Agent], seed: int = 0):
        ids = [a.id for a in agents]
        if len(set(ids)) != len(ids):
            raise ValidationError("agent ids must be unique")
        self.agents = {a.id: a for a in agents}
        self.now = 0.0
        self.trace: list[SignalRecord] = []
        self._heap: list[tuple[float, str, int, SignalRecord]] = []
        self._seq = 0
        streams = np.random.SeedSequence(seed).spawn(len(agents))
        self.rng = {a.id: np.random.Generator(np.random.PCG64(s))
                    for a, s in zip(agents, streams)}

    def distance(self, a: str, b: str) -> float:
        return abs(self.agents[a].position - self.agents[b].position)

    def arrival_time(self, origin: str, destination: str, depart: float,
                     speed_fraction: float) -> float:
        return depart + self.distance(origin, destination) / (C * speed_fraction)

    def departure_time_for_arrival(self, origin: str, destination: str,
                                   target_arrival: float,
                                   speed_fraction: float = 1.0) -> float:
        """Departure time so the signal arrives exactly at target_arrival."""
        if not 0 < speed_fraction <= 1:
            raise CausalityViolationError("speedFraction must be in (0, 1]")
        return target_arrival - self.distance(origin, destination) / (C * speed_fraction)

    def send_signal(self, origin: str, destination: str, depart_time: float,
                    payload: Any = None, speed_fraction: float = 1.0,
                    kind: str = "classical") -> SignalRecord:
        """Enqueue a signal delivery and append its record to the trace."""
        if speed_fraction > 1:
            raise CausalityViolationError("superluminal signal requested")
        if not 0 < speed_fraction:
            raise ValidationError("speedFraction must be positive")
        if depart_time < self.now - 1e-12:
            raise CausalityViolationError(
                f"departure at {depart_time} is before current time {self.now}")
        record = SignalRecord(
            origin=origin, destination=destination, departTime=depart_time,
            arriveTime=self.arrival_time(origin, destination, depart_time,
                                         speed_fraction),
            speedFraction=speed_fraction, kind=kind, payload=payload)
        heapq.heappush(self._heap,
                       (record.arriveTime, destination, self._seq, record))
        self._seq += 1
        self.trace.append(record)
        return record

    def run_until_quiescent(
            self,
            handlers: dict[str, Callable[["Simulation", Agent, SignalRecord], None]],
            max_events: int = 1_000_000) -> list[SignalRecord]:
        """Deliver events in causal order until the queue drains."""
        delivered = 0
        while self._heap:
            arrive, dest, _, record = heapq.heappop(self._heap)
            self.now = arrive
            handler = handlers.get(dest)
            if handler is not None:
                handler(self, self.agents[dest], record)
            delivered += 1
            if delivered > max_events:
                raise PvkexError("event budget exhausted; runaway handler?")
        return self.trace

    def trace_jsonl(self) -> str:
        """The trace as JSON lines, one SignalRecord per line."""
        return "\n".join(json.dumps(r.export_dict(), sort_keys=True)
                         for r in self.trace)


def default_topology(d: float = 1.0) -> list[Agent]:
    """Verifier 1 at -d, prover at the origin, verifier 2 at +d."""
    if d <= 0:
        raise ValidationError("verifier separation must be positive")
    return [
        Agent("V1", -d, "verifier1"),
        Agent("P", 0.0, "prover"),
        Agent("V2", +d, "verifier2"),
    ]
