"""Deterministic discrete-event network engine.

Nodes are named and carry numbered ports (1-based, matching front-panel
numbering); point-to-point links join two ports with a fixed latency. A
single global queue orders work by (time, insertion counter), so two runs
of the same inputs produce byte-identical event logs. Times are integer
microseconds throughout.

The engine logs an append-only :class:`EventLog` of observable events
(frame departures/arrivals, drops, control messages, port state changes,
alerts, verdicts, breaker trips). Internal bookkeeping such as device
timers is scheduled on the same queue but never logged.

Port-state semantics: enable/disable takes effect when its queued change
is processed; frames already in flight on a link are still delivered
(links are wires, not buffers that can be flushed).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

from gridshield.codec import RawFrame
from gridshield.util import frame_digest

SimTime = int  # microseconds

EVENT_KINDS = (
    "FrameDeparture",
    "FrameArrival",
    "Drop",
    "ControlMsg",
    "PortStateChange",
    "AlertRaised",
    "VerdictReached",
    "BreakerTrip",
)


class TopologyError(Exception):
    pass


class UnknownNode(TopologyError):
    pass


class DanglingPort(TopologyError):
    pass


class DuplicateLink(TopologyError):
    pass


class UnknownPort(TopologyError):
    pass


class UnlinkedPort(TopologyError):
    pass


@dataclass(frozen=True, order=True)
class PortRef:
    node: str
    port: int

    def __str__(self) -> str:
        return f"{self.node}/p{self.port}"


@dataclass(frozen=True)
class SimEvent:
    """One observable simulation event, ordered by (time, seq)."""

    time: SimTime
    seq: int
    kind: str
    node: str
    port: int | None
    digest: str | None
    note: str | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.time,
                "seq": self.seq,
                "kind": self.kind,
                "node": self.node,
                "port": self.port,
                "digest": self.digest,
                "note": self.note,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> SimEvent:
        obj = json.loads(line)
        return cls(
            time=obj["t"],
            seq=obj["seq"],
            kind=obj["kind"],
            node=obj["node"],
            port=obj["port"],
            digest=obj["digest"],
            note=obj["note"],
        )


class EventLog(list):
    """Append-only list of SimEvent, sorted by (time, seq)."""

    def to_jsonl(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self)

    @classmethod
    def from_jsonl(cls, text: str) -> EventLog:
        log = cls()
        for line in text.splitlines():
            if line.strip():
                log.append(SimEvent.from_json(line))
        return log


@dataclass(frozen=True)
class TopologySpec:
    """Declarative description of nodes, port counts, and wired links."""

    nodes: dict[str, int]
    links: tuple[tuple[str, int, str, int, SimTime], ...]


class NodeHandler(Protocol):
    def on_frame(self, port: int, raw: RawFrame, at: SimTime) -> None: ...


class Network:
    """Topology, port states, event queue and log for one simulation run."""

    def __init__(self) -> None:
        self.nodes: dict[str, int] = {}
        self.handlers: dict[str, NodeHandler] = {}
        self.links: dict[PortRef, tuple[PortRef, SimTime]] = {}
        self._disabled: set[PortRef] = set()
        self._heap: list[tuple[SimTime, int, Callable[[], None]]] = []
        self._sched = 0
        self._log_seq = 0
        self.now: SimTime = 0
        self.log = EventLog()

    # -- construction ------------------------------------------------------

    def add_node(self, node: str, ports: int) -> None:
        if ports < 1:
            raise TopologyError(f"node {node} needs at least one port")
        self.nodes[node] = ports

    def add_link(self, a: PortRef, b: PortRef, latency: SimTime) -> None:
        for ref in (a, b):
            if ref.node not in self.nodes:
                raise UnknownNode(f"no such node {ref.node}")
            if not 1 <= ref.port <= self.nodes[ref.node]:
                raise DanglingPort(f"{ref} beyond the node's {self.nodes[ref.node]} ports")
        if a == b:
            raise TopologyError(f"link endpoints must differ, got {a} twice")
        for ref in (a, b):
            if ref in self.links:
                raise DuplicateLink(f"{ref} already belongs to a link")
        self.links[a] = (b, latency)
        self.links[b] = (a, latency)

    def register(self, node: str, handler: NodeHandler) -> None:
        if node not in self.nodes:
            raise UnknownNode(f"no such node {node}")
        self.handlers[node] = handler

    # -- port state --------------------------------------------------------

    def _check_port(self, port: PortRef) -> None:
        if port.node not in self.nodes:
            raise UnknownNode(f"no such node {port.node}")
        if not 1 <= port.port <= self.nodes[port.node]:
            raise UnknownPort(f"{port} beyond the node's port count")

    def port_enabled(self, port: PortRef) -> bool:
        return port not in self._disabled

    def enabled_ports(self, node: str) -> set[int]:
        return {
            p
            for p in range(1, self.nodes[node] + 1)
            if PortRef(node, p) not in self._disabled
        }

    def set_port_state(self, port: PortRef, enabled: bool, at: SimTime) -> None:
        """Schedule a port enable/disable; effective once processed."""
        self._check_port(port)

        def apply() -> None:
            if enabled:
                self._disabled.discard(port)
            else:
                self._disabled.add(port)
            self.log_event(
                "PortStateChange", port.node, port.port,
                note="enabled" if enabled else "disabled",
            )

        self._schedule(at, apply)

    # -- frame movement ----------------------------------------------------

    def send(self, from_port: PortRef, raw: RawFrame, at: SimTime, note: str | None = None) -> None:
        """Emit a frame out of a linked port at time ``at``.

        Port states are checked at the moment of departure; a frame that
        makes it onto the wire is delivered even if a port is disabled
        while it is in flight.
        """
        self._check_port(from_port)
        if from_port not in self.links:
            raise UnlinkedPort(f"{from_port} has no link")

        def depart() -> None:
            digest = frame_digest(raw)
            self.log_event("FrameDeparture", from_port.node, from_port.port, digest, note)
            far, latency = self.links[from_port]
            if not self.port_enabled(from_port):
                self.log_event("Drop", from_port.node, from_port.port, digest, "tx_port_disabled")
                return
            if not self.port_enabled(far):
                self.log_event("Drop", far.node, far.port, digest, "rx_port_disabled")
                return
            self._schedule(self.now + latency, lambda: self._arrive(far, raw, None))

        self._schedule(at, depart)

    def inject_ingress(self, port: PortRef, raw: RawFrame, at: SimTime, note: str = "injected") -> None:
        """Make a frame appear as ingress at a port, without a wire.

        This models ground-truth attack injection; the arrival is logged
        with the given note so detection can be scored against it.
        """
        self._check_port(port)
        self._schedule(at, lambda: self._arrive(port, raw, note, check_enabled=True))

    def _arrive(self, port: PortRef, raw: RawFrame, note: str | None, check_enabled: bool = False) -> None:
        digest = frame_digest(raw)
        if check_enabled and not self.port_enabled(port):
            self.log_event("Drop", port.node, port.port, digest, "ingress_port_disabled")
            return
        self.log_event("FrameArrival", port.node, port.port, digest, note)
        handler = self.handlers.get(port.node)
        if handler is not None:
            handler.on_frame(port.port, raw, self.now)

    # -- scheduling & logging ----------------------------------------------

    def call(self, at: SimTime, fn: Callable[[], None]) -> None:
        """Schedule an internal (unlogged) callback."""
        self._schedule(at, fn)

    def _schedule(self, at: SimTime, fn: Callable[[], None]) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} before now={self.now}")
        self._sched += 1
        heapq.heappush(self._heap, (at, self._sched, fn))

    def log_event(
        self,
        kind: str,
        node: str,
        port: int | None = None,
        digest: str | None = None,
        note: str | None = None,
    ) -> SimEvent:
        assert kind in EVENT_KINDS, kind
        ev = SimEvent(self.now, self._log_seq, kind, node, port, digest, note)
        self._log_seq += 1
        self.log.append(ev)
        return ev

    def run_until(self, t_end: SimTime) -> EventLog:
        """Process every queued item with time <= t_end, in (time, seq) order."""
        while self._heap and self._heap[0][0] <= t_end:
            at, _seq, fn = heapq.heappop(self._heap)
            self.now = at
            fn()
        self.now = max(self.now, t_end)
        return self.log


def build_topology(spec: TopologySpec) -> Network:
    """Instantiate a network from a topology description.

    Raises UnknownNode / DanglingPort / DuplicateLink when a link refers
    to a missing node, a port beyond a node's port count, or a port that
    is already wired.
    """
    net = Network()
    for node, ports in spec.nodes.items():
        net.add_node(node, ports)
    for node_a, port_a, node_b, port_b, latency in spec.links:
        net.add_link(PortRef(node_a, port_a), PortRef(node_b, port_b), latency)
    return net


# -- log analysis helpers ----------------------------------------------------


def events_of_kind(log: Iterable[SimEvent], kind: str) -> list[SimEvent]:
    return [ev for ev in log if ev.kind == kind]


def arrivals_at(log: Iterable[SimEvent], node: str, port: int | None = None) -> list[SimEvent]:
    return [
        ev
        for ev in log
        if ev.kind == "FrameArrival" and ev.node == node and (port is None or ev.port == port)
    ]
