"""Rule-based GOOSE inspection, source localization and mitigation.

The inspection device watches three of its ports: the main feed from the
station-bus switch, the relay's direct feed, and the loop return. Every
monitored GOOSE frame runs through six rules (sequence regression,
sequence skip, TTL bounds, publisher whitelist, ingress binding, rate
limit); a frame violating any rule is abnormal and becomes an
:class:`ObservationRecord`.

Frames received on the main feed are re-forwarded onto a loop through the
station-bus switch and come back on the loop return port. The device
remembers the digests it re-forwards for a short window; a loop-return
arrival with a remembered digest is its own echo (``loop=True``), anything
else on that port was put there by the switch itself. That distinction,
plus the publisher-identity binding of each frame, drives the two-row
localization decision:

  (a) an abnormal loop-return observation that is not an echo, or a
      main-feed abnormal bound to the switch's identity, names the
      station-bus switch;
  (b) abnormal traffic first seen on the main feed with the relay's
      identity, while every loop-return abnormal is an echo, names the
      relay.

Evidence matching neither row is surfaced as inconclusive, never guessed.
Mitigation is a list of port-disable commands: for a compromised switch,
every inspection port except the delivery and direct-relay ports; for a
compromised relay, the two switch ports that face it.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from gridshield.codec import (
    CodecError,
    GOOSE_ETHERTYPE,
    GooseFrame,
    MacAddress,
    RawFrame,
    decode_goose,
    encode_goose,
)
from gridshield.netsim import Network, PortRef, SimTime
from gridshield.sdn import FlowTable, Forward, PortMod, SwitchNode, match_frame
from gridshield.util import frame_digest


class Origin(enum.Enum):
    """The two candidate sources of injected traffic."""

    STATION_BUS_SWITCH = "StationBusSwitch"
    PIED = "PIED"


class RuleKind(enum.Enum):
    SEQUENCE_REGRESSION = "SequenceRegression"
    SEQUENCE_SKIP = "SequenceSkip"
    TTL_BOUND = "TtlBound"
    PUBLISHER_WHITELIST = "PublisherWhitelist"
    INGRESS_BINDING = "IngressBinding"
    RATE_LIMIT = "RateLimit"


MALFORMED_RULE_ID = "malformed"


@dataclass(frozen=True)
class Rule:
    id: str
    kind: RuleKind
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    # publisher identity and placement, keyed by control block reference
    whitelist: dict[str, MacAddress] = field(default_factory=dict)
    ingress_map: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [r.id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise ValueError("rule ids must be unique")


def default_rules() -> RuleSet:
    return RuleSet(
        rules=(
            Rule("seq_regression", RuleKind.SEQUENCE_REGRESSION),
            Rule("seq_skip", RuleKind.SEQUENCE_SKIP, {"max_gap": 1}),
            Rule("ttl_bound", RuleKind.TTL_BOUND, {"min_ms": 1, "max_ms": 60_000}),
            Rule("publisher_whitelist", RuleKind.PUBLISHER_WHITELIST),
            Rule("ingress_binding", RuleKind.INGRESS_BINDING),
            Rule("rate_limit", RuleKind.RATE_LIMIT, {"max_frames": 10, "window_ms": 100}),
        )
    )


@dataclass(frozen=True)
class Alert:
    time: SimTime
    rule_id: str
    gocb_ref: str
    ingress_port: int
    digest: str


@dataclass
class _PublisherState:
    last_st: int
    last_sq: int
    last_timestamp: SimTime
    arrivals: deque = field(default_factory=deque)  # times, for the rate rule


class SubscriptionState:
    """Per-publisher sequencing state; poisoning-resistant.

    Sequencing fields advance only on clean frames, so an attacker's
    abnormal frames cannot push the state and make subsequent legitimate
    traffic look anomalous. Arrival times feed the rate rule regardless.
    """

    def __init__(self) -> None:
        self._by_gocb: dict[str, _PublisherState] = {}

    def get(self, gocb_ref: str) -> _PublisherState | None:
        return self._by_gocb.get(gocb_ref)

    def record_arrival(self, gocb_ref: str, at: SimTime, window_us: SimTime) -> int:
        st = self._by_gocb.setdefault(gocb_ref, _PublisherState(0, 0, 0))
        st.arrivals.append(at)
        while st.arrivals and st.arrivals[0] < at - window_us:
            st.arrivals.popleft()
        return len(st.arrivals)

    def advance(self, gocb_ref: str, frame: GooseFrame, at: SimTime) -> None:
        st = self._by_gocb.setdefault(gocb_ref, _PublisherState(0, 0, 0))
        st.last_st = frame.st_num
        st.last_sq = frame.sq_num
        st.last_timestamp = max(st.last_timestamp, frame.timestamp)


@dataclass(frozen=True)
class ObservationRecord:
    """One abnormal sighting: who it claims to be, where it was seen."""

    origin_hypothesis: Origin
    ingress_port: int
    digest: str
    loop: bool
    time: SimTime

    def __post_init__(self) -> None:
        if not 1 <= self.ingress_port <= 8:
            raise ValueError(f"ingress port {self.ingress_port} outside 1..8")


@dataclass(frozen=True)
class LocalizationVerdict:
    culprit: Origin
    evidence: tuple[ObservationRecord, ...]
    decided_at: SimTime

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValueError("a verdict needs evidence")


class Inconclusive(Exception):
    """Raised when the observations satisfy neither decision row."""

    def __init__(self, observations: tuple[ObservationRecord, ...]):
        super().__init__("observations match neither decision row")
        self.observations = observations


# ---------------------------------------------------------------------------
# Rule evaluation
# ---------------------------------------------------------------------------


def inspect(
    frame: GooseFrame,
    ingress: int,
    state: SubscriptionState,
    rules: RuleSet,
    at: SimTime,
) -> tuple[SubscriptionState, list[Alert]]:
    """Run every rule over one decoded frame; update state; return alerts."""
    # encoding is canonical, so re-encoding reproduces the wire digest
    digest = frame_digest(encode_goose(frame))
    alerts: list[Alert] = []

    def alert(rule_id: str) -> None:
        alerts.append(Alert(at, rule_id, frame.gocb_ref, ingress, digest))

    prev = state.get(frame.gocb_ref)
    for rule in rules.rules:
        if rule.kind is RuleKind.SEQUENCE_REGRESSION:
            if prev is not None and prev.last_st > 0:
                if frame.st_num < prev.last_st:
                    alert(rule.id)
                elif frame.st_num == prev.last_st and frame.sq_num < prev.last_sq:
                    alert(rule.id)
        elif rule.kind is RuleKind.SEQUENCE_SKIP:
            gap = rule.params.get("max_gap", 1)
            if prev is not None and prev.last_st > 0:
                if frame.st_num == prev.last_st and frame.sq_num - prev.last_sq > gap:
                    alert(rule.id)
                elif frame.st_num > prev.last_st and frame.sq_num > gap - 1:
                    alert(rule.id)
        elif rule.kind is RuleKind.TTL_BOUND:
            lo = rule.params.get("min_ms", 1)
            hi = rule.params.get("max_ms", 60_000)
            if not lo <= frame.time_allowed_to_live <= hi:
                alert(rule.id)
        elif rule.kind is RuleKind.PUBLISHER_WHITELIST:
            expected = rules.whitelist.get(frame.gocb_ref)
            if expected is None or frame.src != expected:
                alert(rule.id)
        elif rule.kind is RuleKind.INGRESS_BINDING:
            allowed = rules.ingress_map.get(frame.gocb_ref)
            if allowed is not None and ingress not in allowed:
                alert(rule.id)
        elif rule.kind is RuleKind.RATE_LIMIT:
            window_us = rule.params.get("window_ms", 100) * 1_000
            limit = rule.params.get("max_frames", 10)
            if state.record_arrival(frame.gocb_ref, at, window_us) > limit:
                alert(rule.id)
    if not alerts:
        state.advance(frame.gocb_ref, frame, at)
    return state, alerts


# ---------------------------------------------------------------------------
# Loop correlation
# ---------------------------------------------------------------------------


class LoopTracker:
    """Remembers re-forwarded digests for a window, to spot own echoes.

    Identical payloads may be re-forwarded several times in flight, so
    every tag time within the window is kept, not just the latest.
    """

    def __init__(self, window_us: SimTime = 10_000):
        self.window_us = window_us
        self._tags: dict[str, list[SimTime]] = {}

    def tag_loop(self, digest: str, at: SimTime) -> None:
        times = self._tags.setdefault(digest, [])
        times.append(at)
        self._tags[digest] = [t for t in times if t + self.window_us >= at]

    def is_loop(self, digest: str, at: SimTime) -> bool:
        return any(
            tagged <= at <= tagged + self.window_us
            for tagged in self._tags.get(digest, ())
        )


# ---------------------------------------------------------------------------
# Localization and mitigation
# ---------------------------------------------------------------------------


def bind_origin(frame: GooseFrame, whitelist: dict[str, MacAddress]) -> Origin:
    """Claimed-identity binding: a frame is the relay's only if both its
    control block reference and source address match the whitelist;
    anything else materialized inside the station-bus fabric."""
    expected = whitelist.get(frame.gocb_ref)
    if expected is not None and frame.src == expected:
        return Origin.PIED
    return Origin.STATION_BUS_SWITCH


def localize(observations: Iterable[ObservationRecord]) -> LocalizationVerdict:
    """Apply the two-row decision table to the abnormal observations.

    Digest groups are settled as a whole: a non-echo loop-return sighting
    convicts the switch for every copy of that digest. Raises
    ``Inconclusive`` when neither row holds; never guesses.
    """
    obs = tuple(sorted(observations, key=lambda o: o.time))
    if not obs:
        raise ValueError("localization needs at least one abnormal observation")

    from gridshield import substation as sub

    switch_digests = {
        o.digest
        for o in obs
        if (o.ingress_port == sub.IDS_LOOP_RETURN and not o.loop)
        or o.origin_hypothesis is Origin.STATION_BUS_SWITCH
    }

    if switch_digests:
        evidence = tuple(
            replace(o, origin_hypothesis=Origin.STATION_BUS_SWITCH)
            if o.digest in switch_digests
            else o
            for o in obs
        )
        return LocalizationVerdict(Origin.STATION_BUS_SWITCH, evidence, obs[-1].time)

    first = obs[0]
    main_feed_pied = any(
        o.ingress_port == sub.IDS_MAIN_FEED and o.origin_hypothesis is Origin.PIED
        for o in obs
    )
    loop_returns_all_echo = all(
        o.loop for o in obs if o.ingress_port == sub.IDS_LOOP_RETURN
    )
    if first.ingress_port == sub.IDS_MAIN_FEED and main_feed_pied and loop_returns_all_echo:
        return LocalizationVerdict(Origin.PIED, obs, obs[-1].time)

    raise Inconclusive(obs)


def mitigate(verdict: LocalizationVerdict) -> list[PortMod]:
    """Port-disable plan for the convicted device.

    A compromised station-bus switch loses every link to the inspection
    device: all inspection ports are disabled except the delivery port and
    the relay's direct feed, which keep protection traffic alive. A
    compromised relay is cut off at the two switch ports facing it.
    """
    from gridshield import substation as sub

    if verdict.culprit is Origin.STATION_BUS_SWITCH:
        return [
            PortMod(sub.IDS, port, enable=False)
            for port in sub.IDS_PORTS
            if port not in sub.IDS_KEEP_ENABLED
        ]
    return [
        PortMod(sub.STATION_BUS, sub.SBS_PIED, enable=False),
        PortMod(sub.PROCESS_BUS, sub.PBS_PIED, enable=False),
    ]


# ---------------------------------------------------------------------------
# The device
# ---------------------------------------------------------------------------


class IdsNode(SwitchNode):
    """The IDS-integrated SDN device: a switch that also inspects.

    Monitored GOOSE arrivals are inspected before forwarding; abnormal
    ones accumulate as observations. The first abnormal observation arms
    a decision timer (long enough for the loop echo and any in-flight
    forwards to land); when it fires, the decision table either names a
    culprit, which is logged and mitigated through the controller channel,
    or the evidence is logged as inconclusive and the timer re-arms on the
    next abnormal sighting.
    """

    def __init__(
        self,
        net: Network,
        table: FlowTable,
        rules: RuleSet,
        *,
        with_ids: bool = True,
        processing_delay: SimTime = 4_000,
        loop_window_us: SimTime = 10_000,
        decision_window_us: SimTime = 15_000,
        controller_latency_us: SimTime = 1_000,
        node_id: str = "ids",
        monitored_ports: tuple[int, ...] = (3, 6, 7),
        loop_out_port: int = 4,
        loop_return_port: int = 7,
    ):
        super().__init__(net, node_id, table, processing_delay if with_ids else 0)
        self.rules = rules
        self.with_ids = with_ids
        self.state = SubscriptionState()
        self.loops = LoopTracker(loop_window_us)
        self.decision_window_us = decision_window_us
        self.controller_latency_us = controller_latency_us
        self.monitored_ports = monitored_ports
        self.loop_out_port = loop_out_port
        self.loop_return_port = loop_return_port
        self.observations: list[ObservationRecord] = []
        self.alerts: list[Alert] = []
        self.alerted_digests: set[str] = set()
        self.verdict: LocalizationVerdict | None = None
        self._decision_armed = False

    def on_frame(self, port: int, raw: RawFrame, at: SimTime) -> None:
        if self.with_ids and port in self.monitored_ports and raw.ethertype == GOOSE_ETHERTYPE:
            self._inspect_arrival(port, raw, at)
        self._forward(raw, port, at)

    # -- inspection ----------------------------------------------------------

    def _inspect_arrival(self, port: int, raw: RawFrame, at: SimTime) -> None:
        digest = frame_digest(raw)
        try:
            frame = decode_goose(raw)
        except CodecError:
            alert = Alert(at, MALFORMED_RULE_ID, "", port, digest)
            self._raise_alerts([alert])
            # undecodable frames cannot bind to the relay's identity
            self._observe(Origin.STATION_BUS_SWITCH, port, digest, loop=False, at=at)
            return
        loop = port == self.loop_return_port and self.loops.is_loop(digest, at)
        _, alerts = inspect(frame, port, self.state, self.rules, at)
        if not alerts:
            return
        self._raise_alerts(alerts)
        if port == self.loop_return_port and not loop:
            origin = Origin.STATION_BUS_SWITCH
        else:
            origin = bind_origin(frame, self.rules.whitelist)
        self._observe(origin, port, digest, loop, at)

    def _raise_alerts(self, alerts: list[Alert]) -> None:
        for alert in alerts:
            self.alerts.append(alert)
            self.alerted_digests.add(alert.digest)
            self.net.log_event(
                "AlertRaised",
                self.node_id,
                alert.ingress_port,
                alert.digest,
                note=f"rule={alert.rule_id} gocb={alert.gocb_ref}",
            )

    def _observe(self, origin: Origin, port: int, digest: str, loop: bool, at: SimTime) -> None:
        self.observations.append(ObservationRecord(origin, port, digest, loop, at))
        if not self._decision_armed and self.verdict is None:
            self._decision_armed = True
            self.net.call(at + self.decision_window_us, self._decide)

    # -- forwarding ----------------------------------------------------------

    def _forward(self, raw: RawFrame, ingress: int, at: SimTime) -> None:
        actions = match_frame(self.table, raw, ingress)
        emitted = False
        for action in actions:
            if isinstance(action, Forward):
                departure = at + self.processing_delay
                if action.port == self.loop_out_port:
                    self.loops.tag_loop(frame_digest(raw), departure)
                self.net.send(PortRef(self.node_id, action.port), raw, departure)
                emitted = True
        if not emitted:
            self.net.log_event("Drop", self.node_id, ingress, frame_digest(raw), "no_forwarding_entry")

    # -- decision ------------------------------------------------------------

    def _decide(self) -> None:
        self._decision_armed = False
        if self.verdict is not None:
            return
        at = self.net.now
        try:
            verdict = localize(self.observations)
        except Inconclusive:
            self.net.log_event(
                "ControlMsg", self.node_id, None, None,
                note=f"localization_inconclusive observations={len(self.observations)}",
            )
            return
        self.verdict = verdict
        ports = sorted({o.ingress_port for o in verdict.evidence})
        self.net.log_event(
            "VerdictReached", self.node_id, None, None,
            note=f"culprit={verdict.culprit.value} evidence={len(verdict.evidence)} "
            f"ports={','.join(str(p) for p in ports)}",
        )
        for mod in mitigate(verdict):
            self.net.log_event(
                "ControlMsg", mod.switch, mod.port, None,
                note=f"port_mod {'enable' if mod.enable else 'disable'}",
            )
            self.net.set_port_state(
                PortRef(mod.switch, mod.port), mod.enable, at + self.controller_latency_us
            )
