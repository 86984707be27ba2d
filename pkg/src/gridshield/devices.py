"""Endpoint behaviors: merging unit, protection relay, test set, injector.

The merging unit samples a configured three-phase waveform on a fixed
tick and publishes one sampled-value frame per tick (internal delay
``t_mu`` before departure). The relay latches on the first sample whose
phase-current magnitude reaches pickup and publishes a state-changed trip
GOOSE after its protection-computation delay ``t_pied``; it also
heartbeats retransmissions on a fixed interval, out of both its
station-bus port and its direct inspection feed. The test set closes the
loop: a trip command received on its port opens the breaker after its
internal delay ``t_oc``.

The injector is the attack ground truth: it enters crafted frames into
the network on an exact schedule, marked ``injected`` in the log, either
as ingress into a switch pipeline (a compromised switch generating
traffic on one of its own ports) or as egress from a device port (a
compromised relay transmitting on its interface).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from gridshield.codec import (
    CodecError,
    GooseFrame,
    MacAddress,
    RawFrame,
    SvFrame,
    decode_goose,
    decode_sv,
    encode_goose,
    encode_sv,
    next_publication,
)
from gridshield.ids import Origin
from gridshield.netsim import Network, PortRef, SimTime
from gridshield.util import frame_digest


@dataclass(frozen=True)
class Waveform:
    """Steady per-phase magnitudes with an optional fault step on phase A."""

    currents_ma: tuple[int, int, int] = (500, 500, 500)
    voltages_mv: tuple[int, int, int] = (120_000, 120_000, 120_000)
    fault_at_us: SimTime | None = None
    fault_phase_a_ma: int = 5_000

    def sample(self, at: SimTime) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
        currents = self.currents_ma
        if self.fault_at_us is not None and at >= self.fault_at_us:
            currents = (self.fault_phase_a_ma, currents[1], currents[2])
        return currents, self.voltages_mv


@dataclass(frozen=True)
class MuConfig:
    samples_per_second: int = 1_000
    internal_delay_us: SimTime = 3_000  # t_mu
    sv_id: str = "MU01"
    src: MacAddress = field(default_factory=lambda: MacAddress.parse("00:30:A7:00:00:02"))
    dst: MacAddress = field(default_factory=lambda: MacAddress.parse("01:0C:CD:04:00:01"))

    def __post_init__(self) -> None:
        if self.samples_per_second <= 0:
            raise ValueError("samples_per_second must be positive")
        if 1_000_000 % self.samples_per_second:
            raise ValueError("samples_per_second must divide 1e6 for exact ticks")


class MuDevice:
    """Samples the waveform and streams sampled-value frames."""

    def __init__(self, net: Network, config: MuConfig, waveform: Waveform,
                 node_id: str = "mu", port: int = 1):
        self.net = net
        self.config = config
        self.waveform = waveform
        self.port = PortRef(node_id, port)
        self.smp_cnt = 0
        self.period_us = 1_000_000 // config.samples_per_second
        net.register(node_id, self)
        net.call(0, self._tick)

    def on_frame(self, port: int, raw: RawFrame, at: SimTime) -> None:
        pass  # nothing talks to the merging unit

    def _tick(self) -> None:
        at = self.net.now
        currents, voltages = self.waveform.sample(at)
        frame = SvFrame(
            dst=self.config.dst,
            src=self.config.src,
            sv_id=self.config.sv_id,
            smp_cnt=self.smp_cnt,
            currents=currents,
            voltages=voltages,
        )
        raw = encode_sv(frame, smp_cnt_modulus=self.config.samples_per_second)
        self.net.send(self.port, raw, at + self.config.internal_delay_us, note=f"tick_us={at}")
        self.smp_cnt = (self.smp_cnt + 1) % self.config.samples_per_second
        self.net.call(at + self.period_us, self._tick)


@dataclass(frozen=True)
class PiedConfig:
    pickup_current_ma: int = 2_000
    publish_interval_us: SimTime = 1_000_000
    protection_delay_us: SimTime = 10_000  # t_pied
    gocb_ref: str = "PIED/LLN0$GO$gcb1"
    dataset_ref: str = "PIED/LLN0$dataset1"
    app_id: int = 0x0001
    src: MacAddress = field(default_factory=lambda: MacAddress.parse("00:30:A7:00:00:01"))
    dst: MacAddress = field(default_factory=lambda: MacAddress.parse("01:0C:CD:01:00:01"))
    ttl_ms: int = 2_000
    # benign data change (supervision point toggles) giving the stream a
    # second state number; None disables it
    toggle_point_at_us: SimTime | None = None
    # compromised-relay semantics: legitimate publications stop here
    silence_at_us: SimTime | None = None

    def __post_init__(self) -> None:
        if self.pickup_current_ma <= 0:
            raise ValueError("pickup current must be positive")


@dataclass
class BreakerState:
    position: str = "Closed"  # or "Open"
    last_trip_time: SimTime | None = None


class PiedDevice:
    """Overcurrent protection: latches on pickup, publishes the trip.

    Publications carry two boolean points: point 0 is the trip command,
    point 1 a supervision flag used for benign state changes. Every
    publication leaves all configured GOOSE ports at the same instant.
    """

    def __init__(
        self,
        net: Network,
        config: PiedConfig,
        node_id: str = "pied",
        sv_port: int = 1,
        goose_ports: tuple[int, ...] = (2, 3),
    ):
        self.net = net
        self.config = config
        self.node_id = node_id
        self.sv_port = sv_port
        self.goose_ports = goose_ports
        self.latched = False
        self.current: GooseFrame | None = None
        self._next_pub_at: SimTime = 0
        self._silenced = False
        net.register(node_id, self)
        net.call(0, self._pump)
        if config.toggle_point_at_us is not None:
            net.call(config.toggle_point_at_us, self._toggle_point)
        if config.silence_at_us is not None:
            net.call(config.silence_at_us, self._silence)

    # -- reception -----------------------------------------------------------

    def on_frame(self, port: int, raw: RawFrame, at: SimTime) -> None:
        if port != self.sv_port:
            return
        try:
            sv = decode_sv(raw)
        except CodecError:
            return
        if self.latched:
            return
        if any(abs(i) >= self.config.pickup_current_ma for i in sv.currents):
            self.latched = True
            self._publish(
                state_changed=True,
                trip=True,
                at=at + self.config.protection_delay_us,
                note=f"trip trigger={frame_digest(raw)}",
            )

    def reset_latch(self) -> None:
        self.latched = False

    # -- publication ---------------------------------------------------------

    def _silence(self) -> None:
        self._silenced = True

    def _build_first(self, now: SimTime) -> GooseFrame:
        return GooseFrame(
            dst=self.config.dst,
            src=self.config.src,
            app_id=self.config.app_id,
            gocb_ref=self.config.gocb_ref,
            time_allowed_to_live=self.config.ttl_ms,
            st_num=1,
            sq_num=0,
            test=False,
            timestamp=now,
            dataset_ref=self.config.dataset_ref,
            all_data=(False, False),
        )

    def _publish(self, state_changed: bool, at: SimTime, trip: bool = False,
                 toggle: bool = False, note: str | None = None) -> None:
        if self._silenced:
            return
        if self.current is None:
            frame = self._build_first(at)
        else:
            frame = next_publication(self.current, state_changed, now=at)
        points = list(frame.all_data)
        if trip:
            points[0] = True
        if toggle:
            points[1] = not points[1]
        frame = GooseFrame(**{**frame.__dict__, "all_data": tuple(points)})
        self.current = frame
        raw = encode_goose(frame)
        for port in self.goose_ports:
            self.net.send(PortRef(self.node_id, port), raw, at, note=note)
        # a publication restarts the retransmission timer
        self._next_pub_at = at + self.config.publish_interval_us

    def _pump(self) -> None:
        if self._silenced:
            return
        at = self.net.now
        if at >= self._next_pub_at:
            self._publish(state_changed=False, at=at)
        self.net.call(self._next_pub_at, self._pump)

    def _toggle_point(self) -> None:
        self._publish(state_changed=True, toggle=True, at=self.net.now)


class OmicronDevice:
    """Waveform source stand-in and circuit-breaker sink.

    The sourcing side lives in the merging unit's configured waveform; this
    node closes the loop by acting on received trip commands. With
    ``act_on_flagged`` false (the default), trip frames the inspection
    device has already alerted on are quarantined copies forwarded for
    analysis and do not move the breaker.
    """

    def __init__(
        self,
        net: Network,
        node_id: str = "omicron",
        internal_delay_us: SimTime = 4_000,  # t_oc
        act_on_flagged: bool = False,
        flagged_digests: set[str] | None = None,
    ):
        self.net = net
        self.node_id = node_id
        self.internal_delay_us = internal_delay_us
        self.act_on_flagged = act_on_flagged
        self.flagged_digests = flagged_digests if flagged_digests is not None else set()
        self.breaker = BreakerState()
        self._trip_pending = False
        net.register(node_id, self)

    def on_frame(self, port: int, raw: RawFrame, at: SimTime) -> None:
        try:
            frame = decode_goose(raw)
        except CodecError:
            return
        if not frame.trip:
            return
        digest = frame_digest(raw)
        if not self.act_on_flagged and digest in self.flagged_digests:
            return
        if self.breaker.position == "Open" or self._trip_pending:
            return
        self._trip_pending = True

        def open_breaker() -> None:
            self.breaker.position = "Open"
            self.breaker.last_trip_time = self.net.now
            self._trip_pending = False
            self.net.log_event("BreakerTrip", self.node_id, None, digest, note="breaker=open")

        self.net.call(at + self.internal_delay_us, open_breaker)


@dataclass(frozen=True)
class InjectionPlan:
    """Ground-truth attack schedule for one scenario."""

    host: Origin
    port: PortRef
    mode: str  # "ingress" into a switch pipeline, "egress" from a device port
    template: GooseFrame
    times_us: tuple[SimTime, ...]

    def __post_init__(self) -> None:
        if self.mode not in ("ingress", "egress"):
            raise ValueError(f"unknown injection mode {self.mode!r}")


def inject(net: Network, plan: InjectionPlan) -> None:
    """Schedule every injection of the plan, marked in the log."""
    raw = encode_goose(plan.template)
    for at in plan.times_us:
        if plan.mode == "ingress":
            net.inject_ingress(plan.port, raw, at, note="injected")
        else:
            net.send(plan.port, raw, at, note="injected")
