"""Device behavior: sampling cadence, overcurrent latch, breaker
idempotence, publication sequencing, and ground-truth injection."""

from __future__ import annotations

import pytest

from gridshield.codec import decode_goose, decode_sv
from gridshield.devices import (
    InjectionPlan,
    MuConfig,
    MuDevice,
    OmicronDevice,
    PiedConfig,
    PiedDevice,
    Waveform,
    inject,
)
from gridshield.ids import Origin
from gridshield.netsim import PortRef, TopologySpec, build_topology, events_of_kind
from tests.test_codec import golden_goose_frame
from gridshield.codec import encode_goose


def mini_process_bus():
    """mu -> pied over one wire, no switch, for endpoint-only tests."""
    net = build_topology(
        TopologySpec(
            nodes={"mu": 1, "pied": 3, "sink": 2},
            links=(
                ("mu", 1, "pied", 1, 1_000),
                ("pied", 2, "sink", 1, 1_000),
                ("pied", 3, "sink", 2, 1_000),
            ),
        )
    )
    return net


class _Capture:
    def __init__(self):
        self.frames = []

    def on_frame(self, port, raw, at):
        self.frames.append((port, raw, at))


class TestMuDevice:
    def test_smp_cnt_increments_and_wraps(self):
        net = mini_process_bus()
        cap = _Capture()
        net.register("pied", cap)
        MuDevice(net, MuConfig(samples_per_second=1_000), Waveform(), port=1)
        net.run_until(3_000_000)
        counts = [decode_sv(raw).smp_cnt for _, raw, _ in cap.frames]
        assert counts[:3] == [0, 1, 2]
        assert max(counts) == 999 and counts.count(0) >= 2  # wrapped

    def test_fault_sample_propagates_intact(self):
        net = mini_process_bus()
        cap = _Capture()
        net.register("pied", cap)
        wave = Waveform(fault_at_us=5_000, fault_phase_a_ma=4_321)
        MuDevice(net, MuConfig(), wave)
        net.run_until(10_000)
        faulted = [decode_sv(raw) for _, raw, _ in cap.frames if decode_sv(raw).currents[0] == 4_321]
        assert faulted and faulted[0].voltages == (120_000, 120_000, 120_000)

    def test_departure_is_tick_plus_internal_delay(self):
        net = mini_process_bus()
        MuDevice(net, MuConfig(internal_delay_us=3_000), Waveform())
        log = net.run_until(2_500)  # only the t=0 tick departs within this window
        dep = events_of_kind(log, "FrameDeparture")
        assert not dep
        log = net.run_until(3_000)
        dep = events_of_kind(log, "FrameDeparture")
        assert dep and dep[0].time == 3_000 and dep[0].note == "tick_us=0"

    def test_rate_must_divide_microseconds(self):
        with pytest.raises(ValueError):
            MuConfig(samples_per_second=333)


class TestPiedDevice:
    def _run(self, wave, pied_cfg=None, until=2_000_000):
        net = mini_process_bus()
        cap = _Capture()
        net.register("sink", cap)
        MuDevice(net, MuConfig(), wave)
        pied = PiedDevice(net, pied_cfg or PiedConfig(), goose_ports=(2, 3))
        log = net.run_until(until)
        return net, cap, pied, log

    def test_no_trip_below_pickup(self):
        _, cap, pied, _ = self._run(Waveform())
        trips = [raw for _, raw, _ in cap.frames if decode_goose(raw).trip]
        assert not trips and not pied.latched

    def test_trip_departs_protection_delay_after_fault_arrival(self):
        wave = Waveform(fault_at_us=100_000)
        net, cap, pied, log = self._run(wave)
        assert pied.latched
        # fault tick at 100ms; sample departs mu at +3ms, arrives +1ms wire
        arrival = 100_000 + 3_000 + 1_000
        trip_deps = [
            ev for ev in events_of_kind(log, "FrameDeparture")
            if ev.node == "pied" and ev.note and ev.note.startswith("trip")
        ]
        assert trip_deps and trip_deps[0].time == arrival + 10_000
        assert {ev.port for ev in trip_deps} == {2, 3}

    def test_latch_prevents_second_trip_state_change(self):
        wave = Waveform(fault_at_us=100_000)
        _, cap, _, _ = self._run(wave)
        decoded = [decode_goose(raw) for port, raw, _ in cap.frames if port == 1]
        trip_states = {f.st_num for f in decoded if f.trip}
        assert len(trip_states) == 1  # retransmissions only, one state change

    def test_heartbeats_increment_sq(self):
        _, cap, _, _ = self._run(Waveform(), until=3_500_000)
        decoded = [decode_goose(raw) for port, raw, _ in cap.frames if port == 1]
        assert [f.sq_num for f in decoded[:4]] == [0, 1, 2, 3]
        assert len({f.st_num for f in decoded}) == 1

    def test_toggle_changes_state_number_not_trip(self):
        cfg = PiedConfig(toggle_point_at_us=1_500_000)
        _, cap, _, _ = self._run(Waveform(), pied_cfg=cfg, until=3_000_000)
        decoded = [decode_goose(raw) for port, raw, _ in cap.frames if port == 1]
        assert {f.st_num for f in decoded} == {1, 2}
        toggled = [f for f in decoded if f.st_num == 2]
        assert toggled[0].sq_num == 0 and toggled[0].all_data == (False, True)

    def test_silence_stops_publications(self):
        cfg = PiedConfig(silence_at_us=1_500_000)
        _, cap, _, _ = self._run(Waveform(), pied_cfg=cfg, until=5_000_000)
        last_pub = max(at for _, _, at in cap.frames)
        assert last_pub < 1_500_000

    def test_latch_reset_allows_new_trip(self):
        wave = Waveform(fault_at_us=100_000)
        net, _, pied, _ = self._run(wave)
        assert pied.latched
        pied.reset_latch()
        assert not pied.latched


class TestOmicronDevice:
    def _net(self):
        net = build_topology(
            TopologySpec(nodes={"src": 1, "omicron": 1}, links=(("src", 1, "omicron", 1, 500),))
        )
        return net

    def _trip_raw(self):
        frame = golden_goose_frame()
        from gridshield.codec import GooseFrame

        return encode_goose(GooseFrame(**{**frame.__dict__, "all_data": (True,)}))

    def test_trip_frame_opens_breaker_after_internal_delay(self):
        net = self._net()
        om = OmicronDevice(net, internal_delay_us=4_000)
        net.send(PortRef("src", 1), self._trip_raw(), at=0)
        log = net.run_until(100_000)
        trips = events_of_kind(log, "BreakerTrip")
        assert om.breaker.position == "Open"
        assert trips[0].time == 500 + 4_000
        assert om.breaker.last_trip_time == 4_500

    def test_non_trip_frame_ignored(self):
        from gridshield.codec import GooseFrame

        net = self._net()
        om = OmicronDevice(net)
        heartbeat = GooseFrame(**{**golden_goose_frame().__dict__, "all_data": (False,)})
        net.send(PortRef("src", 1), encode_goose(heartbeat), at=0)
        net.run_until(100_000)
        assert om.breaker.position == "Closed"

    def test_second_trip_is_idempotent(self):
        net = self._net()
        om = OmicronDevice(net)
        net.send(PortRef("src", 1), self._trip_raw(), at=0)
        net.send(PortRef("src", 1), self._trip_raw(), at=0)  # duplicated copy
        net.send(PortRef("src", 1), self._trip_raw(), at=50_000)
        log = net.run_until(100_000)
        assert len(events_of_kind(log, "BreakerTrip")) == 1
        assert om.breaker.position == "Open"

    def test_flagged_trip_is_quarantined(self):
        from gridshield.util import frame_digest

        net = self._net()
        raw = self._trip_raw()
        om = OmicronDevice(net, flagged_digests={frame_digest(raw)})
        net.send(PortRef("src", 1), raw, at=0)
        net.run_until(100_000)
        assert om.breaker.position == "Closed"

    def test_flagged_trip_acts_when_policy_allows(self):
        from gridshield.util import frame_digest

        net = self._net()
        raw = self._trip_raw()
        om = OmicronDevice(net, act_on_flagged=True, flagged_digests={frame_digest(raw)})
        net.send(PortRef("src", 1), raw, at=0)
        net.run_until(100_000)
        assert om.breaker.position == "Open"


class TestInject:
    def test_ingress_injection_marks_ground_truth(self):
        net = build_topology(TopologySpec(nodes={"sw": 6}, links=()))
        cap = _Capture()
        net.register("sw", cap)
        plan = InjectionPlan(
            host=Origin.STATION_BUS_SWITCH,
            port=PortRef("sw", 6),
            mode="ingress",
            template=golden_goose_frame(),
            times_us=(1_000, 2_000, 3_000),
        )
        inject(net, plan)
        log = net.run_until(10_000)
        injected = [ev for ev in events_of_kind(log, "FrameArrival") if ev.note == "injected"]
        assert [ev.time for ev in injected] == [1_000, 2_000, 3_000]
        assert len(cap.frames) == 3

    def test_egress_injection_travels_the_wire(self):
        net = build_topology(
            TopologySpec(nodes={"pied": 3, "sw": 6}, links=(("pied", 2, "sw", 4, 500),))
        )
        cap = _Capture()
        net.register("sw", cap)
        plan = InjectionPlan(
            host=Origin.PIED,
            port=PortRef("pied", 2),
            mode="egress",
            template=golden_goose_frame(),
            times_us=(1_000,),
        )
        inject(net, plan)
        log = net.run_until(10_000)
        deps = [ev for ev in events_of_kind(log, "FrameDeparture") if ev.note == "injected"]
        assert deps and deps[0].time == 1_000
        assert cap.frames and cap.frames[0][2] == 1_500

    def test_injection_on_disabled_port_reaches_nothing(self):
        net = build_topology(TopologySpec(nodes={"sw": 6}, links=()))
        cap = _Capture()
        net.register("sw", cap)
        net.set_port_state(PortRef("sw", 6), False, at=0)
        plan = InjectionPlan(
            host=Origin.STATION_BUS_SWITCH,
            port=PortRef("sw", 6),
            mode="ingress",
            template=golden_goose_frame(),
            times_us=(1_000,),
        )
        inject(net, plan)
        log = net.run_until(10_000)
        assert not events_of_kind(log, "FrameArrival")
        assert not cap.frames
