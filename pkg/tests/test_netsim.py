"""Engine tests: topology validation, latency arithmetic, port-state
semantics, determinism, causality and conservation over the event log."""

from __future__ import annotations

import pytest

from gridshield.codec import RawFrame
from gridshield.netsim import (
    DanglingPort,
    DuplicateLink,
    Network,
    PortRef,
    SimEvent,
    TopologySpec,
    UnknownNode,
    UnknownPort,
    UnlinkedPort,
    build_topology,
    events_of_kind,
)
from gridshield.util import frame_digest

FRAME = RawFrame(b"\x00" * 20)
FRAME2 = RawFrame(b"\x01" * 20)


def two_node_net(latency=100) -> Network:
    net = build_topology(
        TopologySpec(nodes={"a": 2, "b": 2}, links=(("a", 1, "b", 1, latency),))
    )
    return net


class TestBuildTopology:
    def test_link_to_missing_node(self):
        spec = TopologySpec(nodes={"a": 2}, links=(("a", 1, "ghost", 1, 10),))
        with pytest.raises(UnknownNode):
            build_topology(spec)

    def test_link_to_port_beyond_count(self):
        spec = TopologySpec(nodes={"a": 2, "ids": 8}, links=(("a", 1, "ids", 9, 10),))
        with pytest.raises(DanglingPort):
            build_topology(spec)

    def test_two_links_sharing_a_port(self):
        spec = TopologySpec(
            nodes={"a": 2, "b": 2, "c": 2},
            links=(("a", 1, "b", 1, 10), ("c", 1, "a", 1, 10)),
        )
        with pytest.raises(DuplicateLink):
            build_topology(spec)

    def test_node_roles_in_spec_are_kept(self):
        spec = TopologySpec(nodes={"x": 1, "y": 3}, links=())
        net = build_topology(spec)
        assert set(net.nodes) == {"x", "y"}
        assert net.nodes["y"] == 3


class TestSend:
    def test_arrival_after_link_latency(self):
        net = two_node_net(latency=100)
        net.send(PortRef("a", 1), FRAME, at=0)
        log = net.run_until(1_000)
        arrivals = events_of_kind(log, "FrameArrival")
        assert len(arrivals) == 1
        assert (arrivals[0].node, arrivals[0].port, arrivals[0].time) == ("b", 1, 100)

    def test_send_from_unlinked_port(self):
        net = two_node_net()
        with pytest.raises(UnlinkedPort):
            net.send(PortRef("a", 2), FRAME, at=0)

    def test_far_port_disabled_drops(self):
        net = two_node_net()
        net.set_port_state(PortRef("b", 1), False, at=0)
        net.send(PortRef("a", 1), FRAME, at=10)
        log = net.run_until(1_000)
        assert not events_of_kind(log, "FrameArrival")
        drops = events_of_kind(log, "Drop")
        assert len(drops) == 1 and drops[0].note == "rx_port_disabled"

    def test_two_sends_same_time_keep_insertion_order(self):
        net = two_node_net()
        net.send(PortRef("a", 1), FRAME, at=5)
        net.send(PortRef("b", 1), FRAME2, at=5)
        log = net.run_until(1_000)
        arrivals = events_of_kind(log, "FrameArrival")
        assert [ev.node for ev in arrivals] == ["b", "a"]
        assert [ev.digest for ev in arrivals] == [frame_digest(FRAME), frame_digest(FRAME2)]


class TestRunUntil:
    def test_empty_network_empty_log(self):
        net = build_topology(TopologySpec(nodes={"a": 1}, links=()))
        assert list(net.run_until(10_000)) == []

    def test_t_end_before_first_event(self):
        net = two_node_net()
        net.send(PortRef("a", 1), FRAME, at=500)
        assert list(net.run_until(499)) == []

    def test_identical_runs_identical_logs(self):
        def build_and_run():
            net = two_node_net()
            net.send(PortRef("a", 1), FRAME, at=5)
            net.send(PortRef("b", 1), FRAME2, at=5)
            net.set_port_state(PortRef("a", 1), False, at=50)
            net.send(PortRef("b", 1), FRAME, at=60)
            return net.run_until(10_000).to_jsonl()

        assert build_and_run() == build_and_run()


class TestPortState:
    def test_disable_then_inject_yields_no_arrivals(self):
        net = two_node_net()
        net.set_port_state(PortRef("a", 1), False, at=0)
        net.inject_ingress(PortRef("a", 1), FRAME, at=10)
        log = net.run_until(1_000)
        assert not events_of_kind(log, "FrameArrival")
        assert any(ev.note == "ingress_port_disabled" for ev in events_of_kind(log, "Drop"))

    def test_enable_already_enabled_is_idempotent(self):
        net = two_node_net()
        net.set_port_state(PortRef("a", 1), True, at=0)
        log = net.run_until(1_000)
        changes = events_of_kind(log, "PortStateChange")
        assert len(changes) == 1
        assert net.port_enabled(PortRef("a", 1))

    def test_in_flight_frame_survives_disable(self):
        # frame departs at 10, flies 100us; both ports disabled at 11
        net = two_node_net(latency=100)
        net.send(PortRef("a", 1), FRAME, at=10)
        net.set_port_state(PortRef("a", 1), False, at=11)
        net.set_port_state(PortRef("b", 1), False, at=11)
        log = net.run_until(1_000)
        arrivals = events_of_kind(log, "FrameArrival")
        assert len(arrivals) == 1 and arrivals[0].time == 110

    def test_unknown_port_rejected(self):
        net = two_node_net()
        with pytest.raises(UnknownPort):
            net.set_port_state(PortRef("a", 7), False, at=0)

    def test_state_change_ordered_with_sends(self):
        # disable processed at t=10 before a send scheduled later at t=10
        net = two_node_net()
        net.set_port_state(PortRef("a", 1), False, at=10)
        net.send(PortRef("a", 1), FRAME, at=10)
        log = net.run_until(1_000)
        assert not events_of_kind(log, "FrameArrival")


class TestLogInvariants:
    def _busy_log(self):
        net = build_topology(
            TopologySpec(
                nodes={"a": 2, "b": 2, "c": 1},
                links=(("a", 1, "b", 1, 100), ("a", 2, "c", 1, 250)),
            )
        )
        for t in range(0, 1000, 90):
            net.send(PortRef("a", 1), FRAME, at=t)
            net.send(PortRef("a", 2), FRAME2, at=t + 1)
        net.set_port_state(PortRef("b", 1), False, at=400)
        net.inject_ingress(PortRef("c", 1), FRAME, at=500)
        return net, net.run_until(5_000)

    def test_log_sorted_by_time_then_seq(self):
        _, log = self._busy_log()
        keys = [(ev.time, ev.seq) for ev in log]
        assert keys == sorted(keys)

    def test_causality_every_arrival_has_departure(self):
        net, log = self._busy_log()
        departures = events_of_kind(log, "FrameDeparture")
        for arr in events_of_kind(log, "FrameArrival"):
            if arr.note == "injected":
                continue
            far = PortRef(arr.node, arr.port)
            near, latency = net.links[far]
            assert any(
                dep.node == near.node
                and dep.port == near.port
                and dep.digest == arr.digest
                and arr.time - dep.time == latency
                for dep in departures
            )

    def test_conservation_departures_equal_arrivals_plus_drops(self):
        _, log = self._busy_log()
        departures = len(events_of_kind(log, "FrameDeparture"))
        link_arrivals = len(
            [ev for ev in events_of_kind(log, "FrameArrival") if ev.note != "injected"]
        )
        tx_drops = len(
            [ev for ev in events_of_kind(log, "Drop") if ev.note in ("tx_port_disabled", "rx_port_disabled")]
        )
        assert departures == link_arrivals + tx_drops


class TestJsonl:
    def test_roundtrip(self):
        _, log = TestLogInvariants()._busy_log()
        text = log.to_jsonl()
        from gridshield.netsim import EventLog

        again = EventLog.from_jsonl(text)
        assert list(again) == list(log)
        assert again.to_jsonl() == text

    def test_event_json_field_order_is_stable(self):
        ev = SimEvent(1, 2, "Drop", "a", 1, "ab", None)
        assert ev.to_json() == '{"t":1,"seq":2,"kind":"Drop","node":"a","port":1,"digest":"ab","note":null}'
