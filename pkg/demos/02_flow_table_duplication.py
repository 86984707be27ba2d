#!/usr/bin/env python3
"""Flow-table semantics: multi-entry duplication and live rule updates.

A frame matching several entries is replicated to every distinct forward
port at once; that is how one ingress frame reaches both monitor feeds of
the inspection device simultaneously.

Run:  python3 demos/02_flow_table_duplication.py
"""

from gridshield import (
    FlowEntry,
    FlowMod,
    FlowTable,
    GooseFrame,
    MacAddress,
    MatchFields,
    apply_flow_mod,
    match_frame,
)
from gridshield.codec import encode_goose
from gridshield.netsim import PortRef, TopologySpec, build_topology, events_of_kind
from gridshield.sdn import Forward, SwitchNode

raw = encode_goose(
    GooseFrame(
        dst=MacAddress.parse("01:0C:CD:01:00:01"),
        src=MacAddress.parse("00:30:A7:00:00:01"),
        app_id=0x0001,
        gocb_ref="PIED/LLN0$GO$gcb1",
        time_allowed_to_live=2000,
        st_num=1,
        sq_num=0,
        test=False,
        timestamp=0,
        dataset_ref="PIED/LLN0$dataset1",
        all_data=(False, False),
    )
)

table = FlowTable(
    entries=(
        FlowEntry(100, MatchFields(ingress_port=6), (Forward(2),)),
        FlowEntry(90, MatchFields(ingress_port=6), (Forward(3),)),
        FlowEntry(80, MatchFields(ethertype=0x88B8), (Forward(2),)),  # coalesces
    )
)

print("Actions for a GOOSE frame arriving on port 6:")
print(f"  {match_frame(table, raw, ingress=6)}")
print("(three matching entries, but port 2 is emitted only once)\n")

net = build_topology(
    TopologySpec(
        nodes={"sw": 8, "x": 1, "y": 1},
        links=(("sw", 2, "x", 1, 100), ("sw", 3, "y", 1, 100)),
    )
)
sw = SwitchNode(net, "sw", table, processing_delay=1_000)
net.inject_ingress(PortRef("sw", 6), raw, at=0)
log = net.run_until(10_000)
print("On the wire, one ingress frame becomes one departure per port:")
for dep in events_of_kind(log, "FrameDeparture"):
    print(f"  t={dep.time}us  {dep.node} port {dep.port}")
print()

print("A controller rule update changes forwarding exactly at its event time:")
net2 = build_topology(
    TopologySpec(nodes={"sw": 8, "x": 1}, links=(("sw", 2, "x", 1, 100),))
)
sw2 = SwitchNode(net2, "sw", FlowTable(), processing_delay=1_000)
sw2.apply_flow_mod(
    FlowMod("sw", True, FlowEntry(200, MatchFields(ingress_port=7), (Forward(2),))),
    at=20_000,
)
net2.inject_ingress(PortRef("sw", 7), raw, at=15_000)  # before: dropped
net2.inject_ingress(PortRef("sw", 7), raw, at=25_000)  # after: forwarded
for ev in net2.run_until(40_000):
    if ev.kind in ("Drop", "ControlMsg", "FrameDeparture"):
        print(f"  t={ev.time}us  {ev.kind:<14} {ev.node} p{ev.port} {ev.note or ''}")
print()

extra = FlowEntry(1, MatchFields(ingress_port=1), (Forward(1),))
roundtrip = apply_flow_mod(apply_flow_mod(table, FlowMod("sw", True, extra)),
                           FlowMod("sw", False, extra))
print(f"add then remove the same entry restores the table: {roundtrip == table}")
