"""Default substation layout: six node roles and their port wiring.

The inspection device (``ids``) owns eight numbered ports:

    p1  <- process-bus switch tap (sampled values, monitored passively)
    p2     spare
    p3  <- station-bus switch, main monitored feed
    p4  -> station-bus switch p1, re-forward loop out
    p5  -> test set (breaker), delivery port
    p6  <- protection relay, direct monitored feed
    p7  <- station-bus switch p3, loop return feed
    p8     spare

The station-bus switch faces the relay on its p4 and the injection point
on its p6; the process-bus switch faces the relay on its p5. The relay is
dual-homed on the station-bus side: its GOOSE publications leave both its
switch-facing port and its direct inspection feed.

Link latencies are free parameters constrained only by the configured
aggregate communication delays, so they are derived here from the delay
split: the sampled-value legs sum to ``t_sv`` and the trip-path GOOSE legs
sum to ``t_gs``. The relay's direct feed is calibrated to equal the
switch path (relay->switch latency + switch processing + switch->inspector
latency) so that the duplicate delivery to the breaker arrives at the same
microsecond via either path and the measured end-to-end budget stays
exact.
"""

from __future__ import annotations

from gridshield.codec import GOOSE_ETHERTYPE, SV_ETHERTYPE, MacAddress
from gridshield.delay import DelayComponents
from gridshield.netsim import TopologySpec
from gridshield.sdn import Drop, FlowEntry, FlowTable, Forward, MatchFields

# Node identifiers (the six roles of the testbed).
OMICRON = "omicron"
MU = "mu"
PIED = "pied"
PROCESS_BUS = "process_bus_switch"
STATION_BUS = "station_bus_switch"
IDS = "ids"

ALL_NODES = (OMICRON, MU, PIED, PROCESS_BUS, STATION_BUS, IDS)

# IDS front panel.
IDS_PORTS = tuple(range(1, 9))
IDS_SV_TAP = 1
IDS_MAIN_FEED = 3
IDS_LOOP_OUT = 4
IDS_DELIVERY = 5
IDS_PIED_FEED = 6
IDS_LOOP_RETURN = 7
IDS_MONITORED = (IDS_MAIN_FEED, IDS_PIED_FEED, IDS_LOOP_RETURN)
IDS_KEEP_ENABLED = (IDS_DELIVERY, IDS_PIED_FEED)

# Station-bus switch ports.
SBS_LOOP_IN = 1       # from ids p4
SBS_TO_IDS = 2        # to ids p3
SBS_LOOP_OUT = 3      # to ids p7
SBS_PIED = 4          # relay's switch-facing GOOSE port
SBS_INJECT = 6        # unwired; scenario-1 injection point

# Process-bus switch ports.
PBS_FROM_MU = 1
PBS_IDS_TAP = 2       # to ids p1
PBS_PIED = 5          # sampled values toward the relay

# Relay (PIED) ports.
PIED_SV_IN = 1
PIED_STATION = 2      # toward station-bus switch p4
PIED_IDS_DIRECT = 3   # toward ids p6

OMICRON_PORT = 1
MU_PORT = 1

# Device identities.
PIED_MAC = MacAddress.parse("00:30:A7:00:00:01")
MU_MAC = MacAddress.parse("00:30:A7:00:00:02")
STATION_BUS_MAC = MacAddress.parse("00:30:A7:00:00:10")
GOOSE_DST = MacAddress.parse("01:0C:CD:01:00:01")
SV_DST = MacAddress.parse("01:0C:CD:04:00:01")

GOCB_REF = "PIED/LLN0$GO$gcb1"
DATASET_REF = "PIED/LLN0$dataset1"
PIED_APP_ID = 0x0001
SV_ID = "MU01"

# Monitored-feed split of the aggregate link budgets (microseconds).
SV_LEG_MU_TO_PBS = 1_000
GOOSE_LEG_PIED_TO_SBS = 500
GOOSE_LEG_SBS_TO_IDS = 500
LOOP_LEG_LATENCY = 500
IDS_TAP_LATENCY = 500


def default_topology(delays: DelayComponents) -> TopologySpec:
    """Wire the six roles; latencies derive from the configured delay split."""
    sv_leg_pbs_to_pied = delays.t_sv - SV_LEG_MU_TO_PBS
    goose_leg_ids_to_omicron = (
        delays.t_gs - GOOSE_LEG_PIED_TO_SBS - GOOSE_LEG_SBS_TO_IDS
    )
    if sv_leg_pbs_to_pied < 0 or goose_leg_ids_to_omicron < 0:
        raise ValueError("aggregate link budgets below the fixed first legs")
    # Calibrated so both breaker paths measure identically (see module doc).
    pied_direct = GOOSE_LEG_PIED_TO_SBS + delays.t_ss + GOOSE_LEG_SBS_TO_IDS
    return TopologySpec(
        nodes={
            OMICRON: 1,
            MU: 1,
            PIED: 3,
            PROCESS_BUS: 6,
            STATION_BUS: 6,
            IDS: 8,
        },
        links=(
            (MU, MU_PORT, PROCESS_BUS, PBS_FROM_MU, SV_LEG_MU_TO_PBS),
            (PROCESS_BUS, PBS_PIED, PIED, PIED_SV_IN, sv_leg_pbs_to_pied),
            (PROCESS_BUS, PBS_IDS_TAP, IDS, IDS_SV_TAP, IDS_TAP_LATENCY),
            (PIED, PIED_STATION, STATION_BUS, SBS_PIED, GOOSE_LEG_PIED_TO_SBS),
            (STATION_BUS, SBS_TO_IDS, IDS, IDS_MAIN_FEED, GOOSE_LEG_SBS_TO_IDS),
            (IDS, IDS_DELIVERY, OMICRON, OMICRON_PORT, goose_leg_ids_to_omicron),
            (PIED, PIED_IDS_DIRECT, IDS, IDS_PIED_FEED, pied_direct),
            (IDS, IDS_LOOP_OUT, STATION_BUS, SBS_LOOP_IN, LOOP_LEG_LATENCY),
            (STATION_BUS, SBS_LOOP_OUT, IDS, IDS_LOOP_RETURN, LOOP_LEG_LATENCY),
        ),
    )


def _entry(priority: int, actions, **match) -> FlowEntry:
    return FlowEntry(priority=priority, match=MatchFields(**match), actions=tuple(actions))


def station_bus_flow_table() -> FlowTable:
    """Relay traffic goes to the main inspection feed; loop traffic returns
    on the loop feed; unexpected ingress is mirrored to both monitor feeds."""
    return FlowTable(
        entries=(
            _entry(100, [Forward(SBS_TO_IDS)], ingress_port=SBS_PIED),
            _entry(100, [Forward(SBS_LOOP_OUT)], ingress_port=SBS_LOOP_IN),
            _entry(100, [Forward(SBS_TO_IDS)], ingress_port=SBS_INJECT),
            _entry(90, [Forward(SBS_LOOP_OUT)], ingress_port=SBS_INJECT),
        ),
    )


def process_bus_flow_table() -> FlowTable:
    """Sampled values fan out to the relay and to the inspection tap."""
    return FlowTable(
        entries=(
            _entry(100, [Forward(PBS_PIED)], ingress_port=PBS_FROM_MU, ethertype=SV_ETHERTYPE),
            _entry(90, [Forward(PBS_IDS_TAP)], ingress_port=PBS_FROM_MU, ethertype=SV_ETHERTYPE),
        ),
    )


def ids_flow_table(with_ids: bool) -> FlowTable:
    """Forwarding rules of the inspection device itself.

    With the module active, main-feed GOOSE is duplicated to the loop and
    to the delivery port; the direct relay feed goes straight to delivery.
    Without the module the device is a transparent wire on both feeds.
    The loop return and the sampled-value tap are terminal monitor ports.
    """
    if with_ids:
        entries = (
            _entry(100, [Forward(IDS_LOOP_OUT)], ingress_port=IDS_MAIN_FEED, ethertype=GOOSE_ETHERTYPE),
            _entry(90, [Forward(IDS_DELIVERY)], ingress_port=IDS_MAIN_FEED, ethertype=GOOSE_ETHERTYPE),
            _entry(100, [Forward(IDS_DELIVERY)], ingress_port=IDS_PIED_FEED, ethertype=GOOSE_ETHERTYPE),
            _entry(100, [Drop()], ingress_port=IDS_LOOP_RETURN),
            _entry(100, [Drop()], ingress_port=IDS_SV_TAP),
        )
    else:
        entries = (
            _entry(100, [Forward(IDS_DELIVERY)], ingress_port=IDS_MAIN_FEED, ethertype=GOOSE_ETHERTYPE),
            _entry(100, [Forward(IDS_DELIVERY)], ingress_port=IDS_PIED_FEED, ethertype=GOOSE_ETHERTYPE),
            _entry(100, [Drop()], ingress_port=IDS_LOOP_RETURN),
            _entry(100, [Drop()], ingress_port=IDS_SV_TAP),
        )
    return FlowTable(entries=entries)


# Hops of the measured sampled-value -> trip chain, in order, as
# (node, port, "in"|"out") triples. The delay accounting walks these.
TRIP_PATH = (
    (MU, MU_PORT, "out"),
    (PROCESS_BUS, PBS_FROM_MU, "in"),
    (PROCESS_BUS, PBS_PIED, "out"),
    (PIED, PIED_SV_IN, "in"),
    (PIED, PIED_STATION, "out"),
    (STATION_BUS, SBS_PIED, "in"),
    (STATION_BUS, SBS_TO_IDS, "out"),
    (IDS, IDS_MAIN_FEED, "in"),
    (IDS, IDS_DELIVERY, "out"),
    (OMICRON, OMICRON_PORT, "in"),
)
