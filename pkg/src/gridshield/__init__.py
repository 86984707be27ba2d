"""gridshield: deterministic digital-substation network simulator.

A small library that reproduces GOOSE-injection attacks on an IEC 61850
substation network, the localization decision of an IDS-integrated SDN
device, the port-disabling mitigation, and the end-to-end trip-delay
budget, all on a deterministic discrete-event engine.
"""

from gridshield.codec import (
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
from gridshield.delay import DelayComponents, DelayReport, measure, total
from gridshield.ids import (
    Alert,
    Inconclusive,
    LocalizationVerdict,
    ObservationRecord,
    Origin,
    RuleSet,
    SubscriptionState,
    inspect,
    localize,
    mitigate,
)
from gridshield.netsim import (
    EventLog,
    Network,
    PortRef,
    SimEvent,
    TopologySpec,
    build_topology,
)
from gridshield.scenarios import (
    ScenarioResult,
    ScenarioSpec,
    load_scenario,
    run_scenario,
    score,
    verify_forwarding_trace,
)
from gridshield.sdn import (
    FlowEntry,
    FlowMod,
    FlowTable,
    MatchFields,
    PortMod,
    apply_flow_mod,
    match_frame,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "DelayComponents",
    "DelayReport",
    "EventLog",
    "FlowEntry",
    "FlowMod",
    "FlowTable",
    "GooseFrame",
    "Inconclusive",
    "LocalizationVerdict",
    "MacAddress",
    "MatchFields",
    "Network",
    "ObservationRecord",
    "Origin",
    "PortMod",
    "PortRef",
    "RawFrame",
    "RuleSet",
    "ScenarioResult",
    "ScenarioSpec",
    "SimEvent",
    "SubscriptionState",
    "SvFrame",
    "TopologySpec",
    "apply_flow_mod",
    "build_topology",
    "decode_goose",
    "decode_sv",
    "encode_goose",
    "encode_sv",
    "inspect",
    "load_scenario",
    "localize",
    "match_frame",
    "measure",
    "mitigate",
    "next_publication",
    "run_scenario",
    "score",
    "total",
    "verify_forwarding_trace",
]
