"""Executable case-study fixtures with pass/fail scoring.

Three fixtures share one topology and differ only in traffic:

* ``baseline``: no attack; a phase-A fault steps the waveform, the relay
  trips, and the breaker opens exactly the configured delay budget after
  the fault sample. Runs with the inspection module transparent
  (``with_ids: false``) to reproduce the no-module budget, or active to
  show the added inspection delay.
* ``attack1``: stale GOOSE replays are generated inside the station-bus
  switch on its unwired port 6 while the relay keeps publishing. The
  switch's mirror entries duplicate the injected frames to both monitor
  feeds, the inspector convicts the switch, and mitigation leaves only
  the delivery and direct-relay ports enabled.
* ``attack2``: the relay is compromised mid-run (its legitimate publisher
  goes silent) and replays stale frames out its station-bus interface.
  The loop correlation shows every loop-return sighting to be the
  inspector's own echo, the relay is convicted, and the two switch ports
  facing it are disabled, isolating it while sampled values still reach
  the inspection tap.

Scoring is a pure function of the event log: a saved log re-scores to the
identical result. The first log line is a control-channel banner naming
the scenario and the few config-derived expectations, and the last line
is a completion record carrying the event count, which lets a replay
detect truncation.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from gridshield import substation as sub
from gridshield.codec import GooseFrame, MacAddress
from gridshield.delay import (
    BASELINE_TOTAL_US,
    DelayComponents,
    DelayReport,
    IDS_ADDED_CAP_US,
    NoTripFound,
    QUARTER_CYCLE_60HZ_US,
    WITH_IDS_CAP_US,
    measure,
    total,
)
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
from gridshield.ids import IdsNode, Origin, Rule, RuleKind, RuleSet, default_rules
from gridshield.netsim import EventLog, PortRef, SimEvent, TopologySpec, build_topology
from gridshield.sdn import Drop, FlowEntry, FlowTable, Forward, MatchFields, SwitchNode, ToController

MS = 1_000

SCENARIO_IDS = ("baseline", "attack1", "attack2")

# The externally observable hop sequences of the two attacks, as
# (node, port, direction) triples matched in order against the log.
ATTACK1_TRACE = (
    (sub.STATION_BUS, sub.SBS_INJECT, "in"),
    (sub.IDS, sub.IDS_MAIN_FEED, "in"),
    (sub.IDS, sub.IDS_LOOP_OUT, "out"),
    (sub.STATION_BUS, sub.SBS_LOOP_IN, "in"),
    (sub.STATION_BUS, sub.SBS_LOOP_OUT, "out"),
    (sub.IDS, sub.IDS_LOOP_RETURN, "in"),
)
ATTACK2_TRACE = ATTACK1_TRACE[1:]

RECALL_WINDOW_US = 50 * MS


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything one run needs; shipped as YAML, overridable per key.

    Topology, flow tables and rule set are taken from the config when the
    corresponding section is present, and from the built-in substation
    defaults otherwise (the shipped fixtures use the defaults so that the
    wiring follows any delay-split override).
    """

    id: str
    duration_us: int
    with_ids: bool
    delays: DelayComponents
    inspection_passes: int
    decision_window_us: int
    loop_window_us: int
    controller_latency_us: int
    mu: MuConfig
    pied: PiedConfig
    waveform: Waveform
    injection: InjectionPlan | None
    act_on_flagged: bool = False
    explicit_topology: TopologySpec | None = None
    explicit_flow_tables: dict[str, FlowTable] | None = None
    explicit_rules: RuleSet | None = None

    def topology(self) -> TopologySpec:
        if self.explicit_topology is not None:
            return self.explicit_topology
        return sub.default_topology(self.delays)

    def flow_table(self, node: str) -> FlowTable:
        if self.explicit_flow_tables and node in self.explicit_flow_tables:
            return self.explicit_flow_tables[node]
        if node == sub.PROCESS_BUS:
            return sub.process_bus_flow_table()
        if node == sub.STATION_BUS:
            return sub.station_bus_flow_table()
        if node == sub.IDS:
            return sub.ids_flow_table(with_ids=self.with_ids)
        raise ScenarioError(f"{node} has no flow table")

    def rules(self) -> RuleSet:
        if self.explicit_rules is not None:
            return self.explicit_rules
        return dataclasses.replace(
            default_rules(),
            whitelist={self.pied.gocb_ref: self.pied.src},
            ingress_map={self.pied.gocb_ref: sub.IDS_MONITORED},
        )

    def expected_total_us(self) -> int:
        return total(dataclasses.replace(self.delays, with_ids=self.with_ids))

    def settle_us(self) -> int:
        return max(lat for *_ignored, lat in self.topology().links)


@dataclass(frozen=True)
class ScenarioResult:
    scenario: str
    passed: bool
    reasons: tuple[str, ...]
    verdict_culprit: str | None
    verdict_evidence_ports: tuple[int, ...]
    alerts: int
    injected: int
    injected_alerted: int
    enabled_ids_ports: tuple[int, ...]
    disabled_ports: dict[str, tuple[int, ...]]
    breaker_trips: int
    trace_ok: bool | None
    delay: DelayReport | None
    log: EventLog = field(repr=False, compare=False)

    @property
    def recall(self) -> float:
        return self.injected_alerted / self.injected if self.injected else 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "scenario": self.scenario,
                "pass": self.passed,
                "reasons": list(self.reasons),
                "verdict": {
                    "culprit": self.verdict_culprit,
                    "evidence_ports": list(self.verdict_evidence_ports),
                },
                "alerts": self.alerts,
                "injected": self.injected,
                "injected_alerted": self.injected_alerted,
                "recall": self.recall,
                "enabled_ids_ports": list(self.enabled_ids_ports),
                "disabled_ports": {k: list(v) for k, v in sorted(self.disabled_ports.items())},
                "breaker_trips": self.breaker_trips,
                "trace_ok": self.trace_ok,
                "delay": json.loads(self.delay.to_json()) if self.delay else None,
            },
            indent=2,
        )


# ---------------------------------------------------------------------------
# Fixture loading
# ---------------------------------------------------------------------------


def _builtin_config_text(scenario_id: str) -> str:
    ref = resources.files("gridshield.configs").joinpath(f"{scenario_id}.yaml")
    return ref.read_text()


def load_scenario(name_or_path: str, overrides: dict | None = None) -> ScenarioSpec:
    """Load a shipped fixture by id, or any scenario YAML by path."""
    if name_or_path in SCENARIO_IDS:
        text = _builtin_config_text(name_or_path)
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ScenarioError(f"unknown scenario {name_or_path!r}")
        text = path.read_text()
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"bad scenario config: {exc}") from exc
    if overrides:
        tree = _apply_overrides(tree, overrides)
    return _spec_from_tree(tree)


_OVERRIDE_KEYS = {
    "with_ids": ("with_ids",),
    "duration_ms": ("duration_ms",),
    "t_mu": ("delays_ms", "t_mu"),
    "t_sv": ("delays_ms", "t_sv"),
    "t_sp": ("delays_ms", "t_sp"),
    "t_pied": ("delays_ms", "t_pied"),
    "t_ss": ("delays_ms", "t_ss"),
    "t_gs": ("delays_ms", "t_gs"),
    "t_oc": ("delays_ms", "t_oc"),
    "t_ids": ("delays_ms", "t_ids"),
    "inspection_passes": ("inspection_passes",),
    "decision_window_ms": ("decision_window_ms",),
    "loop_window_ms": ("loop_window_ms",),
    "controller_latency_ms": ("controller_latency_ms",),
    "samples_per_second": ("mu", "samples_per_second"),
    "publish_interval_ms": ("pied", "publish_interval_ms"),
    "pickup_ma": ("pied", "pickup_ma"),
    "toggle_point_at_ms": ("pied", "toggle_point_at_ms"),
    "silence_at_ms": ("pied", "silence_at_ms"),
    "fault_at_ms": ("waveform", "fault_at_ms"),
    "act_on_flagged": ("act_on_flagged",),
}


def _apply_overrides(tree: dict, overrides: dict) -> dict:
    for key, value in overrides.items():
        path = _OVERRIDE_KEYS.get(key)
        if path is None:
            raise ScenarioError(f"unknown override {key!r}")
        node = tree
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return tree


def _ms(value) -> int:
    return int(round(float(value) * MS))


def _spec_from_tree(tree: dict) -> ScenarioSpec:
    try:
        sid = tree["scenario"]
        delays_ms = tree["delays_ms"]
        delays = DelayComponents(
            t_mu=_ms(delays_ms["t_mu"]),
            t_sv=_ms(delays_ms["t_sv"]),
            t_sp=_ms(delays_ms["t_sp"]),
            t_pied=_ms(delays_ms["t_pied"]),
            t_ss=_ms(delays_ms["t_ss"]),
            t_gs=_ms(delays_ms["t_gs"]),
            t_oc=_ms(delays_ms["t_oc"]),
            t_ids=_ms(delays_ms["t_ids"]),
            with_ids=bool(tree["with_ids"]),
        )
        mu_tree = tree.get("mu", {})
        mu = MuConfig(
            samples_per_second=int(mu_tree.get("samples_per_second", 1000)),
            internal_delay_us=delays.t_mu,
        )
        pied_tree = tree.get("pied", {})
        pied = PiedConfig(
            pickup_current_ma=int(pied_tree.get("pickup_ma", 2000)),
            publish_interval_us=_ms(pied_tree.get("publish_interval_ms", 1000)),
            protection_delay_us=delays.t_pied,
            toggle_point_at_us=(
                _ms(pied_tree["toggle_point_at_ms"])
                if pied_tree.get("toggle_point_at_ms") is not None
                else None
            ),
            silence_at_us=(
                _ms(pied_tree["silence_at_ms"])
                if pied_tree.get("silence_at_ms") is not None
                else None
            ),
        )
        wave_tree = tree.get("waveform", {})
        waveform = Waveform(
            currents_ma=tuple(wave_tree.get("currents_ma", (500, 500, 500))),
            voltages_mv=tuple(wave_tree.get("voltages_mv", (120_000, 120_000, 120_000))),
            fault_at_us=(
                _ms(wave_tree["fault_at_ms"]) if wave_tree.get("fault_at_ms") is not None else None
            ),
            fault_phase_a_ma=int(wave_tree.get("fault_phase_a_ma", 5000)),
        )
        injection = _injection_from_tree(tree.get("injection"), pied)
        return ScenarioSpec(
            id=sid,
            duration_us=_ms(tree["duration_ms"]),
            with_ids=bool(tree["with_ids"]),
            delays=delays,
            inspection_passes=int(tree.get("inspection_passes", 1)),
            decision_window_us=_ms(tree.get("decision_window_ms", 15)),
            loop_window_us=_ms(tree.get("loop_window_ms", 10)),
            controller_latency_us=_ms(tree.get("controller_latency_ms", 1)),
            mu=mu,
            pied=pied,
            waveform=waveform,
            injection=injection,
            act_on_flagged=bool(tree.get("act_on_flagged", False)),
            explicit_topology=_topology_from_tree(tree.get("topology")),
            explicit_flow_tables=_flow_tables_from_tree(tree.get("flow_tables")),
            explicit_rules=_rules_from_tree(tree.get("rules"), tree.get("publishers")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario config: {exc}") from exc


def _topology_from_tree(tree: dict | None) -> TopologySpec | None:
    if not tree:
        return None
    links = tuple(
        (str(a), int(pa), str(b), int(pb), _ms(lat))
        for a, pa, b, pb, lat in tree["links"]
    )
    return TopologySpec(nodes={str(n): int(p) for n, p in tree["nodes"].items()}, links=links)


_ETHERTYPE_NAMES = {"goose": 0x88B8, "sv": 0x88BA}


def _flow_tables_from_tree(tree: dict | None) -> dict[str, FlowTable] | None:
    if not tree:
        return None
    out: dict[str, FlowTable] = {}
    for node, table_tree in tree.items():
        entries = []
        for entry_tree in table_tree.get("entries", []):
            match_tree = entry_tree["match"]
            ethertype = match_tree.get("ethertype")
            if isinstance(ethertype, str):
                ethertype = _ETHERTYPE_NAMES.get(ethertype.lower(), None)
            match = MatchFields(
                ingress_port=match_tree.get("ingress"),
                ethertype=ethertype,
                src_mac=(
                    MacAddress.parse(match_tree["src_mac"])
                    if "src_mac" in match_tree
                    else None
                ),
                app_id=match_tree.get("app_id"),
            )
            actions = tuple(_action_from_tree(a) for a in entry_tree["actions"])
            entries.append(FlowEntry(int(entry_tree["priority"]), match, actions))
        default = table_tree.get("default", "drop")
        out[node] = FlowTable(
            entries=tuple(entries),
            default_action=Drop() if default == "drop" else ToController(),
        )
    return out


def _action_from_tree(tree):
    if isinstance(tree, dict) and "forward" in tree:
        return Forward(int(tree["forward"]))
    if tree == "drop":
        return Drop()
    if tree == "to_controller":
        return ToController()
    raise ScenarioError(f"unknown action {tree!r}")


def _rules_from_tree(rules_tree: list | None, publishers_tree: dict | None) -> RuleSet | None:
    if rules_tree is None and publishers_tree is None:
        return None
    if rules_tree is None:
        rules = default_rules().rules
    else:
        rules = tuple(
            Rule(
                id=str(r["id"]),
                kind=RuleKind(r["kind"]),
                params={k: v for k, v in r.items() if k not in ("id", "kind")},
            )
            for r in rules_tree
        )
    whitelist: dict[str, MacAddress] = {}
    ingress_map: dict[str, tuple[int, ...]] = {}
    for gocb, pub in (publishers_tree or {}).items():
        whitelist[gocb] = MacAddress.parse(pub["source_mac"])
        if "ingress_ports" in pub:
            ingress_map[gocb] = tuple(int(p) for p in pub["ingress_ports"])
    return RuleSet(rules=rules, whitelist=whitelist, ingress_map=ingress_map)


def _injection_from_tree(tree: dict | None, pied: PiedConfig) -> InjectionPlan | None:
    if not tree:
        return None
    template_tree = tree["template"]
    template = GooseFrame(
        dst=pied.dst,
        src=MacAddress.parse(template_tree["src_mac"]) if "src_mac" in template_tree else pied.src,
        app_id=pied.app_id,
        gocb_ref=template_tree.get("gocb_ref", pied.gocb_ref),
        time_allowed_to_live=pied.ttl_ms,
        st_num=int(template_tree["st_num"]),
        sq_num=int(template_tree["sq_num"]),
        test=False,
        timestamp=_ms(template_tree.get("timestamp_ms", 0)),
        dataset_ref=pied.dataset_ref,
        all_data=(bool(template_tree.get("trip", False)), False),
    )
    return InjectionPlan(
        host=Origin(tree["host"]),
        port=PortRef(tree["node"], int(tree["port"])),
        mode=tree["mode"],
        template=template,
        times_us=tuple(_ms(t) for t in tree["times_ms"]),
    )


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    """Build the network, run the traffic, and score the log."""
    if spec.id not in SCENARIO_IDS:
        raise ScenarioError(f"unknown scenario id {spec.id!r}")
    net = build_topology(spec.topology())
    net.log_event(
        "ControlMsg",
        sub.IDS,
        None,
        None,
        note=(
            f"run scenario={spec.id} with_ids={int(spec.with_ids)} "
            f"expected_total_us={spec.expected_total_us()} settle_us={spec.settle_us()}"
        ),
    )

    SwitchNode(net, sub.PROCESS_BUS, spec.flow_table(sub.PROCESS_BUS), spec.delays.t_sp)
    SwitchNode(net, sub.STATION_BUS, spec.flow_table(sub.STATION_BUS), spec.delays.t_ss)
    flagged: set[str] = set()
    if spec.with_ids:
        ids_node = IdsNode(
            net,
            spec.flow_table(sub.IDS),
            spec.rules(),
            with_ids=True,
            processing_delay=spec.delays.t_ids * spec.inspection_passes,
            loop_window_us=spec.loop_window_us,
            decision_window_us=spec.decision_window_us,
            controller_latency_us=spec.controller_latency_us,
            monitored_ports=sub.IDS_MONITORED,
            loop_out_port=sub.IDS_LOOP_OUT,
            loop_return_port=sub.IDS_LOOP_RETURN,
        )
        flagged = ids_node.alerted_digests
    else:
        SwitchNode(net, sub.IDS, spec.flow_table(sub.IDS), 0)

    MuDevice(net, spec.mu, spec.waveform, node_id=sub.MU, port=sub.MU_PORT)
    PiedDevice(
        net,
        spec.pied,
        node_id=sub.PIED,
        sv_port=sub.PIED_SV_IN,
        goose_ports=(sub.PIED_STATION, sub.PIED_IDS_DIRECT),
    )
    OmicronDevice(
        net,
        node_id=sub.OMICRON,
        internal_delay_us=spec.delays.t_oc,
        act_on_flagged=spec.act_on_flagged,
        flagged_digests=flagged,
    )
    if spec.injection is not None:
        inject(net, spec.injection)

    net.run_until(spec.duration_us)
    net.log_event(
        "ControlMsg", sub.IDS, None, None, note=f"run_complete events={len(net.log) + 1}"
    )
    return score(net.log)


# ---------------------------------------------------------------------------
# Scoring (pure over the log)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Banner:
    scenario: str
    with_ids: bool
    expected_total_us: int
    settle_us: int


def _parse_banner(log: EventLog) -> _Banner:
    if not log or log[0].kind != "ControlMsg" or not (log[0].note or "").startswith("run "):
        raise ScenarioError("log carries no run banner")
    fields = dict(part.split("=", 1) for part in log[0].note.split()[1:])
    return _Banner(
        scenario=fields["scenario"],
        with_ids=fields["with_ids"] == "1",
        expected_total_us=int(fields["expected_total_us"]),
        settle_us=int(fields["settle_us"]),
    )


def check_complete(log: EventLog) -> bool:
    if not log:
        return False
    last = log[-1]
    if last.kind != "ControlMsg" or not (last.note or "").startswith("run_complete"):
        return False
    declared = int(last.note.split("events=")[1])
    return declared == len(log)


def _final_port_states(log: EventLog) -> dict[tuple[str, int], bool]:
    states: dict[tuple[str, int], bool] = {}
    for ev in log:
        if ev.kind == "PortStateChange":
            states[(ev.node, ev.port)] = ev.note == "enabled"
    return states


def _verdict_from_log(log: EventLog) -> tuple[str | None, tuple[int, ...], int | None]:
    for ev in log:
        if ev.kind == "VerdictReached":
            fields = dict(part.split("=", 1) for part in ev.note.split())
            ports = tuple(int(p) for p in fields.get("ports", "").split(",") if p)
            return fields["culprit"], ports, ev.time
    return None, (), None


def _mitigation_cutoff(log: EventLog, settle_us: int) -> int | None:
    changes = [ev.time for ev in log if ev.kind == "PortStateChange" and ev.note == "disabled"]
    return (max(changes) + settle_us) if changes else None


def _injected_events(log: EventLog) -> list[SimEvent]:
    return [ev for ev in log if ev.note == "injected"]


def score(log: EventLog) -> ScenarioResult:
    """Re-derive the scenario outcome purely from an event log."""
    banner = _parse_banner(log)
    reasons: list[str] = []

    alerts = [ev for ev in log if ev.kind == "AlertRaised"]
    alerted_digests = {ev.digest for ev in alerts}
    injected = _injected_events(log)
    injected_alerted = sum(
        1
        for inj in injected
        if any(
            a.digest == inj.digest and inj.time <= a.time <= inj.time + RECALL_WINDOW_US
            for a in alerts
        )
    )
    culprit, evidence_ports, _verdict_time = _verdict_from_log(log)
    states = _final_port_states(log)
    enabled_ids = tuple(
        p for p in sub.IDS_PORTS if states.get((sub.IDS, p), True)
    )
    disabled_ports = {}
    for (node, port), enabled in sorted(states.items()):
        if not enabled:
            disabled_ports.setdefault(node, []).append(port)
    disabled_ports = {k: tuple(v) for k, v in disabled_ports.items()}
    trips = [ev for ev in log if ev.kind == "BreakerTrip"]
    cutoff = _mitigation_cutoff(log, banner.settle_us)

    try:
        delay_report = measure(log)
    except NoTripFound:
        delay_report = None

    trace_ok: bool | None = None
    if banner.scenario == "attack1":
        trace_ok = _trace_ok(log, ATTACK1_TRACE)
        _score_attack1(
            log, reasons, injected, injected_alerted, culprit, evidence_ports,
            enabled_ids, alerted_digests, cutoff, trace_ok,
        )
    elif banner.scenario == "attack2":
        trace_ok = _trace_ok(log, ATTACK2_TRACE)
        _score_attack2(
            log, reasons, injected, injected_alerted, culprit, evidence_ports,
            states, cutoff, trace_ok,
        )
    else:
        _score_baseline(reasons, alerts, trips, delay_report, banner)

    return ScenarioResult(
        scenario=banner.scenario,
        passed=not reasons,
        reasons=tuple(reasons),
        verdict_culprit=culprit,
        verdict_evidence_ports=evidence_ports,
        alerts=len(alerts),
        injected=len(injected),
        injected_alerted=injected_alerted,
        enabled_ids_ports=enabled_ids,
        disabled_ports=disabled_ports,
        breaker_trips=len(trips),
        trace_ok=trace_ok,
        delay=delay_report,
        log=log,
    )


def _score_baseline(reasons, alerts, trips, delay_report, banner) -> None:
    if alerts:
        reasons.append(f"{len(alerts)} alerts on legal-only traffic")
    if len(trips) != 1:
        reasons.append(f"expected exactly one breaker trip, saw {len(trips)}")
    if delay_report is None:
        reasons.append("no measurable fault-to-trip chain")
        return
    if delay_report.total_us != banner.expected_total_us:
        reasons.append(
            f"trip latency {delay_report.total_us}us != configured "
            f"{banner.expected_total_us}us"
        )
    if not delay_report.checks["additivity_exact"]:
        reasons.append("component sum does not equal end-to-end latency")
    if banner.with_ids:
        if delay_report.total_us > WITH_IDS_CAP_US:
            reasons.append(f"with-module latency {delay_report.total_us}us above cap")
        if delay_report.components["t_ids"] > IDS_ADDED_CAP_US:
            reasons.append("inspection delay above 4ms cap")
        if delay_report.components["t_ids"] > QUARTER_CYCLE_60HZ_US:
            reasons.append("inspection delay above a quarter cycle at 60Hz")
    elif delay_report.total_us != BASELINE_TOTAL_US:
        reasons.append(f"baseline latency {delay_report.total_us}us != 23ms")


def _score_attack1(
    log, reasons, injected, injected_alerted, culprit, evidence_ports,
    enabled_ids, alerted_digests, cutoff, trace_ok,
) -> None:
    if not injected:
        reasons.append("no injected frames in the log")
        return
    if injected_alerted != len(injected):
        reasons.append(f"only {injected_alerted}/{len(injected)} injected frames alerted")
    if culprit != Origin.STATION_BUS_SWITCH.value:
        reasons.append(f"verdict {culprit!r}, expected the station-bus switch")
    if not {sub.IDS_MAIN_FEED, sub.IDS_LOOP_RETURN} <= set(evidence_ports):
        reasons.append(f"evidence ports {evidence_ports} miss the main/loop feeds")
    if set(enabled_ids) != set(sub.IDS_KEEP_ENABLED):
        reasons.append(f"enabled inspection ports {enabled_ids} != {sub.IDS_KEEP_ENABLED}")
    if cutoff is None:
        reasons.append("no mitigation in the log")
        return
    late_abnormal = [
        ev
        for ev in log
        if ev.kind == "FrameArrival"
        and ev.node == sub.OMICRON
        and ev.digest in alerted_digests
        and ev.time > cutoff
    ]
    if late_abnormal:
        reasons.append(f"{len(late_abnormal)} abnormal frames reached the breaker after mitigation")
    clean_delivery = [
        ev
        for ev in log
        if ev.kind == "FrameArrival"
        and ev.node == sub.OMICRON
        and ev.digest not in alerted_digests
        and ev.time > cutoff
    ]
    if not clean_delivery:
        reasons.append("no legitimate delivery to the breaker after mitigation")
    if not trace_ok:
        reasons.append("forwarding trace does not match the expected hop sequence")


def _score_attack2(
    log, reasons, injected, injected_alerted, culprit, evidence_ports,
    states, cutoff, trace_ok,
) -> None:
    if not injected:
        reasons.append("no injected frames in the log")
        return
    if injected_alerted != len(injected):
        reasons.append(f"only {injected_alerted}/{len(injected)} injected frames alerted")
    if culprit != Origin.PIED.value:
        reasons.append(f"verdict {culprit!r}, expected the relay")
    if sub.IDS_MAIN_FEED not in evidence_ports:
        reasons.append(f"evidence ports {evidence_ports} miss the main feed")
    if states.get((sub.STATION_BUS, sub.SBS_PIED), True):
        reasons.append("station-bus port facing the relay is still enabled")
    if states.get((sub.PROCESS_BUS, sub.PBS_PIED), True):
        reasons.append("process-bus port facing the relay is still enabled")
    if cutoff is None:
        reasons.append("no mitigation in the log")
        return
    to_relay = [
        ev for ev in log
        if ev.kind == "FrameArrival" and ev.node == sub.PIED and ev.time > cutoff
    ]
    from_relay = [
        ev
        for ev in log
        if ev.kind == "FrameArrival"
        and ev.time > cutoff
        and (
            (ev.node == sub.STATION_BUS and ev.port == sub.SBS_PIED)
            or (ev.node == sub.IDS and ev.port == sub.IDS_PIED_FEED)
        )
    ]
    if to_relay or from_relay:
        reasons.append(
            f"relay not isolated: {len(to_relay)} arrivals at it, "
            f"{len(from_relay)} first-hop arrivals from it after mitigation"
        )
    liveness = [
        ev
        for ev in log
        if ev.kind == "FrameArrival"
        and ev.node == sub.IDS
        and ev.port == sub.IDS_SV_TAP
        and ev.time > cutoff
    ]
    if not liveness:
        reasons.append("healthy-device traffic no longer delivered after mitigation")
    if not trace_ok:
        reasons.append("forwarding trace does not match the expected hop sequence")


# ---------------------------------------------------------------------------
# Forwarding-trace verification
# ---------------------------------------------------------------------------


def _trace_ok(log: EventLog, expected: tuple[tuple[str, int, str], ...]) -> bool:
    injected = _injected_events(log)
    if not injected:
        return False
    digest = injected[0].digest
    start = log.index(injected[0])
    return _is_subsequence(log[start:], digest, expected)


def _is_subsequence(events, digest, expected) -> bool:
    want = iter(expected)
    current = next(want, None)
    for ev in events:
        if current is None:
            return True
        node, port, direction = current
        kind = "FrameArrival" if direction == "in" else "FrameDeparture"
        if ev.kind == kind and ev.node == node and ev.port == port and ev.digest == digest:
            current = next(want, None)
    return current is None


def verify_forwarding_trace(
    result: ScenarioResult, expected: tuple[tuple[str, int, str], ...]
) -> bool:
    """True iff the log contains the hop sequence, in order, for the
    scenario's tracked (first injected) frame digest."""
    return _trace_ok(result.log, expected)
