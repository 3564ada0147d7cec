"""Deterministic discrete-event harness: topology, ticks, delivery, traffic, intruders.

Time advances in integer ticks. Window ``w`` spans ticks ``[w*L, (w+1)*L)``
and closes at tick ``(w+1)*L``. Within one tick the scheduler runs, in order:
window closures (ascending node id), message deliveries, join timers, and
finally the event batch of the window that starts at that tick. Ties inside a
class resolve by scheduling order, so a run is a pure function of its inputs
and seed.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from . import rng as rng_mod
from .agent import NodeAgent, NodeState, activate, end_of_window, handle_message, request_join
from .alarm import Alarm
from .collection import MALICIOUS, EventRecord
from .core import AuthGrant, FeatureCatalog, NodeId
from .detection import DetectionResult
from .errors import ConfigError, TopologyError, TraceError, UnknownFeatureError
from .messages import Message, MessageKind


@dataclass(frozen=True)
class Topology:
    nodes: tuple[NodeId, ...]
    edges: frozenset[frozenset[NodeId]]
    _adj: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        adj = {v: [] for v in self.nodes}
        for e in self.edges:
            u, v = sorted(e)
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", {v: tuple(sorted(ns)) for v, ns in adj.items()})

    def neighbors(self, v: NodeId) -> tuple[NodeId, ...]:
        try:
            return self._adj[v]
        except KeyError:
            raise TopologyError(f"unknown node {v!r}") from None

    def __contains__(self, v):
        return v in self._adj

    def edge_list(self) -> list[tuple[NodeId, NodeId]]:
        return sorted(tuple(sorted(e)) for e in self.edges)


def build_topology(nodes: Iterable[NodeId], edges: Iterable[Sequence[NodeId]]) -> Topology:
    node_list = list(nodes)
    seen = set()
    for v in node_list:
        if not isinstance(v, str) or not v:
            raise TopologyError(f"node id must be a non-empty string, got {v!r}")
        if v in seen:
            raise TopologyError(f"duplicate node id {v!r}")
        seen.add(v)
    edge_set = set()
    for e in edges:
        if len(e) != 2:
            raise TopologyError(f"edge {e!r} must have exactly two endpoints")
        u, v = e
        if u == v:
            raise TopologyError(f"self-loop on {u!r}")
        for end in (u, v):
            if end not in seen:
                raise TopologyError(f"edge {u!r}-{v!r} references unknown node {end!r}")
        edge_set.add(frozenset((u, v)))
    return Topology(tuple(sorted(node_list)), frozenset(edge_set))


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    window_length: int = 10
    total_windows: int = 10
    loss_probability: float = 0.0
    delay: int = 1
    join_timeout: int = 4
    join_rounds: int = 1
    alarm_ttl: int = 1
    # "error": trace actions outside the catalog abort the run; "tally": counted and skipped
    unknown_features: str = "error"
    prng: str = rng_mod.NAME

    def __post_init__(self):
        def _int(name, lo):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int) or val < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {val!r}")

        _int("seed", 0)
        _int("window_length", 1)
        _int("total_windows", 1)
        _int("delay", 0)
        _int("join_timeout", 1)
        _int("join_rounds", 1)
        _int("alarm_ttl", 1)
        p = self.loss_probability
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
            raise ConfigError(f"loss_probability must lie in [0, 1], got {p!r}")
        if self.unknown_features not in ("error", "tally"):
            raise ConfigError(f"unknown_features must be 'error' or 'tally', got {self.unknown_features!r}")
        if self.prng != rng_mod.NAME:
            raise ConfigError(f"unsupported prng {self.prng!r}; only {rng_mod.NAME!r} is available")

    @property
    def lossless(self) -> bool:
        return self.loss_probability == 0.0

    @property
    def end_tick(self) -> int:
        return self.window_length * self.total_windows


@dataclass(frozen=True)
class IntruderSpec:
    target_node: NodeId
    window: int
    features: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(dict.fromkeys(self.features)))


@dataclass(frozen=True)
class JoinSpec:
    """A node that joins mid-run at ``tick`` and is activated with ``grant``."""

    node: NodeId
    tick: int
    grant: AuthGrant


def inject_intruder(
    trace: Sequence[EventRecord],
    spec: IntruderSpec,
    catalog: Optional[FeatureCatalog] = None,
    topology: Optional[Topology] = None,
    total_windows: Optional[int] = None,
) -> list[EventRecord]:
    """Return a copy of ``trace`` with one malicious event per intruder feature."""
    if topology is not None and spec.target_node not in topology:
        raise TraceError(f"intruder targets unknown node {spec.target_node!r}")
    if catalog is not None:
        for f in spec.features:
            if f not in catalog:
                raise TraceError(f"intruder feature {f!r} is not in the catalog")
    if spec.window < 0 or (total_windows is not None and spec.window >= total_windows):
        raise TraceError(f"intruder window {spec.window} outside [0, {total_windows})")
    out = list(trace)
    out.extend(EventRecord(spec.target_node, f, spec.window, MALICIOUS) for f in spec.features)
    return out


def generate_traffic(
    grants: Mapping[NodeId, AuthGrant], total_windows: int, events_per_window: int, seed: int
) -> list[EventRecord]:
    """Compliant background traffic: each node draws from its own permissions.

    Uses its own generator so that the simulation seed (which drives loss)
    never changes what nodes do.
    """
    gen = rng_mod.SplitMix64(seed)
    pools = {node: sorted(g.permitted) for node, g in sorted(grants.items())}
    events = []
    append = events.append
    for w in range(total_windows):
        for node, pool in pools.items():
            if not pool:
                continue
            for _ in range(events_per_window):
                append(EventRecord(node, pool[gen.below(len(pool))], w))
    return events


@dataclass
class RunLog:
    """Append-only, tick-stamped record of one simulation run."""

    config: SimConfig
    catalog: FeatureCatalog
    # (tick, event, status) with status in observed | unknown | inactive
    events: list = field(default_factory=list)
    # dicts: tick, action (send|deliver|lost|local), kind, from, to, hop, alarm_id
    messages: list = field(default_factory=list)
    results: list = field(default_factory=list)
    alarms: list = field(default_factory=list)
    lifecycle: list = field(default_factory=list)
    agents: dict = field(default_factory=dict)

    @property
    def detection_results(self) -> list[DetectionResult]:
        return [r for _, r in self.results]

    @property
    def unknown_actions(self) -> int:
        return sum(1 for _, _, status in self.events if status == "unknown")

    def deliveries(self, kind: MessageKind | None = None) -> list[dict]:
        return [m for m in self.messages if m["action"] == "deliver" and (kind is None or m["kind"] == kind.value)]

    def sent(self) -> list[dict]:
        return [m for m in self.messages if m["action"] == "send"]


_BOUNDARY, _DELIVER, _TIMER, _EVENTS = 0, 1, 2, 3


def _validate(topology, agents, trace, config, catalog, joins):
    for node_id in agents:
        if node_id not in topology:
            raise TopologyError(f"agent {node_id!r} is not a topology node")
    for node_id, agent in agents.items():
        if agent.id != node_id:
            raise TopologyError(f"agent registered as {node_id!r} has id {agent.id!r}")
        if tuple(agent.neighbors) != topology.neighbors(node_id):
            raise TopologyError(f"agent {node_id!r} neighbors disagree with the topology")
    for e in trace:
        if e.node not in agents:
            raise TraceError(f"trace references unknown node {e.node!r}")
        if e.window >= config.total_windows:
            raise TraceError(f"trace event in window {e.window} >= total_windows {config.total_windows}")
        if config.unknown_features == "error" and e.feature not in catalog:
            raise TraceError(f"trace references unknown feature {e.feature!r}")
    for j in joins:
        if j.node not in agents:
            raise TraceError(f"join for unknown node {j.node!r}")
        if agents[j.node].state is not NodeState.UNPROVISIONED:
            raise TraceError(f"joining node {j.node!r} must start unprovisioned")
        if j.tick < 0:
            raise TraceError(f"join tick for {j.node!r} must be >= 0")


def run_simulation(
    topology: Topology,
    agents: Mapping[NodeId, NodeAgent],
    trace: Sequence[EventRecord],
    intruders: Sequence[IntruderSpec],
    config: SimConfig,
    *,
    catalog: FeatureCatalog,
    joins: Sequence[JoinSpec] = (),
) -> RunLog:
    """Drive every agent through ``config.total_windows`` windows.

    ``agents`` is mutated in place (collectors, audit trails, alarm logs).
    Messages still in flight after the last window closes are delivered
    before the function returns.
    """
    trace = list(trace)
    for spec in intruders:
        trace.extend(inject_intruder((), spec, catalog, topology, config.total_windows))
    _validate(topology, agents, trace, config, catalog, joins)

    gen = rng_mod.SplitMix64(config.seed)
    runlog = RunLog(config, catalog, agents=dict(agents))
    L = config.window_length
    W = config.total_windows
    order = sorted(agents)

    for node_id in order:
        agent = agents[node_id]
        agent.alarm_ttl = config.alarm_ttl
        if agent.active:
            agent.members.add(node_id)
            agent.members.update(nb for nb in agent.neighbors if nb in agents and agents[nb].active)

    queue: list = []
    seq = 0

    def push(tick, prio, item):
        nonlocal seq
        heapq.heappush(queue, (tick, prio, seq, item))
        seq += 1

    def send(msg: Message, now: int):
        hop = msg.payload.get("hop", 1)
        alarm_id = msg.payload["alarm"].alarm_id if msg.kind is MessageKind.ALARM else None
        rec = {"tick": now, "kind": msg.kind.value, "from": msg.sender, "to": msg.to, "hop": hop, "alarm_id": alarm_id}
        runlog.messages.append({"action": "send", **rec})
        if gen.bernoulli(config.loss_probability):
            runlog.messages.append({"action": "lost", **rec})
            return
        push(now + config.delay, _DELIVER, msg)

    by_window = defaultdict(list)
    for e in trace:
        by_window[e.window].append(e)
    for w in sorted(by_window):
        push(w * L, _EVENTS, ("events", w))
    for w in range(W):
        push((w + 1) * L, _BOUNDARY, ("boundary", w))
    grants = {j.node: j.grant for j in joins}
    for j in sorted(joins, key=lambda j: (j.tick, j.node)):
        push(j.tick, _TIMER, ("join", j.node, 0))

    tally_unknown = config.unknown_features == "tally"
    events_log = runlog.events

    while queue:
        now, prio, _, item = heapq.heappop(queue)
        if prio == _EVENTS:
            w = item[1]
            for e in by_window[w]:
                agent = agents[e.node]
                col = agent.collector
                if agent.state is not NodeState.ACTIVE or col.current_window != w:
                    events_log.append((now, e, "inactive"))
                    continue
                try:
                    col.observe(e)
                except UnknownFeatureError:
                    if not tally_unknown:
                        raise
                    events_log.append((now, e, "unknown"))
                    continue
                events_log.append((now, e, "observed"))
        elif prio == _BOUNDARY:
            w = item[1]
            for node_id in order:
                agent = agents[node_id]
                if agent.state is not NodeState.ACTIVE or agent.collector.current_window != w:
                    continue
                result, alarm, msgs = end_of_window(agent, now)
                runlog.results.append((now, result))
                if alarm is not None:
                    runlog.alarms.append((now, alarm))
                    runlog.messages.append({
                        "action": "local", "tick": now, "kind": MessageKind.ALARM.value,
                        "from": node_id, "to": node_id, "hop": 0, "alarm_id": alarm.alarm_id,
                    })
                    for m in msgs:
                        send(m, now)
        elif prio == _DELIVER:
            msg: Message = item
            hop = msg.payload.get("hop", 1)
            runlog.messages.append({
                "action": "deliver", "tick": now, "kind": msg.kind.value, "from": msg.sender,
                "to": msg.to, "hop": hop,
                "alarm_id": msg.payload["alarm"].alarm_id if msg.kind is MessageKind.ALARM else None,
            })
            agent = agents[msg.to]
            was_unprovisioned = agent.state is NodeState.UNPROVISIONED
            for out in handle_message(agent, msg, now):
                send(out, now)
            if was_unprovisioned and agent.state is NodeState.PROVISIONED and msg.to in grants:
                runlog.lifecycle.append({"tick": now, "event": "provisioned", "node": msg.to, "by": msg.sender})
                start = -(-now // L)
                activate(agent, grants[msg.to], catalog, start_window=start)
                runlog.lifecycle.append({"tick": now, "event": "activated", "node": msg.to, "window": start})
        else:
            _, node_id, attempt = item
            agent = agents[node_id]
            if agent.state is not NodeState.UNPROVISIONED:
                continue
            nbrs = agent.neighbors
            if not nbrs or attempt >= len(nbrs) * config.join_rounds or now >= config.end_tick:
                runlog.lifecycle.append({"tick": now, "event": "join_failed", "node": node_id, "attempts": attempt})
                continue
            target = nbrs[attempt % len(nbrs)]
            runlog.lifecycle.append({"tick": now, "event": "join_request", "node": node_id, "to": target})
            send(request_join(agent, target, now), now)
            push(now + config.join_timeout, _TIMER, ("join", node_id, attempt + 1))

    return runlog
