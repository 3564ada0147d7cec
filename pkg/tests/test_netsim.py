import pytest

from ubinode.agent import NodeAgent, bootstrap_agent
from ubinode.collection import EventRecord
from ubinode.core import AuthGrant
from ubinode.detection import Verdict
from ubinode.errors import ConfigError, TopologyError, TraceError
from ubinode.messages import MessageKind
from ubinode.netsim import (
    IntruderSpec,
    SimConfig,
    build_topology,
    generate_traffic,
    inject_intruder,
    run_simulation,
)

from conftest import MARC_FEATURES


def test_star_adjacency():
    t = build_topology("ABCD", [("A", "B"), ("A", "C"), ("A", "D")])
    assert t.neighbors("A") == ("B", "C", "D")
    assert t.neighbors("B") == ("A",)


@pytest.mark.parametrize("nodes, edges", [
    ("AB", [("A", "A")]),
    ("AB", [("A", "Z")]),
    ("AAB", []),
])
def test_topology_errors(nodes, edges):
    with pytest.raises(TopologyError):
        build_topology(nodes, edges)


def test_single_node_topology():
    t = build_topology(["solo"], [])
    assert t.neighbors("solo") == ()


@pytest.mark.parametrize("kwargs", [
    {"window_length": 0}, {"total_windows": 0}, {"loss_probability": 1.1},
    {"loss_probability": -0.1}, {"delay": -1}, {"seed": -3}, {"prng": "mt19937"},
    {"unknown_features": "drop"},
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_inject_intruder(catalog):
    t = build_topology(["marc"], [])
    one = inject_intruder([], IntruderSpec("marc", 5, ("scan",)), catalog, t, 10)
    assert one == [EventRecord("marc", "scan", 5, "malicious")]
    two = inject_intruder(one, IntruderSpec("marc", 5, ("scan", "update")), catalog, t, 10)
    assert len(two) == 3 and all(e.window == 5 and e.label == "malicious" for e in two)
    with pytest.raises(TraceError):
        inject_intruder([], IntruderSpec("marc", 10, ("scan",)), catalog, t, 10)
    with pytest.raises(TraceError):
        inject_intruder([], IntruderSpec("ghost", 1, ("scan",)), catalog, t, 10)
    with pytest.raises(TraceError):
        inject_intruder([], IntruderSpec("marc", 1, ("fax",)), catalog, t, 10)


GRANTS = {
    "marc": ({"print", "consult", "email"}),
    "alice": ({"print", "consult", "email", "update", "share"}),
    "bob": ({"print", "email", "scan"}),
    "manager": set(MARC_FEATURES),
}


def star(catalog, policy=None):
    topo = build_topology(GRANTS, [("marc", n) for n in ("alice", "bob", "manager")])
    agents = {
        n: bootstrap_agent(n, topo.neighbors(n), AuthGrant(n, p, set(MARC_FEATURES) - p), catalog, policy)
        for n, p in GRANTS.items()
    }
    return topo, agents


def compliant_trace():
    trace = []
    for w in range(10):
        trace.append(EventRecord("marc", ["print", "consult", "email"][w % 3], w))
        trace.append(EventRecord("bob", "scan", w))
    return trace


def test_empty_run_has_no_alarms(catalog):
    topo, agents = star(catalog)
    log = run_simulation(topo, agents, [], [], SimConfig(total_windows=4), catalog=catalog)
    assert log.alarms == []
    assert len(log.results) == 16


def test_marc_intruder_single_alarm(catalog):
    topo, agents = star(catalog)
    log = run_simulation(
        topo, agents, compliant_trace(), [IntruderSpec("marc", 5, ("scan",))], SimConfig(), catalog=catalog
    )
    assert [(a.origin, a.window) for _, a in log.alarms] == [("marc", 5)]
    delivered = sorted(m["to"] for m in log.deliveries(MessageKind.ALARM))
    assert delivered == ["alice", "bob", "manager"]
    for n in ("alice", "bob", "manager", "marc"):
        assert len(agents[n].alarm_log) == 1


def test_repeat_runs_identical(catalog):
    def once():
        topo, agents = star(catalog)
        cfg = SimConfig(seed=99, loss_probability=0.5)
        log = run_simulation(topo, agents, compliant_trace(), [IntruderSpec("marc", 5, ("scan",))], cfg, catalog=catalog)
        return log.messages, [r for _, r in log.results], log.events
    assert once() == once()


def test_conservation_and_alignment(catalog):
    topo, agents = star(catalog)
    cfg = SimConfig(window_length=3, total_windows=10, delay=2)
    intr = [IntruderSpec("marc", w, ("share",)) for w in (1, 4, 9)]
    log = run_simulation(topo, agents, compliant_trace(), intr, cfg, catalog=catalog)
    assert len(log.sent()) == len(log.deliveries())
    closes = {(r.node, r.window): tick for tick, r in log.results}
    for tick, e, status in log.events:
        assert status == "observed"
        assert tick < closes[(e.node, e.window)]
    # the last window's alarm is still delivered after the final boundary
    assert any(m["tick"] > cfg.end_tick for m in log.deliveries())
    assert max(m["hop"] for m in log.deliveries()) == 1


def test_total_loss_keeps_local_log(catalog):
    topo, agents = star(catalog)
    cfg = SimConfig(loss_probability=1.0)
    log = run_simulation(topo, agents, [], [IntruderSpec("marc", 2, ("scan",))], cfg, catalog=catalog)
    assert log.deliveries(MessageKind.ALARM) == []
    assert len(agents["marc"].alarm_log) == 1
    assert all(len(agents[n].alarm_log) == 0 for n in ("alice", "bob", "manager"))


def test_detections_independent_of_other_nodes(catalog):
    topo, agents = star(catalog)
    base = compliant_trace()
    log1 = run_simulation(topo, agents, base, [], SimConfig(), catalog=catalog)
    topo, agents = star(catalog)
    noisy = base + [EventRecord("alice", "scan", w, "malicious") for w in range(10)]
    log2 = run_simulation(topo, agents, noisy, [], SimConfig(), catalog=catalog)
    marc1 = [r for r in log1.detection_results if r.node == "marc"]
    marc2 = [r for r in log2.detection_results if r.node == "marc"]
    assert marc1 == marc2
    assert sum(r.verdict is Verdict.ANOMALY for r in log2.detection_results if r.node == "alice") == 10


def test_trace_validation(catalog):
    topo, agents = star(catalog)
    with pytest.raises(TraceError):
        run_simulation(topo, agents, [EventRecord("ghost", "print", 0)], [], SimConfig(), catalog=catalog)
    with pytest.raises(TraceError):
        run_simulation(topo, agents, [EventRecord("marc", "fax", 0)], [], SimConfig(), catalog=catalog)
    with pytest.raises(TraceError):
        run_simulation(topo, agents, [EventRecord("marc", "print", 10)], [], SimConfig(), catalog=catalog)


def test_unknown_actions_tallied(catalog):
    topo, agents = star(catalog)
    trace = [EventRecord("marc", "fax", 0), EventRecord("marc", "fax", 1), EventRecord("marc", "print", 1)]
    log = run_simulation(topo, agents, trace, [], SimConfig(unknown_features="tally"), catalog=catalog)
    assert log.unknown_actions == 2
    assert agents["marc"].collector.unknown_actions == 2


def test_neighbors_must_match_topology(catalog):
    topo, agents = star(catalog)
    agents["bob"] = NodeAgent("bob", ())
    with pytest.raises(TopologyError):
        run_simulation(topo, agents, [], [], SimConfig(), catalog=catalog)


def test_generated_traffic_is_compliant_and_seeded():
    grants = {n: AuthGrant(n, p, set(MARC_FEATURES) - p) for n, p in GRANTS.items()}
    a = generate_traffic(grants, 5, 3, seed=1)
    assert a == generate_traffic(grants, 5, 3, seed=1)
    assert a != generate_traffic(grants, 5, 3, seed=2)
    assert len(a) == 5 * 4 * 3
    assert all(e.feature in grants[e.node].permitted for e in a)


def join_setup(catalog, host_active=True):
    from ubinode.agent import NodeState
    from ubinode.netsim import JoinSpec

    topo = build_topology(["alice", "marc", "newbie"], [("newbie", "alice"), ("newbie", "marc"), ("alice", "marc")])
    full = AuthGrant("x", set(MARC_FEATURES), set())
    agents = {
        "alice": NodeAgent("alice", topo.neighbors("alice")),
        "marc": bootstrap_agent("marc", topo.neighbors("marc"), AuthGrant("marc", full.permitted, set()), catalog),
        "newbie": NodeAgent("newbie", topo.neighbors("newbie")),
    }
    if host_active:
        agents["alice"] = bootstrap_agent("alice", topo.neighbors("alice"), AuthGrant("alice", full.permitted, set()), catalog)
    assert agents["newbie"].state is NodeState.UNPROVISIONED
    grant = AuthGrant("newbie", {"print"}, set(MARC_FEATURES) - {"print"})
    return topo, agents, [JoinSpec("newbie", 12, grant)]


def test_join_through_lowest_id_neighbor(catalog):
    topo, agents, joins = join_setup(catalog)
    log = run_simulation(topo, agents, [], [], SimConfig(), catalog=catalog, joins=joins)
    kinds = [(m["kind"], m["from"], m["to"], m["tick"]) for m in log.deliveries()]
    assert kinds == [
        ("ExistenceQuery", "newbie", "alice", 13),
        ("ExistenceAck", "alice", "newbie", 14),
        ("UnitProvision", "alice", "newbie", 14),
    ]
    assert agents["newbie"].active
    activated = [c for c in log.lifecycle if c["event"] == "activated"]
    assert activated == [{"tick": 14, "event": "activated", "node": "newbie", "window": 2}]
    assert [r.window for r in log.detection_results if r.node == "newbie"] == list(range(2, 10))


def test_join_falls_back_after_timeout(catalog):
    # alice is not active, so her silence forces the retry to marc
    topo, agents, joins = join_setup(catalog, host_active=False)
    del agents["alice"]
    agents["alice"] = NodeAgent("alice", topo.neighbors("alice"))
    log = run_simulation(topo, agents, [], [], SimConfig(join_timeout=4), catalog=catalog, joins=joins)
    requests = [c["to"] for c in log.lifecycle if c["event"] == "join_request"]
    assert requests == ["alice", "marc"]
    assert agents["newbie"].active
    assert not agents["alice"].active


def test_join_fails_when_nobody_answers(catalog):
    from ubinode.agent import NodeState

    topo, agents, joins = join_setup(catalog, host_active=False)
    agents["marc"] = NodeAgent("marc", topo.neighbors("marc"))
    log = run_simulation(topo, agents, [], [], SimConfig(), catalog=catalog, joins=joins)
    assert [c["event"] for c in log.lifecycle][-1] == "join_failed"
    assert agents["newbie"].state is NodeState.UNPROVISIONED
    assert not any(r.node == "newbie" for r in log.detection_results)


def test_events_before_activation_are_dropped(catalog):
    topo, agents, joins = join_setup(catalog)
    trace = [EventRecord("newbie", "scan", 0, "malicious"), EventRecord("newbie", "scan", 3, "malicious")]
    log = run_simulation(topo, agents, trace, [], SimConfig(), catalog=catalog, joins=joins)
    assert [s for _, _, s in log.events] == ["inactive", "observed"]
    assert [a.window for _, a in log.alarms] == [3]
