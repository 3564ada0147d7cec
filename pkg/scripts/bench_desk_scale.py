#!/usr/bin/env python3
"""Desk-scale timing run: random geometric-ish topology, compliant traffic, sparse intrusions.

    python scripts/bench_desk_scale.py --nodes 100 --features 32 --windows 1000 --events 10
"""
import argparse
import time

from ubinode.agent import bootstrap_agent
from ubinode.core import AuthGrant, build_catalog
from ubinode.netsim import IntruderSpec, SimConfig, build_topology, generate_traffic, run_simulation
from ubinode.rng import SplitMix64


def build(n_nodes, n_features, windows, events, seed=1):
    gen = SplitMix64(seed)
    catalog = build_catalog([f"feat{i:02d}" for i in range(n_features)])
    nodes = [f"node{i:03d}" for i in range(n_nodes)]
    # ring plus random chords keeps the graph connected with small degree
    edges = {tuple(sorted((nodes[i], nodes[(i + 1) % n_nodes]))) for i in range(n_nodes)}
    while len(edges) < 2 * n_nodes:
        a, b = gen.below(n_nodes), gen.below(n_nodes)
        if a != b:
            edges.add(tuple(sorted((nodes[a], nodes[b]))))
    topo = build_topology(nodes, sorted(edges))
    grants = {}
    for v in nodes:
        permitted = {f for f in catalog.features if gen.random() < 0.6}
        grants[v] = AuthGrant(v, permitted, set(catalog.features) - permitted)
    agents = {v: bootstrap_agent(v, topo.neighbors(v), grants[v], catalog) for v in nodes}
    trace = generate_traffic(grants, windows, events, seed=seed + 1)
    intruders = []
    for k in range(windows // 50):
        v = nodes[gen.below(n_nodes)]
        restricted = sorted(grants[v].restricted)
        if restricted:
            intruders.append(IntruderSpec(v, gen.below(windows), (gen.choice(restricted),)))
    return topo, agents, trace, intruders, SimConfig(seed=seed, total_windows=windows), catalog


def bench(n_nodes=100, n_features=32, windows=1000, events=10):
    t0 = time.perf_counter()
    topo, agents, trace, intruders, cfg, catalog = build(n_nodes, n_features, windows, events)
    t1 = time.perf_counter()
    log = run_simulation(topo, agents, trace, intruders, cfg, catalog=catalog)
    t2 = time.perf_counter()
    return {
        "setup_s": t1 - t0,
        "simulate_s": t2 - t1,
        "total_s": t2 - t0,
        "events": len(log.events),
        "detections": len(log.results),
        "alarms": len(log.alarms),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--features", type=int, default=32)
    p.add_argument("--windows", type=int, default=1000)
    p.add_argument("--events", type=int, default=10)
    a = p.parse_args()
    stats = bench(a.nodes, a.features, a.windows, a.events)
    for k, v in stats.items():
        print(f"{k:>12}: {v:.3f}" if isinstance(v, float) else f"{k:>12}: {v}")


if __name__ == "__main__":
    main()
