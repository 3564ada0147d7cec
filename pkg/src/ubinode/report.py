"""Run orchestration, ground-truth metrics and report export."""
from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import rng
from .collection import MALICIOUS
from .errors import ExportError, UnknownFormatError
from .netsim import RunLog, run_simulation
from .scenario import Scenario

FORMATS = ("jsonl", "csv", "summary")
_FORMAT_ALIASES = {
    "jsonl": "jsonl", "json-lines": "jsonl", "json_lines": "jsonl",
    "csv": "csv",
    "summary": "summary", "human-summary": "summary", "text": "summary",
}

_CSV_COLUMNS = (
    "record", "name", "value", "node", "window", "tick", "mode", "score", "distance",
    "threshold", "verdict", "deviating", "violating", "alarm_id", "origin", "recipients",
    "feature", "label", "status", "action", "kind", "from", "to", "hop",
)


@dataclass
class RunReport:
    scenario: str
    digest: str
    config: dict
    metrics: dict
    per_node: dict
    alarms: list = field(default_factory=list)
    detections: list = field(default_factory=list)
    events: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    lifecycle: list = field(default_factory=list)
    runlog: Optional[RunLog] = field(default=None, repr=False, compare=False)

    def records(self) -> list[dict]:
        """Flat, ordered record list; the json-lines export writes exactly this."""
        out = [{
            "record": "summary", "scenario": self.scenario, "digest": self.digest,
            "config": self.config, "metrics": self.metrics,
        }]
        out += [{"record": "node", "node": n, **c} for n, c in self.per_node.items()]
        out += [{"record": "detection", **r} for r in self.detections]
        out += [{"record": "alarm", **a} for a in self.alarms]
        out += [{"record": "event", **e} for e in self.events]
        out += [{"record": "message", **m} for m in self.messages]
        out += [{"record": "lifecycle", **c} for c in self.lifecycle]
        return out


def compute_metrics(event_rows: Iterable[dict], detection_rows: Iterable[dict]) -> dict:
    """Ground-truth metrics over (node, window) pairs.

    A window is malicious when any event in it carries the malicious label.
    Latency per node is the gap from its first malicious window to its first
    Anomaly verdict at or after it; the scalar is the worst over detected nodes.
    """
    malicious = set()
    unknown = 0
    for e in event_rows:
        if e["label"] == MALICIOUS:
            malicious.add((e["node"], e["window"]))
        if e.get("status") == "unknown":
            unknown += 1
    anomalies = []
    windows = 0
    for d in detection_rows:
        windows += 1
        if d["verdict"] == "Anomaly":
            anomalies.append((d["node"], d["window"]))
    flagged = set(anomalies)
    first_bad = {}
    for node, w in sorted(malicious):
        first_bad.setdefault(node, w)
    latency = {}
    for node, w0 in sorted(first_bad.items()):
        later = [w for n, w in flagged if n == node and w >= w0]
        if later:
            latency[node] = min(later) - w0
    return {
        "windows_evaluated": windows,
        "malicious_windows": len(malicious),
        "true_detections": len(malicious & flagged),
        "missed_malicious_windows": len(malicious - flagged),
        "false_positives": sum(1 for a in anomalies if a not in malicious),
        "anomaly_verdicts": len(anomalies),
        "detection_latency_windows": max(latency.values()) if latency else None,
        "detection_latency_by_node": latency,
        "unknown_action_tally": unknown,
    }


def metrics_from_records(records: Iterable[dict]) -> dict:
    records = list(records)
    return compute_metrics(
        (r for r in records if r["record"] == "event"),
        (r for r in records if r["record"] == "detection"),
    )


def build_report(scenario: Scenario, runlog: RunLog) -> RunReport:
    catalog = scenario.catalog
    detections = [{"tick": tick, **r.to_row(catalog)} for tick, r in runlog.results]
    alarms = [
        {
            "alarm_id": a.alarm_id,
            "origin": a.origin,
            "window": a.window,
            "tick": tick,
            "score": a.result.score,
            "recipients": sorted(a.recipients),
            "violating": catalog.names(a.result.violating_features),
            "deviating": catalog.names(a.result.deviating_features),
        }
        for tick, a in runlog.alarms
    ]
    events = [
        {"tick": tick, "node": e.node, "window": e.window, "feature": e.feature, "label": e.label, "status": status}
        for tick, e, status in runlog.events
    ]
    per_node = {}
    for node in scenario.topology.nodes:
        agent = runlog.agents[node]
        per_node[node] = {
            "state": agent.state.value,
            "windows": 0,
            "normal": 0,
            "anomaly": 0,
            "alarms_logged": len(agent.alarm_log),
            "duplicate_alarms": agent.duplicate_alarms,
        }
    for d in detections:
        c = per_node[d["node"]]
        c["windows"] += 1
        c["normal" if d["verdict"] == "Normal" else "anomaly"] += 1
    sim = scenario.sim
    config = {
        "seed": sim.seed,
        "prng": rng.NAME,
        "mode": scenario.policy.mode.value,
        "threshold": scenario.policy.threshold,
        "window_length": sim.window_length,
        "total_windows": sim.total_windows,
        "loss_probability": sim.loss_probability,
        "delay": sim.delay,
        "alarm_ttl": sim.alarm_ttl,
    }
    return RunReport(
        scenario=scenario.name,
        digest=scenario.digest,
        config=config,
        metrics=compute_metrics(events, detections),
        per_node=per_node,
        alarms=alarms,
        detections=detections,
        events=events,
        messages=[dict(m) for m in runlog.messages],
        lifecycle=[dict(c) for c in runlog.lifecycle],
        runlog=runlog,
    )


def run(scenario: Scenario) -> RunReport:
    agents, joins = scenario.build_agents()
    runlog = run_simulation(
        scenario.topology,
        agents,
        scenario.full_trace(),
        scenario.intruders,
        scenario.sim,
        catalog=scenario.catalog,
        joins=joins,
    )
    return build_report(scenario, runlog)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def render_jsonl(report: RunReport) -> str:
    return "".join(_dumps(r) + "\n" for r in report.records())


def render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
    w.writerow(_CSV_COLUMNS)

    def row(**kw):
        vals = []
        for col in _CSV_COLUMNS:
            v = kw.get(col)
            if v is None:
                v = ""
            elif isinstance(v, (list, tuple)):
                v = ";".join(map(str, v))
            elif isinstance(v, bool):
                v = str(v).lower()
            vals.append(v)
        w.writerow(vals)

    row(record="meta", name="scenario", value=_dumps(report.scenario))
    row(record="meta", name="digest", value=_dumps(report.digest))
    for k, v in report.config.items():
        row(record="config", name=k, value=_dumps(v))
    for k, v in report.metrics.items():
        row(record="metric", name=k, value=_dumps(v))
    for n, c in report.per_node.items():
        for k, v in c.items():
            row(record="node", node=n, name=k, value=_dumps(v))
    for d in report.detections:
        row(record="detection", **d)
    for a in report.alarms:
        row(record="alarm", node=a["origin"], **a)
    for e in report.events:
        row(record="event", **e)
    for m in report.messages:
        row(record="message", **m)
    for c in report.lifecycle:
        row(record="lifecycle", node=c.get("node"), tick=c.get("tick"), name=c.get("event"),
            value=_dumps({k: v for k, v in c.items() if k not in ("node", "tick", "event")}))
    return buf.getvalue()


def render_summary(report: RunReport) -> str:
    m = report.metrics
    c = report.config
    lines = [
        f"scenario   {report.scenario}  ({report.digest[:12]})",
        f"config     seed={c['seed']} prng={c['prng']} mode={c['mode']} threshold={c['threshold']} "
        f"windows={c['total_windows']}x{c['window_length']} loss={c['loss_probability']} delay={c['delay']}",
        f"windows    evaluated={m['windows_evaluated']} malicious={m['malicious_windows']}",
        f"detection  true={m['true_detections']} missed={m['missed_malicious_windows']} "
        f"false_positives={m['false_positives']} latency={m['detection_latency_windows']}",
        f"unknown    actions={m['unknown_action_tally']}",
        "",
        "node                 state          windows  normal  anomaly  alarms_logged",
    ]
    for node, pc in report.per_node.items():
        lines.append(
            f"{node:<20} {pc['state']:<14} {pc['windows']:>7}  {pc['normal']:>6}  {pc['anomaly']:>7}  {pc['alarms_logged']:>13}"
        )
    lines.append("")
    lines.append(f"alarms ({len(report.alarms)})")
    for a in report.alarms:
        lines.append(
            f"  {a['alarm_id']:<24} origin={a['origin']} window={a['window']} "
            f"violations={','.join(a['violating']) or '-'} recipients={','.join(a['recipients'])}"
        )
    return "\n".join(lines) + "\n"


def normalize_format(fmt: str) -> str:
    try:
        return _FORMAT_ALIASES[fmt]
    except KeyError:
        raise UnknownFormatError(f"unknown report format {fmt!r}; choose from {FORMATS}") from None


def render(report: RunReport, fmt: str) -> str:
    fmt = normalize_format(fmt)
    if fmt == "jsonl":
        return render_jsonl(report)
    if fmt == "csv":
        return render_csv(report)
    return render_summary(report)


def export_report(report: RunReport, fmt: str, destination) -> None:
    """Write ``report`` as ``fmt`` to a path, an open text file, or ``"-"`` for stdout."""
    text = render(report, fmt)
    if destination == "-" or destination is None:
        sys.stdout.write(text)
        return
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_csv_metrics(path) -> dict:
    with open(path, encoding="utf-8", newline="") as fh:
        return {
            r["name"]: json.loads(r["value"])
            for r in csv.DictReader(fh)
            if r["record"] == "metric"
        }
