#!/usr/bin/env python3
"""Compare detection modes and thresholds over the bundled scenarios.

    python scripts/mode_comparison.py [--thresholds 0 1 2]
"""
import argparse

from ubinode.report import run
from ubinode.scenario import BUNDLED, load_bundled


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--thresholds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--scenarios", nargs="+", default=list(BUNDLED), choices=BUNDLED)
    args = p.parse_args()

    header = f"{'scenario':<20} {'mode':<15} {'tau':>3} {'windows':>7} {'malicious':>9} {'true':>5} {'missed':>6} {'fp':>5} {'latency':>7}"
    print(header)
    print("-" * len(header))
    for name in args.scenarios:
        base = load_bundled(name)
        for mode in ("violation_only", "strict_literal"):
            for tau in args.thresholds:
                m = run(base.with_overrides(mode=mode, threshold=tau)).metrics
                lat = "-" if m["detection_latency_windows"] is None else m["detection_latency_windows"]
                print(
                    f"{name:<20} {mode:<15} {tau:>3} {m['windows_evaluated']:>7} {m['malicious_windows']:>9} "
                    f"{m['true_detections']:>5} {m['missed_malicious_windows']:>6} {m['false_positives']:>5} {lat:>7}"
                )


if __name__ == "__main__":
    main()
