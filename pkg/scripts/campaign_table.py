"""Simulated identification campaigns, 10 targets + 10 outsiders x 2 visits.

Runs the RS(r=4, K=2) campaign over several seeds with and without early
outliers and prints pooled TPR/TNR/IDR/IDR-EC with counts.
"""

import argparse

from blockleak.codec import CodeConfig, assign_codewords
from blockleak.experiments import simulated_factory
from blockleak.harness import run_campaign
from blockleak.planner import build_block_plan
from blockleak.rttsim import FaultSpec, preset
from blockleak.stats import DecisionConfig


def pooled(runs, key):
    hits = sum(r.counts()[key][0] for r in runs)
    total = sum(r.counts()[key][1] for r in runs)
    return f"{hits / total:.2f} ({hits}/{total})" if total else "n/a"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="facebook")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--outlier-prob", type=float, default=0.01)
    ap.add_argument("--k", type=int, default=30)
    args = ap.parse_args()

    targets = [f"target-{i}" for i in range(10)]
    outsiders = [f"outsider-{i}" for i in range(10)]
    plan = build_block_plan(assign_codewords(targets, CodeConfig(10, 24, 4, 2), shuffle_seed=2017))
    cfg = DecisionConfig(k0=30, k=args.k)
    profile = preset(args.preset)

    print(f"preset={args.preset} seeds=0..{args.seeds - 1} k={args.k}")
    for label, faults in (("no faults", FaultSpec()),
                          (f"early outliers p={args.outlier_prob}", FaultSpec(early_outlier_prob=args.outlier_prob))):
        runs = []
        for seed in range(args.seeds):
            factory = simulated_factory(plan, profile, faults=faults, seed=seed)
            runs.append(run_campaign(targets, outsiders, 2, plan, cfg, factory, parallel_trials=4))
        restarts = sum(t.result.restarted for r in runs for t in r.trials)
        print(f"\n{label}  (restarts: {restarts})")
        for key, name in (("tpr", "TPR"), ("tnr", "TNR"), ("idr", "IDR"), ("idr_ec", "IDR/EC")):
            print(f"  {name:<8}{pooled(runs, key)}")


if __name__ == "__main__":
    main()
