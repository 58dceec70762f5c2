"""End-to-end attack over HTTP against the in-process mock service.

Builds a plan for N targets, installs it on a loopback mock service, logs in
as a planted target and identifies it; then repeats with a non-target and
with response-time equalization switched on.
"""

import argparse
import random

from blockleak.codec import CodeConfig, assign_codewords
from blockleak.harness import estimate_budget, run_attack
from blockleak.mockservice import MockService, ServiceState
from blockleak.planner import build_block_plan
from blockleak.rttsim import preset
from blockleak.stats import DecisionConfig
from blockleak.transports import LiveSession


def attack(plan, profile, viewer, cfg, seed, equalize=False):
    state = ServiceState(profile, equalize=equalize, seed=seed)
    state.apply_block_plan(plan)
    state.create_account(viewer)
    with MockService(state) as svc, LiveSession(svc.url, state.login(viewer)) as sess:
        return run_attack(sess, plan, cfg)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="facebook")
    ap.add_argument("--time-scale", type=float, default=0.1)
    ap.add_argument("--targets", type=int, default=256)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    profile = preset(args.preset).scaled(args.time_scale)
    ids = [f"user{i:04d}" for i in range(args.targets)]
    reg = assign_codewords(ids, CodeConfig.for_targets(args.targets), shuffle_seed=args.seed)
    plan = build_block_plan(reg)
    cfg = DecisionConfig(k0=30, k=args.k)
    m = reg.config.total_bits
    b = estimate_budget(m, args.k, 30, profile)
    print(f"seed={args.seed} preset={profile.name} targets={args.targets} m={m} k={args.k}")
    print(f"budget: {b.requests} requests, {b.time.lower_ms:.0f}-{b.time.upper_ms:.0f} ms")

    planted = random.Random(args.seed).choice(ids)
    for label, viewer, eq in (("planted target", planted, False),
                              ("outsider", "outsider", False),
                              ("planted target, equalized", planted, True)):
        r = attack(plan, profile, viewer, cfg, args.seed, eq)
        print(f"{label:<28} viewer={viewer:<10} member={r.member!s:<6} "
              f"identified={r.identified} p={r.p_value:.2g} "
              f"requests={r.requests_issued} wall={r.wall_time_ms:.0f} ms")


if __name__ == "__main__":
    main()
