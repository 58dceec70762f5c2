"""TPR/TNR of the membership test per service preset and network environment."""

import argparse

from blockleak.experiments import membership_accuracy
from blockleak.rttsim import ENVIRONMENTS, preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", default="facebook,twitter_filled,tumblr")
    ap.add_argument("--k0", type=int, default=30)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"seed={args.seed} k0={args.k0} trials={args.trials}")
    print(f"{'service':<16}{'env':<11}{'TPR':>6}{'TNR':>6}")
    for name in args.presets.split(","):
        for env in ENVIRONMENTS.values():
            r = membership_accuracy(preset(name), args.k0, args.trials, args.seed, env)
            print(f"{name:<16}{env.name:<11}{r.positive:>6.2f}{r.negative:>6.2f}")


if __name__ == "__main__":
    main()
