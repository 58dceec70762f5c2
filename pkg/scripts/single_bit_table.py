"""TBR/TNBR of one signaling account as a function of k."""

import argparse

from blockleak.experiments import default_ks, single_bit_accuracy
from blockleak.rttsim import preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", default="facebook,twitter_filled,tumblr")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ks = default_ks()
    print(f"seed={args.seed} trials={args.trials}")
    print(f"{'service':<16}{'rate':<6}" + "".join(f"{'k=' + str(k):>7}" for k in ks))
    for name in args.presets.split(","):
        rows = [single_bit_accuracy(preset(name), k, args.trials, args.seed) for k in ks]
        print(f"{name:<16}{'TBR':<6}" + "".join(f"{r.positive:>7.2f}" for r in rows))
        print(f"{'':<16}{'TNBR':<6}" + "".join(f"{r.negative:>7.2f}" for r in rows))


if __name__ == "__main__":
    main()
