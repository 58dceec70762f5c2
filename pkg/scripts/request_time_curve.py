"""Requests vs. estimated identification time for m=24 signaling accounts."""

import argparse
import csv
import sys

from blockleak.experiments import default_ks, request_time_curve
from blockleak.rttsim import preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", default="facebook,twitter_filled,tumblr")
    ap.add_argument("--m", type=int, default=24)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    rows = []
    for name in args.presets.split(","):
        rows += request_time_curve(preset(name), args.m, default_ks())
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
