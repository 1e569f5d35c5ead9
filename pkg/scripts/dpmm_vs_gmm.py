"""Held-out AED of DPMM vs 5-component GMM feature densities over seeded corpora."""

import argparse
import json

from geoloc.experiments import density_trial, summarize_density_trials


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--out", help="JSON file for per-trial results")
    args = p.parse_args()
    trials = []
    for seed in range(args.trials):
        t = density_trial(seed)
        trials.append(t)
        print(f"seed={seed:3d}  dpmm={t.aed_dpmm:8.1f}  gmm={t.aed_gmm:8.1f}")
    summary = summarize_density_trials(trials)
    print(json.dumps(summary, indent=1))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"summary": summary, "trials": [t.__dict__ for t in trials]}, fh, indent=1)


if __name__ == "__main__":
    main()
