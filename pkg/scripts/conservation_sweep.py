"""Worst relative drift of E, A, Re C, Im C over sampled orbits for several k."""
import argparse
import math

from ttwlab.analysis import drift_report
from ttwlab.dynamics import IntegratorConfig, integrate, sample_admissible_state
from ttwlab.model import ModelParameters


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-values", default="1/1,2/1,3/1,1/2,3/2,5/2")
    ap.add_argument("--orbits", type=int, default=20)
    ap.add_argument("--periods", type=float, default=10.0)
    ap.add_argument("--rel-tol", type=float, default=1e-10)
    args = ap.parse_args()

    cfg = IntegratorConfig(rel_tol=args.rel_tol)
    print(f"{'k':>5} {'E':>10} {'A':>10} {'ReC':>10} {'ImC':>10}")
    for k in args.k_values.split(","):
        p = ModelParameters.from_k_string(1.0, 1.0, 2.0, k)
        worst = dict.fromkeys(("E", "A", "ReC", "ImC"), 0.0)
        for seed in range(args.orbits):
            traj = integrate(p, sample_admissible_state(p, seed), args.periods * p.n * math.pi / 2, cfg)
            rep = drift_report(p, traj)
            for name in worst:
                worst[name] = max(worst[name], rep[name].max_rel_deviation)
        print(f"{k:>5} " + " ".join(f"{v:10.2e}" for v in worst.values()))


if __name__ == "__main__":
    main()
