"""Phase-space recurrence for rational k against dense winding for irrational k."""
import argparse
import math

from ttwlab.analysis import detect_closure
from ttwlab.dynamics import sample_admissible_state
from ttwlab.model import ModelParameters

CASES = ["1/1", "2/1", "3/1", "1/2", "3/2", "5/2", repr(math.sqrt(2)), repr((1 + math.sqrt(5)) / 2)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--horizon", type=float, default=20 * math.pi)
    args = ap.parse_args()

    print(f"{'k':>20} {'predicted':>10} {'recurrence':>12} {'min dist':>10} {'config closure':>15}")
    for k in CASES:
        p = ModelParameters.from_k_string(1.0, 1.0, 2.0, k)
        horizon = p.n * math.pi / 2 + 0.1 if p.is_rational else args.horizon
        rep = detect_closure(p, sample_admissible_state(p, args.seed), horizon)
        fmt = lambda v: "-" if v is None else f"{v:.6f}"
        print(f"{k:>20} {fmt(rep.predicted_time):>10} {fmt(rep.recurrence_time):>12} "
              f"{rep.min_return_distance:10.2e} {fmt(rep.configuration_closure_time):>15}")


if __name__ == "__main__":
    main()
