"""Certified momentum degree of the reduced integral G for several (m, n)."""
import argparse

from ttwlab.model import ModelParameters
from ttwlab.polyint import claimed_degree, extract_reduced_integral, verify_polynomial_degree


def certified_degree(table, d_max):
    for d in range(d_max + 1):
        if verify_polynomial_degree(table, d).bounded:
            return d
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", default="1/1,2/1,1/2,3/2,3/1,1/3,4/3")
    ap.add_argument("--frac", type=float, default=0.4, help="phi as a fraction of the sector")
    args = ap.parse_args()

    print(f"{'m/n':>5} {'claimed':>8} {'certified':>10}")
    for k in args.cases.split(","):
        p = ModelParameters.from_k_string(1.0, 1.0, 2.0, k)
        d = claimed_degree(p)
        table = extract_reduced_integral(p, (1.0, args.frac * p.sector_width))
        print(f"{k:>5} {d:8d} {str(certified_degree(table, d)):>10}")


if __name__ == "__main__":
    main()
