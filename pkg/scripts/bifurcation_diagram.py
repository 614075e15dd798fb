"""Equilibrium branches along D for a few couplings, and along mu at D = 0.15."""

import argparse
from pathlib import Path

import numpy as np

from mfduffing import SystemParams, bifurcation_sweep, critical_parameter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for mu in (0.1, 0.2, 0.3):
        p = SystemParams(mu=mu)
        curve = bifurcation_sweep(p, "D", np.linspace(0.02, 0.5, 100), workers=args.threads)
        with open(out / f"branches_D_mu{mu}.csv", "w") as fh:
            curve.to_csv(fh, f"mu={mu}")
        print(f"mu={mu}: D_c = {critical_parameter(p, 'D'):.5f}")

    p = SystemParams(D=0.15)
    curve = bifurcation_sweep(p, "mu", np.linspace(0.0, 0.6, 100), workers=args.threads)
    with open(out / "branches_mu_D0.15.csv", "w") as fh:
        curve.to_csv(fh, "D=0.15")
    print(f"D=0.15: mu_c = {critical_parameter(p, 'mu'):.5f}")


if __name__ == "__main__":
    main()
