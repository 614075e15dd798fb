"""SAF families along D, mu and gamma, with the peak of each curve printed."""

import argparse
import math
from pathlib import Path

import numpy as np
from scipy.signal import argrelmax

from mfduffing import SystemParams, saf_sweep


def peaks(curve):
    saf = np.asarray(curve.column("saf"))
    return [(curve.values[i], saf[i]) for i in argrelmax(saf)[0]]


def write(curve, path, note):
    with open(path, "w") as fh:
        curve.to_csv(fh, note)
    found = ", ".join(f"{x:.4g} (SAF {y:.4g})" for x, y in peaks(curve)) or "none"
    print(f"{path.name}: interior maxima at {found}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w = args.threads

    D_grid = np.geomspace(0.02, 1.5, 120)
    for Omega, tag in ((0.1, "0.1"), (0.1 * math.pi, "0.1pi"), (0.3 * math.pi, "0.3pi")):
        for mu in (0.1, 0.2, 0.3, 0.6):
            curve = saf_sweep(SystemParams(mu=mu), "D", D_grid, Omega, workers=w)
            write(curve, out / f"saf_D_mu{mu}_W{tag}.csv", f"mu={mu} Omega={Omega:.9g}")

    mu_grid = np.linspace(0.0, 0.6, 121)
    for D in (0.1, 0.15, 0.2):
        curve = saf_sweep(SystemParams(D=D), "mu", mu_grid, 0.1, workers=w)
        write(curve, out / f"saf_mu_D{D}.csv", f"D={D} Omega=0.1")

    g_grid = np.geomspace(0.1, 2.0, 80)
    for D in (0.14, 0.15, 0.16, 0.18):
        curve = saf_sweep(SystemParams(mu=0.2, D=D), "gamma", g_grid, 0.1, workers=w)
        write(curve, out / f"saf_gamma_mu0.2_D{D}.csv", f"mu=0.2 D={D} Omega=0.1")
    for mu in (0.2, 0.23, 0.26):
        curve = saf_sweep(SystemParams(mu=mu, D=0.15), "gamma", g_grid, 0.1, workers=w)
        write(curve, out / f"saf_gamma_mu{mu}_D0.15.csv", f"mu={mu} D=0.15 Omega=0.1")


if __name__ == "__main__":
    main()
