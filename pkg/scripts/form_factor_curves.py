"""Reference form factors (Poisson, GOE, arithmetic) on a tau grid, as CSV.

The arithmetic model grows like exp(pi sqrt(E) tau / 6); it is only meaningful for small tau.
"""
import argparse

import numpy as np

from geodesic_clt.stats import FormFactorModel, form_factor_reference


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--E", type=float, default=1e4, help="energy for the arithmetic model")
    ap.add_argument("--tmax", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=301)
    args = ap.parse_args()
    tau = np.linspace(0.0, args.tmax, args.points)
    models = [FormFactorModel("poisson"), FormFactorModel("goe"), FormFactorModel("arithmetic", E=args.E)]
    cols = [form_factor_reference(m, tau) for m in models]
    print("tau,poisson,goe,arithmetic")
    for row in zip(tau, *cols):
        print(",".join(f"{v:.8g}" for v in row))


if __name__ == "__main__":
    main()
