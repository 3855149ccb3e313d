"""Running mean and mean square of the amplitudes at powers of ten."""
import argparse

from geodesic_clt.amplitude import build_table, partial_stats
from geodesic_clt.stats import default_kappa


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=100_000)
    ap.add_argument("--cache", default=None)
    args = ap.parse_args()
    table = build_table(args.nmax, args.cache)
    kappa = default_kappa()
    print(f"kappa {kappa:.7f}")
    print("N,mean,mean_square_over_kappa")
    N = 100
    while N <= args.nmax:
        s, s2 = partial_stats(table, N)
        print(f"{N},{s / N:.6f},{s2 / (kappa * N):.6f}")
        N *= 10


if __name__ == "__main__":
    main()
