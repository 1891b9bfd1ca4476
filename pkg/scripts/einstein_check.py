"""Corrector diffusivity against the Langevin mean-squared-displacement slope.

    python scripts/einstein_check.py --lambdas 0.5 1 2 --n-traj 100000 --out results/einstein
"""
import argparse
import logging
import time
from pathlib import Path

from kfphom import langevin, persist
from kfphom.cells import build_correctors
from kfphom.spectral import FrictionMatrix, Potential


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--n-traj", type=int, default=100_000)
    ap.add_argument("--T", type=float, default=50.0)
    ap.add_argument("--cuts", type=int, nargs=2, default=[16, 256])
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/einstein"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    a = FrictionMatrix.identity(1)
    rows = []
    for lam in args.lambdas:
        pot = Potential.cosine(1, lam)
        abar = build_correctors(pot, a, 1, tuple(args.cuts)).abar[0, 0]
        dt = langevin.fit_step(pot, a, args.T, 40)
        t0 = time.perf_counter()
        st = langevin.integrate(pot, a, dt, args.T, args.n_traj, args.seed + int(10 * lam), n_snap=40,
                                threads=args.threads)
        D, se = langevin.estimate_diffusivity(st)
        naive, naive_se = langevin.naive_diffusivity(st)
        z = abs(abar - D[0, 0]) / se[0, 0]
        logging.info("lambda %.2f  abar %.6f  D %.6f +- %.6f  z %.2f  (%.0f s)", lam, abar, D[0, 0], se[0, 0], z,
                     time.perf_counter() - t0)
        rows.append([lam, abar, D[0, 0], se[0, 0], naive[0, 0], naive_se[0, 0], z, dt])
    persist.write_table(args.out / "einstein.csv",
                        ["lambda", "abar", "D_hat", "se", "D_naive", "se_naive", "z", "dt"], rows,
                        {"n_traj": args.n_traj, "T": args.T, "cuts": args.cuts, "seed": args.seed,
                         "versions": persist.versions()})


if __name__ == "__main__":
    main()
