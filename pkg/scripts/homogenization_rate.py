"""Density error of the Langevin position against the homogenized Gaussian, as a function of t.

    python scripts/homogenization_rate.py --n-traj 100000 --times 8 16 32 64 --t0s 0 4
"""
import argparse
import json
import logging
from pathlib import Path

from kfphom import experiments, persist
from kfphom.spectral import Potential


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--n-traj", type=int, default=100_000)
    ap.add_argument("--times", type=float, nargs="+", default=[8.0, 16.0, 32.0, 64.0])
    ap.add_argument("--t0s", type=float, nargs="+", default=[0.0, 4.0])
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/homogenization"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = experiments.HomExperimentConfig(Potential.cosine(1, args.lam), times=tuple(args.times),
                                          t0s=tuple(args.t0s), n_traj=args.n_traj, seed=args.seed,
                                          threads=args.threads)
    table = experiments.homogenization_rate(cfg, check_budget=False)
    for r in table.rows:
        logging.info("t %5.1f  t0 %4.1f  error %.5f  phase %.5f  noise %.5f", r["t"], r["t0"],
                     r["error_xmarginal"], r["error_phase"], r["mc_se"])
    args.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out / "rate.csv")
    summary = {**table.summary(), "versions": persist.versions()}
    (args.out / "rate.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    logging.info("slopes %s", summary["slopes"])


if __name__ == "__main__":
    main()
