"""Command line interface: ``kfphom <command> --config run.json``."""
from __future__ import annotations

import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import experiments, hetpoly, langevin, persist, poly
from .cells import build_correctors, multi_indices
from .persist import CacheInvalid, RunConfig

log = logging.getLogger("kfphom")


class Context:
    def __init__(self, config, seed, out, force, threads):
        self.cfg = RunConfig.load(config)
        if seed is not None:
            self.cfg.seed = int(seed)
        self.out = Path(out if out is not None else self.cfg.out)
        self.force = force
        self.threads = threads

    def meta(self, **extra) -> dict:
        m = {"config_hash": self.cfg.hash().hex(), "seed": self.cfg.seed, "versions": persist.versions()}
        m.update(extra)
        return m

    def correctors(self, order=None):
        """Load correctors from the cache or solve and store them."""
        cfg = self.cfg
        order = cfg.order if order is None else order
        pot, a = cfg.potential_obj(), cfg.friction_obj()
        key_hash = cfg.hash(cfg.corrector_key())
        path = persist.cache_path(cfg, order)
        if path.exists() and not self.force:
            cset = persist.load_correctors(path, pot, a, config_hash=key_hash, tol=cfg.tol)
            log.info("cache hit: %s", path)
            return cset, path, True
        cset = build_correctors(pot, a, order, cfg.cuts, cfg.tol, threads=self.threads, use_cache=False)
        persist.save_correctors(path, cset, key_hash)
        log.info("solved correctors through order %d, cached at %s", order, path)
        return cset, path, False


def _common(f):
    f = click.option("--threads", type=click.IntRange(1), default=1, show_default=True)(f)
    f = click.option("--force", is_flag=True, help="Ignore and overwrite cached correctors.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    f = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None)(f)
    f = click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)(f)
    return f


def _ctx(config, seed, out, force, threads) -> Context:
    try:
        return Context(config, seed, out, force, threads)
    except (ValueError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"invalid config: {exc}") from exc


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Spectral correctors, polynomial checks and Monte Carlo experiments."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


@main.command()
@_common
def correctors(config, seed, out, force, threads):
    """Solve (or load) the corrector hierarchy and tabulate the effective tensors."""
    ctx = _ctx(config, seed, out, force, threads)
    try:
        cset, path, hit = ctx.correctors()
    except CacheInvalid as exc:
        raise click.ClickException(f"corrector cache is invalid ({exc}); rerun with --force")
    rows = []
    for k in range(1, cset.order + 1):
        for a in multi_indices(cset.dim, k):
            rows.append(["".join(map(str, a)), k, cset.abar_alpha[a], cset.residuals.get(a, 0.0)])
    persist.write_table(ctx.out / "correctors.csv", ["alpha", "order", "abar_alpha", "residual"], rows,
                        ctx.meta(abar=cset.abar.tolist(), cache=str(path.name), cuts=list(cset.cuts)))
    click.echo(json.dumps({"abar": cset.abar.tolist(), "cache_hit": hit}))


@main.command()
@_common
def effdiff(config, seed, out, force, threads):
    """Effective diffusivity abar from the first order correctors."""
    ctx = _ctx(config, seed, out, force, threads)
    try:
        cset, _, _ = ctx.correctors(order=1)
    except CacheInvalid as exc:
        raise click.ClickException(f"corrector cache is invalid ({exc}); rerun with --force")
    result = {"a_eff": cset.abar.tolist()}
    ctx.out.mkdir(parents=True, exist_ok=True)
    persist.atomic_write(ctx.out / "effdiff.json",
                         (json.dumps({**result, **ctx.meta()}, indent=2, sort_keys=True) + "\n").encode())
    click.echo(json.dumps(result))


@main.command()
@_common
@click.option("--snapshots", type=click.IntRange(2), default=40, show_default=True)
def mc(config, seed, out, force, threads, snapshots):
    """Langevin Monte Carlo estimate of the effective diffusivity."""
    ctx = _ctx(config, seed, out, force, threads)
    cfg = ctx.cfg
    pot, a = cfg.potential_obj(), cfg.friction_obj()
    dt = cfg.dt if cfg.dt is not None else langevin.fit_step(pot, a, cfg.T, snapshots)
    try:
        st = langevin.integrate(pot, a, dt, cfg.T, cfg.n_traj, cfg.seed, n_snap=snapshots, threads=threads)
        D, se = langevin.estimate_diffusivity(st)
    except (langevin.StepTooLarge, langevin.NotInLinearRegime, ValueError) as exc:
        raise click.ClickException(str(exc))
    msd = st.msd_matrix()
    d = st.dim
    header = ["t"] + [f"msd_{i}{j}" for i in range(d) for j in range(d)] + [f"var_v_{i}" for i in range(d)]
    rows = [[float(t)] + list(msd[n].ravel()) + list(st.var_v()[n]) for n, t in enumerate(st.times)]
    persist.write_table(ctx.out / "mc.csv", header, rows,
                        ctx.meta(D_hat=D.tolist(), se=se.tolist(), dt=dt, n_traj=cfg.n_traj, T=cfg.T))
    click.echo(json.dumps({"D_hat": D.tolist(), "se": se.tolist()}))


@main.command()
@_common
@click.option("--allow-noise", is_flag=True, help="Do not fail when MC noise dominates the error.")
def homog(config, seed, out, force, threads, allow_noise):
    """Homogenization rate table: density error of X_t against the homogenized solution."""
    ctx = _ctx(config, seed, out, force, threads)
    cfg = ctx.cfg
    try:
        cset, _, _ = ctx.correctors(order=1)
        hcfg = experiments.HomExperimentConfig(cfg.potential_obj(), cfg.friction_obj(), tuple(cfg.cuts),
                                               tuple(cfg.times), tuple(cfg.t0s), cfg.n_traj, cfg.seed,
                                               threads, cfg.dt)
        table = experiments.homogenization_rate(hcfg, abar=float(cset.abar[0, 0]), check_budget=not allow_noise)
    except (experiments.InsufficientBudget, CacheInvalid, ValueError) as exc:
        raise click.ClickException(str(exc))
    ctx.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(ctx.out / "homog.csv")
    persist.atomic_write(ctx.out / "homog.json",
                         (json.dumps(ctx.meta(**table.summary()), indent=2, sort_keys=True) + "\n").encode())
    click.echo(json.dumps(table.summary()))


@main.command()
@_common
def regularity(config, seed, out, force, threads):
    """Decay exponents of ||f - psi||_{Q_r} for exact solutions f."""
    ctx = _ctx(config, seed, out, force, threads)
    cfg = ctx.cfg
    order = max(max(cfg.m) + 3, cfg.order)
    try:
        cset, _, _ = ctx.correctors(order=order)
    except CacheInvalid as exc:
        raise click.ClickException(f"corrector cache is invalid ({exc}); rerun with --force")
    rows = []
    for m in cfg.m:
        radii = regularity_radii(m, cfg.R)
        rep = hetpoly.regularity_scan(cset, m + 1, m, radii, R=cfg.R, seed=cfg.seed)
        rows.append([m, rep.slope, rep.r2, int(rep.degenerate), int(rep.passed(m + 1))])
    persist.write_table(ctx.out / "regularity.csv", ["m", "slope", "r2", "degenerate", "passed"], rows, ctx.meta())
    click.echo(json.dumps({"rows": rows}))


def regularity_radii(m: int, R: float, C: int = 4) -> list:
    """Integer radii in [C (m + 2), R / 8]."""
    return list(range(C * (m + 2), int(R // 8) + 1, 2))


@main.command("poly-selftest")
@_common
def poly_selftest(config, seed, out, force, threads):
    """Exact polynomial identity suite; exit status 1 on any failure."""
    ctx = _ctx(config, seed, out, force, threads)
    s = ctx.cfg.seed
    checks = {
        "laplacian_S_and_inversion": poly.identity_sweep(seed=s),
        "S_norm_bound": poly.s_norm_sweep(seed=s),
        "hermite": poly.hermite_checks(),
        "newton": poly.newton_checks(seed=s),
        "estimates": poly.poly_estimate_suite(seed=s),
    }
    ok = {
        "laplacian_S_and_inversion": checks["laplacian_S_and_inversion"]["passed"],
        "S_norm_bound": checks["S_norm_bound"]["passed"],
        "hermite": checks["hermite"]["orthogonality_exact"] and checks["hermite"]["recurrence"]
        and checks["hermite"]["quadrature_rel_err"] < 1e-9,
        "newton": all(checks["newton"].values()),
        "estimates": checks["estimates"]["passed"],
    }
    rows = [[name, int(passed)] for name, passed in ok.items()]
    persist.write_table(ctx.out / "poly_selftest.csv", ["check", "passed"], rows, ctx.meta(details=_plain(checks)))
    for name, passed in ok.items():
        click.echo(f"{name}: {'PASS' if passed else 'FAIL'}")
    if not all(ok.values()):
        sys.exit(1)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(obj)
    return obj


if __name__ == "__main__":
    main()
