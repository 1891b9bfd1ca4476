"""End-to-end homogenization experiments.

Two checks live here.  The first assembles the two-scale function

    W = Qbar + sum_i phi_i d_i Qbar + sum_ij psi_ij d_ij Qbar

for a closed-form solution Qbar of the homogenized heat equation and
verifies that ``(d_t + L) W`` equals the remainder predicted by the corrector
equations.  The second measures how fast the Monte Carlo transition density
approaches the homogenized Gaussian.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np
from gmpy2 import mpq
from scipy import special

from . import langevin
from .cells import CorrectorSet, build_correctors, unit
from .poly import MultiPoly
from .spectral import FrictionMatrix, Potential, apply, fourier_eval

log = logging.getLogger(__name__)


class InsufficientBudget(RuntimeError):
    """Monte Carlo noise is too large to resolve the measured error."""


# ---------------------------------------------------------------- configuration


@dataclass
class HomExperimentConfig:
    potential: Potential = field(default_factory=lambda: Potential.cosine(1, 1.0))
    friction: FrictionMatrix = field(default_factory=lambda: FrictionMatrix.identity(1))
    cuts: tuple = (12, 32)
    times: tuple = (8.0, 16.0, 32.0, 64.0)
    t0s: tuple = (0.0, 4.0)
    n_traj: int = 100_000
    seed: int = 20240601
    threads: int = 1
    dt: float | None = None
    v_bins: int = 8
    out: str | None = None

    def __post_init__(self):
        self.times = tuple(float(t) for t in self.times)
        self.t0s = tuple(float(t) for t in self.t0s)
        self.cuts = tuple(int(c) for c in self.cuts)
        if self.n_traj <= 0 or self.threads <= 0 or self.v_bins <= 0:
            raise ValueError("budgets must be positive")
        if not self.times or min(self.times) <= 0:
            raise ValueError("times must be positive")
        if min(self.t0s, default=0.0) < 0:
            raise ValueError("t0 must be nonnegative")
        for t0 in self.t0s:
            for t in self.times:
                if t0 > t / 2:
                    raise ValueError(f"t0 = {t0} exceeds t/2 for t = {t}")

    @property
    def dim(self) -> int:
        return self.potential.dim

    def step(self) -> float:
        T = max(self.times)
        return self.dt if self.dt is not None else langevin.fit_step(self.potential, self.friction, T,
                                                                     self.n_snapshots())

    def n_snapshots(self) -> int:
        return int(round(max(self.times) / self.snapshot_spacing()))

    def snapshot_spacing(self) -> float:
        """Largest spacing that puts every t and t0 on the snapshot grid."""
        fr = [Fraction(str(t)).limit_denominator(10 ** 6) for t in self.times + self.t0s if t > 0]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr), 1)
        num = reduce(math.gcd, (int(f * den) for f in fr))
        return num / den


# ---------------------------------------------------------------- homogenized solutions


def _as_matrix(abar, dim=None) -> np.ndarray:
    A = np.atleast_2d(np.asarray(abar, dtype=float))
    if dim is not None and A.shape != (dim, dim):
        raise ValueError("abar has the wrong shape")
    if np.any(np.linalg.eigvalsh(0.5 * (A + A.T)) <= 0):
        raise ValueError("abar must be positive definite")
    return A


class GaussianQbar:
    """Qbar(s, x) = mass * N(x; center, cov0 + 2 abar s) in any dimension.

    With ``cov0 = 0`` this is the heat kernel of d_s - abar : grad^2.  The
    derivatives d^alpha Qbar = P_alpha(x - center) Qbar are generated from the
    exact recursion d_i (P g) = (d_i P - (K y)_i P) g with K the inverse
    covariance, so no finite differences enter.
    """

    def __init__(self, abar, *, cov0=None, mass: float = 1.0, center=None):
        self.abar = _as_matrix(abar)
        d = self.abar.shape[0]
        self.dim = d
        self.cov0 = np.zeros((d, d)) if cov0 is None else np.atleast_2d(np.asarray(cov0, float))
        self.mass = float(mass)
        self.center = np.zeros(d) if center is None else np.asarray(center, float)

    def cov(self, s: float) -> np.ndarray:
        return self.cov0 + 2.0 * self.abar * s

    @lru_cache(maxsize=256)
    def _poly(self, s: float, alpha: tuple) -> MultiPoly:
        if sum(alpha) == 0:
            return MultiPoly.const(self.dim, 1)
        j = next(i for i, a in enumerate(alpha) if a > 0)
        lower = list(alpha)
        lower[j] -= 1
        P = self._poly(s, tuple(lower))
        K = np.linalg.inv(self.cov(s))
        Ky = sum((MultiPoly.var(self.dim, i) * mpq(float(K[j, i])) for i in range(self.dim)),
                 MultiPoly.zero(self.dim))
        return P.deriv(j) - Ky * P

    def __call__(self, s: float, x) -> np.ndarray:
        return self.deriv((0,) * self.dim, s, x)

    def deriv(self, alpha, s: float, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        y = x - self.center
        C = self.cov(s)
        K = np.linalg.inv(C)
        g = self.mass * np.exp(-0.5 * np.einsum("pi,ij,pj->p", y, K, y)) / math.sqrt(
            (2 * math.pi) ** self.dim * np.linalg.det(C))
        return self._poly(float(s), tuple(int(a) for a in alpha))(y) * g

    def time_deriv(self, alpha, s: float, x) -> np.ndarray:
        """d_s d^alpha Qbar = abar : grad^2 d^alpha Qbar (closed form)."""
        out = 0.0
        for k in range(self.dim):
            for l in range(self.dim):
                if self.abar[k, l] != 0:
                    beta = list(alpha)
                    beta[k] += 1
                    beta[l] += 1
                    out = out + self.abar[k, l] * self.deriv(tuple(beta), s, x)
        return out * np.ones(np.atleast_2d(x).shape[0])

    def variance(self, s: float) -> np.ndarray:
        return self.cov(s)

    def total_mass(self) -> float:
        return self.mass

    def cell_mass(self, s: float, lo, hi) -> np.ndarray:
        """Mass in [lo, hi) for d = 1 (arrays of interval ends)."""
        if self.dim != 1:
            raise ValueError("cell masses are implemented for d = 1")
        sd = math.sqrt(self.cov(s)[0, 0])
        z = (np.asarray(hi, float) - self.center[0]) / sd, (np.asarray(lo, float) - self.center[0]) / sd
        return self.mass * (special.ndtr(z[0]) - special.ndtr(z[1]))


def _ndtr_antideriv(z):
    """G with G' = Phi."""
    return z * special.ndtr(z) + np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


class HistogramQbar:
    """Qbar for d = 1 with piecewise-constant data ``masses`` on ``edges``.

    Qbar(s, x) = sum_b w_b / h_b [Phi((x - l_b)/sigma) - Phi((x - r_b)/sigma)],
    sigma^2 = 2 abar s, i.e. the exact heat evolution of the histogram density.
    """

    def __init__(self, edges, masses, abar):
        self.abar = _as_matrix(abar, 1)
        self.dim = 1
        self.edges = np.asarray(edges, float)
        self.masses = np.asarray(masses, float)
        if self.edges.shape[0] != self.masses.shape[0] + 1 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be increasing with one more entry than masses")

    def _sigma(self, s):
        return math.sqrt(2.0 * self.abar[0, 0] * s)

    def deriv(self, alpha, s: float, x) -> np.ndarray:
        k = int(alpha[0]) if np.ndim(alpha) else int(alpha)
        x = np.atleast_2d(np.asarray(x, float))[:, 0]
        lo, hi = self.edges[:-1], self.edges[1:]
        dens = self.masses / (hi - lo)
        if s == 0:
            if k:
                raise ValueError("histogram data has no derivatives at s = 0")
            idx = np.searchsorted(self.edges, x, side="right") - 1
            ok = (idx >= 0) & (idx < len(dens))
            return np.where(ok, dens[np.clip(idx, 0, len(dens) - 1)], 0.0)
        sg = self._sigma(s)
        zl = (x[:, None] - lo[None, :]) / sg
        zr = (x[:, None] - hi[None, :]) / sg
        if k == 0:
            return (special.ndtr(zl) - special.ndtr(zr)) @ dens
        # d^k/dx^k Phi((x - e)/sigma) = (-1)^(k-1) He_{k-1}(z) phi(z) / sigma^k
        he = special.eval_hermitenorm
        phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        term = he(k - 1, zl) * phi(zl) - he(k - 1, zr) * phi(zr)
        return (-1) ** (k - 1) * (term @ dens) / sg ** k

    def __call__(self, s: float, x) -> np.ndarray:
        return self.deriv((0,), s, x)

    def time_deriv(self, alpha, s: float, x) -> np.ndarray:
        return self.abar[0, 0] * self.deriv((int(alpha[0]) + 2,), s, x)

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def variance(self, s: float) -> float:
        lo, hi = self.edges[:-1], self.edges[1:]
        w = self.masses / self.masses.sum()
        m1 = np.sum(w * (lo + hi) / 2)
        m2 = np.sum(w * (lo * lo + lo * hi + hi * hi) / 3)
        return float(m2 - m1 * m1 + 2 * self.abar[0, 0] * s)

    def cell_kernel(self, s: float, lo, hi) -> np.ndarray:
        """K[c, b]: mass that unit data in bin b puts into [lo_c, hi_c) after time s."""
        lo = np.asarray(lo, float)[:, None]
        hi = np.asarray(hi, float)[:, None]
        bl, br = self.edges[None, :-1], self.edges[None, 1:]
        if s == 0:
            over = np.clip(np.minimum(hi, br) - np.maximum(lo, bl), 0, None)
            return over / (br - bl)
        sg = self._sigma(s)
        G = _ndtr_antideriv
        val = G((hi - bl) / sg) - G((lo - bl) / sg) - G((hi - br) / sg) + G((lo - br) / sg)
        return val * sg / (br - bl)

    def cell_mass(self, s: float, lo, hi) -> np.ndarray:
        return self.cell_kernel(s, lo, hi) @ self.masses


def build_Qbar(data, abar):
    """Homogenized solution started from Monte Carlo data.

    ``data`` is either ``(edges, masses)`` for a d = 1 histogram of X_{t0}
    or an array of point locations (equal weights).  A single point gives the
    heat kernel itself.
    """
    if isinstance(data, tuple) and len(data) == 2:
        edges, masses = data
        return HistogramQbar(edges, masses, abar)
    pts = np.atleast_2d(np.asarray(data, float))
    if pts.shape[0] != 1:
        raise ValueError("point data must be a single location; use a histogram for samples")
    A = np.atleast_2d(np.asarray(abar, float))
    return GaussianQbar(A, center=pts[0])


def qbar_derivative_bounds(qbar, times, *, t0: float = 0.0, kmax: int = 3, c: float | None = None,
                           xmax: float | None = None, npts: int = 801) -> dict:
    """Fit C_k in s^{k/2} |d^k Qbar(s, x)| <= C_k Gamma_c(t, x) on a grid (d = 1).

    Gamma_c(t, x) = t^{-1/2} exp(-x^2 / (c t)) with t = t0 + s the total time.
    By default c = 8 abar, twice the heat-kernel width.  ``stable`` is the
    ratio of the largest to smallest per-time constant over all k.
    """
    a = float(np.atleast_2d(qbar.abar)[0, 0])
    c = 8.0 * a if c is None else float(c)
    tmax = t0 + max(times)
    xmax = 6.0 * math.sqrt(c * tmax) if xmax is None else xmax
    x = np.linspace(-xmax, xmax, npts)[:, None]
    per_k = {}
    spread = []
    for k in range(kmax + 1):
        vals = []
        for s in times:
            t = t0 + s
            env = np.exp(-x[:, 0] ** 2 / (c * t)) / math.sqrt(t)
            vals.append(float(np.max(s ** (k / 2) * np.abs(qbar.deriv((k,), s, x)) / env)))
        per_k[k] = max(vals)
        spread.append(max(vals) / max(min(vals), 1e-300))
    return {"c": c, "C": per_k, "spread": max(spread)}


def heat_kernel_constants(a: float, kmax: int = 3) -> dict:
    """Explicit C_k for the point-mass solution with c = 8 a.

    s^{k/2} |d^k g| / Gamma_c = (4 pi a)^{-1/2} (2a)^{-k/2} |He_k(z)| exp(-z^2/4).
    """
    z = np.linspace(-40, 40, 400001)
    out = {}
    for k in range(kmax + 1):
        m = float(np.max(np.abs(special.eval_hermitenorm(k, z)) * np.exp(-z * z / 4)))
        out[k] = m / math.sqrt(4 * math.pi * a) / (2 * a) ** (k / 2)
    return out


# ---------------------------------------------------------------- two-scale residual


@dataclass
class ResidualReport:
    residual: float
    relative: float
    scale: float
    extra_term: float
    npoints: int

    def as_dict(self) -> dict:
        return asdict(self)


def _sample_points(dim, nx, window, n_per_axis, nv_pts):
    xs = np.linspace(-window, window, n_per_axis)
    grids = np.meshgrid(*([xs] * dim), indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=1)
    vn, _ = np.polynomial.hermite_e.hermegauss(nv_pts)
    vg = np.meshgrid(*([vn] * dim), indexing="ij")
    v = np.stack([g.ravel() for g in vg], axis=1)
    X = np.repeat(x, len(v), axis=0)
    V = np.tile(v, (len(x), 1))
    return X, V


def two_scale_residual(cset: CorrectorSet, psi: dict, qbar, times=(1.0, 2.0, 4.0), *,
                       window: float = 2.0, resolution: int = 4, nv_pts: int = 6) -> ResidualReport:
    """Check (d_t + L) W against the corrector-equation remainder.

    Expanding with the product rule and L phi_i = v_i, L psi_ij = v_i phi_j - abar_ij,
    (d_t + L) W = (d_t - abar : grad^2) Qbar + sum_i phi_i d_t d_i Qbar
                  + sum_ij psi_ij (d_t d_ij Qbar - sum_k v_k d_ijk Qbar).
    The left side is assembled term by term with L applied spectrally to each
    corrector; the right side is subtracted and the sup-difference is reported
    relative to the largest individual term.  ``extra_term`` is the size of
    (abar(x) - abar) : grad^2 Qbar, which would appear if the second correctors
    were driven by the gamma-average of v_i phi_j instead of v_i phi_j itself.
    """
    d = cset.dim
    nx = cset.cuts[0]
    opr = cset.operator
    npa = resolution * (2 * nx + 1) if d == 1 else resolution * (nx + 1)
    X, V = _sample_points(d, nx, window, npa, nv_pts)
    phi = {i: cset.phi[unit(d, i)] for i in range(d)}
    Lphi = {i: apply(opr, phi[i]) for i in range(d)}
    Lpsi = {ij: apply(opr, p) for ij, p in psi.items()}
    val = {("phi", i): phi[i](X, V) for i in range(d)}
    val.update({("Lphi", i): Lphi[i](X, V) for i in range(d)})
    val.update({("psi", ij): p(X, V) for ij, p in psi.items()})
    val.update({("Lpsi", ij): p(X, V) for ij, p in Lpsi.items()})
    abar = cset.abar
    ax = {(i, j): fourier_eval(d, nx, cset.abar_x(i, j), X) for i in range(d) for j in range(d)}

    def e(*idx):
        a = [0] * d
        for i in idx:
            a[i] += 1
        return tuple(a)

    worst = scale = extra = 0.0
    for s in times:
        D = lambda *idx: qbar.deriv(e(*idx), s, X)
        Dt = lambda *idx: qbar.time_deriv(e(*idx), s, X)
        terms = [Dt(), -sum(V[:, k] * D(k) for k in range(d))]
        rhs = Dt() - sum(abar[i, j] * D(i, j) for i in range(d) for j in range(d))
        for i in range(d):
            terms.append(val[("Lphi", i)] * D(i))
            terms.append(-sum(V[:, k] * val[("phi", i)] * D(i, k) for k in range(d)))
            terms.append(val[("phi", i)] * Dt(i))
            rhs = rhs + val[("phi", i)] * Dt(i)
        for (i, j), p in psi.items():
            third = sum(V[:, k] * D(i, j, k) for k in range(d))
            terms.append(val[("Lpsi", (i, j))] * D(i, j))
            terms.append(-val[("psi", (i, j))] * third)
            terms.append(val[("psi", (i, j))] * Dt(i, j))
            rhs = rhs + val[("psi", (i, j))] * (Dt(i, j) - third)
        lhs = sum(terms)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        scale = max(scale, max(float(np.max(np.abs(t))) for t in terms))
        extra = max(extra, float(np.max(np.abs(sum((ax[i, j] - abar[i, j]) * D(i, j)
                                                     for i in range(d) for j in range(d))))))
    return ResidualReport(worst, worst / scale, scale, extra / scale, len(X) * len(times))


# ---------------------------------------------------------------- homogenization rate


@dataclass
class RateTable:
    rows: list
    abar: float
    mc_abar: float
    mc_abar_se: float
    config_hash: str = ""

    COLUMNS = ("t", "t0", "error_xmarginal", "error_phase", "mc_se", "slope_running")

    def select(self, t0: float) -> list:
        return [r for r in self.rows if r["t0"] == t0]

    def errors(self, t0: float = 0.0) -> np.ndarray:
        return np.array([r["error_xmarginal"] for r in self.select(t0)])

    def slope(self, t0: float = 0.0) -> float:
        rows = self.select(t0)
        return float(np.polyfit(np.log([r["t"] for r in rows]), np.log([r["error_xmarginal"] for r in rows]), 1)[0])

    def strictly_decreasing(self, t0: float = 0.0) -> bool:
        e = self.errors(t0)
        return bool(np.all(np.diff(e) < 0))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(float(r[k])) if k not in ("t", "t0") else r[k]) for k in self.COLUMNS})

    def summary(self) -> dict:
        return {"abar": self.abar, "mc_abar": self.mc_abar, "mc_abar_se": self.mc_abar_se,
                "slopes": {str(t0): self.slope(t0) for t0 in sorted({r["t0"] for r in self.rows})}}


def _group_counts(x, groups, edges):
    """Histogram counts per trajectory group, shape (n_groups, n_bins)."""
    out = np.empty((len(groups), len(edges) - 1))
    for g, sl in enumerate(groups):
        out[g] = np.histogram(x[sl], bins=edges)[0]
    return out


def _jackknife_var(stat_fn, G):
    """Delete-one-group jackknife variance of a vector statistic of group counts."""
    tot = G.sum(axis=0)
    reps = np.array([stat_fn(tot - G[g]) for g in range(len(G))])
    n = len(G)
    return (n - 1) / n * np.sum((reps - reps.mean(axis=0)) ** 2, axis=0)


def _compare(st, t, t0, abar, v_bins):
    """Errors of the unit-cell averaged density of X_t against Qbar (d = 1)."""
    groups = st.groups()
    x_t = st.X[st.time_index(t)][:, 0]
    v_t = st.V[st.time_index(t)][:, 0]
    half = math.sqrt(t)
    cells = np.arange(math.ceil(-half), math.floor(half))
    lo, hi = cells.astype(float), cells + 1.0
    edges = np.append(lo, hi[-1])
    sizes = np.array([sl.stop - sl.start for sl in groups], float)
    if t0 == 0:
        target_fn = lambda counts0: GaussianQbar(abar).cell_mass(t, lo, hi)
        G0 = np.zeros((len(groups), 1))
    else:
        x0 = st.X[st.time_index(t0)][:, 0]
        e0 = np.arange(math.floor(x0.min()), math.ceil(x0.max()) + 1.0)
        if len(e0) < 2:
            e0 = np.array([e0[0], e0[0] + 1.0])
        K = HistogramQbar(e0, np.ones(len(e0) - 1), abar).cell_kernel(t - t0, lo, hi)
        G0 = _group_counts(x0, groups, e0)
        target_fn = lambda counts0: K @ (counts0 / counts0.sum())
    Gt = _group_counts(x_t, groups, edges)
    nG = len(groups)
    both = np.concatenate([Gt, G0, sizes[:, None]], axis=1)
    nc = len(lo)

    def diff(v):
        return v[:nc] / v[-1] - target_fn(v[nc:-1])

    d_full = diff(both.sum(axis=0))
    var = _jackknife_var(diff, both) if nG > 1 else np.zeros(nc)
    raw2 = float(np.mean(d_full ** 2))
    noise2 = float(np.mean(var))
    err = math.sqrt(max(raw2 - noise2, 0.0))
    # phase-space variant: unit x cells times equiprobable gamma bins in v
    qv = special.ndtri(np.linspace(0, 1, v_bins + 1)[1:-1])
    vb = np.searchsorted(qv, v_t)
    inside = (x_t >= lo[0]) & (x_t < hi[-1])
    xc = np.clip(np.floor(x_t).astype(int) - int(lo[0]), 0, nc - 1)
    flat = np.where(inside, xc * v_bins + vb, -1)
    GP = np.empty((nG, nc * v_bins))
    for g, sl in enumerate(groups):
        f = flat[sl]
        GP[g] = np.bincount(f[f >= 0], minlength=nc * v_bins)
    bothp = np.concatenate([GP, G0, sizes[:, None]], axis=1)
    gam = 1.0 / v_bins

    def diffp(v):
        m = v[:nc * v_bins].reshape(nc, v_bins) / v[-1]
        q = target_fn(v[nc * v_bins:-1])
        return ((m - q[:, None] * gam) / math.sqrt(gam)).ravel()

    dp = diffp(bothp.sum(axis=0))
    varp = _jackknife_var(diffp, bothp) if nG > 1 else np.zeros_like(dp)
    errp = math.sqrt(max(float(np.sum(dp ** 2) - np.sum(varp)) / nc, 0.0))
    return {"t": t, "t0": t0, "error_xmarginal": err, "error_phase": errp, "mc_se": math.sqrt(noise2),
            "raw": math.sqrt(raw2)}


def homogenization_rate(cfg: HomExperimentConfig, *, stats: langevin.EnsembleStats | None = None,
                        abar: float | None = None, check_budget: bool = True) -> RateTable:
    """Density error of X_t against the homogenized solution, per (t, t0).

    For t0 = 0 the reference is the Gaussian N(0, 2 abar t); for t0 > 0 it is
    Qbar started from the histogram of X_{t0}.  Densities are compared through
    their unit-cell averages on B_sqrt(t), and the squared error is corrected
    for Monte Carlo noise with a jackknife over trajectory groups.
    """
    if cfg.dim != 1:
        raise ValueError("the rate experiment is implemented for d = 1")
    if abar is None:
        abar = float(build_correctors(cfg.potential, cfg.friction, 1, cfg.cuts).abar[0, 0])
    if stats is None:
        stats = langevin.integrate(cfg.potential, cfg.friction, cfg.step(), max(cfg.times), cfg.n_traj,
                                   cfg.seed, n_snap=cfg.n_snapshots(), threads=cfg.threads)
    try:
        D, se = langevin.estimate_diffusivity(stats, check=False)
    except langevin.NotInLinearRegime:
        D = se = np.full((1, 1), np.nan)
    rows = []
    for t0 in sorted(cfg.t0s):
        sel = []
        for t in sorted(cfg.times):
            r = _compare(stats, t, t0, abar, cfg.v_bins)
            if check_budget and r["mc_se"] > 0.5 * r["error_xmarginal"]:
                raise InsufficientBudget(
                    f"t = {t}, t0 = {t0}: noise {r['mc_se']:.3g} exceeds half the error {r['error_xmarginal']:.3g}")
            sel.append(r)
            if len(sel) >= 2 and all(s["error_xmarginal"] > 0 for s in sel):
                r["slope_running"] = float(np.polyfit(np.log([s["t"] for s in sel]),
                                                      np.log([s["error_xmarginal"] for s in sel]), 1)[0])
            else:
                r["slope_running"] = float("nan")
        rows.extend(sel)
    return RateTable(rows, float(abar), float(D[0, 0]), float(se[0, 0]))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
