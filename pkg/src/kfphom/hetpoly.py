"""Heterogeneous polynomials psi = sum_{|alpha| <= m} phi_alpha d^alpha q."""
from __future__ import annotations

import math
from dataclasses import dataclass
from gmpy2 import mpq

import numpy as np

from . import poly
from .cells import CorrectorSet, multi_indices
from .poly import LatticeField, MultiPoly, lattice_points, monomials, monomials_upto
from .spectral import TWO_PI, apply


class SingularSystem(RuntimeError):
    pass


def osc_moments(ks: np.ndarray, bmax: int, half: float) -> np.ndarray:
    """J[k, b] = int_{-half}^{half} exp(2 pi i k y) y^b dy for integer k."""
    ks = np.asarray(ks)
    J = np.zeros((len(ks), bmax + 1), dtype=complex)
    for b in range(bmax + 1):
        J[ks == 0, b] = (half ** (b + 1) - (-half) ** (b + 1)) / (b + 1)
    nz = ks != 0
    om = TWO_PI * ks[nz]
    ep, em = np.exp(1j * om * half), np.exp(-1j * om * half)
    prev = None
    for b in range(bmax + 1):
        bdry = (half ** b * ep - (-half) ** b * em) / (1j * om)
        cur = bdry if b == 0 else bdry - b / (1j * om) * prev
        J[nz, b] = cur
        prev = cur
    return J


def _axis_modes(nx):
    return np.arange(-nx, nx + 1)


@dataclass(frozen=True, eq=False)
class HetPoly:
    cset: CorrectorSet
    q: MultiPoly

    def __post_init__(self):
        if self.q.dim != self.cset.dim:
            raise ValueError("polynomial and correctors have different dimensions")
        self.cset.require(max(self.q.degree, 0))

    @property
    def degree(self) -> int:
        return max(self.q.degree, 0)

    @property
    def dim(self) -> int:
        return self.q.dim

    def terms(self):
        """(alpha, d^alpha q) pairs with nonzero derivative."""
        out = []
        for k in range(self.degree + 1):
            for a in multi_indices(self.dim, k):
                dq = self.q.diff(a)
                if not dq.is_zero():
                    out.append((a, dq))
        return out

    def __call__(self, x, v) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        v = np.atleast_2d(np.asarray(v, float))
        return sum(self.cset.phi[a](x, v) * dq(x) for a, dq in self.terms())

    def __sub__(self, other: "HetPoly") -> "HetPoly":
        if other.cset is not self.cset:
            raise ValueError("heterogeneous polynomials built on different correctors")
        return HetPoly(self.cset, self.q - other.q)

    # cell averages ---------------------------------------------------------
    def cell_average_poly(self) -> MultiPoly:
        """The polynomial z -> int_{z + Q_1} <psi>_gamma dy.

        Writing psi's gamma-average as sum_alpha Phi_alpha(y) d^alpha q(y) and
        y = z + s, periodicity gives exp(2 pi i k.z) = 1, so the average is
        sum_alpha sum_b W_{alpha,b} d^{alpha+b} q(z) / b!  with
        W_{alpha,b} = sum_k Phi_alpha(k) prod_i J(k_i, b_i).
        """
        d, m = self.dim, self.degree
        nx = self.cset.cuts[0]
        ks = self.cset.phi[(0,) * d].fourier.ks
        J = osc_moments(_axis_modes(nx), m, 0.5)
        out = MultiPoly.zero(d)
        for a, _ in self.terms():
            col = self.cset.phi[a].velocity_mode((0,) * d)
            for b in monomials_upto(d, m - sum(a)):
                w = np.prod([J[ks[:, i] + nx, b[i]] for i in range(d)], axis=0) @ col
                if w.real != 0:
                    ab = tuple(x + y for x, y in zip(a, b))
                    out = out + self.q.diff(ab) * (mpq(float(w.real)) / poly.factorial(b))
        return out

    # norms -------------------------------------------------------------------
    def gram_fields(self, alphas) -> np.ndarray:
        """Fourier coefficients of G_ab(x) = sum_n Phi_{a,n}(x) Phi_{b,n}(x) on a doubled grid."""
        d = self.dim
        nx = self.cset.cuts[0]
        n = 4 * nx + 2
        shape = (2 * nx + 1,) * d
        grids = []
        for a in alphas:
            c = self.cset.phi[a].coeffs.reshape(shape + (-1,))
            pad = np.zeros((n,) * d + (c.shape[-1],), complex)
            idx = tuple(np.arange(-nx, nx + 1) % n for _ in range(d))
            pad[np.ix_(*idx)] = c
            grids.append(np.fft.ifftn(pad, axes=tuple(range(d))).real * n ** d)
        G = np.einsum("a...n,b...n->ab...", np.array(grids), np.array(grids))
        coef = np.fft.fftn(G, axes=tuple(range(2, 2 + d))) / n ** d
        kk = np.arange(-2 * nx, 2 * nx + 1) % n
        for ax in range(d):
            coef = np.take(coef, kk, axis=2 + ax)
        return coef  # indexed [a, b, k_1 + 2nx, ..., k_d + 2nx]

    def norm_sq(self, r: float) -> float:
        """Averaged ||psi||^2 over Q_r x (R^d, gamma), exact up to the Fourier-Hermite cuts."""
        return float(self.norm_sq_many([r])[0])

    def norm_sq_many(self, radii) -> np.ndarray:
        d, m = self.dim, self.degree
        terms = self.terms()
        if not terms:
            return np.zeros(len(radii))
        alphas = [a for a, _ in terms]
        G = self.gram_fields(alphas)
        nx = self.cset.cuts[0]
        kaxis = np.arange(-2 * nx, 2 * nx + 1)
        gammas = monomials_upto(d, 2 * m)
        gidx = {g: i for i, g in enumerate(gammas)}
        # polynomial coefficient tensor P[a, b, gamma] of d^a q d^b q
        P = np.zeros((len(alphas), len(alphas), len(gammas)))
        for i, (_, p) in enumerate(terms):
            for j, (_, s) in enumerate(terms):
                if j < i:
                    P[i, j] = P[j, i]
                    continue
                for g, c in (p * s).terms.items():
                    P[i, j, gidx[g]] = float(c)
        out = []
        for r in radii:
            J = osc_moments(kaxis, 2 * m, r / 2)
            # moments MM[a, b, gamma] = int_{Q_r} G_ab x^gamma
            MM = np.empty((len(alphas), len(alphas), len(gammas)))
            for gi, g in enumerate(gammas):
                t = G
                for ax in range(d):
                    t = np.tensordot(t, J[:, g[ax]], axes=([2], [0]))
                MM[:, :, gi] = t.real
            out.append(np.einsum("abg,abg->", MM, P) / r ** d)
        return np.array(out)

    def norm(self, r: float) -> float:
        return math.sqrt(max(self.norm_sq(r), 0.0))

    def norm_dense(self, r: float, nq: int = 64, nv_pts: int | None = None) -> float:
        """Reference norm by Gauss-Legendre in x (per unit cell) and Hermite Parseval in v."""
        d = self.dim
        z, w = np.polynomial.legendre.leggauss(nq)
        cells = np.arange(-r / 2, r / 2)  # left edges of unit cells when r is an integer
        xs = (cells[:, None] + (z[None, :] + 1) / 2).ravel()
        ws = np.tile(w / 2, len(cells))
        pts = np.stack([g.ravel() for g in np.meshgrid(*([xs] * d), indexing="ij")], axis=1)
        wts = np.prod(np.stack(np.meshgrid(*([ws] * d), indexing="ij")).reshape(d, -1), axis=0)
        fb = self.cset.phi[(0,) * d].fourier
        E = fb.modes(pts)
        total = 0.0
        vals = None
        for a, dq in self.terms():
            contrib = (E @ self.cset.phi[a].coeffs).real * dq(pts)[:, None]
            vals = contrib if vals is None else vals + contrib
        total = wts @ np.sum(vals ** 2, axis=1)
        return math.sqrt(total / r ** d)


def eval_cells(psi: HetPoly, r: int) -> LatticeField:
    P = psi.cell_average_poly()
    return LatticeField.centered(psi.dim, r, P)


def apply_L(psi: HetPoly) -> MultiPoly:
    """L psi as a polynomial: -sum abar_alpha d^alpha q."""
    psi.cset.require(psi.degree)
    return -poly.macro_apply(psi.cset.abar_alpha, psi.q)


def spectral_residual(psi: HetPoly, rng, npts: int = 400, r: float = 4.0, *, projected: bool = True) -> float:
    """Relative residual between L psi computed with the assembled operator and apply_L.

    Uses L(phi_a g) = (L phi_a) g - sum_j (v_j phi_a) d_j g for x-polynomials g,
    evaluated on random points of Q_r x (R^d, gamma).  With ``projected`` the
    products v_j phi_a are truncated to the Hermite cut, which is the
    Galerkin-consistent action of L; otherwise the residual also contains the
    velocity truncation error of the correctors.
    """
    cs = psi.cset
    d = psi.dim
    x = rng.uniform(-r / 2, r / 2, size=(npts, d))
    v = rng.standard_normal((npts, d))
    lpsi = np.zeros(npts)
    for a, dq in psi.terms():
        lpsi += apply(cs.operator, cs.phi[a])(x, v) * dq(x)
        for j in range(d):
            vphi = cs.phi[a].mul_v(j)
            if projected:
                vphi = vphi.resize(nv=cs.cuts[1])
            lpsi -= vphi(x, v) * dq.deriv(j)(x)
    ref = apply_L(psi)(x)
    scale = np.sqrt(np.mean(psi(x, v) ** 2))
    return float(np.sqrt(np.mean((lpsi - ref) ** 2)) / max(scale, 1e-300))


def lattice_jet(psi: HetPoly, order: int | None = None) -> dict:
    """{k: D^k psi_hat(0)} for |k| <= order (default deg psi)."""
    order = psi.degree if order is None else order
    coeffs = poly.newton_coefficients(psi.cell_average_poly())
    return {k: coeffs.get(k, mpq(0)) for k in monomials_upto(psi.dim, order)}


def from_lattice_data(cset: CorrectorSet, m: int, data: dict) -> HetPoly:
    """The unique psi in A_m with D^k psi_hat(0) = data[k] for |k| <= m.

    The cell-average map is q -> q + T q with T strictly lowering the degree,
    so the fixed point q = P - T q (P the Newton interpolant of the data) is
    reached after m + 1 sweeps.
    """
    d = cset.dim
    cset.require(m)
    missing = [k for k in monomials_upto(d, m) if tuple(k) not in data]
    if missing:
        raise ValueError(f"lattice data missing for {missing[:3]}")
    target = poly.newton_expand({tuple(k): poly._exact(v) for k, v in data.items()}, d)
    q = target
    for _ in range(m + 2):
        avg = HetPoly(cset, q).cell_average_poly()
        nxt = target - (avg - q)
        if nxt == q:
            break
        q = nxt
    else:
        raise SingularSystem("triangular solve for lattice data did not settle")
    return HetPoly(cset, q)


def solve_poly_rhs(cset: CorrectorSet, p: MultiPoly) -> HetPoly:
    """psi in A_{m+2} with L psi = p (base polynomial solves A q = -p)."""
    if p.is_zero():
        return HetPoly(cset, MultiPoly.zero(cset.dim))
    cset.require(p.degree + 2)
    res = poly.macro_invert(cset.abar_alpha, -p)
    return HetPoly(cset, res.q)


def rhs_bound_constant(psi: HetPoly, p: MultiPoly, r: float) -> float:
    """Smallest C with ||psi||_{Q_r} <= sum_n (C r / (n + 3))^{n + 2} |grad^n p(0)|."""
    lhs = psi.norm(r)
    grads = []
    for n in range(max(p.degree, 0) + 1):
        g = math.sqrt(sum(float(p.at_zero_derivative(a)) ** 2 * math.factorial(n) / poly.factorial(a)
                          for a in monomials(p.dim, n)))
        grads.append(g)

    def rhs(C):
        return sum((C * r / (n + 3)) ** (n + 2) * g for n, g in enumerate(grads))

    if lhs == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while rhs(hi) < lhs:
        hi *= 2
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if rhs(mid) < lhs else (lo, mid)
    return hi


# ---------------------------------------------------------------- regularity


def random_harmonic(cset: CorrectorSet, degree: int, rng) -> MultiPoly:
    """Random homogeneous polynomial, harmonic for the second order part of A."""
    metric = poly.second_order_metric(cset.abar_alpha)
    p = poly.random_poly(cset.dim, degree, rng, homogeneous=True)
    return poly.harmonic_decompose(p, metric)[0]


def exact_solution(cset: CorrectorSet, M: int, rng) -> HetPoly:
    """f in A_M with L f = 0: base q = h - macro_invert(A h), h harmonic-leading of degree M."""
    h = random_harmonic(cset, M, rng)
    Ah = poly.macro_apply(cset.abar_alpha, h)
    q = h if Ah.is_zero() else h - poly.macro_invert(cset.abar_alpha, Ah).q
    return HetPoly(cset, q)


@dataclass
class RateReport:
    m: int
    M: int
    radii: list
    errors: list
    norm_f: float
    slope: float
    r2: float
    degenerate: bool

    def passed(self, target: float, slope_tol: float = 0.2, r2_min: float = 0.98) -> bool:
        return (not self.degenerate and abs(self.slope - target) <= slope_tol and self.r2 >= r2_min)


def loglog_fit(r, e):
    lr, le = np.log(np.asarray(r, float)), np.log(np.asarray(e, float))
    slope, icpt = np.polyfit(lr, le, 1)
    ss = np.sum((le - le.mean()) ** 2)
    r2 = 1.0 - np.sum((le - slope * lr - icpt) ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(r2)


def regularity_scan(cset: CorrectorSet, M: int, m: int, radii, R: float = 256, *, seed: int = 0,
                    solutions_only: bool = False, f: HetPoly | None = None) -> RateReport:
    """Fit the decay exponent of ||f - psi||_{Q_r} for the A_m lattice-jet approximant psi of f.

    ``f`` defaults to an exact solution in A_M.  When no nonzero solution of
    that degree exists (the harmonic space is trivial), the report is marked
    degenerate and the fit is not meaningful.
    """
    rng = np.random.default_rng(seed)
    if f is None:
        f = exact_solution(cset, M, rng)
    degenerate = f.degree < M or f.q.is_zero()
    psi = from_lattice_data(cset, m, lattice_jet(f, m))
    if solutions_only:
        lpsi = apply_L(psi)
        if not lpsi.is_zero():
            psi = HetPoly(cset, psi.q - solve_poly_rhs(cset, lpsi).q)
    diff = f - psi
    errs_sq = diff.norm_sq_many(list(radii))
    norm_f = math.sqrt(max(f.norm_sq(R), 0.0))
    errors = [math.sqrt(max(e, 0.0)) / norm_f if norm_f > 0 else 0.0 for e in errs_sq]
    if degenerate or min(errors) <= 0:
        slope, r2 = float("nan"), float("nan")
        degenerate = True
    else:
        slope, r2 = loglog_fit(radii, errors)
    return RateReport(m, M, list(radii), errors, norm_f, slope, r2, degenerate)


def difference_decay(f: HetPoly, R: float) -> float:
    """sup over Z^d cap Q_{R/2} of |D^{M+1} f_hat| (M = deg f)."""
    P = f.cell_average_poly()
    worst = 0.0
    for a in monomials(f.dim, f.degree + 1):
        D = poly.difference(P, a)
        pts = lattice_points(f.dim, int(R // 2))
        worst = max(worst, float(np.max(np.abs(D(pts)))) if not D.is_zero() else 0.0)
    return worst
