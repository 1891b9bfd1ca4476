"""Corrector hierarchy and effective tensors.

Correctors solve ``L phi_alpha = sum_j v_j phi_{alpha - e_j} - abar_alpha`` with
zero dm-mean, where ``abar_alpha = sum_j <v_j phi_{alpha - e_j}>_m`` and terms
with ``alpha_j = 0`` are dropped.  With this sign the heterogeneous polynomial
``sum_alpha phi_alpha d^alpha q`` satisfies ``L(...) = -sum_alpha abar_alpha d^alpha q``
and the second order tensor is the (positive) effective diffusivity.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    TWO_PI,
    FrictionMatrix,
    IncompatibleRhs,
    KFPOperator,
    PhaseField,
    Potential,
    assemble_operator,
    fourier_eval,
    mean_m,
    solve_mean_zero,
)

log = logging.getLogger(__name__)


class InsufficientOrder(ValueError):
    pass


def multi_indices(dim: int, degree: int) -> list:
    """All alpha in N^dim with |alpha| == degree, in lexicographic order."""
    return [a for a in itertools.product(range(degree, -1, -1), repeat=dim) if sum(a) == degree]


def unit(dim: int, j: int) -> tuple:
    e = [0] * dim
    e[j] = 1
    return tuple(e)


def _sub(alpha, j):
    if alpha[j] == 0:
        return None
    b = list(alpha)
    b[j] -= 1
    return tuple(b)


@dataclass(eq=False)
class CorrectorSet:
    potential: Potential
    friction: FrictionMatrix
    cuts: tuple
    order: int
    tol: float
    phi: dict = field(repr=False)
    abar_alpha: dict
    residuals: dict = field(default_factory=dict, repr=False)
    operator: KFPOperator | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def abar(self) -> np.ndarray:
        """Effective diffusivity abar_ij = <v_i phi_j>_m."""
        d = self.dim
        out = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                out[i, j] = _gamma_moment_mean(self.phi[unit(d, j)], i, self.potential)
        return out

    def abar_x(self, i: int, j: int) -> np.ndarray:
        """Fourier coefficients of abar_ij(x) = <v_i phi_j>_gamma."""
        return self.phi[unit(self.dim, j)].velocity_mode(unit(self.dim, i)).copy()

    def tensors(self, degree: int) -> dict:
        return {a: self.abar_alpha[a] for a in multi_indices(self.dim, degree)}

    def phi_norms(self) -> dict:
        """max_{|alpha| = k} of the coefficient norm of phi_alpha, per k >= 1."""
        return {k: max(self.phi[a].norm() for a in multi_indices(self.dim, k)) for k in range(1, self.order + 1)}

    def growth_fit(self) -> dict:
        """Geometric growth of max_{|alpha|=k} |phi_alpha| in k.

        ``bound`` is the smallest C with |phi_alpha| <= C^|alpha| for all
        computed levels; ``rate`` and ``r2`` come from a least-squares fit of
        the log-norms against k.
        """
        norms = self.phi_norms()
        ks = np.array(sorted(norms), dtype=float)
        y = np.log([norms[int(k)] for k in ks])
        bound = float(np.exp(np.max(np.maximum(y, 0.0) / ks)))
        if len(ks) < 2:
            return {"bound": bound, "rate": float(np.exp(y[0])), "r2": 1.0}
        slope, icpt = np.polyfit(ks, y, 1)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = 1.0 - np.sum((y - slope * ks - icpt) ** 2) / ss if ss > 0 else 1.0
        return {"bound": bound, "rate": float(np.exp(slope)), "r2": float(r2)}

    def require(self, degree: int):
        if degree > self.order:
            raise InsufficientOrder(f"corrector order {self.order} < required {degree}")


def _gamma_moment_mean(f: PhaseField, i: int, pot: Potential) -> float:
    """<v_i f>_m, read off from the psi_{e_i} Fourier column."""
    rho = pot.density_coeffs(f.nx)
    col = f.velocity_mode(unit(f.dim, i))
    return float((col @ rho[f.fourier.reflect]).real)


def _vmul(f: PhaseField, j: int) -> PhaseField:
    return f.mul_v(j).resize(nv=f.nv)


_CACHE: dict = {}


def build_correctors(pot: Potential, a: FrictionMatrix, order: int, cuts, tol: float = 1e-10,
                     *, threads: int = 1, method: str = "gmres", use_cache: bool = True) -> CorrectorSet:
    """Solve the corrector hierarchy up to |alpha| = order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    cuts = tuple(int(c) for c in cuts)
    key = (pot.key, a.key, cuts, float(tol), int(order), method)
    if use_cache and key in _CACHE:
        return _CACHE[key]
    d = pot.dim
    opr = assemble_operator(pot, a, cuts)
    nx, nv = cuts
    zero = (0,) * d
    phi = {zero: PhaseField.constant(d, nx, nv)}
    abar = {zero: 0.0}
    residuals = {}
    for k in range(1, order + 1):
        alphas = multi_indices(d, k)
        rhs_map = {}
        for alpha in alphas:
            rhs = PhaseField.zeros(d, nx, nv)
            for j in range(d):
                b = _sub(alpha, j)
                if b is not None:
                    rhs = rhs + _vmul(phi[b], j)
            abar[alpha] = mean_m(rhs, pot)
            rhs_map[alpha] = rhs - PhaseField.constant(d, nx, nv, abar[alpha])

        def solve(alpha):
            return solve_mean_zero(opr, rhs_map[alpha], tol, method=method, info=True)

        if threads > 1 and len(alphas) > 1:
            with ThreadPoolExecutor(threads) as ex:
                results = list(ex.map(solve, alphas))
        else:
            results = [solve(al) for al in alphas]
        for alpha, (sol, info) in zip(alphas, results):
            phi[alpha] = sol
            residuals[alpha] = info.residual
        log.debug("corrector level %d solved (%d fields)", k, len(alphas))
    out = CorrectorSet(pot, a, cuts, order, tol, phi, abar, residuals, opr)
    if use_cache:
        _CACHE[key] = out
    return out


def clear_cache():
    _CACHE.clear()


def second_correctors(cset: CorrectorSet, tol: float | None = None, *, threads: int = 1) -> dict:
    """psi_ij with L psi_ij = v_i phi_j - abar_ij and zero dm-mean."""
    cset.require(1)
    d = cset.dim
    tol = cset.tol if tol is None else tol
    nx, nv = cset.cuts
    opr = cset.operator
    pairs = [(i, j) for i in range(d) for j in range(d)]
    abar = cset.abar

    def solve(ij):
        i, j = ij
        rhs = _vmul(cset.phi[unit(d, j)], i) - PhaseField.constant(d, nx, nv, abar[i, j])
        if abs(mean_m(rhs, cset.potential)) > 1e-10 * max(1.0, rhs.norm()):
            raise IncompatibleRhs("second corrector forcing is not mean zero")
        return solve_mean_zero(opr, rhs, tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            sols = list(ex.map(solve, pairs))
    else:
        sols = [solve(p) for p in pairs]
    return dict(zip(pairs, sols))


def x_grid(dim: int, n: int) -> np.ndarray:
    axes = [np.arange(n) / n] * dim
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def _col_eval(f: PhaseField, n, x):
    return fourier_eval(f.dim, f.nx, f.velocity_mode(n), x)


def _col_grad(f: PhaseField, n, j, x):
    c = f.velocity_mode(n) * (TWO_PI * 1j * f.fourier.ks[:, j])
    return fourier_eval(f.dim, f.nx, c, x)


def avg_psi_identity(psi: PhaseField, cset: CorrectorSet, ij, npts: int = 64) -> float:
    """sup_x | <-v.grad_x psi + grad H . grad_v psi>_gamma - (abar_ij(x) - abar_ij) |.

    Both gamma-averages reduce to the psi_{e_k} column of ``psi``, so the left
    side is evaluated pointwise from the Fourier series, independently of the
    assembled operator.
    """
    i, j = ij
    d = cset.dim
    x = x_grid(d, npts)
    gradH = cset.potential.grad(x)
    lhs = np.zeros(len(x))
    for k in range(d):
        ek = unit(d, k)
        lhs += -_col_grad(psi, ek, k, x) + gradH[:, k] * _col_eval(psi, ek, x)
    rhs = fourier_eval(d, cset.cuts[0], cset.abar_x(i, j), x) - cset.abar[i, j]
    return float(np.max(np.abs(lhs - rhs)))


def divergence_form_identity(cset: CorrectorSet, npts: int = 64, *, detail: bool = False):
    """sup_x over j of | sum_i d_i abar_ij(x) - sum_i d_i H abar_ij(x) |.

    This is the pointwise form of div(exp(-H) abar(x)) = 0, which makes the
    weighted operator exp(H) div(exp(-H) abar(x) grad) reduce to abar(x):grad^2
    plus the x-independent correction.  With ``detail`` the chain term
    sum_i d_i abar_ij(x) - <v.grad_x phi_j>_gamma is reported as well.
    """
    d = cset.dim
    x = x_grid(d, npts)
    gradH = cset.potential.grad(x)
    worst = chain = 0.0
    for j in range(d):
        phij = cset.phi[unit(d, j)]
        div = sum(_col_grad(phij, unit(d, i), i, x) for i in range(d))
        drift = sum(gradH[:, i] * _col_eval(phij, unit(d, i), x) for i in range(d))
        worst = max(worst, float(np.max(np.abs(div - drift))))
        # <v . grad_x phi_j>_gamma computed through the generic v-multiplication route
        vgrad = sum(phij.dx(i).mul_v(i).velocity_mode((0,) * d) for i in range(d))
        chain = max(chain, float(np.max(np.abs(div - fourier_eval(d, cset.cuts[0], vgrad, x)))))
    if detail:
        return {"divergence": worst, "chain": chain}
    return worst


def effective_diffusivity(pot: Potential, a: FrictionMatrix, cuts, tol: float = 1e-10) -> np.ndarray:
    return build_correctors(pot, a, 1, cuts, tol).abar
