"""Fourier x Hermite representation of functions on the phase space T^d x R^d.

A field is stored as a complex coefficient array ``coeffs[ik, in]`` where ``ik``
enumerates wave vectors ``k`` with ``|k|_inf <= nx`` (C order over the shifted
grid ``k + nx``) and ``in`` enumerates velocity multi-indices ``n`` with
``|n|_1 <= nv`` (ordered by total degree, then lexicographically).  The
velocity basis is the orthonormal Hermite basis of the standard Gaussian
``gamma``, so the flat ``L^2(dx dgamma)`` norm is the Euclidean norm of the
coefficients.

The kinetic Fokker-Planck operator is

    L f = -div_v(a grad_v f) + v.a grad_v f - v.grad_x f + grad H . grad_v f

and in ladder form ``L = sum_ij a_ij Adag_i A_j - sum_j (A_j + Adag_j) d_xj
+ sum_j (d_j H) A_j``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

TWO_PI = 2.0 * np.pi


class CutMismatch(ValueError):
    pass


class CutsTooSmall(ValueError):
    pass


class InvalidFriction(ValueError):
    pass


class IncompatibleRhs(ValueError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


# ---------------------------------------------------------------- bases


@dataclass(frozen=True)
class FourierBasis:
    dim: int
    nx: int

    @cached_property
    def ks(self) -> np.ndarray:
        r = np.arange(-self.nx, self.nx + 1)
        grids = np.meshgrid(*([r] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @property
    def size(self) -> int:
        return (2 * self.nx + 1) ** self.dim

    def index(self, k) -> int:
        k = np.asarray(k)
        if np.any(np.abs(k) > self.nx):
            raise KeyError(tuple(k))
        return int(np.ravel_multi_index(tuple(k + self.nx), (2 * self.nx + 1,) * self.dim))

    def indices(self, ks: np.ndarray) -> np.ndarray:
        """Flat indices of the rows of ``ks``; -1 where out of range."""
        ks = np.atleast_2d(ks)
        ok = np.all(np.abs(ks) <= self.nx, axis=1)
        out = np.full(len(ks), -1, dtype=np.int64)
        if ok.any():
            out[ok] = np.ravel_multi_index(tuple((ks[ok] + self.nx).T), (2 * self.nx + 1,) * self.dim)
        return out

    @cached_property
    def reflect(self) -> np.ndarray:
        """Index of -k for each k."""
        return self.size - 1 - np.arange(self.size)

    def modes(self, x: np.ndarray) -> np.ndarray:
        """exp(2 pi i k.x) for points ``x`` of shape (npts, d); returns (npts, nk)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(1j * TWO_PI * (x @ self.ks.T))

    def conv_matrix(self, series: dict) -> sp.csr_matrix:
        """Truncated convolution (multiplication) by a Fourier series ``{k: c_k}``."""
        rows, cols, vals = [], [], []
        for k, c in series.items():
            if c == 0:
                continue
            tgt = self.indices(self.ks + np.asarray(k))
            ok = tgt >= 0
            rows.append(tgt[ok])
            cols.append(np.nonzero(ok)[0])
            vals.append(np.full(ok.sum(), c, dtype=complex))
        if not rows:
            return sp.csr_matrix((self.size, self.size), dtype=complex)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size),
        )


@dataclass(frozen=True)
class HermiteBasis:
    dim: int
    nv: int

    @cached_property
    def ns(self) -> np.ndarray:
        out = []
        for deg in range(self.nv + 1):
            for n in itertools.product(range(deg + 1), repeat=self.dim):
                if sum(n) == deg:
                    out.append(n)
        # product() yields lexicographic order within a degree
        return np.array(out, dtype=np.int64).reshape(-1, self.dim)

    @cached_property
    def lookup(self) -> dict:
        return {tuple(int(a) for a in n): i for i, n in enumerate(self.ns)}

    @property
    def size(self) -> int:
        return len(self.ns)

    def index(self, n) -> int:
        return self.lookup[tuple(int(a) for a in n)]

    @cached_property
    def annihilation(self) -> tuple:
        """A_j with A_j psi_n = sqrt(n_j) psi_{n - e_j}; creation is the transpose."""
        mats = []
        for j in range(self.dim):
            rows, cols, vals = [], [], []
            for i, n in enumerate(self.ns):
                if n[j] > 0:
                    m = n.copy()
                    m[j] -= 1
                    rows.append(self.lookup[tuple(m)])
                    cols.append(i)
                    vals.append(math.sqrt(n[j]))
            mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size)))
        return tuple(mats)

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.ns.sum(axis=1)

    def functions(self, v: np.ndarray) -> np.ndarray:
        """Orthonormal Hermite functions at points ``v`` (npts, d); returns (npts, nn)."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        one_d = _hermite_table(v, self.nv)  # (nv+1, npts, d)
        out = np.ones((v.shape[0], self.size))
        for j in range(self.dim):
            out *= one_d[self.ns[:, j], :, j].T
        return out


def _hermite_table(v, nv):
    table = np.empty((nv + 1,) + v.shape)
    table[0] = 1.0
    if nv >= 1:
        table[1] = v
    for k in range(1, nv):
        table[k + 1] = (v * table[k] - math.sqrt(k) * table[k - 1]) / math.sqrt(k + 1)
    return table


@lru_cache(maxsize=64)
def fourier_basis(dim: int, nx: int) -> FourierBasis:
    return FourierBasis(dim, nx)


@lru_cache(maxsize=64)
def hermite_basis(dim: int, nv: int) -> HermiteBasis:
    return HermiteBasis(dim, nv)


# ---------------------------------------------------------------- coefficients


def _trig_series(dim, modes):
    """Complex Fourier coefficients of sum_m c_m cos(2 pi k_m.x) + s_m sin(2 pi k_m.x)."""
    out: dict = {}
    for k, c, s in modes:
        k = tuple(int(a) for a in k)
        if len(k) != dim:
            raise ValueError(f"wave vector {k} has wrong dimension")
        mk = tuple(-a for a in k)
        if k == mk:
            out[k] = out.get(k, 0) + complex(c)
            continue
        out[k] = out.get(k, 0) + c / 2 + s / 2j
        out[mk] = out.get(mk, 0) + c / 2 - s / 2j
    return out


def _eval_series(series: dict, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0], dtype=complex)
    for k, c in series.items():
        out += c * np.exp(1j * TWO_PI * (x @ np.asarray(k, dtype=float)))
    return out.real


@dataclass(frozen=True)
class Potential:
    """Z^d-periodic H(x) = sum c cos(2 pi k.x) + s sin(2 pi k.x).

    ``modes`` is a tuple of ``(k, c, s)`` triples; pairs ``(k, c)`` are accepted
    by :meth:`from_pairs`.
    """

    dim: int
    modes: tuple = ()

    @classmethod
    def from_pairs(cls, dim, pairs):
        modes = []
        for item in pairs:
            if len(item) == 2:
                k, c = item
                s = 0.0
            else:
                k, c, s = item
            modes.append((tuple(int(a) for a in np.atleast_1d(k)), float(c), float(s)))
        return cls(dim, tuple(modes))

    @classmethod
    def cosine(cls, dim=1, amplitude=1.0, axis=0):
        k = [0] * dim
        k[axis] = 1
        return cls(dim, ((tuple(k), float(amplitude), 0.0),))

    @classmethod
    def zero(cls, dim=1):
        return cls(dim, ())

    @cached_property
    def coeffs(self) -> dict:
        return {k: c for k, c in _trig_series(self.dim, self.modes).items() if c != 0}

    @property
    def bandwidth(self) -> int:
        ks = [max(abs(a) for a in k) for k in self.coeffs if any(k)]
        return max(ks, default=0)

    def grad_coeffs(self, j: int) -> dict:
        return {k: TWO_PI * 1j * k[j] * c for k, c in self.coeffs.items() if k[j] != 0}

    def __call__(self, x):
        return _eval_series(self.coeffs, x)

    def grad(self, x):
        return np.stack([_eval_series(self.grad_coeffs(j), x) for j in range(self.dim)], axis=-1)

    @property
    def grad_sup_bound(self) -> float:
        """Upper bound for sup |grad H|."""
        return float(sum(TWO_PI * np.linalg.norm(k) * math.hypot(c, s) for k, c, s in self.modes))

    def density_grid(self, sign=-1.0, n=256):
        """Normalized exp(sign*H) on a uniform grid with ``n`` points per axis."""
        axes = [np.arange(n) / n] * self.dim
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        w = np.exp(sign * self(pts)).reshape((n,) * self.dim)
        return w / w.mean()

    @lru_cache(maxsize=16)
    def density_coeffs(self, K: int) -> np.ndarray:
        """Fourier coefficients of the normalized Gibbs density exp(-H)/Z for |j| <= K.

        Returned as a dense array over ``fourier_basis(dim, K).ks``.
        """
        n = max(2 * K + 1 + 64, 64)
        if self.dim == 3:
            n = max(2 * K + 1 + 32, 48)
        g = self.density_grid(-1.0, n)
        c = np.fft.fftn(g) / g.size  # c[j] = int g exp(-2 pi i j x)
        basis = fourier_basis(self.dim, K)
        idx = tuple((basis.ks % n).T)
        return c[idx]

    @property
    def key(self):
        return ("H", self.dim, tuple((tuple(k), float(c), float(s)) for k, c, s in self.modes))


@dataclass(frozen=True)
class FrictionMatrix:
    """Symmetric positive-definite a(x) = mean + sum_m C_m cos(2 pi k_m.x) + S_m sin(.)."""

    mean: tuple
    modes: tuple = ()

    def __post_init__(self):
        a = np.asarray(self.mean, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        object.__setattr__(self, "mean", tuple(map(tuple, a.tolist())))
        mats = []
        for k, c, s in self.modes:
            mats.append((tuple(int(q) for q in k), tuple(map(tuple, np.asarray(c, float).tolist())),
                         tuple(map(tuple, np.asarray(s, float).tolist()))))
        object.__setattr__(self, "modes", tuple(mats))
        self.validate()

    @classmethod
    def identity(cls, dim=1):
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.mean, dtype=float)

    @property
    def is_constant(self) -> bool:
        return not self.modes

    def at(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.broadcast_to(self.matrix, (x.shape[0], self.dim, self.dim)).copy()
        for k, c, s in self.modes:
            ph = TWO_PI * (x @ np.asarray(k, float))
            out += np.cos(ph)[:, None, None] * np.asarray(c) + np.sin(ph)[:, None, None] * np.asarray(s)
        return out

    def entry_series(self, i, j) -> dict:
        modes = [(k, c[i][j], s[i][j]) for k, c, s in self.modes]
        out = _trig_series(self.dim, modes)
        z = (0,) * self.dim
        out[z] = out.get(z, 0) + self.mean[i][j]
        return {k: v for k, v in out.items() if v != 0}

    @property
    def bandwidth(self) -> int:
        return max((max(abs(a) for a in k) for k, _, _ in self.modes), default=0)

    def validate(self, samples: int = 16):
        a = self.matrix
        if a.shape != (self.dim, self.dim):
            raise InvalidFriction("friction matrix must be square")
        for k, c, s in self.modes:
            if not (np.allclose(c, np.transpose(c)) and np.allclose(s, np.transpose(s))):
                raise InvalidFriction("friction modes must be symmetric")
        if not np.allclose(a, a.T, rtol=0, atol=1e-14):
            raise InvalidFriction("friction matrix must be symmetric")
        if self.is_constant:
            lam = np.linalg.eigvalsh(a).min()
        else:
            axes = [np.arange(samples) / samples] * self.dim
            pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
            lam = np.linalg.eigvalsh(self.at(pts)).min()
        if not lam > 0:
            raise InvalidFriction(f"friction is not positive definite (min eigenvalue {lam:.3g})")

    @property
    def key(self):
        return ("a", self.mean, self.modes)


# ---------------------------------------------------------------- fields


@dataclass(frozen=True, eq=False)
class PhaseField:
    dim: int
    nx: int
    nv: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        shape = (fourier_basis(self.dim, self.nx).size, hermite_basis(self.dim, self.nv).size)
        if c.shape != shape:
            raise CutMismatch(f"coefficient shape {c.shape} does not match cuts {shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # constructors
    @classmethod
    def zeros(cls, dim, nx, nv):
        return cls(dim, nx, nv, np.zeros((fourier_basis(dim, nx).size, hermite_basis(dim, nv).size), complex))

    @classmethod
    def constant(cls, dim, nx, nv, value=1.0):
        return cls.zeros(dim, nx, nv).with_coeff((0,) * dim, (0,) * dim, value)

    @classmethod
    def velocity(cls, dim, nx, nv, j):
        """The field v_j."""
        n = [0] * dim
        n[j] = 1
        return cls.zeros(dim, nx, nv).with_coeff((0,) * dim, n, 1.0)

    @classmethod
    def fourier_mode(cls, dim, nx, nv, k, n=None):
        """exp(2 pi i k.x) psi_n(v) plus its conjugate partner (a real field)."""
        n = (0,) * dim if n is None else n
        f = cls.zeros(dim, nx, nv).with_coeff(k, n, 1.0)
        if any(k):
            f = f.with_coeff(tuple(-a for a in k), n, 1.0)
        return f

    @classmethod
    def random(cls, dim, nx, nv, rng, decay=0.5, kmax=None, nmax=None):
        """Random real smooth field with exponentially decaying coefficients."""
        fb, hb = fourier_basis(dim, nx), hermite_basis(dim, nv)
        kmax = nx if kmax is None else kmax
        nmax = nv if nmax is None else nmax
        kk = np.abs(fb.ks).max(axis=1)
        amp = np.exp(-decay * (kk[:, None] + hb.degrees[None, :]))
        amp[kk > kmax, :] = 0
        amp[:, hb.degrees > nmax] = 0
        c = amp * (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape))
        c = 0.5 * (c + np.conj(c[fb.reflect]))
        return cls(dim, nx, nv, c)

    def with_coeff(self, k, n, value):
        c = np.array(self.coeffs)
        c[fourier_basis(self.dim, self.nx).index(k), hermite_basis(self.dim, self.nv).index(n)] = value
        return PhaseField(self.dim, self.nx, self.nv, c)

    # structure
    @property
    def fourier(self) -> FourierBasis:
        return fourier_basis(self.dim, self.nx)

    @property
    def hermite(self) -> HermiteBasis:
        return hermite_basis(self.dim, self.nv)

    @property
    def cuts(self):
        return (self.nx, self.nv)

    def coeff(self, k, n) -> complex:
        return complex(self.coeffs[self.fourier.index(k), self.hermite.index(n)])

    def velocity_mode(self, n) -> np.ndarray:
        """Fourier coefficients (over ks) of the gamma-projection <f psi_n>_gamma."""
        n = tuple(n)
        if sum(n) > self.nv:
            return np.zeros(self.fourier.size, complex)
        return np.array(self.coeffs[:, self.hermite.index(n)])

    def reality_defect(self) -> float:
        c = self.coeffs
        return float(np.max(np.abs(c[self.fourier.reflect] - np.conj(c)), initial=0.0))

    def resize(self, nx=None, nv=None) -> "PhaseField":
        """Zero-pad or truncate to new cuts."""
        nx = self.nx if nx is None else nx
        nv = self.nv if nv is None else nv
        out = np.zeros((fourier_basis(self.dim, nx).size, hermite_basis(self.dim, nv).size), complex)
        fb_new = fourier_basis(self.dim, nx)
        hb_new = hermite_basis(self.dim, nv)
        krow = fb_new.indices(self.fourier.ks)
        ncol = np.array([hb_new.lookup.get(tuple(n), -1) for n in self.hermite.ns.tolist()])
        ki, ni = krow >= 0, ncol >= 0
        out[np.ix_(krow[ki], ncol[ni])] = self.coeffs[np.ix_(ki, ni)]
        return PhaseField(self.dim, nx, nv, out)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    # arithmetic
    def _check(self, other):
        if (self.dim, self.nx, self.nv) != (other.dim, other.nx, other.nv):
            raise CutMismatch("fields have different cuts")

    def __add__(self, other):
        self._check(other)
        return PhaseField(self.dim, self.nx, self.nv, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return PhaseField(self.dim, self.nx, self.nv, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return PhaseField(self.dim, self.nx, self.nv, self.coeffs * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def mul_v(self, j: int) -> "PhaseField":
        """Multiply by v_j; the result lives at Hermite cut nv + 1 (no truncation)."""
        big = self.resize(nv=self.nv + 1)
        A = big.hermite.annihilation[j]
        c = np.asarray((A + A.T) @ big.coeffs.T).T
        return PhaseField(self.dim, self.nx, self.nv + 1, c)

    def dx(self, j: int) -> "PhaseField":
        return PhaseField(self.dim, self.nx, self.nv, self.coeffs * (TWO_PI * 1j * self.fourier.ks[:, j])[:, None])

    def dv(self, j: int) -> "PhaseField":
        A = self.hermite.annihilation[j]
        return PhaseField(self.dim, self.nx, self.nv, np.asarray((A @ self.coeffs.T)).T)

    # evaluation
    def __call__(self, x, v) -> np.ndarray:
        """Pointwise values at paired points ``x`` (npts, d) and ``v`` (npts, d)."""
        E = self.fourier.modes(x)
        P = self.hermite.functions(v)
        return np.einsum("pk,kn,pn->p", E, self.coeffs, P).real

    def on_grid(self, x, v) -> np.ndarray:
        """Values on the tensor grid x-points by v-points; returns (nxpts, nvpts)."""
        return (self.fourier.modes(x) @ self.coeffs @ self.hermite.functions(v).T).real

    def x_series(self, n) -> dict:
        c = self.velocity_mode(n)
        return {tuple(k): c[i] for i, k in enumerate(self.fourier.ks.tolist()) if c[i] != 0}


def fourier_eval(dim, nx, coeffs, x) -> np.ndarray:
    """Evaluate a real Fourier series given as a dense array over fourier_basis(dim, nx)."""
    return (fourier_basis(dim, nx).modes(x) @ coeffs).real


# ---------------------------------------------------------------- operator


@dataclass(frozen=True, eq=False)
class KFPOperator:
    """Assembled Galerkin matrix of L on fixed cuts (immutable)."""

    potential: Potential
    friction: FrictionMatrix
    nx: int
    nv: int
    collision: sp.csr_matrix = field(repr=False)
    transport: sp.csr_matrix = field(repr=False)
    force: sp.csr_matrix = field(repr=False)

    @property
    def dim(self):
        return self.potential.dim

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return (self.collision + self.transport + self.force).tocsr()

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def mean_weights(self) -> np.ndarray:
        """Row vector w with w . coeffs = int f dm."""
        fb, hb = fourier_basis(self.dim, self.nx), hermite_basis(self.dim, self.nv)
        rho = self.potential.density_coeffs(self.nx)
        w = np.zeros((fb.size, hb.size), complex)
        w[:, 0] = rho[fb.reflect]
        return w.ravel()

    @cached_property
    def preconditioner(self):
        return _BlockPreconditioner(self)


def assemble_operator(pot: Potential, a: FrictionMatrix, cuts) -> KFPOperator:
    nx, nv = (int(c) for c in cuts)
    if nx < 0 or nv < 1:
        raise CutsTooSmall("need nx >= 0 and nv >= 1")
    if pot.dim != a.dim:
        raise ValueError("potential and friction dimensions differ")
    a.validate()
    if pot.bandwidth > nx or a.bandwidth > nx:
        raise CutsTooSmall(
            f"Fourier cut {nx} cannot hold potential/friction bandwidth {max(pot.bandwidth, a.bandwidth)}"
        )
    d = pot.dim
    fb, hb = fourier_basis(d, nx), hermite_basis(d, nv)
    A = hb.annihilation
    Ik = sp.identity(fb.size, format="csr")

    coll = sp.csr_matrix((fb.size * hb.size,) * 2, dtype=complex)
    for i in range(d):
        for j in range(d):
            ladder = (A[i].T @ A[j]).tocsr()
            if a.is_constant:
                if a.mean[i][j] != 0:
                    coll = coll + a.mean[i][j] * sp.kron(Ik, ladder, format="csr")
            else:
                coll = coll + sp.kron(fb.conv_matrix(a.entry_series(i, j)), ladder, format="csr")

    trans = sp.csr_matrix((fb.size * hb.size,) * 2, dtype=complex)
    force = sp.csr_matrix((fb.size * hb.size,) * 2, dtype=complex)
    for j in range(d):
        Dj = sp.diags(TWO_PI * 1j * fb.ks[:, j].astype(float))
        trans = trans - sp.kron(Dj, (A[j] + A[j].T), format="csr")
        g = pot.grad_coeffs(j)
        if g:
            force = force + sp.kron(fb.conv_matrix(g), A[j], format="csr")
    return KFPOperator(pot, a, nx, nv, coll.tocsr(), trans.tocsr(), force.tocsr())


def apply(opr: KFPOperator, f: PhaseField) -> PhaseField:
    if (f.dim, f.nx, f.nv) != (opr.dim, opr.nx, opr.nv):
        raise CutMismatch(f"field cuts {(f.nx, f.nv)} do not match operator cuts {(opr.nx, opr.nv)}")
    out = opr.matrix @ f.coeffs.ravel()
    return PhaseField(f.dim, f.nx, f.nv, out.reshape(f.coeffs.shape))


def inner_product_m(f: PhaseField, g: PhaseField, pot: Potential) -> float:
    """int f g dm with dm = exp(-H) dx dgamma normalized to a probability measure."""
    f._check(g)
    fb = f.fourier
    rho = pot.density_coeffs(2 * f.nx)
    big = fourier_basis(f.dim, 2 * f.nx)
    # int f_n g_n rho dx = sum_{k,l} f(k) g(l) rho_{-(k+l)}
    kl = fb.ks[:, None, :] + fb.ks[None, :, :]
    idx = big.indices((-kl).reshape(-1, f.dim)).reshape(fb.size, fb.size)
    R = rho[idx]
    return float(np.einsum("kn,kl,ln->", f.coeffs, R, g.coeffs).real)


def mean_m(f: PhaseField, pot: Potential) -> float:
    rho = pot.density_coeffs(f.nx)
    return float((f.coeffs[:, 0] @ rho[f.fourier.reflect]).real)


class _BlockPreconditioner:
    """Exact inverse of the bordered constant-coefficient operator, one block per k.

    Each block is the collision part with the x-averaged friction plus the
    transport coupling for that wave vector; the constant mode is pinned by the
    mean-zero constraint.
    """

    def __init__(self, opr: KFPOperator):
        d = opr.dim
        fb, hb = fourier_basis(d, opr.nx), hermite_basis(d, opr.nv)
        A = hb.annihilation
        a = opr.friction.matrix
        C = sum(a[i, j] * (A[i].T @ A[j]) for i in range(d) for j in range(d))
        X = [(A[j] + A[j].T) for j in range(d)]
        blocks = []
        for k in fb.ks:
            B = C - sum(TWO_PI * 1j * k[j] * X[j] for j in range(d))
            blocks.append(sp.csc_matrix(B, dtype=complex))
        P = sp.block_diag(blocks, format="csc").tolil()
        self.zero = fb.index((0,) * d) * hb.size
        P[self.zero, self.zero] = 1.0
        self.lu = spla.splu(P.tocsc())
        self.w = opr.mean_weights
        self.n = fb.size * hb.size

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse to a bordered vector [y; s]."""
        y, s = rhs[:-1].copy(), rhs[-1]
        mu = y[self.zero]
        y[self.zero] = 0.0
        x = self.lu.solve(y)
        x[self.zero] = 0.0
        x[self.zero] = (s - self.w @ x) / self.w[self.zero]
        return np.concatenate([x, [mu]])


@dataclass
class SolveInfo:
    residual: float
    incompatibility: float
    iterations: int
    history: list


def solve_mean_zero(opr: KFPOperator, rhs: PhaseField, tol: float = 1e-10, *,
                    compat_tol: float = 1e-10, method: str = "gmres",
                    restart: int = 200, maxiter: int = 50, info: bool = False):
    """Solve L phi = rhs with int phi dm = 0.

    The singular system is bordered with the dm-mean functional and the
    constant mode; the extra unknown absorbs the (truncation-level)
    incompatibility of ``rhs``.
    """
    if (rhs.dim, rhs.nx, rhs.nv) != (opr.dim, opr.nx, opr.nv):
        raise CutMismatch("rhs cuts do not match operator")
    b = rhs.coeffs.ravel()
    bnorm = np.linalg.norm(b)
    mean = opr.mean_weights @ b
    if abs(mean) > compat_tol * max(1.0, bnorm):
        raise IncompatibleRhs(f"|int rhs dm| = {abs(mean):.3e} exceeds {compat_tol:.1e}")
    if bnorm == 0:
        z = PhaseField.zeros(rhs.dim, rhs.nx, rhs.nv)
        return (z, SolveInfo(0.0, 0.0, 0, [])) if info else z

    n = b.size
    L = opr.matrix
    w = opr.mean_weights
    zero = opr.preconditioner.zero

    def bordered(z):
        out = np.empty(n + 1, complex)
        out[:n] = L @ z[:n]
        out[zero] += z[n]
        out[n] = w @ z[:n]
        return out

    rb = np.concatenate([b, [0.0]])
    history: list = []
    if method == "direct":
        B = sp.bmat([[L, sp.csc_matrix(([1.0], ([zero], [0])), shape=(n, 1))],
                     [sp.csr_matrix(w.reshape(1, -1)), None]], format="csc")
        z = spla.splu(B).solve(rb)
        iters = 1
    elif method == "gmres":
        M = opr.preconditioner
        op = spla.LinearOperator((n + 1, n + 1), matvec=lambda y: bordered(M.solve(y)), dtype=complex)
        y = np.zeros(n + 1, complex)
        iters = 0
        for _ in range(maxiter):
            r = rb - op @ y
            rel = np.linalg.norm(r) / bnorm
            history.append(rel)
            if rel <= tol:
                break
            dy, _ = spla.gmres(op, r, rtol=min(0.1, 0.5 * tol / rel), atol=0.0, restart=restart,
                               maxiter=1, callback=lambda pr: history.append(pr),
                               callback_type="pr_norm")
            y = y + dy
            iters += 1
        z = M.solve(y)
    else:
        raise ValueError(f"unknown method {method!r}")

    res = rb - bordered(z)
    # true residual of L phi = rhs counts the pinned-mode multiplier too
    phi = z[:n]
    true_res = np.linalg.norm(L @ phi - b) / bnorm
    if method == "gmres" and np.linalg.norm(res) / bnorm > tol:
        raise NoConvergence(f"GMRES stalled at relative residual {np.linalg.norm(res) / bnorm:.2e}", history)
    out = PhaseField(rhs.dim, rhs.nx, rhs.nv, phi.reshape(rhs.coeffs.shape))
    if info:
        return out, SolveInfo(float(true_res), float(abs(z[n]) / bnorm), iters, history)
    return out
