"""Exact multivariate polynomials and the algebra used to invert the
macroscopic operator on polynomial spaces.

Coefficients are exact rationals (``gmpy2.mpq``, which interoperates with
:class:`fractions.Fraction` and hashes identically).  Floats are converted
exactly, so ``0.1`` becomes the binary value of 0.1, and every identity
below is checked without rounding.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Number

import numpy as np
from gmpy2 import mpq
from scipy import special

Alpha = tuple


class NonHomogeneous(ValueError):
    pass


class InsufficientOrder(ValueError):
    pass


class DegenerateSecondOrder(ValueError):
    pass


class DomainTooSmall(ValueError):
    pass


def _exact(c):
    if isinstance(c, mpq):
        return c
    if isinstance(c, Fraction):
        return mpq(c.numerator, c.denominator)
    if isinstance(c, (int, np.integer)):
        return mpq(int(c))
    if isinstance(c, (float, np.floating)):
        return mpq(float(c))
    raise TypeError(f"cannot convert {type(c).__name__} to an exact coefficient")


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def factorial(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)


@lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> tuple:
    """Exponents with |alpha| == degree, in lexicographic (descending) order."""
    return tuple(a for a in itertools.product(range(degree, -1, -1), repeat=dim) if sum(a) == degree)


def monomials_upto(dim: int, degree: int) -> tuple:
    return tuple(a for k in range(degree + 1) for a in monomials(dim, k))


class MultiPoly:
    """Polynomial in ``dim`` variables stored as ``{alpha: coefficient}``."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms=None, *, exact: bool = True):
        self.dim = int(dim)
        out = {}
        for a, c in (terms or {}).items():
            a = tuple(int(x) for x in a)
            if len(a) != self.dim or min(a, default=0) < 0:
                raise ValueError(f"bad exponent {a} for dimension {self.dim}")
            c = _exact(c) if exact else c
            if c != 0:
                out[a] = out.get(a, 0) + c
        self.terms = {a: c for a, c in out.items() if c != 0}

    # construction
    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @classmethod
    def const(cls, dim, c=1):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def monomial(cls, alpha, c=1):
        return cls(len(alpha), {tuple(alpha): c})

    @classmethod
    def var(cls, dim, i):
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    @classmethod
    def quad_form(cls, B):
        """x^T B x for a symmetric (exact) matrix B."""
        d = len(B)
        terms = {}
        for i in range(d):
            for j in range(d):
                e = [0] * d
                e[i] += 1
                e[j] += 1
                terms[tuple(e)] = terms.get(tuple(e), 0) + _exact(B[i][j])
        return cls(d, terms)

    @classmethod
    def norm_sq(cls, dim):
        return cls.quad_form([[int(i == j) for j in range(dim)] for i in range(dim)])

    # structure
    def _new(self, terms):
        p = MultiPoly.__new__(MultiPoly)
        p.dim = self.dim
        p.terms = {a: c for a, c in terms.items() if c != 0}
        return p

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=-1)

    def coeff(self, alpha):
        return self.terms.get(tuple(alpha), mpq(0))

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len({sum(a) for a in self.terms}) <= 1

    def homogeneous_part(self, k: int) -> "MultiPoly":
        return self._new({a: c for a, c in self.terms.items() if sum(a) == k})

    def parts(self) -> dict:
        return {k: self.homogeneous_part(k) for k in sorted({sum(a) for a in self.terms})}

    def __eq__(self, other):
        if isinstance(other, Number):
            other = MultiPoly.const(self.dim, other)
        return isinstance(other, MultiPoly) and self.dim == other.dim and (self - other).is_zero()

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        body = " + ".join(f"{c}*x^{a}" for a, c in sorted(self.terms.items(), key=lambda t: (-sum(t[0]), t[0])))
        return f"MultiPoly(d={self.dim}: {body})"

    # arithmetic
    def __add__(self, other):
        if isinstance(other, Number):
            other = MultiPoly.const(self.dim, other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0) + c
        return self._new(out)

    __radd__ = __add__

    def __neg__(self):
        return self._new({a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, MultiPoly) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, MultiPoly):
            out: dict = {}
            for a, c in self.terms.items():
                for b, e in other.terms.items():
                    k = _add(a, b)
                    out[k] = out.get(k, 0) + c * e
            return self._new(out)
        s = other if isinstance(other, mpq) else _exact(other)
        return self._new({a: c * s for a, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1 / _exact(s))

    def __pow__(self, n: int):
        out = MultiPoly.const(self.dim, 1)
        for _ in range(n):
            out = out * self
        return out

    # calculus
    def deriv(self, i: int, times: int = 1) -> "MultiPoly":
        out = {}
        for a, c in self.terms.items():
            if a[i] >= times:
                b = list(a)
                b[i] -= times
                out[tuple(b)] = c * math.perm(a[i], times)
        return self._new(out)

    def diff(self, alpha) -> "MultiPoly":
        return self._new(self._diff_terms(tuple(alpha)))

    def _diff_terms(self, alpha) -> dict:
        out = {}
        for a, c in self.terms.items():
            if all(x >= y for x, y in zip(a, alpha)):
                w = 1
                for x, y in zip(a, alpha):
                    if y:
                        w *= math.perm(x, y)
                out[tuple(x - y for x, y in zip(a, alpha))] = c * w
        return out

    def laplacian(self, metric=None) -> "MultiPoly":
        """sum_ij M_ij d_i d_j p (M = identity by default)."""
        if metric is None:
            out = self._new({})
            for i in range(self.dim):
                out = out + self.deriv(i, 2)
            return out
        out = self._new({})
        for i in range(self.dim):
            for j in range(self.dim):
                mij = _exact(metric[i][j])
                if mij:
                    out = out + self.deriv(i).deriv(j) * mij
        return out

    def at_zero_derivative(self, alpha):
        """d^alpha p(0) = alpha! p_alpha."""
        return factorial(alpha) * self.coeff(alpha)

    def shift(self, h) -> "MultiPoly":
        """x -> p(x + h) for an integer or rational vector h."""
        out = MultiPoly.zero(self.dim)
        lin = [MultiPoly.var(self.dim, i) + _exact(h[i]) for i in range(self.dim)]
        cache = [dict() for _ in range(self.dim)]
        for a, c in self.terms.items():
            term = MultiPoly.const(self.dim, c)
            for i, n in enumerate(a):
                if n:
                    if n not in cache[i]:
                        cache[i][n] = lin[i] ** n
                    term = term * cache[i][n]
            out = out + term
        return out

    def compose_linear(self, T) -> "MultiPoly":
        """x -> p(T x) for an exact square matrix T."""
        rows = [sum((MultiPoly.var(self.dim, j) * _exact(T[i][j]) for j in range(self.dim)), MultiPoly.zero(self.dim))
                for i in range(self.dim)]
        out = MultiPoly.zero(self.dim)
        for a, c in self.terms.items():
            term = MultiPoly.const(self.dim, c)
            for i, n in enumerate(a):
                term = term * rows[i] ** n
            out = out + term
        return out

    # numerics
    def to_float(self) -> dict:
        return {a: float(c) for a, c in self.terms.items()}

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for a, c in self.terms.items():
            out += float(c) * np.prod(x ** np.asarray(a), axis=1)
        return out

    def coefficient_array(self, degree: int | None = None) -> np.ndarray:
        degree = self.degree if degree is None else degree
        return np.array([float(self.coeff(a)) for a in monomials_upto(self.dim, max(degree, 0))])


def random_poly(dim: int, degree: int, rng, *, homogeneous: bool = False, scale: int = 9) -> MultiPoly:
    """Random polynomial with small integer numerators and denominators."""
    exps = monomials(dim, degree) if homogeneous else monomials_upto(dim, degree)
    terms = {a: mpq(int(rng.integers(-scale, scale + 1)), int(rng.integers(1, scale + 1))) for a in exps}
    top = monomials(dim, degree)[int(rng.integers(len(monomials(dim, degree))))]
    terms[top] = terms[top] or mpq(1)
    return MultiPoly(dim, terms)


# ---------------------------------------------------------------- P_r inner product


def pr_inner(p: MultiPoly, q: MultiPoly, r=1):
    """<p, q>_{P_r} = sum_alpha r^{2|alpha|} / alpha! d^alpha p(0) d^alpha q(0)."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    r2 = _exact(r) ** 2 if not isinstance(r, mpq) else r * r
    total = mpq(0)
    for a, c in p.terms.items():
        e = q.terms.get(a)
        if e is not None:
            total += r2 ** sum(a) * factorial(a) * c * e
    return total


def pr_norm(p: MultiPoly, r=1) -> float:
    return math.sqrt(pr_inner(p, p, r))


# ---------------------------------------------------------------- harmonic decomposition and S


def _metric_setup(dim, metric):
    """Return (M, Q) with Q(x) = x^T M^{-1} x; identity metric when None."""
    if metric is None:
        return None, MultiPoly.norm_sq(dim)
    M = [[_exact(metric[i][j]) for j in range(dim)] for i in range(dim)]
    return M, MultiPoly.quad_form(_inverse(M))


def _inverse(M):
    """Exact Gauss-Jordan inverse of a rational matrix."""
    n = len(M)
    A = [list(row) + [mpq(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise DegenerateSecondOrder("second order tensor is singular")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def harmonic_decompose(p: MultiPoly, metric=None) -> list:
    """Components h_k (harmonic, degree m - 2k) with p = sum_k Q^k h_k.

    ``Q = |x|^2`` and harmonic means Delta h = 0 by default; with a positive
    definite ``metric`` M, Q = x^T M^{-1} x and harmonic means M : grad^2 h = 0.
    """
    if not p.is_homogeneous():
        raise NonHomogeneous("harmonic decomposition needs a homogeneous polynomial")
    M, Q = _metric_setup(p.dim, metric)
    return _decompose(p, max(p.degree, 0), M, Q)


def _decompose(p, m, M, Q):
    if m < 2 or p.is_zero():
        return [p]
    g = _decompose(p.laplacian(M), m - 2, M, Q)
    d = p.dim
    hs = [None]
    for k in range(1, m // 2 + 1):
        gk = g[k - 1] if k - 1 < len(g) else MultiPoly.zero(d)
        ck = 2 * k * (d - 2 + 2 * m - 2 * k)
        hs.append(gk / ck)
    rest = p
    qk = MultiPoly.const(d, 1)
    for k in range(1, len(hs)):
        qk = qk * Q
        rest = rest - qk * hs[k]
    hs[0] = rest
    while len(hs) > 1 and hs[-1].is_zero():
        hs.pop()
    return hs


def s_apply(p: MultiPoly, metric=None) -> MultiPoly:
    """Right inverse of the Laplacian on homogeneous polynomials.

    S(Q^k h_k) = Q^{k+1} h_k / b_k with b_k = (2k + 2)(d + 2m - 2k).
    """
    if not p.is_homogeneous():
        raise NonHomogeneous("S acts on homogeneous polynomials; use s_apply_graded")
    if p.is_zero():
        return p
    M, Q = _metric_setup(p.dim, metric)
    m, d = p.degree, p.dim
    out = MultiPoly.zero(d)
    qk = Q
    for k, h in enumerate(_decompose(p, m, M, Q)):
        out = out + qk * h / ((2 * k + 2) * (d + 2 * m - 2 * k))
        qk = qk * Q
    return out


def s_apply_graded(p: MultiPoly, metric=None) -> MultiPoly:
    """S extended to inhomogeneous polynomials degree by degree."""
    out = MultiPoly.zero(p.dim)
    for part in p.parts().values():
        out = out + s_apply(part, metric)
    return out


# ---------------------------------------------------------------- macroscopic operator


def _tensors_of(obj) -> dict:
    if hasattr(obj, "abar_alpha"):
        return {tuple(a): _exact(c) for a, c in obj.abar_alpha.items()}
    return {tuple(a): _exact(c) for a, c in obj.items()}


def _order_of(obj, tensors) -> int:
    if hasattr(obj, "order"):
        return int(obj.order)
    return max((sum(a) for a in tensors), default=0)


def laplacian_tensors(dim: int, scale=1) -> dict:
    return {tuple(2 * int(i == j) for j in range(dim)): _exact(scale) for i in range(dim)}


def macro_apply(tensors, q: MultiPoly) -> MultiPoly:
    """sum_alpha abar_alpha d^alpha q."""
    t = _tensors_of(tensors)
    order = _order_of(tensors, t)
    if q.degree > order and hasattr(tensors, "order"):
        raise InsufficientOrder(f"need tensors through order {q.degree}, have {order}")
    acc = {}
    deg = max(q.degree, 0)
    for a, c in t.items():
        if c and sum(a) <= deg:
            for b, v in q._diff_terms(a).items():
                acc[b] = acc.get(b, 0) + c * v
    return MultiPoly(q.dim, acc)


def second_order_metric(tensors) -> list:
    """Symmetric matrix M with sum_{|alpha|=2} abar_alpha d^alpha = M : grad^2."""
    t = _tensors_of(tensors)
    dim = len(next(iter(t)))
    M = [[mpq(0)] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(dim):
            e = [0] * dim
            e[i] += 1
            e[j] += 1
            c = t.get(tuple(e), mpq(0))
            M[i][j] = c if i == j else c / 2
    return M


@dataclass(frozen=True)
class InversionResult:
    q: MultiPoly
    ratio: float
    iterations: int


def macro_invert(tensors, p: MultiPoly, r=None) -> InversionResult:
    """Exact q with A q = p, A = sum abar_alpha d^alpha.

    The second order part defines a metric M; the recursion uses the S
    operator of that metric (equivalent to normalizing M to the identity by a
    linear change of coordinates, without square roots) and peels off the
    higher order tensors:  q_0 = S p,  q_{k+1} = S(p - A(q_0 + ... + q_k)).
    Each step lowers the degree of the remaining defect, so the recursion
    ends after at most deg p + 1 steps.
    """
    t = _tensors_of(tensors)
    order = _order_of(tensors, t)
    if p.is_zero():
        return InversionResult(p, 0.0, 0)
    if p.degree + 2 > order:
        raise InsufficientOrder(f"inverting degree {p.degree} needs tensors through order {p.degree + 2}, have {order}")
    for a, c in t.items():
        if sum(a) <= 1 and c != 0:
            raise ValueError("first order tensors must vanish")
    M = second_order_metric(t)
    eig = np.linalg.eigvalsh(np.array(M, dtype=float))
    if eig.min() <= 1e-12 * max(1.0, abs(eig).max()):
        raise DegenerateSecondOrder(f"second order tensor has eigenvalue {eig.min():.3e}")
    q = MultiPoly.zero(p.dim)
    defect = p
    steps = 0
    while not defect.is_zero():
        dq = s_apply_graded(defect, M)
        q = q + dq
        # A is linear, so updating the defect with A(dq) gives the same exact result as p - A(q)
        defect = defect - macro_apply(t, dq)
        steps += 1
        if steps > p.degree + 2:
            raise RuntimeError("macroscopic inversion failed to terminate")
    ratio = float("nan")
    if r is not None:
        ratio = math.sqrt(pr_inner(q, q, _exact(r)) / pr_inner(p, p, _exact(r)))
    return InversionResult(q, ratio, steps)


# ---------------------------------------------------------------- Hermite polynomials


def hermite_poly(alpha) -> MultiPoly:
    """Physicist Hermite h_alpha = (-1)^|alpha| G^{-1} d^alpha G for G ~ exp(-|x|^2).

    Built from the definition: d(P G) = (P' - 2 x P) G, one derivative at a time.
    """
    d = len(alpha)
    p = MultiPoly.const(d, 1)
    for i, n in enumerate(alpha):
        xi = MultiPoly.var(d, i)
        for _ in range(n):
            p = xi * p * 2 - p.deriv(i)
    return p


def hermite_recurrence(alpha) -> MultiPoly:
    """h_alpha via h_{a+e_i} = 2 x_i h_a - 2 a_i h_{a-e_i}."""
    d = len(alpha)
    prev = {(0,) * d: MultiPoly.const(d, 1)}
    cur = (0,) * d

    def get(beta):
        return prev.get(beta, MultiPoly.zero(d))

    for i, n in enumerate(alpha):
        for _ in range(n):
            nxt = list(cur)
            nxt[i] += 1
            low = list(cur)
            low[i] -= 1
            h = MultiPoly.var(d, i) * get(cur) * 2 - (get(tuple(low)) * (2 * cur[i]) if cur[i] else MultiPoly.zero(d))
            prev[tuple(nxt)] = h
            cur = tuple(nxt)
    return prev[cur]


def gaussian_moment(alpha):
    """Exact int x^alpha exp(-|x|^2) dx / pi^{d/2}."""
    out = mpq(1)
    for n in alpha:
        if n % 2:
            return mpq(0)
        out *= mpq(math.prod(range(1, n, 2)), 2 ** (n // 2))
    return out


def gaussian_expect(p: MultiPoly):
    return sum((c * gaussian_moment(a) for a, c in p.terms.items()), mpq(0))


def gauss_hermite_expect(p: MultiPoly, npts: int) -> float:
    """Tensor Gauss-Hermite quadrature of int p exp(-|x|^2) / pi^{d/2}."""
    z, w = np.polynomial.hermite.hermgauss(npts)
    w = w / math.sqrt(math.pi)
    grids = np.meshgrid(*([z] * p.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * p.dim), indexing="ij")).reshape(p.dim, -1), axis=0)
    return float(np.dot(wts, p(pts)))


def hermite_checks(dim: int = 2, max_degree: int = 6) -> dict:
    """Orthogonality (exact moments and Gauss-Hermite at order deg + 1) and recurrence."""
    alphas = monomials_upto(dim, max_degree)
    polys = {a: hermite_poly(a) for a in alphas}
    exact_ok = recur_ok = True
    quad_err = 0.0
    for a in alphas:
        recur_ok &= polys[a] == hermite_recurrence(a)
    for a, b in itertools.combinations_with_replacement(alphas, 2):
        prod = polys[a] * polys[b]
        want = 2 ** sum(a) * factorial(a) if a == b else 0
        exact_ok &= gaussian_expect(prod) == want
        deg = max(sum(a), sum(b))
        quad = gauss_hermite_expect(prod, deg + 1)
        quad_err = max(quad_err, abs(quad - want) / max(1.0, want))
    return {"orthogonality_exact": bool(exact_ok), "recurrence": bool(recur_ok), "quadrature_rel_err": quad_err,
            "count": len(alphas)}


# ---------------------------------------------------------------- Newton polynomials and differences


def newton_poly(alpha) -> MultiPoly:
    """N_alpha(x) = prod_i N_{alpha_i}(x_i), N_k(x) = prod_{j<k} (x - j) / k!."""
    d = len(alpha)
    p = MultiPoly.const(d, 1)
    for i, k in enumerate(alpha):
        xi = MultiPoly.var(d, i)
        for j in range(k):
            p = p * (xi - j)
        p = p / math.factorial(k)
    return p


def forward_difference(p: MultiPoly, i: int) -> MultiPoly:
    e = [0] * p.dim
    e[i] = 1
    return p.shift(e) - p


def difference(p: MultiPoly, alpha) -> MultiPoly:
    for i, n in enumerate(alpha):
        for _ in range(n):
            p = forward_difference(p, i)
    return p


def newton_coefficients(p: MultiPoly) -> dict:
    """{alpha: D^alpha p(0)} for |alpha| <= deg p."""
    out = {}
    for a in monomials_upto(p.dim, max(p.degree, 0)):
        out[a] = _value_at_zero(difference(p, a))
    return out


def _value_at_zero(p: MultiPoly):
    return p.coeff((0,) * p.dim)


def newton_expand(coeffs: dict, dim: int) -> MultiPoly:
    out = MultiPoly.zero(dim)
    for a, c in coeffs.items():
        if c:
            out = out + newton_poly(a) * c
    return out


def newton_checks(dim: int = 2, kmax: int = 8, seed: int = 0) -> dict:
    one_d = all(forward_difference(newton_poly((k,)), 0) == newton_poly((k - 1,)) for k in range(1, kmax + 1))
    rng = np.random.default_rng(seed)
    p = random_poly(dim, 5, rng)
    recon = newton_expand(newton_coefficients(p), dim) == p
    binom_ok = True
    for k in range(kmax + 1):
        nk = newton_poly((k,))
        for j in range(k + 1):
            binom_ok &= abs(nk.at_zero_derivative((j,))) <= math.comb(k, j)
    return {"duality": bool(one_d), "reconstruction": bool(recon), "binomial_bound": bool(binom_ok)}


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Values on the box of lattice points lo + idx, idx in [0, shape)."""

    lo: tuple
    values: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.lo)

    @classmethod
    def centered(cls, dim: int, r: int, func):
        """Sample ``func`` (vectorised over (n, d) points) on Z^d cap Q_r."""
        h = (r - 1) // 2
        pts = lattice_points(dim, r)
        return cls((-h,) * dim, np.asarray(func(pts)).reshape((2 * h + 1,) * dim))

    def points(self) -> np.ndarray:
        axes = [lo + np.arange(n) for lo, n in zip(self.lo, self.values.shape)]
        return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)

    def __getitem__(self, z):
        idx = tuple(int(a) - lo for a, lo in zip(z, self.lo))
        if any(i < 0 for i in idx):
            raise KeyError(z)
        return self.values[idx]

    def __contains__(self, z):
        return all(0 <= int(a) - lo < n for a, lo, n in zip(z, self.lo, self.values.shape))


def lattice_points(dim: int, r: int) -> np.ndarray:
    """Z^d cap Q_r for the open cube Q_r = (-r/2, r/2)^d."""
    h = math.ceil(r / 2) - 1
    axes = [np.arange(-h, h + 1)] * dim
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def finite_difference(g: LatticeField, alpha) -> LatticeField:
    """Iterated forward differences; the box shrinks by alpha_i along axis i."""
    vals = np.asarray(g.values)
    for i, n in enumerate(alpha):
        if vals.shape[i] <= n:
            raise DomainTooSmall(f"axis {i} has {vals.shape[i]} points, need more than {n}")
        vals = np.diff(vals, n=n, axis=i) if n else vals
    return LatticeField(g.lo, vals)


# ---------------------------------------------------------------- polynomial estimates


def _heat_nodes(dim, t, npts):
    """Gauss-Hermite nodes and weights for Gamma(t, .) = N(0, 2t I)."""
    z, w = np.polynomial.hermite_e.hermegauss(npts)
    w = w / w.sum()
    z = z * math.sqrt(2 * t)
    grids = np.meshgrid(*([z] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * dim), indexing="ij")).reshape(dim, -1), axis=0)
    return pts, wts


def _grad_float(p: MultiPoly):
    return [p.deriv(i) for i in range(p.dim)]


def heat_gradient_ratio(p: MultiPoly, t: float) -> float:
    """int |grad(p G)/G|^2 G / (2(m + d)/t int p^2 G) with G = Gamma(t, .)."""
    m, d = max(p.degree, 0), p.dim
    pts, w = _heat_nodes(d, t, m + 3)
    vals = p(pts)
    g = np.stack([q(pts) for q in _grad_float(p)], axis=1) - vals[:, None] * pts / (2 * t)
    lhs = w @ np.sum(g ** 2, axis=1)
    return float(lhs / (2 * (m + d) / t * (w @ vals ** 2)))


def _outer_moments(n_max, a, sigma):
    """int_{|x| > a} x^n N(0, sigma^2) dx and the full moments, n = 0..n_max."""
    tot = np.zeros(n_max + 1)
    out = np.zeros(n_max + 1)
    for n in range(0, n_max + 1, 2):
        base = sigma ** n * 2 ** (n / 2) * special.gamma((n + 1) / 2) / math.sqrt(math.pi)
        tot[n] = base
        out[n] = base * special.gammaincc((n + 1) / 2, a * a / (2 * sigma * sigma))
    return tot, out


def tail_ratio(p: MultiPoly, t: float, r: float) -> float:
    """int_{R^d minus Q_r} p^2 G / int p^2 G, by inclusion-exclusion on truncated moments."""
    sq = p * p
    d = p.dim
    tot, out = _outer_moments(max(sq.degree, 0), r / 2, math.sqrt(2 * t))
    total = sum(float(c) * np.prod([tot[k] for k in a]) for a, c in sq.terms.items())
    tail = 0.0
    for size in range(1, d + 1):
        for S in itertools.combinations(range(d), size):
            sgn = (-1) ** (size + 1)
            tail += sgn * sum(float(c) * np.prod([out[k] if i in S else tot[k] for i, k in enumerate(a)])
                              for a, c in sq.terms.items())
    return float(tail / total)


def markov_constant(p: MultiPoly, t: float) -> float:
    """C with int |grad p|^2 G = C m / t int p^2 G."""
    m, d = max(p.degree, 1), p.dim
    pts, w = _heat_nodes(d, t, m + 2)
    grad = np.stack([q(pts) for q in _grad_float(p)], axis=1)
    return float((w @ np.sum(grad ** 2, axis=1)) * t / (m * (w @ p(pts) ** 2)))


def derivative_difference_constant(p: MultiPoly) -> float:
    """Smallest C with |grad^n p(0)| <= sum_{k=n}^m C^k |D^k p(0)| for all n."""
    m = max(p.degree, 0)
    newton = newton_coefficients(p)
    dk = [max(abs(float(newton[a])) for a in monomials(p.dim, k)) for k in range(m + 1)]
    worst = 1.0
    for n in range(m + 1):
        lhs = max(abs(float(p.at_zero_derivative(a))) for a in monomials(p.dim, n))
        if lhs == 0:
            continue

        def rhs(C):
            return sum(C ** k * dk[k] for k in range(n, m + 1))

        if rhs(worst) >= lhs:
            continue
        lo, hi = worst, worst
        while rhs(hi) < lhs:
            hi *= 2
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if rhs(mid) < lhs else (lo, mid)
        worst = hi
    return worst


def linf_constant(p: MultiPoly, R1: float, R2: float, npts: int = 41) -> float:
    """C with |p|_{L^inf(Q_R2)} = (C R2 / R1)^m |p|_{avg L^2(Q_R1)} (grid estimate)."""
    m, d = max(p.degree, 1), p.dim
    g2 = np.linspace(-R2 / 2, R2 / 2, npts)
    pts2 = np.stack([g.ravel() for g in np.meshgrid(*([g2] * d), indexing="ij")], axis=1)
    sup = np.max(np.abs(p(pts2)))
    z, w = np.polynomial.legendre.leggauss(max(p.degree, 1) + 2)
    z, w = z * R1 / 2, w / 2
    pts1 = np.stack([g.ravel() for g in np.meshgrid(*([z] * d), indexing="ij")], axis=1)
    w1 = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij")).reshape(d, -1), axis=0)
    l2 = math.sqrt(w1 @ p(pts1) ** 2)
    return float((sup / l2) ** (1 / m) * R1 / R2)


def poly_estimate_suite(tol: float = 0.0, *, seed: int = 0, samples: int = 20, max_degree: int = 6) -> dict:
    """Evaluate the heat-kernel polynomial inequalities on random polynomials.

    Explicit constants are checked as stated; constants the estimates leave
    unspecified are reported as worst observed values (finite by construction).
    """
    rng = np.random.default_rng(seed)
    grad_worst = tail_worst = markov = deriv = linf = 0.0
    tail_excess = 0.0
    for s in range(samples):
        d = 1 + s % 3
        m = 1 + int(rng.integers(max_degree))
        p = random_poly(d, m, rng)
        t = float(rng.uniform(0.25, 4.0))
        grad_worst = max(grad_worst, heat_gradient_ratio(p, t))
        r = math.sqrt(64 * m * t)
        # the cutoff is proved outside the cube of half-width r; the cube of
        # side r is reported separately and does not satisfy the bound
        tr = tail_ratio(p, t, 2 * r)
        tail_worst = max(tail_worst, tail_ratio(p, t, r) / math.exp(-r * r / (16 * t)))
        tail_excess = max(tail_excess, tr / math.exp(-r * r / (16 * t)))
        markov = max(markov, markov_constant(p, t))
        if d <= 2:
            deriv = max(deriv, derivative_difference_constant(p))
        R1 = 4.0 * m
        linf = max(linf, linf_constant(p, R1, 2 * R1))
    report = {
        "gradient_ratio": grad_worst,
        "tail_ratio_over_bound": tail_excess,
        "tail_ratio_side_r_over_bound": tail_worst,
        "markov_C": markov,
        "derivative_difference_C": deriv,
        "linf_C": linf,
    }
    report["passed"] = bool(grad_worst <= 1 + tol and tail_excess <= 1 + tol and all(
        np.isfinite(report[k]) for k in ("markov_C", "derivative_difference_C", "linf_C")))
    return report


# ---------------------------------------------------------------- identity sweeps


def synthetic_tensors(dim: int, order: int, rng, scale: int = 4) -> dict:
    """Exact rational tensors: a positive definite second order part plus small
    third and fourth order entries, zero beyond (up to ``order``)."""
    t = {}
    for k in range(order + 1):
        for a in monomials(dim, k):
            t[a] = mpq(0)
    # M = tridiagonal(1; 2, ..., 2, 1; 1) has determinant 1 and an integer inverse
    for i in range(dim):
        t[tuple(2 * int(j == i) for j in range(dim))] = mpq(2 if i < dim - 1 else 1)
        if i + 1 < dim:
            e = [0] * dim
            e[i] += 1
            e[i + 1] += 1
            t[tuple(e)] = mpq(2)  # coefficient of d_i d_{i+1} is 2 M_{i,i+1}
    for k in (3, 4):
        for a in monomials(dim, k):
            t[a] = mpq(int(rng.integers(-scale, scale + 1)), 4 * scale)
    return t


def identity_sweep(max_degree: int = 8, dims=(1, 2, 3), *, seed: int = 0) -> dict:
    """Delta S p = p and A(macro_invert p) = p on every monomial of degree <= max_degree.

    Both maps are linear, so the monomial basis covers all homogeneous p.
    The inversion uses :func:`synthetic_tensors` with a non-identity metric.
    """
    rng = np.random.default_rng(seed)
    s_fail = inv_fail = count = 0
    for d in dims:
        t = synthetic_tensors(d, max_degree + 2, rng)
        for m in range(max_degree + 1):
            for a in monomials(d, m):
                p = MultiPoly.monomial(a)
                count += 1
                s_fail += s_apply(p).laplacian() != p
                q = macro_invert(t, p).q
                inv_fail += macro_apply(t, q) != p
    return {"count": count, "laplacian_S_failures": int(s_fail), "macro_invert_failures": int(inv_fail),
            "passed": s_fail == 0 and inv_fail == 0}


def s_norm_sweep(samples: int = 1000, *, seed: int = 0, max_degree: int = 8, dims=(1, 2, 3)) -> dict:
    """||S p||_{P_r} <= r^2 / sqrt(m + 1) ||p||_{P_r} on random homogeneous p."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = 0
    for _ in range(samples):
        d = int(rng.choice(dims))
        m = int(rng.integers(0, max_degree + 1))
        p = random_poly(d, m, rng, homogeneous=True)
        r = mpq(int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        lhs = pr_inner(s_apply(p), s_apply(p), r)
        rhs = r ** 4 / (m + 1) * pr_inner(p, p, r)
        violations += lhs > rhs
        worst = max(worst, math.sqrt(lhs / rhs))
    return {"samples": samples, "violations": int(violations), "worst_ratio": worst, "passed": violations == 0}
