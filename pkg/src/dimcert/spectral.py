"""Chebyshev-Lagrange collocation of the transfer operator.

Each state gets m Chebyshev nodes on its interval.  A test function is the
per-state Lagrange interpolant of its node values v, and the operator becomes
the matrix B with

    B[(i,k), (j,l)] = M(i,j) lp_{k,i}(T_i y_{l,j}) |T_i'(y_{l,j})|^t,

so that v B = lambda v is the discrete eigenproblem.  Nothing here is
rigorous: the eigenvector only proposes a candidate, which is then verified.
"""

import numpy as np
from flint import arb, arb_mat, arb_poly, ctx, fmpq, fmpq_poly

from .operator import hurwitz_zeta_many
from .rig import ball, ball_pow, dyadic, precision, rational_str, parse_rational
from .scheme import CountableScheme


class TestFunction:
    """Per-state polynomials with exact rational coefficients."""

    __test__ = False

    def __init__(self, polys):
        self.polys = [p if isinstance(p, fmpq_poly) else fmpq_poly(p) for p in polys]

    def __getitem__(self, k):
        return self.polys[k]

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    @property
    def degree(self):
        return max(p.degree() for p in self.polys)

    def to_json(self):
        return [[rational_str(q) for q in p.coeffs()] or ["0/1"] for p in self.polys]

    @classmethod
    def from_json(cls, doc):
        return cls([fmpq_poly([parse_rational(q) for q in coeffs]) for coeffs in doc])

    def __eq__(self, other):
        return isinstance(other, TestFunction) and self.polys == other.polys

    def __repr__(self):
        return "TestFunction(%d states, degree %d)" % (len(self.polys), self.degree)


def chebyshev_nodes(m, domain):
    """Zeros of the degree-m Chebyshev polynomial mapped onto the domain, increasing."""
    if m < 1:
        raise ValueError("need at least one node")
    lo, hi = (ball(e) if not callable(e) else e() for e in domain)
    out = []
    for k in range(m, 0, -1):
        y = (arb(fmpq(2 * k - 1, 2 * m)).cos_pi() + 1) / 2
        out.append(lo + (hi - lo) * y)
    return out


def node_set(scheme, m):
    if isinstance(scheme, CountableScheme):
        return [chebyshev_nodes(m, scheme.domain)]
    return [chebyshev_nodes(m, scheme.domains[k]) for k in range(scheme.size)]


def _weights(nodes):
    m = len(nodes)
    out = []
    for k in range(m):
        w = arb(1)
        for j in range(m):
            if j != k:
                w *= nodes[k] - nodes[j]
        if w.contains(0):
            raise ValueError("duplicate interpolation nodes")
        out.append(1 / w)
    return out


def lagrange_basis(nodes):
    """Expanded Lagrange polynomials lp_k with lp_k(y_j) = delta_jk."""
    w = _weights(nodes)
    return [arb_poly.from_roots(nodes[:k] + nodes[k + 1:]) * w[k] for k in range(len(nodes))]


def _basis_values(nodes, w, z):
    """[lp_k(z) for all k] by prefix and suffix products."""
    m = len(nodes)
    diffs = [z - y for y in nodes]
    prefix = [arb(1)] * (m + 1)
    for i in range(m):
        prefix[i + 1] = prefix[i] * diffs[i]
    suffix = [arb(1)] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] * diffs[i]
    return [prefix[k] * suffix[k + 1] * w[k] for k in range(m)]


def spectral_prec(prec, m):
    """Working precision for collocation: interpolation loses about 2m bits."""
    return prec + 2 * m + 32


class Collocation:
    """Cached t-independent parts of the collocation matrix of a finite scheme."""

    def __init__(self, scheme, m):
        self.scheme = scheme
        self.m = m
        self.prec = ctx.prec
        self.nodes = node_set(scheme, m)
        self.basis_weights = [_weights(ns) for ns in self.nodes]
        d = scheme.size
        self.lp = {}
        self.deriv = {}
        for j in range(d):
            for i in scheme.predecessors[j]:
                T = scheme.branches[i]
                images = [T(y) for y in self.nodes[j]]
                self.lp[i, j] = [_basis_values(self.nodes[i], self.basis_weights[i], z)
                                 for z in images]
                self.deriv[i, j] = [abs(T.deriv(y)) for y in self.nodes[j]]

    def matrix(self, t):
        t = ball(t)
        d, m = self.scheme.size, self.m
        B = arb_mat(d * m, d * m)
        for (i, j), rows in self.lp.items():
            for l, values in enumerate(rows):
                w = ball_pow(self.deriv[i, j][l], t)
                col = j * m + l
                for k, v in enumerate(values):
                    B[i * m + k, col] = v * w
        return B


class CountableCollocation:
    def __init__(self, cs, m):
        self.scheme = cs
        self.m = m
        self.nodes = node_set(cs, m)
        self.basis = lagrange_basis(self.nodes[0])

    def matrix(self, t):
        t = ball(t)
        cs, m = self.scheme, self.m
        N = cs.step
        B = arb_mat(m, m)
        scale0 = ball_pow(arb(N), -2 * t) if N != 1 else arb(1)
        for l, y in enumerate(self.nodes[0]):
            zetas = hurwitz_zeta_many((y + cs.offset) / N, 2 * t, m)
            mono = []
            scale = scale0
            for n in range(m):
                mono.append(scale * zetas[n])
                scale = scale / N
            for k, lp in enumerate(self.basis):
                coeffs = lp.coeffs()
                B[k, l] = sum((coeffs[n] * mono[n] for n in range(len(coeffs))), arb(0))
        return B


def collocation(scheme, m):
    if isinstance(scheme, CountableScheme):
        return CountableCollocation(scheme, m)
    return Collocation(scheme, m)


def build_collocation_matrix(scheme, t, m):
    """Ball matrix B^t of size (m d) x (m d), or m x m for countable schemes."""
    if isinstance(scheme, CountableScheme) and not ball(t) > fmpq(1, 2):
        raise ValueError("countable schemes need t > 1/2")
    return collocation(scheme, m).matrix(t)


def _to_numpy(B):
    n = B.nrows()
    return np.array([[float(B[i, j].mid()) for j in range(n)] for i in range(n)])


def _normalize(v):
    n = v.nrows()
    best = 0
    for i in range(1, n):
        if abs(v[i, 0]) > abs(v[best, 0]):
            best = i
    pivot = v[best, 0]
    return arb_mat([[(v[i, 0] / pivot).mid()] for i in range(n)])


def leading_left_eigenvector(B, tol=None, max_iter=10000):
    """Approximate dominant left eigenpair of the midpoint matrix.

    A double-precision eigensolve seeds the iteration, which is then refined
    by power steps on B^T at the current precision; slow contraction switches
    to shifted inverse iteration.  Returns (lambda, v) with v normalized so its
    largest entry is +1.  Non-rigorous by design.
    """
    n = B.nrows()
    if B.ncols() != n:
        raise ValueError("matrix must be square")
    tol = arb(2) ** (-(ctx.prec - 16)) if tol is None else ball(tol)
    A = B.transpose().mid()
    vals, vecs = np.linalg.eig(_to_numpy(B).T)
    idx = int(np.argmax(vals.real))
    seed = np.real(vecs[:, idx])
    if not np.all(np.isfinite(seed)) or np.max(np.abs(seed)) == 0:
        seed = np.ones(n)
    v = _normalize(arb_mat([[float(x)] for x in seed]))
    lam = arb(float(vals[idx].real))
    prev_err = None
    slow = 0
    for it in range(max_iter):
        w = A * v
        lam_new = _pivot_ratio(w, v)
        w = _normalize(w)
        err = _max_abs_diff(w, v)
        v, lam = w, lam_new
        if err <= tol:
            return lam, v
        if prev_err is not None and err > prev_err / 2:
            slow += 1
        prev_err = err
        if slow >= 8:
            return _inverse_iteration(A, v, lam, tol, max_iter - it)
    raise RuntimeError("power iteration did not converge")


def _pivot_ratio(w, v):
    n = v.nrows()
    best = max(range(n), key=lambda i: abs(float(v[i, 0].mid())))
    return (w[best, 0] / v[best, 0]).mid()


def _max_abs_diff(a, b):
    out = arb(0)
    for i in range(a.nrows()):
        out = out.max(abs(a[i, 0] - b[i, 0]))
    return out.upper()


def _inverse_iteration(A, v, lam, tol, max_iter):
    n = A.nrows()
    shift = lam * (1 + arb(2) ** -40)
    S = A - arb_mat([[shift if i == j else 0 for j in range(n)] for i in range(n)])
    for _ in range(max(max_iter, 1)):
        w = _normalize(S.solve(v, algorithm="approx"))
        err = _max_abs_diff(w, v)
        v = w
        if err <= tol:
            break
    else:
        raise RuntimeError("inverse iteration did not converge")
    lam = _pivot_ratio(A * v, v)
    return lam, v


def candidate_test_function(nodes, v, bits=None):
    """Per-state interpolant sum_k v_{ik} lp_{k,i}, rounded to dyadic coefficients."""
    bits = ctx.prec if bits is None else bits
    if isinstance(v, arb_mat):
        values = [v[i, 0] for i in range(v.nrows())]
    else:
        values = [ball(x) if not isinstance(x, float) else arb(x) for x in v]
    polys = []
    offset = 0
    for ns in nodes:
        m = len(ns)
        block = values[offset:offset + m]
        offset += m
        basis = lagrange_basis(ns)
        p = arb_poly([0])
        for vk, lp in zip(block, basis):
            p += lp * vk
        polys.append(fmpq_poly([dyadic(c, bits) for c in p.coeffs()] or [0]))
    if offset != len(values):
        raise ValueError("eigenvector length does not match the node set")
    return TestFunction(polys)


def candidate(scheme, t, m, prec=None, colloc=None):
    """Collocate, solve for the eigenvector and return (lambda, TestFunction)."""
    prec = ctx.prec if prec is None else prec
    with precision(spectral_prec(prec, m)):
        colloc = colloc or collocation(scheme, m)
        B = colloc.matrix(t)
        lam, v = leading_left_eigenvector(B)
        f = candidate_test_function(colloc.nodes, v, bits=prec + 16)
    return lam, f
