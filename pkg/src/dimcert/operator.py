"""Transfer operators applied to polynomials, ratio derivatives and Hurwitz zeta.

For a finite scheme (L_t f)_k(x) = sum_j M(j,k) f_j(T_j x) |T_j'(x)|^t.  For a
Moebius branch T = (a x + b)/(c x + d) of a degree-m polynomial f this is

    |ad - bc|^t p_j(x) / ((c x + d)^m |c x + d|^{2t}),   p_j = (c x + d)^m f(T x),

so everything reduces to exact polynomial algebra and a single real power.
For countable alphabets 1/(x + a + N k) the sums over k are Hurwitz zeta values.
"""

import math

from flint import arb, arb_poly, arb_series, ctx, fmpq, fmpq_poly

from .rig import ball, ball_pow, outer_interval, poly_eval, poly_min_lower_bound
from .scheme import CountableScheme, MoebiusMap

DEFAULT_ORDER = 12


def _poly(f):
    return f if isinstance(f, (fmpq_poly, arb_poly)) else fmpq_poly(f)


def _weight(T, x, t):
    """|T'(x)|^t."""
    d = abs(T.deriv(x))
    if t == 0:
        return arb(1)
    return ball_pow(d, t)


def transfer_eval(scheme, t, f, k, x):
    """Enclosure of (L_t f)_k(x) for a finite scheme."""
    x = ball(x)
    lo, hi = outer_interval(scheme.interval(k))
    slack = arb(2) ** (-(ctx.prec // 2))
    if x.upper() < arb(lo) - slack or x.lower() > arb(hi) + slack:
        raise ValueError("point outside the domain of state %s" % scheme.labels[k])
    total = arb(0)
    for j in scheme.predecessors[k]:
        T = scheme.branches[j]
        total += poly_eval(_poly(f[j]), T(x)) * _weight(T, x, ball(t))
    return total


def _affine_power(c, d, n):
    """(c x + d)^n as a polynomial (rational or ball)."""
    if all(isinstance(q, fmpq) for q in (c, d)):
        return fmpq_poly([d, c]) ** n
    return arb_poly([ball(d), ball(c)]) ** n


def moebius_image_polynomial(f, T, m=None):
    """p(x) = (c x + d)^m f(T x), exactly when T is rational."""
    f = _poly(f)
    m = max(f.degree(), 0) if m is None else m
    if T.is_rational:
        a, b, c, d = T.coeffs
        num, den = fmpq_poly([b, a]), fmpq_poly([d, c])
        zero = fmpq_poly([0])
    else:
        a, b, c, d = T.balls()
        num, den = arb_poly([b, a]), arb_poly([d, c])
        zero = arb_poly([0])
    coeffs = f.coeffs()
    out = zero
    for i, fi in enumerate(coeffs):
        if fi == 0:
            continue
        out += fi * num ** i * den ** (m - i)
    return out


def ratio_derivative_poly(f, p, T, t, m):
    """p_hat = (c x + d)(f p' - f' p) - (m + 2t) c p f.

    With it, (F/f)'(x) = sum_j |ad - bc|^t p_hat_j(x) / (|c x + d|^{2t} (c x + d)^{m+1} f(x)^2)
    where F is the transfer of f and p_j its Moebius image polynomials.
    """
    f, p = _poly(f), _poly(p)
    rational = T.is_rational and isinstance(t, (fmpq, int)) and isinstance(p, fmpq_poly)
    if rational:
        a, b, c, d = T.coeffs
        lin = fmpq_poly([d, c])
        scale = fmpq(m) + 2 * fmpq(t)
    else:
        a, b, c, d = T.balls()
        lin = arb_poly([d, c])
        scale = arb(m) + 2 * ball(t)
        f, p = arb_poly(f), arb_poly(p)
    return lin * (f * p.derivative() - f.derivative() * p) - scale * c * p * f


def _taylor_at(p, z, length):
    """Taylor coefficients of p about every point of the ball z, centred at its midpoint.

    Expanding about the midpoint first keeps wide balls from picking up the
    cancellation error of a direct Horner evaluation.
    """
    p = arb_poly(p)
    mid = arb(z.mid())
    q = p(arb_poly([mid, 1]))
    if z.rad() != 0:
        q = q(arb_poly([z - mid, 1]))
    coeffs = q.coeffs()[:length]
    return coeffs + [arb(0)] * (length - len(coeffs))


def _series(coeffs, length):
    coeffs = list(coeffs)[:length]
    coeffs += [arb(0)] * (length - len(coeffs))
    return arb_series(coeffs, prec=length)


class RatioModel:
    """Taylor expansions of R_k = (L_t f)_k / f_k for a finite scheme."""

    def __init__(self, scheme, t, f, order=DEFAULT_ORDER):
        self.scheme = scheme
        self.t = ball(t)
        self.f = [_poly(g) for g in f]
        self.order = order
        self.length = order + 2
        self.fa = [arb_poly(g) for g in self.f]
        self.signs = {}
        for k in range(scheme.size):
            for j in scheme.predecessors[k]:
                T = scheme.branches[j]
                dom = scheme.interval(k)
                if isinstance(T, MoebiusMap):
                    self.signs[j, k] = T.denominator_sign(dom)
                else:
                    slope = _slope_sign(T, dom)
                    self.signs[j, k] = slope
        self.dets = {}
        for j, T in enumerate(scheme.branches):
            if isinstance(T, MoebiusMap):
                self.dets[j] = ball_pow(abs(ball(T.det())), self.t) if self.t != 0 else arb(1)

    def value(self, k, x):
        """R_k at a ball x."""
        num = arb(0)
        for j in self.scheme.predecessors[k]:
            T = self.scheme.branches[j]
            y = T(x)
            if isinstance(T, MoebiusMap):
                a, b, c, d = T.balls()
                e = self.signs[j, k] * (c * x + d)
                w = self.dets[j] * ball_pow(e, -2 * self.t)
            else:
                w = ball_pow(self.signs[j, k] * T.deriv(x), self.t)
            num += self.fa[j](y) * w
        return num / self.fa[k](x)

    def series(self, k, z):
        """Taylor series of R_k about z (a point or a whole cell as a ball)."""
        L = self.length
        old = ctx.cap
        ctx.cap = L
        try:
            h = arb_series([z, 1], prec=L)
            num = None
            for j in self.scheme.predecessors[k]:
                T = self.scheme.branches[j]
                if isinstance(T, MoebiusMap):
                    a, b, c, d = T.balls()
                    den = c * h + d
                    y = (a * h + b) / den
                    w = self.dets[j] * (self.signs[j, k] * den) ** (-2 * self.t)
                else:
                    y = T(h)
                    w = (self.signs[j, k] * T.deriv(h)) ** self.t
                y0 = y.coeffs()[0]
                delta = y - y0
                tj = _taylor_at(self.f[j], y0, L)
                acc = arb_series([tj[L - 1]], prec=L)
                for i in range(L - 2, -1, -1):
                    acc = acc * delta + tj[i]
                term = acc * w
                num = term if num is None else num + term
            den = _series(_taylor_at(self.f[k], z, L), L)
            return num / den
        finally:
            ctx.cap = old

    def derivative_bound(self, k, u0, u1):
        """Enclosure of sup |R_k'| over [u0, u1] via a Lagrange-remainder Taylor model."""
        c = (fmpq(u0) + fmpq(u1)) / 2
        r = arb((fmpq(u1) - fmpq(u0)) / 2)
        K = self.order
        at_c = self.series(k, arb(c)).derivative().coeffs()
        cell = arb(u0).union(arb(u1))
        over = self.series(k, cell).derivative().coeffs()
        total = arb(0)
        rk = arb(1)
        for i in range(K):
            coeff = at_c[i] if i < len(at_c) else arb(0)
            total += abs(coeff) * rk
            rk *= r
        lead = over[K] if K < len(over) else arb(0)
        total += abs(lead) * rk
        return arb(0).union(arb(total.upper()))


def _slope_sign(T, domain):
    lo, hi = outer_interval(domain)
    s = T.deriv(arb(lo).union(arb(hi)))
    if s > 0:
        return 1
    if s < 0:
        return -1
    pieces = 64
    step = (hi - lo) / pieces
    signs = set()
    for i in range(pieces):
        v = T.deriv(arb(lo + step * i).union(arb(lo + step * (i + 1))))
        signs.add(1 if v > 0 else -1 if v < 0 else 0)
    if len(signs) != 1 or 0 in signs:
        raise ValueError("branch derivative may vanish on its domain")
    return signs.pop()


class MoebiusRatioModel(RatioModel):
    """Same expansions, computed from the closed-form ratio-derivative polynomials."""

    def __init__(self, scheme, t, f, order=DEFAULT_ORDER):
        super().__init__(scheme, t, f, order)
        self.m = max(max(g.degree() for g in self.f), 0)
        self.phat = {}
        for k in range(scheme.size):
            for j in scheme.predecessors[k]:
                T = scheme.branches[j]
                p = moebius_image_polynomial(self.f[j], T, self.m)
                ph = ratio_derivative_poly(self.f[k], p, T, _exact_or_ball(t), self.m)
                self.phat[j, k] = ph

    def derivative_series(self, k, z):
        L = self.order + 1
        old = ctx.cap
        ctx.cap = L
        try:
            h = arb_series([z, 1], prec=L)
            total = None
            for j in self.scheme.predecessors[k]:
                T = self.scheme.branches[j]
                a, b, c, d = T.balls()
                sigma = self.signs[j, k]
                e = sigma * (c * h + d)
                ph = _series(_taylor_at(self.phat[j, k], z, L), L)
                term = ph * e ** (-(2 * self.t + self.m + 1)) * self.dets[j]
                if (self.m + 1) % 2 and sigma < 0:
                    term = -term
                total = term if total is None else total + term
            fk = _series(_taylor_at(self.f[k], z, L), L)
            return total / (fk * fk)
        finally:
            ctx.cap = old

    def derivative_bound(self, k, u0, u1):
        c = (fmpq(u0) + fmpq(u1)) / 2
        r = arb((fmpq(u1) - fmpq(u0)) / 2)
        K = self.order
        at_c = self.derivative_series(k, arb(c)).coeffs()
        over = self.derivative_series(k, arb(u0).union(arb(u1))).coeffs()
        total = arb(0)
        rk = arb(1)
        for i in range(K):
            coeff = at_c[i] if i < len(at_c) else arb(0)
            total += abs(coeff) * rk
            rk *= r
        lead = over[K] if K < len(over) else arb(0)
        total += abs(lead) * rk
        return arb(0).union(arb(total.upper()))


def _exact_or_ball(t):
    return t if isinstance(t, (fmpq, int)) else ball(t)


def ratio_derivative_bound(scheme, t, f, state, cell, order=DEFAULT_ORDER, closed_form=False):
    """Enclosure of sup over the cell of |((L_t f)_k / f_k)'|.

    By default the branch series are composed with f directly; closed_form
    uses the ratio-derivative polynomials instead (Moebius schemes only).
    Countable schemes use the Hurwitz closed form.
    """
    u0, u1 = (fmpq(cell[0]), fmpq(cell[1]))
    f = [f] if not isinstance(f, (list, tuple)) else f
    sign_check = poly_min_lower_bound(_poly(f[state]), (u0, u1))
    if not sign_check > 0:
        neg = poly_min_lower_bound(-_poly(f[state]), (u0, u1))
        if not neg > 0:
            raise ValueError("test function may vanish on the cell")
    if isinstance(scheme, CountableScheme):
        return CountableRatioModel(scheme, t, f[0], order).derivative_bound(0, u0, u1)
    model = (MoebiusRatioModel if closed_form else RatioModel)(scheme, t, f, order)
    return model.derivative_bound(state, u0, u1)


# Hurwitz zeta

_BERNOULLI = [fmpq(1, 6), fmpq(-1, 30), fmpq(1, 42), fmpq(-1, 30), fmpq(5, 66),
              fmpq(-691, 2730), fmpq(7, 6), fmpq(-3617, 510), fmpq(43867, 798),
              fmpq(-174611, 330)]
EM_TERMS = 8
INTEGRAL_BITS = 34
INTEGRAL_MAX_HEAD = 4096


def _head_size(x, s_lo, s_hi, bits, terms):
    """Smallest head length whose Euler-Maclaurin remainder is below 2^-bits."""
    xf = max(float(x.lower()), 1e-300)
    b2m = abs(float(_BERNOULLI[terms - 1]))
    logfac = math.lgamma(2 * terms + 1)
    target = -bits * math.log(2)
    H = 4
    while H < 10 ** 6:
        ok = True
        for s in (s_lo, s_hi):
            log_err = (math.log(b2m) - logfac + math.lgamma(s + 2 * terms - 1) - math.lgamma(s)
                       - (s + 2 * terms - 1) * math.log(xf + H))
            if log_err > target:
                ok = False
        if ok:
            return H
        H = int(H * 1.25) + 1
    return H


def _integral_head_size(x, s_lo, bits):
    # the convexity bracket has width about s (x+H)^{-s-1} / 8
    xf = max(float(x.lower()), 1e-300)
    bits = min(bits, INTEGRAL_BITS)
    H = 4
    while H < INTEGRAL_MAX_HEAD and (math.log(s_lo / 8) - (s_lo + 1) * math.log(xf + H)
                                     > -bits * math.log(2)):
        H = int(H * 1.25) + 1
    return min(H, INTEGRAL_MAX_HEAD)


def _plus_minus(v):
    """The ball [-|v|, |v|]."""
    top = arb(abs(v).upper())
    return top.union(-top)


def hurwitz_zeta_many(x, s, count, head_terms=None, tail_mode="euler_maclaurin", bits=None):
    """[zeta(x, s + j) for j < count]; head summed directly, tail enclosed."""
    x, s = ball(x), ball(s)
    if not x.lower() > 0:
        raise ValueError("hurwitz_zeta needs x > 0")
    if not s.lower() > 1:
        raise ValueError("hurwitz_zeta needs s > 1")
    if tail_mode not in ("euler_maclaurin", "integral"):
        raise ValueError("unknown tail mode %r" % tail_mode)
    bits = ctx.prec // 2 if bits is None else bits
    s_lo, s_hi = float(s.lower()), float(s.upper()) + count - 1
    if head_terms is None:
        if tail_mode == "euler_maclaurin":
            head_terms = _head_size(x, s_lo, s_hi, bits, EM_TERMS)
        else:
            head_terms = _integral_head_size(x, s_lo, bits)
    H = int(head_terms)
    powers, invs = [], []
    for k in range(H + 1):
        u = x + k
        powers.append(ball_pow(u, -s))
        invs.append(1 / u)
    u = x + H
    out = []
    for j in range(count):
        sj = s + j
        head = arb(0)
        for k in range(H):
            head += powers[k]
        A = powers[H]
        integral = A * u / (sj - 1)
        if tail_mode == "integral":
            # g convex decreasing: trapezoid sums overestimate, midpoint sums underestimate
            lower = integral + A / 2
            upper = ball_pow(u - fmpq(1, 2), 1 - sj) / (sj - 1)
            tail = arb(lower.lower()).union(arb(upper.upper()))
        else:
            tail = integral + A / 2
            rising = sj
            upow = A * invs[H]
            term = arb(0)
            for i in range(1, EM_TERMS + 1):
                term = arb(_BERNOULLI[i - 1] / math.factorial(2 * i)) * rising * upow
                tail += term
                rising *= (sj + 2 * i - 1) * (sj + 2 * i)
                upow *= invs[H] * invs[H]
            tail += _plus_minus(term)
        out.append(head + tail)
        for k in range(H + 1):
            powers[k] *= invs[k]
    return out


def hurwitz_zeta(x, s, head_terms=None, tail_mode="euler_maclaurin"):
    """Enclosure of zeta(x, s) = sum_{k>=0} (x + k)^{-s} for x > 0, s > 1."""
    return hurwitz_zeta_many(x, s, 1, head_terms, tail_mode)[0]


def countable_transfer_eval(cs, t, f, x, tail_mode="euler_maclaurin"):
    """(L_t f)(x) for branches 1/(x + a + N k) via L_t x^n = N^{-n-2t} zeta((x+a)/N, n+2t)."""
    t, x = ball(t), ball(x)
    if not t > fmpq(1, 2):
        raise ValueError("countable transfer operator needs t > 1/2")
    coeffs = _poly(f).coeffs()
    if not coeffs:
        return arb(0)
    N = cs.step
    y = (x + cs.offset) / N
    zetas = hurwitz_zeta_many(y, 2 * t, len(coeffs), tail_mode=tail_mode)
    total = arb(0)
    scale = ball_pow(arb(N), -2 * t) if N != 1 else arb(1)
    for n, a in enumerate(coeffs):
        if a != 0:
            total += arb(a) * scale * zetas[n]
        scale = scale / N
    return total


class CountableRatioModel:
    """Taylor expansions of (L_t f)/f for a countable scheme, via Hurwitz zeta."""

    def __init__(self, cs, t, f, order=DEFAULT_ORDER, tail_mode="euler_maclaurin"):
        self.cs = cs
        self.t = ball(t)
        if not self.t > fmpq(1, 2):
            raise ValueError("countable transfer operator needs t > 1/2")
        self.f = _poly(f)
        self.coeffs = [arb(a) for a in self.f.coeffs()]
        self.order = order
        self.length = order + 2
        self.fa = arb_poly(self.f)
        self.tail_mode = tail_mode
        self.scheme = cs

    def value(self, k, x):
        return countable_transfer_eval(self.cs, self.t, self.f, x, self.tail_mode) / self.fa(x)

    def series(self, k, z):
        L = self.length
        N = self.cs.step
        n_terms = len(self.coeffs)
        y0 = (z + self.cs.offset) / N
        zetas = hurwitz_zeta_many(y0, 2 * self.t, n_terms + L - 1, tail_mode=self.tail_mode)
        base = ball_pow(arb(N), -2 * self.t) if N != 1 else arb(1)
        num = [arb(0)] * L
        for n, a in enumerate(self.coeffs):
            if a == 0:
                continue
            s = 2 * self.t + n
            factor = a * base / arb(N) ** n
            rising = arb(1)
            for i in range(L):
                # d^i/dx^i zeta((x+a)/N, s) / i! = (-1)^i (s)_i / i! zeta(y, s+i) N^{-i}
                num[i] += factor * rising * zetas[n + i]
                rising = -rising * (s + i) / ((i + 1) * N)
        old = ctx.cap
        ctx.cap = L
        try:
            den = _series(_taylor_at(self.f, z, L), L)
            return arb_series(num, prec=L) / den
        finally:
            ctx.cap = old

    def derivative_bound(self, k, u0, u1):
        c = (fmpq(u0) + fmpq(u1)) / 2
        r = arb((fmpq(u1) - fmpq(u0)) / 2)
        K = self.order
        at_c = self.series(0, arb(c)).derivative().coeffs()
        over = self.series(0, arb(u0).union(arb(u1))).derivative().coeffs()
        total = arb(0)
        rk = arb(1)
        for i in range(K):
            coeff = at_c[i] if i < len(at_c) else arb(0)
            total += abs(coeff) * rk
            rk *= r
        lead = over[K] if K < len(over) else arb(0)
        total += abs(lead) * rk
        return arb(0).union(arb(total.upper()))


def truncation_tail_bound(f, t, N, step=1):
    """Enclosure, uniform over x in [0, 1], of the discarded contribution

        E(x) = sum_{k>=1} f(T_n x) |T_n'(x)|^t,   T_n(x) = 1/(x + n),  n = N + step*k.

    Writing g(u) = sum_j a_j u^{-(j+2t)}, E(x) = sum_k g(x + N + step k).  When g
    is positive and decreasing on [N, oo) the sum is squeezed between integrals
    of g; otherwise each monomial is bounded separately.
    """
    f = _poly(f)
    t = ball(t)
    if not t > fmpq(1, 2):
        raise ValueError("truncation bound needs t > 1/2")
    coeffs = f.coeffs()
    if not coeffs or all(a == 0 for a in coeffs):
        return arb(0)
    exps = [2 * t + j for j in range(len(coeffs))]

    def tail_integral(a, j):
        # int_a^oo u^{-s_j} du / step
        return ball_pow(arb(a), 1 - exps[j]) / ((exps[j] - 1) * step)

    monotone = False
    if N >= 1:
        # g > 0 and g' < 0 on [N, oo) iff f > 0 and Q > 0 on [0, 1/N] (v = 1/u)
        pos = poly_min_lower_bound(f, (fmpq(0), fmpq(1, N)))
        q_coeffs = [exps[j] * arb(a) for j, a in enumerate(coeffs)]
        q_lower = _ball_poly_min(q_coeffs, fmpq(1, N))
        monotone = pos > 0 and q_lower > 0
    if monotone:
        upper = sum((arb(a) * tail_integral(N, j) for j, a in enumerate(coeffs)), arb(0))
        lower = sum((arb(a) * tail_integral(N + 1 + step, j) for j, a in enumerate(coeffs)),
                    arb(0))
        return arb(lower.lower()).union(arb(upper.upper()))
    upper, lower = arb(0), arb(0)
    for j, a in enumerate(coeffs):
        if a == 0:
            continue
        big = arb(a) * tail_integral(N, j) if N >= 1 else None
        small = arb(a) * tail_integral(N + 1 + step, j)
        if big is None:
            raise ValueError("termwise tail bound needs N >= 1")
        if a > 0:
            upper += big
            lower += small
        else:
            upper += small
            lower += big
    return arb(lower.lower()).union(arb(upper.upper()))


def _ball_poly_min(coeffs, v_max, pieces=256):
    """Crude rigorous lower bound of a ball-coefficient polynomial on [0, v_max]."""
    p = arb_poly(coeffs)
    best = None
    step = fmpq(v_max) / pieces
    for i in range(pieces):
        val = p(arb(step * i).union(arb(step * (i + 1))))
        best = val.lower() if best is None else best.min(val.lower())
    return best
