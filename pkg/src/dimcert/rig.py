"""Ball arithmetic and exact polynomial algebra.

Balls are python-flint ``arb`` values (midpoint-radius with outward
rounding), rationals are ``fmpq`` and rational polynomials are ``fmpq_poly``.
This module adds the handful of helpers the rest of the package needs on top
of them: parsing, powers, precision control and rigorous polynomial minima.
"""

import os
import re
from contextlib import contextmanager
from fractions import Fraction

from flint import arb, arb_poly, ctx, fmpq, fmpq_poly, fmpz

Ball = arb
Rational = fmpq
RationalPolynomial = fmpq_poly
BallPolynomial = arb_poly

DEFAULT_PREC = 128

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def default_prec():
    """Working precision in bits, overridable through DIMCERT_PREC."""
    value = os.environ.get("DIMCERT_PREC")
    if value:
        bits = int(value)
        if bits < 53:
            raise ValueError("DIMCERT_PREC must be at least 53")
        return bits
    return DEFAULT_PREC


@contextmanager
def precision(bits, cap=None):
    """Temporarily set the ball precision (and optionally the series length)."""
    if bits < 53:
        raise ValueError("precision below 53 bits")
    old_prec, old_cap = ctx.prec, ctx.cap
    ctx.prec = bits
    if cap is not None:
        ctx.cap = cap
    try:
        yield
    finally:
        ctx.prec, ctx.cap = old_prec, old_cap


def parse_rational(text):
    """Parse "p/q", an integer or a finite decimal into an exact fmpq."""
    if isinstance(text, fmpq):
        return text
    if isinstance(text, (int, fmpz)):
        return fmpq(int(text))
    if isinstance(text, Fraction):
        return fmpq(text.numerator, text.denominator)
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        try:
            num, den = int(num), int(den)
        except ValueError:
            raise ValueError("malformed rational %r" % text) from None
        if den == 0:
            raise ValueError("zero denominator in %r" % text)
        return fmpq(num, den)
    if not _DECIMAL.match(text):
        raise ValueError("malformed decimal %r" % text)
    frac = Fraction(text)
    return fmpq(frac.numerator, frac.denominator)


def rational_str(q):
    """Render a rational as "num/den"."""
    q = fmpq(q)
    return "%d/%d" % (int(q.p), int(q.q))


def ball(value):
    """Enclose an int, rational, decimal string or ball at the current precision."""
    if isinstance(value, arb):
        return value
    if isinstance(value, (int, fmpz, fmpq)):
        return arb(value)
    return arb(parse_rational(value))


def ball_from_decimal(text, prec=None):
    """Ball containing the exact rational denoted by a decimal string."""
    if not _DECIMAL.match(str(text).strip()):
        raise ValueError("malformed decimal %r" % text)
    q = parse_rational(text)
    with precision(prec or default_prec()):
        return +arb(q)


def ball_pow(x, t):
    """x**t for a positive ball x, as exp(t log x)."""
    x, t = ball(x), ball(t)
    if not x.lower() > 0:
        raise ValueError("ball_pow needs a strictly positive base, got %s" % x.str(5))
    return (t * x.log()).exp()


def exact_fmpq(x):
    """The exact dyadic value of an exact ball (e.g. an endpoint)."""
    man, exp = x.man_exp()
    man, exp = int(man), int(exp)
    if exp >= 0:
        return fmpq(man * 2**exp)
    return fmpq(man, 2**-exp)


def lower_fmpq(x):
    return exact_fmpq(x.lower())


def upper_fmpq(x):
    return exact_fmpq(x.upper())


def dyadic(x, bits):
    """Round the midpoint of x (ball or float) to the nearest multiple of 2**-bits."""
    if isinstance(x, arb):
        q = exact_fmpq(x.mid())
    else:
        q = parse_rational(Fraction(x)) if not isinstance(x, fmpq) else x
    scaled = q * 2**bits
    n = int(scaled.floor())
    if scaled - n >= fmpq(1, 2):
        n += 1
    return fmpq(n, 2**bits)


def hull(lo, hi):
    """Smallest ball containing both lo and hi."""
    return ball(lo).union(ball(hi))


def outer_interval(domain):
    """Rational outer hull [a, b] of an interval whose endpoints may be balls."""
    lo, hi = domain
    a = lo if isinstance(lo, fmpq) else lower_fmpq(ball(lo))
    b = hi if isinstance(hi, fmpq) else upper_fmpq(ball(hi))
    return a, b


def poly_eval(p, x):
    """Enclosure of p(x) for every point of the ball x."""
    p = fmpq_poly(p) if not isinstance(p, (fmpq_poly, arb_poly)) else p
    return arb_poly(p)(ball(x))


def taylor_coeffs(p, center):
    """Taylor coefficients of p at center (a ball); enclose those at every point of it."""
    return arb_poly(p)(arb_poly([ball(center), 1])).coeffs()


def poly_min_lower_bound(p, interval, cells=1024, max_cells=2**16, depth=8):
    """Rigorous lower bound for min p over interval.

    Each cell is expanded about its midpoint; derivatives below order
    K = min(deg p, depth) are taken at the midpoint and the K-th Taylor
    coefficient is enclosed over the whole cell.  Cells whose bound is not
    positive are halved until max_cells resolution is reached.
    """
    p = p if isinstance(p, fmpq_poly) else fmpq_poly(p)
    a, b = outer_interval(interval)
    deg = p.degree()
    if deg <= 0:
        return arb(p[0]) if deg == 0 else arb(0)
    order = min(deg, depth)
    poly = arb_poly(p)
    width = (b - a) / cells
    finest = (b - a) / max_cells
    stack = [(a + width * i, a + width * (i + 1)) for i in range(cells)]
    best = None
    while stack:
        u0, u1 = stack.pop()
        bound = _cell_lower_bound(poly, u0, u1, order)
        if not bound > 0 and (u1 - u0) > finest:
            if not poly(arb(u0)) < 0:
                mid = (u0 + u1) / 2
                stack.append((mid, u1))
                stack.append((u0, mid))
                continue
        bound = bound.lower()
        best = bound if best is None else best.min(bound)
    return best


def _cell_lower_bound(poly, u0, u1, order):
    c = (u0 + u1) / 2
    r = arb((u1 - u0) / 2)
    coeffs = poly(arb_poly([arb(c), 1])).coeffs()
    coeffs += [arb(0)] * (order + 1 - len(coeffs))
    low = coeffs[0]
    rk = arb(1)
    for k in range(1, order):
        rk = rk * r
        low -= coeffs[k].abs_upper() * rk
    cell = arb(u0).union(arb(u1))
    top = poly(arb_poly([cell, 1])).coeffs()
    lead = top[order] if order < len(top) else arb(0)
    low -= lead.abs_upper() * rk * r
    return low
