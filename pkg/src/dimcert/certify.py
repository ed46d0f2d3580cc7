"""Rigorous min-max checks and certificates.

A positive test function f with inf_x (L_t f)(x)/f(x) > 1 proves that the
dimension exceeds t; sup < 1 proves it is below t.  The ratio is bounded cell
by cell: R(x) lies within R(u0) +/- sup|R'| (u1 - u0) on [u0, u1], the
derivative bound coming from a Taylor model of R' over the cell.
"""

import json
from dataclasses import dataclass, field

from flint import arb, ctx, fmpq, fmpq_poly

from .operator import (DEFAULT_ORDER, CountableRatioModel, MoebiusRatioModel, RatioModel,
                       truncation_tail_bound)
from .rig import (ball, ball_pow, parse_rational, poly_eval,
                  poly_min_lower_bound, precision, rational_str)
from .scheme import CountableScheme
from .spectral import TestFunction

LOWER, UPPER = "lower", "upper"
CERTIFIED, REFUTED, INCONCLUSIVE = "Certified", "Refuted", "Inconclusive"

DEFAULT_CELLS = 2**6
MAX_CELLS = 2**16
POSITIVITY_CELLS = 2**10


class PositivityError(ValueError):
    pass


@dataclass
class Verdict:
    status: str
    achieved_margin: object = None
    bound: object = None
    detail: str = ""
    certificate: object = None
    cells_used: int = 0

    @property
    def certified(self):
        return self.status == CERTIFIED


@dataclass
class Certificate:
    scheme_hash: str
    t: object
    direction: str
    testfn: TestFunction
    cells: int
    prec: int
    margin: object
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {"scheme_hash": self.scheme_hash,
                "t": rational_str(self.t),
                "direction": self.direction,
                "coefficients": self.testfn.to_json(),
                "cells": self.cells,
                "prec": self.prec,
                "margin": rational_str(self.margin)}

    def dumps(self):
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            direction = doc["direction"].lower()
            if direction not in (LOWER, UPPER):
                raise ValueError("direction must be lower or upper")
            return cls(scheme_hash=str(doc["scheme_hash"]),
                       t=parse_rational(doc["t"]),
                       direction=direction,
                       testfn=TestFunction.from_json(doc["coefficients"]),
                       cells=int(doc["cells"]),
                       prec=int(doc["prec"]),
                       margin=parse_rational(doc["margin"]))
        except (KeyError, TypeError) as exc:
            raise ValueError("malformed certificate: %s" % exc) from exc


def _testfn(f, scheme):
    if isinstance(f, TestFunction):
        return f
    if isinstance(f, (fmpq_poly, list)) and not isinstance(f, list):
        f = [f]
    if isinstance(f, list) and f and not isinstance(f[0], (fmpq_poly, list, tuple)):
        f = [fmpq_poly(f)]
    polys = [p if isinstance(p, fmpq_poly) else fmpq_poly(p) for p in f]
    if len(polys) == 1 and scheme.size > 1:
        polys = polys * scheme.size
    return TestFunction(polys)


def _state_classes(scheme, f):
    """Representative states: equal columns, domains and components give equal ratios."""
    if isinstance(scheme, CountableScheme):
        return [0]
    seen = {}
    for k in range(scheme.size):
        key = (tuple(scheme.predecessors[k]), tuple(scheme.interval(k)),
               tuple(f[j] for j in scheme.predecessors[k]), f[k])
        key = (key[0], key[1], tuple(str(p) for p in key[2]), str(key[3]))
        seen.setdefault(key, k)
    return sorted(seen.values())


def check_positive(testfn, scheme, cells=POSITIVITY_CELLS):
    """Lower bound on every component over its domain; raises if not positive."""
    f = _testfn(testfn, scheme)
    best = None
    for k in range(len(f)):
        dom = scheme.interval(k)
        low = poly_min_lower_bound(f[k], dom, cells=cells)
        if not low > 0:
            raise PositivityError("component %d of the test function is not provably positive" % k)
        best = low if best is None else best.min(low)
    return best


def positivity_bounds(testfn, scheme, cells=POSITIVITY_CELLS):
    f = _testfn(testfn, scheme)
    return [poly_min_lower_bound(f[k], scheme.interval(k), cells=cells) for k in range(len(f))]


def ratio_model(scheme, t, f, order=DEFAULT_ORDER, tail_mode="euler_maclaurin",
                closed_form=False):
    """Ratio expansions for the scheme.

    The default composes branch series with the test function; the closed
    form through ratio-derivative polynomials is exact algebra but its
    degree-2m polynomials lose much more to ball wrapping over a cell.
    """
    if isinstance(scheme, CountableScheme):
        return CountableRatioModel(scheme, t, f[0], order, tail_mode=tail_mode)
    if closed_form:
        return MoebiusRatioModel(scheme, t, list(f), order)
    return RatioModel(scheme, t, list(f), order)


def _extremum(scheme, t, f, kind, target, cells, max_cells, order, tail_mode, early=True):
    """Rigorous inf (kind=LOWER) or sup (kind=UPPER) of the ratio over all states.

    Returns (bound, status, cells used).  Cells whose bound does not clear the
    target are halved.  An anchor value on the wrong side of the target
    proves the inequality false; with early set this stops the search,
    otherwise the cell is kept and the result stays a bound on the extremum.
    """
    f = _testfn(f, scheme)
    model = ratio_model(scheme, t, f, order, tail_mode)
    target = ball(target)
    best = None
    used = 0
    status = CERTIFIED
    for k in _state_classes(scheme, f):
        a, b = scheme.interval(k)
        width = (b - a) / cells
        finest = (b - a) / max_cells
        stack = [(a + width * i, a + width * (i + 1)) for i in reversed(range(cells))]
        while stack:
            u0, u1 = stack.pop()
            used += 1
            anchor = model.value(k, arb(u0))
            spread = model.derivative_bound(k, u0, u1) * arb(u1 - u0)
            if kind == LOWER:
                bound = arb((anchor - spread).lower())
                ok = bound > target
                wrong = anchor < target
            else:
                bound = arb((anchor + spread).upper())
                ok = bound < target
                wrong = anchor > target
            if not ok:
                if wrong and early:
                    return bound, REFUTED, used
                if wrong:
                    status = REFUTED
                if u1 - u0 > finest and not wrong:
                    mid = (u0 + u1) / 2
                    stack.append((mid, u1))
                    stack.append((u0, mid))
                    continue
                if status != REFUTED:
                    status = INCONCLUSIVE
            if best is None:
                best = bound
            else:
                best = best.min(bound) if kind == LOWER else best.max(bound)
    return best, status, used


def ratio_inf_bound(scheme, t, f, target=1, cells=DEFAULT_CELLS, max_cells=MAX_CELLS,
                    order=DEFAULT_ORDER, tail_mode="euler_maclaurin", head_terms=None):
    """Rigorous lower bound on inf of (L_t f)/f over the scheme's domains.

    Refinement stops once every cell clears target.  For countable schemes,
    head_terms selects explicit summation of the first branches plus a
    truncation tail bound instead of the Hurwitz closed form.
    """
    if head_terms is not None:
        return _truncated_extremum(scheme, t, f, LOWER, head_terms, target, cells, max_cells)[0]
    return _extremum(scheme, t, f, LOWER, target, cells, max_cells, order, tail_mode,
                     early=False)[0]


def ratio_sup_bound(scheme, t, f, target=1, cells=DEFAULT_CELLS, max_cells=MAX_CELLS,
                    order=DEFAULT_ORDER, tail_mode="euler_maclaurin", head_terms=None):
    """Rigorous upper bound on sup of (L_t f)/f over the scheme's domains."""
    if head_terms is not None:
        return _truncated_extremum(scheme, t, f, UPPER, head_terms, target, cells, max_cells)[0]
    return _extremum(scheme, t, f, UPPER, target, cells, max_cells, order, tail_mode,
                     early=False)[0]


def _truncated_extremum(cs, t, f, kind, head_terms, target, cells, max_cells):
    """Ratio bound from explicit head branches plus the truncation tail bound."""
    if not isinstance(cs, CountableScheme):
        raise ValueError("head_terms applies to countable schemes only")
    f = _testfn(f, cs)[0]
    t = ball(t)
    tail = truncation_tail_bound(f, t, cs.digit(head_terms - 1), cs.step)
    target = ball(target)
    a, b = cs.domain
    stack = [(a + (b - a) * fmpq(i, cells), a + (b - a) * fmpq(i + 1, cells))
             for i in range(cells - 1, -1, -1)]
    finest = (b - a) / max_cells
    best, status, used = None, CERTIFIED, 0
    while stack:
        u0, u1 = stack.pop()
        used += 1
        x = arb(u0).union(arb(u1))
        head = arb(0)
        for k in range(head_terms):
            u = x + cs.digit(k)
            head += poly_eval(f, 1 / u) * ball_pow(u, -2 * t)
        ratio = (head + tail) / poly_eval(f, x)
        if kind == LOWER:
            bound, ok = arb(ratio.lower()), ratio > target
        else:
            bound, ok = arb(ratio.upper()), ratio < target
        if not ok and u1 - u0 > finest:
            mid = (u0 + u1) / 2
            stack.append((mid, u1))
            stack.append((u0, mid))
            continue
        if not ok:
            status = INCONCLUSIVE
        if best is None:
            best = bound
        else:
            best = best.min(bound) if kind == LOWER else best.max(bound)
    return best, status, used


def _floor_power_of_two(x):
    """Largest 2^-k (k >= 0) not exceeding the positive ball x."""
    low = x.lower()
    if not low > 0:
        return None
    k = 0
    p = fmpq(1)
    while arb(p) > low:
        p /= 2
        k += 1
    return p


def certify_bound(scheme, t, direction, f, cells=DEFAULT_CELLS, max_cells=MAX_CELLS,
                  prec=None, order=DEFAULT_ORDER, tail_mode="euler_maclaurin"):
    """Try to prove dim > t (direction lower) or dim < t (direction upper) with f.

    Returns a Verdict; when Certified it carries the Certificate.
    """
    direction = direction.lower()
    if direction not in (LOWER, UPPER):
        raise ValueError("direction must be 'lower' or 'upper'")
    t = parse_rational(t)
    prec = ctx.prec if prec is None else prec
    with precision(prec):
        f = _testfn(f, scheme)
        try:
            check_positive(f, scheme)
        except PositivityError as exc:
            return Verdict(INCONCLUSIVE, detail=str(exc))
        bound, status, used = _extremum(scheme, t, f, direction, 1, cells, max_cells, order,
                                        tail_mode)
        margin = bound - 1 if direction == LOWER else 1 - bound
        if status != CERTIFIED or not margin > 0:
            return Verdict(status if status != CERTIFIED else INCONCLUSIVE, margin, bound,
                           cells_used=used)
        claimed = _floor_power_of_two(margin)
        cert = Certificate(scheme.hash(), t, direction, f, cells, prec, claimed)
        return Verdict(CERTIFIED, margin, bound, certificate=cert, cells_used=used)


def verify_certificate(cert, scheme, order=DEFAULT_ORDER, tail_mode="euler_maclaurin"):
    """Replay positivity and the ratio inequality recorded in the certificate."""
    if isinstance(cert, (str, dict)):
        cert = Certificate.from_json(cert)
    if cert.scheme_hash != scheme.hash():
        raise ValueError("certificate was issued for a different scheme")
    if len(cert.testfn) != scheme.size:
        raise ValueError("certificate has %d components, scheme has %d states"
                         % (len(cert.testfn), scheme.size))
    with precision(cert.prec):
        try:
            check_positive(cert.testfn, scheme)
        except PositivityError as exc:
            return Verdict(INCONCLUSIVE, detail=str(exc))
        bound, status, used = _extremum(scheme, cert.t, cert.testfn, cert.direction,
                                        1 + cert.margin if cert.direction == LOWER
                                        else 1 - cert.margin,
                                        cert.cells, MAX_CELLS, order, tail_mode)
        margin = bound - 1 if cert.direction == LOWER else 1 - bound
        if status == CERTIFIED and margin >= arb(cert.margin):
            return Verdict(CERTIFIED, margin, bound, cells_used=used)
        if status == REFUTED:
            return Verdict(REFUTED, margin, bound, cells_used=used)
        return Verdict(INCONCLUSIVE, margin, bound, cells_used=used)
