"""Acceptance criteria 1-10 at their stated tolerances and time budgets.

Each criterion records one PASS/FAIL line, printed in the terminal summary.
Run on its own with ``python3 -m pytest tests/test_acceptance.py -v``.
"""

import subprocess
import sys
import time

import pytest
from flint import arb, fmpq, fmpq_poly

from dimcert.certify import ratio_inf_bound, ratio_model, ratio_sup_bound
from dimcert.driver import (EstimateConfig, check_bracket_invariants, compare, decimal_down,
                            decimal_up, estimate_dimension, laplacian_bottom, named_scheme,
                            reproduce_table, verify_bound)
from dimcert.rig import parse_rational as Q

pytestmark = pytest.mark.slow

RESULTS = {}


def record(criterion, part, ok, detail=""):
    RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))


def summary_lines():
    lines = []
    for criterion in sorted(RESULTS):
        parts = RESULTS[criterion]
        ok = all(p[1] for p in parts)
        failed = ["%s (%s)" % (p[0], p[2]) if p[2] else p[0] for p in parts if not p[1]]
        text = "criterion %2d: %s  [%d/%d]" % (criterion, "PASS" if ok else "FAIL",
                                              sum(p[1] for p in parts), len(parts))
        if failed:
            text += "  failing: " + "; ".join(failed)
        lines.append(text)
    return lines


def _estimate(name, eps, **kw):
    scheme = named_scheme(name)
    start = time.perf_counter()
    bound = estimate_dimension(scheme, EstimateConfig(eps=eps, **kw))
    elapsed = time.perf_counter() - start
    assert not bound.failed, bound.reason
    assert check_bracket_invariants(bound)
    return scheme, bound, elapsed


def _interval(bound, digits=25):
    return "[%s, %s]" % (decimal_down(bound.t0, digits), decimal_up(bound.t1, digits))


# 1 ---------------------------------------------------------------------------

def test_c01_e2_twenty_digits():
    scheme, bound, elapsed = _estimate("e2", "1e-19", m_max=40, prec=128, prec_max=256)
    value = Q("0.53128050627720514162")
    # a 20-digit prefix stands for every real in [x, x + 1e-20]
    ok = (bound.width <= Q("1e-19") and bound.t0 <= value + Q("1e-20") and value <= bound.t1
          and bound.m_final <= 40 and bound.prec_final <= 256 and elapsed <= 60
          and verify_bound(bound, scheme) == ["Certified", "Certified"])
    record(1, "E2", ok, "%s width %.2e, m=%d, %.1fs" % (_interval(bound), float(bound.width),
                                                         bound.m_final, elapsed))
    assert ok


# 2 ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,value", [("e5", "0.836829443680"), ("e4", "0.788945557483")])
def test_c02_e5_e4(name, value):
    _, bound, elapsed = _estimate(name, "1e-12")
    ok = compare(bound, value, "1e-12") and elapsed <= 30
    record(2, name, ok, "%s %.1fs" % (_interval(bound, 15), elapsed))
    assert ok


# 3 ---------------------------------------------------------------------------

HAND = [
    ("e5 cubic", "e5", fmpq(5, 6), ["2/3", "-11/20", "1/3", "-1/10"], "inf", "1.0029"),
    ("e4 quintic", "e4", "sqrt19", ["27/50", "-11/25", "33/100", "-11/50", "21/200", "-1/40"],
     "inf", "1.00205"),
    ("{1,2,3,5} linear", "e:1,2,3,5", "sqrt5", ["9/10", "-2/5"], "inf", "1.00042"),
    ("e6 cubic", "e6", fmpq(19, 22), ["0.67", "-0.57", "0.35", "-0.107"], "inf", "1.0001"),
    ("modular(2,2) f=1", "modular:2,2", fmpq(5, 6), ["1"], "sup_head", "0.95"),
    ("modular(1,8) 1-x/2", "modular:1,8", fmpq(5, 6), ["1", "-1/2"], "sup", "1"),
]


def _hand_t(t):
    if t == "sqrt19":
        return (arb(19).sqrt() - 2) / 3
    if t == "sqrt5":
        return 3 - arb(5).sqrt()
    return t


@pytest.mark.parametrize("label,name,t,coeffs,kind,threshold", HAND, ids=[h[0] for h in HAND])
def test_c03_hand_certificates(label, name, t, coeffs, kind, threshold):
    scheme = named_scheme(name)
    f = [fmpq_poly([Q(c) for c in coeffs])]
    t = _hand_t(t)
    threshold = Q(threshold)
    start = time.perf_counter()
    if kind == "inf":
        b = ratio_inf_bound(scheme, t, f, target=threshold)
        ok = b > threshold
    elif kind == "sup":
        b = ratio_sup_bound(scheme, t, f, target=threshold)
        ok = b < threshold
    else:
        b = ratio_sup_bound(scheme, t, f, target=threshold, head_terms=1)
        ok = b < threshold
    elapsed = time.perf_counter() - start
    ok = ok and elapsed <= 1
    record(3, label, ok, "bound %s, %.2fs" % (b.str(10), elapsed))
    assert ok


def test_c03_linear_margin_is_not_attained_somewhere():
    # the quoted 1.00042 is contradicted by a single rigorous point value
    scheme = named_scheme("e:1,2,3,5")
    model = ratio_model(scheme, 3 - arb(5).sqrt(), [fmpq_poly([Q("9/10"), Q("-2/5")])] * 4)
    value = model.value(0, arb(fmpq(1047, 2000)))
    assert value < Q("1.00042")
    assert ratio_inf_bound(scheme, 3 - arb(5).sqrt(), [fmpq_poly([Q("9/10"), Q("-2/5")])],
                           target=Q("1.0004")) > Q("1.0004")


# 4 ---------------------------------------------------------------------------

PARTS = [("0.3640546", "0.3640548"), ("0.5739612", "0.5739617"), ("0.6113922", "0.6113925"),
         ("0.6433544", "0.6433548"), ("0.7093943", "0.7093945")]


@pytest.mark.parametrize("part", range(1, 6))
def test_c04_markov_lagrange_parts(part):
    lo, hi = PARTS[part - 1]
    _, bound, elapsed = _estimate("ml_part%d" % part, "1/50000000", m_init=8)
    ok = Q(lo) <= bound.t0 and bound.t1 <= Q(hi) and elapsed <= 300
    record(4, "part %d" % part, ok, "%s vs (%s, %s), %.0fs" % (_interval(bound, 10), lo, hi,
                                                               elapsed))
    assert ok


# 5 ---------------------------------------------------------------------------

def test_c05_table1_euler_maclaurin():
    start = time.perf_counter()
    reports = reproduce_table("clu")
    elapsed = time.perf_counter() - start
    for r in reports:
        record(5, r["name"], r["pass"], "[%s, %s]" % (r["t0"][:17], r["t1"][:17]))
    record(5, "total time", elapsed <= 120, "%.0fs" % elapsed)
    assert all(r["pass"] for r in reports) and elapsed <= 120


def test_c05_table1_integral_tail():
    _, bound, elapsed = _estimate("modular:2,2", "1e-8", tail_mode="integral", m_init=12)
    ok = compare(bound, "0.7194980248366", "1e-8")
    record(5, "integral 2(2)", ok, "%s, %.0fs" % (_interval(bound, 12), elapsed))
    assert ok


# 6 ---------------------------------------------------------------------------

def test_c06_table2_tails():
    reports = {r["name"]: r for r in reproduce_table("tails")}
    for n in (1, 2, 5):
        r = reports["N=%d" % n]
        record(6, r["name"], r["pass"], "[%s, %s]" % (r["t0"][:12], r["t1"][:12]))
    three, four = reports["N=3"], reports["N=4"]
    flagged = "flag" in three and "flag" in four and not (three["pass"] and four["pass"])
    record(6, "N=3/N=4 duplicate flagged", flagged, four.get("flag", "no flag"))
    assert all(reports["N=%d" % n]["pass"] for n in (1, 2, 5)) and flagged


# 7 ---------------------------------------------------------------------------

def test_c07_schottky():
    start = time.perf_counter()
    ok_all = True
    for theta, value, tol, eps in [("pi/3", "0.295546475", "5e-9", "1e-9"),
                                   ("2pi/9", "0.217765810255", "5e-12", "1e-12"),
                                   ("pi/9", "0.151183682035", "5e-12", "1e-12")]:
        _, bound, _ = _estimate("schottky:" + theta, eps)
        ok = compare(bound, value, tol)
        if theta == "pi/3":
            lo, hi = laplacian_bottom(bound)
            lam = Q("0.2081987565")
            ok_lam = lo <= lam + Q("2.5e-9") and lam - Q("2.5e-9") <= hi
            record(7, "lambda0", ok_lam, "[%s, %s]" % (decimal_down(lo, 12), decimal_up(hi, 12)))
            ok = ok and ok_lam
        record(7, theta, ok, _interval(bound, 14))
        ok_all = ok_all and ok
    elapsed = time.perf_counter() - start
    record(7, "total time", elapsed <= 180, "%.0fs" % elapsed)
    assert ok_all and elapsed <= 180


# 8 ---------------------------------------------------------------------------

def test_c08_nonlinear():
    _, bound, elapsed = _estimate("nonlinear_half", "1e-13", m_init=8)
    ok = compare(bound, "0.4934480908025", "5e-13") and elapsed <= 120
    record(8, "nonlinear", ok, "%s, %.0fs" % (_interval(bound, 15), elapsed))
    assert ok


# 9 ---------------------------------------------------------------------------

SPOT = [
    ("{1,2,7}", "e:1,2,7", "0.61790369546337565066", "1e-15", "1e-16"),
    ("{1,3,4}", "e:1,3,4", "0.60424225775648956551", "1e-15", "1e-16"),
    ("{2,3,4,5}", "e:2,3,4,5", "0.55963645016477671331", "1e-15", "1e-16"),
    ("{1,...,10}", "e:1,2,3,4,5,6,7,8,9,10", "0.9257375908875461236725506", "1e-15", "1e-16"),
    ("moreira", "moreira", "0.355400476833", "1e-12", "1e-13"),
    ("bk_even", "bk_even", "0.517357030937", "1e-12", "1e-13"),
]


@pytest.mark.parametrize("label,name,value,tol,eps", SPOT, ids=[s[0] for s in SPOT])
def test_c09_spot_rows(label, name, value, tol, eps):
    _, bound, elapsed = _estimate(name, eps, m_init=8)
    ok = compare(bound, value, tol)
    record(9, label, ok, "%s vs %s" % (_interval(bound, 18), value))
    assert ok


# 10 --------------------------------------------------------------------------

PROPERTY_TESTS = [
    "tests/test_rig.py::test_field_operations_enclose_exact_results",
    "tests/test_rig.py::test_ball_pow_encloses_high_precision_value",
    "tests/test_rig.py::test_poly_eval_over_ball_encloses_point_values",
    "tests/test_operator.py::test_moebius_image_polynomial_exact_identity",
    "tests/test_operator.py::test_ratio_derivative_bound_dominates_finite_differences",
    "tests/test_operator.py::test_closed_form_and_series_derivative_bounds_agree",
    "tests/test_driver.py::test_middle_thirds_encloses_log2_over_log3",
    "tests/test_driver.py::test_every_bisection_run_is_consistent",
    "tests/test_driver.py::test_split_point_is_dyadic_and_inside",
    "tests/test_certify.py::test_certificate_roundtrip_is_byte_identical",
    "tests/test_certify.py::test_certification_is_deterministic",
    "tests/test_cli.py::test_estimate_is_byte_deterministic",
]


def test_c10_property_suites(request):
    root = request.config.rootpath
    for target in PROPERTY_TESTS:
        proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                               target], cwd=root, capture_output=True, text=True)
        tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
        record(10, target.split("::")[1], proc.returncode == 0, tail)
    assert all(ok for _, ok, _ in RESULTS[10])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
