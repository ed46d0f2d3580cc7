"""Command line interface.

Exit codes: 0 success or Certified, 1 Refuted or a failed table row,
2 Inconclusive or a resource cap, 3 usage or parse error.
"""

import argparse
import json
import os
import sys

from .certify import (CERTIFIED, INCONCLUSIVE, LOWER, REFUTED, UPPER, Certificate,
                      certify_bound, ratio_inf_bound, ratio_sup_bound, verify_certificate)
from .driver import (TABLES, EstimateConfig, catalog_names, check_bracket_invariants,
                     decimal_down, decimal_up, estimate_dimension, laplacian_bottom,
                     named_scheme, reproduce_table, table_rows)
from .rig import default_prec, parse_rational, precision, rational_str
from .scheme import SchemeError, scheme_from_json
from .spectral import TestFunction, candidate

EXIT_OK, EXIT_REFUTED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
STATUS_EXIT = {CERTIFIED: EXIT_OK, REFUTED: EXIT_REFUTED, INCONCLUSIVE: EXIT_INCONCLUSIVE}

# the 200-digit E2 run: many nodes and a wide working precision
EXTENDED = {"m_init": 40, "m_max": 275, "prec": 768, "eps": "1e-200"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _add_scheme(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--scheme", help="scheme JSON file")
    g.add_argument("--name", help="catalog name (see `dimcert catalog`)")


def load_scheme(args):
    if getattr(args, "scheme", None):
        try:
            with open(args.scheme) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError("cannot read scheme %s: %s" % (args.scheme, exc)) from exc
        scheme = scheme_from_json(doc)
        scheme.name = os.path.basename(args.scheme)
        return scheme
    if getattr(args, "name", None):
        return named_scheme(args.name)
    raise UsageError("give --scheme or --name")


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _dump(doc):
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _print(doc):
    print(json.dumps(doc, indent=1, sort_keys=True))


def _reverify(cert, scheme, tail_mode):
    return verify_certificate(Certificate.from_json(cert.to_json()), scheme,
                              tail_mode=tail_mode).status


def cmd_estimate(args):
    scheme = load_scheme(args)
    settings = dict(EXTENDED) if args.extended else {}
    for key in ("eps", "m_init", "m_max", "prec"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    settings.setdefault("eps", "1e-8")
    settings.setdefault("prec", default_prec())
    config = EstimateConfig(tail_mode=args.tail_mode, **settings)

    def progress(step):
        if args.verbose:
            print("  %-5s t=%s  [%s, %s]  m=%d prec=%d" % (
                step.direction, decimal_down(step.t, 20), decimal_down(step.t0, 20),
                decimal_up(step.t1, 20), step.m, step.prec), file=sys.stderr)

    bound = estimate_dimension(scheme, config, progress)
    out = args.out
    summary = {"scheme": scheme.name, "scheme_hash": scheme.hash(),
               "interval": [decimal_down(bound.t0, 30), decimal_up(bound.t1, 30)],
               "t0": rational_str(bound.t0), "t1": rational_str(bound.t1),
               "width": "%.3e" % float(bound.width), "m_final": bound.m_final,
               "prec": bound.prec_final, "iterations": bound.iterations,
               "failed": bound.failed, "reason": bound.reason,
               "invariants": check_bracket_invariants(bound),
               "eps": rational_str(config.eps), "tail_mode": config.tail_mode}
    if scheme.name and scheme.name.lower().startswith("schottky"):
        lo, hi = laplacian_bottom(bound)
        summary["lambda0"] = [decimal_down(lo, 30), decimal_up(hi, 30)]
    status = {}
    _write(os.path.join(out, "scheme.json"), _dump(scheme.to_json()))
    for cert, fname in ((bound.cert_lower, "lower.cert.json"),
                        (bound.cert_upper, "upper.cert.json")):
        if cert is None:
            continue
        _write(os.path.join(out, fname), cert.dumps())
        status[cert.direction] = _reverify(cert, scheme, config.tail_mode)
    summary["reverified"] = status
    _write(os.path.join(out, "summary.json"), _dump(summary))
    _print(dict(summary, wall_ms=bound.wall_ms))
    if bound.failed:
        return EXIT_INCONCLUSIVE
    if any(s != CERTIFIED for s in status.values()):
        return STATUS_EXIT.get(REFUTED if REFUTED in status.values() else INCONCLUSIVE)
    return EXIT_OK


def _load_testfn(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError("cannot read test function %s: %s" % (path, exc)) from exc
    if isinstance(doc, dict):
        doc = doc.get("coefficients")
    try:
        return TestFunction.from_json(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError("malformed test function: %s" % exc) from exc


def cmd_certify(args):
    scheme = load_scheme(args)
    t = parse_rational(args.t)
    prec = args.prec or default_prec()
    if args.testfn:
        f = _load_testfn(args.testfn)
        if len(f) == 1 and scheme.size > 1:
            f = TestFunction(list(f) * scheme.size)
        lam = None
    else:
        lam, f = candidate(scheme, t, args.m, prec)
        lam = float(lam)
    if args.direction == "auto":
        directions = (LOWER, UPPER) if lam is None or lam >= 1 else (UPPER, LOWER)
    else:
        directions = (args.direction,)
    verdict = None
    for direction in directions:
        verdict = certify_bound(scheme, t, direction, f, prec=prec, tail_mode=args.tail_mode)
        if verdict.certified:
            break
    doc = {"t": rational_str(t), "status": verdict.status, "lambda": lam,
           "direction": verdict.certificate.direction if verdict.certified else args.direction}
    if verdict.bound is not None:
        doc["bound"] = verdict.bound.str(20)
    if verdict.detail:
        doc["detail"] = verdict.detail
    if verdict.certified:
        cert = verdict.certificate
        doc["margin"] = rational_str(cert.margin)
        doc["reverified"] = _reverify(cert, scheme, args.tail_mode)
        if args.out:
            _write(args.out, cert.dumps())
            doc["certificate"] = args.out
        _print(doc)
        return STATUS_EXIT[doc["reverified"]]
    _print(doc)
    return STATUS_EXIT[verdict.status]


def cmd_verify(args):
    scheme = load_scheme(args)
    try:
        with open(args.certificate) as fh:
            cert = Certificate.from_json(fh.read())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError("cannot read certificate: %s" % exc) from exc
    verdict = verify_certificate(cert, scheme, tail_mode=args.tail_mode)
    doc = {"status": verdict.status, "direction": cert.direction, "t": rational_str(cert.t),
           "claimed_margin": rational_str(cert.margin)}
    if verdict.bound is not None:
        doc["bound"] = verdict.bound.str(20)
    if verdict.detail:
        doc["detail"] = verdict.detail
    _print(doc)
    return STATUS_EXIT[verdict.status]


def cmd_catalog(args):
    if args.table:
        for row in table_rows(args.table):
            print("%-24s %-32s %s +- %s" % (row.name, row.scheme, row.value, row.tol))
        return EXIT_OK
    print("schemes:")
    for name in catalog_names():
        print("  " + name)
    print("tables:")
    for name in sorted(TABLES):
        print("  " + name)
    return EXIT_OK


def _split_rows(values):
    rows = []
    for v in values or []:
        rows.extend(r.strip() for r in v.split(";") if r.strip())
    return rows or None


def cmd_reproduce(args):
    from .plotting import plot_report

    rows = _split_rows(args.rows)
    if rows and not table_rows(args.table, rows):
        raise UsageError("no rows of table %s match %s" % (args.table, rows))
    reports = reproduce_table(args.table, rows, eps_scale=parse_rational(args.eps_scale),
                              jobs=args.jobs, prec=args.prec)
    out = args.out or "reproduce_%s.jsonl" % args.table
    _write(out, "".join(json.dumps(r, sort_keys=True) + "\n" for r in reports))
    figure = os.path.splitext(out)[0] + ".png"
    plot_report(reports, figure, title="table %s" % args.table)
    for r in reports:
        flag = "  [%s]" % r["flag"] if "flag" in r else ""
        print("%-4s %-22s [%s, %s]  published %s +- %s%s" % (
            "ok" if r["pass"] else "FAIL", r["name"], r["t0"][:24], r["t1"][:24],
            r["paper_value"], r["paper_tol"], flag))
    print("report: %s\nfigure: %s" % (out, figure))
    return EXIT_OK if all(r["pass"] for r in reports) else EXIT_REFUTED


def plot_t(scheme, args):
    """The requested t, or a coarse certified estimate of the dimension."""
    if args.t is not None:
        return parse_rational(args.t)
    bound = estimate_dimension(scheme, EstimateConfig(eps="1e-6", prec=args.prec))
    return bound.t0


def cmd_plotdata(args):
    from .plotting import plot_samples, sample_ratio, sample_testfn, write_csv

    scheme = load_scheme(args)
    prec = args.prec or default_prec()
    t = plot_t(scheme, args)
    lam, f = candidate(scheme, t, args.m, prec)
    label = scheme.name or "scheme"
    out = args.out or "%s_%s.csv" % (label.replace(":", "_").replace("/", "_"), args.what)
    figure = os.path.splitext(out)[0] + ".png"
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    if args.what == "testfn":
        rows = sample_testfn(scheme, f, args.points)
        write_csv(out, ["state", "x", "f"], rows)
        plot_samples(rows, figure, "f(x)", "test function at t = %s" % decimal_down(t, 12))
    else:
        rows = sample_ratio(scheme, t, f, args.points, prec)
        with precision(prec):
            lo = float(ratio_inf_bound(scheme, t, f, target=0).lower())
            hi = float(ratio_sup_bound(scheme, t, f, target=10**9).upper())
        write_csv(out, ["state", "x", "ratio"], rows)
        plot_samples(rows, figure, "(L f)(x) / f(x)", "ratio at t = %s" % decimal_down(t, 12),
                     band=(lo, hi))
    print("t = %s, lambda = %.12g\ncsv: %s\nfigure: %s" % (rational_str(t), float(lam), out,
                                                           figure))
    return EXIT_OK


def build_parser():
    parser = Parser(prog="dimcert", description="Certified Hausdorff dimension bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("estimate", help="certified bracket around the dimension")
    _add_scheme(p)
    p.add_argument("--eps", help="target bracket width (default 1e-8)")
    p.add_argument("--m-init", type=int, help="initial number of nodes (default 6)")
    p.add_argument("--m-max", type=int, help="node cap (default 512)")
    p.add_argument("--prec", type=int, help="working precision in bits (default 128 "
                   "or DIMCERT_PREC)")
    p.add_argument("--tail-mode", choices=["euler_maclaurin", "integral"],
                   default="euler_maclaurin", help="Hurwitz tail bound for countable schemes")
    p.add_argument("--extended", action="store_true",
                   help="200-digit settings: m up to 275, 768 bits, eps 1e-200 (slow)")
    p.add_argument("--out", default=".", help="directory for certificates and summary")
    p.add_argument("-v", "--verbose", action="store_true", help="print bisection steps")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("certify", help="prove dim > t or dim < t with one test function")
    _add_scheme(p)
    p.add_argument("--t", required=True, help="rational or decimal t")
    p.add_argument("--direction", choices=[LOWER, UPPER, "auto"], default="auto")
    p.add_argument("--testfn", help="JSON coefficients (per state, constant term first) "
                   "or a certificate; default: collocation candidate")
    p.add_argument("--m", type=int, default=12, help="nodes for the candidate (default 12)")
    p.add_argument("--prec", type=int)
    p.add_argument("--tail-mode", choices=["euler_maclaurin", "integral"],
                   default="euler_maclaurin")
    p.add_argument("--out", help="certificate file to write")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="re-verify a certificate")
    p.add_argument("certificate")
    _add_scheme(p)
    p.add_argument("--tail-mode", choices=["euler_maclaurin", "integral"],
                   default="euler_maclaurin")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("catalog", help="list named schemes and tables")
    p.add_argument("--table", choices=sorted(TABLES), help="list the rows of a table")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("reproduce", help="reproduce a published table")
    p.add_argument("--table", required=True, choices=sorted(TABLES))
    p.add_argument("--rows", action="append",
                   help="row names, ';'-separated (e.g. '{1,2};{1,3}'); repeatable")
    p.add_argument("--eps-scale", default="1", help="multiply every row's eps")
    p.add_argument("--jobs", type=int, default=1, help="rows run in parallel")
    p.add_argument("--prec", type=int)
    p.add_argument("--out", help="JSONL report path (figure written alongside)")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("plotdata", help="sampled test function or ratio (not certified)")
    _add_scheme(p)
    p.add_argument("--t", help="t for the candidate (default: coarse estimate)")
    p.add_argument("--what", choices=["testfn", "ratio"], default="testfn")
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--prec", type=int)
    p.add_argument("--out", help="CSV path (figure written alongside)")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SchemeError, KeyError) as exc:
        print("dimcert: error: %s" % (exc.args[0] if exc.args else exc), file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print("dimcert: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
