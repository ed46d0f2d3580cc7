"""Display data: sampled test functions and ratios, and report figures.

Everything here is plain floating point and carries no rigour; it exists to
draw pictures of objects whose properties are proved elsewhere.
"""

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from flint import arb, fmpq  # noqa: E402

from .certify import ratio_model  # noqa: E402
from .rig import poly_eval, precision  # noqa: E402

STYLE = {"figure.figsize": (6.4, 4.0), "axes.grid": True, "grid.alpha": 0.3,
         "font.size": 9, "axes.spines.top": False, "axes.spines.right": False}


def sample_points(interval, points):
    a, b = interval
    return [a + (b - a) * fmpq(i, points - 1) for i in range(points)]


def sample_testfn(scheme, f, points=201):
    """Rows (state, x, f_k(x)) on an even grid over every state's interval."""
    rows = []
    for k in range(scheme.size):
        for x in sample_points(scheme.interval(k), points):
            rows.append((scheme.labels[k], float(x), float(poly_eval(f[k], x).mid())))
    return rows


def sample_ratio(scheme, t, f, points=201, prec=128):
    """Rows (state, x, (L_t f)_k(x) / f_k(x)) at ball midpoints."""
    rows = []
    with precision(prec):
        model = ratio_model(scheme, t, f)
        for k in range(scheme.size):
            for x in sample_points(scheme.interval(k), points):
                rows.append((scheme.labels[k], float(x), float(model.value(k, arb(x)).mid())))
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([("%.17g" % v) if isinstance(v, float) else v for v in row])


def plot_samples(rows, path, ylabel, title="", band=None):
    """One curve per state; band=(lo, hi) shades a certified range."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        states = []
        for state, _, _ in rows:
            if state not in states:
                states.append(state)
        for state in states:
            xs = [x for s, x, _ in rows if s == state]
            ys = [y for s, _, y in rows if s == state]
            ax.plot(xs, ys, lw=1.2, label="state %s" % state if len(states) > 1 else None)
        if band is not None:
            ax.axhspan(band[0], band[1], color="tab:green", alpha=0.15, label="certified range")
        ax.set_xlabel("x")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(states) > 1 or band is not None:
            ax.legend(fontsize=7, ncol=2 if len(states) > 6 else 1)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def plot_report(reports, path, title=""):
    """Certified width and distance to the published value, per table row."""
    names = [r["name"] for r in reports]
    width, dist, tol, ok = [], [], [], []
    for r in reports:
        t0, t1 = float(r["t0"]), float(r["t1"])
        value, t = float(r["paper_value"]), float(r["paper_tol"])
        width.append(_log10(t1 - t0))
        inside = t0 <= value <= t1
        dist.append(_log10(0 if inside else min(abs(value - t0), abs(value - t1))))
        tol.append(_log10(t))
        ok.append(bool(r["pass"]))
    ys = list(range(len(names)))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 1.2 + 0.32 * len(names)))
        ax.scatter(width, ys, marker="|", s=120, color="k", label="log10 certified width")
        ax.scatter(tol, ys, marker="x", color="tab:blue", label="log10 published tolerance")
        colours = ["tab:green" if g else "tab:red" for g in ok]
        ax.scatter(dist, ys, marker="o", color=colours,
                   label="log10 gap to published value")
        ax.set_yticks(ys)
        ax.set_yticklabels(names, fontsize=7)
        ax.invert_yaxis()
        ax.set_xlabel("log10")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7, loc="best")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def _log10(x):
    # the floor keeps rows whose interval contains the value on the chart
    return math.log10(x) if x > 0 else -30.0
