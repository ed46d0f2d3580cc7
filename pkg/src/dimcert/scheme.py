"""Finite Markov iterated function schemes and countable continued-fraction schemes.

A MarkovScheme has one state per interval X_k.  State j carries a branch
T_j, and M(j, k) = 1 means T_j may be applied to points of X_k, sending them
into X_j.  The transfer operator then reads

    (L_t f)_k(x) = sum_j M(j, k) f_j(T_j x) |T_j'(x)|^t,   x in X_k.

Branches are either Moebius maps (a x + b)/(c x + d) or expression trees.
Coefficients and endpoints are exact rationals, or (for reflection schemes
with irrational data) callables producing balls at the current precision.
"""

import ast
import hashlib
import json
import math
from collections import deque
from itertools import product

from flint import arb, ctx, fmpq

from .rig import outer_interval, parse_rational, rational_str


def _value(q):
    return q() if callable(q) else arb(q)


class MoebiusMap:
    """T(x) = (a x + b)/(c x + d)."""

    def __init__(self, a, b, c, d):
        self.coeffs = tuple(q if callable(q) else parse_rational(q) for q in (a, b, c, d))
        if self.is_rational:
            a, b, c, d = self.coeffs
            if a * d - b * c == 0:
                raise ValueError("degenerate Moebius map (ad - bc = 0)")

    @property
    def is_rational(self):
        return not any(callable(q) for q in self.coeffs)

    def balls(self):
        return tuple(_value(q) for q in self.coeffs)

    def det(self):
        a, b, c, d = self.coeffs
        if self.is_rational:
            return a * d - b * c
        a, b, c, d = self.balls()
        return a * d - b * c

    def __call__(self, x):
        a, b, c, d = self.balls()
        return (a * x + b) / (c * x + d)

    def deriv(self, x):
        a, b, c, d = self.balls()
        den = c * x + d
        return (a * d - b * c) / (den * den)

    def denominator_sign(self, domain):
        """Sign of c x + d on the domain; raises if it may vanish there."""
        lo, hi = outer_interval(domain)
        a, b, c, d = self.balls()
        den = c * arb(lo).union(arb(hi)) + d
        if den > 0:
            return 1
        if den < 0:
            return -1
        raise ValueError("Moebius pole inside domain [%s, %s]" % (lo, hi))

    def image(self, domain):
        """Enclosure of T(domain); Moebius maps are monotone away from the pole."""
        self.denominator_sign(domain)
        lo, hi = outer_interval(domain)
        if self.is_rational:
            a, b, c, d = self.coeffs
            ends = [(a * u + b) / (c * u + d) for u in (lo, hi)]
            return min(ends), max(ends)
        ends = [self(arb(u)) for u in (lo, hi)]
        return ends[0].min(ends[1]), ends[0].max(ends[1])

    def max_abs_deriv(self, domain):
        lo, hi = outer_interval(domain)
        vals = [abs(self.deriv(arb(u))) for u in (lo, hi)]
        return vals[0].max(vals[1])

    def to_json(self):
        if not self.is_rational:
            raise ValueError("only rational Moebius maps serialize directly")
        return [rational_str(q) for q in self.coeffs]

    def __repr__(self):
        if self.is_rational:
            return "MoebiusMap(%s)" % ", ".join(str(q) for q in self.coeffs)
        return "MoebiusMap(%s)" % ", ".join(q.str(10) for q in self.balls())


# Expression trees: ("x",), ("const", q), (op, left, right) with op in
# add/sub/mul/div, ("neg", e) and ("sqrt", e).

X = ("x",)


def const(q):
    return ("const", parse_rational(q))


def expr_eval(node, x):
    """Evaluate a tree on a ball or an arb_series."""
    kind = node[0]
    if kind == "x":
        return x
    if kind == "const":
        return arb(node[1])
    if kind == "neg":
        return -expr_eval(node[1], x)
    if kind == "sqrt":
        return expr_eval(node[1], x).sqrt()
    left, right = expr_eval(node[1], x), expr_eval(node[2], x)
    if kind == "add":
        return left + right
    if kind == "sub":
        return left - right
    if kind == "mul":
        return left * right
    if kind == "div":
        return left / right
    raise ValueError("unknown node %r" % (kind,))


def _is_zero(node):
    return node[0] == "const" and node[1] == 0


def _is_one(node):
    return node[0] == "const" and node[1] == 1


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return ("add", a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return ("neg", b)
    return ("sub", a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return const(0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return ("mul", a, b)


def _div(a, b):
    if _is_zero(a):
        return const(0)
    if _is_one(b):
        return a
    return ("div", a, b)


def expr_diff(node):
    """Symbolic derivative with respect to x."""
    kind = node[0]
    if kind == "x":
        return const(1)
    if kind == "const":
        return const(0)
    if kind == "neg":
        d = expr_diff(node[1])
        return const(0) if _is_zero(d) else ("neg", d)
    if kind == "sqrt":
        return _div(expr_diff(node[1]), _mul(const(2), node))
    u, v = node[1], node[2]
    du, dv = expr_diff(u), expr_diff(v)
    if kind == "add":
        return _add(du, dv)
    if kind == "sub":
        return _sub(du, dv)
    if kind == "mul":
        return _add(_mul(du, v), _mul(u, dv))
    if kind == "div":
        return _div(_sub(_mul(du, v), _mul(u, dv)), _mul(v, v))
    raise ValueError("unknown node %r" % (kind,))


_BINOPS = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div"}


def parse_expr(text):
    """Parse an arithmetic expression in x with + - * / and sqrt()."""

    def walk(n):
        if isinstance(n, ast.Expression):
            return walk(n.body)
        if isinstance(n, ast.Name) and n.id == "x":
            return X
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)):
            return const(repr(n.value) if isinstance(n.value, float) else n.value)
        if isinstance(n, ast.BinOp) and type(n.op) in _BINOPS:
            return (_BINOPS[type(n.op)], walk(n.left), walk(n.right))
        if isinstance(n, ast.BinOp) and isinstance(n.op, ast.Pow):
            if isinstance(n.right, ast.Constant) and n.right.value == 2:
                base = walk(n.left)
                return ("mul", base, base)
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return ("neg", walk(n.operand))
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.UAdd):
            return walk(n.operand)
        if (isinstance(n, ast.Call) and isinstance(n.func, ast.Name)
                and n.func.id == "sqrt" and len(n.args) == 1):
            return ("sqrt", walk(n.args[0]))
        raise ValueError("unsupported expression element: %s" % ast.dump(n))

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError("cannot parse expression %r" % text) from exc
    return walk(tree)


_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def expr_str(node):
    kind = node[0]
    if kind == "x":
        return "x"
    if kind == "const":
        q = node[1]
        return str(int(q.p)) if q.q == 1 else "(%d/%d)" % (int(q.p), int(q.q))
    if kind == "neg":
        return "(-%s)" % expr_str(node[1])
    if kind == "sqrt":
        return "sqrt(%s)" % expr_str(node[1])
    return "(%s %s %s)" % (expr_str(node[1]), _SYMBOLS[kind], expr_str(node[2]))


class ExprMap:
    """A branch given by an expression tree, with its derivative tree."""

    def __init__(self, tree):
        self.tree = parse_expr(tree) if isinstance(tree, str) else tree
        self.dtree = expr_diff(self.tree)

    def __call__(self, x):
        return expr_eval(self.tree, x)

    def deriv(self, x):
        return expr_eval(self.dtree, x)

    def image(self, domain, pieces=64):
        lo, hi = outer_interval(domain)
        step = (hi - lo) / pieces
        slopes = [self.deriv(arb(lo + step * i).union(arb(lo + step * (i + 1))))
                  for i in range(pieces)]
        if all(s > 0 for s in slopes) or all(s < 0 for s in slopes):
            ends = [self(arb(lo)), self(arb(hi))]
            return ends[0].min(ends[1]), ends[0].max(ends[1])
        out = None
        for i in range(pieces):
            v = self(arb(lo + step * i).union(arb(lo + step * (i + 1))))
            out = (v, v) if out is None else (out[0].min(v), out[1].max(v))
        return out

    def max_abs_deriv(self, domain, pieces=64):
        lo, hi = outer_interval(domain)
        step = (hi - lo) / pieces
        out = None
        for i in range(pieces):
            v = abs(self.deriv(arb(lo + step * i).union(arb(lo + step * (i + 1)))))
            out = v if out is None else out.max(v)
        return out

    def to_json(self):
        return expr_str(self.tree)

    def __repr__(self):
        return "ExprMap(%s)" % expr_str(self.tree)


def check_aperiodic(M):
    """True iff the 0/1 matrix is irreducible with period 1."""
    d = len(M)
    if d == 0 or any(len(row) != d for row in M):
        return False
    succ = [[k for k in range(d) if M[j][k]] for j in range(d)]
    pred = [[j for j in range(d) if M[j][k]] for k in range(d)]
    level = [None] * d
    level[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if level[v] is None:
                level[v] = level[u] + 1
                queue.append(v)
    if any(lv is None for lv in level):
        return False
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in pred[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if len(seen) != d:
        return False
    period = 0
    for u in range(d):
        for v in succ[u]:
            period = math.gcd(period, level[u] + 1 - level[v])
    return period == 1


class SchemeError(ValueError):
    pass


class MarkovScheme:
    """States with interval domains, one branch per state, and a transition matrix."""

    def __init__(self, labels, domains, branches, transition, description=None, name=None,
                 validate=True):
        self.labels = list(labels)
        self.domains = [tuple(dom) for dom in domains]
        self.branches = list(branches)
        self.transition = tuple(tuple(int(bool(v)) for v in row) for row in transition)
        self.description = description
        self.name = name
        d = len(self.labels)
        if not (len(self.domains) == len(self.branches) == len(self.transition) == d):
            raise SchemeError("states, domains, branches and matrix disagree in size")
        self.predecessors = [[j for j in range(d) if self.transition[j][k]] for k in range(d)]
        self._signs = {}
        if validate:
            self.validate()

    @property
    def size(self):
        return len(self.labels)

    @property
    def is_moebius(self):
        return all(isinstance(T, MoebiusMap) for T in self.branches)

    def domain_ball(self, k):
        lo, hi = self.domains[k]
        return _value(lo).union(_value(hi))

    def interval(self, k):
        """Rational outer hull of X_k."""
        lo, hi = self.domains[k]
        return outer_interval((_value(lo) if callable(lo) else lo,
                               _value(hi) if callable(hi) else hi))

    def endpoint_balls(self, k):
        lo, hi = self.domains[k]
        return _value(lo), _value(hi)

    def sign(self, j, k):
        """Sign of the Moebius denominator of branch j on X_k."""
        key = (j, k)
        if key not in self._signs:
            self._signs[key] = self.branches[j].denominator_sign(self.interval(k))
        return self._signs[key]

    def validate(self):
        if not check_aperiodic(self.transition):
            raise SchemeError("transition matrix is not aperiodic (reducible or periodic)")
        for k in range(self.size):
            lo, hi = self.endpoint_balls(k)
            if not lo < hi:
                raise SchemeError("empty or unverifiable domain for state %s" % (self.labels[k],))
        for j, T in enumerate(self.branches):
            target_lo, target_hi = self.interval(j)
            for k in range(self.size):
                if not self.transition[j][k]:
                    continue
                dom = self.interval(k)
                img = T.image(dom)
                if isinstance(img[0], fmpq):
                    inside = target_lo <= img[0] and img[1] <= target_hi
                else:
                    # fixed points on the boundary cannot be separated by balls
                    slack = arb(2) ** (-(ctx.prec // 2))
                    inside = (img[0] >= arb(target_lo) - slack
                              and img[1] <= arb(target_hi) + slack)
                if not inside:
                    raise SchemeError("branch %s does not map X_%s into X_%s"
                                      % (self.labels[j], self.labels[k], self.labels[j]))
                if not T.max_abs_deriv(dom) <= 1:
                    raise SchemeError("branch %s is not a contraction on X_%s"
                                      % (self.labels[j], self.labels[k]))

    def to_json(self):
        if self.description is None:
            raise SchemeError("scheme has no serializable description")
        return self.description

    def hash(self):
        return scheme_hash(self.to_json())

    def __repr__(self):
        return "MarkovScheme(%s, %d states)" % (self.name or "anonymous", self.size)


class CountableScheme:
    """Branches 1/(x + a + N k), k >= 0, on [0, 1].

    Modular(r, N) has a = r; Tail(N) has a = N + 1 and step 1.
    """

    def __init__(self, kind, r=None, N=None, name=None):
        if kind == "modular":
            if r is None or N is None or r < 1 or N < 1:
                raise SchemeError("modular scheme needs r >= 1 and N >= 1")
            self.offset, self.step = int(r), int(N)
            self.description = {"kind": "modular", "r": int(r), "N": int(N)}
        elif kind == "tail":
            if N is None or N < 0:
                raise SchemeError("tail scheme needs N >= 0")
            self.offset, self.step = int(N) + 1, 1
            self.description = {"kind": "tail", "N": int(N)}
        else:
            raise SchemeError("unknown countable kind %r" % kind)
        self.kind = kind
        self.r, self.N = r, N
        self.name = name
        self.domain = (fmpq(0), fmpq(1))

    size = 1
    labels = ["*"]

    def interval(self, k=0):
        return self.domain

    def digit(self, k):
        return self.offset + self.step * k

    def to_json(self):
        return self.description

    def hash(self):
        return scheme_hash(self.description)

    def __repr__(self):
        if self.kind == "modular":
            return "CountableScheme(modular r=%d N=%d)" % (self.offset, self.step)
        return "CountableScheme(tail N=%d)" % self.N


def scheme_hash(doc):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _gauss(n):
    return MoebiusMap(0, 1, 1, n)


def bernoulli_scheme(alphabet):
    """E_A: continued-fraction digits restricted to the alphabet, all transitions."""
    letters = [int(n) for n in alphabet]
    if not letters or len(set(letters)) != len(letters) or min(letters) < 1:
        raise SchemeError("alphabet must be distinct positive integers")
    d = len(letters)
    unit = (fmpq(0), fmpq(1))
    description = {"kind": "bernoulli", "alphabet": letters}
    return MarkovScheme([str(n) for n in letters], [unit] * d, [_gauss(n) for n in letters],
                        [[1] * d for _ in range(d)], description=description)


def _contains(word, forbidden):
    for w in forbidden:
        n = len(w)
        for i in range(len(word) - n + 1):
            if word[i:i + n] == w:
                return True
    return False


def _word(w):
    if isinstance(w, str):
        return tuple(int(ch) for ch in w)
    return tuple(int(ch) for ch in w)


def _block_map(word):
    """Moebius map of the continued-fraction word [0; w0, w1, ..., x]."""
    a, b, c, d = fmpq(1), fmpq(0), fmpq(0), fmpq(1)
    for n in word:
        # compose with x -> 1/(n + x)
        a, b, c, d = b, a + n * b, d, c + n * d
    return MoebiusMap(a, b, c, d)


def _prune(M, keep):
    """Drop states without successors or predecessors until stable."""
    while True:
        pruned = [i for i in keep
                  if any(M[i][k] for k in keep) and any(M[j][i] for j in keep)]
        if len(pruned) == len(keep):
            return keep
        keep = pruned


def forbidden_words_scheme(alphabet, forbidden, full_step=False):
    """Subshift of finite type on continued-fraction digits.

    States are words of length L = (longest forbidden word) - 1.  By default
    the scheme slides one digit at a time (branch 1/(w0 + x) on state w);
    with full_step each state applies its whole word and states follow each
    other block by block.
    """
    letters = sorted(int(n) for n in alphabet)
    if not letters or min(letters) < 1:
        raise SchemeError("alphabet must be positive integers")
    words = [_word(w) for w in forbidden]
    if any(len(w) < 2 for w in words):
        raise SchemeError("forbidden words must have length at least 2")
    description = {"kind": "forbidden", "alphabet": letters,
            "forbidden": ["".join(str(c) for c in w) for w in words]}
    if full_step:
        description["full_step"] = True
    if not words:
        scheme = bernoulli_scheme(letters)
        scheme.description = description
        return scheme
    block = max(len(w) for w in words) - 1
    states = [w for w in product(letters, repeat=block) if not _contains(w, words)]
    d = len(states)
    M = [[0] * d for _ in range(d)]
    for j, u in enumerate(states):
        for k, v in enumerate(states):
            if full_step:
                M[j][k] = int(not _contains(u + v, words))
            elif u[1:] == v[:-1] and not _contains(u + v[-1:], words):
                M[j][k] = 1
    keep = _prune(M, list(range(d)))
    if not keep:
        raise SchemeError("no admissible infinite words")
    states = [states[i] for i in keep]
    M = [[M[j][k] for k in keep] for j in keep]
    unit = (fmpq(0), fmpq(1))
    labels = ["".join(str(c) for c in w) for w in states]
    branches = [_block_map(w) if full_step else _gauss(w[0]) for w in states]
    return MarkovScheme(labels, [unit] * len(states), branches, M, description=description)


def _square(x):
    return x * x


def _schottky_data(q, j):
    """Centre and radius of reflection j for theta = q*pi, as ball callables."""
    third = fmpq(j, 3)

    def plus():
        return arb(third + q / 4).tan_pi()

    def minus():
        return arb(third - q / 4).tan_pi()

    def centre():
        return (plus() + minus()) / 2

    def radius():
        return abs(plus() - minus()) / 2

    return centre, radius


def schottky_scheme(theta):
    """Reflection scheme of three geodesics; theta is the rational q with angle q*pi."""
    q = parse_rational(theta)
    if not (0 < q < fmpq(2, 3)):
        raise SchemeError("theta must lie strictly between 0 and 2*pi/3")
    domains, branches = [], []
    for j in range(3):
        centre, radius = _schottky_data(q, j)
        domains.append((lambda c=centre, r=radius: c() - r(),
                        lambda c=centre, r=radius: c() + r()))
        branches.append(MoebiusMap(centre, lambda c=centre, r=radius: _square(r()) - _square(c()),
                                   fmpq(1), lambda c=centre: -c()))
    description = {"kind": "schottky", "theta": "%s π" % rational_str(q)}
    scheme = MarkovScheme(["0", "1", "2"], domains, branches,
                          [[0, 1, 1], [1, 0, 1], [1, 1, 0]], description=description, validate=False)
    his = [scheme.endpoint_balls(k) for k in range(3)]
    order = sorted(range(3), key=lambda k: float(his[k][0].mid()))
    for a, b in zip(order, order[1:]):
        if not his[a][1] < his[b][0]:
            raise SchemeError("geodesics overlap for theta = %s pi" % q)
    scheme.validate()
    scheme.theta = q
    return scheme


def nonlinear_half_scheme():
    """Two inverse branches (x -/+ sqrt(8 + x^2))/4 on [-1, 1]."""
    trees = ["(x - sqrt(8 + x*x))/4", "(x + sqrt(8 + x*x))/4"]
    return expr_scheme([(("-1", "1"), t) for t in trees], [[1, 1], [1, 1]])


def expr_scheme(states, transition):
    """Scheme from (domain, expression) pairs."""
    domains = [(parse_rational(lo), parse_rational(hi)) for (lo, hi), _ in states]
    branches = [ExprMap(t) for _, t in states]
    description = {"kind": "expr",
            "states": [{"domain": [rational_str(lo), rational_str(hi)], "map": b.to_json()}
                       for (lo, hi), b in zip(domains, branches)],
            "transition": [list(map(int, row)) for row in transition]}
    return MarkovScheme([str(i) for i in range(len(states))], domains, branches,
                        transition, description=description)


def moebius_scheme(states, transition):
    """Scheme from (domain, (a, b, c, d)) pairs with rational data."""
    domains = [(parse_rational(lo), parse_rational(hi)) for (lo, hi), _ in states]
    branches = [MoebiusMap(*coeffs) for _, coeffs in states]
    description = {"kind": "moebius",
            "states": [{"domain": [rational_str(lo), rational_str(hi)], "map": b.to_json()}
                       for (lo, hi), b in zip(domains, branches)],
            "transition": [list(map(int, row)) for row in transition]}
    return MarkovScheme([str(i) for i in range(len(states))], domains, branches,
                        transition, description=description)


def modular_scheme(r, N):
    return CountableScheme("modular", r=r, N=N)


def tail_scheme(N):
    return CountableScheme("tail", N=N)


def _parse_theta(text):
    text = str(text).replace("π", "").replace("pi", "").strip()
    if text.endswith("*"):
        text = text[:-1].strip()
    return parse_rational(text or "1")


def scheme_from_json(doc):
    """Build and validate a scheme from its JSON description."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        kind = doc["kind"]
        if kind == "bernoulli":
            return bernoulli_scheme(doc["alphabet"])
        if kind == "forbidden":
            return forbidden_words_scheme(doc["alphabet"], doc["forbidden"],
                                          full_step=bool(doc.get("full_step", False)))
        if kind == "schottky":
            return schottky_scheme(_parse_theta(doc["theta"]))
        if kind == "expr":
            return expr_scheme([((s["domain"][0], s["domain"][1]), s["map"])
                                for s in doc["states"]], doc["transition"])
        if kind == "moebius":
            return moebius_scheme([((s["domain"][0], s["domain"][1]), tuple(s["map"]))
                                   for s in doc["states"]], doc["transition"])
        if kind == "modular":
            return modular_scheme(int(doc["r"]), int(doc["N"]))
        if kind == "tail":
            return tail_scheme(int(doc["N"]))
    except (KeyError, TypeError) as exc:
        raise SchemeError("malformed scheme document: %s" % exc) from exc
    raise SchemeError("unknown scheme kind %r" % (doc.get("kind"),))
