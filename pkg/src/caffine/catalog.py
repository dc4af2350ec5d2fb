"""Model hypersurfaces with parallel cubic form, as DSL charts.

Each constructor validates its parameters against the region where the
model is a locally strongly convex hypersurface and returns an
ImmersionChart.  ``CATALOG`` lists the named entries used by the CLI and by
the acceptance tests together with the label the classifier should return.
"""

from dataclasses import dataclass, field
import itertools
import math

from .errors import InvalidParameters
from .geometry import ImmersionChart


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# quadrics and products of powers


def make_quadric(n, eps=1):
    """Graph chart of the unit sphere (eps=+1) or the upper hyperboloid sheet (eps=-1)."""
    n = int(n)
    if n < 1:
        raise InvalidParameters("n must be at least 1")
    if eps not in (1, -1):
        raise InvalidParameters("eps must be +1 or -1")
    sq = " + ".join(f"u{i}^2" for i in range(1, n + 1))
    if eps == 1:
        last = f"sqrt(1 - ({sq}))"
        half = min(0.5, 0.9 / math.sqrt(n))
        name = f"sphere{n}"
    else:
        last = f"sqrt(1 + {sq})"
        half = 0.5
        name = f"hyperboloid{n}"
    comps = [f"u{i}" for i in range(1, n + 1)] + [last]
    return ImmersionChart(name, n, tuple(comps), tuple((-half, half) for _ in range(n)))


def validate_power(alphas):
    a = [float(x) for x in alphas]
    if len(a) < 2:
        raise InvalidParameters("need at least two exponents")
    if all(x > 0 for x in a):
        return a
    if a[0] < 0 and all(x > 0 for x in a[1:]):
        if sum(a) < 0:
            return a
        raise InvalidParameters(f"alpha_1 < 0 requires sum(alpha) < 0, got {sum(a):.6g}")
    raise InvalidParameters("need all alpha_i > 0, or alpha_1 < 0 with the others positive")


def make_power(alphas):
    """x_1^a_1 ... x_{n+1}^a_{n+1} = 1 solved for x_{n+1} over a box around (1, ..., 1)."""
    a = validate_power(alphas)
    n = len(a) - 1
    params = {f"a{i + 1}": v for i, v in enumerate(a)}
    prod = "*".join(f"u{i}^a{i}" for i in range(1, n + 1))
    last = f"({prod})^(-1/a{n + 1})"
    comps = [f"u{i}" for i in range(1, n + 1)] + [last]
    return ImmersionChart(
        f"power{n}", n, tuple(comps), tuple((0.7, 1.3) for _ in range(n)), params
    )


def validate_complex_power(n, alphas):
    a = [float(x) for x in alphas]
    if n < 2:
        raise InvalidParameters("n must be at least 2")
    if len(a) != n + 1:
        raise InvalidParameters(f"need {n + 1} exponents, got {len(a)}")
    head = a[: n - 1]
    if any(x >= 0 for x in head):
        raise InvalidParameters("alpha_i < 0 is required for i < n")
    s = 2 * a[n - 1] + sum(head)
    if s <= 0:
        raise InvalidParameters(f"2 alpha_n + sum_(i<n) alpha_i > 0 is required, got {s:.6g}")
    return a


def make_complex_power(n, alphas):
    """x_1^a_1 ... x_{n-1}^a_{n-1} (x_n^2+x_{n+1}^2)^a_n exp(a_{n+1} atan(x_n/x_{n+1})) = 1.

    Uses x_n = r sin(t), x_{n+1} = r cos(t) with t = u_n and solves for r.
    """
    n = int(n)
    a = validate_complex_power(n, alphas)
    params = {f"a{i + 1}": v for i, v in enumerate(a)}
    terms = [f"u{i}^a{i}" for i in range(1, n)]
    r = f"(({'*'.join(terms)})^(-1/(2*a{n})))*exp(-a{n + 1}*u{n}/(2*a{n}))"
    comps = [f"u{i}" for i in range(1, n)] + [f"{r}*sin(u{n})", f"{r}*cos(u{n})"]
    dom = [(0.7, 1.3)] * (n - 1) + [(-0.3, 0.3)]
    return ImmersionChart(f"complex_power{n}", n, tuple(comps), tuple(dom), params)


def validate_log_canonical(n, v, alphas):
    a = [float(x) for x in alphas]
    if n < 1:
        raise InvalidParameters("n must be at least 1")
    if not 2 <= v <= n + 1:
        raise InvalidParameters(f"v must satisfy 2 <= v <= n+1, got {v}")
    if len(a) != n + 1 - v:
        raise InvalidParameters(f"need {n + 1 - v} exponents for v={v}, got {len(a)}")
    if any(x <= 0 for x in a):
        raise InvalidParameters("alpha_i > 0 is required")
    if sum(a) >= 1:
        raise InvalidParameters(f"sum(alpha) < 1 is required, got {sum(a):.6g}")
    return a


def make_log_canonical(n, v, alphas=()):
    """x_{n+1} = (x_2^2+...+x_{v-1}^2)/(2 x_1) - x_1(-ln x_1 + sum_{i>=v} a_i ln x_i)."""
    n, v = int(n), int(v)
    a = validate_log_canonical(n, v, alphas)
    params = {f"a{v + i}": x for i, x in enumerate(a)}
    quad = " + ".join(f"u{i}^2" for i in range(2, v))
    logs = "".join(f" + a{i}*ln(u{i})" for i in range(v, n + 1))
    last = f"-u1*(-ln(u1){logs})"
    if quad:
        last = f"({quad})/(2*u1) {last}"
    comps = [f"u{i}" for i in range(1, n + 1)] + [last]
    dom = [(0.7, 1.3)] + [(-0.3, 0.3)] * (v - 2) + [(0.7, 1.3)] * (n + 1 - v)
    return ImmersionChart(f"log_canonical{n}_{v}", n, tuple(comps), tuple(dom), params)


def make_case_b(n):
    """(e^u1, u2 e^u1, ..., un e^u1, (sum_{k>=2} u_k^2/2 + u1) e^u1)."""
    n = int(n)
    if n < 2:
        raise InvalidParameters("n must be at least 2")
    comps = ["exp(u1)"] + [f"u{k}*exp(u1)" for k in range(2, n + 1)]
    sq = " + ".join(f"u{k}^2" for k in range(2, n + 1))
    comps.append(f"(0.5*({sq}) + u1)*exp(u1)")
    return ImmersionChart(f"case_b{n}", n, tuple(comps), tuple((-0.3, 0.3) for _ in range(n)))


# ---------------------------------------------------------------------------
# flat surfaces with parallel cubic form


def surface6_discriminant(mu, a1, eps):
    return a1 * a1 + 4.0 * (mu * mu - eps)


def surface_cubic_max(lambda1, mu, a1, samples=3600):
    """Maximum of l c^3 + 3 mu c s^2 + a1 s^3 over the unit circle (c = cos, s = sin)."""
    best = -math.inf
    for k in range(samples):
        t = 2 * math.pi * k / samples
        c, s = math.cos(t), math.sin(t)
        best = max(best, lambda1 * c**3 + 3 * mu * c * s * s + a1 * s**3)
    return best


def validate_surface6(branch, lambda1, mu, a1, tol=1e-9):
    if branch not in ("a", "b", "c"):
        raise InvalidParameters(f"branch must be a, b or c, got {branch!r}")
    lambda1, mu, a1 = float(lambda1), float(mu), float(a1)
    e = lambda1 * mu - mu * mu
    if abs(abs(e) - 1.0) > tol:
        raise InvalidParameters(f"eps - lambda1 mu + mu^2 = 0 needs eps = +-1, got {e:.9g}")
    eps = 1 if e > 0 else -1
    if lambda1 <= 0:
        raise InvalidParameters("lambda1 > 0 is required")
    if lambda1 * lambda1 - 4 * eps <= 0:
        raise InvalidParameters("lambda1^2 - 4 eps > 0 is required")
    if lambda1 <= 2 * mu:
        raise InvalidParameters("lambda1 > 2 mu is required")
    d = surface6_discriminant(mu, a1, eps)
    if branch == "a" and not d > tol:
        raise InvalidParameters(f"branch a needs a1^2 + 4(mu^2 - eps) > 0, got {d:.6g}")
    if branch == "b" and not d < -tol:
        raise InvalidParameters(f"branch b needs a1^2 + 4(mu^2 - eps) < 0, got {d:.6g}")
    if branch == "c":
        if abs(d) > tol:
            raise InvalidParameters(f"branch c needs a1^2 + 4(mu^2 - eps) = 0, got {d:.6g}")
        if a1 == 0 or eps != 1:
            raise InvalidParameters("branch c needs a1 != 0 and eps = 1")
    fmax = surface_cubic_max(lambda1, mu, a1)
    if fmax > lambda1 * (1 + 1e-9):
        raise InvalidParameters(
            f"lambda1 must be the maximum of the cubic form, but it reaches {fmax:.6g}"
        )
    return eps, d


def make_surface6(branch, lambda1, mu, a1):
    """Flat surface with K_{E1}E1 = l E1, K_{E1}E2 = mu E2, K_{E2}E2 = mu E1 + a1 E2."""
    eps, d = validate_surface6(branch, lambda1, mu, a1)
    params = {"l": float(lambda1), "m": float(mu), "a": float(a1)}
    if branch == "a":
        params["w"] = math.sqrt(d)
        comps = (
            "exp((l - m)*u1)",
            "exp(0.5*(a + w)*u2 + m*u1)",
            "exp(0.5*(a - w)*u2 + m*u1)",
        )
    elif branch == "b":
        params["w"] = math.sqrt(-d)
        comps = (
            "exp((l - m)*u1)",
            "sin(0.5*w*u2)*exp(0.5*a*u2 + m*u1)",
            "cos(0.5*w*u2)*exp(0.5*a*u2 + m*u1)",
        )
    else:
        comps = (
            "exp(0.5*a*u2 + m*u1)",
            "exp((l - m)*u1)",
            "0.5*a*u2*exp(0.5*a*u2 + m*u1)",
        )
    dom = ((-0.3, 0.3), (-0.3, 0.3))
    return ImmersionChart(f"surface6_{branch}", 2, comps, dom, params)


def surface6_params(branch, lambda1=3.0, eps=1):
    """Convenient valid (lambda1, mu, a1) for a branch."""
    mu = 0.5 * (lambda1 - math.sqrt(lambda1 * lambda1 - 4 * eps))
    base = 4.0 * (eps - mu * mu)
    if branch == "a":
        a1 = math.sqrt(max(base, 0.0) + 0.5)
    elif branch == "b":
        a1 = math.sqrt(max(base - 0.5, 0.0))
    else:
        a1 = math.sqrt(base)
    return lambda1, mu, a1


# ---------------------------------------------------------------------------
# determinant charts


def _pmul(p, q):
    out = {}
    for ma, ca in p.items():
        for mb, cb in q.items():
            key = tuple(sorted(ma + mb))
            out[key] = out.get(key, 0) + ca * cb
    return {k: v for k, v in out.items() if v != 0}


def _padd(p, q, sign=1):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0) + sign * v
    return {k: v for k, v in out.items() if v != 0}


def _perm_sign(perm):
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _det_poly(entries, skip=None):
    """Leibniz expansion; ``skip`` drops permutations fixing that diagonal slot."""
    m = len(entries)
    total = {}
    for perm in itertools.permutations(range(m)):
        if skip is not None and perm[skip] == skip:
            continue
        term = {(): _perm_sign(perm)}
        for i in range(m):
            term = _pmul(term, entries[i][perm[i]])
        total = _padd(total, term)
    return total


def _poly_str(p, names):
    parts = []
    for mono, c in sorted(p.items()):
        c = c.real if isinstance(c, complex) else c
        if c == 0:
            continue
        factor = "*".join(names[v] for v in mono)
        coef = abs(c)
        sign = "-" if c < 0 else "+"
        if not factor:
            body = _fmt(coef)
        elif coef == 1:
            body = factor
        else:
            body = f"{_fmt(coef)}*{factor}"
        parts.append((sign, body))
    if not parts:
        return "0"
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def make_det_sym(m):
    """Symmetric m x m matrices with det = 1, last diagonal entry solved."""
    m = int(m)
    if m < 3:
        raise InvalidParameters("m must be at least 3")
    names, var = {}, 0
    sym = {}
    for i in range(m):
        for j in range(i, m):
            if (i, j) == (m - 1, m - 1):
                continue
            var += 1
            key = f"s{i}{j}"
            sym[(i, j)] = key
            names[key] = f"(1 + u{var})" if i == j else f"u{var}"
    entries = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            a, b = min(i, j), max(i, j)
            entries[i][j] = {} if (a, b) == (m - 1, m - 1) else {(sym[(a, b)],): 1}
    minor = _det_poly([row[: m - 1] for row in entries[: m - 1]])
    rest = _det_poly(entries, skip=m - 1)
    last = f"(1 - ({_poly_str(rest, names)}))/({_poly_str(minor, names)})"
    comps = []
    for i in range(m):
        for j in range(i, m):
            comps.append(last if (i, j) == (m - 1, m - 1) else names[sym[(i, j)]])
    n = m * (m + 1) // 2 - 1
    return ImmersionChart(f"det_sym{m}", n, tuple(comps), tuple((-0.3, 0.3) for _ in range(n)))


def make_det_herm(k):
    """Hermitian k x k matrices with det = 1 as a real chart, last diagonal entry solved."""
    k = int(k)
    if k < 3:
        raise InvalidParameters("k must be at least 3")
    names, var = {}, 0
    diag, re, im = {}, {}, {}
    for i in range(k - 1):
        var += 1
        diag[i] = f"d{i}"
        names[f"d{i}"] = f"(1 + u{var})"
    for i in range(k):
        for j in range(i + 1, k):
            var += 1
            re[(i, j)] = f"x{i}{j}"
            names[f"x{i}{j}"] = f"u{var}"
            var += 1
            im[(i, j)] = f"y{i}{j}"
            names[f"y{i}{j}"] = f"u{var}"
    entries = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if i == j:
                entries[i][j] = {} if i == k - 1 else {(diag[i],): 1}
            else:
                a, b = min(i, j), max(i, j)
                s = 1j if i < j else -1j
                entries[i][j] = {(re[(a, b)],): 1, (im[(a, b)],): s}
    minor = _det_poly([row[: k - 1] for row in entries[: k - 1]])
    rest = _det_poly(entries, skip=k - 1)
    for poly in (minor, rest):
        bad = max((abs(c.imag) for c in poly.values() if isinstance(c, complex)), default=0)
        if bad > 0:
            raise AssertionError("Hermitian determinant has an imaginary part")
    last = f"(1 - ({_poly_str(rest, names)}))/({_poly_str(minor, names)})"
    comps = [names[diag[i]] for i in range(k - 1)] + [last]
    for i in range(k):
        for j in range(i + 1, k):
            comps += [names[re[(i, j)]], names[im[(i, j)]]]
    n = k * k - 1
    return ImmersionChart(f"det_herm{k}", n, tuple(comps), tuple((-0.3, 0.3) for _ in range(n)))


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    constructor: str
    params: dict
    schema: str
    expected_label: str
    reference: str
    expected_case: str = ""
    extra: dict = field(default_factory=dict, hash=False, compare=False)

    def build(self, **overrides):
        kwargs = dict(self.params)
        kwargs.update(overrides)
        return CONSTRUCTORS[self.constructor](**kwargs)

    def to_dict(self):
        return {
            "id": self.id,
            "constructor": self.constructor,
            "params": dict(self.params),
            "schema": self.schema,
            "expected_label": self.expected_label,
            "expected_case": self.expected_case,
            "reference": self.reference,
        }


CONSTRUCTORS = {
    "make_quadric": make_quadric,
    "make_power": make_power,
    "make_complex_power": make_complex_power,
    "make_log_canonical": make_log_canonical,
    "make_case_b": make_case_b,
    "make_surface6": make_surface6,
    "make_det_sym": make_det_sym,
    "make_det_herm": make_det_herm,
}

_S6A = surface6_params("a")
_S6B = surface6_params("b")
_S6C = surface6_params("c")

_ENTRIES = [
    CatalogEntry("sphere", "make_quadric", {"n": 2, "eps": 1},
                 "n >= 1, eps = +1", "Quadric", "hyperquadric", "Quadric"),
    CatalogEntry("hyperboloid", "make_quadric", {"n": 2, "eps": -1},
                 "n >= 1, eps = -1", "Quadric", "hyperquadric", "Quadric"),
    CatalogEntry("power", "make_power", {"alphas": [1.0, 1.0, 1.0]},
                 "all alpha_i > 0, or alpha_1 < 0 < alpha_i (i >= 2) with sum < 0",
                 "CalabiPointFactor", "product of powers equal to one", "CaseC1"),
    CatalogEntry("power_negative", "make_power", {"alphas": [-3.0, 1.0, 1.0]},
                 "alpha_1 < 0 < alpha_i (i >= 2), sum(alpha) < 0",
                 "CalabiPointFactor", "product of powers equal to one", "CaseC1"),
    CatalogEntry("power3", "make_power", {"alphas": [1.0, 1.0, 1.0, 1.0]},
                 "all alpha_i > 0", "CalabiPointFactor",
                 "product of powers equal to one", "CaseC1"),
    CatalogEntry("complex_power", "make_complex_power", {"n": 2, "alphas": [-1.0, 1.0, 0.3]},
                 "alpha_i < 0 (i < n), 2 alpha_n + sum_(i<n) alpha_i > 0",
                 "CalabiPointFactor", "powers with a complex pair", "CaseC1"),
    CatalogEntry("log_canonical", "make_log_canonical", {"n": 2, "v": 2, "alphas": [0.5]},
                 "2 <= v <= n+1, alpha_i > 0, sum(alpha) < 1",
                 "CalabiPointFactor", "logarithmic canonical hypersurface", "CaseC1"),
    CatalogEntry("log_canonical_b", "make_log_canonical", {"n": 2, "v": 3, "alphas": []},
                 "v = n+1, no exponents", "CaseB",
                 "exceptional flat hypersurface with lambda1 = 2", "CaseB"),
    CatalogEntry("case_b", "make_case_b", {"n": 2},
                 "n >= 2", "CaseB", "exceptional flat hypersurface with lambda1 = 2", "CaseB"),
    CatalogEntry("case_b3", "make_case_b", {"n": 3},
                 "n >= 2", "CaseB", "exceptional flat hypersurface with lambda1 = 2", "CaseB"),
    CatalogEntry("surface6_a", "make_surface6",
                 {"branch": "a", "lambda1": _S6A[0], "mu": _S6A[1], "a1": _S6A[2]},
                 "a1^2 + 4(mu^2 - eps) > 0", "CalabiPointFactor",
                 "flat surface, exponential branch", "CaseC1"),
    CatalogEntry("surface6_b", "make_surface6",
                 {"branch": "b", "lambda1": _S6B[0], "mu": _S6B[1], "a1": _S6B[2]},
                 "a1^2 + 4(mu^2 - eps) < 0", "CalabiPointFactor",
                 "flat surface, trigonometric branch", "CaseC1"),
    CatalogEntry("surface6_c", "make_surface6",
                 {"branch": "c", "lambda1": _S6C[0], "mu": _S6C[1], "a1": _S6C[2]},
                 "a1^2 + 4(mu^2 - eps) = 0, a1 != 0, eps = 1", "CalabiPointFactor",
                 "flat surface, degenerate branch", "CaseC1"),
    CatalogEntry("det_sym", "make_det_sym", {"m": 3},
                 "m >= 3", "SL_R(3)", "SL(m,R)/SO(m) via symmetric matrices of determinant one",
                 "CaseCm(3)"),
    CatalogEntry("det_herm", "make_det_herm", {"k": 3},
                 "k >= 3", "SL_C(3)", "SL(k,C)/SU(k) via Hermitian matrices of determinant one",
                 "CaseCm(5)"),
]

CATALOG = {e.id: e for e in _ENTRIES}


def get_entry(entry_id):
    try:
        return CATALOG[entry_id]
    except KeyError:
        raise InvalidParameters(
            f"unknown catalog id {entry_id!r}; known ids: {', '.join(sorted(CATALOG))}"
        ) from None


def build(entry_id, **overrides):
    return get_entry(entry_id).build(**overrides)
