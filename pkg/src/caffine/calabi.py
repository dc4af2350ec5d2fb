"""Calabi products of centroaffine hypersurfaces.

Composition (e^u psi1, e^{-lam u} psi2) and (e^u psi1, e^{-lam u}) as DSL
charts, the predicted metric blocks and index, the exact difference tensor
of a product, and detection of a Calabi direction T from pointwise (h, K).

Conventions: ``c`` is the coefficient of the position vector in the Gauss
formula, x_ij = Gamma^k_ij x_k + c_ij x, so the metric used by the geometry
module is h = -eps c.  Block factors below refer to c.

For a product with parameter lam the direction T = psi_u/sqrt|lam| has

    lambda1 = (1 - lam)/sqrt|lam|,  lambda2 = 1/sqrt|lam|,  lambda3 = -lam/sqrt|lam|,

so lambda1 = lambda2 + lambda3 and lambda2 lambda3 = -sgn(lam).  These values
were obtained by running the geometry pipeline on composed charts and are
checked in the test-suite.
"""

from dataclasses import dataclass, field
import math
import os

import numpy as np

from . import expr as ex
from .errors import InvalidInput, InvalidLambda, StructureInvalid
from .geometry import ImmersionChart, invariants_at
from .linalg import Frame, sym_eigen


def check_lambda(lam):
    lam = float(lam)
    if not math.isfinite(lam) or lam == 0.0 or lam == -1.0:
        raise InvalidLambda(f"lambda must differ from 0 and -1, got {lam}")
    return lam


def calabi_lambdas(lam):
    """(lambda1, lambda2, lambda3) of the direction psi_u/sqrt|lam| of a product."""
    lam = check_lambda(lam)
    r = math.sqrt(abs(lam))
    return (1.0 - lam) / r, 1.0 / r, -lam / r


@dataclass
class CalabiSpec:
    lam: float
    left: ImmersionChart
    right: ImmersionChart = None
    point: tuple = None
    u_interval: tuple = (-0.5, 0.5)

    def __post_init__(self):
        self.lam = check_lambda(self.lam)
        if (self.right is None) == (self.point is None):
            raise InvalidInput("give exactly one of a right chart or a point")
        if self.point is not None:
            self.point = tuple(float(x) for x in self.point)
            if not self.point or not any(self.point):
                raise InvalidInput("the point factor must be a nonzero vector")
        lo, hi = (float(x) for x in self.u_interval)
        if not lo < hi:
            raise InvalidInput("empty u interval")
        self.u_interval = (lo, hi)

    @property
    def n1(self):
        return self.left.n

    @property
    def n2(self):
        return 0 if self.right is None else self.right.n

    @property
    def n(self):
        return 1 + self.n1 + self.n2

    @classmethod
    def from_dict(cls, data, base_dir="."):
        def chart(ref):
            if isinstance(ref, dict) and "components" in ref:
                return ImmersionChart.from_dict(ref)
            if isinstance(ref, str):
                path = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
                return ImmersionChart.load(path)
            raise InvalidInput(f"cannot read factor chart from {ref!r}")

        try:
            lam = data["lambda"]
            left = chart(data["left"])
            right = data["right"]
        except KeyError as err:
            raise InvalidInput(f"Calabi spec misses field {err}") from None
        kwargs = {"u_interval": tuple(data.get("u_interval", (-0.5, 0.5)))}
        if isinstance(right, dict) and "point" in right:
            return cls(lam, left, point=tuple(right["point"]), **kwargs)
        return cls(lam, left, right=chart(right), **kwargs)

    def to_dict(self):
        out = {"lambda": self.lam, "left": self.left.to_dict()}
        out["right"] = {"point": list(self.point)} if self.right is None else self.right.to_dict()
        out["u_interval"] = list(self.u_interval)
        return out


def _shift(chart, offset, prefix):
    """Factor components with variables shifted by ``offset`` and params prefixed."""
    out = []
    for e in chart.exprs:
        e = ex.map_vars(e, lambda i: ex.Var(i + offset))
        e = ex.rename_params(e, lambda name: prefix + name)
        out.append(ex.to_string(e))
    params = {prefix + k: v for k, v in chart.params.items()}
    return out, params


def compose(spec):
    """Chart of the Calabi product; coordinates are (u, p, q)."""
    left, lparams = _shift(spec.left, 1, "L_")
    params = {"lam": spec.lam, **lparams}
    comps = [f"exp(u1)*({c})" for c in left]
    dom = [spec.u_interval] + list(spec.left.domain)
    if spec.right is not None:
        right, rparams = _shift(spec.right, 1 + spec.n1, "R_")
        params.update(rparams)
        comps += [f"exp(-lam*u1)*({c})" for c in right]
        dom += list(spec.right.domain)
        name = f"calabi({spec.left.name},{spec.right.name})"
    else:
        comps += [f"exp(-lam*u1)*({x!r})" for x in spec.point]
        name = f"calabi({spec.left.name},point)"
    return ImmersionChart(name, spec.n, tuple(comps), tuple(dom), params)


def predicted_metric_signature(lam, n1, N1, n2=None, N2=None):
    """Block factors of c = lam du^2 + lam/(1+lam) c1 + 1/(1+lam) c2 and the index N(c).

    With ``n2 is None`` the second factor is a point.
    """
    lam = check_lambda(lam)
    blocks = [lam, lam / (1.0 + lam)]
    if n2 is None:
        if lam > 0:
            N = N1
        elif lam > -1:
            N = n1 + 1 - N1
        else:
            N = N1 + 1
    else:
        blocks.append(1.0 / (1.0 + lam))
        if lam > 0:
            N = N1 + N2
        elif lam > -1:
            N = n1 + 1 - N1 + N2
        else:
            N = n2 + 1 + N1 - N2
    return {"blocks": tuple(blocks), "N": int(N)}


def product_tensor(lam, c1, K1, c2=None, K2=None):
    """Exact (c, K) of a Calabi product at a point from factor data, order (u, p, q)."""
    lam = check_lambda(lam)
    c1 = np.atleast_2d(np.asarray(c1, dtype=float))
    K1 = np.asarray(K1, dtype=float).reshape((c1.shape[0],) * 3)
    n1 = c1.shape[0]
    n2 = 0 if c2 is None else np.atleast_2d(c2).shape[0]
    n = 1 + n1 + n2
    c = np.zeros((n, n))
    K = np.zeros((n, n, n))
    P = slice(1, 1 + n1)
    c[0, 0] = lam
    c[P, P] = lam / (1.0 + lam) * c1
    K[0, 0, 0] = 1.0 - lam
    K[P, 0, P] = K[P, P, 0] = np.eye(n1)
    K[0, P, P] = c1 / (1.0 + lam)
    K[P, P, P] = K1
    if n2:
        c2 = np.atleast_2d(np.asarray(c2, dtype=float))
        K2 = np.asarray(K2, dtype=float).reshape((n2,) * 3)
        Q = slice(1 + n1, n)
        c[Q, Q] = c2 / (1.0 + lam)
        K[Q, 0, Q] = K[Q, Q, 0] = -lam * np.eye(n2)
        K[0, Q, Q] = -c2 / (1.0 + lam)
        K[Q, Q, Q] = K2
    return c, K


def measure_metric_blocks(spec, point):
    """Measured c of the composed chart divided blockwise by the factor c's.

    Returns the scale factors, the residual of each block fit and the size of
    the off-diagonal blocks.
    """
    chart = compose(spec)
    point = np.asarray(point, dtype=float)
    d = invariants_at(chart, point)
    c = -d.epsilon * d.h
    n1 = spec.n1
    P = slice(1, 1 + n1)
    out = {"u": float(c[0, 0])}
    fits = {}
    d1 = invariants_at(spec.left, point[P])
    c1 = -d1.epsilon * d1.h
    out["p"], fits["p"] = _block_fit(c[P, P], c1)
    mask = np.ones_like(c, dtype=bool)
    mask[0, 0] = False
    mask[P, P] = False
    if spec.right is not None:
        Q = slice(1 + n1, spec.n)
        d2 = invariants_at(spec.right, point[Q])
        c2 = -d2.epsilon * d2.h
        out["q"], fits["q"] = _block_fit(c[Q, Q], c2)
        mask[Q, Q] = False
    off = float(np.max(np.abs(c[mask]))) if mask.any() else 0.0
    return {
        "blocks": out,
        "fit_residual": max(fits.values()),
        "offdiagonal": off,
        "N": int(d.signature),
    }


def _block_fit(block, ref):
    s = float(np.sum(block * ref) / np.sum(ref * ref))
    return s, float(np.max(np.abs(block - s * ref)))


# ---------------------------------------------------------------------------
# detection


@dataclass
class CalabiStructure:
    T: np.ndarray
    lambda1: float
    lambda2: float
    lambda3: float
    D2: np.ndarray
    D3: np.ndarray
    kind: str
    exact: bool
    residuals: dict = field(default_factory=dict)
    hTT: float = 1.0

    @property
    def D2_dim(self):
        return self.D2.shape[1]

    @property
    def D3_dim(self):
        return self.D3.shape[1]

    @property
    def lam(self):
        """The product parameter implied by the eigenvalues (exact form only)."""
        if self.kind == "two_factor":
            return -self.lambda3 / self.lambda2
        s = -self.lambda2 * (self.lambda1 - self.lambda2)
        return math.copysign(1.0 / self.lambda2**2, s)

    def flipped(self):
        """Same structure with T negated; factors stay ordered by lambda2 > lambda3."""
        l2, D2 = -self.lambda2, self.D2
        l3, D3 = (None if self.lambda3 is None else -self.lambda3), self.D3
        if l3 is not None and l3 > l2:
            l2, l3, D2, D3 = l3, l2, D3, D2
        return CalabiStructure(
            -self.T, -self.lambda1, l2, l3, D2, D3,
            self.kind, self.exact, dict(self.residuals), self.hTT,
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "T": self.T.tolist(),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "D2_dim": self.D2_dim,
            "D3_dim": self.D3_dim,
            "exact_form": self.exact,
            "lambda": self.lam if self.exact else None,
            "residuals": dict(self.residuals),
        }


def _kv(Kf, x, y):
    return np.einsum("aij,i,j->a", Kf, x, y)


def _eigen_solve(Kf, T0, iters=60):
    """Newton on K(T,T) = s T with |T| = 1 in frame coordinates."""
    n = T0.size
    T = T0 / np.linalg.norm(T0)
    s = T @ _kv(Kf, T, T)
    scale = max(1.0, np.linalg.norm(Kf))
    for _ in range(iters):
        r = np.concatenate([_kv(Kf, T, T) - s * T, [0.5 * (T @ T - 1.0)]])
        if np.linalg.norm(r) < 1e-14 * scale:
            break
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = 2.0 * np.einsum("aij,j->ai", Kf, T) - s * np.eye(n)
        jac[:n, n] = -T
        jac[n, :n] = T
        d = np.linalg.lstsq(jac, -r, rcond=None)[0]
        T = T + d[:n]
        s = s + d[n]
        nt = np.linalg.norm(T)
        if nt < 1e-12:
            return None
        T = T / nt
    res = np.linalg.norm(_kv(Kf, T, T) - (T @ _kv(Kf, T, T)) * T)
    if res > 1e-10 * scale:
        return None
    return T


def _candidates(Kf, signs, seed=0, random_starts=64):
    n = Kf.shape[0]
    tr = np.einsum("bab->a", Kf) * signs
    starts = []
    if np.linalg.norm(tr) > 1e-12:
        starts.append(tr)
    starts += list(np.eye(n))
    rng = np.random.default_rng(seed)
    starts += list(rng.standard_normal((random_starts, n)))
    found = []
    for s0 in starts:
        T = _eigen_solve(Kf, np.asarray(s0, dtype=float))
        if T is None:
            continue
        if any(abs(abs(T @ F) - 1.0) < 1e-8 for F in found):
            continue
        found.append(T)
    return found


def _analyse(Kf, signs, T, eps, tol):
    """Check a candidate direction; returns a structure in frame coordinates or None."""
    n = T.size
    hTT = float(T @ (signs * T))
    if abs(hTT) < 1e-8:
        return None
    T = T / math.sqrt(abs(hTT))
    hTT = math.copysign(1.0, hTT)
    lam1 = float(_kv(Kf, T, T) @ (signs * T)) * hTT
    if lam1 < 0:
        T, lam1 = -T, -lam1
    # h-orthogonal complement of T
    w = signs * T
    q, _ = np.linalg.qr(np.column_stack([w, np.eye(n)]))
    comp = q[:, 1:n]
    KT = np.einsum("aij,i->aj", Kf, T)
    M = np.linalg.lstsq(comp, KT @ comp, rcond=None)[0]
    vals, vecs = np.linalg.eig(M)
    scale = max(1.0, abs(lam1), float(np.max(np.abs(vals))) if vals.size else 0.0)
    if vals.size and np.max(np.abs(vals.imag)) > tol * scale:
        return None
    vals = vals.real
    order = np.argsort(vals)
    vals = vals[order]
    groups = []
    for i, v in enumerate(vals):
        if groups and abs(v - vals[groups[-1][-1]]) <= tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    if not 1 <= len(groups) <= 2:
        return None
    spaces, lams = [], []
    for g in groups:
        lv = float(np.mean(vals[g]))
        null = _null_space(M - lv * np.eye(M.shape[0]), tol * scale * 10)
        if null.shape[1] != len(g):
            return None  # not diagonalizable
        spaces.append(comp @ null)
        lams.append(lv)
    if len(groups) == 1:
        lam2 = lams[0]
        if abs(lam1 - 2 * lam2) <= tol * scale:
            return None
        if abs(lam2) <= tol * scale:
            return None
        exact = abs(lam1 * lam2 - lam2 * lam2 - eps * hTT) <= 1e-6 * scale
        return dict(T=T, l1=lam1, l2=lam2, l3=None, D2=spaces[0], D3=np.zeros((n, 0)),
                    kind="point", exact=exact, hTT=hTT, res={})
    # two eigenvalues: larger one is lambda2
    (l3, V3), (l2, V2) = (lams[0], spaces[0]), (lams[1], spaces[1])
    if min(abs(lam1 - 2 * l2), abs(lam1 - 2 * l3), abs(l2 - l3)) <= tol * scale:
        return None
    cross = 0.0
    for i in range(V2.shape[1]):
        for j in range(V3.shape[1]):
            cross = max(cross, float(np.linalg.norm(_kv(Kf, V2[:, i], V3[:, j]))))
    if cross > 1e-6 * scale:
        return None
    exact = abs(l2 * l3 - eps * hTT) <= 1e-6 * scale
    return dict(T=T, l1=lam1, l2=l2, l3=l3, D2=V2, D3=V3, kind="two_factor",
                exact=exact, hTT=hTT,
                res={"cross": cross, "sum_rule": abs(lam1 - l2 - l3)})


def _null_space(a, tol):
    if a.size == 0:
        return np.zeros((a.shape[1], 0))
    _, s, vt = np.linalg.svd(a)
    s_full = np.zeros(a.shape[1])
    s_full[: s.size] = s
    return vt[s_full <= tol].T


_RANK = {("two_factor", True): 0, ("two_factor", False): 1, ("point", True): 2, ("point", False): 3}


def detect_calabi_all(h, K, eps, tol=1e-6, seed=0):
    """All qualifying Calabi directions, best first."""
    fr = Frame(h)
    Kf = fr.tensor_to_frame(K, "ull")
    found = []
    for T in _candidates(Kf, fr.signs, seed):
        r = _analyse(Kf, fr.signs, T, eps, tol)
        if r is None:
            continue
        found.append(
            CalabiStructure(
                T=fr.vec_from_frame(r["T"]),
                lambda1=r["l1"],
                lambda2=r["l2"],
                lambda3=r["l3"],
                D2=fr.vec_from_frame(r["D2"]),
                D3=fr.vec_from_frame(r["D3"]) if r["D3"].size else np.zeros((h.shape[0], 0)),
                kind=r["kind"],
                exact=bool(r["exact"]),
                residuals=r["res"],
                hTT=r["hTT"],
            )
        )
    found.sort(key=lambda s: _RANK[(s.kind, s.exact)])
    return found


def detect_calabi_direction(h, K, eps, tol=1e-6, seed=0):
    """Best Calabi structure at a point, or None."""
    found = detect_calabi_all(h, K, eps, tol, seed)
    return found[0] if found else None


def orient(structure, reference):
    """Flip T (and the eigenvalues) so that T points along ``reference``."""
    if float(np.dot(structure.T, reference)) < 0:
        return structure.flipped()
    return structure


def match_structure(h, K, eps, reference, tol=1e-6, seed=0):
    """The detected structure whose T is closest to ``reference`` (a coordinate vector)."""
    found = detect_calabi_all(h, K, eps, tol, seed)
    if not found:
        raise StructureInvalid("no Calabi direction at this point")
    ref = np.asarray(reference, dtype=float)
    ref = ref / np.linalg.norm(ref)

    def score(s):
        t = s.T / np.linalg.norm(s.T)
        return -abs(float(t @ ref))

    best = min(found, key=score)
    return orient(best, ref)


# ---------------------------------------------------------------------------
# decomposition


def decompose_pointwise(chart, point, structure, u=0.0, data=None):
    """Ambient vectors psi1, psi2 of the two factors at ``point``.

    ``u`` is the value of the product coordinate at the point; the default
    fixes the integration constant by u = 0 at the queried point.
    """
    s = structure
    scale = max(1.0, abs(s.lambda1))
    if s.kind == "two_factor" and abs(s.lambda2 - s.lambda3) <= 1e-9 * scale:
        raise StructureInvalid("lambda2 equals lambda3; the factors cannot be separated")
    if not s.exact:
        raise StructureInvalid("the decomposition formulas need the exact normal form")
    d = data if data is not None else invariants_at(chart, point)
    T = d.tangent @ s.T
    psi = d.position
    l1, l2 = s.lambda1, s.lambda2
    if s.kind == "two_factor":
        l3 = s.lambda3
        f = math.exp(-u) / (l2 - l3)
        g = math.exp(-l3 / l2 * u) / (l2 - l3)
        return f * (T - l3 * psi), g * (l2 * psi - T)
    if abs(2 * l2 - l1) <= 1e-9 * scale:
        raise StructureInvalid("lambda1 equals 2 lambda2")
    ratio = d.epsilon * s.hTT / l2
    f = math.exp(-u) / (2 * l2 - l1)
    g = math.exp((l2 - l1) / l2 * u) / (2 * l2 - l1)
    return f * (T - ratio * psi), g * (l2 * psi - T)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def u_coordinate(chart, base, point, structure_at, nodes=12):
    """Integrate du = lambda2 h(T, .)/h(T, T) along the segment from ``base`` to ``point``.

    ``structure_at(x, ref)`` returns the oriented structure at chart point x.
    """
    base = np.asarray(base, dtype=float)
    point = np.asarray(point, dtype=float)
    delta = point - base
    if not np.any(delta):
        return 0.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for t, wt in zip(0.5 * (x + 1.0), 0.5 * w):
        q = base + t * delta
        d = invariants_at(chart, q)
        s = structure_at(q, d)
        du = s.lambda2 * (d.h @ s.T) / s.hTT
        total += wt * float(du @ delta)
    return total


def decompose_grid(chart, points, base=None, tol=1e-6, seed=0):
    """Decompose at each point with a common orientation and u measured from ``base``.

    Returns ``(psi1 list, psi2 list, structures)``.
    """
    points = [np.asarray(p, dtype=float) for p in points]
    base = points[0] if base is None else np.asarray(base, dtype=float)
    d0 = invariants_at(chart, base)
    s0 = detect_calabi_direction(d0.h, d0.K, d0.epsilon, tol, seed)
    if s0 is None:
        raise StructureInvalid("no Calabi direction at the base point")
    ref = s0.T

    def structure_at(q, d):
        return match_structure(d.h, d.K, d.epsilon, ref, tol, seed)

    psi1, psi2, structs = [], [], []
    for p in points:
        d = invariants_at(chart, p)
        s = structure_at(p, d)
        u = u_coordinate(chart, base, p, structure_at)
        a, b = decompose_pointwise(chart, p, s, u=u, data=d)
        psi1.append(a)
        psi2.append(b)
        structs.append(s)
    return psi1, psi2, structs


def subspace_fit(vectors, dim):
    """Best ``dim``-dimensional subspace through the origin and the worst relative residual."""
    a = np.column_stack([v / np.linalg.norm(v) for v in vectors])
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    basis = u[:, :dim]
    resid = a - basis @ (basis.T @ a)
    return basis, float(np.max(np.linalg.norm(resid, axis=0)))


def principal_angles(a, b):
    """Principal angles (radians) between the column spans of orthonormal a and b."""
    s = np.linalg.svd(a.T @ b, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))
