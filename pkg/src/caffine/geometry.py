"""Centroaffine invariants of hypersurface charts.

A chart ``x: U -> R^{n+1}`` is given by ``n + 1`` component expressions.  At a
point the Gauss decomposition

    x_{ij} = Gamma^k_{ij} x_k + h_{ij} (-eps x)

is solved in jet arithmetic, so that the induced connection and the metric are
known together with their derivatives.  Everything else (Levi-Civita
connection, difference tensor, cubic form, curvature and the covariant
derivative of the cubic form) follows from those jets exactly.

Index conventions: ``gamma[k, i, j]`` = Gamma^k_{ij}, ``K[k, i, j]`` = K^k_{ij},
``C[i, j, k]``, ``R[l, k, i, j]`` = R^l_{kij} with R(d_i, d_j) d_k = R^l_{kij} d_l,
and ``nablaC[i, j, k, l]`` = (nabla_i C)(d_j, d_k, d_l).
"""

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (
    CaffineError,
    CrossCheckFailure,
    DegenerateFrame,
    DegenerateMetric,
    InvalidInput,
)
from .linalg import Frame, negative_index, sym_eigen, symmetrize3

CROSS_CHECK_TOL = 1e-7
ZERO_C = 1e-10


# ---------------------------------------------------------------- charts


@dataclass(frozen=True)
class ImmersionChart:
    name: str
    n: int
    components: tuple
    domain: tuple
    params: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("chart dimension must be positive")
        comps = tuple(str(c) for c in self.components)
        if len(comps) != self.n + 1:
            raise InvalidInput(
                f"chart {self.name!r} needs {self.n + 1} components, got {len(comps)}"
            )
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(dom) != self.n:
            raise InvalidInput(f"chart {self.name!r} needs {self.n} domain intervals")
        for lo, hi in dom:
            if not lo < hi:
                raise InvalidInput(f"empty domain interval [{lo}, {hi}]")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        exprs = []
        for i, c in enumerate(comps):
            try:
                exprs.append(ex.parse(c, self.n, self.params))
            except CaffineError as err:
                err.location = {"component": i, "position": err.location}
                raise
        object.__setattr__(self, "_exprs", tuple(exprs))

    @property
    def exprs(self):
        return self._exprs

    @property
    def center(self):
        return np.array([(lo + hi) / 2 for lo, hi in self.domain])

    def contains(self, point):
        point = np.asarray(point, dtype=float)
        return point.shape == (self.n,) and all(
            lo <= p <= hi for p, (lo, hi) in zip(point, self.domain)
        )

    def value(self, point):
        return ex.eval_jets(self.exprs, point, 0)[:, 0]

    def jets(self, point, order=4):
        return ex.eval_jets(self.exprs, point, order)

    def to_dict(self):
        return {
            "name": self.name,
            "n": self.n,
            "components": list(self.components),
            "domain": [list(d) for d in self.domain],
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                name=str(data.get("name", "chart")),
                n=int(data["n"]),
                components=tuple(data["components"]),
                domain=tuple(tuple(d) for d in data["domain"]),
                params=dict(data.get("params", {})),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise InvalidInput(f"malformed chart description: {err}") from None

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise InvalidInput(f"chart file is not valid JSON: {err}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")


# ---------------------------------------------------------------- point data


@dataclass
class CentroaffinePointData:
    point: np.ndarray
    epsilon: int
    h: np.ndarray
    gamma_induced: np.ndarray
    gamma_lc: np.ndarray
    K: np.ndarray
    C: np.ndarray
    tcheb: np.ndarray
    traceless: np.ndarray
    curvature: np.ndarray
    nablaC: np.ndarray
    signature: int
    convex: bool
    position: np.ndarray
    tangent: np.ndarray
    cross_check: float
    compatibility: float

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def frame(self):
        return Frame(self.h)

    @property
    def tcheb_vector(self):
        return np.linalg.solve(self.h, self.tcheb)

    def norm_C(self):
        return self.frame.norm(self.C, "lll")

    def norm_nablaC(self):
        return self.frame.norm(self.nablaC, "llll")

    def parallel_residual(self):
        """||nabla C|| relative to ||C|| (absolute when C vanishes)."""
        c = self.norm_C()
        r = self.norm_nablaC()
        return r / c if c > ZERO_C else r


# ---------------------------------------------------------------- core solve


def _gauss_jets(chart, point):
    """Order-2 jets of Gamma^k_ij and of the coefficient c_ij of the position vector.

    x_{ij} = Gamma^k_{ij} x_k + c_{ij} x, so that h = -eps c.
    """
    n = chart.n
    point = np.asarray(point, dtype=float)
    s4 = ex.jet_space(n, 4)
    s3 = ex.jet_space(n, 3)
    s2 = ex.jet_space(n, 2)
    X = chart.jets(point, 4)  # (n+1, size4)
    Xi = np.stack([s4.diff(X, i) for i in range(n)], axis=1)  # (n+1, n, size3)
    Xij = np.stack([s3.diff(Xi, j) for j in range(n)], axis=2)  # (n+1, n, n, size2)
    A = np.concatenate([s3.truncate(Xi, 2), s4.truncate(X, 2)[:, None, :]], axis=1)
    a0 = A[..., 0]
    sv = np.linalg.svd(a0, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise DegenerateFrame(
            "tangent vectors and position vector are linearly dependent",
            location=point.tolist(),
        )
    Ainv = s2.inv_matrix(A)
    Y = s2.einsum("ka,aij->kij", Ainv, Xij)
    return Y[:n], Y[n], X[:, 0], Xi[..., 0]


def choose_epsilon(c0):
    """Pick eps so that h = -eps c is positive definite when possible.

    Returns (eps, convex, signature) where signature is the number of negative
    eigenvalues of c, i.e. N(h) for the metric taken with eps = -1.
    """
    n = c0.shape[0]
    values, _ = sym_eigen(c0)
    scale = max(1.0, np.max(np.abs(values)))
    if np.min(np.abs(values)) <= 1e-12 * scale:
        raise DegenerateMetric("centroaffine metric is singular")
    neg = int(np.sum(values < 0))
    if neg == n:
        return 1, True, neg
    if neg == 0:
        return -1, True, neg
    # neither sign is definite; keep the sign with fewer negative directions of h
    # (ties go to eps = +1)
    eps = 1 if (n - neg) <= neg else -1
    return eps, False, neg


def centroaffine_frame(chart, point):
    """(epsilon, h, gamma_induced, signature) at a chart point."""
    gamma, c, _, _ = _gauss_jets(chart, point)
    eps, convex, sig = choose_epsilon(c[..., 0])
    return eps, -eps * c[..., 0], gamma[..., 0], sig


def levi_civita(chart, point):
    return invariants_at(chart, point).gamma_lc


def _levi_civita_jet(s1, h1, dh):
    """Order-1 jet of the Levi-Civita symbols from an order-1 metric jet and its derivatives.

    ``dh[i, j, l]`` holds the order-1 jet of d_l h_ij.
    """
    hinv = s1.inv_matrix(h1)
    # first kind: Gamma_{ijl} = 1/2 (d_i h_jl + d_j h_il - d_l h_ij)
    first = 0.5 * (dh.transpose(2, 0, 1, 3) + dh.transpose(0, 2, 1, 3) - dh)
    return s1.einsum("kl,ijl->kij", hinv, first)


def invariants_at(chart, point, cross_check_tol=CROSS_CHECK_TOL):
    """All centroaffine invariants of a chart at a point."""
    point = np.asarray(point, dtype=float)
    n = chart.n
    gamma2, c2, pos, tan = _gauss_jets(chart, point)
    eps, convex, sig = choose_epsilon(c2[..., 0])
    s2 = ex.jet_space(n, 2)
    s1 = ex.jet_space(n, 1)
    h2 = -eps * c2
    h2 = 0.5 * (h2 + h2.transpose(1, 0, 2))
    dh = np.stack([s2.diff(h2, l) for l in range(n)], axis=2)  # d_l h_ij, order 1
    h1 = s2.truncate(h2, 1)
    g1 = s2.truncate(gamma2, 1)
    lc1 = _levi_civita_jet(s1, h1, dh)
    K1 = g1 - lc1

    # cubic form as nabla h, covariant derivative with the induced connection
    Ca = (
        dh.transpose(2, 0, 1, 3)
        - s1.einsum("lij,lk->ijk", g1, h1)
        - s1.einsum("lik,jl->ijk", g1, h1)
    )
    Cb = -2.0 * s1.einsum("lij,kl->ijk", K1, h1)

    h = h2[..., 0]
    frame = Frame(h)
    diff = frame.norm(Ca[..., 0] - Cb[..., 0], "lll")
    scale = max(1.0, frame.norm(Cb[..., 0], "lll"))
    if diff > cross_check_tol * scale:
        raise CrossCheckFailure(
            f"cubic form cross-check failed (residual {diff:.3e})", location=point.tolist()
        )

    gamma = gamma2[..., 0]
    lc = lc1[..., 0]
    K = K1[..., 0]
    C = symmetrize3(Cb[..., 0])

    # metric compatibility of the Levi-Civita connection
    comp = dh[..., 0].transpose(2, 0, 1) - np.einsum("lki,lj->kij", lc, h) - np.einsum("lkj,il->kij", lc, h)
    compat = frame.norm(comp, "lll")

    # derivatives at the point: coefficient of the linear monomial
    def d0(jet1):
        return np.stack([jet1[..., 1 + m] for m in range(n)], axis=0)

    dlc = d0(lc1)  # dlc[m, k, i, j] = d_m Gamma^k_ij
    # R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik} + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
    R = (
        np.einsum("iljk->lkij", dlc)
        - np.einsum("jlik->lkij", dlc)
        + np.einsum("lim,mjk->lkij", lc, lc)
        - np.einsum("ljm,mik->lkij", lc, lc)
    )

    dC = d0(Cb)  # dC[i, j, k, l] = d_i C_jkl
    nablaC = (
        dC
        - np.einsum("mij,mkl->ijkl", lc, C)
        - np.einsum("mik,jml->ijkl", lc, C)
        - np.einsum("mil,jkm->ijkl", lc, C)
    )

    tcheb = np.einsum("jij->i", K) / n
    hs = np.einsum("i,jk->ijk", tcheb, h)
    traceless = -0.5 * C - (n / (n + 2.0)) * (hs + hs.transpose(1, 0, 2) + hs.transpose(1, 2, 0))

    return CentroaffinePointData(
        point=point,
        epsilon=eps,
        h=h,
        gamma_induced=gamma,
        gamma_lc=lc,
        K=K,
        C=C,
        tcheb=tcheb,
        traceless=traceless,
        curvature=R,
        nablaC=nablaC,
        signature=sig,
        convex=convex,
        position=pos,
        tangent=tan,
        cross_check=float(diff),
        compatibility=float(compat),
    )


# ---------------------------------------------------------------- identities


def gauss_curvature_model(data):
    """Right-hand side eps (h(Y,Z) X - h(X,Z) Y) - [K_X, K_Y] Z as R^l_{kij}."""
    n = data.n
    h, K, eps = data.h, data.K, data.epsilon
    d = np.eye(n)
    model = eps * (np.einsum("jk,li->lkij", h, d) - np.einsum("ik,lj->lkij", h, d))
    model -= np.einsum("lim,mjk->lkij", K, K) - np.einsum("ljm,mik->lkij", K, K)
    return model


def derivation_residual_tensor(data):
    """R(X,Y) K(Z,U) - K(R(X,Y) Z, U) - K(Z, R(X,Y) U), indices [l, z, u, i, j]."""
    R, K = data.curvature, data.K
    return (
        np.einsum("lmij,mzu->lzuij", R, K)
        - np.einsum("lmu,mzij->lzuij", K, R)
        - np.einsum("lzm,muij->lzuij", K, R)
    )


def check_integrability(data, parallel_tol=1e-8):
    """Residuals of the structure equations at one point, measured in the h-norm."""
    frame = data.frame
    gauss = frame.norm(data.curvature - gauss_curvature_model(data), "ulll")
    slot = frame.norm(data.nablaC - data.nablaC.transpose(1, 0, 2, 3), "llll")
    report = {
        "gauss": gauss,
        "nablaC_slot_asymmetry": slot,
        "parallel": data.parallel_residual(),
        "cross_check": data.cross_check,
        "compatibility": data.compatibility,
        "derivation": None,
    }
    if data.parallel_residual() < parallel_tol:
        report["derivation"] = frame.norm(derivation_residual_tensor(data), "ullll")
    return report


def tchebychev_residual(data, vectors):
    """max |h(T, X) - T^(X)| over the given vectors."""
    T = data.tcheb_vector
    return max(abs(T @ data.h @ x - data.tcheb @ x) for x in vectors)


# ---------------------------------------------------------------- grids


def grid_points(chart, per_axis=5, margin=0.05):
    """Tensor grid over the domain box shrunk by ``margin`` on each side."""
    if per_axis < 2:
        raise InvalidInput("grid needs at least 2 points per axis")
    axes = []
    for lo, hi in chart.domain:
        w = hi - lo
        axes.append(np.linspace(lo + margin * w, hi - margin * w, per_axis))
    return [np.array(p) for p in itertools.product(*axes)]


def _parallel_at(args):
    chart, point = args
    try:
        return float(invariants_at(chart, point).parallel_residual()), None
    except CaffineError as err:
        return None, {"point": list(map(float, point)), **err.to_dict()}


def map_points(fn, chart, points, jobs=1):
    """Apply ``fn((chart, point))`` to each point, optionally with worker processes."""
    tasks = [(chart, p) for p in points]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def verify_parallel(chart, per_axis=5, tol=1e-8, jobs=1, points=None):
    """Check that the cubic form is parallel on a grid.

    The residual at a point is ||nabla C||_h / ||C||_h (or ||nabla C||_h when
    C vanishes).  Returns a dict with ``max_residual``, ``worst_point``,
    ``pass`` and any per-point errors.
    """
    if points is None:
        points = grid_points(chart, per_axis)
    results = map_points(_parallel_at, chart, points, jobs)
    worst = -1.0
    worst_point = None
    errors = []
    for p, (r, err) in zip(points, results):
        if err is not None:
            errors.append(err)
            continue
        # strict comparison keeps the first point in traversal order on ties
        if r > worst:
            worst = r
            worst_point = [float(x) for x in p]
    passed = not errors and worst <= tol
    return {
        "chart": chart.name,
        "points": len(points),
        "tol": tol,
        "max_residual": worst if worst >= 0 else None,
        "worst_point": worst_point,
        "pass": bool(passed),
        "errors": errors,
    }


def flip_signature(h):
    """N(h) and N(-h) for an arbitrary nondegenerate symmetric matrix."""
    return negative_index(h), negative_index(-np.asarray(h))
