"""Pointwise classification of (h, K) data with parallel cubic form.

The pipeline follows the typical-basis construction: maximize the cubic
f(u) = h(K_u u, u) on the unit sphere, split the spectrum of K_{e1}, build the
isotropic map L on D2, decompose D2 with the operators P_v, and read off a
label from the block data, the trace of L and the dimension.

All heavy lifting happens in an h-orthonormal frame, where K becomes a
totally symmetric 3-tensor.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.stats import qmc, norm as _normal

from .errors import (
    BlockMismatch,
    BranchAmbiguity,
    CaffineError,
    ForbiddenP,
    IsotropyViolation,
    NonConvergence,
    SpectrumViolation,
    ZeroCubic,
)
from .linalg import Frame, complete_basis, intersect_subspaces, sym_eigen

ZERO_C = 1e-10
DELTA_B = 1e-6
ALLOWED_P = (0, 1, 3, 7)

# row i, column j holds e_i e_j as (sign, k); k = 0 is the identity
_OCT_ROWS = [
    "-0 +3 -2 +5 -4 -7 +6",
    "-3 -0 +1 +6 +7 -4 -5",
    "+2 -1 -0 +7 -6 +5 -4",
    "-5 -6 -7 -0 +1 +2 +3",
    "+4 -7 +6 -1 -0 -3 +2",
    "+7 +4 -5 -2 +3 -0 -1",
    "-6 +5 +4 -3 -2 +1 -0",
]
OCTONION_TABLE = tuple(
    tuple((1 if tok[0] == "+" else -1, int(tok[1:])) for tok in row.split())
    for row in _OCT_ROWS
)


def octonion_mul(i, j):
    """Product e_i e_j of imaginary octonion units as ``(sign, k)``; k = 0 means id."""
    if not (1 <= i <= 7 and 1 <= j <= 7):
        raise ValueError("octonion unit indices must lie in 1..7")
    return OCTONION_TABLE[i - 1][j - 1]


def octonion_product(a, b):
    """Full product of two octonions given as length-8 arrays (index 0 is real)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(8)
    out += a[0] * b
    out[1:] += b[0] * a[1:]
    for i in range(1, 8):
        if a[i] == 0.0:
            continue
        for j in range(1, 8):
            s, k = OCTONION_TABLE[i - 1][j - 1]
            out[k] += s * a[i] * b[j]
    return out


# ---------------------------------------------------------------------------
# configuration and results


@dataclass
class ClassifyConfig:
    restarts: int = 32
    seed: int = 0
    tol: float = 1e-6
    delta_b: float = DELTA_B
    trace_tol: float = 1e-6
    check_parallel: bool = True
    parallel_tol: float = 1e-8


@dataclass
class PointSpectrum:
    e1: np.ndarray
    lambda1: float
    eps: int
    eta: float
    mu: float
    values: np.ndarray
    vectors: np.ndarray
    half_branch: list
    mu_branch: list
    case: str
    m: int
    residuals: dict = field(default_factory=dict)
    frame: Frame = None
    Kf: np.ndarray = None
    e1_frame: np.ndarray = None
    vectors_frame: np.ndarray = None

    @property
    def n(self):
        return self.e1.size


@dataclass
class LOperator:
    """The map L restricted to D2 x D2, stored in orthonormal D2/D3 coordinates."""

    spectrum: PointSpectrum
    D2: np.ndarray
    D3: np.ndarray
    table: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def d2(self):
        return self.D2.shape[1]

    @property
    def d3(self):
        return self.D3.shape[1]

    @property
    def sigma(self):
        s = self.spectrum
        return 0.5 * s.lambda1 * s.eta

    @property
    def tau(self):
        s = self.spectrum
        return 0.25 * s.eta * (s.eta + 0.5 * s.lambda1)

    def __call__(self, x, y):
        """L(x, y) in D3 coordinates for D2-coordinate vectors x, y."""
        return np.einsum("aij,i,j->a", self.table, x, y)

    def frame_vector(self, x):
        return self.D2 @ np.asarray(x, dtype=float)


@dataclass
class PSpectrum:
    v: np.ndarray
    matrix: np.ndarray
    values: np.ndarray
    V0: np.ndarray
    Vtau: np.ndarray
    symmetry_residual: float
    sigma_residual: float
    spectrum_residual: float


@dataclass
class DTwoDecomposition:
    k0: int
    p: int
    blocks: list
    tau: float
    sigma: float
    L_table: np.ndarray
    trL: np.ndarray
    trace_L_norm: float
    rho: float
    block_dims: list
    sigma_tau_close: bool
    residuals: dict = field(default_factory=dict)


@dataclass
class ClassificationReport:
    label: str
    n: int
    epsilon: int
    case: str
    lambda1: float = float("nan")
    mu: float = float("nan")
    eta: float = float("nan")
    k0: int = None
    p: int = None
    trace_L_norm: float = float("nan")
    rho: float = float("nan")
    residuals: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    diagnostic: str = ""

    def to_dict(self):
        out = {
            "label": self.label,
            "n": self.n,
            "epsilon": self.epsilon,
            "lambda1": self.lambda1,
            "mu": self.mu,
            "eta": self.eta,
            "case": self.case,
        }
        if self.k0 is not None:
            out["k0"] = self.k0
        if self.p is not None:
            out["p"] = self.p
        out["trace_L_norm"] = self.trace_L_norm
        out["rho"] = self.rho
        out["residuals"] = dict(self.residuals)
        out["evidence"] = dict(self.evidence)
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        return out


# ---------------------------------------------------------------------------
# frame helpers


def frame_tensor(h, K):
    """Return ``(frame, Kf)`` with Kf the totally symmetric frame components of K."""
    fr = Frame(h)
    Kf = fr.tensor_to_frame(K, "ull")
    Kf = _sym(Kf)
    return fr, Kf


def _sym(t):
    return (
        t
        + t.transpose(0, 2, 1)
        + t.transpose(1, 0, 2)
        + t.transpose(1, 2, 0)
        + t.transpose(2, 0, 1)
        + t.transpose(2, 1, 0)
    ) / 6.0


def _kvec(Kf, x, y):
    return np.einsum("aij,i,j->a", Kf, x, y)


def _kmat(Kf, x):
    return np.einsum("aij,j->ai", Kf, x)


# ---------------------------------------------------------------------------
# maximization of the cubic form


def _seed_directions(n, restarts, seed):
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    pts = sob.random(restarts)
    pts = np.clip(pts, 1e-12, 1.0 - 1e-12)
    g = _normal.ppf(pts)
    out = []
    for row in g:
        nr = np.linalg.norm(row)
        if nr < 1e-12:
            row = np.eye(n)[0]
            nr = 1.0
        out.append(row / nr)
    return out


def _ascend(Kf, u, max_iter=5000):
    f = u @ _kvec(Kf, u, u)
    step = 1.0 / (1.0 + np.linalg.norm(Kf))
    for _ in range(max_iter):
        ku = _kvec(Kf, u, u)
        g = 3.0 * (ku - f * u)
        gn = np.linalg.norm(g)
        if gn < 1e-12:
            break
        while True:
            cand = u + step * g
            cand = cand / np.linalg.norm(cand)
            fc = cand @ _kvec(Kf, cand, cand)
            if fc >= f + 1e-4 * step * gn * gn or step < 1e-14:
                break
            step *= 0.5
        if fc <= f and step < 1e-14:
            break
        if abs(fc - f) <= 1e-16 * max(1.0, abs(f)) and gn < 1e-7:
            u, f = cand, fc
            break
        u, f = cand, fc
        step *= 2.0
    return u, f


def _polish(Kf, u, iters=30):
    """Newton on the Lagrange system K(u,u) = lam u, |u| = 1."""
    n = u.size
    lam = u @ _kvec(Kf, u, u)
    best = (np.linalg.norm(_kvec(Kf, u, u) - lam * u), u, lam)
    for _ in range(iters):
        r = np.concatenate([_kvec(Kf, u, u) - lam * u, [0.5 * (1.0 - u @ u)]])
        if np.linalg.norm(r) < 1e-15 * max(1.0, abs(lam)):
            break
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = 2.0 * _kmat(Kf, u) - lam * np.eye(n)
        jac[:n, n] = -u
        jac[n, :n] = -u
        try:
            d = np.linalg.lstsq(jac, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        u = u + d[:n]
        u = u / np.linalg.norm(u)
        lam = u @ _kvec(Kf, u, u)
        res = np.linalg.norm(_kvec(Kf, u, u) - lam * u)
        if res < best[0]:
            best = (res, u, lam)
        if np.linalg.norm(d) < 1e-16:
            break
    return best


def maximize_frame(Kf, restarts=32, seed=0):
    n = Kf.shape[0]
    scale = np.linalg.norm(Kf)
    if scale <= ZERO_C:
        raise ZeroCubic("cubic form vanishes")
    Kn = Kf / scale
    seeds = _seed_directions(n, restarts, seed)
    best = None
    for s in seeds:
        u, f = _ascend(Kn, s)
        res, u2, f2 = _polish(Kn, u)
        if f2 < f - 1e-10:
            # Newton drifted to a different critical point; keep the ascent result
            u2, f2 = u, f
            res = np.linalg.norm(_kvec(Kn, u, u) - f * u)
        if best is None or f2 > best[1] + 1e-13:
            best = (u2, f2, res)
    u, f, res = best
    if res > 1e-9:
        raise NonConvergence(f"maximizer stationarity residual {res:.3e}")
    return u, f * scale


def maximize_cubic(h, K, restarts=32, seed=0):
    """Maximize f(u) = h(K_u u, u) over the h-unit sphere.

    Returns ``(e1, lambda1)`` with ``e1`` in coordinates.
    """
    fr, Kf = frame_tensor(h, K)
    u, lam = maximize_frame(Kf, restarts, seed)
    return fr.vec_from_frame(u), float(lam)


# ---------------------------------------------------------------------------
# spectrum of K_{e1}


def branch_values(lambda1, eps):
    disc = lambda1 * lambda1 - 4.0 * eps
    if disc >= 0:
        eta = 0.5 * math.sqrt(disc)
        mu = 0.5 * (lambda1 - math.sqrt(disc))
    else:
        eta = float("nan")
        mu = float("nan")
    return eta, mu


def split_eigenvalues(values, lambda1, eps, tol=1e-6, delta_b=DELTA_B):
    """Assign eigenvalues to the lambda1/2 or mu branch and return the case tag.

    Returns ``(case, half, mu_idx, eta, mu)``.
    """
    eta, mu = branch_values(lambda1, eps)
    half_val = 0.5 * lambda1
    scale = max(1.0, abs(lambda1))
    disc = lambda1 * lambda1 - 4.0 * eps
    if abs(disc) <= delta_b:
        bad = [v for v in values if abs(v - half_val) > tol * scale]
        if bad:
            raise BranchAmbiguity(
                f"eigenvalue {bad[0]:.9g} off the degenerate branch {half_val:.9g}"
            )
        return "B", list(range(len(values))), [], eta, mu
    half, mus = [], []
    for i, v in enumerate(values):
        dh = abs(v - half_val)
        dm = abs(v - mu) if not math.isnan(mu) else math.inf
        if min(dh, dm) > tol * scale:
            raise BranchAmbiguity(
                f"eigenvalue {v:.9g} matches neither {half_val:.9g} nor {mu:.9g}"
            )
        (half if dh <= dm else mus).append(i)
    if not half:
        case = "C1"
    elif not mus:
        case = "Cn"
    else:
        case = "Cm"
    return case, half, mus, eta, mu


def spectrum_split(h, K, e1, eps, tol=1e-6, delta_b=DELTA_B):
    """Spectrum of K_{e1} on the complement of e1, with branch assignment."""
    fr, Kf = frame_tensor(h, K)
    return _spectrum_frame(fr, Kf, fr.vec_to_frame(e1), eps, tol, delta_b)


def _spectrum_frame(fr, Kf, e1f, eps, tol=1e-6, delta_b=DELTA_B):
    e1f = np.asarray(e1f, dtype=float)
    e1f = e1f / np.linalg.norm(e1f)
    lambda1 = float(e1f @ _kvec(Kf, e1f, e1f))
    ke = _kmat(Kf, e1f)
    q = complete_basis(e1f)
    vals, vecs = sym_eigen(q.T @ ke @ q)
    vf = q @ vecs
    stationarity = float(np.linalg.norm(ke @ e1f - lambda1 * e1f))
    case, half, mus, eta, mu = split_eigenvalues(vals, lambda1, eps, tol, delta_b)
    poly = max(
        (abs((lambda1 - 2 * v) * (eps - lambda1 * v + v * v)) for v in vals),
        default=0.0,
    )
    m = 1 + len(half)
    tag = {"C1": "CaseC1", "Cn": "CaseCn", "B": "CaseB"}.get(case, f"CaseCm({m})")
    return PointSpectrum(
        e1=fr.vec_from_frame(e1f),
        lambda1=lambda1,
        eps=int(eps),
        eta=eta,
        mu=mu,
        values=vals,
        vectors=fr.vec_from_frame(vf) if vf.size else vf,
        half_branch=half,
        mu_branch=mus,
        case=tag,
        m=m,
        residuals={"stationarity": stationarity, "branch_polynomial": float(poly)},
        frame=fr,
        Kf=Kf,
        e1_frame=e1f,
        vectors_frame=vf,
    )


# ---------------------------------------------------------------------------
# the isotropic map L and the operators P_v


def build_L(h, K, spectrum, tol=1e-7):
    """Tabulate L(v, w) = K_v w - lambda1/2 h(v, w) e1 on an orthonormal basis of D2."""
    s = spectrum
    if not s.case.startswith("CaseCm"):
        raise IsotropyViolation(f"L is defined for case Cm only, got {s.case}")
    Kf = s.Kf
    if Kf is None:
        fr, Kf = frame_tensor(h, K)
    e1 = s.e1_frame
    D2 = s.vectors_frame[:, s.half_branch]
    D3 = s.vectors_frame[:, s.mu_branch]
    d2 = D2.shape[1]
    scale = max(1.0, abs(s.lambda1))
    table = np.zeros((D3.shape[1], d2, d2))
    proj = 0.0
    for i in range(d2):
        for j in range(i, d2):
            w = _kvec(Kf, D2[:, i], D2[:, j])
            if i == j:
                w = w - 0.5 * s.lambda1 * e1
            proj = max(proj, abs(e1 @ w), float(np.max(np.abs(D2.T @ w))))
            table[:, i, j] = table[:, j, i] = D3.T @ w
    if proj > 1e-8 * scale * 10:
        raise IsotropyViolation(f"L leaves D3 (projection residual {proj:.3e})")
    target = 0.5 * s.lambda1 * s.eta
    iso = 0.0
    basis = list(np.eye(d2))
    for i in range(d2):
        for j in range(i + 1, d2):
            basis.append((np.eye(d2)[i] + np.eye(d2)[j]) / math.sqrt(2.0))
    for v in basis:
        lv = np.einsum("aij,i,j->a", table, v, v)
        iso = max(iso, abs(lv @ lv - target))
    if iso > tol * max(1.0, target):
        raise IsotropyViolation(
            f"|L(v,v)|^2 differs from lambda1*eta/2 by {iso:.3e}"
        )
    return LOperator(
        spectrum=s,
        D2=D2,
        D3=D3,
        table=table,
        residuals={"L_projection": proj, "isotropy": iso},
    )


def p_operator(L, v, tol=1e-6):
    """Matrix of P_v w = K_v L(v, w) on D2 together with its spectral split."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    lv = np.einsum("aij,i->aj", L.table, v)
    gram = lv.T @ lv
    # direct evaluation through K as an independent check of symmetry
    Kf = L.spectrum.Kf
    if Kf is not None:
        vf = L.D2 @ v
        img = L.D3 @ lv
        direct = L.D2.T @ np.einsum("aij,i,jk->ak", Kf, vf, img)
        sym_res = float(max(np.max(np.abs(direct - direct.T)), np.max(np.abs(direct - gram))))
    else:
        sym_res = 0.0
    sigma, tau = L.sigma, L.tau
    sig_res = float(np.linalg.norm(gram @ v - sigma * v))
    d2 = v.size
    if d2 > 1:
        q = complete_basis(v)
        vals, vecs = sym_eigen(q.T @ gram @ q)
        vecs = q @ vecs
    else:
        vals, vecs = np.zeros(0), np.zeros((1, 0))
    band = tol * max(1.0, tau)
    zero_idx, tau_idx, worst = [], [], 0.0
    for i, lam in enumerate(vals):
        d0, dt = abs(lam), abs(lam - tau)
        worst = max(worst, min(d0, dt))
        if min(d0, dt) > band:
            raise SpectrumViolation(
                f"P_v eigenvalue {lam:.9g} is far from 0 and tau={tau:.9g}"
            )
        (zero_idx if d0 <= dt else tau_idx).append(i)
    if sig_res > band * 10:
        raise SpectrumViolation(f"P_v v differs from sigma v by {sig_res:.3e}")
    return PSpectrum(
        v=v,
        matrix=gram,
        values=vals,
        V0=vecs[:, zero_idx],
        Vtau=vecs[:, tau_idx],
        symmetry_residual=sym_res,
        sigma_residual=sig_res,
        spectrum_residual=worst,
    )


def decompose_D2(L, tol=1e-6):
    """Greedy block decomposition of D2 into {v_l} + V_{v_l}(0)."""
    d2 = L.d2
    remaining = np.eye(d2)
    blocks, worst_spec, worst_sym = [], 0.0, 0.0
    while remaining.shape[1] > 0:
        v = remaining[:, 0]
        ps = p_operator(L, v, tol)
        worst_spec = max(worst_spec, ps.spectrum_residual, ps.sigma_residual)
        worst_sym = max(worst_sym, ps.symmetry_residual)
        blocks.append((v, ps.V0))
        nxt = intersect_subspaces(remaining, ps.Vtau, 1e-6)
        if nxt.shape[1] >= remaining.shape[1]:
            raise BlockMismatch("decomposition of D2 did not make progress")
        remaining = nxt
    dims = [1 + b[1].shape[1] for b in blocks]
    if sum(dims) != d2:
        raise BlockMismatch(f"blocks of sizes {dims} do not fill D2 of dimension {d2}")
    if len(set(dims)) != 1:
        raise BlockMismatch(f"blocks have unequal dimensions {dims}")
    k0 = len(blocks)
    p = dims[0] - 1
    if k0 >= 2 and p not in ALLOWED_P:
        raise ForbiddenP(f"null space dimension p={p} is not one of 0, 1, 3, 7")
    trL = np.einsum("aii->a", L.table)
    tnorm = float(np.linalg.norm(trL))
    sigma, tau = L.sigma, L.tau
    return DTwoDecomposition(
        k0=k0,
        p=p,
        blocks=blocks,
        tau=tau,
        sigma=sigma,
        L_table=L.table,
        trL=trL,
        trace_L_norm=tnorm,
        rho=tnorm / (1 + p),
        block_dims=dims,
        sigma_tau_close=abs(sigma - tau) < 1e-6,
        residuals={"p_spectrum": worst_spec, "p_symmetry": worst_sym},
    )


def rho_squared_formula(p, k0, lambda1, eps):
    """h(Tr L, Tr L) / (1+p)^2 predicted from the block data."""
    eta, mu = branch_values(lambda1, eps)
    return 0.5 * k0 * eta * (lambda1 + (k0 - 1) * mu)


def trace_rho_check(dec, spectrum, rel_tol=1e-6, abs_tol=1e-7):
    direct = float(dec.trL @ dec.trL)
    formula = (1 + dec.p) ** 2 * rho_squared_formula(
        dec.p, dec.k0, spectrum.lambda1, spectrum.eps
    )
    gap = abs(direct - formula)
    agree = gap <= max(rel_tol * max(abs(direct), abs(formula)), abs_tol)
    return {
        "trace_sq_direct": direct,
        "trace_sq_formula": formula,
        "rho_direct": math.sqrt(max(direct, 0.0)) / (1 + dec.p),
        "rho_formula": math.sqrt(max(formula, 0.0)) / (1 + dec.p),
        "gap": gap,
        "agree": bool(agree),
    }


def critical_dimension(p, m, k0=None):
    """Dimension n forced by Tr L = 0, or None when the block data admit none."""
    if p == 0:
        return m * (m + 1) // 2 - 1
    if p == 1:
        return (m + 1) ** 2 // 4 - 1
    if p == 3:
        return (m + 1) * (m + 3) // 8 - 1
    if p == 7:
        return 26 if (k0 is None or k0 == 2) else None
    return None


def symmetric_label(p, m):
    if p == 0:
        return f"SL_R({m})"
    if p == 1:
        return f"SL_C({(m + 1) // 2})"
    if p == 3:
        return f"SU_star({(m + 3) // 2})"
    return "E6_F4"


# ---------------------------------------------------------------------------
# sigma evidence for Calabi decompositions


def sigma_values(spectrum, dec):
    lam, eta, mu = spectrum.lambda1, spectrum.eta, spectrum.mu
    if dec.k0 == 1:
        s = math.sqrt(lam * (lam + 2 * eta))
        return (
            (lam * lam + 2 * eta * mu) / s,
            (0.5 * lam * lam + lam * eta) / s,
            (lam * mu + 2 * eta * mu) / s,
        )
    rho, k0 = dec.rho, dec.k0
    q = math.sqrt(rho * rho + k0 * k0 * eta * eta)
    return (
        (rho * rho * lam + k0 * k0 * eta * eta * mu) / (rho * q),
        (0.5 * lam + eta) * rho / q,
        mu * q / rho,
    )


def calabi_direction(spectrum, L, dec):
    """The distinguished unit vector T (frame coordinates) predicted by the block data."""
    lam, eta = spectrum.lambda1, spectrum.eta
    e1 = spectrum.e1_frame
    if dec.k0 == 1:
        v = dec.blocks[0][0]
        w = L.D3 @ L(v, v)
        w = w / np.linalg.norm(w)
        s = lam + 2 * eta
        return math.sqrt(lam / s) * e1 + math.sqrt(2 * eta / s) * w
    t = L.D3 @ dec.trL / ((1 + dec.p) * dec.rho)
    q = math.sqrt(dec.rho**2 + dec.k0**2 * eta**2)
    return (dec.rho * e1 + dec.k0 * eta * t) / q


def sigma_evidence(spectrum, L, dec):
    s1, s2, s3 = sigma_values(spectrum, dec)
    T = calabi_direction(spectrum, L, dec)
    Kf = spectrum.Kf
    resid = float(np.linalg.norm(_kvec(Kf, T, T) - s1 * T))
    return {"sigma1": s1, "sigma2": s2, "sigma3": s3, "sigma1_residual": resid}


# ---------------------------------------------------------------------------
# top level


def classify_tensor(h, K, eps, config=None, n=None):
    """Classify pointwise data ``(h, K, eps)``; returns a ClassificationReport."""
    config = config or ClassifyConfig()
    h = np.asarray(h, dtype=float)
    K = np.asarray(K, dtype=float)
    n = h.shape[0] if n is None else n
    fr = Frame(h)
    if not fr.definite:
        return ClassificationReport(
            label="Unrecognized",
            n=n,
            epsilon=int(eps),
            case="Indefinite",
            diagnostic="metric is not positive definite",
        )
    Kf = _sym(fr.tensor_to_frame(K, "ull"))
    cnorm = 2.0 * float(np.linalg.norm(Kf))
    if cnorm <= ZERO_C:
        return ClassificationReport(
            label="Quadric", n=n, epsilon=int(eps), case="Quadric",
            residuals={"C_norm": cnorm},
        )
    u, lam = maximize_frame(Kf, config.restarts, config.seed)
    spec = _spectrum_frame(fr, Kf, u, eps, config.tol, config.delta_b)
    rep = ClassificationReport(
        label="Unrecognized",
        n=n,
        epsilon=int(eps),
        case=spec.case,
        lambda1=spec.lambda1,
        mu=spec.mu,
        eta=spec.eta,
        residuals=dict(spec.residuals),
        evidence={"m": spec.m, "dim_D2": len(spec.half_branch), "dim_D3": len(spec.mu_branch)},
    )
    if spec.case == "CaseB":
        rep.label = "CaseB"
        return rep
    if spec.case == "CaseC1":
        rep.label = "CalabiPointFactor"
        rep.evidence["calabi_relation"] = spec.eps - spec.lambda1 * spec.mu + spec.mu**2
        return rep
    if spec.case == "CaseCn":
        rep.diagnostic = "case Cn cannot occur for parallel cubic form; input is inconsistent"
        return rep
    L = build_L(h, K, spec, tol=max(config.tol, 1e-7))
    rep.residuals.update(L.residuals)
    dec = decompose_D2(L, config.tol)
    rep.residuals.update(dec.residuals)
    rep.k0, rep.p = dec.k0, dec.p
    rep.trace_L_norm, rep.rho = dec.trace_L_norm, dec.rho
    rep.evidence.update(
        {"sigma": dec.sigma, "tau": dec.tau, "block_dims": dec.block_dims,
         "sigma_tau_close": dec.sigma_tau_close}
    )
    chk = trace_rho_check(dec, spec)
    rep.evidence["rho_check"] = chk
    m = spec.m
    if dec.k0 == 1:
        rep.evidence.update(sigma_evidence(spec, L, dec))
        rep.label = "CalabiPointFactor" if L.d3 == 1 else "CalabiTwoFactor"
        return rep
    nc = critical_dimension(dec.p, m, dec.k0)
    rep.evidence["critical_dimension"] = nc
    if nc is None:
        rep.diagnostic = f"no admissible dimension for p={dec.p}, k0={dec.k0}"
        return rep
    if dec.trace_L_norm <= config.trace_tol:
        if n == nc:
            rep.label = symmetric_label(dec.p, m)
        else:
            rep.diagnostic = f"trace of L vanishes but n={n} differs from {nc}"
        return rep
    rep.evidence.update(sigma_evidence(spec, L, dec))
    if n == nc + 1:
        rep.label = "CalabiPointFactor"
    elif n > nc + 1:
        rep.label = "CalabiTwoFactor"
    else:
        rep.diagnostic = f"n={n} is below the bound {nc + 1} for nonzero trace"
    return rep


def classify_point(chart, point, config=None):
    """Run geometry at ``point`` and classify; parallelism is checked unless disabled."""
    from .geometry import check_integrability, invariants_at

    config = config or ClassifyConfig()
    data = invariants_at(chart, point)
    residuals = {}
    if config.check_parallel:
        resid = data.parallel_residual()
        residuals["parallel"] = resid
        if resid > config.parallel_tol:
            return ClassificationReport(
                label="Unrecognized",
                n=chart.n,
                epsilon=int(data.epsilon),
                case="NotParallel",
                residuals=residuals,
                diagnostic=f"cubic form is not parallel (residual {resid:.3e})",
            )
    rep = classify_tensor(data.h, data.K, data.epsilon, config, n=chart.n)
    rep.residuals.update(residuals)
    rep.residuals["cross_check"] = float(data.cross_check)
    if not data.convex:
        rep.evidence["convex"] = False
    return rep


def classify_error_report(err: CaffineError, n, eps=0):
    return ClassificationReport(
        label="Unrecognized", n=n, epsilon=int(eps), case="Error",
        diagnostic=f"{type(err).__name__}: {err}",
    )
