"""Synthetic pointwise (h, K) data for classifier checks.

The symmetric examples come from the rank-3 Jordan algebras Herm(3, F) with
F = R, C, H or O (p = 0, 1, 3, 7).  At the identity of {det = 1} the metric is
h(X, Y) = tr(X o Y)/3 on traceless X, Y and K(X, Y) = X o Y - tr(X o Y)/3 I,
with eps = -1.  Calabi products with a point or with a quadric give data with
a nonvanishing trace of L.  ``forbidden_p_operator`` builds an L table whose
blocks have p = 2, which no hypersurface with parallel cubic form admits.
"""

import math

import numpy as np

from .calabi import product_tensor
from .classify import LOperator, PointSpectrum, branch_values, octonion_product
from .linalg import Frame

# number of real units of the division algebra for each p
_UNITS = {0: 1, 1: 2, 3: 4, 7: 8}


def _conj(a):
    out = -a.copy()
    out[0] = a[0]
    return out


def _matmul(X, Y):
    Z = np.zeros((3, 3, 8))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                Z[i, j] += octonion_product(X[i, k], Y[k, j])
    return Z


def jordan(X, Y):
    return 0.5 * (_matmul(X, Y) + _matmul(Y, X))


def real_trace(X):
    return float(X[0, 0, 0] + X[1, 1, 0] + X[2, 2, 0])


def herm_basis(p):
    """Real basis of Herm(3, F) as (3, 3, 8) octonion-valued matrices."""
    if p not in _UNITS:
        raise ValueError("p must be one of 0, 1, 3, 7")
    basis = []
    for i in range(3):
        E = np.zeros((3, 3, 8))
        E[i, i, 0] = 1.0
        basis.append(E)
    for i in range(3):
        for j in range(i + 1, 3):
            for a in range(_UNITS[p]):
                F = np.zeros((3, 3, 8))
                F[i, j, a] = 1.0
                F[j, i] = _conj(F[i, j])
                basis.append(F)
    return basis


def jordan_data(p):
    """(h, K, eps) of the determinant hypersurface of Herm(3, F) at the identity.

    Coordinates are an h-orthonormal basis of the traceless part, so h = I.
    """
    basis = herm_basis(p)
    ident = sum(basis[:3])
    traceless = []
    for B in basis:
        traceless.append(B - real_trace(B) / 3.0 * ident)
    dim = len(basis)
    gram = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(dim):
            gram[a, b] = real_trace(jordan(traceless[a], traceless[b])) / 3.0
    # drop the dependent direction (the traceless projections sum to zero)
    vals, vecs = np.linalg.eigh(gram)
    keep = vals > 1e-12
    coords = vecs[:, keep] / np.sqrt(vals[keep])
    n = coords.shape[1]
    elems = [sum(coords[a, k] * traceless[a] for a in range(dim)) for k in range(n)]
    K = np.zeros((n, n, n))
    for i in range(n):
        for j in range(i, n):
            P = jordan(elems[i], elems[j])
            P = P - real_trace(P) / 3.0 * ident
            # the h-orthonormal basis makes the coefficients h-inner products
            c = np.array(
                [real_trace(jordan(P, elems[k])) / 3.0 for k in range(n)]
            )
            K[:, i, j] = K[:, j, i] = c
    return np.eye(n), K, -1


def random_congruence(h, K, seed=0, spread=0.5):
    """(h, K) in new coordinates x = A y for a random well-conditioned A."""
    rng = np.random.default_rng(seed)
    n = h.shape[0]
    A = np.eye(n) + spread * rng.standard_normal((n, n)) / math.sqrt(n)
    Ainv = np.linalg.inv(A)
    h2 = A.T @ h @ A
    K2 = np.einsum("ak,kij,ib,jc->abc", Ainv, K, A, A)
    return h2, K2


def calabi_with_point(h1, K1, eps1, lam=1.0):
    """(h, K, eps) of the Calabi product of factor data with a point."""
    c1 = -eps1 * np.asarray(h1, dtype=float)
    c, K = product_tensor(lam, c1, K1)
    return _normalise(c, K)


def calabi_with_quadric(h1, K1, eps1, n2, lam=1.0):
    """(h, K, eps) of the Calabi product of factor data with an n2-dim quadric."""
    if lam <= 0:
        raise ValueError("use lam > 0 so the product metric stays definite")
    c1 = -eps1 * np.asarray(h1, dtype=float)
    c, K = product_tensor(lam, c1, K1, np.eye(n2), np.zeros((n2, n2, n2)))
    return _normalise(c, K)


def _normalise(c, K):
    vals = np.linalg.eigvalsh(c)
    if np.all(vals > 0):
        return c, K, -1
    if np.all(vals < 0):
        return -c, K, 1
    raise ValueError("product metric is indefinite for this lambda")


def forbidden_p_operator(lambda1=3.0, eps=1, p=2):
    """An L table on D2 = R^(1+p) + R^(1+p) with P_v spectrum {sigma, 0, tau}.

    The two blocks have dimension 1+p, which the greedy decomposition reports
    as the null-space dimension p.
    """
    eta, mu = branch_values(lambda1, eps)
    sigma = 0.5 * lambda1 * eta
    tau = 0.25 * eta * (eta + 0.5 * lambda1)
    b = 1 + p
    d2 = 2 * b
    d3 = 2 + b * b
    table = np.zeros((d3, d2, d2))
    s1, s2 = math.sqrt(sigma), math.sqrt(tau)
    for i in range(b):
        table[0, i, i] = s1
        table[1, b + i, b + i] = s1
        for j in range(b):
            table[2 + i * b + j, i, b + j] = table[2 + i * b + j, b + j, i] = s2
    n = 1 + d2 + d3
    spec = PointSpectrum(
        e1=np.eye(n)[0],
        lambda1=lambda1,
        eps=eps,
        eta=eta,
        mu=mu,
        values=np.array([0.5 * lambda1] * d2 + [mu] * d3),
        vectors=np.eye(n)[:, 1:],
        half_branch=list(range(d2)),
        mu_branch=list(range(d2, d2 + d3)),
        case=f"CaseCm({1 + d2})",
        m=1 + d2,
        frame=Frame(np.eye(n)),
        Kf=None,
        e1_frame=np.eye(n)[0],
        vectors_frame=np.eye(n)[:, 1:],
    )
    D2 = np.eye(n)[:, 1 : 1 + d2]
    D3 = np.eye(n)[:, 1 + d2 :]
    return LOperator(spectrum=spec, D2=D2, D3=D3, table=table)


def tensor_from_cubic(C, h=None):
    """Mixed K from a covariant cubic C = -2 h(K., .)."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    h = np.eye(n) if h is None else np.asarray(h, dtype=float)
    return -0.5 * np.einsum("kl,ijl->kij", np.linalg.inv(h), C)


def case_b_tensor(n):
    """K_{e1}e1 = 2e1, K_{e1}ei = ei, K_{ei}ej = delta_ij e1 (i, j >= 2), h = I."""
    K = np.zeros((n, n, n))
    K[0, 0, 0] = 2.0
    for i in range(1, n):
        K[i, 0, i] = K[i, i, 0] = 1.0
        K[0, i, i] = 1.0
    return np.eye(n), K, 1


def typical_tensor(lambda1, eps, n_half, n_mu, extra=None):
    """K_{e1} diagonal with e1 -> lambda1, n_half copies of lambda1/2, n_mu of mu.

    The remaining components follow the structure of K on D1 + D2 + D3 with
    L = 0 (or ``extra`` when given as an L table of shape (n_mu, n_half, n_half)).
    """
    eta, mu = branch_values(lambda1, eps)
    n = 1 + n_half + n_mu
    K = np.zeros((n, n, n))
    K[0, 0, 0] = lambda1
    for i in range(1, 1 + n_half):
        K[i, 0, i] = K[i, i, 0] = 0.5 * lambda1
        K[0, i, i] = 0.5 * lambda1
    for i in range(1 + n_half, n):
        K[i, 0, i] = K[i, i, 0] = mu
        K[0, i, i] = mu
    if extra is not None:
        D2 = slice(1, 1 + n_half)
        D3 = slice(1 + n_half, n)
        K[D3, D2, D2] += extra
        # adjoint part keeps h(K(v, w), v') = h(w, L(v, v')) symmetric
        K[D2, D2, D3] += np.transpose(extra, (1, 2, 0))
        K[D2, D3, D2] += np.transpose(extra, (1, 0, 2))
    return np.eye(n), K, eps
