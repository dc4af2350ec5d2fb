"""Small dense tensor and spectral linear algebra.

Tensors are plain numpy arrays.  Conventions used throughout the package:

* a metric ``h`` is an ``(n, n)`` symmetric array,
* a mixed tensor ``K`` is stored as ``K[k, i, j]`` = K^k_{ij}, symmetric in ``i, j``,
* a covariant 3-tensor ``C`` is stored as ``C[i, j, k]``.
"""

import numpy as np

from .errors import AsymmetryError, NonConvergence, RankDeficient

MAX_SWEEPS = 100


def sym_eigen(a):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values ascending and vectors as columns.
    Each eigenvector is sign-fixed so that its largest-magnitude component is
    positive.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix expected")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= 1e-15 * scale or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) + 1e8 * abs(apq) == abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NonConvergence("Jacobi iteration did not converge")
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    v = v[:, order]
    for k in range(n):
        i = np.argmax(np.abs(v[:, k]))
        if v[i, k] < 0:
            v[:, k] = -v[:, k]
    return values, v


def cluster_eigenvalues(values, rel_tol=1e-6):
    """Group ascending values; neighbours join a group when their gap is small.

    The gap threshold is ``rel_tol * max(1, |value|)``.  Returns a list of index
    lists in ascending order.
    """
    values = list(values)
    if not values:
        return []
    groups = [[0]]
    for i in range(1, len(values)):
        gap = values[i] - values[i - 1]
        if gap <= rel_tol * max(1.0, abs(values[i - 1]), abs(values[i])):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def lower_index(K, h, tol=1e-8):
    """Return ``L[i, j, k] = sum_l h[k, l] K[l, i, j]`` symmetrized.

    Raises AsymmetryError when the raw result is not totally symmetric, which
    means ``K`` is not self-adjoint with respect to ``h``.
    """
    K = np.asarray(K, dtype=float)
    h = np.asarray(h, dtype=float)
    low = np.einsum("kl,lij->ijk", h, K)
    sym = symmetrize3(low)
    resid = np.max(np.abs(low - sym)) if low.size else 0.0
    if resid > tol * max(1.0, np.max(np.abs(low)) if low.size else 0.0):
        raise AsymmetryError(f"lowered tensor not symmetric (residual {resid:.3e})")
    return sym


def symmetrize3(t):
    return (
        t
        + t.transpose(0, 2, 1)
        + t.transpose(1, 0, 2)
        + t.transpose(1, 2, 0)
        + t.transpose(2, 0, 1)
        + t.transpose(2, 1, 0)
    ) / 6.0


def h_orthonormalize(vectors, h, tol=1e-10):
    """Gram-Schmidt with respect to an SPD metric ``h``.

    ``vectors`` is a sequence of vectors (or a matrix whose columns are the
    vectors).  Returns a matrix whose columns are h-orthonormal.
    """
    h = np.asarray(h, dtype=float)
    vs = [np.asarray(v, dtype=float) for v in _columns(vectors)]
    out = []
    for v in vs:
        w = v.copy()
        # two passes keep the result orthogonal to working precision
        for _ in range(2):
            for b in out:
                w = w - (b @ h @ w) * b
        nrm2 = w @ h @ w
        ref = max(1.0, v @ h @ v)
        if nrm2 <= (tol * tol) * ref:
            raise RankDeficient("vectors are linearly dependent")
        out.append(w / np.sqrt(nrm2))
    if not out:
        return np.zeros((h.shape[0], 0))
    return np.column_stack(out)


def _columns(vectors):
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return [vectors[:, i] for i in range(vectors.shape[1])]
    return list(vectors)


def is_positive_definite(h):
    values, _ = sym_eigen(h)
    return bool(values[0] > 0)


def negative_index(h, rel_tol=1e-12):
    """Number of negative eigenvalues (dimension of a maximal negative definite subspace)."""
    values, _ = sym_eigen(h)
    scale = max(1.0, np.max(np.abs(values))) if values.size else 1.0
    return int(np.sum(values < -rel_tol * scale))


class Frame:
    """An h-orthonormal frame of a nondegenerate metric.

    ``basis`` has the frame vectors as columns, ``signs`` holds h(e_a, e_a) = +-1.
    For a positive definite metric the frame comes from a Cholesky factor, so
    it is deterministic.  Indefinite metrics use the eigenvector frame; norms
    computed in such a frame are those of the positive metric |h|.
    """

    def __init__(self, h):
        h = 0.5 * (np.asarray(h, dtype=float) + np.asarray(h, dtype=float).T)
        self.h = h
        n = h.shape[0]
        try:
            chol = np.linalg.cholesky(h)
            self.basis = np.linalg.inv(chol).T
            self.signs = np.ones(n)
        except np.linalg.LinAlgError:
            values, vecs = sym_eigen(h)
            if np.min(np.abs(values)) <= 1e-14 * max(1.0, np.max(np.abs(values))):
                raise RankDeficient("metric is degenerate")
            self.basis = vecs / np.sqrt(np.abs(values))
            self.signs = np.sign(values)
        self.inverse = np.linalg.inv(self.basis)

    @property
    def definite(self):
        return bool(np.all(self.signs > 0))

    def vec_to_frame(self, v):
        return self.inverse @ np.asarray(v, dtype=float)

    def vec_from_frame(self, v):
        return self.basis @ np.asarray(v, dtype=float)

    def tensor_to_frame(self, t, variance):
        """Frame components of a tensor; ``variance`` is a string of 'u'/'l' per index."""
        t = np.asarray(t, dtype=float)
        for axis, kind in enumerate(variance):
            m = self.inverse if kind == "u" else self.basis.T
            t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
        return t

    def tensor_from_frame(self, t, variance):
        t = np.asarray(t, dtype=float)
        for axis, kind in enumerate(variance):
            m = self.basis if kind == "u" else self.inverse.T
            t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
        return t

    def norm(self, t, variance):
        return float(np.linalg.norm(self.tensor_to_frame(t, variance)))


def h_norm(t, h, variance):
    """h-norm of a tensor with the given index variance ('u' upper, 'l' lower)."""
    return Frame(h).norm(t, variance)


def complete_basis(v):
    """Orthonormal basis of the Euclidean complement of a unit vector ``v``.

    Uses a Householder reflection so the result is a smooth, deterministic
    function of ``v``.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    e = np.zeros(n)
    e[0] = 1.0
    s = 1.0 if v[0] >= 0 else -1.0
    w = v + s * e
    w = w / np.linalg.norm(w)
    q = np.eye(n) - 2.0 * np.outer(w, w)
    return q[:, 1:]


def subspace_basis(vectors, tol=1e-8):
    """Orthonormal basis (columns) of the span of the given columns."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], 0))
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0:
        return np.zeros((vectors.shape[0], 0))
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank]


def intersect_subspaces(a, b, tol=1e-8):
    """Orthonormal basis of span(a) ∩ span(b) for orthonormal column sets a, b."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    # x = a y lies in span(b) iff (I - b b^T) a y = 0
    m = a - b @ (b.T @ a)
    _, s, vt = np.linalg.svd(m)
    s_full = np.zeros(a.shape[1])
    s_full[: s.size] = s
    null = vt[s_full <= tol].T if vt.shape[0] == a.shape[1] else None
    if null is None or null.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    return subspace_basis(a @ null, tol)
