"""Shared chart builders for the test suite."""

import numpy as np

from caffine.geometry import ImmersionChart


def perturbed_sphere(bump=0.05):
    """Unit sphere graph with a cubic bump in the first component."""
    return ImmersionChart(
        "perturbed_sphere",
        2,
        (f"u1 + {bump}*u1^3", "u2", "sqrt(1 - u1^2 - u2^2)"),
        ((-0.5, 0.5), (-0.5, 0.5)),
    )


def random_interior(chart, count, seed=0, margin=0.05):
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in chart.domain])
    hi = np.array([b for _, b in chart.domain])
    w = hi - lo
    return [lo + margin * w + (1 - 2 * margin) * w * rng.random(chart.n) for _ in range(count)]


def grid_size(n, budget=243):
    return max(2, int(np.floor(budget ** (1.0 / n) + 1e-12)))


import mpmath  # noqa: E402

from caffine import expr as ex  # noqa: E402

_MP_FUNCS = {
    "exp": mpmath.exp,
    "ln": mpmath.log,
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "atan": mpmath.atan,
    "sqrt": mpmath.sqrt,
}


def mp_eval(e, x):
    """Evaluate an expression tree in mpmath arithmetic (independent of the jet code)."""
    if isinstance(e, (ex.Num, ex.Param)):
        return mpmath.mpf(e.value)
    if isinstance(e, ex.Var):
        return x[e.index - 1]
    if isinstance(e, ex.Neg):
        return -mp_eval(e.arg, x)
    if isinstance(e, ex.Func):
        return _MP_FUNCS[e.name](mp_eval(e.arg, x))
    if isinstance(e, ex.Pow):
        return mp_eval(e.base, x) ** mp_eval(e.exponent, x)
    a, b = mp_eval(e.left, x), mp_eval(e.right, x)
    if isinstance(e, ex.Add):
        return a + b
    if isinstance(e, ex.Sub):
        return a - b
    if isinstance(e, ex.Mul):
        return a * b
    return a / b


def fd_gauss(chart, point, step="1e-6", dps=50):
    """Finite-difference oracle for (Gamma, c) in x_ij = Gamma^k_ij x_k + c_ij x.

    Returns float arrays (gamma[k, i, j], c[i, j]) and first derivatives of c
    (dc[i, j, l]) computed in high precision arithmetic.
    """
    mpmath.mp.dps = dps
    n = chart.n
    h = mpmath.mpf(step)
    x0 = [mpmath.mpf(float(v)) for v in point]

    def pos(x):
        return mpmath.matrix([mp_eval(e, x) for e in chart.exprs])

    def shifted(x, i, s):
        y = list(x)
        y[i] += s
        return y

    def solve(x):
        first = [(pos(shifted(x, i, h)) - pos(shifted(x, i, -h))) / (2 * h) for i in range(n)]
        A = mpmath.matrix(n + 1, n + 1)
        for i in range(n):
            for r in range(n + 1):
                A[r, i] = first[i][r]
        p = pos(x)
        for r in range(n + 1):
            A[r, n] = p[r]
        gam = np.zeros((n, n, n), dtype=object)
        c = np.zeros((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                if i == j:
                    sec = (pos(shifted(x, i, h)) - 2 * p + pos(shifted(x, i, -h))) / h**2
                else:
                    pp = pos(shifted(shifted(x, i, h), j, h))
                    pm = pos(shifted(shifted(x, i, h), j, -h))
                    mp_ = pos(shifted(shifted(x, i, -h), j, h))
                    mm = pos(shifted(shifted(x, i, -h), j, -h))
                    sec = (pp - pm - mp_ + mm) / (4 * h**2)
                sol = mpmath.lu_solve(A, sec)
                for k in range(n):
                    gam[k, i, j] = sol[k]
                c[i, j] = sol[n]
        return gam, c

    gam, c = solve(x0)
    big = mpmath.mpf("1e-4")
    dc = np.zeros((n, n, n))
    for l in range(n):
        _, cp = solve(shifted(x0, l, big))
        _, cm = solve(shifted(x0, l, -big))
        for i in range(n):
            for j in range(n):
                dc[i, j, l] = float((cp[i, j] - cm[i, j]) / (2 * big))
    to_f = np.vectorize(float)
    return to_f(gam).astype(float), to_f(c).astype(float), dc
