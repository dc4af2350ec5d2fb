import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from caffine import catalog as cat
from caffine.classify import (
    ALLOWED_P,
    ClassifyConfig,
    branch_values,
    build_L,
    classify_point,
    classify_tensor,
    critical_dimension,
    decompose_D2,
    maximize_cubic,
    octonion_mul,
    octonion_product,
    p_operator,
    rho_squared_formula,
    spectrum_split,
    symmetric_label,
    trace_rho_check,
)
from caffine.errors import ForbiddenP, IsotropyViolation, ZeroCubic
from caffine.geometry import invariants_at
from caffine.synthetic import (
    case_b_tensor,
    forbidden_p_operator,
    random_congruence,
    tensor_from_cubic,
    typical_tensor,
)
from l_identities import isotropy_residual, orthonormal_identity_residual


def _pipeline(h, K, eps):
    e1, _ = maximize_cubic(h, K)
    spec = spectrum_split(h, K, e1, eps)
    L = build_L(h, K, spec)
    return spec, L, decompose_D2(L)


@pytest.fixture(scope="module")
def det_sym_data():
    ch = cat.make_det_sym(3)
    d = invariants_at(ch, ch.center)
    return d.h, d.K, d.epsilon


@pytest.fixture(scope="module")
def det_herm_data():
    ch = cat.make_det_herm(3)
    d = invariants_at(ch, ch.center)
    return d.h, d.K, d.epsilon


# ---------------------------------------------------------------- octonions


@pytest.mark.parametrize("i,j,expected", [(1, 2, (1, 3)), (4, 5, (1, 1)), (6, 6, (-1, 0))])
def test_octonion_table_examples(i, j, expected):
    assert octonion_mul(i, j) == expected


def test_octonion_table_exact_properties():
    units = set()
    for i, j in itertools.product(range(1, 8), repeat=2):
        s, k = octonion_mul(i, j)
        units.add((s, k))
        if i == j:
            assert (s, k) == (-1, 0)
        else:
            s2, k2 = octonion_mul(j, i)
            assert k == k2 and s == -s2 and k != 0
    assert units <= {(sg, k) for sg in (1, -1) for k in range(8)}


def test_octonion_each_row_is_a_permutation():
    for i in range(1, 8):
        ks = sorted(octonion_mul(i, j)[1] for j in range(1, 8) if j != i)
        assert ks == [k for k in range(1, 8) if k != i]


@given(
    st.lists(st.floats(-2, 2), min_size=8, max_size=8),
    st.lists(st.floats(-2, 2), min_size=8, max_size=8),
)
def test_octonion_norm_is_multiplicative(a, b):
    a, b = np.array(a), np.array(b)
    ab = octonion_product(a, b)
    assert np.linalg.norm(ab) == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b), abs=1e-10)


@given(
    st.lists(st.floats(-2, 2), min_size=8, max_size=8),
    st.lists(st.floats(-2, 2), min_size=8, max_size=8),
)
def test_octonion_alternative_law(a, b):
    a, b = np.array(a), np.array(b)
    left = octonion_product(octonion_product(a, a), b)
    right = octonion_product(a, octonion_product(a, b))
    assert np.allclose(left, right, atol=1e-9)


# ---------------------------------------------------------------- maximizer


def test_maximize_case_b():
    h, K, _ = case_b_tensor(3)
    e1, lam = maximize_cubic(h, K)
    assert lam == pytest.approx(2.0, abs=1e-10)
    assert abs(abs(e1[0]) - 1) < 1e-9


def test_maximize_zero_cubic():
    with pytest.raises(ZeroCubic):
        maximize_cubic(np.eye(3), np.zeros((3, 3, 3)))


def test_maximize_det_sym(det_sym_data):
    h, K, _ = det_sym_data
    _, lam = maximize_cubic(h, K)
    assert lam == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def _f(h, K, u):
    return float(np.einsum("kij,i,j,kl,l->", K, u, u, h, u))


@given(st.integers(0, 10_000), st.integers(2, 5))
def test_argmax_is_global_and_stationary(seed, n):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((n, n, n))
    C = sum(C.transpose(p) for p in itertools.permutations(range(3))) / 6
    a = rng.standard_normal((n, n))
    h = a @ a.T + n * np.eye(n)
    K = tensor_from_cubic(C, h)
    e1, lam = maximize_cubic(h, K, seed=seed)
    assert e1 @ h @ e1 == pytest.approx(1.0, abs=1e-12)
    ke = np.einsum("kij,i,j->k", K, e1, e1) - lam * e1
    assert math.sqrt(ke @ h @ ke) < 1e-9 * max(1.0, abs(lam))
    us = rng.standard_normal((1000, n))
    norms = np.sqrt(np.einsum("ai,ij,aj->a", us, h, us))
    vals = np.einsum("kij,ai,aj,kl,al->a", K, us, us, h, us) / norms**3
    assert np.all(vals <= lam + 1e-9)


@given(st.integers(0, 1000), st.floats(0.1, 20.0))
def test_argmax_scale_equivariance(seed, c):
    # generic cubics have a nondegenerate maximum, so the direction is well conditioned
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((4, 4, 4))
    C = sum(C.transpose(p) for p in itertools.permutations(range(3))) / 6
    h = np.eye(4)
    K = tensor_from_cubic(C)
    e1, lam = maximize_cubic(h, K)
    e1c, lamc = maximize_cubic(h, c * K)
    assert lamc == pytest.approx(c * lam, rel=1e-9)
    assert np.allclose(e1c, e1, atol=1e-7)


# ---------------------------------------------------------------- spectrum


def test_spectrum_cm_two():
    h, K, eps = typical_tensor(3.0, 1, 1, 1)
    spec = spectrum_split(h, K, np.eye(3)[0], eps)
    assert spec.case == "CaseCm(2)" and spec.m == 2
    assert spec.mu == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
    assert sorted(spec.values) == pytest.approx([0.3819660112501051, 1.5])


def test_spectrum_case_b():
    h, K, eps = case_b_tensor(3)
    spec = spectrum_split(h, K, np.eye(3)[0], eps)
    assert spec.case == "CaseB"


def test_spectrum_c1():
    h, K, eps = typical_tensor(3.0, 1, 0, 3)
    spec = spectrum_split(h, K, np.eye(4)[0], eps)
    assert spec.case == "CaseC1"


def test_branch_values():
    eta, mu = branch_values(3.0, 1)
    assert eta == pytest.approx(math.sqrt(5) / 2)
    assert 1 - 3 * mu + mu * mu == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("entry", ["power", "surface6_b", "case_b3", "det_sym", "det_herm"])
def test_branch_polynomial_on_catalog(entry):
    ch = cat.build(entry)
    d = invariants_at(ch, ch.center)
    e1, lam = maximize_cubic(d.h, d.K)
    spec = spectrum_split(d.h, d.K, e1, d.epsilon)
    bound = 1e-7 * (1 + lam**3)
    for v in spec.values:
        assert abs((lam - 2 * v) * (d.epsilon - lam * v + v * v)) < bound


# ---------------------------------------------------------------- L and P_v


def test_L_isotropy_value_det_sym(det_sym_data):
    spec, L, _ = _pipeline(*det_sym_data)
    for v in np.eye(L.d2):
        lv = L(v, v)
        assert lv @ lv == pytest.approx(0.375, abs=1e-9)


def test_L_vanishes_inside_block(det_herm_data):
    spec, L, dec = _pipeline(*det_herm_data)
    for v, V0 in dec.blocks:
        for u in V0.T:
            assert np.linalg.norm(L(u, v)) < 1e-9


def test_L_quadratic_identities(det_sym_data, det_herm_data):
    rng = np.random.default_rng(5)
    for data in (det_sym_data, det_herm_data):
        _, L, _ = _pipeline(*data)
        assert orthonormal_identity_residual(L, rng) < 1e-9
        assert isotropy_residual(L, rng, 20) < 1e-9


def test_p_operator_det_sym(det_sym_data):
    spec, L, _ = _pipeline(*det_sym_data)
    assert L.sigma == pytest.approx(0.375, abs=1e-9)
    assert L.tau == pytest.approx(0.375, abs=1e-9)
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.standard_normal(L.d2)
        ps = p_operator(L, v)
        allowed = np.array([0.0, L.tau])
        assert np.min(np.abs(ps.values[:, None] - allowed), axis=1).max() < 1e-9
        assert ps.symmetry_residual < 1e-9


def test_p_kernel_implies_L_vanishes(det_herm_data):
    _, L, _ = _pipeline(*det_herm_data)
    v = np.linspace(1, 2, L.d2)
    ps = p_operator(L, v)
    for u in ps.V0.T:
        assert np.linalg.norm(L(u, ps.v)) < 1e-9


def test_build_L_rejects_other_cases():
    h, K, eps = typical_tensor(3.0, 1, 0, 3)
    spec = spectrum_split(h, K, np.eye(4)[0], eps)
    with pytest.raises(IsotropyViolation):
        build_L(h, K, spec)


def test_decompose_det_sym(det_sym_data):
    _, _, dec = _pipeline(*det_sym_data)
    assert (dec.k0, dec.p) == (2, 0)
    assert dec.trace_L_norm < 1e-7


def test_decompose_det_herm(det_herm_data):
    _, _, dec = _pipeline(*det_herm_data)
    assert (dec.k0, dec.p) == (2, 1)
    assert dec.trace_L_norm < 1e-7


def test_forbidden_p_rejected():
    with pytest.raises(ForbiddenP):
        decompose_D2(forbidden_p_operator(p=2))


@pytest.mark.parametrize("p", [4, 5, 6])
def test_forbidden_p_other_values(p):
    with pytest.raises(ForbiddenP):
        decompose_D2(forbidden_p_operator(p=p))


@pytest.mark.parametrize("p", sorted(ALLOWED_P))
def test_allowed_p_passes_gate(p):
    dec = decompose_D2(forbidden_p_operator(p=p))
    assert dec.p == p and dec.k0 == 2


# ---------------------------------------------------------------- rho


def test_rho_det_sym(det_sym_data):
    spec, _, dec = _pipeline(*det_sym_data)
    chk = trace_rho_check(dec, spec)
    assert chk["agree"]
    assert chk["trace_sq_direct"] < 1e-7 and abs(chk["trace_sq_formula"]) < 1e-7


def test_rho_formula_synthetic_value():
    mpmath.mp.dps = 30
    ref = (9 * mpmath.sqrt(5) - 5) / 4
    assert rho_squared_formula(0, 2, 3.0, 1) == pytest.approx(float(ref), abs=1e-13)
    assert float(ref) == pytest.approx(3.78115, abs=1e-5)


def test_rho_vanishes_at_octonion_point():
    assert rho_squared_formula(7, 2, 1 / math.sqrt(2), -1) == pytest.approx(0, abs=1e-15)


def test_critical_dimensions():
    assert critical_dimension(0, 3) == 5
    assert critical_dimension(1, 5) == 8
    assert critical_dimension(3, 9) == 14
    assert critical_dimension(7, 17) == 26
    assert critical_dimension(2, 5) is None
    assert symmetric_label(0, 3) == "SL_R(3)"
    assert symmetric_label(1, 5) == "SL_C(3)"
    assert symmetric_label(3, 9) == "SU_star(6)"
    assert symmetric_label(7, 17) == "E6_F4"


# ---------------------------------------------------------------- full pipeline


def test_classify_case_b_point():
    rep = classify_point(cat.make_case_b(3), [0.1, -0.1, 0.2])
    assert rep.label == "CaseB" and rep.epsilon == 1
    assert rep.lambda1 == pytest.approx(2, abs=1e-8)


def test_classify_det_sym():
    ch = cat.make_det_sym(3)
    rep = classify_point(ch, ch.center + 0.01)
    assert rep.label == "SL_R(3)"
    assert (rep.n, rep.k0, rep.p) == (5, 2, 0)


def test_classify_quadric():
    ch = cat.make_quadric(3, 1)
    assert classify_point(ch, ch.center).label == "Quadric"


def test_classify_case_cn_diagnostic():
    h, K, eps = typical_tensor(3.0, 1, 3, 0)
    rep = classify_tensor(h, K, eps)
    assert rep.label == "Unrecognized" and rep.case == "CaseCn"
    assert "cannot occur" in rep.diagnostic


def test_classify_non_parallel_is_flagged():
    from helpers import perturbed_sphere

    rep = classify_point(perturbed_sphere(), [0.2, 0.1])
    assert rep.label == "Unrecognized"
    assert rep.residuals["parallel"] > 1e-3


def test_classify_is_deterministic():
    ch = cat.make_det_herm(3)
    a = classify_point(ch, ch.center, ClassifyConfig(seed=3)).to_dict()
    b = classify_point(ch, ch.center, ClassifyConfig(seed=3)).to_dict()
    assert a == b


@given(st.integers(0, 500))
def test_classification_invariant_under_coordinate_change(seed):
    h, K, eps = typical_tensor(3.0, 1, 0, 2)
    h2, K2 = random_congruence(h, K, seed=seed)
    rep = classify_tensor(h2, K2, eps)
    assert rep.case == "CaseC1"
    assert rep.lambda1 == pytest.approx(3.0, abs=1e-8)
