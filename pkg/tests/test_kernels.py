"""Backend equivalence: the numba kernels and the numpy fallbacks must agree."""

import numpy as np
import pytest

from sedinv._backend import USE_NUMBA

if not USE_NUMBA:
    pytest.skip("numba backend unavailable; nothing to compare",
                allow_module_level=True)

import sedinv.kernels as K  # noqa: E402


def _random_state(n=64, seed=0):
    rng = np.random.default_rng(seed)
    prev = rng.standard_normal((n, n))
    cur = rng.standard_normal((n, n))
    coef = rng.uniform(0.1, 0.2, (n, n))
    d1 = rng.uniform(0.9, 1.0, (n, n))
    d2 = rng.uniform(0.9, 1.0, (n, n))
    return prev, cur, coef, d1, d2


def test_step_forward_matches_fallback():
    prev, cur, coef, d1, d2 = _random_state()
    out_nb = np.zeros_like(cur)
    out_np = np.zeros_like(cur)
    K._step_forward_nb(prev, cur, coef, d1, d2, 4.0, 9.0, out_nb)
    K._step_forward_np(prev, cur, coef, d1, d2, 4.0, 9.0, out_np)
    np.testing.assert_allclose(out_nb, out_np, rtol=1e-13, atol=1e-15)


def test_step_adjoint_matches_fallback():
    prev, cur, coef, d1, d2 = _random_state(seed=1)
    out_nb = np.zeros_like(cur)
    out_np = np.zeros_like(cur)
    K._step_adjoint_nb(prev, cur, coef, d1, d2, 4.0, 9.0, out_nb)
    K._step_adjoint_np(prev, cur, coef, d1, d2, 4.0, 9.0, out_np)
    np.testing.assert_allclose(out_nb, out_np, rtol=1e-13, atol=1e-15)


def test_lap_and_accumulate_match_fallback():
    prev, cur, _, _, _ = _random_state(seed=2)
    a_nb = np.zeros_like(cur)
    a_np = np.zeros_like(cur)
    K._lap4_nb(cur, 4.0, 9.0, a_nb)
    K._lap4_np(cur, 4.0, 9.0, a_np)
    np.testing.assert_allclose(a_nb, a_np, rtol=1e-13, atol=1e-15)

    acc_nb = np.ones_like(cur)
    acc_np = np.ones_like(cur)
    K._accumulate_lap_product_nb(cur, prev, 4.0, 9.0, acc_nb)
    K._accumulate_lap_product_np(cur, prev, 4.0, 9.0, acc_np)
    np.testing.assert_allclose(acc_nb, acc_np, rtol=1e-12, atol=1e-14)


def test_cover_mask_backends_identical():
    rng = np.random.default_rng(3)
    xc = (np.arange(57) + 0.5) * 0.017
    yc = (np.arange(43) + 0.5) * 0.023
    px = rng.uniform(0, 1, 40)
    py = rng.uniform(0, 1, 40)
    m_nb = K._cover_mask_nb(xc, yc, px, py, 0.06)
    m_np = K._cover_mask_np(xc, yc, px, py, 0.06)
    assert np.array_equal(m_nb, m_np)


def test_cover_mask_empty():
    xc = np.array([0.5])
    yc = np.array([0.5])
    empty = np.empty(0)
    assert K.cover_mask(xc, yc, empty, empty, 0.1).sum() == 0


def test_adjoint_step_is_exact_transpose_of_forward_step():
    """<A x, y> == <x, A^T y> for the single-step u^n -> u^{n+1} map.

    A = D1 (2I + C L), so A^T = (2I + L C) D1, which step_adjoint evaluates
    when fed d1*y with its own leading D1 disabled.
    """
    rng = np.random.default_rng(4)
    n = 32
    coef = rng.uniform(0.05, 0.15, (n, n))
    d1 = rng.uniform(0.85, 1.0, (n, n))
    d2 = rng.uniform(0.85, 1.0, (n, n))
    x = np.zeros((n, n))
    y = np.zeros((n, n))
    x[2:-2, 2:-2] = rng.standard_normal((n - 4, n - 4))
    y[2:-2, 2:-2] = rng.standard_normal((n - 4, n - 4))

    ax = np.zeros_like(x)
    K.step_forward(np.zeros_like(x), x, coef, d1, d2, 4.0, 9.0, ax)
    aty = np.zeros_like(y)
    K.step_adjoint(np.zeros_like(y), d1 * y, coef, np.ones_like(d1), d2, 4.0, 9.0, aty)
    assert float((ax * y).sum()) == pytest.approx(float((x * aty).sum()), rel=1e-12)
