import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from congestion_waves.errors import (
    DiagonalDominanceWarning,
    InvalidParametersError,
    NonpositiveCoefficientError,
    SingularPivotError,
    SizeMismatchError,
)
from congestion_waves.numerics import (
    Grid,
    TridiagonalSystem,
    cumtrapz,
    diff1,
    diff2,
    div_flux,
    solve_tridiagonal,
    trapz,
    tridiagonal_residual,
)


def thomas(sub, diag, sup, rhs):
    """Reference elimination recurrence without pivoting."""
    n = len(diag)
    c, d = np.zeros(n), np.zeros(n)
    c[0], d[0] = (sup[0] / diag[0] if n > 1 else 0.0), rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i - 1] * c[i - 1]
        c[i] = sup[i] / m if i < n - 1 else 0.0
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / m
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def test_grid_properties():
    g = Grid(-1.0, 2.0, 31)
    assert g.dx == pytest.approx(0.1)
    assert g.xi[0] == -1.0 and g.xi[-1] == 2.0
    assert g.refined(2).n == 61
    assert g.xi[g.index_of(0.0)] == pytest.approx(0.0, abs=g.dx / 2)


@pytest.mark.parametrize("args", [(0.0, 1.0, 2), (1.0, 0.0, 10), (1.0, 2.0, 10), (-1.0, float("inf"), 10)])
def test_grid_invalid(args):
    with pytest.raises(InvalidParametersError):
        Grid(*args)


def test_size_mismatch():
    g = Grid(0.0, 1.0, 11)
    with pytest.raises(SizeMismatchError):
        diff1(np.zeros(10), g)
    with pytest.raises(SizeMismatchError):
        div_flux(np.ones(11), np.zeros(12), g)


def test_diff1_exact_cases():
    g = Grid(-1.0, 1.0, 21)
    assert np.all(diff1(np.full(g.n, 3.0), g) == 0)
    np.testing.assert_allclose(diff1(g.xi**2, g), 2 * g.xi, atol=1e-12)


def test_diff2_exact_cases():
    g = Grid(-1.0, 1.0, 21)
    np.testing.assert_allclose(diff2(3 * g.xi + 1, g), 0.0, atol=1e-10)
    np.testing.assert_allclose(diff2(g.xi**2, g), 2.0, atol=1e-10)


def _orders(errors):
    return [a / b for a, b in zip(errors, errors[1:])]


def test_diff1_convergence():
    errs = []
    for n in (41, 81, 161, 321):
        g = Grid(0.0, np.pi, n)
        errs.append(np.max(np.abs(diff1(np.sin(g.xi), g) - np.cos(g.xi))))
    assert all(3.6 < r < 4.4 for r in _orders(errs))


def test_diff2_convergence():
    errs = []
    for n in (41, 81, 161, 321):
        g = Grid(0.0, 1.0, n)
        errs.append(np.max(np.abs(diff2(np.exp(g.xi), g) - np.exp(g.xi))))
    assert all(3.6 < r < 4.4 for r in _orders(errs))


def test_div_flux_constant_coefficient():
    g = Grid(-1.0, 1.0, 41)
    f = np.sin(3 * g.xi)
    np.testing.assert_allclose(div_flux(np.full(g.n, 2.5), f, g)[1:-1], 2.5 * diff2(f, g)[1:-1], rtol=1e-12,
                               atol=1e-12)
    assert np.allclose(div_flux(1 + g.xi**2, np.full(g.n, 4.0), g), 0.0)


def test_div_flux_manufactured_convergence():
    errs = []
    for n in (41, 81, 161, 321):
        g = Grid(0.0, 1.0, n)
        x = g.xi
        a, f = 1 + x**2, np.sin(2 * x)
        exact = 2 * x * 2 * np.cos(2 * x) - (1 + x**2) * 4 * np.sin(2 * x)
        errs.append(np.max(np.abs(div_flux(a, f, g) - exact)))
    assert all(3.6 < r < 4.4 for r in _orders(errs))


def test_div_flux_rejects_nonpositive():
    g = Grid(0.0, 1.0, 11)
    coef = np.ones(g.n)
    coef[4] = 0.0
    with pytest.raises(NonpositiveCoefficientError):
        div_flux(coef, np.zeros(g.n), g)


def test_summation_by_parts_second_order():
    # the pairing error has a sizeable third-order part, so the ratios approach
    # 4 from above
    res = []
    for n in (401, 801, 1601, 3201):
        g = Grid(-1.0, 1.0, n)
        x = g.xi
        f, h = np.sin(np.pi * x), np.sin(2 * np.pi * x) * (1 + x)
        coef = 2 + np.cos(x)
        res.append(abs(trapz(h * div_flux(coef, f, g), g) + trapz(coef * diff1(f, g) * diff1(h, g), g)))
    ratios = _orders(res)
    assert all(r > 3.6 for r in ratios)
    assert 3.6 < ratios[-1] < 4.4


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(5, 40))
def test_stencils_linear(alpha, beta, n):
    g = Grid(0.0, 1.0, n)
    f, h = np.sin(5 * g.xi), g.xi**3
    coef = 1 + g.xi
    for op in (lambda u: diff1(u, g), lambda u: diff2(u, g), lambda u: div_flux(coef, u, g)):
        np.testing.assert_allclose(op(alpha * f + beta * h), alpha * op(f) + beta * op(h), atol=1e-9)


def test_trapz_and_cumtrapz():
    g = Grid(0.0, 1.0, 17)
    assert trapz(np.ones(g.n), g) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(cumtrapz(np.ones(g.n), g), g.xi - g.xi_min, atol=1e-15)
    wide = Grid(-10.0, 10.0, 2001)
    assert abs(trapz(np.exp(-wide.xi**2), wide) - np.sqrt(np.pi)) < 1e-10


def test_round_trip_derivative_of_primitive():
    errs = []
    for n in (101, 201, 401):
        g = Grid(-3.0, 3.0, n)
        f = np.exp(-g.xi**2) * np.cos(g.xi)
        errs.append(np.max(np.abs(diff1(cumtrapz(f, g), g) - f)[1:-1]))
    assert all(3.5 < r < 4.5 for r in _orders(errs))


def test_solve_identity():
    rhs = np.arange(5.0)
    sys = TridiagonalSystem(np.zeros(4), np.ones(5), np.zeros(4), rhs)
    np.testing.assert_array_equal(solve_tridiagonal(sys), rhs)


def test_solve_poisson_manufactured():
    n = 50
    x_true = np.sin(np.linspace(0, 3, n))
    sub, sup, diag = -np.ones(n - 1), -np.ones(n - 1), 2 * np.ones(n)
    sys = TridiagonalSystem(sub, diag, sup, np.zeros(n))
    sys = TridiagonalSystem(sub, diag, sup, sys.matvec(x_true))
    with pytest.warns(DiagonalDominanceWarning):
        x, res = solve_tridiagonal(sys, return_residual=True)
    np.testing.assert_allclose(x, x_true, atol=1e-12)
    assert res < 1e-13


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_solver_matches_thomas(n, seed):
    r = np.random.default_rng(seed)
    sub, sup = r.uniform(-1, 1, n - 1), r.uniform(-1, 1, n - 1)
    diag = 2.5 + r.uniform(0, 1, n)
    rhs = r.normal(size=n)
    sys = TridiagonalSystem(sub, diag, sup, rhs)
    assert sys.diagonally_dominant
    x = solve_tridiagonal(sys)
    np.testing.assert_allclose(x, thomas(sub, diag, sup, rhs), rtol=1e-12, atol=1e-12)
    assert tridiagonal_residual(sys, x) < 1e-12


def test_zero_diagonal_is_singular():
    sys = TridiagonalSystem(np.ones(2), np.array([1.0, 0.0, 1.0]), np.ones(2), np.ones(3))
    with pytest.raises(SingularPivotError):
        solve_tridiagonal(sys, check_dominance=False)


def test_singular_matrix_reports_pivot():
    sys = TridiagonalSystem(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]), np.ones(2))
    with pytest.raises(SingularPivotError):
        solve_tridiagonal(sys, check_dominance=False)


def test_band_sizes_checked():
    with pytest.raises(SizeMismatchError):
        TridiagonalSystem(np.zeros(3), np.ones(3), np.zeros(2), np.ones(3))
