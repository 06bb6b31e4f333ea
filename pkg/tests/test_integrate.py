import numpy as np
import pytest
from scipy.linalg import expm

from mtdc_droop.errors import StiffnessError
from mtdc_droop.integrate import A, B4, B5, C, LinearRHS, StepLog, hermite, integrate


def test_tableau_consistency():
    for i in range(1, 6):
        assert A[i].sum() == pytest.approx(C[i], abs=1e-15)
    assert B4.sum() == pytest.approx(1.0, abs=1e-15)
    assert B5.sum() == pytest.approx(1.0, abs=1e-15)


def _oscillator():
    M = np.array([[-0.3, 2.0], [-2.0, -0.5]])
    c = np.array([0.4, -0.1])
    y0 = np.array([1.0, 0.0])
    return M, c, y0


def _exact(M, c, y0, t):
    ystar = -np.linalg.solve(M, c)
    return ystar + expm(M * t) @ (y0 - ystar)


@pytest.mark.parametrize("linear_fast_path", [True, False])
def test_fixed_step_fourth_order(linear_fast_path):
    M, c, y0 = _oscillator()
    f = LinearRHS(M, c) if linear_fast_path else (lambda t, y: M @ y + c)
    ref = _exact(M, c, y0, 2.0)
    errs = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        _, ys, _ = integrate(f, 0.0, 2.0, y0, h_max=h, fixed_step=True)
        errs.append(np.max(np.abs(ys[-1] - ref)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 3.5) & (orders < 4.5)), orders


def test_fast_path_matches_generic_step():
    M, c, y0 = _oscillator()
    generic = lambda t, y: M @ y + c
    kw = dict(h_max=0.05, fixed_step=True)
    t1, y1, _ = integrate(LinearRHS(M, c), 0.0, 3.0, y0, **kw)
    t2, y2, _ = integrate(generic, 0.0, 3.0, y0, **kw)
    assert np.array_equal(t1, t2)
    assert np.allclose(y1, y2, rtol=0, atol=1e-13)
    # adaptive step sequences may differ by rounding; the output grid may not
    kw = dict(h_max=0.5, rtol=1e-10, atol=1e-12, output_times=np.linspace(0, 3, 31), record_steps=False)
    t1, y1, _ = integrate(LinearRHS(M, c), 0.0, 3.0, y0, **kw)
    t2, y2, _ = integrate(generic, 0.0, 3.0, y0, **kw)
    assert np.array_equal(t1, t2)
    assert np.allclose(y1, y2, rtol=0, atol=1e-9)


def test_adaptive_meets_tolerance_and_hits_output_grid():
    M, c, y0 = _oscillator()
    grid = np.linspace(0.0, 5.0, 51)
    log = StepLog()
    ts, ys, _ = integrate(LinearRHS(M, c), 0.0, 5.0, y0, h_max=1.0, output_times=grid,
                          record_steps=False, log=log)
    assert np.allclose(ts, grid[1:], rtol=0, atol=1e-12)
    exact = np.array([_exact(M, c, y0, t) for t in ts])
    assert np.max(np.abs(ys - exact)) < 1e-6
    assert log.accepted > 0
    assert np.all(np.diff(ts) > 0)


def test_hermite_reproduces_cubics():
    p = lambda t: 2 * t ** 3 - t ** 2 + 0.5 * t - 3
    dp = lambda t: 6 * t ** 2 - 2 * t + 0.5
    t0, t1 = 0.3, 1.1
    ts = np.linspace(t0, t1, 7)
    out = hermite(t0, np.array([p(t0)]), np.array([dp(t0)]), t1, np.array([p(t1)]), np.array([dp(t1)]), ts)
    assert np.allclose(out[:, 0], p(ts), atol=1e-13)


def test_blowup_raises_stiffness_error():
    # finite-time blow-up of y' = y^2 at t = 1
    with pytest.raises(StiffnessError):
        integrate(lambda t, y: y * y, 0.0, 2.0, np.array([1.0]), h_max=0.1)


def test_empty_span():
    ts, ys, _ = integrate(lambda t, y: y, 1.0, 1.0, np.array([1.0]), h_max=0.1)
    assert ts.size == 0 and ys.shape == (0, 1)
