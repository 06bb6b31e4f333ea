"""Runge-Kutta-Fehlberg 4(5) integrator for small dense ODE systems.

The 4th order solution is propagated and the embedded 5th order solution is
only used for the local error estimate, so fixed-step runs converge with
order 4. Output between accepted steps uses cubic Hermite interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StiffnessError

C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
A = [
    np.array([]),
    np.array([1 / 4]),
    np.array([3 / 32, 9 / 32]),
    np.array([1932 / 2197, -7200 / 2197, 7296 / 2197]),
    np.array([439 / 216, -8.0, 3680 / 513, -845 / 4104]),
    np.array([-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40]),
]
B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
ERR = B5 - B4

H_MIN = 1e-12
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class StepLog:
    accepted: int = 0
    rejected: int = 0


class LinearRHS:
    """``f(t, y) = A y + c`` with constant ``A`` and ``c``.

    For such systems every stage is a matrix polynomial in ``hA`` applied to
    ``f(y)``, so the step and error maps are built once per step size and a
    step costs two matrix-vector products.
    """

    def __init__(self, A, c):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self._h = None
        self._maps = None

    def __call__(self, t, y):
        return self.A @ y + self.c

    def step_maps(self, h):
        if h != self._h:
            Z = h * self.A
            eye = np.eye(self.A.shape[0])
            q = [eye]
            for i in range(1, 6):
                q.append(eye + Z @ sum(a * qj for a, qj in zip(A[i], q)))
            self._maps = (h * sum(b * qi for b, qi in zip(B4, q)),
                          h * sum(e * qi for e, qi in zip(ERR, q)))
            self._h = h
        return self._maps


def rkf45_step(f, t, y, h, k1):
    """One step; returns ``(y4, err_vec)`` where ``err_vec = y5 - y4``."""
    if isinstance(f, LinearRHS):
        step, err = f.step_maps(h)
        return y + step @ k1, err @ k1
    K = np.empty((6, y.shape[0]))
    K[0] = k1
    with np.errstate(over="ignore", invalid="ignore"):  # overflow means rejection
        for i in range(1, 6):
            K[i] = f(t + C[i] * h, y + h * (A[i] @ K[:i]))
        return y + h * (B4 @ K), h * (ERR @ K)


def _initial_step(f, t, y, f0, rtol, atol, h_max):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    sc = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = f(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, h_max)


def hermite(t0, y0, f0, t1, y1, f1, t):
    """Cubic Hermite interpolant on ``[t0, t1]`` evaluated at the times ``t``."""
    h = t1 - t0
    s = ((np.asarray(t) - t0) / h)[:, None]
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate(f, t0, t1, y0, *, h_max, rtol=1e-8, atol=1e-10, fixed_step=False,
              output_times=(), record_steps=True, h_init=None, log=None):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1``.

    Returns ``(times, states, h_last)``. ``times`` holds the accepted step
    end points (if ``record_steps``) merged with the requested
    ``output_times`` lying in ``(t0, t1]``; ``t0`` itself is not included.
    With ``fixed_step`` every step has length ``h_max`` except possibly the
    last, which is shortened to land on ``t1``.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = t1 - t0
    if span <= 0:
        return np.empty(0), np.empty((0, y.shape[0])), h_init
    eps_t = 1e-12 * max(1.0, abs(t1))
    out = np.asarray(sorted(output_times), dtype=float)
    out = out[(out > t0 + eps_t) & (out <= t1 + eps_t)]
    oi = 0
    n_out = out.size

    times, states = [], []
    size = y.shape[0]
    fy = f(t, y)
    if fixed_step:
        h = h_max
    elif h_init is not None:
        h = min(h_init, h_max)
    else:
        h = _initial_step(f, t, y, fy, rtol, atol, h_max)
    log = log if log is not None else StepLog()

    while t1 - t > eps_t:
        h = min(h, t1 - t)
        last = t + h >= t1 - eps_t
        y_new, err = rkf45_step(f, t, y, h, fy)
        if not fixed_step:
            r = err / (atol + rtol * np.maximum(np.abs(y), np.abs(y_new)))
            en = math.sqrt(float(r @ r) / size)
            if not math.isfinite(en) or en > 1.0:
                log.rejected += 1
                factor = MIN_FACTOR if not math.isfinite(en) else max(MIN_FACTOR, SAFETY * en ** -0.2)
                h *= factor
                if h < H_MIN:
                    raise StiffnessError(f"step size fell below {H_MIN:g} s at t = {t:.6g} s")
                continue
        t_new = t1 if last else t + h
        f_new = f(t_new, y_new)
        log.accepted += 1

        on_grid = False
        if oi < n_out and out[oi] <= t_new + eps_t:
            j = oi
            while j < n_out and out[j] < t_new - eps_t:
                j += 1
            if j > oi:
                ys = hermite(t, y, fy, t_new, y_new, f_new, out[oi:j])
                times.extend(out[oi:j])
                states.extend(ys)
            while j < n_out and out[j] <= t_new + eps_t:
                j += 1  # coincides with the step end point
                on_grid = True
            oi = j
        if record_steps or on_grid or last:
            times.append(t_new)
            states.append(y_new)

        t, y, fy = t_new, y_new, f_new
        if not fixed_step:
            factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * en ** -0.2))
            h = min(h * factor, h_max)

    return np.asarray(times), np.asarray(states).reshape(len(states), -1), h
