"""Physical/controller parameters and the closed-loop AC/DC dynamics.

State ordering everywhere is ``x = [omega_1..omega_n, V_1..V_n]``. Absolute
coordinates are used by the simulator; the analysis works in incremental
coordinates ``x_hat = x - [omega_ref * 1, V_ref]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, SingularityError, ValidationError
from .grid import LaplacianBundle

DEFAULT_K_V = 10.0
BALANCE_TOL = 1e-9

_POSITIVE = ("inertia", "capacitance", "k_omega", "k_droop", "k_v")
_VECTORS = _POSITIVE + ("v_ref", "p_nom", "p_inj_nom")


def _vec(x, n, name):
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.shape == (1,) and n > 1:
        a = np.full(n, a[0])
    if a.shape != (n,):
        raise ValidationError(f"{name}: expected {n} values, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: non-finite entry")
    return a


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Per-node physical and controller constants, all per-unit.

    ``k_v_defaulted`` marks parameter sets whose voltage gain was filled in
    with :data:`DEFAULT_K_V` rather than chosen explicitly.
    """

    inertia: np.ndarray
    capacitance: np.ndarray
    k_omega: np.ndarray
    k_droop: np.ndarray
    k_v: np.ndarray
    v_ref: np.ndarray
    p_nom: np.ndarray
    p_inj_nom: np.ndarray
    omega_ref: float = 1.0
    v_nom: float = 1.0
    k_v_defaulted: bool = False

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.inertia)).shape[0]
        for name in _VECTORS:
            a = _vec(getattr(self, name), n, name)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            if name in _POSITIVE and np.any(a <= 0):
                bad = [int(i) + 1 for i in np.flatnonzero(a <= 0)]
                raise ValidationError(f"{name}: must be > 0 (nodes {bad})")
        object.__setattr__(self, "omega_ref", float(self.omega_ref))
        object.__setattr__(self, "v_nom", float(self.v_nom))
        if not (np.isfinite(self.v_nom) and self.v_nom > 0):
            raise ValidationError(f"v_nom: must be > 0, got {self.v_nom}")
        if not np.isfinite(self.omega_ref):
            raise ValidationError("omega_ref: non-finite")

    @classmethod
    def uniform(cls, n, *, inertia=1.0, capacitance=1.0, k_omega=1.0, k_droop=1.0,
                k_v=DEFAULT_K_V, v_ref=1.0, p_nom=0.0, p_inj_nom=0.0, omega_ref=1.0, v_nom=1.0):
        f = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        return cls(f(inertia), f(capacitance), f(k_omega), f(k_droop), f(k_v), f(v_ref),
                   f(p_nom), f(p_inj_nom), omega_ref, v_nom)

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    @property
    def n(self) -> int:
        return self.inertia.shape[0]

    @property
    def M(self) -> np.ndarray:
        return np.diag(1.0 / self.inertia)

    @property
    def E(self) -> np.ndarray:
        return np.diag(1.0 / self.capacitance)

    @property
    def balanced_nominals(self) -> bool:
        return bool(np.allclose(self.p_nom, self.p_inj_nom, rtol=0.0, atol=BALANCE_TOL))

    @property
    def x_ref(self) -> np.ndarray:
        return np.concatenate([np.full(self.n, self.omega_ref), self.v_ref])

    def uniform_gains(self) -> tuple[float, float, float]:
        """Scalar ``(k_omega, k_droop, k_v)`` if every node shares them."""
        out = []
        for name in ("k_omega", "k_droop", "k_v"):
            a = getattr(self, name)
            bad = np.flatnonzero(~np.isclose(a, a[0], rtol=1e-12, atol=0.0))
            if bad.size:
                nodes = [int(i) + 1 for i in bad]
                raise AssumptionError(
                    f"uniform gains required: {name} differs from node 1 at nodes {nodes}")
            out.append(float(a[0]))
        return tuple(out)


@dataclass(frozen=True, eq=False)
class Disturbance:
    """Piecewise-constant generation deviation ``P^m``.

    ``p_m`` holds before the first step; each step ``(t, vec)`` replaces the
    whole vector from time ``t`` on.
    """

    p_m: np.ndarray
    steps: tuple[tuple[float, np.ndarray], ...] = ()

    def __post_init__(self):
        pm = np.asarray(self.p_m, dtype=float)
        if pm.ndim != 1 or not np.all(np.isfinite(pm)):
            raise ValidationError("disturbance p_m: expected a finite vector")
        steps = []
        last = -np.inf
        for t, v in self.steps:
            v = np.asarray(v, dtype=float)
            if v.shape != pm.shape or not np.all(np.isfinite(v)):
                raise ValidationError(f"disturbance step at t={t}: bad p_m vector")
            if not t > last:
                raise ValidationError("disturbance step times must be strictly increasing")
            last = float(t)
            steps.append((float(t), v))
        object.__setattr__(self, "p_m", pm)
        object.__setattr__(self, "steps", tuple(steps))

    @property
    def step_times(self) -> list[float]:
        return [t for t, _ in self.steps]

    @property
    def final(self) -> np.ndarray:
        return self.steps[-1][1] if self.steps else self.p_m

    def at(self, t: float) -> np.ndarray:
        pm = self.p_m
        for ts, v in self.steps:
            if t >= ts:
                pm = v
        return pm


@dataclass(frozen=True, eq=False)
class SystemState:
    omega: np.ndarray
    voltage: np.ndarray

    @classmethod
    def from_vector(cls, x) -> SystemState:
        x = np.asarray(x, dtype=float)
        n = x.shape[0] // 2
        return cls(x[:n].copy(), x[n:].copy())

    @classmethod
    def reference(cls, params: SystemParams) -> SystemState:
        return cls(np.full(params.n, params.omega_ref), params.v_ref.copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.voltage])

    def incremental(self, params: SystemParams) -> np.ndarray:
        return self.to_vector() - params.x_ref


@dataclass(frozen=True, eq=False)
class ClosedLoopMatrices:
    """Linear closed loop ``xdot = A x + b_const + b_dist_map @ P^m`` in absolute coordinates."""

    A: np.ndarray
    b_const: np.ndarray
    b_dist_map: np.ndarray
    x_ref: np.ndarray

    @property
    def n(self) -> int:
        return self.b_dist_map.shape[1]

    @property
    def b_incremental(self) -> np.ndarray:
        """Constant term left over in incremental coordinates; zero when the references are an equilibrium."""
        return self.A @ self.x_ref + self.b_const

    def full_rhs(self, x, pm) -> np.ndarray:
        return self.A @ x + self.b_const + self.b_dist_map @ pm

    def equilibrium(self, pm) -> np.ndarray:
        return np.linalg.solve(self.A, -(self.b_const + self.b_dist_map @ np.asarray(pm, dtype=float)))


def _check_dims(params: SystemParams, laplacian: LaplacianBundle):
    if laplacian.n != params.n:
        raise ValidationError(f"dimension mismatch: params have {params.n} nodes, grid has {laplacian.n}")


def assemble_closed_loop(params: SystemParams, laplacian: LaplacianBundle) -> ClosedLoopMatrices:
    _check_dims(params, laplacian)
    n = params.n
    m_inv = 1.0 / params.inertia
    e = 1.0 / params.capacitance
    kw, kd, kv = params.k_omega, params.k_droop, params.k_v
    vn, wref, vref = params.v_nom, params.omega_ref, params.v_ref
    L = laplacian.laplacian

    A = np.empty((2 * n, 2 * n))
    A[:n, :n] = np.diag(-m_inv * (kw + kd))
    A[:n, n:] = np.diag(m_inv * kv)
    A[n:, :n] = np.diag(e * kw / vn)
    A[n:, n:] = -e[:, None] * (L + np.diag(kv / vn))

    b_ref = np.concatenate([
        m_inv * ((kw + kd) * wref - kv * vref),
        e * (kv * vref / vn - wref * kw / vn),
    ])
    b_nom = np.concatenate([
        m_inv * (params.p_nom - params.p_inj_nom),
        e * params.p_inj_nom / vn,
    ])
    b_dist = np.vstack([np.diag(m_inv), np.zeros((n, n))])
    return ClosedLoopMatrices(A, b_ref + b_nom, b_dist, params.x_ref)


def reference_equilibrium_defect(params: SystemParams, laplacian: LaplacianBundle) -> np.ndarray:
    """Residual of the linear model at the references with ``P^m = 0``.

    Zero iff ``P^nom = P^inj,nom`` and the nominal injections carry exactly
    the DC flow the reference voltages imply, ``P^inj,nom = V^nom L V^ref``.
    """
    _check_dims(params, laplacian)
    return np.concatenate([
        params.p_nom - params.p_inj_nom,
        params.p_inj_nom - params.v_nom * laplacian.laplacian @ params.v_ref,
    ])


def check_reference_equilibrium(params: SystemParams, laplacian: LaplacianBundle) -> None:
    if not params.balanced_nominals:
        bad = [int(i) + 1 for i in np.flatnonzero(~np.isclose(params.p_nom, params.p_inj_nom, rtol=0, atol=BALANCE_TOL))]
        raise AssumptionError(f"balanced nominals required (p_nom == p_inj_nom); violated at nodes {bad}")
    defect = reference_equilibrium_defect(params, laplacian)[params.n:]
    scale = max(1.0, float(np.max(np.abs(params.p_inj_nom))))
    if np.max(np.abs(defect)) > BALANCE_TOL * scale:
        bad = [int(i) + 1 for i in np.flatnonzero(np.abs(defect) > BALANCE_TOL * scale)]
        raise AssumptionError(
            "nominal injections inconsistent with reference voltages "
            f"(p_inj_nom != v_nom * L @ v_ref) at nodes {bad}")


def linear_rhs(matrices: ClosedLoopMatrices, state_incremental, pm) -> np.ndarray:
    """Incremental dynamics ``A x_hat + [M P^m; 0]``."""
    x = np.asarray(state_incremental, dtype=float)
    pm = np.asarray(pm, dtype=float)
    if x.shape != (2 * matrices.n,) or pm.shape != (matrices.n,):
        raise ValidationError(f"dimension mismatch: state {x.shape}, p_m {pm.shape}, n = {matrices.n}")
    return matrices.A @ x + matrices.b_dist_map @ pm


def droop_power(params: SystemParams, omega) -> np.ndarray:
    return -params.k_droop * (np.asarray(omega, dtype=float) - params.omega_ref)


def injected_power(params: SystemParams, omega, voltage) -> np.ndarray:
    """Converter set-point from the local frequency/voltage controller."""
    omega = np.asarray(omega, dtype=float)
    voltage = np.asarray(voltage, dtype=float)
    return (params.p_inj_nom + params.k_omega * (omega - params.omega_ref)
            + params.k_v * (params.v_ref - voltage))


def nonlinear_rhs_fn(params: SystemParams, laplacian: LaplacianBundle, linearize_current: bool = False):
    """Fast closure ``f(x, pm)`` for the nonlinear plant, used by the integrator."""
    _check_dims(params, laplacian)
    n = params.n
    m_inv = 1.0 / params.inertia
    e = 1.0 / params.capacitance
    kw, kd, kv = params.k_omega, params.k_droop, params.k_v
    wref, vref, vn = params.omega_ref, params.v_ref, params.v_nom
    p_gen0 = params.p_nom - params.p_inj_nom
    L = laplacian.laplacian

    def f(x, pm):
        w = x[:n] - wref
        v = x[n:]
        p_inj = kw * w + kv * (vref - v)
        dw = m_inv * (p_gen0 + pm - kd * w - p_inj)
        p_inj += params.p_inj_nom
        if linearize_current:
            i_inj = p_inj / vn
        else:
            if np.any(v <= 0):
                k = int(np.flatnonzero(v <= 0)[0])
                raise SingularityError(k, float(v[k]))
            i_inj = p_inj / v
        dv = e * (i_inj - L @ v)
        return np.concatenate([dw, dv])

    return f


def nonlinear_rhs(params: SystemParams, laplacian: LaplacianBundle, state: SystemState, pm,
                  linearize_current: bool = False) -> np.ndarray:
    """Swing equation plus DC node dynamics with ``I^inj = P^inj / V``.

    With ``linearize_current`` the current uses ``V^nom`` instead of the
    local voltage, which reproduces the linear model exactly.
    """
    pm = np.asarray(pm, dtype=float)
    if pm.shape != (params.n,):
        raise ValidationError(f"p_m: expected {params.n} values, got shape {pm.shape}")
    return nonlinear_rhs_fn(params, laplacian, linearize_current)(state.to_vector(), pm)
