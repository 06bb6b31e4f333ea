"""Time-domain simulation of the closed loop over a load-step timeline."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .analysis import solve_equilibrium
from .errors import NumericalError, SingularityError, ValidationError
from .grid import GridTopology, build_laplacian
from .integrate import LinearRHS, StepLog, integrate
from .plant import (Disturbance, SystemParams, SystemState, assemble_closed_loop,
                    check_reference_equilibrium, droop_power, injected_power,
                    nonlinear_rhs_fn)

log = logging.getLogger(__name__)

MODELS = ("linear", "nonlinear")
EQUILIBRIUM = "equilibrium"


@dataclass(frozen=True, eq=False)
class Scenario:
    params: SystemParams
    topology: GridTopology
    disturbance: Disturbance
    t_end: float
    dt_max: float
    model: str = "linear"
    initial_state: SystemState | str = EQUILIBRIUM
    output_grid: float = 0.01
    rtol: float = 1e-8
    atol: float = 1e-10
    fixed_step: bool = False
    record_steps: bool = True

    def __post_init__(self):
        n = self.params.n
        if self.topology.n_nodes != n:
            raise ValidationError(f"grid has {self.topology.n_nodes} nodes but params have {n}")
        if self.disturbance.p_m.shape != (n,):
            raise ValidationError(f"disturbance p_m must have {n} entries")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be > 0, got {self.t_end}")
        if not self.dt_max > 0:
            raise ValidationError(f"dt_max must be > 0, got {self.dt_max}")
        if not self.output_grid > 0:
            raise ValidationError(f"output_grid must be > 0, got {self.output_grid}")
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}, got {self.model!r}")
        for t in self.disturbance.step_times:
            if not 0 <= t <= self.t_end:
                raise ValidationError(f"disturbance step at t={t} outside [0, {self.t_end}]")
        if isinstance(self.initial_state, str):
            if self.initial_state != EQUILIBRIUM:
                raise ValidationError(f"initial_state must be a state or {EQUILIBRIUM!r}")
        elif self.initial_state.omega.shape != (n,) or self.initial_state.voltage.shape != (n,):
            raise ValidationError(f"initial_state must have {n} frequencies and {n} voltages")

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    omega: np.ndarray
    voltage: np.ndarray
    pdroop: np.ndarray
    pinj: np.ndarray
    lyapunov_W: np.ndarray
    p_m: np.ndarray | None = None
    steps: StepLog | None = None

    @property
    def n(self) -> int:
        return self.omega.shape[1]

    def __len__(self):
        return self.times.shape[0]

    @property
    def state_vectors(self) -> np.ndarray:
        return np.hstack([self.omega, self.voltage])

    def states(self) -> list[SystemState]:
        return [SystemState(w, v) for w, v in zip(self.omega, self.voltage)]

    def header(self) -> list[str]:
        return self.header_for(self.n)

    def to_csv(self, dest=None) -> str | None:
        """Write the trajectory table; returns the text when ``dest`` is None."""
        data = np.column_stack([self.times, self.omega, self.voltage, self.pdroop, self.pinj, self.lyapunov_W])
        buf = io.StringIO()
        np.savetxt(buf, data, fmt="%.9g", delimiter=",", header=",".join(self.header()), comments="")
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            Path(dest).write_text(text)
        return None

    @classmethod
    def from_csv(cls, src) -> Trajectory:
        text = src.read() if hasattr(src, "read") else Path(src).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValidationError("empty trajectory file")
        header = rows[0]
        n = (len(header) - 2) // 4
        if len(header) != 4 * n + 2 or header != cls.header_for(n):
            raise ValidationError("trajectory CSV header does not match the expected schema")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(header))
        cols = np.split(data[:, 1:-1], 4, axis=1)
        return cls(data[:, 0], *cols, data[:, -1])

    @staticmethod
    def header_for(n: int) -> list[str]:
        r = range(1, n + 1)
        return (["time"] + [f"omega_{i}" for i in r] + [f"v_{i}" for i in r]
                + [f"pdroop_{i}" for i in r] + [f"pinj_{i}" for i in r] + ["W"])


def lyapunov_weights(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal weights of ``W = 1/2 wbar' K^w (K^V)^-1 M^-1 wbar + V^nom/2 Vbar' C Vbar``."""
    return params.k_omega * params.inertia / params.k_v, params.v_nom * params.capacitance


def lyapunov_value(params: SystemParams, xbar) -> np.ndarray:
    """W at shifted states ``xbar`` (shape ``(2n,)`` or ``(T, 2n)``)."""
    xbar = np.asarray(xbar, dtype=float)
    n = params.n
    ww, wv = lyapunov_weights(params)
    return 0.5 * (np.sum(ww * xbar[..., :n] ** 2, axis=-1) + np.sum(wv * xbar[..., n:] ** 2, axis=-1))


def lyapunov_along(trajectory: Trajectory, params: SystemParams, equilibrium) -> np.ndarray:
    """``(time, W)`` rows with W taken about the incremental equilibrium ``equilibrium``."""
    equilibrium = np.asarray(equilibrium, dtype=float)
    if equilibrium.shape != (2 * params.n,) or trajectory.n != params.n:
        raise ValidationError("equilibrium/trajectory dimension mismatch")
    xbar = trajectory.state_vectors - params.x_ref - equilibrium
    return np.column_stack([trajectory.times, lyapunov_value(params, xbar)])


def _rhs_factory(scenario: Scenario, lap, mats):
    if scenario.model == "linear":
        A, b, Bd = mats.A, mats.b_const, mats.b_dist_map

        def make(pm):
            return LinearRHS(A, b + Bd @ pm)
        return make

    g = nonlinear_rhs_fn(scenario.params, lap)

    def make(pm):
        def f(t, x):
            try:
                return g(x, pm)
            except SingularityError as exc:
                raise SingularityError(exc.node, exc.voltage, t) from None
        return f
    return make


def initial_vector(scenario: Scenario, lap=None) -> np.ndarray:
    params = scenario.params
    if not isinstance(scenario.initial_state, str):
        return scenario.initial_state.to_vector()
    lap = lap if lap is not None else build_laplacian(scenario.topology)
    check_reference_equilibrium(params, lap)
    pm0 = scenario.disturbance.p_m
    eq = solve_equilibrium(params, lap, pm0)
    x0 = params.x_ref + np.concatenate([eq.omega_hat, eq.v_hat])
    if scenario.model == "nonlinear":
        g = nonlinear_rhs_fn(params, lap)
        sol = optimize.root(lambda x: g(x, pm0), x0, method="hybr", tol=1e-14)
        if not sol.success or np.max(np.abs(g(sol.x, pm0))) > 1e-9:
            raise NumericalError(f"nonlinear steady state not found: {sol.message}")
        x0 = sol.x
    return x0


def simulate(scenario: Scenario) -> Trajectory:
    params = scenario.params
    lap = build_laplacian(scenario.topology)
    mats = assemble_closed_loop(params, lap)
    make_rhs = _rhs_factory(scenario, lap, mats)
    x = initial_vector(scenario, lap)

    dist = scenario.disturbance
    t_end = scenario.t_end
    cuts = sorted({0.0, t_end, *[t for t in dist.step_times if 0 < t < t_end]})
    grid = np.arange(0.0, t_end + 0.5 * scenario.output_grid, scenario.output_grid)
    grid = grid[grid <= t_end * (1 + 1e-12)]

    steps = StepLog()
    times, states, pms = [np.array([0.0])], [x[None, :]], [dist.at(0.0)[None, :]]
    h = None
    for a, b in zip(cuts[:-1], cuts[1:]):
        pm = dist.at(a)
        ts, xs, h = integrate(make_rhs(pm), a, b, x, h_max=scenario.dt_max, rtol=scenario.rtol,
                              atol=scenario.atol, fixed_step=scenario.fixed_step,
                              output_times=grid, record_steps=scenario.record_steps,
                              h_init=h, log=steps)
        if ts.size == 0:
            continue
        x = xs[-1]
        # state at a step time belongs to the post-step segment
        seg_pm = np.repeat(pm[None, :], ts.size, axis=0)
        if b < t_end:
            seg_pm[-1] = dist.at(b)
        times.append(ts)
        states.append(xs)
        pms.append(seg_pm)

    times = np.concatenate(times)
    X = np.vstack(states)
    PM = np.vstack(pms)
    n = params.n
    log.debug("simulate: %d accepted / %d rejected steps, %d samples",
              steps.accepted, steps.rejected, times.size)

    W = np.empty(times.size)
    for pm in np.unique(PM, axis=0):
        rows = np.all(PM == pm, axis=1)
        W[rows] = lyapunov_value(params, X[rows] - mats.equilibrium(pm))

    return Trajectory(
        times=times,
        omega=X[:, :n],
        voltage=X[:, n:],
        pdroop=droop_power(params, X[:, :n]),
        pinj=injected_power(params, X[:, :n], X[:, n:]),
        lyapunov_W=W,
        p_m=PM,
        steps=steps,
    )


def derivative_norms(scenario: Scenario, trajectory: Trajectory) -> np.ndarray:
    """``||xdot||_inf`` of the scenario's model at every trajectory sample."""
    lap = build_laplacian(scenario.topology)
    mats = assemble_closed_loop(scenario.params, lap)
    pms = trajectory.p_m
    if pms is None:
        pms = np.array([scenario.disturbance.at(t) for t in trajectory.times])
    X = trajectory.state_vectors
    if scenario.model == "linear":
        D = X @ mats.A.T + mats.b_const + pms @ mats.b_dist_map.T
        return np.max(np.abs(D), axis=1)
    g = nonlinear_rhs_fn(scenario.params, lap)
    return np.array([np.max(np.abs(g(x, pm))) for x, pm in zip(X, pms)])


def settling_time(scenario: Scenario, trajectory: Trajectory, tol: float = 1e-8) -> float:
    """First sample time after which ``||xdot||_inf < tol`` for the rest of the run (inf if never)."""
    d = derivative_norms(scenario, trajectory)
    above = np.flatnonzero(d >= tol)
    if above.size == 0:
        return float(trajectory.times[0])
    if above[-1] == d.size - 1:
        return float("inf")
    return float(trajectory.times[above[-1] + 1])


def small_signal_gap(scenario: Scenario) -> dict:
    """Compare linear and nonlinear voltage trajectories of the same scenario."""
    lin = simulate(scenario.replace(model="linear", record_steps=False))
    nonlin = simulate(scenario.replace(model="nonlinear", record_steps=False))
    gap = float(np.max(np.abs(nonlin.voltage - lin.voltage)))
    dev = float(np.max(np.abs(lin.voltage - scenario.params.v_ref)))
    ratio = gap / dev if dev > 0 else 0.0
    log.info("nonlinear vs linear voltage gap %.3e p.u. (%.2f%% of the linear deviation %.3e)",
             gap, 100 * ratio, dev)
    if ratio > 0.05:
        log.warning("nonlinear/linear voltage gap exceeds 5%% of the linear deviation")
    return {"max_voltage_gap": gap, "max_linear_deviation": dev, "ratio": ratio}
