"""Equilibrium, stability certificate and steady-state error bounds.

Two independent routes to the equilibrium are provided: a direct solve of
the 2n x 2n steady-state system (:func:`solve_equilibrium`) and the spectral
expansion of the voltage deviation in the eigenbasis of the reduced matrix
``A1`` (:func:`spectral_equilibrium`, uniform gains only). The tests hold
them against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .grid import LaplacianBundle
from .plant import SystemParams, assemble_closed_loop, check_reference_equilibrium

RESIDUAL_TOL = 1e-9
PD_RTOL = 1e-10
BOUND_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    omega_hat: np.ndarray
    v_hat: np.ndarray
    pdroop: np.ndarray
    residual_norm: float

    @property
    def x_hat(self) -> np.ndarray:
        return np.concatenate([self.omega_hat, self.v_hat])

    @property
    def fairness(self) -> float:
        """Largest pairwise gap between droop contributions."""
        return float(np.max(self.pdroop) - np.min(self.pdroop))

    def to_dict(self) -> dict:
        return {
            "omega_hat": self.omega_hat.tolist(),
            "v_hat": self.v_hat.tolist(),
            "pdroop": self.pdroop.tolist(),
            "residual_norm": float(self.residual_norm),
            "fairness": self.fairness,
        }


@dataclass(frozen=True, eq=False)
class SpectralEquilibrium:
    result: EquilibriumResult
    a1: np.ndarray
    eigenvalues: np.ndarray  # of A1, ascending
    eigenvectors: np.ndarray
    coefficients: np.ndarray  # a_i = v_i' P^m / lambda_i


@dataclass(frozen=True, eq=False)
class CertificateReport:
    q1: np.ndarray
    q1_eigenvalues: np.ndarray
    q1_positive_definite: bool
    q1_scaled_eigenvalues: np.ndarray
    schur_matrix_eigenvalues: np.ndarray
    a_eigenvalues: np.ndarray
    spectral_abscissa: float

    @property
    def stable(self) -> bool:
        return self.q1_positive_definite and self.spectral_abscissa < 0

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "q1_positive_definite": self.q1_positive_definite,
            "q1_min_eigenvalue": float(self.q1_eigenvalues[0]),
            "q1_eigenvalues": self.q1_eigenvalues.tolist(),
            "q1_scaled_min_over_max": float(self.q1_scaled_eigenvalues[0] / self.q1_scaled_eigenvalues[-1]),
            "schur_matrix_eigenvalues": self.schur_matrix_eigenvalues.tolist(),
            "spectral_abscissa": self.spectral_abscissa,
            "a_eigenvalues_real": self.a_eigenvalues.real.tolist(),
            "a_eigenvalues_imag": self.a_eigenvalues.imag.tolist(),
        }


@dataclass(frozen=True, eq=False)
class BoundsReport:
    e_droop: float
    e_v: float
    e_omega: float
    achieved_droop_error: float
    achieved_v_error: float
    achieved_omega_error: float
    satisfied: tuple[bool, bool, bool]
    fairness: float

    @property
    def e_gen(self) -> float:
        return self.e_droop

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    def to_dict(self) -> dict:
        return {
            "e_droop": self.e_droop,
            "e_v": self.e_v,
            "e_omega": self.e_omega,
            "achieved_droop_error": self.achieved_droop_error,
            "achieved_v_error": self.achieved_v_error,
            "achieved_omega_error": self.achieved_omega_error,
            "satisfied_droop": self.satisfied[0],
            "satisfied_v": self.satisfied[1],
            "satisfied_omega": self.satisfied[2],
            "fairness": self.fairness,
        }


@dataclass(frozen=True, eq=False)
class ObjectiveReport:
    droop_error: float
    v_error: float
    omega_error: float
    droop_ok: bool
    v_ok: bool
    omega_ok: bool

    @property
    def verdict(self) -> tuple[bool, bool, bool]:
        return (self.droop_ok, self.v_ok, self.omega_ok)


def _pm(params, pm):
    pm = np.asarray(pm, dtype=float)
    if pm.shape != (params.n,):
        raise ValidationError(f"p_m: expected {params.n} values, got shape {pm.shape}")
    return pm


def _droop(params, omega_hat):
    # same as droop_power(params, omega_ref + omega_hat) without the cancellation
    return -params.k_droop * omega_hat


def equilibrium_matrix(params: SystemParams, laplacian: LaplacianBundle) -> np.ndarray:
    """Left-hand side of the steady-state system in incremental coordinates."""
    kw, kd, kv = params.k_omega, params.k_droop, params.k_v
    return np.block([
        [-np.diag(kw + kd), np.diag(kv)],
        [np.diag(kw), -(np.diag(kv) + params.v_nom * laplacian.laplacian)],
    ])


def _residual(K, x, rhs):
    r = K @ x - rhs
    return float(np.max(np.abs(r))), float(np.max(np.abs(K), initial=0) * np.max(np.abs(x), initial=0) + np.max(np.abs(rhs)))


def solve_equilibrium(params: SystemParams, laplacian: LaplacianBundle, pm) -> EquilibriumResult:
    check_reference_equilibrium(params, laplacian)
    pm = _pm(params, pm)
    n = params.n
    K = equilibrium_matrix(params, laplacian)
    rhs = np.concatenate([-pm, np.zeros(n)])

    lu = sla.lu_factor(K)
    if np.min(np.abs(np.diag(lu[0]))) <= np.finfo(float).eps * np.max(np.abs(K)):
        raise NumericalError("steady-state matrix is numerically singular")
    x = sla.lu_solve(lu, rhs)
    x = x + sla.lu_solve(lu, rhs - K @ x)  # one refinement sweep

    res, scale = _residual(K, x, rhs)
    if res > RESIDUAL_TOL * max(1.0, scale):
        raise NumericalError(f"equilibrium residual {res:.3e} too large")
    w, v = x[:n], x[n:]
    return EquilibriumResult(w, v, _droop(params, w), res)


def reduced_matrix(params: SystemParams, laplacian: LaplacianBundle) -> np.ndarray:
    """``A1 = ((k_w + k_d) V_nom / k_w) L + (k_d k_V / k_w) I``."""
    kw, kd, kv = params.uniform_gains()
    return (kw + kd) * params.v_nom / kw * laplacian.laplacian + kd * kv / kw * np.eye(params.n)


def spectral_equilibrium(params: SystemParams, laplacian: LaplacianBundle, pm) -> SpectralEquilibrium:
    kw, kd, kv = params.uniform_gains()
    check_reference_equilibrium(params, laplacian)
    pm = _pm(params, pm)
    n = params.n

    a1 = reduced_matrix(params, laplacian)
    lam, vecs = np.linalg.eigh(a1)
    order = np.argsort(lam)
    lam, vecs = lam[order], vecs[:, order]
    if vecs[:, 0].sum() < 0:
        vecs[:, 0] *= -1

    # The first mode is known in closed form; using it avoids the absolute
    # eigenvalue error eps*||A1||, which is large relative to k_d k_V / k_w.
    lam1 = kd * kv / kw
    total = pm.sum()
    coeffs = (vecs.T @ pm) / lam
    coeffs[0] = total / np.sqrt(n) / lam1

    modes = vecs[:, 1:] @ coeffs[1:]
    v_hat = kw * total / (n * kd * kv) * np.ones(n) + modes
    omega_hat = (kw * total / (n * kd) * np.ones(n) + kv * modes + pm) / (kw + kd)

    K = equilibrium_matrix(params, laplacian)
    res, _ = _residual(K, np.concatenate([omega_hat, v_hat]), np.concatenate([-pm, np.zeros(n)]))
    result = EquilibriumResult(omega_hat, v_hat, _droop(params, omega_hat), res)
    return SpectralEquilibrium(result, a1, lam, vecs, coeffs)


def lyapunov_q1(params: SystemParams, laplacian: LaplacianBundle) -> np.ndarray:
    kw, kd, kv = params.k_omega, params.k_droop, params.k_v
    return np.block([
        [np.diag(kw * (kw + kd) / kv), -np.diag(kw)],
        [-np.diag(kw), params.v_nom * laplacian.laplacian + np.diag(kv)],
    ])


def is_positive_definite(Q: np.ndarray, rtol: float = PD_RTOL) -> tuple[bool, np.ndarray]:
    """Scale-relative definiteness test on the Jacobi-equilibrated matrix.

    ``D Q D`` with ``D = diag(Q)^-1/2`` is congruent to ``Q`` so it has the
    same inertia, but its spectrum is not dominated by badly scaled gains.
    """
    d = np.diag(Q)
    if np.any(d <= 0):
        return False, np.linalg.eigvalsh(Q)
    s = 1.0 / np.sqrt(d)
    ev = np.linalg.eigvalsh(Q * s[:, None] * s[None, :])
    return bool(ev[0] > rtol * ev[-1]), ev


def certify_stability(params: SystemParams, laplacian: LaplacianBundle) -> CertificateReport:
    if laplacian.n != params.n:
        raise ValidationError("dimension mismatch between params and grid")
    q1 = lyapunov_q1(params, laplacian)
    q1_eigs = np.linalg.eigvalsh(q1)
    pd, scaled = is_positive_definite(q1)
    schur = params.k_omega * params.k_droop / params.k_v

    A = assemble_closed_loop(params, laplacian).A
    a_eigs = sla.eigvals(A)
    a_eigs = a_eigs[np.lexsort((a_eigs.imag, a_eigs.real))]
    return CertificateReport(q1, q1_eigs, pd, scaled, schur, a_eigs, float(np.max(a_eigs.real)))


def _within(achieved, bound, rtol=BOUND_RTOL):
    return bool(achieved <= bound * (1 + rtol))


def theorem2_bounds(params: SystemParams, laplacian: LaplacianBundle, pm) -> BoundsReport:
    """Steady-state error bounds for uniform gains, with the achieved errors.

    All three bounds use ``max_i |P^m_i|``.
    """
    kw, kd, kv = params.uniform_gains()
    pm = _pm(params, pm)
    n = params.n
    vn = params.v_nom
    inv_sum = float(np.sum(1.0 / laplacian.nonzero_eigenvalues()))
    p_max = float(np.max(np.abs(pm)))
    p_sum = float(abs(pm.sum()))

    spread = (n - 1) + kv / vn * inv_sum
    e_droop = kd * p_max / (kd + kw) * spread
    e_v = kw * p_sum / (n * kd * kv) + kw * p_max / ((kw + kd) * vn) * inv_sum
    e_omega = p_sum / (n * kd) + p_max / (kd + kw) * spread

    eq = spectral_equilibrium(params, laplacian, pm).result
    a_droop = float(np.max(np.abs(eq.pdroop + pm.mean())))
    a_v = float(np.max(np.abs(eq.v_hat)))
    a_w = float(np.max(np.abs(eq.omega_hat)))
    sat = (_within(a_droop, e_droop), _within(a_v, e_v), _within(a_w, e_omega))
    return BoundsReport(e_droop, e_v, e_omega, a_droop, a_v, a_w, sat, eq.fairness)


def check_objective(equilibrium: EquilibriumResult, pm, bounds: BoundsReport) -> ObjectiveReport:
    """Evaluate the three steady-state objective inequalities against ``bounds``."""
    pm = np.asarray(pm, dtype=float)
    d = float(np.max(np.abs(equilibrium.pdroop + pm.mean())))
    v = float(np.max(np.abs(equilibrium.v_hat)))
    w = float(np.max(np.abs(equilibrium.omega_hat)))
    return ObjectiveReport(d, v, w, _within(d, bounds.e_droop), _within(v, bounds.e_v),
                           _within(w, bounds.e_omega))
