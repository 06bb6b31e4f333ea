"""MTDC line graph, incidence matrix and conductance-weighted Laplacian."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedGridError, NumericalError, ValidationError

log = logging.getLogger(__name__)

EIG_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class Line:
    i: int  # 0-based
    j: int
    resistance: float
    reactance: float | None = None  # inert metadata, the DC model is resistive


@dataclass(frozen=True)
class GridTopology:
    n_nodes: int
    lines: tuple[Line, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.n_nodes < 1:
            raise ValidationError(f"n_nodes must be positive, got {self.n_nodes}")
        seen = set()
        for ln in self.lines:
            name = f"line {ln.i + 1}-{ln.j + 1}"
            if not (0 <= ln.i < self.n_nodes and 0 <= ln.j < self.n_nodes):
                raise ValidationError(f"{name}: node index out of range 1..{self.n_nodes}")
            if ln.i == ln.j:
                raise ValidationError(f"{name}: self-loop")
            key = frozenset((ln.i, ln.j))
            if key in seen:
                raise ValidationError(f"{name}: duplicate line")
            seen.add(key)
            if not (np.isfinite(ln.resistance) and ln.resistance > 0):
                raise ValidationError(f"{name}: resistance must be > 0, got {ln.resistance}")

    @classmethod
    def from_edges(cls, n_nodes, edges):
        """Build from ``(i, j, R)`` triples with 0-based node indices."""
        return cls(n_nodes, tuple(Line(int(i), int(j), float(r)) for i, j, r in edges))

    @property
    def conductances(self) -> np.ndarray:
        return np.array([1.0 / ln.resistance for ln in self.lines])

    def neighbors(self, node: int) -> set[int]:
        out = set()
        for ln in self.lines:
            if ln.i == node:
                out.add(ln.j)
            elif ln.j == node:
                out.add(ln.i)
        return out


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    laplacian: np.ndarray
    incidence: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1]) if self.n > 1 else 0.0

    def nonzero_eigenvalues(self, tol: float = 1e-9) -> np.ndarray:
        """Eigenvalues 2..n, i.e. all but the single zero mode of a connected graph."""
        lam = self.eigenvalues
        scale = max(1.0, float(np.max(np.abs(lam))))
        zero = np.abs(lam) < tol * scale
        if zero.sum() != 1:
            raise ValidationError(f"expected exactly one zero Laplacian eigenvalue, found {int(zero.sum())}")
        return lam[~zero]


def connectivity_check(topology: GridTopology) -> tuple[bool, np.ndarray]:
    """Return ``(connected, labels)`` with a component id per node."""
    n = topology.n_nodes
    rows = [ln.i for ln in topology.lines]
    cols = [ln.j for ln in topology.lines]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)
    return n_comp == 1, labels


def incidence_matrix(topology: GridTopology) -> np.ndarray:
    B = np.zeros((topology.n_nodes, len(topology.lines)))
    for k, ln in enumerate(topology.lines):
        B[ln.i, k] = 1.0
        B[ln.j, k] = -1.0
    return B


def build_laplacian(topology: GridTopology) -> LaplacianBundle:
    connected, labels = connectivity_check(topology)
    if not connected:
        comps = [np.flatnonzero(labels == c).tolist() for c in np.unique(labels)]
        raise DisconnectedGridError(comps)
    if any(ln.reactance is not None for ln in topology.lines):
        log.info("line reactances present but ignored: the DC line model is purely resistive")

    B = incidence_matrix(topology)
    w = topology.conductances
    L = (B * w) @ B.T
    L = 0.5 * (L + L.T)
    lam, vecs = np.linalg.eigh(L)
    order = np.argsort(lam)
    lam, vecs = lam[order], vecs[:, order]

    resid = np.max(np.abs(L @ vecs - vecs * lam), initial=0.0)
    if resid > EIG_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(lam)))):
        raise NumericalError(f"Laplacian eigen-residual too large: {resid:.3e}")
    return LaplacianBundle(L, B, w, lam, vecs)
