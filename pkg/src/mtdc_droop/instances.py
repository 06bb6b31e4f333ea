"""Random problem instances for property sweeps and experiment scripts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridTopology, build_laplacian
from .plant import SystemParams


@dataclass(frozen=True)
class InstanceRanges:
    """Sampling box; every ``(lo, hi)`` pair is drawn log-uniformly."""

    n: tuple[int, int] = (2, 12)
    inertia: tuple[float, float] = (1e-2, 1e3)
    capacitance: tuple[float, float] = (1e-2, 1e3)
    gains: tuple[float, float] = (1e-2, 1e3)
    resistance: tuple[float, float] = (1e-2, 1e3)
    v_nom: tuple[float, float] = (1e-2, 1e3)
    extra_edge_prob: float = 0.3


# everything spread over five decades
WIDE = InstanceRanges()
# gains and line data of the magnitude found in transmission studies
TYPICAL = InstanceRanges(inertia=(1.0, 20.0), capacitance=(0.05, 5.0), gains=(1.0, 1e3),
                         resistance=(1e-3, 1e-1), v_nom=(0.5, 2.0))
# slow enough that explicit integration over tens of seconds is cheap
MODERATE = InstanceRanges(n=(2, 6), inertia=(1.0, 10.0), capacitance=(0.5, 5.0),
                          gains=(1.0, 20.0), resistance=(0.05, 1.0), v_nom=(0.8, 1.2))


def _logu(rng, lo, hi, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def random_topology(rng: np.random.Generator, n: int, resistance=(1e-2, 1e3),
                    extra_edge_prob: float = 0.3) -> GridTopology:
    """Random spanning tree plus independent extra edges, so always connected."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    edges = sorted(edges)
    r = _logu(rng, *resistance, len(edges))
    return GridTopology.from_edges(n, [(i, j, rk) for (i, j), rk in zip(edges, r)])


def balanced_nominals(topology: GridTopology, v_ref, v_nom):
    """``(p_nom, p_inj_nom)`` that make the references an equilibrium."""
    p = v_nom * build_laplacian(topology).laplacian @ np.asarray(v_ref, dtype=float)
    return p.copy(), p


def random_params(rng: np.random.Generator, topology: GridTopology,
                  ranges: InstanceRanges = WIDE, uniform_gains: bool = False,
                  v_ref_spread: float = 0.0) -> SystemParams:
    """Positive parameters; nominals are balanced for the drawn reference voltages."""
    n = topology.n_nodes
    if uniform_gains:
        kw, kd, kv = (np.full(n, _logu(rng, *ranges.gains)) for _ in range(3))
    else:
        kw, kd, kv = (_logu(rng, *ranges.gains, n) for _ in range(3))
    v_nom = float(_logu(rng, *ranges.v_nom))
    v_ref = v_nom * (1.0 + v_ref_spread * rng.uniform(-1, 1, n))
    p_nom, p_inj = balanced_nominals(topology, v_ref, v_nom)
    return SystemParams(
        inertia=_logu(rng, *ranges.inertia, n),
        capacitance=_logu(rng, *ranges.capacitance, n),
        k_omega=kw, k_droop=kd, k_v=kv,
        v_ref=v_ref, p_nom=p_nom, p_inj_nom=p_inj,
        omega_ref=1.0, v_nom=v_nom,
    )


def random_instance(rng: np.random.Generator, ranges: InstanceRanges = WIDE,
                    uniform_gains: bool = False, v_ref_spread: float = 0.0):
    n = int(rng.integers(ranges.n[0], ranges.n[1] + 1))
    topo = random_topology(rng, n, ranges.resistance, ranges.extra_edge_prob)
    return topo, random_params(rng, topo, ranges, uniform_gains, v_ref_spread)
