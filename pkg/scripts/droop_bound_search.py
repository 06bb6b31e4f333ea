"""How often, and by how much, the droop-sharing bound can be exceeded.

Counts violations of each steady-state bound on random uniform-gain
instances from two sampling boxes, then runs a Nelder-Mead search over a
3-node star grid, parameters confined to [1e-2, 1e3], for the largest achieved/bound ratio of the droop bound.
"""

import argparse

import numpy as np
from scipy.optimize import minimize

from mtdc_droop.analysis import theorem2_bounds
from mtdc_droop.grid import GridTopology, build_laplacian
from mtdc_droop.instances import TYPICAL, WIDE, random_instance
from mtdc_droop.plant import SystemParams


def count(box, trials, seed):
    rng = np.random.default_rng(seed)
    viol = np.zeros(3, dtype=int)
    worst = 0.0
    for _ in range(trials):
        topo, params = random_instance(rng, box, uniform_gains=True)
        pm = rng.uniform(-1, 1, topo.n_nodes)
        rep = theorem2_bounds(params, build_laplacian(topo), pm)
        viol += [not s for s in rep.satisfied]
        worst = max(worst, rep.achieved_droop_error / rep.e_droop)
    return tuple(int(v) for v in viol), worst


LO, HI = np.log(1e-2), np.log(1e3)


def star_ratio(z):
    g12, g13, kw, kd, kv = np.exp(np.clip(z, LO, HI))
    topo = GridTopology.from_edges(3, [(0, 1, 1 / g12), (0, 2, 1 / g13)])
    params = SystemParams.uniform(3, k_omega=kw, k_droop=kd, k_v=kv)
    rep = theorem2_bounds(params, build_laplacian(topo), np.array([-1.0, 1.0, -1.0]))
    return rep.achieved_droop_error / rep.e_droop


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for name, box in (("wide", WIDE), ("typical", TYPICAL)):
        viol, worst = count(box, args.trials, args.seed)
        print(f"{name:8s} violations (droop, V, omega) = {tuple(viol)} / {args.trials}, "
              f"max droop ratio {worst:.3f}")
    rng = np.random.default_rng(args.seed)
    best = None
    for _ in range(20):
        z0 = rng.uniform(LO, HI, 5)
        res = minimize(lambda z: -star_ratio(z), z0, method="Nelder-Mead",
                       options={"maxiter": 2000, "xatol": 1e-6, "fatol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
    g12, g13, kw, kd, kv = np.exp(np.clip(best.x, LO, HI))
    print(f"star search: ratio {-best.fun:.4f} at g12={g12:.4g} g13={g13:.4g} "
          f"k_omega={kw:.4g} k_droop={kd:.4g} k_v={kv:.4g}, P^m=(-1, 1, -1)")


if __name__ == "__main__":
    main()
