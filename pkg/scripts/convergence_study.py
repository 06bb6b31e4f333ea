"""Fixed-step endpoint error of the integrator against the matrix exponential."""

import argparse

import numpy as np
from scipy.linalg import expm

from mtdc_droop.grid import build_laplacian
from mtdc_droop.instances import MODERATE, random_instance
from mtdc_droop.integrate import LinearRHS, integrate
from mtdc_droop.plant import assemble_closed_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--levels", type=int, default=6)
    ap.add_argument("--t-end", type=float, default=1.0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    topo, params = random_instance(rng, MODERATE)
    A = assemble_closed_loop(params, build_laplacian(topo)).A
    c = np.concatenate([rng.uniform(-1, 1, topo.n_nodes) / params.inertia, np.zeros(topo.n_nodes)])
    x0 = np.zeros(A.shape[0])
    xs = -np.linalg.solve(A, c)
    ref = xs + expm(A * args.t_end) @ (x0 - xs)
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    h0 = args.t_end / np.ceil(args.t_end * rho)

    print(f"n = {topo.n_nodes}, spectral radius {rho:.2f}")
    print(f"{'h':>12} {'h*rho':>8} {'error':>12} {'order':>7}")
    prev = None
    for k in range(args.levels):
        h = h0 / 2 ** k
        _, ys, _ = integrate(LinearRHS(A, c), 0.0, args.t_end, x0, h_max=h, fixed_step=True)
        err = np.max(np.abs(ys[-1] - ref))
        order = f"{np.log2(prev / err):7.3f}" if prev else " " * 7
        print(f"{h:12.4e} {h * rho:8.3f} {err:12.4e} {order}")
        prev = err


if __name__ == "__main__":
    main()
