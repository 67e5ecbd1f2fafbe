"""Time the compiled kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_kernels.py [--steps 200] [--n 16] [--m 500]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from cimsde import _pykernels, kernels
from cimsde.ising import ring_antiferromagnet
from cimsde.params import PhysicalParams


def _exact_inputs(n, m, steps, seed=0):
    rng = np.random.default_rng(seed)
    J = np.ascontiguousarray(ring_antiferromagnet(n).coupling_matrix)
    return dict(
        eta=np.zeros((n, m), complex), mu=np.zeros((n, m), complex),
        w=np.full((n, m), 1.0 / m), J=J, pump=np.linspace(0.8, 1.2, steps),
        z_eta=rng.standard_normal((steps, n, m)), z_mu=rng.standard_normal((steps, n, m)),
        z_meas=rng.standard_normal((steps, n)), u_res=rng.random((steps, n)),
    )


def bench_exact(mod, n, m, steps, repeat):
    best, out = math.inf, None
    phys = PhysicalParams()
    for _ in range(repeat):
        a = _exact_inputs(n, m, steps)
        t = time.perf_counter()
        mod.exact_block(a["eta"], a["mu"], a["w"], a["J"], a["pump"], a["z_eta"], a["z_mu"],
                        a["z_meas"], a["u_res"], phys.g, phys.xi, phys.zeta, 0.01, 0.5, 1e3, None)
        best = min(best, time.perf_counter() - t)
        out = a["eta"]
    return best, out


def bench_gaussian(mod, n, steps, repeat):
    best, out = math.inf, None
    phys = PhysicalParams()
    rng = np.random.default_rng(1)
    J = np.ascontiguousarray(ring_antiferromagnet(n).coupling_matrix)
    eps_p = np.linspace(0.0, 1.2, steps) * phys.eps_th
    z = rng.standard_normal((steps, n))
    for _ in range(repeat):
        mu, var = np.zeros(n), np.full(n, 0.25)
        t = time.perf_counter()
        mod.gaussian_block(mu, var, J, eps_p, z, phys.gamma_s, phys.gamma_p, phys.kappa, phys.xi,
                           phys.zeta, 0.01, 1e-6, None)
        best = min(best, time.perf_counter() - t)
        out = mu
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in kernels.available():
        print("compiled extension not built; only the fallback is available")
        return 1
    comp = kernels.get("compiled")
    rows = []
    tc, ec = bench_exact(comp, args.n, args.m, args.steps, args.repeat)
    tp, ep = bench_exact(_pykernels, args.n, args.m, args.steps, args.repeat)
    rows.append(("exact_block", tc, tp, float(np.abs(ec - ep).max())))
    gsteps = args.steps * 100
    tc, gc = bench_gaussian(comp, args.n, gsteps, args.repeat)
    tp, gp = bench_gaussian(_pykernels, args.n, gsteps, args.repeat)
    rows.append(("gaussian_block", tc, tp, float(np.abs(gc - gp).max())))
    print(f"N={args.n} M={args.m} steps={args.steps} (gaussian: {gsteps})")
    print(f"{'kernel':<16}{'compiled[s]':>12}{'python[s]':>12}{'speedup':>9}{'max|diff|':>12}")
    for name, c, p, d in rows:
        print(f"{name:<16}{c:>12.4f}{p:>12.4f}{p / c:>9.1f}{d:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
