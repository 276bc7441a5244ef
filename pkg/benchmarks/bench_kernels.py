"""Time the compiled and pure-Python trajectory kernels on the same ensemble.

    python3 benchmarks/bench_kernels.py [--particles 64] [--steps 400]
"""

import argparse
import time

import numpy as np

from rvmstab import kernels
from rvmstab.ansatz import make_ansatz
from rvmstab.elliptic import MeridianGrid
from rvmstab.equilibrium import fixed_point_equilibrium
from rvmstab.geometry import Domain
from rvmstab.trajectories import sample_phase_space, to_cartesian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=64)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    dom = Domain.torus(2.0, 0.5)
    ansatz = make_ansatz("exponential", amplitude_plus=0.4, amplitude_minus=0.2,
                         temperature=0.25, omega=0.3, skew_plus=0.5, skew_minus=-0.2)
    fields = fixed_point_equilibrium(ansatz, MeridianGrid(dom, 24)).fields
    y = to_cartesian(sample_phase_space(dom, args.particles, np.random.default_rng(0), 2.5))
    signs = np.where(np.arange(args.particles) % 2, 1.0, -1.0)
    work = args.particles * args.steps

    results = {}
    for backend in kernels.available_backends():
        # the pure-Python kernel is slow; one repetition is enough to rank it
        repeat = args.repeat if backend == "compiled" else 1
        t, out = best_of(lambda: kernels.trace(y, signs, fields, args.dt, args.steps, 10,
                                               backend=backend), repeat)
        results[backend] = (t, out)
        print("%-9s %8.3f s  %10.3g particle-steps/s" % (backend, t, work / t))

    if len(results) == 2:
        (tc, oc), (tp, op) = results["compiled"], results["python"]
        diff = np.abs(oc[0] - op[0]).max()
        print("speed-up  %8.1fx  max state difference %.1e" % (tp / tc, diff))


if __name__ == "__main__":
    main()
