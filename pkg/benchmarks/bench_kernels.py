"""Time the compiled and numpy propagation kernels on the same batch.

    python benchmarks/bench_kernels.py [--protons 1000] [--steps 4096] [--mode radial]

Prints protons*steps per second for each available backend and the largest
difference between their exit states.
"""
import argparse
import time

import numpy as np

from chanmc import backend
from chanmc.crystal import build_channel
from chanmc.dynamics import PropagationOptions, kernel_model
from chanmc.ensemble import BeamConfig, sample_batch
from chanmc.potential import PotentialField


def run(name, model, beam, field, steps, length, workers):
    idx = np.arange(beam.n_protons)
    x, y, px, py = sample_batch(beam, field, idx)
    e = np.full(idx.size, beam.energy * 1e6)
    t0 = time.perf_counter()
    states, flags = backend.propagate_batch(model, x, y, px, py, e, np.zeros(idx.size, np.uint64),
                                            length / steps, steps, workers=workers, backend=name)
    return time.perf_counter() - t0, states[-1]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--protons", type=int, default=1000)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--length", type=float, default=92.0)
    p.add_argument("--mode", default="radial", choices=("radial", "grid", "exact"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--python-protons", type=int, default=200,
                   help="smaller batch for the numpy kernel, which is much slower")
    args = p.parse_args()

    field = PotentialField(build_channel())
    model = kernel_model(field, PropagationOptions(field_mode=args.mode))
    results = {}
    for name in sorted(backend.KERNELS):
        n = args.protons if name == "compiled" else min(args.protons, args.python_protons)
        beam = BeamConfig(n_protons=n)
        dt, final = run(name, model, beam, field, args.steps, args.length, args.workers)
        results[name] = final
        print(f"{name:9s} {n:6d} protons x {args.steps} steps  {dt:8.3f} s  {n * args.steps / dt:12.4g} steps/s")
    if len(results) == 2:
        n = min(len(results["compiled"]), len(results["python"]))
        diff = np.abs(results["compiled"][:n, :4] - results["python"][:n, :4]).max()
        print(f"max |compiled - python| over exit (x, y, phi_x, phi_y): {diff:.3g}")


if __name__ == "__main__":
    main()
