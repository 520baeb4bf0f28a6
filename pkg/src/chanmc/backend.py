"""Selects the propagation kernel at import time.

The compiled extension is used when it imports; otherwise the numpy kernel.
Set ``CHANMC_BACKEND=python`` to force the fallback.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernel

_requested = os.environ.get("CHANMC_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"CHANMC_BACKEND must be auto, compiled or python, got {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _requested == "compiled":
            raise

BACKEND = "compiled" if _compiled is not None else "python"
KERNELS = {"python": _pykernel}
if _compiled is not None:
    KERNELS["compiled"] = _compiled

# Protons per work unit handed to a thread.
CHUNK = 2048


def propagate_batch(model, x, y, px, py, e, keys, step, nsteps, energy_loss=False, scattering=False,
                    force=True, snapshots=None, workers=1, backend=None):
    """Integrate a batch of protons through ``nsteps`` steps of length ``step``.

    Returns ``(states, flags)`` where ``states[k, i]`` is ``(x, y, phi_x,
    phi_y, e)`` of proton ``i`` after ``snapshots[k]`` steps and ``flags[k, i]``
    its flag bits at that point.  Every proton is independent, so the result
    does not depend on ``workers``.
    """
    kernel = KERNELS[backend or BACKEND]
    if snapshots is None:
        snapshots = [nsteps]
    snapshots = np.asarray(snapshots, dtype=np.int64)
    if np.any(np.diff(snapshots) < 0) or snapshots[0] < 0 or snapshots[-1] > nsteps:
        raise ValueError("snapshots must be sorted step counts within [0, nsteps]")
    arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (x, y, px, py, e)]
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    n = arrays[0].size

    def run(sl):
        return kernel.propagate_batch(model, *(a[sl] for a in arrays), keys[sl], float(step), int(nsteps),
                                      bool(energy_loss), bool(scattering), bool(force), snapshots)

    bounds = [slice(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)] or [slice(0, 0)]
    if workers <= 1 or len(bounds) == 1:
        parts = [run(sl) for sl in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    states = np.concatenate([p[0] for p in parts], axis=1)
    flags = np.concatenate([p[1] for p in parts], axis=1)
    return states, flags
