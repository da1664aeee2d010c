"""Time the compiled trajectory kernel against the pure-numpy fallback.

Runs the same chunk workload through both paths, checks the accumulated
statistics agree, and prints per-step timings.  Select the fallback for a
whole session with STRIPLYAP_NO_NUMBA=1.
"""

import time

import numpy as np

import striplyap._kernels as kernels
from striplyap.frames import random_frame
from striplyap.model import StripModel
from striplyap.normalform import build_normal_form
from striplyap.spectral import channel_spectrum


def run(path_numba: bool, width=13, energy=-0.03, coupling=0.1,
        steps=200_000, seed=11):
    model = StripModel(width, energy, coupling, seed=seed)
    nf = build_normal_form(channel_spectrum(width, energy))
    pack = kernels.make_pack(nf)
    rng = model.rng(0)
    u = np.ascontiguousarray(
        random_frame(rng, width, width, pairing=nf.pairing).columns)
    acc = kernels.ChunkAccum.zeros(width, pack.n_channels,
                                   pack.align_sign.shape[0])
    v = model.disorder.sample(rng, (steps, width))

    saved = kernels.NUMBA_AVAILABLE
    kernels.NUMBA_AVAILABLE = path_numba and saved
    try:
        if kernels.NUMBA_AVAILABLE:
            # trigger compilation outside the timed region
            warm = kernels.ChunkAccum.zeros(width, pack.n_channels,
                                            pack.align_sign.shape[0])
            kernels.run_traj_chunk(pack, u.copy(), v[:10], coupling, warm,
                                   accumulate=True)
        t0 = time.perf_counter()
        kernels.run_traj_chunk(pack, u, v, coupling, acc, accumulate=True)
        dt = time.perf_counter() - t0
    finally:
        kernels.NUMBA_AVAILABLE = saved
    return dt, acc


def main():
    steps = 200_000
    results = {}
    for label, use_numba in (("numba", True), ("numpy", False)):
        if use_numba and not kernels.NUMBA_AVAILABLE:
            print("numba unavailable; skipping compiled path")
            continue
        n = steps if use_numba else steps // 10
        dt, acc = run(use_numba, steps=n)
        results[label] = (dt / n, acc, n)
        print(f"{label:>6}: {n:>7d} steps in {dt:7.2f} s "
              f"-> {dt / n * 1e6:8.2f} us/step")
    if len(results) == 2:
        per_numba, acc_a, n_a = results["numba"]
        per_numpy, acc_b, n_b = results["numpy"]
        print(f"speedup: {per_numpy / per_numba:.1f}x")
        # agreement on the common prefix statistics
        dt_a, acc_a = run(True, steps=5000)
        dt_b, acc_b = run(False, steps=5000)
        rel = np.abs(acc_a.logexp - acc_b.logexp).max() / \
            max(np.abs(acc_a.logexp).max(), 1e-300)
        print(f"log-expansion agreement over 5000 shared steps: "
              f"rel diff {rel:.2e}")


if __name__ == "__main__":
    main()
