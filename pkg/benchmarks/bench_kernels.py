"""Compare the compiled and pure-Python kernels on a turn-off segment.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints wall time per call for the sweep and for a 20 us macro-stepped
segment, plus the largest relative difference between the two backends.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from sivkinetics import _kernels_py
from sivkinetics.config import DeviceConfig
from sivkinetics.protocol import Model

try:
    from sivkinetics import _kernels as _compiled
except ImportError:
    _compiled = None


def _segment(kernels, model, drv, edges, dt_cap, num):
    nm = model.bright()
    nb = edges.size - 1
    pl, coll, nmi = np.zeros(nb), np.zeros(nb), np.zeros(nb)
    kernels.run_segment(nm, model.n_total, drv.gen, model.dx, drv.k_off, drv.emit, drv.det_overshoot,
                        model.coef, model.inv_tau, drv.direction, model.i_lo, model.i_hi, model.p_local,
                        edges, dt_cap, num.macro_tol, num.dt_min, pl, coll, nmi)
    return np.concatenate([pl, coll, nmi, nm])


def _sweep(kernels, model, drv):
    rate = np.empty(model.size)
    kernels.sweep(drv.gen, model.n_total * 0.5, model.n_total, model.dx, model.coef, drv.direction,
                  model.i_lo, model.i_hi, model.p_local, rate)
    return rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cfg = DeviceConfig()
    model = Model(cfg)
    drv = model.drive(cfg.beam, -50.0, True)
    edges = np.arange(201) * 100e-9
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    else:
        print("compiled kernels not built; timing the Python fallback only")

    results = {}
    for name, k in backends.items():
        t_sweep = min(timeit.repeat(lambda: _sweep(k, model, drv), number=20, repeat=args.repeat)) / 20
        t_seg = min(timeit.repeat(lambda: _segment(k, model, drv, edges, 100e-9, cfg.numerics),
                                  number=1, repeat=args.repeat))
        results[name] = _segment(k, model, drv, edges, 100e-9, cfg.numerics)
        print(f"{name:>7}: sweep {t_sweep * 1e6:9.1f} us   segment {t_seg * 1e3:9.2f} ms")
    if len(results) == 2:
        a, b = results["cython"], results["python"]
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
        print(f"max relative difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
