"""Time the numba kernels against the pure-numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat 5]``. Each kernel is
called once per backend before timing so numba compilation is excluded; the
best of ``--repeat`` runs is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from polyakagm import kernels


def _cases(rng):
    A = rng.standard_normal((208, 60))
    y = np.sign(rng.standard_normal(208))
    L_log = np.linalg.norm(A, 2) ** 2 / (4 * 208) + 1e-3
    B = rng.standard_normal((80, 80))
    H = B.T @ B / 80 + 0.01 * np.eye(80)
    ev = np.linalg.eigvalsh(H)
    c = rng.standard_normal(80)
    gammas = np.linspace(1.0, 100.0, 10_000)
    return {
        "pep_kkt (10k steps)": lambda k: k.pep_kkt(0.01, 1.0, gammas, 0.5),
        "pep_grid_max (2000^2)": lambda k: k.pep_grid_max(0.1, 1.0, 1.2, 0.5, -1.0, 0.0, 0.0, 1.0, 2000, 2000),
        "power_iteration (80x80)": lambda k: k.power_iteration(H, np.ones(80)),
        "agm_logistic (2000 it)": lambda k: k.agm_logistic(A, y, 1e-3, L_log, 1e-3, np.zeros(60), 2000, 0.0),
        "agm_quadratic (2000 it)": lambda k: k.agm_quadratic(H, c, ev[-1], ev[0], np.zeros(80), 2000, 0.0),
    }


def bench(repeat: int = 5, seed: int = 0) -> list[tuple[str, dict]]:
    rng = np.random.default_rng(seed)
    backends = {name: kernels.get_backend(name) for name in kernels.available_backends()}
    rows = []
    for label, call in _cases(rng).items():
        times = {}
        for name, mod in backends.items():
            call(mod)  # warm-up / compile
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                call(mod)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
        rows.append((label, times))
    return rows


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rows = bench(args.repeat, args.seed)
    names = list(rows[0][1])
    print(f"{'kernel':<26}" + "".join(f"{n:>12}" for n in names) + ("   speed-up" if len(names) > 1 else ""))
    for label, times in rows:
        line = f"{label:<26}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if "numba" in times:
            line += f"   {times['numpy'] / times['numba']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
