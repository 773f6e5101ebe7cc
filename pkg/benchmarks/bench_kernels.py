"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Each kernel is called once untimed (JIT warm-up), then timed over
``--repeat`` calls.  Outputs of the two backends are compared as a sanity
check before timing.
"""
import argparse
import json
import time

import numpy as np

from dgode import kernels


def _sym(rng, n):
    m = rng.normal(size=(n, n))
    return 0.5 * (m + m.T)


def workloads(rng):
    """Arguments per kernel, sized like a batch of eight conversations."""
    n, d, L, B, nin, h = 96, 16, 12, 8, 16, 16
    a = rng.uniform(-3, 0, size=n)
    b = rng.uniform(-3, 0, size=d)
    X = rng.normal(size=(L, B, nin))
    mask = np.ones((L, B))
    W = [rng.normal(scale=0.3, size=(nin, h)) for _ in range(3)]
    U = [rng.normal(scale=0.3, size=(h, h)) for _ in range(3)]
    bias = [rng.normal(scale=0.1, size=h) for _ in range(3)]
    Hs, Hp, Z, R, C = kernels._gru_forward_np(X, mask, *W, *U, *bias)
    adj = (rng.random((n, n)) < 0.1).astype(float)
    adj = np.triu(adj, 1)
    adj = adj + adj.T
    la = _sym(rng, n) * 0.05
    lw = _sym(rng, d) * 0.05
    return {
        "jacobi": (_sym(rng, 48), 60),
        "flow_weights": (a, b, 5.0, 1e-6, kernels.INTEGRAL),
        "flow_divided_differences": (a, b, 5.0, 1e-6, kernels.INTEGRAL),
        "log_divided_differences": (rng.uniform(0.01, 1.0, size=d),),
        "integrate": (la, lw, rng.normal(size=(n, d)), rng.normal(size=(n, d)), 1.0, 32, kernels.RK4),
        "dirichlet": (rng.normal(size=(n, d)), adj),
        "gru_forward": (X, mask, *W, *U, *bias),
        "gru_backward": (rng.normal(size=Hs.shape), X, mask, Hp, Z, R, C, *U),
    }


def _close(x, y):
    if isinstance(x, tuple):
        # the Jacobi kernel reports a sweep count that may differ between backends
        return all(_close(p, q) for p, q in zip(x, y) if not np.isscalar(p))
    return np.allclose(x, y, rtol=1e-8, atol=1e-10)


def timeit(fn, args, repeat):
    fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def run(repeat=20, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for name, args in workloads(rng).items():
        nb, npy = kernels.PAIRS[name]
        agree = _close(nb(*args), npy(*args))
        t_nb, t_np = timeit(nb, args, repeat), timeit(npy, args, repeat)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np,
                     "speedup": t_np / t_nb, "agree": bool(agree)})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args()
    rows = run(args.repeat, args.seed)
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for r in rows:
        print(f"{r['kernel']:<26}{1e3 * r['numba_s']:>10.3f}{1e3 * r['numpy_s']:>10.3f}"
              f"{r['speedup']:>9.1f}  {r['agree']}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
