"""Time the Cython kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 8,64,256,1024] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from attnlab import _backend

OPS = ("row_softmax", "col_softmax", "row_normalize", "col_normalize", "dnas")


def _call(mod, op, z, p):
    if op == "dnas":
        return mod.row_normalize(mod.col_softmax(z))
    if op.endswith("softmax"):
        return getattr(mod, op)(z)
    return getattr(mod, op)(p)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="8,64,256,1024")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = _backend.available()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'op':<14}{'S':>6}" + "".join(f"{name + ' [us]':>16}" for name in backends) + f"{'speedup':>10}")
    for S in (int(s) for s in args.sizes.split(",")):
        z = rng.standard_normal((S, S))
        p = np.exp(z)
        for op in OPS:
            times = {}
            for name, mod in backends.items():
                a = _call(mod, op, z, p)
                times[name] = min(timeit.repeat(lambda: _call(mod, op, z, p), number=1, repeat=args.repeat)) * 1e6
                if name != "python":
                    np.testing.assert_allclose(a, _call(backends["python"], op, z, p), rtol=1e-13, atol=1e-15)
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{op:<14}{S:>6}" + "".join(f"{t:>16.1f}" for t in times.values()) + f"{speed:>10.2f}")


if __name__ == "__main__":
    main()
