"""Compare the compiled and pure-Python shell-quadrature kernels.

    python3 benchmarks/bench_shells.py [--repeat N]

Prints per-call time for each backend on the three sample shapes and
checks that both return the same value bit for bit.
"""
import argparse
import math
import timeit

from nvpol import _quad

CASES = {
    # name: (geom, kind, d, h, r0, R, r_lo, r_hi, breaks), lengths in nm
    "halfspace-variance": (_quad.HALFSPACE, _quad.VARIANCE, 1000.0, 0.0, 0.0, 0.0,
                           1000.0, math.inf, []),
    "cylinder-mean": (_quad.CYLINDER, _quad.MEAN, 12000.0, 15000.0, 35000.0, 0.0,
                      12000.0, math.hypot(35000.0, 27000.0),
                      [27000.0, 35000.0, math.hypot(35000.0, 12000.0)]),
    "dome-mean": (_quad.DOME, _quad.MEAN, 1000.0, 0.0, 0.0, 1e6, 1000.0, 1e6 + 1000.0,
                  [math.hypot(1e6, 1000.0)]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--rel-tol", type=float, default=1e-10)
    args = ap.parse_args()
    if _quad.compiled_shell_integral is None:
        print("compiled kernel not built; only the Python backend is available")
    print(f"{'case':<22}{'python us':>12}{'compiled us':>14}{'speedup':>10}  same")
    for name, case in CASES.items():
        call = case + (args.rel_tol, 0.0, 4000)
        t_py = timeit.timeit(lambda: _quad.python_shell_integral(*call),
                             number=args.repeat) / args.repeat * 1e6
        ref = _quad.python_shell_integral(*call)
        if _quad.compiled_shell_integral is None:
            print(f"{name:<22}{t_py:>12.2f}{'-':>14}{'-':>10}  -")
            continue
        t_c = timeit.timeit(lambda: _quad.compiled_shell_integral(*call),
                            number=args.repeat) / args.repeat * 1e6
        same = _quad.compiled_shell_integral(*call) == ref
        print(f"{name:<22}{t_py:>12.2f}{t_c:>14.2f}{t_py / t_c:>10.1f}  {same}")


if __name__ == "__main__":
    main()
