"""Time the compiled and pure-Python scheduler kernels on the same cases.

    python benchmarks/bench_sched.py [--repeat N]
"""

import argparse
import timeit

from edgeav.scheduler import KERNELS, SchedParams, sched

# (label, params): busiest-core loads seen during a rush-hour sweep
CASES = [
    ("V^c=2, L=2", SchedParams(1, 230, 16, 2, 279, 60000)),
    ("V^c=17, L=2", SchedParams(106, 200, 16, 1800, 372, 60000)),
    ("V^c=29, L=8", SchedParams(63, 2350, 16, 1800, 1491, 60000)),
    ("V^c=400, L=8", SchedParams(1, 1000, 16, 400, 1491, 60000)),
    ("V^c=1800, L=2", SchedParams(1, 247, 16, 1800, 372, 60000)),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = sorted(KERNELS)
    if "cython" not in KERNELS:
        print("compiled kernel not built; timing the Python kernel only")
    print(f"{'case':<16}" + "".join(f"{n + ' ms':>14}" for n in names) + f"{'speedup':>10}")
    for label, p in CASES:
        outs = {n: sched(p, kernel=n) for n in names}
        assert len(set(outs.values())) == 1, f"kernels disagree on {label}: {outs}"
        ms = {}
        for n in names:
            number = 3 if n == "python" else 30
            best = min(timeit.repeat(lambda: sched(p, kernel=n), number=number, repeat=args.repeat))
            ms[n] = best / number * 1000
        speed = f"{ms['python'] / ms['cython']:.1f}x" if "cython" in ms else "-"
        print(f"{label:<16}" + "".join(f"{ms[n]:>14.3f}" for n in names) + f"{speed:>10}")


if __name__ == "__main__":
    main()
