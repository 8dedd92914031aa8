"""Time marked-set enumeration and tracked amplitudes on each available kernel backend.

    python benchmarks/bench_kernels.py --n 24 --repeat 5
"""

import argparse
import timeit

from nestedaa import _kernels
from nestedaa.amptrack import BiasConfig, prefix_amplitudes
from nestedaa.instances import generate_instance, reorder_items
from nestedaa.ksolve import enumerate_global_marked, greedy_solution


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=22)
    ap.add_argument("--tightness", type=int, default=10)
    ap.add_argument("--index", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    inst = reorder_items(generate_instance(args.n, 1000, "uncorrelated", args.tightness, args.index),
                         "density_descending")
    y = greedy_solution(inst).value // 2
    bias = BiasConfig.greedy(inst, 1.0)
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    size = len(enumerate_global_marked(inst, y))
    print(f"n={inst.n}, threshold {y}, {size} marked states")
    for be in backends:
        # first call compiles under numba; keep it out of the timing
        marked = enumerate_global_marked(inst, y, backend=be)
        prefix_amplitudes(inst, bias, marked.codes, inst.n, backend=be)
        t_enum = min(timeit.repeat(lambda: enumerate_global_marked(inst, y, backend=be), number=1,
                                   repeat=args.repeat))
        t_amp = min(timeit.repeat(lambda: prefix_amplitudes(inst, bias, marked.codes, inst.n, backend=be),
                                  number=1, repeat=args.repeat))
        print(f"{be:6s} enumerate {t_enum * 1e3:9.2f} ms   amplitudes {t_amp * 1e3:9.2f} ms")


if __name__ == "__main__":
    main()
