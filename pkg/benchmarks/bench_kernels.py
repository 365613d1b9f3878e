"""Compare the compiled CSR kernels against the NumPy fallback.

Times ``csr_matvec``, ``ilu0_factor``, and ``ilu0_solve`` on the monolithic
system matrix of a representative configuration and checks that the two
backends produce identical results.

Run:  python3 benchmarks/bench_kernels.py [--mesh 32] [--layers 5] [--repeats 3]
"""

import argparse
import time

import numpy as np

from layertide import (
    LayerStack,
    PhysicalParams,
    assemble_block_system,
    build_unit_square_mesh,
    kernel_backend,
)
from layertide._kernels import _pykernels
from layertide.sparse import _diag_positions

try:
    from layertide._kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def run_backend(impl, a, diag, x, b, repeats):
    out = np.empty(a.nrows)
    t_mv = best_of(
        lambda: impl.csr_matvec(a.row_ptr, a.col_idx, a.values, x, out),
        repeats)
    mv = out.copy()

    vals = a.values.copy()

    def factor():
        vals[:] = a.values
        impl.ilu0_factor(a.row_ptr, a.col_idx, vals, diag)

    t_fac = best_of(factor, repeats)

    sol = np.empty(a.nrows)
    t_sol = best_of(
        lambda: impl.ilu0_solve(a.row_ptr, a.col_idx, vals, diag, b, sol),
        repeats)
    return {"times": (t_mv, t_fac, t_sol),
            "outputs": (mv, vals.copy(), sol.copy())}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mesh", type=int, default=32)
    parser.add_argument("--layers", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    mesh = build_unit_square_mesh(args.mesh, args.mesh)
    stack = LayerStack.equidistributed(args.layers)
    params = PhysicalParams(1.0, 0.5 * mesh.h, 1.0)
    system = assemble_block_system(mesh, stack, params)
    a = system.monolithic
    diag = _diag_positions(a)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(a.ncols)
    b = rng.standard_normal(a.nrows)

    print(f"active backend: {kernel_backend}")
    print(f"mesh {args.mesh} x {args.mesh}, {args.layers} layers: "
          f"matrix {a.nrows} x {a.ncols}, nnz {a.values.size}, "
          f"best of {args.repeats}")

    results = {"python": run_backend(_pykernels, a, diag, x, b, args.repeats)}
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")
    else:
        results["cython"] = run_backend(_ckernels, a, diag, x, b,
                                        args.repeats)
        for py_out, cy_out in zip(results["python"]["outputs"],
                                  results["cython"]["outputs"]):
            if not np.allclose(py_out, cy_out, rtol=1e-12, atol=1e-14):
                raise AssertionError("backend outputs diverge")
        print("outputs agree across backends")

    names = ("csr_matvec", "ilu0_factor", "ilu0_solve")
    header = f"{'kernel':<14}{'python [s]':>12}"
    if "cython" in results:
        header += f"{'cython [s]':>12}{'speedup':>10}"
    print()
    print(header)
    for i, name in enumerate(names):
        t_py = results["python"]["times"][i]
        line = f"{name:<14}{t_py:>12.3e}"
        if "cython" in results:
            t_cy = results["cython"]["times"][i]
            line += f"{t_cy:>12.3e}{t_py / t_cy:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
