#!/usr/bin/env python3
"""Smoke test of the bgqmc_py extension module.

Build the extension first:

    cargo build -p bgqmc-py            # or --release

The script locates the cdylib under target/, exposes it as an importable
module, and exercises the main types and operations.
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_bgqmc_py():
    candidates = [
        REPO / "target" / "release" / "libbgqmc_py.so",
        REPO / "target" / "debug" / "libbgqmc_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build -p bgqmc-py")
    stage = Path(tempfile.mkdtemp(prefix="bgqmc-py-"))
    shutil.copy2(lib, stage / "bgqmc_py.so")
    sys.path.insert(0, str(stage))
    import bgqmc_py

    return bgqmc_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol * max(1.0, abs(b)), f"{a} != {b} (tol {tol})"


def main():
    m = import_bgqmc_py()
    print(f"bgqmc_py {m.__version__}")

    # distribution kernels
    normal = m.BetaGaussian(2.0)
    approx(normal.density(0.0), 1.0 / math.sqrt(2.0 * math.pi), 1e-12)
    approx(normal.cdf(0.0), 0.5, 1e-15)
    approx(normal.inv_cdf(0.975), 1.959964, 1e-4)
    approx(normal.abs_moment(2.0), 1.0, 1e-11)
    half = m.BetaGaussian(0.5)
    t = 0.12345
    approx(half.cdf(half.inv_cdf(t)), t, 1e-10)
    approx(half.exp_moment(0.0, 0.5), 1.0, 1e-9)
    print("distribution: ok")

    # lattice machinery
    assert m.euler_totient(17) == 16
    assert m.euler_totient(63997) == 63996
    lat = m.cbc_construct(31, 4)
    assert lat.n == 31 and len(lat.z) == 4
    assert all(1 <= z < 31 for z in lat.z)
    pt = lat.point(31, [0.0, 0.0, 0.0, 0.0])
    assert pt == [0.0, 0.0, 0.0, 0.0]
    print(f"cbc: z = {lat.z}")

    # weighted-space quantities at the default study parameters
    lam, kernel_k, rate = m.space_quantities()
    approx(lam, 0.7145409074669525, 1e-12)
    approx(kernel_k, 148.58014526547348, 1e-10)
    approx(rate, 0.69975, 1e-12)
    print(f"space: lambda={lam:.6f} K={kernel_k:.4f} rate={rate}")

    # coefficient field and a single PDE solve
    approx(m.gevrey_coeff(2.0, (0.3, 0.4), [0.0, 0.0]), 1.0, 1e-14)
    h1, l2 = m.solve_sample(2.0, 3, [0.5, -1.0, 2.0])
    assert h1 > 0.0 and l2 > 0.0 and l2 < h1
    print(f"fem sample: |u|_H1={h1:.5f} |u|_L2={l2:.5f}")

    # rate fitting
    slope, intercept, residual = m.fit_rate([(1.0, 1.0), (10.0, 0.1)])
    approx(slope, -1.0, 1e-12)
    assert abs(intercept) < 1e-12 and residual < 1e-20

    # a miniature end-to-end study
    rows, h1_slope, l2_slope = m.qmc_study([
        ("s", "3"), ("k", "2"), ("n_list", "17,31,67"), ("shifts", "3"),
    ])
    assert len(rows) == 3
    assert all(r[1] >= 0.0 for r in rows)
    print(f"qmc study: h1_slope={h1_slope:.3f} l2_slope={l2_slope:.3f}")

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
