#!/usr/bin/env python3
"""Compare the compiled assembly kernels against the NumPy fallback.

Runs every local kernel on a realistic workload (all elements of a
refined sphere) for both backends in one process, checks they agree to
rounding, and reports per-call times.  An optional end-to-end section
times a full system assembly in a subprocess per backend, since the
backend is frozen at import time.

Usage: python benchmarks/bench_kernels.py [--level N] [--repeat K] [--full]
"""

import argparse
import subprocess
import sys
import time

import numpy as np

from surfns import _kernels_np
from surfns.geometry import element_frames, eval_with_surface_gradient
from surfns.mesh import build_sphere, interpolate

try:
    from surfns import _kernels
except ImportError:
    _kernels = None


def timed(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--level", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument(
        "--full", action="store_true",
        help="also time a whole-system assembly per backend (subprocesses)",
    )
    args = parser.parse_args(argv)

    msh = build_sphere(args.level)
    frames = element_frames(msh)
    rule = frames.rule
    kappa = interpolate(msh, lambda p: -2.0 * np.asarray(p), "P2_vector3")
    kappa_eval = eval_with_surface_gradient(kappa, frames)
    load_values = frames.position.copy()
    scalar_values = frames.position[:, :, 2].copy()

    cases = [
        ("local_mass", (frames.weights, rule.basis_p2)),
        ("local_stiffness", (frames.weights, frames.grads_p2)),
        ("local_deformation", (frames.weights, frames.grads_p2, frames.projection)),
        ("local_div_coupling", (frames.weights, frames.grads_p2, rule.basis_p1)),
        ("local_vector_load", (frames.weights, rule.basis_p2, load_values)),
        ("local_scalar_load", (frames.weights, rule.basis_p1, scalar_values)),
        (
            "local_bending_force",
            (
                frames.weights,
                frames.grads_p2,
                frames.projection,
                kappa_eval.values,
                kappa_eval.jacobian,
            ),
        ),
    ]

    print(
        f"sphere level {args.level}: {msh.num_elements} elements, "
        f"{rule.points.shape[0]} quadrature points, best of {args.repeat}"
    )
    if _kernels is None:
        print("compiled extension unavailable; timing the NumPy backend only")
    header = f"{'kernel':<22}{'numpy':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, case_args in cases:
        ref, t_np = timed(getattr(_kernels_np, name), case_args, args.repeat)
        if _kernels is not None:
            out, t_cy = timed(getattr(_kernels, name), case_args, args.repeat)
            scale = np.abs(ref).max() or 1.0
            gap = np.abs(np.asarray(out) - ref).max() / scale
            if gap > 1e-13:
                raise SystemExit(f"backends disagree on {name}: {gap:.3e}")
            print(f"{name:<22}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms{t_np / t_cy:>9.1f}x")
        else:
            print(f"{name:<22}{t_np * 1e3:>10.2f}ms{'-':>12}{'-':>10}")

    if args.full:
        print()
        for backend in ("numpy", "cython") if _kernels is not None else ("numpy",):
            code = (
                "import time\n"
                "from surfns.assembly import SchemeParams, assemble_system\n"
                "from surfns.mesh import NodeField, build_sphere\n"
                f"msh = build_sphere({args.level})\n"
                "u = NodeField.zeros(msh, 'P2_vector3')\n"
                "k = NodeField.zeros(msh, 'P2_vector3')\n"
                "params = SchemeParams()\n"
                "assemble_system(msh, params, u, k, t=0.0)\n"
                "t0 = time.perf_counter()\n"
                "assemble_system(msh, params, u, k, t=0.0)\n"
                "print(f'{time.perf_counter() - t0:.3f}')\n"
            )
            out = subprocess.run(
                [sys.executable, "-c", code],
                env={"SURFNS_KERNELS": backend, "PATH": "/usr/bin:/bin"},
                capture_output=True,
                text=True,
                check=True,
            )
            print(f"full assembly ({backend}): {out.stdout.strip()} s")

    return 0


if __name__ == "__main__":
    sys.exit(main())
