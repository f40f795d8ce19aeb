"""Command-line entry points: run, converge, verify.

Exit codes: 0 success, 1 numerical failure, 2 usage error.  Every error
path prints a line starting with ``ERROR:`` so wrappers can grep for it.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .config import parse_config
from .errors import ConfigError, SurfnsError
from .output import write_convergence_csv, write_diagnostics_csv, write_vtk
from .stepper import SolverOptions, run as run_simulation
from .verification import DEFAULT_PROFILE, RadialProfile, convergence_experiment

__all__ = ["main"]

PROFILES = {
    "default": DEFAULT_PROFILE,
    "gentle": RadialProfile(
        radius=lambda t: 1.0 + 0.25 * math.sin(2.0 * math.pi * t),
        rate=lambda t: 0.5 * math.pi * math.cos(2.0 * math.pi * t),
        accel=lambda t: -math.pi**2 * math.sin(2.0 * math.pi * t),
    ),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="surfns",
        description="finite element flow solver on evolving closed surfaces",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="time-step a configured simulation")
    p_run.add_argument("config", help="path to a configuration file")
    p_run.add_argument(
        "--steps", type=int, default=None, help="override the step count"
    )

    p_conv = sub.add_parser(
        "converge", help="manufactured-solution refinement study"
    )
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--T", type=float, default=1.0, dest="t_end")
    p_conv.add_argument(
        "--profile", choices=sorted(PROFILES), default="default"
    )
    p_conv.add_argument("--start-level", type=int, default=2)
    p_conv.add_argument(
        "--method", choices=("schur", "direct"), default="direct"
    )
    p_conv.add_argument("--out", default=None, help="also write the CSV here")

    sub.add_parser("verify", help="run the built-in verification suite")
    return parser


def _cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        print(f"ERROR: cannot read config {args.config}: {exc}")
        return 2
    config = parse_config(text)
    out_dir = config.output.directory
    os.makedirs(out_dir, exist_ok=True)
    msh = config.build_mesh()
    params = config.scheme_params()
    want_vtk = "vtk" in config.output.formats
    stride = config.output.stride

    def snapshot(state, diag):
        if want_vtk and state.step_index % stride == 0:
            write_vtk(
                state, os.path.join(out_dir, f"surface_{state.step_index:06d}.vtk")
            )

    result = run_simulation(
        msh,
        params,
        config.initial_velocity(),
        n_steps=args.steps,
        options=config.solver_options(),
        callback=snapshot,
    )
    if "csv" in config.output.formats:
        write_diagnostics_csv(
            result.diagnostics, os.path.join(out_dir, "diagnostics.csv")
        )
    final = result.diagnostics[-1]
    print(
        f"completed {final.step} steps to t={final.time:.6g}: "
        f"area={final.area:.9g} volume={final.volume:.9g} "
        f"E_total={final.total_energy:.9g}"
    )
    print(f"output written to {out_dir}")
    return 0


def _cmd_converge(args) -> int:
    if args.levels < 2:
        print("ERROR: --levels must be at least 2")
        return 2
    result = convergence_experiment(
        args.levels,
        profile=PROFILES[args.profile],
        start_level=args.start_level,
        t_end=args.t_end,
        options=SolverOptions(method=args.method),
    )
    write_convergence_csv(result, sys.stdout)
    print(f"# pressure interpretation: {result.pressure_interpretation}")
    if args.out is not None:
        write_convergence_csv(result, args.out)
    failures = [row for row in result.rows if row.failed is not None]
    for row in failures:
        print(f"ERROR: level {row.level} failed: {row.failed}")
    return 1 if failures else 0


def _cmd_verify(_args) -> int:
    from .assembly import SchemeParams, assemble_system
    from .geometry import (
        AnalyticSphere,
        AnalyticTorus,
        bending_energy,
        enclosed_volume,
        identity_residuals,
        surface_area,
    )
    from .mesh import NodeField, build_sphere, build_torus, interpolate, mesh_size
    from .reference import quadrature_rule
    from .solver import recover_geometry, solve_full_direct, solve_saddle
    from .stepper import initialize
    from .verification import eoc

    checks = []

    def check(name, passed, detail):
        checks.append(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

    rule = quadrature_rule(17)
    worst = 0.0
    for a in range(18):
        for b in range(18 - a):
            exact = (
                math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            )
            got = float(
                np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            )
            worst = max(worst, abs(got - exact) / exact)
    check("quadrature degree-17 exactness", worst <= 1e-13, f"max rel err {worst:.2e}")

    spheres = [build_sphere(lvl) for lvl in (1, 2, 3)]
    hs = [mesh_size(m) for m in spheres]
    area_err = [abs(surface_area(m) - 4 * math.pi) for m in spheres]
    vol_err = [abs(enclosed_volume(m) - 4 * math.pi / 3) for m in spheres]
    ae, ve = eoc(area_err, hs)[-1], eoc(vol_err, hs)[-1]
    check("sphere area EOC >= 3", ae >= 3.0, f"EOC {ae:.2f}")
    check("sphere volume EOC >= 3", ve >= 3.0, f"EOC {ve:.2f}")

    tori = [build_torus(lvl) for lvl in (0, 1, 2)]
    ths = [mesh_size(m) for m in tori]
    t_area = [abs(surface_area(m) - 8 * math.pi**2) for m in tori]
    t_vol = [abs(enclosed_volume(m) - 4 * math.pi**2) for m in tori]
    tae, tve = eoc(t_area, ths)[-1], eoc(t_vol, ths)[-1]
    check("torus area EOC >= 3", tae >= 3.0, f"EOC {tae:.2f}")
    check("torus volume EOC >= 3", tve >= 3.0, f"EOC {tve:.2f}")

    state = initialize(spheres[2], SchemeParams())
    eb = bending_energy(state.kappa, state.frames)
    rel = abs(eb - 8 * math.pi) / (8 * math.pi)
    check("sphere bending energy 8 pi", rel <= 0.01, f"rel err {rel:.2e}")

    t_state = initialize(tori[2], SchemeParams())
    target = 8 * math.pi**2 / math.sqrt(3.0)
    t_rel = abs(bending_energy(t_state.kappa, t_state.frames) - target) / target
    check("torus bending energy 8 pi^2/sqrt(3)", t_rel <= 0.01, f"rel err {t_rel:.2e}")

    s_res = [identity_residuals(m, AnalyticSphere()) for m in spheres]
    t_res = [identity_residuals(m, AnalyticTorus()) for m in tori]
    s_gauss_zero = max(r.gauss_l2 for r in s_res) <= 1e-12
    s_weak = eoc([r.laplace_weak for r in s_res], hs)[-1]
    t_gauss = eoc([r.gauss_l2 for r in t_res], ths)[-1]
    t_weak = eoc([r.laplace_weak for r in t_res], ths)[-1]
    check(
        "sphere curvature identity",
        s_gauss_zero and s_weak >= 1.0,
        f"pointwise exact, weak EOC {s_weak:.2f}",
    )
    check(
        "torus curvature identity EOC >= 1",
        t_gauss >= 1.0 and t_weak >= 1.0,
        f"EOCs {t_gauss:.2f} / {t_weak:.2f}",
    )

    b0 = np.array([1.0, 0.0, 0.0])
    msh = spheres[0]
    params = SchemeParams(alpha=0.0, tau=1e-3)
    u0 = interpolate(msh, lambda p: np.broadcast_to(b0, p.shape).copy(), "P2_vector3")
    system = assemble_system(
        msh, params, u0, NodeField.zeros(msh, "P2_vector3"), t=0.0
    )
    u, p, _ = solve_saddle(system)
    dev = max(
        float(np.abs(u.reshape(-1, 3) - b0).max()), float(np.abs(p).max())
    )
    check("translating sphere exact", dev <= 1e-9, f"max deviation {dev:.2e}")

    params = SchemeParams(alpha=1.0, tau=1e-3)
    kappa0 = initialize(msh, params).kappa
    system = assemble_system(msh, params, u0, kappa0, t=0.0)
    u_s, p_s, _ = solve_saddle(system, tol=1e-12)
    upd_s = recover_geometry(system, u_s)
    u_d, p_d, upd_d, _ = solve_full_direct(system)
    gap = 0.0
    for a_vec, b_vec in (
        (u_s, u_d),
        (p_s, p_d),
        (upd_s.kappa, upd_d.kappa),
        (upd_s.displacement, upd_d.displacement),
        (upd_s.force, upd_d.force),
    ):
        scale = np.linalg.norm(b_vec) + 1e-30
        gap = max(gap, float(np.linalg.norm(a_vec - b_vec) / scale))
    check("Schur vs direct equivalence", gap <= 1e-8, f"max rel gap {gap:.2e}")

    return 0 if all(checks) else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"ERROR: {exc}")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_verify(args)
    except ConfigError as exc:
        print(f"ERROR: {exc}")
        return 2
    except SurfnsError as exc:
        print(f"ERROR: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
