"""Time stepping of the coupled flow-geometry system.

Each step assembles the saddle system on the current surface, solves for
velocity and pressure (condensed Schur/GMRES by default, monolithic direct
on request), back-substitutes curvature, displacement and bending force,
moves the nodes and carries all fields to the moved surface by coefficient
identity.

Energy diagnostics pair the *new* fields with the *old* surface's inner
product, matching the stability analysis of the scheme; area and volume
are reported on the updated surface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import SchemeParams, assemble_divergence_source, assemble_mass, \
    assemble_pressure_coupling, assemble_system
from .errors import SimulationAborted, SurfnsError
from .geometry import ElementFrames, element_frames, enclosed_volume
from .mesh import NodeField, PushforwardMap, SurfaceMesh, interpolate, pushforward, \
    update_geometry
from .reference import quadrature_rule
from .solver import CondensedDirectSolver, factorize_spd, recover_geometry, \
    solve_saddle, system_residuals

log = logging.getLogger(__name__)

__all__ = [
    "SimulationState",
    "Diagnostics",
    "SolverOptions",
    "RunResult",
    "initialize",
    "step",
    "run",
    "compute_diagnostics",
]

RESIDUAL_CERTIFICATE_BOUND = 1.0e-9


@dataclass(frozen=True)
class SolverOptions:
    method: str = "schur"  # "schur" or "direct"
    tol: float = 1.0e-10
    restart: int = 50
    max_iter: int = 500
    check_residuals: bool = True

    def __post_init__(self):
        if self.method not in ("schur", "direct"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass
class SimulationState:
    mesh: SurfaceMesh
    time: float
    step_index: int
    velocity: NodeField
    pressure: NodeField
    kappa: NodeField
    force: NodeField
    frames: ElementFrames = field(repr=False, default=None)


@dataclass
class Diagnostics:
    step: int
    time: float
    area: float
    volume: float
    kinetic_energy: float
    bending_energy: float
    total_energy: float
    divergence_residual: float
    solver_iterations: int
    solver_seconds: float
    certificates: dict = None


@dataclass
class RunResult:
    state: SimulationState
    diagnostics: list
    states: list | None = None


def _as_velocity_field(msh: SurfaceMesh, initial_velocity) -> NodeField:
    if initial_velocity is None:
        return NodeField.zeros(msh, "P2_vector3")
    if isinstance(initial_velocity, NodeField):
        if initial_velocity.space != "P2_vector3":
            raise ValueError("initial velocity must be a P2_vector3 field")
        return initial_velocity
    return interpolate(msh, initial_velocity, "P2_vector3")


def initialize(
    msh: SurfaceMesh, params: SchemeParams, initial_velocity=None
) -> SimulationState:
    """Starting state: curvature from the discrete identity on the mesh.

    The initial curvature solves M kappa = -A X, the weak form of the
    geometric identity defining the vector curvature of the discrete
    surface; pressure and bending force start at zero.
    """
    frames = element_frames(msh, rule=quadrature_rule(params.quad_degree))
    velocity = _as_velocity_field(msh, initial_velocity)
    from .assembly import assemble_stiffness  # local import to avoid cycle noise

    mass = assemble_mass(msh, "P2_vector3", frames=frames)
    stiffness = assemble_stiffness(msh, "P2_vector3", frames=frames)
    kappa_flat = factorize_spd(mass).solve(-(stiffness @ msh.node_coords.reshape(-1)))
    return SimulationState(
        mesh=msh,
        time=0.0,
        step_index=0,
        velocity=velocity,
        pressure=NodeField.zeros(msh, "P1_scalar"),
        kappa=NodeField.from_flat(msh, "P2_vector3", kappa_flat),
        force=NodeField.zeros(msh, "P2_vector3"),
        frames=frames,
    )


def compute_diagnostics(
    state: SimulationState,
    params: SchemeParams,
    energy_frames: ElementFrames | None = None,
    solver_iterations: int = 0,
    solver_seconds: float = 0.0,
    certificates: dict | None = None,
) -> Diagnostics:
    """Diagnostics of a state.

    ``energy_frames`` selects the surface whose inner product weighs the
    energies (the pre-update surface during stepping); it defaults to the
    state's own surface, which is also always used for area and volume.
    """
    frames = state.frames
    if frames is None:
        frames = element_frames(state.mesh, rule=quadrature_rule(params.quad_degree))
    if energy_frames is None:
        energy_frames = frames
    mass = assemble_mass(energy_frames.mesh, "P2_vector3", frames=energy_frames)
    u = state.velocity.flat
    k = state.kappa.flat
    e_kin = 0.5 * params.rho * float(u @ (mass @ u))
    e_bend = 0.5 * float(k @ (mass @ k))
    coupling = assemble_pressure_coupling(state.mesh, frames=frames)
    if params.div_source is not None:
        rhs_div = -assemble_divergence_source(
            state.mesh, float(params.div_source(state.time)), frames=frames
        )
    else:
        rhs_div = 0.0
    div_residual = float(np.linalg.norm(coupling.T @ u - rhs_div))
    return Diagnostics(
        step=state.step_index,
        time=state.time,
        area=frames.total_area,
        volume=enclosed_volume(state.mesh, frames),
        kinetic_energy=e_kin,
        bending_energy=e_bend,
        total_energy=e_kin + params.alpha * e_bend,
        divergence_residual=div_residual,
        solver_iterations=solver_iterations,
        solver_seconds=solver_seconds,
        certificates=certificates,
    )


def step(
    state: SimulationState,
    params: SchemeParams,
    options: SolverOptions = SolverOptions(),
    direct_solver: CondensedDirectSolver | None = None,
) -> tuple[SimulationState, Diagnostics]:
    """Advance one time step; returns the new state and its diagnostics.

    ``direct_solver`` lets a driver keep one ``CondensedDirectSolver``
    alive across steps so its factorization reuse can pay off.
    """
    msh = state.mesh
    frames = state.frames
    if frames is None:
        frames = element_frames(msh, rule=quadrature_rule(params.quad_degree))
    system = assemble_system(
        msh, params, state.velocity, state.kappa, t=state.time, frames=frames
    )

    if options.method == "direct":
        if direct_solver is None:
            direct_solver = CondensedDirectSolver()
        u, p, update, report = direct_solver.solve(system)
    else:
        mass_solver = factorize_spd(system.mass)
        u, p, report = solve_saddle(
            system,
            tol=options.tol,
            restart=options.restart,
            max_iter=options.max_iter,
            mass_solver=mass_solver,
        )
        update = recover_geometry(system, u, mass_solver)

    certificates = None
    if options.check_residuals:
        certificates = system_residuals(system, u, p, update)
        worst = max(certificates.values())
        if worst > RESIDUAL_CERTIFICATE_BOUND:
            log.warning(
                "step %d: residual certificate %.3e exceeds %.1e",
                state.step_index,
                worst,
                RESIDUAL_CERTIFICATE_BOUND,
            )

    new_coords = NodeField.from_flat(
        msh, "P2_vector3", system.coords + update.displacement
    )
    new_mesh = update_geometry(msh, new_coords)
    pmap = PushforwardMap(source=msh, target=new_mesh)

    carried = {
        "velocity": NodeField.from_flat(msh, "P2_vector3", u),
        "pressure": NodeField(mesh=msh, space="P1_scalar", data=p),
        "kappa": NodeField.from_flat(msh, "P2_vector3", update.kappa),
        "force": NodeField.from_flat(msh, "P2_vector3", update.force),
    }
    new_frames = element_frames(new_mesh, rule=frames.rule)
    new_state = SimulationState(
        mesh=new_mesh,
        time=state.time + params.tau,
        step_index=state.step_index + 1,
        velocity=pushforward(pmap, carried["velocity"]),
        pressure=pushforward(pmap, carried["pressure"]),
        kappa=pushforward(pmap, carried["kappa"]),
        force=pushforward(pmap, carried["force"]),
        frames=new_frames,
    )

    # energies of the new fields in the old surface's inner product
    e_kin = 0.5 * params.rho * float(u @ (system.mass @ u))
    k = update.kappa
    e_bend = 0.5 * float(k @ (system.mass @ k))
    div_residual = float(
        np.linalg.norm(system.coupling.T @ u - system.rhs_divergence)
    )
    diagnostics = Diagnostics(
        step=new_state.step_index,
        time=new_state.time,
        area=new_frames.total_area,
        volume=enclosed_volume(new_mesh, new_frames),
        kinetic_energy=e_kin,
        bending_energy=e_bend,
        total_energy=e_kin + params.alpha * e_bend,
        divergence_residual=div_residual,
        solver_iterations=report.iterations,
        solver_seconds=report.seconds,
        certificates=certificates,
    )
    return new_state, diagnostics


def run(
    msh: SurfaceMesh,
    params: SchemeParams,
    initial_velocity=None,
    *,
    n_steps: int | None = None,
    options: SolverOptions = SolverOptions(),
    callback=None,
    record_states: bool = False,
) -> RunResult:
    """March ``n_steps`` steps (default: to ``params.t_end``).

    ``callback(state, diagnostics)`` fires after the initial state and
    after every step.  On failure a ``SimulationAborted`` carrying the
    partial history propagates.
    """
    if n_steps is None:
        n_steps = max(1, round(params.t_end / params.tau))
    state = initialize(msh, params, initial_velocity)
    diagnostics = [compute_diagnostics(state, params)]
    states = [state] if record_states else None
    if callback is not None:
        callback(state, diagnostics[0])
    direct_solver = CondensedDirectSolver() if options.method == "direct" else None
    for _ in range(n_steps):
        try:
            state, diag = step(state, params, options, direct_solver)
        except SurfnsError as exc:
            raise SimulationAborted(
                f"run aborted at step {state.step_index + 1}: {exc}",
                state=state,
                history=diagnostics,
                cause=exc,
            ) from exc
        diagnostics.append(diag)
        if record_states:
            states.append(state)
        if callback is not None:
            callback(state, diag)
    return RunResult(state=state, diagnostics=diagnostics, states=states)
