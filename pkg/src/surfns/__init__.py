"""Parametric quadratic finite elements for incompressible flow on
evolving closed surfaces.

The package simulates a fully discrete scheme coupling surface
Navier-Stokes momentum and continuity equations with the normal motion of
the surface itself, driven by curvature (bending) forces.  Subpackages:

- ``mesh``       curved six-node triangle meshes of closed surfaces
- ``geometry``   frames, surface gradients and integrals
- ``assembly``   sparse matrices and load vectors of the per-step system
- ``solver``     condensed Schur/GMRES and monolithic direct solvers
- ``stepper``    time stepping, diagnostics
- ``verification`` exact radial solution, error norms, convergence study
- ``config``/``output``/``cli``  run configuration and file formats
"""

from .assembly import BlockSaddleSystem, SchemeParams
from .config import RunConfig, parse_config, serialize_config
from .errors import (
    ConfigError,
    IterationError,
    MeshStructureError,
    SimulationAborted,
    SingularMatrixError,
    SurfnsError,
)
from .geometry import (
    AnalyticSphere,
    AnalyticTorus,
    ElementFrames,
    bending_energy,
    element_frames,
    enclosed_volume,
    eval_with_surface_gradient,
    identity_residuals,
    integrate,
    surface_area,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .mesh import (
    NodeField,
    PushforwardMap,
    SurfaceMesh,
    build_capsule,
    build_sphere,
    build_torus,
    interpolate,
    mesh_size,
    pushforward,
    update_geometry,
)
from .output import write_convergence_csv, write_diagnostics_csv, write_vtk
from .reference import QuadratureRule, quadrature_rule
from .solver import (
    CondensedDirectSolver,
    factorize_spd,
    recover_geometry,
    solve_full_direct,
    solve_saddle,
)
from .stepper import (
    Diagnostics,
    RunResult,
    SimulationState,
    SolverOptions,
    initialize,
    run,
    step,
)
from .verification import (
    DEFAULT_PROFILE,
    ExactSphereSolution,
    RadialProfile,
    convergence_experiment,
    eoc,
    exact_sphere,
    overall_eoc,
)

__version__ = "0.1.0"
