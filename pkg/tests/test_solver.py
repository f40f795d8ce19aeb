import numpy as np
import pytest
import scipy.sparse as sp

from surfns.assembly import SchemeParams, assemble_mass, assemble_system
from surfns.errors import IterationError, SingularMatrixError
from surfns.mesh import NodeField, build_sphere, interpolate
from surfns.solver import (
    apply_schur_velocity_operator,
    factorize_spd,
    recover_geometry,
    solve_full_direct,
    solve_saddle,
    system_residuals,
)


def initial_kappa(system):
    solver = factorize_spd(system.mass)
    return solver.solve(-(system.stiffness @ system.coords))


def assembled_sphere(level, params, velocity=None):
    msh = build_sphere(level)
    if velocity is None:
        velocity = NodeField.zeros(msh, "P2_vector3")
    kappa0 = NodeField.zeros(msh, "P2_vector3")
    boot = assemble_system(msh, params, velocity, kappa0, t=0.0)
    kappa = NodeField.from_flat(msh, "P2_vector3", initial_kappa(boot))
    return msh, assemble_system(msh, params, velocity, kappa, t=0.0, frames=boot.frames)


class TestFactorization:
    def test_solves_mass_system(self, sphere_meshes, sphere_frames):
        msh = sphere_meshes[1]
        m = assemble_mass(msh, "P2_scalar", frames=sphere_frames[1])
        solver = factorize_spd(m)
        rng = np.random.default_rng(0)
        b = rng.standard_normal(msh.num_nodes)
        x = solver.solve(b)
        assert np.linalg.norm(m @ x - b) <= 1e-11 * np.linalg.norm(b)

    def test_rejects_nonsymmetric(self, sphere_meshes, sphere_frames):
        m = assemble_mass(sphere_meshes[1], "P2_scalar", frames=sphere_frames[1]).tolil()
        m[0, 1] += 1.0
        with pytest.raises(SingularMatrixError):
            factorize_spd(m.tocsr())

    def test_rejects_negative_definite(self, sphere_meshes, sphere_frames):
        m = assemble_mass(sphere_meshes[1], "P2_scalar", frames=sphere_frames[1])
        with pytest.raises(SingularMatrixError):
            factorize_spd(-m)

    def test_rejects_zero(self):
        with pytest.raises(SingularMatrixError):
            factorize_spd(sp.csr_matrix((5, 5)))


class TestTranslatingSphere:
    """With zero bending coupling and a constant initial velocity the step
    is exact: the velocity persists, the pressure vanishes and the surface
    translates rigidly."""

    def test_single_step_exact(self):
        b0 = np.array([0.3, -0.2, 0.5])
        params = SchemeParams(alpha=0.0, tau=1e-3, quad_degree=8)
        msh = build_sphere(1)
        u0 = interpolate(msh, lambda p: b0, "P2_vector3")
        kappa = NodeField.zeros(msh, "P2_vector3")
        system = assemble_system(msh, params, u0, kappa, t=0.0)
        u, p, report = solve_saddle(system)
        assert report.iterations <= 2
        assert np.max(np.abs(u.reshape(-1, 3) - b0)) <= 1e-10
        assert np.max(np.abs(p)) <= 1e-9
        update = recover_geometry(system, u)
        assert np.allclose(
            update.displacement.reshape(-1, 3), params.tau * b0, atol=1e-13
        )

    def test_zero_coupling_two_iterations(self):
        # alpha = 0 makes the preconditioner exact: convergence in <= 2
        params = SchemeParams(alpha=0.0, tau=1e-3, quad_degree=8)
        msh = build_sphere(1)
        u0 = interpolate(msh, lambda p: np.array([-p[1], p[0], 0.2]), "P2_vector3")
        kappa = NodeField.zeros(msh, "P2_vector3")
        system = assemble_system(msh, params, u0, kappa, t=0.0)
        _, _, report = solve_saddle(system)
        assert report.iterations <= 2
        assert report.residual <= 1e-10


class TestSchurVersusDirect:
    def test_agreement_with_bending(self):
        params = SchemeParams(alpha=1.0, tau=1e-3, quad_degree=8)
        msh, system = assembled_sphere(
            1,
            params,
            velocity=None,
        )
        u_s, p_s, rep_s = solve_saddle(system, tol=1e-12)
        u_d, p_d, update_d, rep_d = solve_full_direct(system)
        scale_u = np.linalg.norm(u_d) + 1e-30
        scale_p = np.linalg.norm(p_d) + 1e-30
        assert np.linalg.norm(u_s - u_d) <= 1e-8 * scale_u
        assert np.linalg.norm(p_s - p_d) <= 1e-8 * scale_p
        solver = factorize_spd(system.mass)
        update_s = recover_geometry(system, u_s, solver)
        for a, b in zip(update_s, update_d):
            assert np.linalg.norm(a - b) <= 1e-8 * (np.linalg.norm(b) + 1e-30)

    def test_residual_certificates(self):
        params = SchemeParams(alpha=1.0, tau=1e-3, quad_degree=8)
        _, system = assembled_sphere(1, params)
        u, p, _ = solve_saddle(system, tol=1e-11)
        update = recover_geometry(system, u)
        residuals = system_residuals(system, u, p, update)
        for name, value in residuals.items():
            assert value <= 1e-9, (name, value)


class TestSchurOperator:
    def test_symmetry_of_bending_term(self):
        params = SchemeParams(alpha=1.0, tau=1e-2, quad_degree=6)
        _, system = assembled_sphere(0, params)
        solver = factorize_spd(system.mass)
        rng = np.random.default_rng(5)
        v = rng.standard_normal(system.n_velocity)
        w = rng.standard_normal(system.n_velocity)
        # subtract the velocity block: the rest is tau alpha A M^-1 A
        tv = apply_schur_velocity_operator(v, system, solver) - system.velocity_block @ v
        tw = apply_schur_velocity_operator(w, system, solver) - system.velocity_block @ w
        assert w @ tv == pytest.approx(v @ tw, rel=1e-10)

    def test_zero_rhs_short_circuit(self):
        params = SchemeParams(alpha=0.0, tau=1e-3, quad_degree=6)
        msh = build_sphere(0)
        u0 = NodeField.zeros(msh, "P2_vector3")
        kappa = NodeField.zeros(msh, "P2_vector3")
        system = assemble_system(msh, params, u0, kappa, t=0.0)
        u, p, report = solve_saddle(system)
        assert report.iterations == 0
        assert not u.any() and not p.any()


class TestSingularCases:
    def test_quasistatic_sphere_is_singular(self):
        # rho = 0 and no bending: rigid motions are exact kernel vectors
        params = SchemeParams(rho=0.0, alpha=0.0, tau=1e-3, quad_degree=6)
        _, system = assembled_sphere(0, params)
        with pytest.raises(SingularMatrixError):
            solve_full_direct(system)

    def test_rank_deficiency_at_least_three(self):
        params = SchemeParams(rho=0.0, alpha=0.0, tau=1e-3, quad_degree=6)
        _, system = assembled_sphere(0, params)
        saddle = sp.bmat(
            [[system.velocity_block, system.coupling], [system.coupling.T, None]]
        ).toarray()
        svals = np.linalg.svd(saddle, compute_uv=False)
        deficiency = int(np.sum(svals <= 1e-10 * svals[0]))
        assert deficiency >= 3

    def test_direct_size_guard(self):
        params = SchemeParams(alpha=1.0, tau=1e-3, quad_degree=6)
        _, system = assembled_sphere(0, params)
        with pytest.raises(ValueError):
            solve_full_direct(system, max_unknowns=10)
