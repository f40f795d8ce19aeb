import numpy as np
import pytest

from surfns.assembly import (
    SchemeParams,
    assemble_curvature_explicit,
    assemble_divergence_source,
    assemble_mass,
    assemble_momentum_rhs,
    assemble_pressure_coupling,
    assemble_stiffness,
    assemble_system,
    assemble_velocity_block,
)
from surfns.geometry import (
    deformation_tensor,
    element_frames,
    eval_with_surface_gradient,
    integrate,
)
from surfns.mesh import NodeField, interpolate
from surfns.reference import quadrature_rule


@pytest.fixture(scope="module")
def sphere(sphere_meshes, sphere_frames):
    return sphere_meshes[1], sphere_frames[1]


def random_field(msh, space, seed):
    rng = np.random.default_rng(seed)
    fld = NodeField.zeros(msh, space)
    fld.data[...] = rng.standard_normal(fld.data.shape)
    return fld


class TestMass:
    def test_row_sums_give_area(self, sphere):
        msh, fr = sphere
        m = assemble_mass(msh, "P2_scalar", frames=fr)
        assert m.sum() == pytest.approx(fr.total_area, rel=1e-12)
        mp = assemble_mass(msh, "P1_scalar", frames=fr)
        assert mp.sum() == pytest.approx(fr.total_area, rel=1e-12)

    def test_symmetric(self, sphere):
        msh, fr = sphere
        m = assemble_mass(msh, "P2_scalar", frames=fr)
        assert (m - m.T).nnz == 0 or np.max(np.abs((m - m.T).data)) == 0.0

    def test_quadrature_oracle(self, sphere):
        # f^T M g must equal the directly integrated product of the fields
        msh, fr = sphere
        m = assemble_mass(msh, "P2_scalar", frames=fr)
        f = random_field(msh, "P2_scalar", 1)
        g = random_field(msh, "P2_scalar", 2)
        lhs = f.data @ (m @ g.data)
        fv = eval_with_surface_gradient(f, fr).values
        gv = eval_with_surface_gradient(g, fr).values
        assert lhs == pytest.approx(integrate(fv * gv, fr), rel=1e-12)

    def test_vector_mass_is_componentwise(self, sphere):
        msh, fr = sphere
        ms = assemble_mass(msh, "P2_scalar", frames=fr)
        mv = assemble_mass(msh, "P2_vector3", frames=fr)
        k, l = 5, 11
        for i in range(3):
            assert mv[3 * k + i, 3 * l + i] == pytest.approx(ms[k, l], rel=1e-14)
            assert mv[3 * k + i, 3 * l + (i + 1) % 3] == 0.0

    def test_deterministic(self, sphere):
        msh, fr = sphere
        a = assemble_mass(msh, "P2_scalar", frames=fr)
        b = assemble_mass(msh, "P2_scalar", frames=fr)
        assert np.array_equal(a.data, b.data)
        assert np.array_equal(a.indices, b.indices)


class TestStiffness:
    def test_annihilates_constants(self, sphere):
        msh, fr = sphere
        a = assemble_stiffness(msh, "P2_scalar", frames=fr)
        ones = np.ones(msh.num_nodes)
        assert np.max(np.abs(a @ ones)) <= 1e-12 * np.max(np.abs(a.data))

    def test_quadrature_oracle(self, sphere):
        msh, fr = sphere
        a = assemble_stiffness(msh, "P2_scalar", frames=fr)
        f = random_field(msh, "P2_scalar", 3)
        g = random_field(msh, "P2_scalar", 4)
        lhs = f.data @ (a @ g.data)
        fg = eval_with_surface_gradient(f, fr).gradient
        gg = eval_with_surface_gradient(g, fr).gradient
        rhs = integrate(np.einsum("jqc,jqc->jq", fg, gg), fr)
        assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_positive_semidefinite(self, sphere):
        msh, fr = sphere
        a = assemble_stiffness(msh, "P2_vector3", frames=fr)
        rng = np.random.default_rng(0)
        for _ in range(5):
            z = rng.standard_normal(a.shape[0])
            assert z @ (a @ z) >= -1e-10


class TestVelocityBlock:
    def test_linear_combination_exact(self, sphere):
        msh, fr = sphere
        rho, tau, mu = 1.3, 0.01, 0.7
        mass = assemble_mass(msh, "P2_vector3", frames=fr)
        deform = assemble_velocity_block(msh, 0.0, 1.0, 0.5, frames=fr, mass=mass)
        combined = assemble_velocity_block(msh, rho, tau, mu, frames=fr, mass=mass)
        expected = (rho / tau) * mass + (2.0 * mu) * deform
        diff = combined - expected
        assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0

    def test_deformation_energy_oracle(self, sphere):
        # u^T D u must equal the integral of |D_s(u)|_F^2
        msh, fr = sphere
        d = assemble_velocity_block(msh, 0.0, 1.0, 0.5, frames=fr)
        u = random_field(msh, "P2_vector3", 5)
        lhs = u.flat @ (d @ u.flat)
        ev = eval_with_surface_gradient(u, fr)
        du = deformation_tensor(ev.jacobian, fr.projection)
        rhs = integrate(np.einsum("jqab,jqab->jq", du, du), fr)
        assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_rigid_motions_in_kernel(self, sphere):
        # rotations and translations interpolate exactly and produce zero
        # tangential deformation, hence exact kernel vectors of D
        msh, fr = sphere
        d = assemble_velocity_block(msh, 0.0, 1.0, 0.5, frames=fr)
        scale = np.max(np.abs(d.data))
        rot = interpolate(msh, lambda p: np.array([-p[1], p[0], 0.0]), "P2_vector3")
        trans = interpolate(msh, lambda p: np.array([0.4, -1.0, 2.2]), "P2_vector3")
        for fld in (rot, trans):
            assert np.max(np.abs(d @ fld.flat)) <= 1e-12 * scale


class TestPressureCoupling:
    def test_shape(self, sphere):
        msh, fr = sphere
        c = assemble_pressure_coupling(msh, frames=fr)
        assert c.shape == (3 * msh.num_nodes, msh.num_corners)

    def test_quadrature_oracle(self, sphere):
        # p^T (C^T u) = - integral of p_h div u_h
        msh, fr = sphere
        c = assemble_pressure_coupling(msh, frames=fr)
        u = random_field(msh, "P2_vector3", 6)
        p = random_field(msh, "P1_scalar", 7)
        lhs = p.data @ (c.T @ u.flat)
        div = eval_with_surface_gradient(u, fr).divergence
        pv = eval_with_surface_gradient(p, fr).values
        assert lhs == pytest.approx(-integrate(pv * div, fr), rel=1e-11)

    def test_coordinate_divergence(self, sphere):
        # div of the identity is exactly 2, so C^T X = -2 <psi, 1>
        msh, fr = sphere
        c = assemble_pressure_coupling(msh, frames=fr)
        x = msh.node_coords.reshape(-1)
        moments = assemble_divergence_source(msh, 1.0, frames=fr)
        assert np.allclose(c.T @ x, -2.0 * moments, atol=1e-12 * np.max(moments))

    def test_killing_field_divergence_free(self, sphere):
        msh, fr = sphere
        c = assemble_pressure_coupling(msh, frames=fr)
        rot = interpolate(msh, lambda p: np.array([-p[1], p[0], 0.0]), "P2_vector3")
        scale = np.max(np.abs(c.data))
        assert np.max(np.abs(c.T @ rot.flat)) <= 1e-12 * scale


class TestLoadVectors:
    def test_momentum_rhs_oracle(self, sphere):
        msh, fr = sphere
        rho, tau, theta = 1.7, 0.05, 1.0
        u = random_field(msh, "P2_vector3", 8)
        forcing = lambda pts: np.column_stack(
            [pts[:, 0], -2.0 * pts[:, 2], np.ones(len(pts))]
        )
        b = assemble_momentum_rhs(
            msh, u, rho=rho, tau=tau, theta=theta, forcing=forcing, frames=fr
        )
        xi = random_field(msh, "P2_vector3", 9)
        ev_u = eval_with_surface_gradient(u, fr)
        ev_xi = eval_with_surface_gradient(xi, fr)
        g_vals = forcing(fr.position.reshape(-1, 3)).reshape(fr.position.shape)
        integrand = (
            (rho / tau) * np.einsum("jqc,jqc->jq", ev_u.values, ev_xi.values)
            - 0.5
            * theta
            * rho
            * ev_u.divergence
            * np.einsum("jqc,jqc->jq", ev_u.values, ev_xi.values)
            + np.einsum("jqc,jqc->jq", g_vals, ev_xi.values)
        )
        assert xi.flat @ b == pytest.approx(integrate(integrand, fr), rel=1e-11)

    def test_momentum_rhs_reduces_to_mass_action(self, sphere):
        msh, fr = sphere
        u = random_field(msh, "P2_vector3", 10)
        b = assemble_momentum_rhs(msh, u, rho=2.0, tau=0.5, theta=0.0, frames=fr)
        m = assemble_mass(msh, "P2_vector3", frames=fr)
        assert np.allclose(b, (2.0 / 0.5) * (m @ u.flat), rtol=1e-12, atol=1e-13)

    def test_divergence_source_is_scaled_moments(self, sphere):
        msh, fr = sphere
        mp = assemble_mass(msh, "P1_scalar", frames=fr)
        ones = np.ones(msh.num_corners)
        source = assemble_divergence_source(msh, 3.25, frames=fr)
        assert np.allclose(source, 3.25 * (mp @ ones), rtol=1e-12)

    def test_curvature_explicit_oracle(self, sphere):
        # tested against the literal weak form: div kappa times div of the
        # test field, plus the squared-modulus term against the projector,
        # minus twice the Jacobian-transpose pairing with the deformation
        msh, fr = sphere
        kappa = random_field(msh, "P2_vector3", 11)
        rhs = assemble_curvature_explicit(msh, kappa, frames=fr)
        xi = random_field(msh, "P2_vector3", 12)
        ev_k = eval_with_surface_gradient(kappa, fr)
        ev_xi = eval_with_surface_gradient(xi, fr)
        d_xi = deformation_tensor(ev_xi.jacobian, fr.projection)
        knorm2 = np.einsum("jqc,jqc->jq", ev_k.values, ev_k.values)
        term1 = ev_k.divergence * ev_xi.divergence
        term2 = 0.5 * knorm2 * np.einsum("jqab,jqab->jq", fr.projection, ev_xi.jacobian)
        gk_t = np.swapaxes(ev_k.jacobian, -1, -2)
        dxi_p = d_xi @ fr.projection
        term3 = -2.0 * np.einsum("jqab,jqab->jq", gk_t, dxi_p)
        oracle = integrate(term1 + term2 + term3, fr)
        assert xi.flat @ rhs == pytest.approx(oracle, rel=1e-10)


class TestSystem:
    def test_assembled_blocks_consistent(self, sphere_meshes):
        msh = sphere_meshes[1]
        params = SchemeParams(quad_degree=8)
        u0 = interpolate(msh, lambda p: np.array([0.1, 0.0, 0.0]), "P2_vector3")
        kappa = interpolate(msh, lambda pts: -2.0 * pts, "P2_vector3")
        system = assemble_system(msh, params, u0, kappa, t=0.0)
        n = 3 * msh.num_nodes
        assert system.mass.shape == (n, n)
        assert system.velocity_block.shape == (n, n)
        assert system.coupling.shape == (n, msh.num_corners)
        assert system.n_velocity == n
        assert system.n_pressure == msh.num_corners
        assert np.array_equal(system.rhs_divergence, np.zeros(msh.num_corners))
        assert system.transfer is system.mass

    def test_manufactured_divergence_sign(self, sphere_meshes):
        # continuity row rhs carries the coupling block's sign convention:
        # C^T U = -<b_div, psi>
        msh = sphere_meshes[1]
        params = SchemeParams(quad_degree=8, div_source=lambda t: 2.0 + t)
        u0 = NodeField.zeros(msh, "P2_vector3")
        kappa = NodeField.zeros(msh, "P2_vector3")
        system = assemble_system(msh, params, u0, kappa, t=0.5)
        source = assemble_divergence_source(msh, 2.5, frames=system.frames)
        assert np.allclose(system.rhs_divergence, -source, rtol=1e-14)

    def test_radial_velocity_satisfies_manufactured_continuity(self, sphere_meshes):
        # the radial field u = c z / r has surface divergence 2 c / r
        msh = sphere_meshes[2]
        fr = element_frames(msh, rule=quadrature_rule(8))
        c = 0.8
        u = interpolate(msh, lambda pts: c * pts, "P2_vector3")
        cmat = assemble_pressure_coupling(msh, frames=fr)
        source = assemble_divergence_source(msh, 2.0 * c, frames=fr)
        resid = cmat.T @ u.flat + source
        assert np.max(np.abs(resid)) <= 1e-11 * np.max(np.abs(source))


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeParams(rho=-1.0)
        with pytest.raises(ValueError):
            SchemeParams(mu=0.0)
        with pytest.raises(ValueError):
            SchemeParams(theta=0.5)
        with pytest.raises(ValueError):
            SchemeParams(tau=0.0)
        assert SchemeParams(rho=0.0).rho == 0.0

    def test_manufactured_flag(self):
        assert not SchemeParams().manufactured_mode
        assert SchemeParams(div_source=lambda t: 0.0).manufactured_mode
