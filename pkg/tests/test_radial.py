import numpy as np
import pytest

from spikevortex.errors import BoundaryViolationError, ZeroDenominatorError
from spikevortex.mesh import radial_weights
from spikevortex.profiles import ProfileKind, RadialProfile, solve_vortex
from spikevortex.radial import (
    continue_in_R,
    default_ball_mesh,
    energy_ER,
    gl_energy,
    initial_state,
    make_state,
    minimize_ball,
    nehari_constraint,
    nehari_project,
    newton_radial,
)

T_R_ORACLE = 1.0597808760542313  # spike on B_40, GL minimizer, beta = -0.5


@pytest.fixture(scope="module")
def ball40():
    return default_ball_mesh(40.0)


@pytest.fixture(scope="module")
def gl_min40(ball40):
    return solve_vortex(1, mesh=ball40, bc_value=1.0)


@pytest.fixture(scope="module")
def spike_on_ball(ball40, spike):
    u = spike.interpolator()(ball40.nodes)
    u[-1] = 0.0
    return RadialProfile(ball40, u, ProfileKind.COUPLED_U)


class TestEnergy:
    def test_pure_gl_limit(self, spike_on_ball, gl_min40, ball40):
        zero = RadialProfile(ball40, np.zeros(ball40.nodes.size), ProfileKind.COUPLED_U)
        e = energy_ER(zero, gl_min40, -0.5, 40.0)
        assert abs(e - gl_energy(gl_min40)) < 1e-12 * abs(e)

    def test_affine_in_beta(self, spike_on_ball, gl_min40, ball40):
        u, s = spike_on_ball, gl_min40
        e0 = energy_ER(u, s, 0.0, 40.0)
        betas = (-0.25, -0.5, -1.0)
        w = radial_weights(ball40)
        coupling = 2.0 * np.pi * float(w @ (s.values**2 * u.values**2))
        for b in betas:
            e = energy_ER(u, s, b, 40.0)
            assert abs(e - (e0 - 0.5 * b * coupling)) < 1e-12 * max(1.0, abs(e))

    def test_boundary_violation(self, ball40, gl_min40):
        bad = RadialProfile(ball40, np.ones(ball40.nodes.size), ProfileKind.COUPLED_U)
        with pytest.raises(BoundaryViolationError):
            energy_ER(bad, gl_min40, -0.5, 40.0)


class TestNehariProjection:
    def test_oracle_value(self, spike_on_ball, gl_min40):
        t = nehari_project(spike_on_ball, gl_min40, -0.5)
        assert abs(t - T_R_ORACLE) < 1e-6 * T_R_ORACLE

    def test_projection_lands_on_manifold(self, spike_on_ball, gl_min40, ball40):
        t = nehari_project(spike_on_ball, gl_min40, -0.5)
        u_proj = np.sqrt(t) * spike_on_ball.values
        g = nehari_constraint(ball40, u_proj, gl_min40.values, -0.5)
        scale = abs(nehari_constraint(ball40, 0 * u_proj + 1e-300, gl_min40.values, -0.5)) + 1.0
        assert abs(g) < 1e-9 * max(1.0, scale)
        # already on the manifold: t comes back as 1
        up = RadialProfile(ball40, u_proj, ProfileKind.COUPLED_U)
        assert abs(nehari_project(up, gl_min40, -0.5) - 1.0) < 1e-10

    def test_ray_invariance(self, spike_on_ball, gl_min40, ball40):
        t1 = nehari_project(spike_on_ball, gl_min40, -0.5)
        for c in (0.5, 2.0, 7.0):
            scaled = RadialProfile(ball40, c * spike_on_ball.values, ProfileKind.COUPLED_U)
            t_c = nehari_project(scaled, gl_min40, -0.5)
            assert abs(t_c - t1 / c**2) < 1e-10 * t1
            # sqrt(t) u is invariant along the ray
            assert np.allclose(np.sqrt(t_c) * scaled.values,
                               np.sqrt(t1) * spike_on_ball.values, rtol=1e-12)

    def test_zero_denominator(self, gl_min40, ball40):
        zero = RadialProfile(ball40, np.zeros(ball40.nodes.size), ProfileKind.COUPLED_U)
        with pytest.raises(ZeroDenominatorError):
            nehari_project(zero, gl_min40, -0.5)


class TestMinimizeBall:
    def test_paper_properties(self, ball40):
        state, diag, history = minimize_ball(-0.5, 1, 40.0, mesh=ball40, track_energy=True)
        assert state.u.values[0] >= 1.0
        assert np.all(np.diff(state.u.values) < 0)
        assert np.all(np.diff(state.f.values) > 0)
        assert abs(diag.constraint_value) < 1e-9
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_energy_upper_bound_nonincreasing_c0(self):
        c0 = {}
        for R in (20.0, 40.0):
            mesh = default_ball_mesh(R)
            state, _ = minimize_ball(-0.5, 1, R, mesh=mesh)
            sbar = solve_vortex(1, mesh=mesh, bc_value=1.0)
            c0[R] = state.energy - gl_energy(sbar)
        assert c0[40.0] <= c0[20.0] + 1e-8
        assert c0[20.0] > 0  # the spike contributes positive energy


class TestNewtonRadial:
    def test_beta_zero_fixed_point(self, spike):
        mesh = spike.mesh
        s_d = solve_vortex(1, mesh=mesh)
        init = make_state(mesh, spike.values.copy(), s_d.values.copy(), 0.0, 1)
        out = newton_radial(0.0, 1, mesh.r_max, init=init, far_field_bc=True)
        assert np.abs(out.u.values - spike.values).max() < 1e-8
        assert np.abs(out.f.values - s_d.values).max() < 1e-8

    def test_two_route_agreement(self, ball40):
        st_n = newton_radial(-0.5, 1, 40.0, mesh=ball40)
        st_m, _ = minimize_ball(-0.5, 1, 40.0, mesh=ball40)
        assert np.abs(st_n.u.values - st_m.u.values).max() < 1e-5
        assert np.abs(st_n.f.values - st_m.f.values).max() < 1e-5

    def test_beta_continuation_step_counts(self):
        mesh = default_ball_mesh(30.0)
        state = initial_state(0.0, 1, 30.0, mesh=mesh, ball_bc=True)
        counts = []
        for b in np.arange(0.0, -1.0001, -0.1):
            info = {}
            state = newton_radial(
                b, 1, 30.0,
                init=make_state(mesh, state.u.values, state.f.values, b, 1),
                info=info,
            )
            counts.append(info["steps"])
        assert max(counts) <= 8

    def test_small_beta_linearization(self, spike):
        mesh = spike.mesh
        s_d = solve_vortex(1, mesh=mesh)
        dus, dfs, betas = [], [], (-0.025, -0.05, -0.1, -0.2)
        for b in betas:
            st = newton_radial(b, 1, mesh.r_max, mesh=mesh, far_field_bc=True)
            dus.append(np.abs(st.u.values - spike.values).max())
            dfs.append(np.abs(st.f.values - s_d.values).max())
        for deltas in (dus, dfs):
            slope = np.polyfit(np.log(np.abs(betas)), np.log(deltas), 1)[0]
            assert 0.8 <= slope <= 1.2


class TestContinuation:
    def test_nested_balls(self):
        states, report = continue_in_R(-0.5, 1, [20.0, 40.0, 80.0])
        last = report["cauchy"][-1]  # R = 40 vs R = 80 on [0, 20]
        assert last["du"] < 1e-4
        assert last["df"] < 1e-4
        h1 = report["h1"]
        assert all(b <= a * 1.01 for a, b in zip(h1, h1[1:]))
        big = states[-1]
        ev = big.f.interpolator()
        val = 30.0**2 * (1.0 - float(ev(30.0)))
        assert abs(val - 0.5) < 0.05 * 0.5

    def test_bad_radii(self):
        with pytest.raises(ValueError):
            continue_in_R(-0.5, 1, [20.0, 10.0, 40.0])
