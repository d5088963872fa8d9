import numpy as np
import pytest

from spikevortex.errors import InsufficientWindowError, NoBracketError
from spikevortex.mesh import RadialMesh, laplacian_values
from spikevortex.profiles import (
    ProfileKind,
    RadialProfile,
    fit_decay,
    profile_interpolator,
    shoot_spike,
    shooting_height,
    solve_spike,
    solve_vortex,
    vortex_slope_origin,
)

# ground-state height recorded once from the shooting oracle (bisection on
# the initial value until the trajectory neither blows up nor crosses zero)
W0_SHOOTING = 2.206201
S1_SLOPE_ORIGIN = 0.58319  # refined-mesh extrapolation


class TestSpike:
    def test_shooting_height_regression(self):
        a = shooting_height()
        assert abs(a - W0_SHOOTING) < 3e-6

    def test_two_brackets_agree(self):
        a1 = shooting_height(bracket=(2.0, 2.5))
        a2 = shooting_height(bracket=(1.8, 3.0))
        assert abs(a1 - a2) < 1e-8

    def test_no_bracket(self):
        with pytest.raises(NoBracketError):
            shooting_height(bracket=(3.0, 3.5))

    def test_initial_slope_vanishes(self):
        _, _, sol = shoot_spike(W0_SHOOTING, dense_output=True)
        assert abs(sol.y[1][0]) < 1e-8

    def test_profile_invariants(self, spike):
        v = spike.values
        assert np.all(v[:-1] > 0)
        assert np.all(np.diff(v) < 0)
        assert v[-1] < 1e-6

    def test_discrete_residual(self, spike):
        res = laplacian_values(spike.mesh, spike.values, 0) - spike.values + spike.values**3
        assert np.abs(res[:-1]).max() < 1e-10

    def test_decay_rate(self, spike):
        _, rate = fit_decay(spike, (10.0, 15.0))
        assert -1.001 <= rate <= -0.999

    def test_mesh_refinement_second_order(self):
        mesh = RadialMesh.build(25.0, h_core=0.1, ratio=1.05, core_extent=16.0)
        profiles = []
        for _ in range(3):
            profiles.append(solve_spike(mesh=mesh))
            mesh = mesh.refine(2)
        r = profiles[0].mesh.nodes
        d01 = np.abs(profile_interpolator(profiles[1])(r) - profiles[0].values).max()
        d12 = np.abs(profile_interpolator(profiles[2])(r) - profile_interpolator(profiles[1])(r)).max()
        assert 3.0 < d01 / d12 < 5.0


class TestFitDecay:
    def test_recovers_synthetic_generator(self):
        mesh = RadialMesh.build(20.0, h_core=0.05, ratio=1.0, core_extent=20.0)
        r = mesh.nodes.copy()
        vals = np.where(r > 0, 3.0 * np.exp(-r) / np.sqrt(np.maximum(r, 1e-12)), 10.0)
        prof = RadialProfile(mesh, vals, ProfileKind.SPIKE)
        a0, rate = fit_decay(prof, (5.0, 15.0))
        assert abs(a0 - 3.0) < 1e-10
        assert abs(rate + 1.0) < 1e-10

    def test_disjoint_windows_consistent(self, spike):
        a_lo, _ = fit_decay(spike, (8.0, 11.0))
        a_hi, _ = fit_decay(spike, (12.0, 15.0))
        assert abs(a_lo - a_hi) / a_lo < 0.01

    def test_window_too_small(self, spike):
        with pytest.raises(InsufficientWindowError):
            fit_decay(spike, (10.0, 10.1))


class TestVortex:
    def test_monotone_increasing(self, vortex_profiles):
        for d, prof in vortex_profiles.items():
            assert prof.values[0] == 0.0
            assert np.all(np.diff(prof.values) > 0)
            assert 0.9 < prof.values[-1] <= 1.0

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_far_field_coefficient(self, vortex_profiles, d):
        prof = vortex_profiles[d]
        ev = profile_interpolator(prof)
        val = 30.0**2 * (1.0 - float(ev(30.0)))
        assert abs(val - d * d / 2.0) < 0.05 * d * d / 2.0

    def test_slope_at_origin_regression(self, vortex_profiles):
        assert abs(vortex_slope_origin(vortex_profiles[1]) - S1_SLOPE_ORIGIN) < 3e-4

    def test_comparison_in_degree(self, vortex_profiles):
        s1, s2, s3 = (vortex_profiles[d].values for d in (1, 2, 3))
        assert np.all(s2 <= s1 + 1e-12)
        assert np.all(s3 <= s2 + 1e-12)

    def test_degree_validation(self):
        with pytest.raises(ValueError):
            solve_vortex(0)

    def test_mesh_refinement_second_order(self):
        mesh = RadialMesh.build(40.0, h_core=0.1, ratio=1.05, core_extent=6.0)
        profiles = []
        for _ in range(3):
            profiles.append(solve_vortex(1, mesh=mesh, bc_value=1.0 - 0.5 / 40.0**2))
            mesh = mesh.refine(2)
        r = profiles[0].mesh.nodes[:-1]
        d01 = np.abs(profile_interpolator(profiles[1])(r) - profiles[0].values[:-1]).max()
        d12 = np.abs(profile_interpolator(profiles[2])(r) - profile_interpolator(profiles[1])(r)).max()
        assert 3.0 < d01 / d12 < 5.0
