import pytest

from spikevortex.mesh import RadialMesh
from spikevortex.profiles import solve_spike, solve_vortex
from spikevortex.radial import newton_radial


@pytest.fixture(scope="session")
def spike():
    return solve_spike()


@pytest.fixture(scope="session")
def long_spike():
    mesh = RadialMesh.build(70.0, h_core=0.04, ratio=1.05, core_extent=34.0)
    return solve_spike(mesh=mesh)


@pytest.fixture(scope="session")
def vortex_profiles():
    return {d: solve_vortex(d) for d in (1, 2, 3)}


@pytest.fixture(scope="session")
def radial_state():
    """Reference coupled state at beta = -0.5, d = 1, R = 40."""
    return newton_radial(-0.5, 1, 40.0)
