"""Numerical laboratory for spike-vortex states of a two-component NLS system."""

from .charge import ChargeReport, build_nmap, charge_2d, charge_radial
from .mesh import (
    RadialMesh,
    SectorMesh,
    SectorScalar,
    WeightedNorms,
    norm_dstar,
    norm_star,
    quad_disk,
    radial_laplacian,
    radial_quad,
)
from .planar import (
    PlanarField,
    PolygonAnsatz,
    ResidualReport,
    apply_S1,
    apply_S2,
    build_ansatz,
    check_nondegeneracy,
    newton_planar,
)
from .profiles import ProfileKind, RadialProfile, fit_decay, solve_spike, solve_vortex
from .radial import (
    CoupledState,
    NehariDiagnostics,
    continue_in_R,
    energy_ER,
    minimize_ball,
    nehari_project,
    newton_radial,
)
from .reduction import (
    BalanceRoot,
    ReducedForce,
    check_expansion,
    find_root,
    projected_solve,
    reduced_force,
    solve_lhat,
)

__all__ = [
    "BalanceRoot",
    "ChargeReport",
    "CoupledState",
    "NehariDiagnostics",
    "PlanarField",
    "PolygonAnsatz",
    "ProfileKind",
    "RadialMesh",
    "RadialProfile",
    "ReducedForce",
    "ResidualReport",
    "SectorMesh",
    "SectorScalar",
    "WeightedNorms",
    "apply_S1",
    "apply_S2",
    "build_ansatz",
    "build_nmap",
    "charge_2d",
    "charge_radial",
    "check_expansion",
    "check_nondegeneracy",
    "continue_in_R",
    "energy_ER",
    "find_root",
    "fit_decay",
    "minimize_ball",
    "nehari_project",
    "newton_planar",
    "newton_radial",
    "norm_dstar",
    "norm_star",
    "projected_solve",
    "quad_disk",
    "radial_laplacian",
    "radial_quad",
    "reduced_force",
    "solve_lhat",
    "solve_spike",
    "solve_vortex",
]

__version__ = "0.1.0"
