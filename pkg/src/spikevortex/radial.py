"""Radial coupled spike-vortex states for beta < 0, by two independent routes.

Route one: damped Newton on the coupled two-point problem.  Route two:
energy minimization over the Nehari-constrained pair set on a ball, by
preconditioned projected gradient descent.  Both routes discretize the same
flux-form operators, so their converged states can be compared node-for-node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (
    BoundaryViolationError,
    NonconvergenceError,
    SingularJacobianError,
    StallError,
    ZeroDenominatorError,
)
from .mesh import (
    RadialMesh,
    control_volumes,
    laplacian_stencil,
    laplacian_values,
    radial_weights,
)
from .profiles import ProfileKind, RadialProfile, solve_spike, solve_vortex


@dataclass(frozen=True)
class CoupledState:
    u: RadialProfile
    f: RadialProfile
    beta: float
    ball_radius: float
    energy: float

    def __post_init__(self):
        if self.beta > 0:
            raise ValueError("coupled radial states are defined for beta <= 0")
        if not np.array_equal(self.u.mesh.nodes, self.f.mesh.nodes):
            raise ValueError("u and f must share one mesh")

    @property
    def mesh(self):
        return self.u.mesh

    @property
    def degree(self):
        return self.f.degree


@dataclass(frozen=True)
class NehariDiagnostics:
    constraint_value: float
    t_R: float
    iterations: int


def _stiffness(mesh, g):
    """int g'(r)^2 r dr by exact cell-midpoint quadrature of the P1 gradient."""
    r = mesh.nodes
    h = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])
    s = np.diff(g) / h
    return float(np.sum(s * s * mid * h))


def _d2_over_r2(mesh, d):
    out = np.zeros_like(mesh.nodes)
    out[1:] = (d * d) / mesh.nodes[1:] ** 2
    return out


def nehari_forms(mesh, u, s_vals, beta, d=0):
    """Quadratic/quartic forms of the Nehari constraint, flux-consistent weights."""
    vol = control_volumes(mesh)
    quad_a = _stiffness(mesh, u) + float(vol @ (u * u * (1.0 - beta * s_vals * s_vals)))
    quad_b = float(vol @ (u**4))
    return quad_a, quad_b


def nehari_project(u: RadialProfile, S: RadialProfile, beta: float):
    """Scaling t with (sqrt(t) u, S) on the Nehari manifold.

    t = int(|grad u|^2 + u^2 - beta S^2 u^2) / int u^4.
    """
    a, b = nehari_forms(u.mesh, u.values, S.values, beta)
    if b <= 0.0:
        raise ZeroDenominatorError("int u^4 vanished; cannot project onto the manifold")
    return a / b


def nehari_constraint(mesh, u, s_vals, beta):
    a, b = nehari_forms(mesh, u, s_vals, beta)
    return a - b


# ----------------------------------------------------------------------------
# energies
# ----------------------------------------------------------------------------

def _check_ball_boundary(u, s_vals, tol=1e-6):
    if abs(u[-1]) > tol:
        raise BoundaryViolationError(f"u(R) = {u[-1]:.2e}, expected 0")
    if abs(s_vals[0]) > tol:
        raise BoundaryViolationError(f"S(0) = {s_vals[0]:.2e}, expected 0")
    if abs(s_vals[-1] - 1.0) > tol:
        raise BoundaryViolationError(f"S(R) = {s_vals[-1]:.6f}, expected 1")


def energy_ER(u: RadialProfile, S: RadialProfile, beta: float, R: float) -> float:
    """Five-term ball energy, all integrals as 2*pi int . r dr.

    Terms: kinetic/mass of u, vortex gradient + angular barrier, quartic
    well of S, coupling, and -1/4 int u^4.
    """
    mesh = u.mesh
    if abs(mesh.r_max - R) > 1e-9:
        raise ValueError("profiles are not truncated at the requested radius")
    uv = u.values
    sv = S.values
    _check_ball_boundary(uv, sv)
    d = S.degree
    w = radial_weights(mesh)
    ang = np.zeros_like(sv)
    ang[1:] = (sv[1:] / mesh.nodes[1:]) ** 2
    ang[0] = (sv[1] / mesh.nodes[1]) ** 2  # (S/r)^2 -> S'(0)^2
    dens = (
        0.5 * uv * uv
        + 0.5 * d * d * ang
        + 0.25 * (1.0 - sv * sv) ** 2
        - 0.5 * beta * sv * sv * uv * uv
        - 0.25 * uv**4
    )
    val = 0.5 * _stiffness(mesh, uv) + 0.5 * _stiffness(mesh, sv) + float(w @ dens)
    return 2.0 * np.pi * val


def gl_energy(S: RadialProfile) -> float:
    """Ginzburg-Landau comparison energy of a lone vortex amplitude on the ball."""
    mesh = S.mesh
    sv = S.values
    d = S.degree
    w = radial_weights(mesh)
    ang = np.zeros_like(sv)
    ang[1:] = (sv[1:] / mesh.nodes[1:]) ** 2
    ang[0] = (sv[1] / mesh.nodes[1]) ** 2
    dens = 0.5 * d * d * ang + 0.25 * (1.0 - sv * sv) ** 2
    return 2.0 * np.pi * (0.5 * _stiffness(mesh, sv) + float(w @ dens))


def _internal_energy(mesh, u, s_vals, beta, d):
    """Discrete energy whose exact gradient is the flux-form residual."""
    vol = control_volumes(mesh)
    d2r2 = _d2_over_r2(mesh, d)
    dens = (
        0.5 * u * u
        + 0.5 * d2r2 * s_vals * s_vals
        + 0.25 * (1.0 - s_vals * s_vals) ** 2
        - 0.5 * beta * s_vals * s_vals * u * u
        - 0.25 * u**4
    )
    return 0.5 * _stiffness(mesh, u) + 0.5 * _stiffness(mesh, s_vals) + float(vol @ dens)


def coupled_residuals(mesh, u, s_vals, beta, d):
    """Euler-Lagrange residuals of the ball problem, flux discretization.

    F_u = Lap u - u + u^3 + beta S^2 u          (rows 0..N-1; u(N) pinned)
    F_S = Lap_d S + S - S^3 + beta u^2 S        (rows 1..N-1; S(0), S(N) pinned)
    """
    f_u = laplacian_values(mesh, u, 0) - u + u**3 + beta * s_vals * s_vals * u
    f_s = laplacian_values(mesh, s_vals, d) + s_vals - s_vals**3 + beta * u * u * s_vals
    f_u[-1] = 0.0
    f_s[0] = 0.0
    f_s[-1] = 0.0
    return f_u, f_s


# ----------------------------------------------------------------------------
# route 1: Newton on the coupled two-point problem
# ----------------------------------------------------------------------------

def default_ball_mesh(R):
    return RadialMesh.build(R, h_core=0.05, ratio=1.05, core_extent=min(10.0, R))


def initial_state(beta, d, R, mesh=None, ball_bc=True):
    """Decoupled (spike, vortex) pair as a feasible starting point."""
    if mesh is None:
        mesh = default_ball_mesh(R)
    w = solve_spike()
    u0 = w.interpolator()(mesh.nodes)
    u0[-1] = 0.0
    bc = 1.0 if ball_bc else None
    s_prof = solve_vortex(d, mesh=mesh, bc_value=bc)
    return make_state(mesh, u0, s_prof.values, beta, d)


def make_state(mesh, u_vals, s_vals, beta, d, energy=np.nan):
    u = RadialProfile(mesh, u_vals, ProfileKind.COUPLED_U)
    f = RadialProfile(mesh, s_vals, ProfileKind.COUPLED_F, degree=d)
    return CoupledState(u, f, beta, mesh.r_max, energy)


def newton_radial(
    beta: float,
    d: int,
    R: float,
    init: CoupledState | None = None,
    far_field_bc: bool = False,
    mesh: RadialMesh | None = None,
    tol: float = 1e-10,
    max_iter: int = 40,
    info: dict | None = None,
) -> CoupledState:
    """Damped Newton on the coupled radial system.

    ``far_field_bc`` selects S(R) = 1 - d^2/(2 R^2) (truncated whole-plane
    problem, matching the lone-vortex convention) instead of the ball datum
    S(R) = 1.
    """
    if init is not None:
        mesh = init.mesh
    elif mesh is None:
        mesh = default_ball_mesh(R)
    if abs(mesh.r_max - R) > 1e-9:
        raise ValueError("mesh truncation must match R")
    s_bc = 1.0 - d * d / (2.0 * R * R) if far_field_bc else 1.0
    if init is None:
        init = initial_state(beta, d, R, mesh=mesh, ball_bc=not far_field_bc)
    u = np.array(init.u.values)
    s_vals = np.array(init.f.values)
    u[-1] = 0.0
    s_vals[0] = 0.0
    s_vals[-1] = s_bc

    n = mesh.nodes.size
    lo0, di0, up0 = laplacian_stencil(mesh, 0)
    lod, did, upd = laplacian_stencil(mesh, d)

    def resid(u, s_vals):
        f_u, f_s = coupled_residuals(mesh, u, s_vals, beta, d)
        return np.concatenate([f_u, f_s])

    res = resid(u, s_vals)
    nrm = np.abs(res).max()
    steps = 0
    for _ in range(max_iter):
        if nrm < tol:
            break
        duu = di0 - 1.0 + 3.0 * u * u + beta * s_vals * s_vals
        dss = did + 1.0 - 3.0 * s_vals * s_vals + beta * u * u
        dus = 2.0 * beta * s_vals * u  # dF_u/dS
        dsu = 2.0 * beta * u * s_vals  # dF_S/du
        lo_u, up_u = lo0.copy(), up0.copy()
        lo_s, up_s = lod.copy(), upd.copy()
        # Dirichlet rows: u(N), S(0), S(N)
        duu[-1], lo_u[-1], dus_last = 1.0, 0.0, 0.0
        dss[0], up_s[0] = 1.0, 0.0
        dss[-1], lo_s[-1] = 1.0, 0.0
        dus = dus.copy()
        dsu = dsu.copy()
        dus[-1] = dus_last
        dsu[0] = 0.0
        dsu[-1] = 0.0
        a_uu = sparse.diags([lo_u[1:], duu, up_u[:-1]], [-1, 0, 1])
        a_ss = sparse.diags([lo_s[1:], dss, up_s[:-1]], [-1, 0, 1])
        jac = sparse.bmat(
            [[a_uu, sparse.diags(dus)], [sparse.diags(dsu), a_ss]], format="csc"
        )
        try:
            lu = splu(jac)
        except RuntimeError as exc:
            raise SingularJacobianError(
                "Jacobian factorization failed; a bifurcation in beta may have been crossed"
            ) from exc
        step = lu.solve(-res)
        alpha = 1.0
        while alpha > 1e-8:
            u_try = u + alpha * step[:n]
            s_try = s_vals + alpha * step[n:]
            res_try = resid(u_try, s_try)
            nrm_try = np.abs(res_try).max()
            if nrm_try < (1.0 - 0.25 * alpha) * nrm or nrm_try < tol:
                u, s_vals, res, nrm = u_try, s_try, res_try, nrm_try
                break
            alpha *= 0.5
        else:
            raise NonconvergenceError(
                f"Newton line search stalled at residual {nrm:.3e}",
                last_iterate=make_state(mesh, u, s_vals, beta, d),
            )
        steps += 1
    if nrm >= tol:
        raise NonconvergenceError(
            f"Newton did not reach tolerance; residual {nrm:.3e}",
            last_iterate=make_state(mesh, u, s_vals, beta, d),
        )
    if info is not None:
        info["steps"] = steps
        info["residual"] = float(nrm)
    energy = np.nan
    if not far_field_bc:
        energy = energy_ER(
            RadialProfile(mesh, u, ProfileKind.COUPLED_U),
            RadialProfile(mesh, s_vals, ProfileKind.COUPLED_F, degree=d),
            beta,
            R,
        )
    return make_state(mesh, u, s_vals, beta, d, energy=energy)


# ----------------------------------------------------------------------------
# route 2: Nehari-constrained minimization
# ----------------------------------------------------------------------------

def _helmholtz_solver(mesh, d, shift):
    lo, di, up = laplacian_stencil(mesh, d)
    di = -di + shift
    lo, up = -lo, -up
    # Dirichlet far end; for d >= 1 also pin the origin
    di[-1], lo[-1] = 1.0, 0.0
    if d >= 1:
        di[0], up[0] = 1.0, 0.0
    mat = sparse.diags([lo[1:], di, up[:-1]], [-1, 0, 1], format="csc")
    return splu(mat)


def minimize_ball(
    beta: float,
    d: int,
    R: float,
    mesh: RadialMesh | None = None,
    tol: float = 1e-8,
    max_iter: int = 20000,
    track_energy: bool = False,
):
    """Constrained minimization of the ball energy over the Nehari set.

    Preconditioned gradient steps in (u, S) alternate with re-imposition of
    the boundary data and re-projection of u onto the constraint; Armijo
    backtracking from step 0.5 keeps the energy monotone.  Terminates when
    the Euler-Lagrange residual (the projected gradient in the flux metric)
    drops below ``tol``; the multiplier vanishes on the manifold, so the
    plain residual is the correct stationarity measure.
    """
    if beta >= 0:
        raise ValueError("Nehari minimization route requires beta < 0")
    if mesh is None:
        mesh = default_ball_mesh(R)
    state = initial_state(beta, d, R, mesh=mesh, ball_bc=True)
    u = np.array(state.u.values)
    s_vals = np.array(state.f.values)

    def project(u):
        a, b = nehari_forms(mesh, u, s_vals, beta)
        if b <= 0:
            raise ZeroDenominatorError("int u^4 vanished during descent")
        return np.sqrt(a / b) * u, a / b

    u, t_r = project(u)
    pre_u = _helmholtz_solver(mesh, 0, 1.0)
    pre_s = _helmholtz_solver(mesh, d, 2.0)
    vol = control_volumes(mesh)
    energy = _internal_energy(mesh, u, s_vals, beta, d)
    history = [energy] if track_energy else None

    iters = 0
    for iters in range(1, max_iter + 1):
        f_u, f_s = coupled_residuals(mesh, u, s_vals, beta, d)
        gn = max(np.abs(f_u).max(), np.abs(f_s).max())
        if gn < tol:
            break
        du = pre_u.solve(f_u)
        ds = pre_s.solve(f_s)
        du[-1] = 0.0
        ds[0] = ds[-1] = 0.0
        slope = float(vol @ (f_u * du) + vol @ (f_s * ds))
        # once the energy decrease per step falls under its float resolution,
        # accept on residual decrease instead (the energy stays flat to eps)
        floor = 64.0 * np.finfo(float).eps * max(1.0, abs(energy))
        alpha = 0.5
        accepted = False
        while alpha > 1e-14:
            u_try = u + alpha * du
            s_try = s_vals + alpha * ds
            s_try[0], s_try[-1], u_try[-1] = 0.0, 1.0, 0.0
            try:
                u_try, t_try = project(u_try)
            except ZeroDenominatorError:
                alpha *= 0.5
                continue
            e_try = _internal_energy(mesh, u_try, s_try, beta, d)
            ok = e_try <= energy - 1e-4 * alpha * slope or e_try <= energy
            if not ok and alpha * slope < floor and e_try <= energy + floor:
                fu_t, fs_t = coupled_residuals(mesh, u_try, s_try, beta, d)
                ok = max(np.abs(fu_t).max(), np.abs(fs_t).max()) < gn
            if ok:
                u, s_vals, energy, t_r = u_try, s_try, min(e_try, energy), t_try
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise StallError(
                f"descent stalled above tolerance (residual {gn:.3e})",
                last_iterate=make_state(mesh, u, s_vals, beta, d),
                history=history,
            )
        if track_energy:
            history.append(energy)
    else:
        f_u, f_s = coupled_residuals(mesh, u, s_vals, beta, d)
        gn = max(np.abs(f_u).max(), np.abs(f_s).max())
        if gn >= tol:
            raise StallError(
                f"descent exhausted iterations at residual {gn:.3e}",
                last_iterate=make_state(mesh, u, s_vals, beta, d),
                history=history,
            )

    state = make_state(mesh, u, s_vals, beta, d)
    energy_val = energy_ER(state.u, state.f, beta, R)
    state = make_state(mesh, u, s_vals, beta, d, energy=energy_val)
    diag = NehariDiagnostics(
        constraint_value=nehari_constraint(mesh, u, s_vals, beta),
        t_R=t_r,
        iterations=iters,
    )
    if track_energy:
        return state, diag, history
    return state, diag


# ----------------------------------------------------------------------------
# continuation in the ball radius
# ----------------------------------------------------------------------------

def h1_norm_sq(state: CoupledState):
    """int |grad u|^2 + u^2 over the ball (times 2*pi)."""
    mesh = state.mesh
    u = state.u.values
    w = radial_weights(mesh)
    return 2.0 * np.pi * (_stiffness(mesh, u) + float(w @ (u * u)))


def continue_in_R(beta: float, d: int, radii, route: str = "newton"):
    """Solve on nested balls, warm-starting each radius from the previous one.

    Returns (states, report) where the report carries the Cauchy differences
    of consecutive states on the common core [0, radii[0]].
    """
    radii = list(radii)
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("need at least three strictly increasing radii")
    states = []
    prev = None
    for R in radii:
        mesh = default_ball_mesh(R)
        if prev is None:
            init = None
        else:
            u0 = prev.u.interpolator()(mesh.nodes)
            s0 = prev.f.interpolator()(mesh.nodes)
            s0 = np.where(mesh.nodes > prev.ball_radius, 1.0, s0)
            u0[-1], s0[0], s0[-1] = 0.0, 0.0, 1.0
            init = make_state(mesh, np.clip(u0, 0.0, None), np.clip(s0, 0.0, 1.0), beta, d)
        if route == "newton":
            st = newton_radial(beta, d, R, init=init, mesh=mesh)
        elif route == "minimize":
            st, _ = minimize_ball(beta, d, R, mesh=mesh)
        else:
            raise ValueError("route must be 'newton' or 'minimize'")
        states.append(st)
        prev = st

    core = states[0].mesh.nodes
    diffs = []
    for a, b in zip(states, states[1:]):
        ua, fa = a.u.interpolator(), a.f.interpolator()
        ub, fb = b.u.interpolator(), b.f.interpolator()
        diffs.append(
            {
                "radii": (a.ball_radius, b.ball_radius),
                "du": float(np.abs(ua(core) - ub(core)).max()),
                "df": float(np.abs(fa(core) - fb(core)).max()),
            }
        )
    report = {
        "cauchy": diffs,
        "h1": [h1_norm_sq(s) for s in states],
        "energies": [s.energy for s in states],
    }
    return states, report
