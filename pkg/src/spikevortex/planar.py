"""k-polygon ansatz, the planar residual operators, the symmetry-restricted
2D Newton solver, and the discrete nondegeneracy check.

Fields live on one polar sector [0, 2*pi/k); the solution class ties the
sector edges together with u plain-periodic and v picking up the phase
e^{i d 2*pi/k} (reflection symmetry is checked, not imposed).  Ansatz
residuals are evaluated through the profile identities, never through the
discrete Laplacian: the interaction scales e^{-2 l sin(pi/k)} sit far below
finite-difference truncation noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import lgmres, spilu, splu, LinearOperator

from .errors import (
    DivergedError,
    CoreExclusionError,
    InvalidRadiusError,
    MeshError,
)
from .mesh import (
    RadialMesh,
    SectorMesh,
    SectorScalar,
    WeightedNorms,
    control_volumes,
    laplacian_stencil,
    norm_dstar,
    quad_disk,
)
from .profiles import RadialProfile, profile_interpolator, solve_spike, solve_vortex


@dataclass(frozen=True)
class PlanarField:
    """Discretized (u, v1, v2) on a polar sector with symmetry metadata."""

    mesh: SectorMesh
    u: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    d: int

    def __post_init__(self):
        for name in ("u", "v1", "v2"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != self.mesh.shape:
                raise MeshError(f"{name} has shape {a.shape}, mesh needs {self.mesh.shape}")
            object.__setattr__(self, name, a)

    @property
    def k(self):
        return self.mesh.k

    @property
    def v(self):
        return self.v1 + 1j * self.v2


@dataclass(frozen=True)
class PolygonAnsatz:
    """Spike copies at the vertices of a regular k-polygon around the vortex."""

    l: float
    k: int
    d: int
    centers: np.ndarray
    field: PlanarField
    spike: RadialProfile
    vortex: RadialProfile
    spike_copies: np.ndarray  # (k, N+1, M) individual w_j samples
    dudl: np.ndarray          # analytic d u_l / d l

    @property
    def mesh(self):
        return self.field.mesh


@dataclass(frozen=True)
class ResidualReport:
    s1_l2: float
    s2_dstar: float
    l: float
    k: int
    beta: float
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.s1_l2) and np.isfinite(self.s2_dstar)):
            raise ValueError("residual norms must be finite")
        if self.s1_l2 < 0 or self.s2_dstar < 0:
            raise ValueError("residual norms must be nonnegative")

    def to_dict(self):
        return {
            "s1_l2": self.s1_l2,
            "s2_dstar": self.s2_dstar,
            "l": self.l,
            "k": self.k,
            "beta": self.beta,
            "alpha": self.alpha,
        }


def degree_condition(d, k):
    """Theorem condition: d = 1, or d >= 2 with 2(d-1) not divisible by k."""
    return d == 1 or (2 * (d - 1)) % k != 0


def cube_interaction(copies):
    """(sum_j w_j)^3 - sum_j w_j^3 through the expanded cross terms.

    The direct difference cancels catastrophically once the neighbor spike
    drops below machine precision relative to the local one; the expansion
    3 sum_{i!=j} w_i^2 w_j + 6 sum_{i<j<m} w_i w_j w_m is exact and keeps
    full relative accuracy at any separation.
    """
    k = copies.shape[0]
    out = np.zeros_like(copies[0])
    for i in range(k):
        for j in range(k):
            if i != j:
                out += copies[i] ** 2 * copies[j]
    out *= 3.0
    for i in range(k):
        for j in range(i + 1, k):
            for m in range(j + 1, k):
                out += 6.0 * copies[i] * copies[j] * copies[m]
    return out


def sector_mesh_for(l, k, m_theta=160, pad=20.0, h_core=0.05, core_pad=4.0):
    """Sector grid resolving the spike ring: uniform to l + core_pad, truncated at l + pad."""
    radial = RadialMesh.build(l + pad, h_core=h_core, ratio=1.05, core_extent=l + core_pad)
    return SectorMesh(radial, k, m_theta)


# ----------------------------------------------------------------------------
# ansatz construction
# ----------------------------------------------------------------------------

def build_ansatz(
    l: float,
    k: int,
    d: int,
    mesh: SectorMesh | None = None,
    spike: RadialProfile | None = None,
    vortex: RadialProfile | None = None,
) -> PolygonAnsatz:
    """Sum of k spike copies at radius l plus the degree-d vortex."""
    if l <= 0:
        raise InvalidRadiusError(f"polygon radius must be positive, got {l}")
    if not degree_condition(d, k):
        warnings.warn(
            f"(d, k) = ({d}, {k}) violates the nondegeneracy condition "
            f"2(d-1) % k != 0; the reduction may be degenerate",
            stacklevel=2,
        )
    if mesh is None:
        mesh = sector_mesh_for(l, k)
    if mesh.k != k:
        raise MeshError("mesh symmetry order does not match k")
    if spike is None:
        spike = solve_spike()
    if vortex is None or vortex.degree != d:
        vortex = solve_vortex(d, mesh=mesh.radial)

    w_of = profile_interpolator(spike)
    wp_of = profile_interpolator(spike, derivative=True)
    angles = 2.0 * np.pi * np.arange(k) / k
    centers = l * np.exp(1j * angles)

    x, y = mesh.points()
    copies = np.empty((k,) + mesh.shape)
    dudl = np.zeros(mesh.shape)
    for j in range(k):
        dx = x - centers[j].real
        dy = y - centers[j].imag
        rho = np.hypot(dx, dy)
        copies[j] = w_of(rho)
        proj = np.zeros_like(rho)
        np.divide(
            dx * np.cos(angles[j]) + dy * np.sin(angles[j]),
            rho,
            out=proj,
            where=rho > 1e-12,
        )
        dudl -= wp_of(rho) * proj
    u = copies.sum(axis=0)

    s_of = profile_interpolator(vortex)
    r, t = mesh.grid()
    s_vals = s_of(np.broadcast_to(r, mesh.shape).copy())
    v1 = s_vals * np.cos(d * t)
    v2 = s_vals * np.sin(d * t)
    field = PlanarField(mesh, u, v1, v2, d)
    return PolygonAnsatz(float(l), k, d, centers, field, spike, vortex, copies, dudl)


# ----------------------------------------------------------------------------
# discrete sector operators
# ----------------------------------------------------------------------------

def _theta_neighbors(values, phase):
    """Left/right angular neighbors with the sector identification phase."""
    left = np.roll(values, 1, axis=1)
    right = np.roll(values, -1, axis=1)
    if phase != 1.0 or np.iscomplexobj(values):
        left = left.astype(complex, copy=True)
        right = right.astype(complex, copy=True)
        left[:, 0] = left[:, 0] / phase
        right[:, -1] = right[:, -1] * phase
    return left, right


def sector_laplacian(mesh: SectorMesh, values, d_wrap=0):
    """Discrete polar Laplacian on the sector.

    ``d_wrap = 0`` treats the field as sector-periodic with a free origin
    value (mean-flux formula there); ``d_wrap >= 1`` applies the equivariant
    phase at the seam and pins the origin (returned row 0 is zero).
    """
    r = mesh.radial.nodes
    h = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])
    vol = control_volumes(mesh.radial)
    f = np.asarray(values)
    out = np.zeros_like(f, dtype=complex if np.iscomplexobj(f) else float)

    flux = (mid / h)[:, None] * np.diff(f, axis=0)
    out[1:-1] = (flux[1:] - flux[:-1]) / vol[1:-1, None]

    phase = np.exp(1j * d_wrap * 2.0 * np.pi / mesh.k) if d_wrap else 1.0
    left, right = _theta_neighbors(f, phase)
    ang = (left - 2.0 * f + right) / mesh.dtheta**2
    out[1:-1] += ang[1:-1] / (r[1:-1] ** 2)[:, None]

    if d_wrap == 0:
        out[0] = (mid[0] / h[0]) * (f[1].mean() - f[0]) / vol[0]
    else:
        out[0] = 0.0
    out[-1] = 0.0
    return out


def apply_S1(obj, beta: float) -> SectorScalar:
    """Residual of the spike equation: Delta u - u + u^3 + beta u |v|^2.

    On a :class:`PolygonAnsatz` the Laplacian is eliminated through the spike
    ODE, leaving the exact interaction term (u_l^3 - sum w_j^3); on a plain
    field the discrete operator is used.
    """
    if isinstance(obj, PolygonAnsatz):
        u = obj.field.u
        s_vals = _vortex_amplitude(obj)
        vals = cube_interaction(obj.spike_copies) + beta * u * s_vals**2
        return SectorScalar(obj.mesh, vals)
    field = obj
    lap = sector_laplacian(field.mesh, field.u, 0)
    vals = lap - field.u + field.u**3 + beta * field.u * (field.v1**2 + field.v2**2)
    vals[-1] = 0.0
    return SectorScalar(field.mesh, vals)


def _vortex_amplitude(ansatz: PolygonAnsatz):
    s_of = profile_interpolator(ansatz.vortex)
    r, _ = ansatz.mesh.grid()
    return s_of(np.broadcast_to(r, ansatz.mesh.shape).copy())


def apply_S2(obj, beta: float, r_min: float = 0.5) -> SectorScalar:
    """Residual of the phase equation in the exponential formulation.

    For the ansatz this is exactly -i beta u_l^2.  For a general field the
    perturbation psi = -i log(v / v_d) is extracted outside the vortex core
    and the psi-form residual evaluated there; inside r < 0.5 the direct
    (v1, v2) residual is converted via S2 = R_v / (i v).
    """
    if isinstance(obj, PolygonAnsatz):
        vals = -1j * beta * obj.field.u ** 2
        return SectorScalar(obj.mesh, vals)
    field = obj
    mesh = field.mesh
    d = field.d
    r = mesh.radial.nodes
    v = field.v

    vortex = solve_vortex(d, mesh=mesh.radial)
    psi, psi_mask = extract_psi(field, vortex=vortex, r_min=r_min)
    out = np.zeros(mesh.shape, dtype=complex)

    # psi-form away from the core
    s_prof = vortex.values
    sp = np.gradient(s_prof, r)
    rows = np.where(psi_mask)[0]
    if rows.size:
        pvals = psi.values
        dr_psi, dth_psi = _complex_gradient(mesh, pvals)
        lap_psi = sector_laplacian(mesh, pvals, 0)
        s_over = np.zeros_like(s_prof)
        s_over[1:] = sp[1:] / s_prof[1:]
        rr = r[:, None]
        coef_r = 2.0 * s_over[:, None]
        psi2 = pvals.imag
        full = (
            lap_psi
            + coef_r * dr_psi
            + 2j * d * dth_psi / np.where(rr > 0, rr, 1.0)
            - 1j * s_prof[:, None] ** 2 * (1.0 - np.exp(-2.0 * psi2))
            + 1j * (dr_psi**2 + dth_psi**2)
            - 1j * beta * field.u**2
        )
        out[rows] = full[rows]

    # direct residual in the core, mapped back through S2 = R_v / (i v)
    core_rows = np.where(~psi_mask)[0]
    lap_v = sector_laplacian(mesh, v, d)
    r_v = lap_v + v - np.abs(v) ** 2 * v + beta * field.u**2 * v
    with np.errstate(divide="ignore", invalid="ignore"):
        conv = r_v / (1j * v)
    conv[np.abs(v) < 1e-13] = 0.0
    out[core_rows] = conv[core_rows]
    out[0] = 0.0
    out[-1] = 0.0
    return SectorScalar(mesh, out)


def _complex_gradient(mesh: SectorMesh, values):
    """(d/dr, (1/r) d/dtheta) for a sector-periodic complex scalar."""
    f = np.asarray(values)
    re = SectorScalar(mesh, f.real)
    im = SectorScalar(mesh, f.imag)
    from .mesh import sector_gradient

    dr_re, dt_re = sector_gradient(re)
    dr_im, dt_im = sector_gradient(im)
    return dr_re + 1j * dr_im, dt_re + 1j * dt_im


def extract_psi(field: PlanarField, vortex: RadialProfile | None = None, r_min: float = 0.5):
    """psi with v = v_d e^{i psi}, defined outside the vortex core.

    Returns (SectorScalar, row_mask); rows with r < r_min hold zeros.
    Requesting extraction inside the core raises CoreExclusionError.
    """
    if r_min < 0.5:
        raise CoreExclusionError(
            f"phase extraction inside r < 0.5 is ill-conditioned (asked for {r_min})"
        )
    mesh = field.mesh
    d = field.d
    if vortex is None:
        vortex = solve_vortex(d, mesh=mesh.radial)
    r, t = mesh.grid()
    s_vals = profile_interpolator(vortex)(np.broadcast_to(r, mesh.shape).copy())
    vd = s_vals * np.exp(1j * d * t)
    mask = mesh.radial.nodes >= r_min
    ratio = np.ones(mesh.shape, dtype=complex)
    rows = np.where(mask)[0]
    ratio[rows] = field.v[rows] / vd[rows]
    psi = -1j * np.log(ratio)
    psi[~mask] = 0.0
    return SectorScalar(mesh, psi), mask


def ansatz_residual_report(ansatz: PolygonAnsatz, beta: float, weights=None) -> ResidualReport:
    """Lemma-style residual sizes of the bare ansatz."""
    if weights is None:
        weights = WeightedNorms()
    s1 = apply_S1(ansatz, beta)
    s1_l2 = float(np.sqrt(quad_disk(SectorScalar(ansatz.mesh, s1.values**2))))
    s2 = apply_S2(ansatz, beta)
    re = SectorScalar(ansatz.mesh, s2.values.real)
    im = SectorScalar(ansatz.mesh, s2.values.imag)
    s2_norm = norm_dstar(re, im, weights)
    return ResidualReport(s1_l2, s2_norm, ansatz.l, ansatz.k, beta, weights.alpha)


# ----------------------------------------------------------------------------
# symmetry diagnostics
# ----------------------------------------------------------------------------

def reflection_defects(field: PlanarField):
    """Max deviation from u(z-bar) = u(z) and v(z-bar) = v(z)* on the grid.

    The reflected angle -theta_j maps to theta_{M-j} one sector down, so the
    comparison carries the sector phase for v.
    """
    m = field.mesh.m_theta
    idx = (-np.arange(m)) % m
    du = float(np.abs(field.u - field.u[:, idx]).max())
    phase = np.exp(-1j * field.d * 2.0 * np.pi / field.mesh.k)
    v = field.v
    v_reflected = v[:, idx].copy()
    v_reflected[:, 1:] *= phase
    dv = float(np.abs(v_reflected - np.conj(v)).max())
    return du, dv


def rotation_defect(ansatz: PolygonAnsatz):
    """Equivariance defect of the generator evaluated one sector over."""
    mesh = ansatz.mesh
    r, t = mesh.grid()
    theta_shift = t + 2.0 * np.pi / mesh.k
    x = r * np.cos(theta_shift)
    y = r * np.sin(theta_shift)
    w_of = profile_interpolator(ansatz.spike)
    u_rot = np.zeros(mesh.shape)
    for c in ansatz.centers:
        u_rot += w_of(np.hypot(x - c.real, y - c.imag))
    du = float(np.abs(u_rot - ansatz.field.u).max())
    s_vals = _vortex_amplitude(ansatz)
    v_rot = s_vals * np.exp(1j * ansatz.d * theta_shift)
    expected = ansatz.field.v * np.exp(1j * ansatz.d * 2.0 * np.pi / mesh.k)
    dv = float(np.abs(v_rot - expected).max())
    return du, dv


# ----------------------------------------------------------------------------
# planar Newton solver
# ----------------------------------------------------------------------------

def planar_residual(mesh: SectorMesh, u, v, beta, d):
    f_u = sector_laplacian(mesh, u, 0) - u + u**3 + beta * u * np.abs(v) ** 2
    f_u[-1] = 0.0
    f_v = sector_laplacian(mesh, v, d) + v - np.abs(v) ** 2 * v + beta * u**2 * v
    f_v[0] = 0.0
    f_v[-1] = 0.0
    return f_u, f_v


def _pack_maps(mesh: SectorMesh):
    n_r = mesh.radial.nodes.size
    m = mesh.m_theta
    ni = n_r - 2  # interior radial rows 1..N-1
    nu = 1 + ni * m
    nv = ni * m
    return n_r, m, ni, nu, nv


def _pack(mesh, u, v):
    n_r, m, ni, nu, nv = _pack_maps(mesh)
    x = np.empty(nu + 2 * nv)
    x[0] = u[0, 0]
    x[1:nu] = u[1:-1].ravel()
    x[nu : nu + nv] = v.real[1:-1].ravel()
    x[nu + nv :] = v.imag[1:-1].ravel()
    return x


def _unpack(mesh, x, u_bc, v_bc):
    n_r, m, ni, nu, nv = _pack_maps(mesh)
    u = np.empty((n_r, m))
    u[0] = x[0]
    u[1:-1] = x[1:nu].reshape(ni, m)
    u[-1] = u_bc
    v = np.empty((n_r, m), dtype=complex)
    v[0] = 0.0
    v[1:-1] = (x[nu : nu + nv] + 1j * x[nu + nv :]).reshape(ni, m)
    v[-1] = v_bc
    return u, v


def _planar_jacobian(mesh: SectorMesh, u, v, beta, d):
    """Sparse Jacobian of the packed planar system."""
    n_r, m, ni, nu, nv = _pack_maps(mesh)
    r = mesh.radial.nodes
    lo, di, up = laplacian_stencil(mesh.radial, 0)
    ang = 1.0 / (r[1:-1] ** 2 * mesh.dtheta**2)
    vol = control_volumes(mesh.radial)
    h = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])

    rows, cols, vals = [], [], []

    def add(rr, cc, vv):
        rows.append(rr)
        cols.append(cc)
        vals.append(vv)

    iu = lambda i, j: 1 + (i - 1) * m + j
    iv1 = lambda i, j: nu + (i - 1) * m + j
    iv2 = lambda i, j: nu + nv + (i - 1) * m + j

    jj = np.arange(m)
    jl = (jj - 1) % m
    jr = (jj + 1) % m
    phi = d * 2.0 * np.pi / mesh.k
    cph, sph = np.cos(phi), np.sin(phi)

    absv2 = np.abs(v) ** 2
    du_diag = -1.0 + 3.0 * u**2 + beta * absv2

    # --- u block ---
    a00 = (mid[0] / h[0]) / vol[0]
    add(np.array([0]), np.array([0]), np.array([-a00 + du_diag[0, 0]]))
    add(np.zeros(m, int), iu(1, jj), np.full(m, a00 / m))
    for i in range(1, n_r - 1):
        base = iu(i, jj)
        diag_here = di[i] - 2.0 * ang[i - 1] + du_diag[i]
        add(base, base, diag_here)
        add(base, iu(i, jl), np.full(m, ang[i - 1]))
        add(base, iu(i, jr), np.full(m, ang[i - 1]))
        if i > 1:
            add(base, iu(i - 1, jj), np.full(m, lo[i]))
        else:
            add(base, np.zeros(m, int), np.full(m, lo[1]))
        if i < n_r - 2:
            add(base, iu(i + 1, jj), np.full(m, up[i]))
        # u-v coupling: d F_u / d v = 2 beta u v
        add(base, iv1(i, jj), 2.0 * beta * u[i] * v.real[i])
        add(base, iv2(i, jj), 2.0 * beta * u[i] * v.imag[i])

    # --- v blocks ---
    lo_d, di_d, up_d = lo, di, up  # winding handled by the seam phase
    dv0 = 1.0 + beta * u**2
    v1v, v2v = v.real, v.imag
    for i in range(1, n_r - 1):
        b1 = iv1(i, jj)
        b2 = iv2(i, jj)
        lapdiag = di_d[i] - 2.0 * ang[i - 1]
        # d F_v1/d v1 and d F_v2/d v2
        add(b1, b1, lapdiag + dv0[i] - 3.0 * v1v[i] ** 2 - v2v[i] ** 2)
        add(b2, b2, lapdiag + dv0[i] - v1v[i] ** 2 - 3.0 * v2v[i] ** 2)
        add(b1, b2, -2.0 * v1v[i] * v2v[i])
        add(b2, b1, -2.0 * v1v[i] * v2v[i])
        # v-u coupling
        add(b1, iu(i, jj), 2.0 * beta * u[i] * v1v[i])
        add(b2, iu(i, jj), 2.0 * beta * u[i] * v2v[i])
        # radial neighbors
        if i > 1:
            add(b1, iv1(i - 1, jj), np.full(m, lo_d[i]))
            add(b2, iv2(i - 1, jj), np.full(m, lo_d[i]))
        if i < n_r - 2:
            add(b1, iv1(i + 1, jj), np.full(m, up_d[i]))
            add(b2, iv2(i + 1, jj), np.full(m, up_d[i]))
        # angular couplings away from the seam
        add(b1[1:], iv1(i, jj[1:] - 1), np.full(m - 1, ang[i - 1]))
        add(b2[1:], iv2(i, jj[1:] - 1), np.full(m - 1, ang[i - 1]))
        add(b1[:-1], iv1(i, jj[:-1] + 1), np.full(m - 1, ang[i - 1]))
        add(b2[:-1], iv2(i, jj[:-1] + 1), np.full(m - 1, ang[i - 1]))
        # seam: left neighbor of column 0 is P^-1 v[:, m-1]
        a = ang[i - 1]
        add(np.array([b1[0]]), np.array([iv1(i, m - 1)]), np.array([a * cph]))
        add(np.array([b1[0]]), np.array([iv2(i, m - 1)]), np.array([a * sph]))
        add(np.array([b2[0]]), np.array([iv1(i, m - 1)]), np.array([-a * sph]))
        add(np.array([b2[0]]), np.array([iv2(i, m - 1)]), np.array([a * cph]))
        # seam: right neighbor of column m-1 is P v[:, 0]
        add(np.array([b1[m - 1]]), np.array([iv1(i, 0)]), np.array([a * cph]))
        add(np.array([b1[m - 1]]), np.array([iv2(i, 0)]), np.array([-a * sph]))
        add(np.array([b2[m - 1]]), np.array([iv1(i, 0)]), np.array([a * sph]))
        add(np.array([b2[m - 1]]), np.array([iv2(i, 0)]), np.array([a * cph]))

    n_tot = nu + 2 * nv
    rows = np.concatenate([np.atleast_1d(x) for x in rows])
    cols = np.concatenate([np.atleast_1d(x) for x in cols])
    vals = np.concatenate([np.atleast_1d(x) for x in vals])
    return sparse.csc_matrix((vals, (rows, cols)), shape=(n_tot, n_tot))


def _factorize(jac):
    try:
        return splu(jac.tocsc())
    except (RuntimeError, MemoryError):
        # fall back to an incomplete factorization used as a preconditioner
        ilu = spilu(jac.tocsc(), drop_tol=1e-5, fill_factor=30)

        class _Krylov:
            def solve(self, rhs):
                x, info = lgmres(
                    jac, rhs, M=LinearOperator(jac.shape, ilu.solve),
                    rtol=1e-8, atol=0.0, maxiter=500,
                )
                if info != 0:
                    raise DivergedError(f"inner Krylov solve failed (info={info})")
                return x

        return _Krylov()


def correction_residual(ansatz: PolygonAnsatz, phi, chi, beta, c):
    """Residuals of the coupled system in correction form.

    Writing u = u_l + phi and v = v_d + chi, the Laplacians of the ansatz
    pieces are eliminated through the profile equations (Delta w = w - w^3
    and Delta v_d = -v_d + |v_d|^2 v_d), so the discrete operator only acts
    on the corrections.  At the near-critical polygon radius the bare
    truncation error of Delta_h u_l would otherwise drown the
    exponentially small interaction forces.  The multiplier c rides on the
    soft direction d u_l / d l.
    """
    mesh = ansatz.mesh
    d = ansatz.d
    u_l = ansatz.field.u
    v_d = ansatz.field.v
    u = u_l + phi
    v = v_d + chi
    # (u_l + phi)^3 - sum w_j^3, with the ansatz part expanded exactly
    cubic = cube_interaction(ansatz.spike_copies) + phi * (
        3.0 * u_l**2 + 3.0 * u_l * phi + phi**2
    )
    f_u = (
        sector_laplacian(mesh, phi, 0)
        - phi
        + cubic
        + beta * u * np.abs(v) ** 2
        - c * ansatz.dudl
    )
    f_u[-1] = 0.0
    absvd2 = np.abs(v_d) ** 2
    f_v = (
        sector_laplacian(mesh, chi, d)
        + chi
        + absvd2 * v_d
        - np.abs(v) ** 2 * v
        + beta * u**2 * v
    )
    f_v[0] = 0.0
    f_v[-1] = 0.0
    return f_u, f_v


def _constraint_weights(mesh: SectorMesh):
    from .mesh import radial_weights

    return radial_weights(mesh.radial)[:, None] * np.ones(mesh.shape) * mesh.dtheta


def newton_planar(
    init: PolygonAnsatz,
    beta: float,
    tol: float = 1e-9,
    max_steps: int = 30,
    chord: bool = True,
    info: dict | None = None,
) -> PlanarField:
    """Damped Newton on the coupled planar system, projected off the soft mode.

    Valid for small positive beta (<= 1e-2).  The iteration solves the
    correction-form system together with the multiplier c on d u_l / d l
    and the orthogonality constraint <u - u_l, d u_l / d l> = 0, the
    discrete counterpart of the projected problem the reduction is built
    on; at the reduced-force root c is zero up to discretization noise.
    The outer circle carries the ansatz trace; v keeps its origin zero by
    the sector phase identification.  ``chord=False`` refactors the
    Jacobian every step (textbook quadratic convergence) instead of
    reusing the factorization while contraction holds.
    """
    if not (0.0 <= beta <= 1e-2):
        raise ValueError("newton_planar expects 0 <= beta <= 1e-2")
    mesh = init.mesh
    d = init.d
    phi = np.zeros(mesh.shape)
    chi = np.zeros(mesh.shape, dtype=complex)
    c = 0.0

    wz = _constraint_weights(mesh) * init.dudl
    wzn = wz / float((wz * init.dudl).sum())
    wz_packed = _pack(mesh, wzn, np.zeros(mesh.shape, complex))
    wz_packed[0] = wzn[0].sum()  # the origin ring is one degree of freedom
    z_packed = _pack(mesh, init.dudl, np.zeros(mesh.shape, complex))

    def aug_residual(phi, chi, c):
        f_u, f_v = correction_residual(init, phi, chi, beta, c)
        g = float((wzn * phi).sum())
        return f_u, f_v, g

    history = []
    f_u, f_v, g = aug_residual(phi, chi, c)
    nrm = max(np.abs(f_u).max(), np.abs(f_v).max(), abs(g))
    history.append(float(nrm))
    lu = None
    n = None
    for _ in range(max_steps):
        if nrm < tol:
            break
        # chord strategy: the corrections stay small, so one factorization
        # serves several steps; refactor when the contraction degrades
        if lu is None or not chord or (len(history) >= 2 and history[-1] > 0.25 * history[-2]):
            u = init.field.u + phi
            v = init.field.v + chi
            jac = _planar_jacobian(mesh, u, v, beta, d)
            n = jac.shape[0]
            jac_aug = sparse.bmat(
                [
                    [jac, sparse.csc_matrix(-z_packed[:, None])],
                    [sparse.csc_matrix(wz_packed[None, :]), None],
                ],
                format="csc",
            )
            lu = _factorize(jac_aug)
        rhs = -np.concatenate([_pack(mesh, f_u, f_v + 0j), [g]])
        delta = lu.solve(rhs)
        alpha = 1.0
        while alpha > 1e-6:
            dphi, dchi = _unpack(mesh, alpha * delta[:n], 0.0, 0.0)
            phi_t = phi + dphi
            chi_t = chi + dchi
            c_t = c + alpha * delta[n]
            fu_t, fv_t, g_t = aug_residual(phi_t, chi_t, c_t)
            nrm_t = max(np.abs(fu_t).max(), np.abs(fv_t).max(), abs(g_t))
            if nrm_t < (1.0 - 0.25 * alpha) * nrm or nrm_t < tol:
                phi, chi, c = phi_t, chi_t, c_t
                f_u, f_v, g, nrm = fu_t, fv_t, g_t, nrm_t
                break
            alpha *= 0.5
        else:
            raise DivergedError(
                f"planar Newton line search stalled at residual {nrm:.3e}",
                history=history,
            )
        history.append(float(nrm))
    else:
        raise DivergedError(
            f"planar Newton used {max_steps} steps without reaching {tol:.1e}",
            history=history,
        )
    if info is not None:
        info["steps"] = len(history) - 1
        info["history"] = history
        info["residual"] = float(nrm)
        info["multiplier"] = float(c)
    u = init.field.u + phi
    v = init.field.v + chi
    return PlanarField(mesh, u, v.real, v.imag, d)


def winding_number(field: PlanarField, radius=2.0):
    """Phase winding of v around the full circle of the given radius."""
    i = int(np.argmin(np.abs(field.mesh.radial.nodes - radius)))
    ring = field.v[i]
    phase = np.exp(1j * field.d * 2.0 * np.pi / field.mesh.k)
    full = np.concatenate([ring * phase**j for j in range(field.mesh.k)])
    args = np.angle(full[np.r_[np.arange(full.size), 0]])
    increments = np.diff(args)
    increments = (increments + np.pi) % (2.0 * np.pi) - np.pi
    return float(increments.sum() / (2.0 * np.pi))


def correction_norms(field: PlanarField, ansatz: PolygonAnsatz, weights=None):
    """max|u - u_l| and the star norm of the extracted phase perturbation."""
    if weights is None:
        weights = WeightedNorms()
    du = float(np.abs(field.u - ansatz.field.u).max())
    psi, mask = extract_psi(field)
    grid_mask = np.broadcast_to(mask[:, None], field.mesh.shape)
    from .mesh import norm_star

    p1 = SectorScalar(field.mesh, psi.values.real)
    p2 = SectorScalar(field.mesh, psi.values.imag)
    psi_star = norm_star(p1, p2, weights, mask=grid_mask)
    return du, psi_star


# ----------------------------------------------------------------------------
# nondegeneracy of the conjugated linearization
# ----------------------------------------------------------------------------

def _dense_band(mesh: RadialMesh, nu: int):
    lo, di, up = laplacian_stencil(mesh, abs(nu))
    return sparse.diags([lo[1:], di, up[:-1]], [-1, 0, 1]).toarray()


def _free_idx(mesh: RadialMesh, nu: int):
    n = mesh.nodes.size
    return np.arange(n - 1) if nu == 0 else np.arange(1, n - 1)


def _block_sigma(d, m, k, mesh, s_vals, alpha):
    """Weighted injectivity modulus of one Fourier pair block.

    The block couples the radial coefficients at angular frequencies
    (d - m, d + m); the symmetry class admits the first iff d - m = 1 mod k
    and the second iff d + m = 1 mod k.  When only one side is admitted the
    conjugate coupling produces an out-of-class component whose size joins
    the residual (a rectangular block).  Sizes are measured in the weighted
    pair of norms the inversion theory uses: residuals in the
    (1 + r^(2+alpha))-weighted L2, inputs in the matching second-order norm.
    """
    vol = control_volumes(mesh)
    r = mesh.nodes
    xw = vol * (1.0 + r ** (2.0 + alpha))
    yw = vol / (1.0 + r ** (2.0 + alpha))
    inc_a = ((d - m - 1) % k) == 0
    inc_b = ((d + m - 1) % k) == 0
    if not (inc_a or inc_b):
        return None
    s2 = s_vals**2

    def quotient(op, lap, idx_cols, x_rows, y_cols):
        a = op.T @ (x_rows[:, None] * op)
        g = lap.T @ ((xw[idx_cols])[:, None] * lap) + np.diag(y_cols)
        w = eigh(a, g, eigvals_only=True, subset_by_index=[0, 0])
        return float(np.sqrt(max(w[0], 0.0)))

    if m == 0:
        nu = d
        ia = _free_idx(mesh, abs(nu))
        lap = _dense_band(mesh, nu)[np.ix_(ia, ia)]
        op = lap + np.diag((1.0 - 3.0 * s2)[ia])
        return quotient(op, lap, ia, xw[ia], yw[ia])

    nu_a, nu_b = d - m, d + m
    ia = _free_idx(mesh, abs(nu_a))
    ib = _free_idx(mesh, abs(nu_b))
    lap_a = _dense_band(mesh, nu_a)
    lap_b = _dense_band(mesh, nu_b)
    op_a = lap_a + np.diag(1.0 - 2.0 * s2)
    op_b = lap_b + np.diag(1.0 - 2.0 * s2)
    coupling = np.diag(-s2)

    if inc_a and inc_b:
        op = np.block(
            [
                [op_a[np.ix_(ia, ia)], coupling[np.ix_(ia, ib)]],
                [coupling[np.ix_(ib, ia)], op_b[np.ix_(ib, ib)]],
            ]
        )
        lap = np.block(
            [
                [lap_a[np.ix_(ia, ia)], np.zeros((ia.size, ib.size))],
                [np.zeros((ib.size, ia.size)), lap_b[np.ix_(ib, ib)]],
            ]
        )
        x_rows = np.concatenate([xw[ia], xw[ib]])
        a = op.T @ (x_rows[:, None] * op)
        g = lap.T @ (x_rows[:, None] * lap) + np.diag(np.concatenate([yw[ia], yw[ib]]))
        w = eigh(a, g, eigvals_only=True, subset_by_index=[0, 0])
        return float(np.sqrt(max(w[0], 0.0)))
    if inc_a:
        op = np.vstack([op_a[np.ix_(ia, ia)], coupling[np.ix_(ib, ia)]])
        x_rows = np.concatenate([xw[ia], xw[ib]])
        return quotient(op, lap_a[np.ix_(ia, ia)], ia, x_rows, yw[ia])
    op = np.vstack([coupling[np.ix_(ia, ib)], op_b[np.ix_(ib, ib)]])
    x_rows = np.concatenate([xw[ia], xw[ib]])
    return quotient(op, lap_b[np.ix_(ib, ib)], ib, x_rows, yw[ib])


def default_nondegeneracy_mesh():
    return RadialMesh.build(40.0, h_core=0.05, ratio=1.05, core_extent=6.0)


def check_nondegeneracy(
    d: int,
    k: int,
    mesh: RadialMesh | None = None,
    weights: WeightedNorms | None = None,
    m_max: int | None = None,
    info: dict | None = None,
):
    """Smallest weighted singular value of the conjugated linearization on
    the symmetry class, plus the predicted resonance flag.

    The flag is true iff d >= 2 and 2(d-1) = 0 mod k, the configuration in
    which the class keeps a fully coupled Fourier pair and the inversion
    estimate is not available.  The default weight exponent 0.45 gives the
    sharpest contrast between resonant and nonresonant cases over the legal
    range (0, 1/2); the separation degrades gracefully for smaller alpha.
    """
    if mesh is None:
        mesh = default_nondegeneracy_mesh()
    if weights is None:
        weights = WeightedNorms(alpha=0.45)
    if m_max is None:
        m_max = 2 * k + d + 3
    s_vals = solve_vortex(d, mesh=mesh).values
    resonant = d >= 2 and (2 * (d - 1)) % k == 0
    per_block = {}
    for m in range(0, m_max + 1):
        sig = _block_sigma(d, m, k, mesh, s_vals, weights.alpha)
        if sig is not None:
            per_block[m] = sig
    sigma_min = min(per_block.values())
    if info is not None:
        info["blocks"] = per_block
        info["mesh"] = mesh.to_config()
        info["alpha"] = weights.alpha
    return sigma_min, resonant
