"""Radial and polar-sector meshes, discrete operators, quadrature and weighted norms.

Every other module builds on the two mesh types here.  The radial grid is
uniform over a core interval and geometrically graded beyond it; the sector
grid adds equispaced angles covering one symmetry sector [0, 2*pi/k).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import MeshError, MeshMismatchError, NaNInputError


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RadialMesh:
    """Nodes 0 = r_0 < r_1 < ... < r_N = r_max.

    Uniform spacing ``h_core`` on [0, core_extent], then spacings growing by
    ``ratio`` per cell out to ``r_max``.  ``refine(n)`` divides ``h_core`` by
    ``n`` and takes the n-th root of ``ratio`` so the grading map stays smooth
    and second-order convergence studies are meaningful.
    """

    nodes: np.ndarray
    h_core: float
    ratio: float
    core_extent: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", _freeze(self.nodes))
        n = self.nodes
        if n.size < 3:
            raise MeshError("radial mesh needs at least 3 nodes")
        if n[0] != 0.0:
            raise MeshError("first node must sit exactly at r = 0")
        if np.any(np.diff(n) <= 0):
            raise MeshError("nodes must be strictly increasing")

    @staticmethod
    def build(r_max, h_core=0.05, ratio=1.05, core_extent=4.0):
        if r_max <= 0 or h_core <= 0 or ratio < 1.0:
            raise MeshError("need r_max > 0, h_core > 0, ratio >= 1")
        core_end = min(core_extent, r_max)
        n_core = max(int(round(core_end / h_core)), 2)
        nodes = list(np.linspace(0.0, core_end, n_core + 1))
        h = h_core
        while nodes[-1] < r_max - 1e-12:
            h = h * ratio
            rem = r_max - nodes[-1]
            if h >= rem:
                nodes.append(r_max)
            elif rem - h < 0.5 * h:
                # split the leftover evenly instead of leaving a sliver cell
                nodes.append(nodes[-1] + 0.5 * rem)
                nodes.append(r_max)
            else:
                nodes.append(nodes[-1] + h)
        mesh = RadialMesh(np.array(nodes), h_core, ratio, core_extent)
        if mesh.nodes.size - 1 < 64:
            raise MeshError("mesh resolves fewer than 64 cells; shrink h_core")
        return mesh

    @property
    def r_max(self):
        return float(self.nodes[-1])

    @property
    def n_cells(self):
        return self.nodes.size - 1

    def refine(self, factor=2):
        return RadialMesh.build(
            self.r_max,
            h_core=self.h_core / factor,
            ratio=self.ratio ** (1.0 / factor),
            core_extent=self.core_extent,
        )

    def to_config(self):
        return {
            "r_max": self.r_max,
            "h_core": self.h_core,
            "ratio": self.ratio,
            "core_extent": self.core_extent,
        }

    @staticmethod
    def from_config(cfg):
        return RadialMesh.build(
            cfg["r_max"],
            h_core=cfg.get("h_core", 0.05),
            ratio=cfg.get("ratio", 1.05),
            core_extent=cfg.get("core_extent", 4.0),
        )


@dataclass(frozen=True)
class SectorMesh:
    """Polar-sector grid: one radial mesh x M equispaced angles in [0, 2*pi/k)."""

    radial: RadialMesh
    k: int
    m_theta: int

    def __post_init__(self):
        if self.k < 2:
            raise MeshError("symmetry order k must be >= 2")
        if self.m_theta < 32 or self.m_theta % 4 != 0:
            raise MeshError("angular count M must be >= 32 and divisible by 4")

    @property
    def dtheta(self):
        return 2.0 * np.pi / (self.k * self.m_theta)

    @property
    def thetas(self):
        return np.arange(self.m_theta) * self.dtheta

    @property
    def shape(self):
        return (self.radial.nodes.size, self.m_theta)

    def grid(self):
        """Return broadcastable (r, theta) arrays of the node coordinates."""
        r = self.radial.nodes[:, None]
        t = self.thetas[None, :]
        return r, t

    def points(self):
        """Cartesian coordinates (x, y) of every node, shape (N+1, M)."""
        r, t = self.grid()
        return r * np.cos(t), r * np.sin(t)

    def refine(self, factor=2):
        return SectorMesh(self.radial.refine(factor), self.k, self.m_theta * factor)

    def to_config(self):
        cfg = self.radial.to_config()
        cfg.update({"k": self.k, "m_theta": self.m_theta})
        return cfg

    @staticmethod
    def from_config(cfg):
        return SectorMesh(RadialMesh.from_config(cfg), int(cfg["k"]), int(cfg["m_theta"]))


@dataclass(frozen=True)
class WeightedNorms:
    """Weight exponent for the starred norms; alpha must lie in (0, 1/2)."""

    alpha: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError("alpha must lie in (0, 1/2)")


@dataclass(frozen=True)
class SectorScalar:
    """One scalar (real or complex) sampled on a SectorMesh."""

    mesh: SectorMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.mesh.shape:
            raise MeshMismatchError(
                f"field shape {v.shape} does not match mesh shape {self.mesh.shape}"
            )
        object.__setattr__(self, "values", v)


def _same_mesh(a: SectorScalar, b: SectorScalar):
    if a.mesh is b.mesh:
        return
    if (
        a.mesh.k != b.mesh.k
        or a.mesh.m_theta != b.mesh.m_theta
        or a.mesh.radial.nodes.size != b.mesh.radial.nodes.size
        or not np.array_equal(a.mesh.radial.nodes, b.mesh.radial.nodes)
    ):
        raise MeshMismatchError("fields live on different meshes")


# ----------------------------------------------------------------------------
# radial quadrature weights
# ----------------------------------------------------------------------------

def radial_weights(mesh: RadialMesh):
    """Weights W_i with sum_i W_i f_i ~= int f(r) r dr, exact for linear f.

    Per cell [a, b] the linear interpolant of f is integrated against the
    weight r exactly: node a gets h(2a+b)/6, node b gets h(a+2b)/6.
    """
    r = mesh.nodes
    h = np.diff(r)
    w = np.zeros_like(r)
    w[:-1] += h * (2.0 * r[:-1] + r[1:]) / 6.0
    w[1:] += h * (r[:-1] + 2.0 * r[1:]) / 6.0
    return w


def control_volumes(mesh: RadialMesh):
    """Cell areas (in r dr measure) around each node, used to normalize fluxes."""
    r = mesh.nodes
    mid = 0.5 * (r[:-1] + r[1:])
    v = np.empty_like(r)
    v[0] = 0.5 * mid[0] ** 2
    v[1:-1] = 0.5 * (mid[1:] ** 2 - mid[:-1] ** 2)
    v[-1] = 0.5 * (r[-1] ** 2 - mid[-1] ** 2)
    return v


def radial_quad(mesh: RadialMesh, values):
    """2*pi * int f r dr over the mesh."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise NaNInputError("non-finite samples in radial quadrature")
    return 2.0 * np.pi * float(radial_weights(mesh) @ values)


def quad_disk(field: SectorScalar):
    """Integral of the field over the full (truncated) plane.

    Trapezoid in theta (periodic over the sector, hence one uniform weight)
    times the weighted radial rule, multiplied by k for the k sector copies.
    Exactly reproduces :func:`radial_quad` for theta-independent integrands.
    """
    v = np.asarray(field.values)
    if not np.all(np.isfinite(v)):
        raise NaNInputError("non-finite samples in quad_disk")
    mesh = field.mesh
    w = radial_weights(mesh.radial)
    sector = float(w @ v.sum(axis=1)) * mesh.dtheta
    return mesh.k * sector


# ----------------------------------------------------------------------------
# discrete radial operator
# ----------------------------------------------------------------------------

def radial_laplacian(profile, angular_index: int):
    """Second-order discrete f'' + f'/r - (d^2/r^2) f on the profile's mesh.

    Conservative flux form: exact on f = r^2 (d = 0) and on f = r (d = 1).
    At r = 0 the d = 0 row encodes the regular limit 2 f''(0); rows for
    d >= 1 return 0 there (the value is pinned by the f(0) = 0 boundary
    condition).  The last row uses the half-cell flux difference and is only
    meaningful when the caller controls the boundary.
    """
    mesh = profile.mesh
    f = np.asarray(profile.values, dtype=float)
    d = int(angular_index)
    out = laplacian_values(mesh, f, d)
    return dataclasses.replace(profile, values=out, decay_coeff=None)


def laplacian_values(mesh: RadialMesh, f, d):
    r = mesh.nodes
    if r.size < 3:
        raise MeshError("radial operator needs at least 3 nodes")
    h = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])
    vol = control_volumes(mesh)
    flux = mid * np.diff(f) / h
    out = np.empty_like(f)
    out[1:-1] = (flux[1:] - flux[:-1]) / vol[1:-1]
    out[-1] = (0.0 - flux[-1]) / vol[-1]
    if d == 0:
        out[0] = flux[0] / vol[0]
    else:
        out[0] = 0.0
        out[1:] -= (d * d) / r[1:] ** 2 * f[1:]
    return out


def laplacian_stencil(mesh: RadialMesh, d):
    """(lower, diag, upper) tridiagonal bands of :func:`laplacian_values`."""
    r = mesh.nodes
    h = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])
    vol = control_volumes(mesh)
    n = r.size
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    a = mid / h  # flux coefficient per cell
    di[1:-1] = -(a[1:] + a[:-1]) / vol[1:-1]
    up[1:-1] = a[1:] / vol[1:-1]
    lo[1:-1] = a[:-1] / vol[1:-1]
    di[-1] = -a[-1] / vol[-1]
    lo[-1] = a[-1] / vol[-1]
    if d == 0:
        di[0] = -a[0] / vol[0]
        up[0] = a[0] / vol[0]
    else:
        di[0] = 0.0
        up[0] = 0.0
        di[1:] -= (d * d) / r[1:] ** 2
    return lo, di, up


# ----------------------------------------------------------------------------
# sector derivatives and weighted norms
# ----------------------------------------------------------------------------

def radial_derivative(mesh: RadialMesh, f):
    """Second-order d/dr along axis 0 of a sector array (or 1D profile)."""
    r = mesh.nodes
    f = np.asarray(f)
    out = np.empty_like(f, dtype=complex if np.iscomplexobj(f) else float)
    hm = (r[1:-1] - r[:-2])[:, None] if f.ndim == 2 else r[1:-1] - r[:-2]
    hp = (r[2:] - r[1:-1])[:, None] if f.ndim == 2 else r[2:] - r[1:-1]
    out[1:-1] = (hm**2 * f[2:] - hp**2 * f[:-2] + (hp**2 - hm**2) * f[1:-1]) / (
        hm * hp * (hm + hp)
    )
    # one-sided second-order ends
    h0, h1 = r[1] - r[0], r[2] - r[1]
    out[0] = (
        -(2 * h0 + h1) / (h0 * (h0 + h1)) * f[0]
        + (h0 + h1) / (h0 * h1) * f[1]
        - h0 / (h1 * (h0 + h1)) * f[2]
    )
    g0, g1 = r[-1] - r[-2], r[-2] - r[-3]
    out[-1] = (
        (2 * g0 + g1) / (g0 * (g0 + g1)) * f[-1]
        - (g0 + g1) / (g0 * g1) * f[-2]
        + g0 / (g1 * (g0 + g1)) * f[-3]
    )
    return out


def sector_gradient(field: SectorScalar):
    """(df/dr, (1/r) df/dtheta) with plain periodic wrap across the sector.

    The angular part at r = 0 is set to zero: the origin is one physical
    point, so a single-valued scalar has no angular variation there.
    """
    mesh = field.mesh
    f = np.asarray(field.values)
    dr = radial_derivative(mesh.radial, f)
    dth = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * mesh.dtheta)
    r = mesh.radial.nodes[:, None]
    dth_over_r = np.zeros_like(dth)
    dth_over_r[1:] = dth[1:] / r[1:]
    return dr, dth_over_r


def _grad_mag(field: SectorScalar):
    dr, dt = sector_gradient(field)
    return np.sqrt(np.abs(dr) ** 2 + np.abs(dt) ** 2)


def norm_star(psi1: SectorScalar, psi2: SectorScalar, weights: WeightedNorms, mask=None):
    """Discrete sup of |p1| + (1+r)|grad p1| + (1+r)^(1+a)(|p2| + |grad p2|)."""
    _same_mesh(psi1, psi2)
    v1 = np.asarray(psi1.values)
    v2 = np.asarray(psi2.values)
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise NaNInputError("non-finite samples in norm_star")
    r = psi1.mesh.radial.nodes[:, None]
    wa = (1.0 + r) ** (1.0 + weights.alpha)
    expr = (
        np.abs(v1)
        + (1.0 + r) * _grad_mag(psi1)
        + wa * np.abs(v2)
        + wa * _grad_mag(psi2)
    )
    if mask is not None:
        expr = np.where(mask, expr, 0.0)
    return float(expr.max())


def norm_dstar(h1: SectorScalar, h2: SectorScalar, weights: WeightedNorms, mask=None):
    """Discrete sup of (1+r)^(2+a) (|h1| + |h2|)."""
    _same_mesh(h1, h2)
    v1 = np.asarray(h1.values)
    v2 = np.asarray(h2.values)
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise NaNInputError("non-finite samples in norm_dstar")
    r = h1.mesh.radial.nodes[:, None]
    expr = (1.0 + r) ** (2.0 + weights.alpha) * (np.abs(v1) + np.abs(v2))
    if mask is not None:
        expr = np.where(mask, expr, 0.0)
    return float(expr.max())


def l2_norm(field: SectorScalar):
    """L2 norm over the plane via quad_disk of |f|^2."""
    sq = SectorScalar(field.mesh, np.abs(field.values) ** 2)
    return float(np.sqrt(quad_disk(sq)))
