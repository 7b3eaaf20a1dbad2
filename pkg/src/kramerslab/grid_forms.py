"""Tensor-product hat-function discretization of (0,1) x (-1,1).

Assembles the weighted mass form and the split stiffness (spatial part plus
time-rescaled reaction-coordinate part) of the evolution problem, and the
block forms of the two-species limit system. The weight is evaluated at the
quadrature points, never lumped, so the discrete energy identities of the
variational formulation hold exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import gibbs
from .enthalpy import EnthalpyProfile
from .quadrature import gauss_rule, panel_points

__all__ = [
    "AssemblyError", "Grid", "Field", "LimitField", "FormMatrices",
    "LimitFormMatrices", "graded_nodes", "build_grid", "assemble",
    "assemble_limit", "assemble_limit_rates", "b_form", "a_form",
    "energy_split", "pair_measure", "pair_limit", "mass_matrix_1d",
    "stiffness_matrix_1d", "xi_node_functional", "l2_norm_x",
]


class AssemblyError(RuntimeError):
    pass


def graded_nodes(n, delta=0.2, power=2.0, fractions=(0.35, 0.30, 0.35)):
    """Symmetric reaction-coordinate nodes clustered near 0 and near +-1.

    ``n`` must be odd so that 0 is a node. The half grid on [0, 1] is split
    into [0, delta], [delta, 1-delta], [1-delta, 1]; the two outer zones are
    power-graded toward their cluster point (the saddle at 0, the well at 1),
    the middle zone is uniform. ``fractions`` allocates cells to the zones.
    """
    if n < 5 or n % 2 == 0:
        raise ValueError("graded grids need an odd node count n >= 5")
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    cells = (n - 1) // 2
    c_in = max(2, int(round(fractions[0] * cells)))
    c_out = max(2, int(round(fractions[2] * cells)))
    c_mid = cells - c_in - c_out
    if c_mid < 1:
        raise ValueError(f"node count {n} too small for a three-zone grading")
    inner = delta * (np.arange(c_in + 1) / c_in) ** power
    mid = np.linspace(delta, 1.0 - delta, c_mid + 1)
    outer = 1.0 - delta * ((np.arange(c_out + 1) / c_out) ** power)[::-1]
    half = np.concatenate([inner, mid[1:], outer[1:]])
    half[0] = 0.0
    half[-1] = 1.0
    return np.concatenate([-half[::-1], half[1:]])


@dataclass(frozen=True)
class Grid:
    """Tensor grid: x-nodes on [0, 1], reaction-coordinate nodes on [-1, 1]."""

    x_nodes: np.ndarray
    xi_nodes: np.ndarray
    quad_order: int = 4

    def __post_init__(self):
        x = np.ascontiguousarray(self.x_nodes, dtype=float)
        xi = np.ascontiguousarray(self.xi_nodes, dtype=float)
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "xi_nodes", xi)
        if len(x) < 3 or len(xi) < 3:
            raise ValueError("need at least 3 nodes per direction")
        if np.any(np.diff(x) <= 0.0) or np.any(np.diff(xi) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("x-nodes must span [0, 1] exactly")
        if xi[0] != -1.0 or xi[-1] != 1.0:
            raise ValueError("xi-nodes must span [-1, 1] exactly")
        if not np.any(xi == 0.0):
            raise ValueError("xi = 0 must be a node")
        if self.quad_order < 1:
            raise ValueError("quad_order must be at least 1")

    @property
    def nx(self):
        return len(self.x_nodes)

    @property
    def nxi(self):
        return len(self.xi_nodes)


def build_grid(nx, nxi, grading="three_zone", delta=0.2, power=2.0,
               quad_order=4):
    """Tensor grid with ``nx`` uniform x-nodes and ``nxi`` xi-nodes.

    ``nxi`` must be odd in either grading so that the saddle is a node.
    """
    if nx < 4 or nxi < 4:
        raise ValueError("build_grid needs nx >= 4 and nxi >= 4")
    if nxi % 2 == 0:
        raise ValueError("nxi must be odd so that xi = 0 is a node")
    x = np.linspace(0.0, 1.0, nx)
    if grading == "uniform":
        xi = np.linspace(-1.0, 1.0, nxi)
        xi[(nxi - 1) // 2] = 0.0
    elif grading == "three_zone":
        xi = graded_nodes(nxi, delta=delta, power=power)
    else:
        raise ValueError(f"unknown grading {grading!r}")
    return Grid(x_nodes=x, xi_nodes=xi, quad_order=quad_order)


@dataclass
class Field:
    """Nodal values of a density against the eps-reference measure."""

    values: np.ndarray
    grid: Grid
    eps: float

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        expected = (self.grid.nx, self.grid.nxi)
        if self.values.shape != expected:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def ravel(self):
        return self.values.reshape(-1)

    def copy(self):
        return Field(self.values.copy(), self.grid, self.eps)


@dataclass
class LimitField:
    """Pair of nodal 1D functions on the x-grid, one per well."""

    u_minus: np.ndarray
    u_plus: np.ndarray
    x_nodes: np.ndarray

    def __post_init__(self):
        self.u_minus = np.ascontiguousarray(self.u_minus, dtype=float)
        self.u_plus = np.ascontiguousarray(self.u_plus, dtype=float)
        self.x_nodes = np.ascontiguousarray(self.x_nodes, dtype=float)
        if not (len(self.u_minus) == len(self.u_plus) == len(self.x_nodes)):
            raise ValueError("limit field components must have equal length")
        if not (np.all(np.isfinite(self.u_minus))
                and np.all(np.isfinite(self.u_plus))):
            raise ValueError("limit field values must be finite")

    def stack(self):
        return np.concatenate([self.u_minus, self.u_plus])

    def copy(self):
        return LimitField(self.u_minus.copy(), self.u_plus.copy(), self.x_nodes)


def _mass_cells(nodes, order, weight=None, log_weight=None):
    """Per-cell 2x2 hat-function mass blocks (m00, m01, m11) and cell masses."""
    pts, wts = panel_points(nodes, order)
    if log_weight is not None:
        wq = wts * np.exp(log_weight(pts))
    elif weight is not None:
        wq = wts * weight(pts)
    else:
        wq = wts
    g, _ = gauss_rule(order)
    s = 0.5 * (1.0 + g)
    n0 = 1.0 - s
    m00 = wq @ (n0 * n0)
    m01 = wq @ (n0 * s)
    m11 = wq @ (s * s)
    return m00, m01, m11, wq.sum(axis=1)


def mass_matrix_1d(nodes, weight=None, order=4, log_weight=None):
    """Tridiagonal hat-function mass matrix with the weight sampled at the
    panel Gauss points (not lumped)."""
    nodes = np.asarray(nodes, dtype=float)
    m00, m01, m11, _ = _mass_cells(nodes, order, weight, log_weight)
    n = len(nodes)
    diag = np.zeros(n)
    diag[:-1] += m00
    diag[1:] += m11
    return sp.diags([m01, diag, m01], [-1, 0, 1], format="csr")


def stiffness_cells(nodes, weight=None, order=4, log_weight=None):
    """Per-cell conductances g_c = (integral of the weight over the cell) / h^2.

    The 1D stiffness is exactly the chain sum of rank-one difference stencils
    with these coefficients; keeping them separate allows applying the
    operator in incidence form (difference, scale, difference), where every
    floating-point product is proportional to the true local flux.
    """
    nodes = np.asarray(nodes, dtype=float)
    pts, wts = panel_points(nodes, order)
    if log_weight is not None:
        wq = wts * np.exp(log_weight(pts))
    elif weight is not None:
        wq = wts * weight(pts)
    else:
        wq = wts
    h = np.diff(nodes)
    return wq.sum(axis=1) / (h * h)


def stiffness_from_cells(g_cell):
    n = len(g_cell) + 1
    diag = np.zeros(n)
    diag[:-1] += g_cell
    diag[1:] += g_cell
    return sp.diags([-g_cell, diag, -g_cell], [-1, 0, 1], format="csr")


def stiffness_matrix_1d(nodes, weight=None, order=4, log_weight=None):
    """Tridiagonal hat-function stiffness matrix; constants are in its kernel
    (each cell contributes the graph-Laplacian stencil)."""
    return stiffness_from_cells(
        stiffness_cells(nodes, weight=weight, order=order,
                        log_weight=log_weight))


@dataclass(frozen=True)
class FormMatrices:
    """Assembled sparse forms for one value of eps.

    ``M`` is the weighted mass, ``A1`` the x-stiffness, ``A2`` the
    time-rescaled xi-stiffness, ``A = A1 + A2``. The 1D factors and the
    per-cell conductances ``g_x``, ``g_xi`` are kept so the stiffness can be
    applied and its energies evaluated in incidence form: the xi-conductances
    are of size clock * density and a plain sparse matvec against an O(1)
    field would drown conserved functionals in eps_mach * |A| noise, while
    the incidence form keeps every product proportional to the local flux.
    """

    M: sp.csr_matrix
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    A: sp.csr_matrix
    M_x: sp.csr_matrix
    K_x: sp.csr_matrix
    M_xi: sp.csr_matrix
    K_xi: sp.csr_matrix
    g_x: np.ndarray
    g_xi: np.ndarray
    grid: Grid
    profile: EnthalpyProfile
    eps: float
    log_z: float
    log_tau_shift: float = 0.0
    underflow_cells: tuple = ()

    @property
    def n(self):
        return self.M.shape[0]

    def _as_grid(self, u):
        if isinstance(u, Field):
            return u.values
        return np.asarray(u, dtype=float).reshape(self.grid.nx, self.grid.nxi)

    def apply_a1(self, u):
        """(x-stiffness (x) xi-mass) applied in incidence form; flat output."""
        U = self._as_grid(u)
        W = (self.M_xi @ U.T).T
        flux = np.diff(W, axis=0) * self.g_x[:, None]
        out = np.zeros_like(U)
        out[:-1] -= flux
        out[1:] += flux
        return out.reshape(-1)

    def apply_a2(self, u):
        """(x-mass (x) xi-stiffness) applied in incidence form; flat output."""
        U = self._as_grid(u)
        W = self.M_x @ U
        flux = np.diff(W, axis=1) * self.g_xi[None, :]
        out = np.zeros_like(U)
        out[:, :-1] -= flux
        out[:, 1:] += flux
        return out.reshape(-1)

    def apply_a(self, u):
        return self.apply_a1(u) + self.apply_a2(u)

    def a1_energy(self, u):
        """x-part of the energy as a nonnegative sum over x-cells."""
        U = self._as_grid(u)
        V = np.diff(U, axis=0)
        W = (self.M_xi @ V.T).T
        return float(np.einsum("cj,cj->c", V, W) @ self.g_x)

    def a2_energy(self, u):
        """xi-part of the energy as a nonnegative sum over xi-cells."""
        U = self._as_grid(u)
        V = np.diff(U, axis=1)
        W = self.M_x @ V
        return float(np.einsum("ic,ic->c", V, W) @ self.g_xi)

    def a_energy(self, u):
        return self.a1_energy(u) + self.a2_energy(u)


def assemble(grid, profile, eps, log_tau_shift=0.0, tol=1e-12,
             quad_order=None):
    """Assemble the weighted Galerkin matrices at scale ``eps``.

    The xi-stiffness weight combines the time-rescaling factor and the
    reference density in one exponent per quadrature point,
    log(eps) + shift + (1 - H(xi))/eps - log_z, evaluated as a single sum
    before exponentiating. ``log_tau_shift`` rescales the reaction clock for
    the off-critical scaling experiments (0 critical, log(eps) subcritical,
    -log(eps) supercritical).
    """
    if not gibbs.EPS_FLOOR <= eps <= gibbs.EPS_CEIL:
        raise ValueError(
            f"eps = {eps!r} outside [{gibbs.EPS_FLOOR}, {gibbs.EPS_CEIL}]: "
            "below the floor the barrier weight exp(-1/eps) drowns in the "
            "roundoff of the well entries and the assembled stiffness loses "
            "the barrier region")
    order = grid.quad_order if quad_order is None else quad_order
    log_z = gibbs.log_partition(profile, eps, tol)
    h = profile.eval

    def density(xi):
        return np.exp(-np.asarray(h(xi), dtype=float) / eps - log_z)

    def stiff_exponent(xi):
        return (math.log(eps) + log_tau_shift
                + (1.0 - np.asarray(h(xi), dtype=float)) / eps - log_z)

    M_x = mass_matrix_1d(grid.x_nodes, order=order)
    g_x = stiffness_cells(grid.x_nodes, order=order)
    K_x = stiffness_from_cells(g_x)

    m00, m01, m11, cell_mass = _mass_cells(grid.xi_nodes, order, weight=density)
    nxi = grid.nxi
    diag = np.zeros(nxi)
    diag[:-1] += m00
    diag[1:] += m11
    M_xi = sp.diags([m01, diag, m01], [-1, 0, 1], format="csr")
    underflow = tuple(int(c) for c in np.nonzero(cell_mass == 0.0)[0])
    if np.any(M_xi.diagonal() <= 0.0):
        raise AssemblyError(
            f"weighted mass lost positive definiteness at eps = {eps}: "
            f"cells {underflow} underflowed to zero")

    g_xi = stiffness_cells(grid.xi_nodes, order=order,
                           log_weight=stiff_exponent)
    K_xi = stiffness_from_cells(g_xi)

    M = sp.kron(M_x, M_xi, format="csr")
    A1 = sp.kron(K_x, M_xi, format="csr")
    A2 = sp.kron(M_x, K_xi, format="csr")
    A = (A1 + A2).tocsr()
    return FormMatrices(M=M, A1=A1, A2=A2, A=A, M_x=M_x, K_x=K_x, M_xi=M_xi,
                        K_xi=K_xi, g_x=g_x, g_xi=g_xi, grid=grid,
                        profile=profile, eps=eps, log_z=log_z,
                        log_tau_shift=log_tau_shift, underflow_cells=underflow)


def _vec(u):
    if isinstance(u, Field):
        return u.values.reshape(-1)
    if isinstance(u, LimitField):
        return u.stack()
    return np.asarray(u, dtype=float).reshape(-1)


def _bilinear(mat, u, v):
    uu = _vec(u)
    vv = _vec(v)
    if uu.shape != vv.shape:
        raise ValueError(f"shape mismatch: {uu.shape} vs {vv.shape}")
    if uu is vv or np.array_equal(uu, vv):
        return float(uu @ (mat @ uu))
    # polarization keeps the evaluation bitwise symmetric in (u, v)
    s = uu + vv
    d = uu - vv
    return 0.25 * (float(s @ (mat @ s)) - float(d @ (mat @ d)))


def b_form(M, u, v):
    """Mass pairing u^T M v; symmetric in (u, v) bitwise."""
    return _bilinear(M, u, v)


def a_form(A, u, v):
    """Energy pairing u^T A v; symmetric in (u, v) bitwise."""
    return _bilinear(A, u, v)


def energy_split(A1, A2, u):
    """The two components (x-part, xi-part) of the energy of ``u``."""
    return _bilinear(A1, u, u), _bilinear(A2, u, u)


@dataclass(frozen=True)
class LimitFormMatrices:
    """Block forms of the two-species limit system over (u_minus, u_plus)."""

    M: sp.csr_matrix
    A: sp.csr_matrix
    M_x: sp.csr_matrix
    K_x: sp.csr_matrix
    x_nodes: np.ndarray
    rate_forward: float   # minus -> plus
    rate_backward: float  # plus -> minus

    @property
    def symmetric(self):
        return self.rate_forward == self.rate_backward

    @property
    def n(self):
        return self.M.shape[0]


def assemble_limit_rates(x_nodes, rate_forward, rate_backward, quad_order=4):
    """Block mass/stiffness of the two-species system with distinct rates.

    Mass is half the diagonal pair of x-mass blocks; the stiffness adds the
    reaction coupling, which is nonsymmetric unless the two rates coincide.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    M_x = mass_matrix_1d(x_nodes, order=quad_order)
    K_x = stiffness_matrix_1d(x_nodes, order=quad_order)
    half = 0.5
    M = sp.bmat([[half * M_x, None], [None, half * M_x]], format="csr")
    react = sp.bmat([
        [half * rate_forward * M_x, -half * rate_backward * M_x],
        [-half * rate_forward * M_x, half * rate_backward * M_x],
    ], format="csr")
    A = (sp.bmat([[half * K_x, None], [None, half * K_x]], format="csr")
         + react).tocsr()
    return LimitFormMatrices(M=M, A=A, M_x=M_x, K_x=K_x, x_nodes=x_nodes,
                             rate_forward=rate_forward,
                             rate_backward=rate_backward)


def assemble_limit(x_nodes, k, quad_order=4):
    """Symmetric limit forms: equal exchange rate ``k`` between the wells."""
    if not k >= 0.0:
        raise ValueError(f"rate k must be nonnegative, got {k!r}")
    return assemble_limit_rates(x_nodes, k, k, quad_order=quad_order)


def _x_interp(values, order):
    """Values of the nodal piecewise-linear interpolant at the panel Gauss
    points of its own partition; shape (ncells, order)."""
    g, _ = gauss_rule(order)
    s = 0.5 * (1.0 + g)
    return values[:-1, None] * (1.0 - s)[None, :] + values[1:, None] * s[None, :]


def pair_measure(forms, field, phi):
    """Duality pairing of the measure (field * reference) with ``phi(x, xi)``."""
    grid = forms.grid
    order = grid.quad_order
    xq, xw = panel_points(grid.x_nodes, order)
    xiq, xiw = panel_points(grid.xi_nodes, order)
    gamma_w = xiw * np.exp(
        -np.asarray(forms.profile.eval(xiq), dtype=float) / forms.eps
        - forms.log_z)
    g, _ = gauss_rule(order)
    s = 0.5 * (1.0 + g)
    U = field.values
    # bilinear interpolation onto the tensor quadrature points
    Ux = U[:-1, None, :] * (1.0 - s)[None, :, None] + U[1:, None, :] * s[None, :, None]
    Uq = (Ux[:, :, :-1, None] * (1.0 - s)[None, None, None, :]
          + Ux[:, :, 1:, None] * s[None, None, None, :])
    raw = phi(xq[:, :, None, None], xiq[None, None, :, :])
    Phi = np.broadcast_to(np.asarray(raw, dtype=float), Uq.shape)
    return float(np.einsum("ca,db,cadb->", xw, gamma_w, Uq * Phi))


def pair_limit(lf, phi, quad_order=4):
    """Pairing of the two-line limit measure with ``phi(x, xi)``."""
    xq, xw = panel_points(lf.x_nodes, quad_order)
    um = _x_interp(lf.u_minus, quad_order)
    up = _x_interp(lf.u_plus, quad_order)
    pm = np.broadcast_to(np.asarray(phi(xq, -1.0), dtype=float), um.shape)
    pp = np.broadcast_to(np.asarray(phi(xq, 1.0), dtype=float), up.shape)
    return 0.5 * (float((xw * um * pm).sum()) + float((xw * up * pp).sum()))


def xi_node_functional(grid, fn, order=None):
    """Nodal weights w_j = integral of hat_j(xi) * fn(xi); w @ u gives the
    fn-weighted xi-average of a field row by row."""
    order = grid.quad_order if order is None else order
    pts, wts = panel_points(grid.xi_nodes, order)
    vals = wts * fn(pts)
    g, _ = gauss_rule(order)
    s = 0.5 * (1.0 + g)
    w = np.zeros(grid.nxi)
    w[:-1] += vals @ (1.0 - s)
    w[1:] += vals @ s
    return w


def l2_norm_x(M_x, values):
    """L2 norm over the spatial domain of a nodal 1D function."""
    v = np.asarray(values, dtype=float)
    return math.sqrt(max(float(v @ (M_x @ v)), 0.0))
