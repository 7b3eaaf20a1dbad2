"""Minimal transition cost between the wells and the optimal profile.

The cheapest way (in rescaled Dirichlet energy) to connect prescribed values
at the two wells is an explicit profile: the normalized cumulative integral
of the reciprocal reference weight. Its cost defines the eps-level rate
coefficient ``k_eps``; as eps shrinks, twice that coefficient converges to
the reaction rate of the limit system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gibbs
from .grid_forms import Field, graded_nodes
from .quadrature import gauss_rule, panel_integrals, panel_points

__all__ = [
    "TransitionProfile", "default_xi_nodes", "transition_profile",
    "k_eps", "q_eps", "transition_cost", "transition_mass",
    "lift", "limit_rate",
]

# Profile quantities use a denser grading than the solver grid: nodes cluster
# where the profile jumps (the saddle) and where the measure sits (the wells).
DEFAULT_PROFILE_NODES = 801


def default_xi_nodes(n=DEFAULT_PROFILE_NODES):
    return graded_nodes(n, delta=0.2, power=2.0, fractions=(0.45, 0.25, 0.30))


@dataclass(frozen=True)
class TransitionProfile:
    """Nodal samples of the optimal connecting profile at one eps.

    Endpoint values are exactly -1/2 and +1/2; for an even barrier the whole
    profile is odd. ``log_i_shifted`` is the log of the normalization
    integral of exp((H-1)/eps) accumulated by the same panel rule.
    """

    eps: float
    xi_nodes: np.ndarray
    values: np.ndarray
    log_i_shifted: float

    def interp(self, xi):
        return np.interp(xi, self.xi_nodes, self.values)


def transition_profile(profile, eps, xi_nodes=None, panel_order=8):
    """Optimal connecting profile by cumulative panel quadrature.

    Both the cumulative integral and its normalization use the shifted
    integrand exp((H - 1)/eps), which is bounded by 1, so nothing overflows.
    Panels are accumulated outward from the saddle; with an even barrier on a
    symmetric grid the two half-sums mirror bitwise and the endpoint values
    come out exactly +-1/2.
    """
    if xi_nodes is None:
        xi_nodes = default_xi_nodes()
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    for needed in (-1.0, 0.0, 1.0):
        if not np.any(xi_nodes == needed):
            raise ValueError(f"xi grid must contain {needed}")
    h = profile.eval

    def shifted(xi):
        return np.exp((np.asarray(h(xi), dtype=float) - 1.0) / eps)

    panels = panel_integrals(shifted, xi_nodes, order=panel_order)
    i0 = int(np.nonzero(xi_nodes == 0.0)[0][0])
    right = np.concatenate([[0.0], np.cumsum(panels[i0:])])
    left = -np.cumsum(panels[:i0][::-1])[::-1]
    cumulative = np.concatenate([left, right])
    total = cumulative[-1] - cumulative[0]
    if not total > 0.0:
        raise ValueError("degenerate profile: normalization integral vanished")
    values = cumulative / total
    return TransitionProfile(eps=eps, xi_nodes=xi_nodes, values=values,
                             log_i_shifted=math.log(total))


def k_eps(profile, eps, tol=1e-12):
    """Rate coefficient at scale eps: the minimal rescaled connection energy
    for a unit jump between the wells.

    Evaluated as exp(log(eps) - log_z - log_i_shifted): the exponentially
    large clock factor and the exponentially large barrier integral cancel
    analytically, leaving only well-scaled quantities.
    """
    log_z = gibbs.log_partition(profile, eps, tol)
    log_i = gibbs.log_barrier_integral(profile, eps, tol)
    return math.exp(math.log(eps) - log_z - log_i)


def q_eps(profile, eps, xi_nodes=None, tol=1e-12):
    """Second moment of the optimal profile under the reference measure.

    Lies in [0, 1/4] and climbs to 1/4 as eps shrinks. The profile is
    integrated as its piecewise-linear interpolant on the profile grid.
    """
    tp = transition_profile(profile, eps, xi_nodes=xi_nodes)
    log_z = gibbs.log_partition(profile, eps, tol)
    order = 8
    pts, wts = panel_points(tp.xi_nodes, order)
    g, _ = gauss_rule(order)
    s = 0.5 * (1.0 + g)
    vq = tp.values[:-1, None] * (1.0 - s)[None, :] + tp.values[1:, None] * s[None, :]
    h = profile.eval
    dens = np.exp(-np.asarray(h(pts), dtype=float) / eps - log_z)
    return float((wts * dens * vq * vq).sum())


def transition_cost(phi_minus, phi_plus, profile, eps, rate=None):
    """Minimal rescaled connection energy between prescribed well values.

    Quadratic in the jump only: rate * (phi_plus - phi_minus)^2.
    """
    if rate is None:
        rate = k_eps(profile, eps)
    gap = phi_plus - phi_minus
    return rate * gap * gap


def transition_mass(phi_minus, phi_plus, profile, eps, q=None):
    """Squared mass of the optimal connection with prescribed well values:
    (phi_minus^2 + phi_plus^2)/2 + (q - 1/4) * (phi_plus - phi_minus)^2."""
    if q is None:
        q = q_eps(profile, eps)
    gap = phi_plus - phi_minus
    return 0.5 * (phi_minus * phi_minus + phi_plus * phi_plus) \
        + (q - 0.25) * gap * gap


def lift(u_minus, u_plus, profile, eps, grid):
    """Embed a pair of well densities into the cylinder via the optimal
    profile: u(x, xi) = u_minus(x) (1/2 - p(xi)) + u_plus(x) (1/2 + p(xi)).

    The two rows at xi = -1 and xi = +1 reproduce the inputs bitwise.
    """
    um = np.asarray(u_minus, dtype=float)
    up = np.asarray(u_plus, dtype=float)
    if um.shape != (grid.nx,) or up.shape != (grid.nx,):
        raise ValueError(
            f"well densities must have shape ({grid.nx},), got "
            f"{um.shape} and {up.shape}")
    tp = transition_profile(profile, eps, xi_nodes=grid.xi_nodes)
    wm = 0.5 - tp.values
    wp = 0.5 + tp.values
    values = um[:, None] * wm[None, :] + up[:, None] * wp[None, :]
    return Field(values=values, grid=grid, eps=eps)


def limit_rate(profile):
    """Reaction rate of the limit system: sqrt(|H''(0)| H''(1)) / pi."""
    saddle = float(profile.deriv2(0.0))
    well = float(profile.deriv2(1.0))
    if not saddle < 0.0:
        raise ValueError(f"degenerate saddle curvature {saddle!r}")
    if not well > 0.0:
        raise ValueError(f"degenerate well curvature {well!r}")
    return math.sqrt(-saddle * well) / math.pi
