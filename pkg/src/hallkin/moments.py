"""Velocity-space quadratures and kinetic interpolation inequalities.

All moments use the midpoint rule (weight dv^3 per node), treating f as
cell-averaged; that choice keeps the moments exactly consistent with the
conservative remaps, which redistribute cell masses.  Reductions go through
numpy's pairwise summation, which is deterministic for a fixed shape, so
repeated runs reproduce bit-identical moments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .grid import DistributionFunction

# Sharp constants of the kinetic density bounds
#   ||n_I||_{5/3}   <= C  ||f||_inf^{2/5} (2 E_I)^{3/5}
#   ||n_I u_I||_{5/4} <= C' ||f||_inf^{1/5} (2 E_I)^{4/5}
# obtained by splitting the velocity integral at radius R and minimizing
#   (4 pi / 3) ||f||_inf R^3 + R^-2 * (energy)   over R  (density), and
#   pi ||f||_inf R^4 + R^-1 * (energy)           over R  (momentum).
BOUND_C = (4.0 * np.pi / 3.0) ** 0.4 * ((2.0 / 3.0) ** 0.6 + 1.5 ** 0.4)
BOUND_CPRIME = np.pi ** 0.2 * (4.0 ** -0.8 + 4.0 ** 0.2)


@dataclass
class MomentSet:
    """Ion density, momentum density, and kinetic-energy density per x node."""

    n_I: np.ndarray        # (Nx,)
    nu_I: np.ndarray       # (Nx, 3)
    E_I_density: np.ndarray  # (Nx,)

    def u_I(self) -> np.ndarray:
        """Bulk velocity nu_I / n_I, zero where the density vanishes."""
        n = self.n_I[:, None]
        return np.divide(self.nu_I, n, out=np.zeros_like(self.nu_I), where=n > 0)


def compute_moments(f: DistributionFunction) -> MomentSet:
    """Midpoint-quadrature density, momentum, and kinetic-energy moments."""
    g = f.grid
    vals = f.values
    v = g.v_nodes
    v2 = v * v
    dv3 = g.dv3

    n = vals.sum(axis=(1, 2, 3)) * dv3
    nu = np.stack(
        [
            np.einsum("xabc,a->x", vals, v),
            np.einsum("xabc,b->x", vals, v),
            np.einsum("xabc,c->x", vals, v),
        ],
        axis=1,
    ) * dv3
    e2 = (
        np.einsum("xabc,a->x", vals, v2)
        + np.einsum("xabc,b->x", vals, v2)
        + np.einsum("xabc,c->x", vals, v2)
    ) * dv3
    return MomentSet(n_I=n, nu_I=nu, E_I_density=0.5 * e2)


def lp_norm(f: DistributionFunction, p: float) -> float:
    """Discrete L^p norm of f with quadrature weights dx dv^3 (max for p=inf)."""
    if p == np.inf:
        return float(np.abs(f.values).max(initial=0.0))
    if p < 1:
        raise InvalidInput("p must satisfy p >= 1 or p = inf")
    w = f.grid.dx * f.grid.dv3
    return float((np.abs(f.values) ** p).sum() * w) ** (1.0 / p)


def x_lp_norm(arr: np.ndarray, p: float, dx: float) -> float:
    """L^p norm over x of a nodal profile (Euclidean magnitude if vector)."""
    a = np.asarray(arr)
    mag = np.abs(a) if a.ndim == 1 else np.sqrt((a * a).sum(axis=1))
    if p == np.inf:
        return float(mag.max(initial=0.0))
    return float((mag ** p).sum() * dx) ** (1.0 / p)


def moment_bound_constants() -> tuple[float, float]:
    """Sharp constants (C, C') of the density and momentum moment bounds."""
    return float(BOUND_C), float(BOUND_CPRIME)


@dataclass
class MomentInequalityReport:
    lhs53: float
    rhs53: float
    lhs54: float
    rhs54: float
    passed: bool


def check_moment_inequalities(f: DistributionFunction) -> MomentInequalityReport:
    """Evaluate both kinetic moment bounds for this distribution.

    Passes iff lhs <= rhs (1 + 1e-12) for both the 5/3 density bound and
    the 5/4 momentum bound.  The zero distribution passes trivially.
    """
    g = f.grid
    moms = compute_moments(f)
    f_inf = lp_norm(f, np.inf)
    energy2 = 2.0 * float(moms.E_I_density.sum()) * g.dx  # integral of f |v|^2

    lhs53 = x_lp_norm(moms.n_I, 5.0 / 3.0, g.dx)
    rhs53 = BOUND_C * f_inf ** 0.4 * energy2 ** 0.6
    lhs54 = x_lp_norm(moms.nu_I, 5.0 / 4.0, g.dx)
    rhs54 = BOUND_CPRIME * f_inf ** 0.2 * energy2 ** 0.8

    slack = 1.0 + 1e-12
    passed = (lhs53 <= rhs53 * slack) and (lhs54 <= rhs54 * slack)
    return MomentInequalityReport(lhs53, rhs53, lhs54, rhs54, passed)
