"""Discrete phase space, field state, and run configuration.

The simulator works on a slab [0, L] in x with a three-component velocity
space truncated to the box [-v_max, v_max]^3.  Everything is cell-centered:
x_i = (i + 1/2) dx and v_a = (a + 1/2) dv - v_max, so v = 0 falls on a cell
face whenever Nv is even and the specular wall map v_x -> -v_x is an exact
symmetry of the velocity nodes.

The magnetic field is B = (Bx0, By(x), Bz(x)) with constant Bx0, which makes
div B = 0 automatic in one dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import InvalidInput, TailTruncation
from .remap import RemapKernel

if TYPE_CHECKING:
    from .diagnostics import EnergyLedger


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform x grid and truncated 3-component velocity grid.

    Attributes
    ----------
    L : float
        Domain length (dimensionless units; ion mass and charges are 1).
    Nx : int
        Number of x cells.
    v_max : float
        Velocity-box half width, the same for all three components.
    Nv : int
        Points per velocity component; must be even so that v = 0 is a
        cell face and specular reflection maps nodes onto nodes.
    """

    L: float
    Nx: int
    v_max: float
    Nv: int

    def __post_init__(self) -> None:
        if self.L <= 0 or self.Nx <= 0 or self.v_max <= 0 or self.Nv <= 0:
            raise InvalidInput("grid sizes and extents must be positive")
        if self.Nv % 2 != 0:
            raise InvalidInput(
                "Nv must be even so specular reflection v_x -> -v_x is an "
                "exact grid symmetry"
            )

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.Nv

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def v_nodes(self) -> np.ndarray:
        # Centered construction: v[Nv-1-a] == -v[a] bit-exactly.
        return (np.arange(self.Nv) - (self.Nv - 1) / 2.0) * self.dv

    @property
    def dv3(self) -> float:
        return self.dv ** 3

    def v_axis(self, axis: int) -> np.ndarray:
        """Velocity nodes shaped to broadcast along f axis ``1 + axis``."""
        shape = [1, 1, 1, 1]
        shape[1 + axis] = self.Nv
        return self.v_nodes.reshape(shape)

    def speed_squared(self) -> np.ndarray:
        """|v|^2 on the velocity grid, shape (Nv, Nv, Nv)."""
        v = self.v_nodes
        return (
            v[:, None, None] ** 2 + v[None, :, None] ** 2 + v[None, None, :] ** 2
        )


@dataclass
class DistributionFunction:
    """Nonnegative ion phase-space density on the 4-D grid."""

    grid: PhaseSpaceGrid
    values: np.ndarray  # shape (Nx, Nv, Nv, Nv)

    def __post_init__(self) -> None:
        expected = (self.grid.Nx, self.grid.Nv, self.grid.Nv, self.grid.Nv)
        if self.values.shape != expected:
            raise InvalidInput(
                f"f has shape {self.values.shape}, expected {expected}"
            )

    def copy(self) -> "DistributionFunction":
        return DistributionFunction(self.grid, self.values.copy())

    def total_mass(self) -> float:
        return float(self.values.sum()) * self.grid.dx * self.grid.dv3


@dataclass
class ImposedField:
    """Static imposed tangential field profiles and their current.

    ``by_ghost``/``bz_ghost`` are the profile values at the ghost cell
    centers (-dx/2, L + dx/2); the imposed field need not vanish at the
    walls, so its ghost values come from the profile, not from reflection.
    """

    by: np.ndarray
    bz: np.ndarray
    by_ghost: tuple[float, float]
    bz_ghost: tuple[float, float]
    j_y: np.ndarray = field(init=False)
    j_z: np.ndarray = field(init=False)
    j_inf: float = field(init=False)

    def finalize(self, grid: PhaseSpaceGrid) -> None:
        """Precompute J_imp = curl B_imp with the interior central stencil."""
        by_ext = np.concatenate(([self.by_ghost[0]], self.by, [self.by_ghost[1]]))
        bz_ext = np.concatenate(([self.bz_ghost[0]], self.bz, [self.bz_ghost[1]]))
        inv2dx = 1.0 / (2.0 * grid.dx)
        self.j_z = (by_ext[2:] - by_ext[:-2]) * inv2dx
        self.j_y = -(bz_ext[2:] - bz_ext[:-2]) * inv2dx
        self.j_inf = float(np.max(np.hypot(self.j_y, self.j_z), initial=0.0))

    def sup_norm_1inf(self, grid: PhaseSpaceGrid) -> float:
        """max(|B_imp| + |B_imp'|), the W^{1,inf} size of the imposed field."""
        mag = np.sqrt(self.by ** 2 + self.bz ** 2)
        dmag = np.hypot(self.j_z, self.j_y)  # |B'| = |(By', Bz')|
        return float(np.max(mag + dmag))


@dataclass
class FieldState:
    """Magnetic field components, derived current, and electron density.

    ``by``/``bz`` are the dynamic tangential components: the full field in
    the homogeneous case, the perturbation when ``imposed`` is set.  The
    nodal current uses central differences in the interior and one-sided
    second-order differences at the wall nodes.
    """

    bx0: float
    by: np.ndarray
    bz: np.ndarray
    n_e: np.ndarray
    log_ne: np.ndarray
    j_y: np.ndarray
    j_z: np.ndarray
    imposed: Optional[ImposedField] = None

    @classmethod
    def uniform(cls, grid: PhaseSpaceGrid, bx0: float = 0.0) -> "FieldState":
        z = np.zeros(grid.Nx)
        return cls(
            bx0=bx0,
            by=z.copy(),
            bz=z.copy(),
            n_e=np.ones(grid.Nx),
            log_ne=z.copy(),
            j_y=z.copy(),
            j_z=z.copy(),
        )

    def refresh_current(self, grid: PhaseSpaceGrid) -> None:
        from .induction import compute_current

        self.j_y, self.j_z = compute_current(self, grid)

    def total_by(self) -> np.ndarray:
        if self.imposed is None:
            return self.by
        return self.by + self.imposed.by

    def total_bz(self) -> np.ndarray:
        if self.imposed is None:
            return self.bz
        return self.bz + self.imposed.bz

    def copy(self) -> "FieldState":
        return FieldState(
            bx0=self.bx0,
            by=self.by.copy(),
            bz=self.bz.copy(),
            n_e=self.n_e.copy(),
            log_ne=self.log_ne.copy(),
            j_y=self.j_y.copy(),
            j_z=self.j_z.copy(),
            imposed=self.imposed,
        )


LIE = "lie"
STRANG = "strang"


@dataclass
class RunConfig:
    """Physical constants, solver knobs, and output cadence for one run.

    The resistivity enters twice: nodal values for the Ohm-law diagnostic
    and face values (x = i dx, including the walls) for the implicit
    induction operator and the dissipation quadrature.
    """

    grid: PhaseSpaceGrid
    lambda_debye: float
    T_e: float
    eta_node: np.ndarray  # (Nx,)
    eta_face: np.ndarray  # (Nx+1,)
    bx0: float = 0.0
    dt: float = 0.01
    t_end: float = 1.0
    splitting_order: str = LIE
    theta: float = 1.0
    newton_tol: float = 1e-12
    linear_tol: float = 1e-10
    remap: RemapKernel = field(default_factory=RemapKernel)
    output_cadence: int = 1
    checkpoint_cadence: int = 0  # 0 disables periodic checkpoints
    seed: int = 0
    trace_stage_energies: bool = False  # per-stage energy snapshots (slower)

    def __post_init__(self) -> None:
        if self.lambda_debye <= 0:
            raise InvalidInput("lambda must be > 0")
        if self.T_e <= 0:
            raise InvalidInput("T_e must be > 0")
        eta_min = float(np.min(self.eta_face, initial=np.inf))
        eta_min = min(eta_min, float(np.min(self.eta_node)))
        if not (eta_min > 0 and np.all(np.isfinite(self.eta_node))):
            raise InvalidInput("resistivity must satisfy 0 < eta_min <= eta")
        if self.dt <= 0:
            raise InvalidInput("dt must be > 0")
        if not (0 < self.newton_tol < 1 and 0 < self.linear_tol < 1):
            raise InvalidInput("tolerances must lie in (0, 1)")
        if self.splitting_order not in (LIE, STRANG):
            raise InvalidInput("splitting_order must be 'lie' or 'strang'")
        if not (0.5 <= self.theta <= 1.0):
            raise InvalidInput("theta must lie in [1/2, 1]")
        if self.output_cadence < 1:
            raise InvalidInput("output cadence must be >= 1")

    @property
    def eta_min(self) -> float:
        return float(min(self.eta_node.min(), self.eta_face.min()))


def uniform_resistivity(grid: PhaseSpaceGrid, eta: float) -> tuple[np.ndarray, np.ndarray]:
    return np.full(grid.Nx, eta), np.full(grid.Nx + 1, eta)


@dataclass
class SimulationState:
    """Everything the time stepper owns: time, f, fields, and the ledger."""

    t: float
    f: DistributionFunction
    fields: FieldState
    ledger: "EnergyLedger | None" = None
    lost_mass: float = 0.0  # cumulative mass lost through the velocity box
    initial_mass: float = 0.0

    def copy(self) -> "SimulationState":
        import copy as _copy

        return SimulationState(
            t=self.t,
            f=self.f.copy(),
            fields=self.fields.copy(),
            ledger=_copy.deepcopy(self.ledger),
            lost_mass=self.lost_mass,
            initial_mass=self.initial_mass,
        )


def _gaussian_box_fraction(u: np.ndarray, v_max: float, temperature: float) -> np.ndarray:
    """Fraction of a drifting Maxwellian inside [-v_max, v_max]^3, per x."""
    s = math.sqrt(2.0 * temperature)
    erf = np.vectorize(math.erf)
    inside = np.ones(u.shape[0])
    for a in range(3):
        hi = (v_max - u[:, a]) / s
        lo = (-v_max - u[:, a]) / s
        inside *= 0.5 * (erf(hi) - erf(lo))
    return inside


def make_maxwellian(
    grid: PhaseSpaceGrid,
    density,
    temperature: float,
    drift=None,
    tail_tol: float = 1e-8,
) -> DistributionFunction:
    """Sample a (possibly drifting) Maxwellian on the phase-space grid.

    f(x, v) = density(x) (2 pi T)^{-3/2} exp(-|v - u(x)|^2 / (2 T))

    Raises TailTruncation when the analytic Gaussian mass outside the
    velocity box exceeds ``tail_tol`` of the total: that signals v_max is
    too small for this temperature/drift combination.
    """
    if temperature <= 0:
        raise InvalidInput("temperature must be > 0")
    dens = np.broadcast_to(np.asarray(density, dtype=float), (grid.Nx,)).copy()
    if np.any(dens < 0):
        raise InvalidInput("density must be nonnegative")
    if drift is None:
        drift = np.zeros(3)
    u = np.asarray(drift, dtype=float)
    if u.shape == (3,):
        u = np.broadcast_to(u, (grid.Nx, 3)).copy()
    if u.shape != (grid.Nx, 3):
        raise InvalidInput("drift must be a 3-vector or an (Nx, 3) profile")

    total = float(dens.sum())
    if total > 0:
        inside = _gaussian_box_fraction(u, grid.v_max, temperature)
        outside = float(np.sum(dens * (1.0 - inside))) / total
        if outside > tail_tol:
            raise TailTruncation(
                f"Gaussian mass fraction {outside:.3e} outside the velocity box "
                f"exceeds {tail_tol:.1e}; increase v_max"
            )

    norm = (2.0 * math.pi * temperature) ** -1.5
    v = grid.v_nodes
    # Separable Gaussian factors per axis keep this O(Nx * Nv) to set up.
    gx = np.exp(-((v[None, :] - u[:, 0:1]) ** 2) / (2.0 * temperature))
    gy = np.exp(-((v[None, :] - u[:, 1:2]) ** 2) / (2.0 * temperature))
    gz = np.exp(-((v[None, :] - u[:, 2:3]) ** 2) / (2.0 * temperature))
    values = (
        (dens * norm)[:, None, None, None]
        * gx[:, :, None, None]
        * gy[:, None, :, None]
        * gz[:, None, None, :]
    )
    return DistributionFunction(grid, values)


def validate_state(state: SimulationState, grid: Optional[PhaseSpaceGrid] = None) -> list[str]:
    """Return the list of violated state invariants (empty when valid)."""
    from .induction import compute_current

    g = grid if grid is not None else state.f.grid
    report: list[str] = []

    f = state.f.values
    if not np.all(np.isfinite(f)):
        report.append("f contains NaN or Inf")
    fmin = float(f.min())
    if fmin < 0:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(f)), f.shape))
        report.append(f"f negative at {idx}: {fmin:.3e}")

    fs = state.fields
    for name, arr in (("by", fs.by), ("bz", fs.bz), ("n_e", fs.n_e), ("log_ne", fs.log_ne)):
        if not np.all(np.isfinite(arr)):
            report.append(f"{name} contains NaN or Inf")
    if np.any(fs.n_e <= 0):
        i = int(np.argmin(fs.n_e))
        report.append(f"n_e not positive at node {i}: {fs.n_e[i]:.3e}")
    else:
        if not np.allclose(fs.log_ne, np.log(fs.n_e), rtol=0, atol=1e-13):
            report.append("log_ne inconsistent with ln(n_e)")

    jy, jz = compute_current(fs, g)
    scale = max(float(np.max(np.abs(jy), initial=0.0)), float(np.max(np.abs(jz), initial=0.0)), 1.0)
    if not (np.allclose(fs.j_y, jy, rtol=0, atol=1e-12 * scale)
            and np.allclose(fs.j_z, jz, rtol=0, atol=1e-12 * scale)):
        report.append("stored current inconsistent with curl B")

    if state.t < 0:
        report.append(f"t negative: {state.t}")
    return report
