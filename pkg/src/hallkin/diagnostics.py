"""Energy accounting and the analytic structure checks.

The total energy is

    E_tot = E_I + E_m + E_es + E_free,

with E_I the ion kinetic energy, E_m the magnetic energy (including the
constant axial component), E_es = lambda^2/2 int |(ln n_e)'|^2, and the
free energy E_free = int (n_e ln n_e - n_e + 1) >= 0.  With conducting
walls and eta >= eta_min > 0 the model dissipates:

    d/dt E_tot = - int eta |curl B|^2,

and the splitting scheme reproduces a per-step version of this identity;
``dissipation_residual`` measures how well.

With an imposed tangential boundary field, the state carries the
perturbation B_pert and the perturbed energy E_tot_pert (E_m replaced by
the perturbed magnetic energy) obeys the same balance up to a source S
proportional to the imposed current; ``horizon_estimate`` evaluates the
guaranteed-boundedness horizon T* = log(1 + C / ||J_imp||_inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .grid import RunConfig, SimulationState
from .moments import MomentSet, compute_moments
from .poisson import electrostatic_energy


@dataclass
class LedgerRow:
    t: float
    E_I: float
    E_m: float
    E_es: float
    E_free: float
    E_tot: float
    dissipation_step: float
    residual: float
    D_cum: float
    mass: float
    lost_mass: float
    min_f: float
    wall_u: float
    E_m_pert: Optional[float] = None
    E_tot_pert: Optional[float] = None
    source: Optional[float] = None
    balance_residual: Optional[float] = None


@dataclass
class EnergyLedger:
    """Time series of the energy terms and the cumulative dissipation."""

    rows: list[LedgerRow] = field(default_factory=list)

    @property
    def last(self) -> LedgerRow:
        return self.rows[-1]

    def append(self, row: LedgerRow) -> None:
        self.rows.append(row)


def compute_energies(state: SimulationState, config: RunConfig,
                     moms: Optional[MomentSet] = None) -> dict:
    """The four energy terms plus mass, evaluated on the current state."""
    g = config.grid
    fs = state.fields
    if moms is None:
        moms = compute_moments(state.f)

    E_I = float(moms.E_I_density.sum()) * g.dx
    by_t = fs.total_by()
    bz_t = fs.total_bz()
    E_m = 0.5 * float(((by_t * by_t + bz_t * bz_t).sum()) * g.dx + fs.bx0 ** 2 * g.L)
    E_es = electrostatic_energy(fs.log_ne, config.lambda_debye, g.dx)
    E_free = float(((fs.n_e * fs.log_ne - fs.n_e + 1.0)).sum() * g.dx)
    out = {
        "E_I": E_I,
        "E_m": E_m,
        "E_es": E_es,
        "E_free": E_free,
        "E_tot": E_I + E_m + E_es + E_free,
        "mass": float(moms.n_I.sum()) * g.dx,
    }
    if fs.imposed is not None:
        E_m_pert = 0.5 * float((fs.by * fs.by + fs.bz * fs.bz).sum()) * g.dx
        out["E_m_pert"] = E_m_pert
        out["E_tot_pert"] = E_I + E_m_pert + E_es + E_free
    return out


def append_ledger_row(
    state: SimulationState,
    config: RunConfig,
    dissipation_step: float,
    source_step: float = 0.0,
    moms: Optional[MomentSet] = None,
) -> LedgerRow:
    """Compute a ledger row for the current state and append it.

    ``dissipation_step`` is dt * sum eta |J^theta|^2 of the step just taken
    (0 for the initial row); in imposed mode it is the perturbation-current
    dissipation and ``source_step`` is dt * S at the implicit stage level.
    """
    from .vlasov import wall_normal_velocity

    energies = compute_energies(state, config, moms)
    ledger = state.ledger
    prev = ledger.rows[-1] if (ledger is not None and ledger.rows) else None

    residual = 0.0
    balance = None
    if prev is not None:
        residual = (energies["E_tot"] - prev.E_tot) + dissipation_step
        if "E_tot_pert" in energies and prev.E_tot_pert is not None:
            balance = (
                (energies["E_tot_pert"] - prev.E_tot_pert)
                + dissipation_step
                - source_step
            )

    u0, uL = wall_normal_velocity(state.f)
    row = LedgerRow(
        t=state.t,
        E_I=energies["E_I"],
        E_m=energies["E_m"],
        E_es=energies["E_es"],
        E_free=energies["E_free"],
        E_tot=energies["E_tot"],
        dissipation_step=dissipation_step,
        residual=residual,
        D_cum=(prev.D_cum if prev else 0.0) + dissipation_step,
        mass=energies["mass"],
        lost_mass=state.lost_mass,
        min_f=float(state.f.values.min()),
        wall_u=max(abs(u0), abs(uL)),
        E_m_pert=energies.get("E_m_pert"),
        E_tot_pert=energies.get("E_tot_pert"),
        source=source_step if state.fields.imposed is not None else None,
        balance_residual=balance,
    )
    if ledger is not None:
        ledger.append(row)
    return row


def dissipation_residual(ledger: EnergyLedger, k: int = -1) -> float:
    """Residual of the per-step dissipation identity at step k.

    r = (E_tot(t_{k+1}) - E_tot(t_k)) + dt sum eta |J^theta|^2; the contract
    is |r| <= C (dt^2 + dx^2 + dv^2), and r <= 0 up to round-off for the
    backward-Euler stage with homogeneous boundaries.
    """
    if len(ledger.rows) < 2:
        raise InvalidInput("need two ledger rows for a residual")
    return ledger.rows[k].residual


def horizon_estimate(j_imp_inf: float, c_data: float) -> float:
    """Guaranteed perturbed-energy horizon T* = log(1 + C / ||J_imp||_inf).

    Returns +inf for a current-free imposed field, where the source
    vanishes and the perturbed energy is bounded for all time.  The data
    constant C is not constructive; callers supply it.
    """
    if c_data <= 0:
        raise InvalidInput("c_data must be > 0")
    if j_imp_inf < 0:
        raise InvalidInput("j_imp_inf must be >= 0")
    if j_imp_inf == 0.0:
        return math.inf
    return math.log1p(c_data / j_imp_inf)


def compute_perturbed_source(state: SimulationState, config: RunConfig,
                             moms: Optional[MomentSet] = None) -> tuple[float, tuple]:
    """Instantaneous imposed-field energy source S on the current state.

    Every term is proportional to the imposed current, so a uniform
    imposed field yields S = 0 exactly (not merely small).
    """
    fs = state.fields
    if fs.imposed is None:
        raise InvalidInput("perturbed source requires an imposed field")
    if moms is None:
        moms = compute_moments(state.f)
    g = config.grid
    imp = fs.imposed

    if not (np.any(imp.j_y) or np.any(imp.j_z)):
        return 0.0, (0.0, 0.0, 0.0)

    inv_ne = 1.0 / fs.n_e
    s1 = -float((config.eta_node * (imp.j_y * fs.j_y + imp.j_z * fs.j_z)).sum() * g.dx)

    jimp3 = np.stack([np.zeros(g.Nx), imp.j_y, imp.j_z], axis=1)
    b_tot = np.stack([np.full(g.Nx, fs.bx0), fs.total_by(), fs.total_bz()], axis=1)
    cross = np.cross(jimp3, b_tot) * inv_ne[:, None]

    jp3 = np.stack([np.zeros(g.Nx), fs.j_y, fs.j_z], axis=1)
    s2 = -float((cross * jp3).sum() * g.dx)
    s3 = float((cross * moms.nu_I).sum() * g.dx)
    return s1 + s2 + s3, (s1, s2, s3)


def second_moment_row(f_values: np.ndarray, v: np.ndarray, dv3: float) -> np.ndarray:
    """Momentum-flux row S_xa = int f v_x v_a dv, shape (Nx, 3)."""
    sxx = np.einsum("xabc,a,a->x", f_values, v, v) * dv3
    sxy = np.einsum("xabc,a,b->x", f_values, v, v) * dv3
    sxz = np.einsum("xabc,a,c->x", f_values, v, v) * dv3
    return np.stack([sxx, sxy, sxz], axis=1)


def pressure_tensor_row(state: SimulationState) -> np.ndarray:
    """Ion pressure row P_xa = int f (v_x - u_x)(v_a - u_a) dv."""
    g = state.f.grid
    moms = compute_moments(state.f)
    s_row = second_moment_row(state.f.values, g.v_nodes, g.dv3)
    u = moms.u_I()
    return s_row - moms.n_I[:, None] * u[:, 0:1] * u


def momentum_residual(
    before: SimulationState,
    after: SimulationState,
    dt: float,
    config: RunConfig,
) -> np.ndarray:
    """Nodewise residual of the ion momentum balance across one step.

    LHS - RHS of
      d(nu)/dt + d/dx(S_x.) + T_e grad(n_e) e_x - J x B
        = ((n_e - n_I)/n_e) [T_e grad(n_e) e_x + (nu - J) x B],
    where S_x. is the full momentum-flux row (bulk plus pressure).  Spatial
    terms are averaged between the two states; a consistency diagnostic of
    order O(dt + dx^2 + dv^2), not an invariant.
    """
    g = config.grid

    def ddx(a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        inv2dx = 1.0 / (2.0 * g.dx)
        out[1:-1] = (a[2:] - a[:-2]) * inv2dx
        out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) * inv2dx
        out[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) * inv2dx
        return out

    def spatial_terms(st: SimulationState, moms: MomentSet) -> np.ndarray:
        fs = st.fields
        s_row = second_moment_row(st.f.values, g.v_nodes, g.dv3)
        flux_div = np.stack([ddx(s_row[:, a]) for a in range(3)], axis=1)

        grad_ne = ddx(fs.n_e)
        pressure = np.zeros((g.Nx, 3))
        pressure[:, 0] = config.T_e * grad_ne

        jy = fs.j_y + (fs.imposed.j_y if fs.imposed is not None else 0.0)
        jz = fs.j_z + (fs.imposed.j_z if fs.imposed is not None else 0.0)
        J = np.stack([np.zeros(g.Nx), jy, jz], axis=1)
        B = np.stack([np.full(g.Nx, fs.bx0), fs.total_by(), fs.total_bz()], axis=1)
        jxb = np.cross(J, B)

        coeff = ((fs.n_e - moms.n_I) / fs.n_e)[:, None]
        rhs = coeff * (pressure + np.cross(moms.nu_I - J, B))
        return flux_div + pressure - jxb - rhs

    moms0 = compute_moments(before.f)
    moms1 = compute_moments(after.f)
    dnu_dt = (moms1.nu_I - moms0.nu_I) / dt
    avg = 0.5 * (spatial_terms(before, moms0) + spatial_terms(after, moms1))
    return dnu_dt + avg
