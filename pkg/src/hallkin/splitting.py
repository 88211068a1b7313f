"""Operator splitting: Vlasov-Poisson stage, two magnetic stages, stepper.

One time step advances the state through

  1. a nonlinear Vlasov-Poisson stage (B untouched): half an x advection,
     an electron-pressure velocity kick with a freshly solved n_e, the
     second half advection, and a final Poisson solve that freezes the
     electron density the magnetic stages will see;

  2. the frozen-field magnetic stage: the implicit linear solve for
     (By, Bz, M) with (n_I, n_e, B_frozen) held fixed, followed by the
     velocity translation (M x B_frozen)/n_e of f.  n_I is untouched
     (the force is velocity-independent), so the electron quantities stay
     frozen and the stage strictly dissipates;

  3. the rotation stage: B, n_I, n_e frozen; the ion momentum precesses
     exactly about d = (1 - n_I/n_e) B and f rotates about B around the
     midpoint drift.  Energy is conserved here up to remap error.

Lie composition runs 1-2-3 per step; Strang symmetrizes with half-steps on
the outer stages, keeping the only dissipative stage central.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import EnergyLedger, LedgerRow, append_ledger_row, compute_energies
from .grid import LIE, STRANG, RunConfig, SimulationState
from .induction import solve_stage1
from .moments import compute_moments
from .poisson import solve_log_ne
from .vlasov import advect_x, ion_momentum_rotation, rotate_v, shift_v


@dataclass
class StageTrace:
    name: str
    dt: float
    energies_before: dict
    energies_after: dict
    wall_time: float
    extras: dict = field(default_factory=dict)


@dataclass
class StepTrace:
    stages: list[StageTrace]
    row: Optional[LedgerRow] = None

    @property
    def dissipation_step(self) -> float:
        return sum(s.extras.get("dissipation_step", 0.0) for s in self.stages)

    @property
    def source_step(self) -> float:
        return sum(s.extras.get("source_step", 0.0) for s in self.stages)


def _pressure_kick(state: SimulationState, config: RunConfig, dt: float) -> np.ndarray:
    """Velocity kick -(T_e/n_e) grad(n_e) dt, an x-directed 3-vector per node."""
    g = config.grid
    ne = state.fields.n_e
    grad = np.empty_like(ne)
    inv2dx = 1.0 / (2.0 * g.dx)
    grad[1:-1] = (ne[2:] - ne[:-2]) * inv2dx
    grad[0] = (ne[1] - ne[0]) * inv2dx  # even ghosts: zero-flux walls
    grad[-1] = (ne[-1] - ne[-2]) * inv2dx
    delta = np.zeros((g.Nx, 3))
    delta[:, 0] = -config.T_e * grad / ne * dt
    return delta


def _refresh_electrons(state: SimulationState, config: RunConfig, n_I: np.ndarray) -> None:
    sol = solve_log_ne(
        n_I, config.lambda_debye, config.newton_tol, config.grid.dx,
        u0=state.fields.log_ne,
    )
    state.fields.log_ne = sol.log_ne
    state.fields.n_e = sol.n_e


def stage_vlasov_poisson(state: SimulationState, dt: float, config: RunConfig) -> StageTrace:
    """Nonlinear Vlasov-Poisson stage; the magnetic field is untouched."""
    t0 = time.perf_counter()
    before = compute_energies(state, config) if config.trace_stage_energies else {}

    state.f = advect_x(state.f, 0.5 * dt, config.remap)
    moms = compute_moments(state.f)
    _refresh_electrons(state, config, moms.n_I)

    kick = _pressure_kick(state, config, dt)
    state.f, lost = shift_v(state.f, kick, config.remap)
    state.lost_mass += lost

    state.f = advect_x(state.f, 0.5 * dt, config.remap)
    moms = compute_moments(state.f)
    # Freeze the electron density consistent with the stage-exit n_I: the
    # magnetic stages hold it fixed, so the ledger's electron terms are
    # exactly constant through them.
    _refresh_electrons(state, config, moms.n_I)

    after = compute_energies(state, config, moms) if config.trace_stage_energies else {}
    return StageTrace(
        name="vlasov_poisson",
        dt=dt,
        energies_before=before,
        energies_after=after,
        wall_time=time.perf_counter() - t0,
        extras={"lost_mass": lost},
    )


def stage_magnetic_1(state: SimulationState, dt: float, config: RunConfig) -> StageTrace:
    """Frozen-field implicit induction solve plus the kinetic velocity shift."""
    t0 = time.perf_counter()
    before = compute_energies(state, config) if config.trace_stage_energies else {}
    g = config.grid
    fs = state.fields

    moms = compute_moments(state.f)
    b_frozen = np.stack([np.full(g.Nx, fs.bx0), fs.total_by(), fs.total_bz()], axis=1)

    frozen = {"n_I": moms.n_I.copy(), "n_e": fs.n_e.copy(), "b_frozen": b_frozen}
    res = solve_stage1(fs, moms, b_frozen, dt, config)
    fs.by = res.by
    fs.bz = res.bz
    fs.refresh_current(g)

    state.f, lost = shift_v(state.f, res.delta_v, config.remap)
    state.lost_mass += lost

    after = compute_energies(state, config) if config.trace_stage_energies else {}
    return StageTrace(
        name="magnetic_1",
        dt=dt,
        energies_before=before,
        energies_after=after,
        wall_time=time.perf_counter() - t0,
        extras={
            "dissipation_step": dt * res.dissipation_theta,
            "source_step": dt * res.source_theta if res.source_theta is not None else 0.0,
            "lost_mass": lost,
            "linear_residual": res.linear_residual,
            "m_final": res.m_final,
            "nu_new": res.nu_new,
            "delta_v_max": float(np.max(np.abs(res.delta_v))),
            "frozen": frozen,
        },
    )


def stage_magnetic_2(state: SimulationState, dt: float, config: RunConfig) -> StageTrace:
    """Velocity rotation about the frozen field; B is not written at all."""
    t0 = time.perf_counter()
    before = compute_energies(state, config) if config.trace_stage_energies else {}
    g = config.grid
    fs = state.fields

    moms = compute_moments(state.f)
    b_tot = np.stack([np.full(g.Nx, fs.bx0), fs.total_by(), fs.total_bz()], axis=1)
    inv_ne = 1.0 / fs.n_e
    d = (1.0 - moms.n_I * inv_ne)[:, None] * b_tot
    frozen = {"n_I": moms.n_I.copy(), "n_e": fs.n_e.copy(), "b_frozen": b_tot}

    nu_half = ion_momentum_rotation(moms.nu_I, d, 0.5 * dt)
    nu_full = ion_momentum_rotation(moms.nu_I, d, dt)
    drift_mid = nu_half * inv_ne[:, None]

    state.f, lost = rotate_v(state.f, b_tot, drift_mid, dt, config.remap)
    state.lost_mass += lost

    # Exact-rotation invariants of the analytic momentum update.
    mag0 = np.sqrt((moms.nu_I ** 2).sum(axis=1))
    mag1 = np.sqrt((nu_full ** 2).sum(axis=1))
    dmag = np.sqrt((d * d).sum(axis=1))
    dhat = d / np.maximum(dmag, 1e-300)[:, None]
    proj_drift = ((nu_full - moms.nu_I) * dhat).sum(axis=1)

    after = compute_energies(state, config) if config.trace_stage_energies else {}
    return StageTrace(
        name="magnetic_2",
        dt=dt,
        energies_before=before,
        energies_after=after,
        wall_time=time.perf_counter() - t0,
        extras={
            "lost_mass": lost,
            "momentum_norm_drift": float(np.max(np.abs(mag1 - mag0))),
            "momentum_dproj_drift": float(np.max(np.abs(proj_drift))),
            "frozen": frozen,
        },
    )


def step(state: SimulationState, dt: float, config: RunConfig,
         order: Optional[str] = None) -> StepTrace:
    """Advance one time step with Lie or Strang composition and log a ledger row."""
    order = config.splitting_order if order is None else order
    stages: list[StageTrace] = []

    if order == LIE:
        stages.append(stage_vlasov_poisson(state, dt, config))
        stages.append(stage_magnetic_1(state, dt, config))
        stages.append(stage_magnetic_2(state, dt, config))
    elif order == STRANG:
        stages.append(stage_vlasov_poisson(state, 0.5 * dt, config))
        stages.append(stage_magnetic_2(state, 0.5 * dt, config))
        stages.append(stage_magnetic_1(state, dt, config))
        stages.append(stage_magnetic_2(state, 0.5 * dt, config))
        stages.append(stage_vlasov_poisson(state, 0.5 * dt, config))
    else:
        raise ValueError(f"unknown splitting order {order!r}")

    state.t += dt
    trace = StepTrace(stages=stages)
    trace.row = append_ledger_row(
        state, config,
        dissipation_step=trace.dissipation_step,
        source_step=trace.source_step,
    )
    return trace


def initialize_state(f, fields, config: RunConfig, t: float = 0.0) -> SimulationState:
    """Assemble a consistent SimulationState: electrons solved, currents set,
    ledger seeded with the initial row."""
    state = SimulationState(t=t, f=f, fields=fields, ledger=EnergyLedger())
    moms = compute_moments(f)
    sol = solve_log_ne(moms.n_I, config.lambda_debye, config.newton_tol, config.grid.dx)
    fields.log_ne = sol.log_ne
    fields.n_e = sol.n_e
    fields.refresh_current(config.grid)
    state.initial_mass = f.total_mass()
    append_ledger_row(state, config, dissipation_step=0.0, moms=moms)
    return state
