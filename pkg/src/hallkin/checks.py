"""Named invariant suites behind the ``check`` subcommand.

Each suite exercises one module's analytical structure on randomized or
manufactured inputs and reports measured values against tolerances.  The
pytest tree covers the same ground in more depth; these suites are the
runtime-facing verification entry point and keep to a few seconds each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import horizon_estimate
from .grid import (
    DistributionFunction,
    FieldState,
    PhaseSpaceGrid,
    RunConfig,
    make_maxwellian,
    uniform_resistivity,
)
from .induction import solve_stage1
from .moments import check_moment_inequalities, moment_bound_constants
from .poisson import check_two_sided_bound, solve_log_ne
from .remap import RemapKernel
from .splitting import initialize_state, step
from .vlasov import advect_x, rotate_v, shift_v

SUITES = ("moments", "poisson", "induction", "vlasov", "splitting",
          "energy", "perturbed", "all")


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: str
    passed: bool


def _config(grid, eta=0.1, **kw) -> RunConfig:
    eta_n, eta_f = uniform_resistivity(grid, eta)
    return RunConfig(grid=grid, lambda_debye=0.5, T_e=1.0,
                     eta_node=eta_n, eta_face=eta_f, **kw)


def check_moments(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    g = PhaseSpaceGrid(L=1.0, Nx=4, v_max=4.0, Nv=8)
    worst = 0.0
    for _ in range(1000):
        vals = rng.random((g.Nx, g.Nv, g.Nv, g.Nv))
        rep = check_moment_inequalities(DistributionFunction(g, vals))
        worst = max(worst, rep.lhs53 / rep.rhs53, rep.lhs54 / rep.rhs54)
    C, Cp = moment_bound_constants()
    c_err = abs(C - (4 * np.pi / 3) ** 0.4 * ((2 / 3) ** 0.6 + 1.5 ** 0.4))
    cp_err = abs(Cp - np.pi ** 0.2 * (4.0 ** -0.8 + 4.0 ** 0.2))
    return [
        CheckResult("moment inequalities, worst ratio (1000 draws)", worst,
                    "<= 1", worst <= 1.0),
        CheckResult("density bound constant vs closed form", c_err,
                    "<= 1e-12", c_err <= 1e-12),
        CheckResult("momentum bound constant vs closed form", cp_err,
                    "<= 1e-12", cp_err <= 1e-12),
    ]


def check_poisson(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    lam = 0.3

    def manufactured_err(nx):
        dx = 1.0 / nx
        x = (np.arange(nx) + 0.5) * dx
        u_star = 0.1 * np.cos(np.pi * x)
        n_I = np.exp(u_star) + lam ** 2 * 0.1 * np.pi ** 2 * np.cos(np.pi * x)
        sol = solve_log_ne(n_I, lam, 1e-12, dx)
        return np.abs(sol.log_ne - u_star).max()

    ratio = manufactured_err(64) / manufactured_err(128)

    worst_neutral = 0.0
    worst_norm = -1e30
    all_positive = True
    dx = 1.0 / 48
    x = (np.arange(48) + 0.5) * dx
    for _ in range(50):
        coeffs = rng.normal(size=4) * 0.3
        n_I = np.clip(1.0 + sum(c * np.cos((k + 1) * np.pi * x)
                                for k, c in enumerate(coeffs)), 0.05, None)
        sol = solve_log_ne(n_I, rng.uniform(0.1, 1.0), 1e-12, dx)
        worst_neutral = max(worst_neutral, abs((sol.n_e - n_I).sum() * dx))
        rep = check_two_sided_bound(sol, n_I, dx)
        worst_norm = max(worst_norm, rep.norm53_ne - rep.norm53_nI * (1 + 1e-10))
        all_positive = all_positive and rep.min_ne > 0
    return [
        CheckResult("manufactured-solution error ratio (dx halving)", ratio,
                    "in [3.5, 4.5]", 3.5 <= ratio <= 4.5),
        CheckResult("worst neutrality defect (50 random solves)", worst_neutral,
                    "<= 1e-10", worst_neutral <= 1e-10),
        CheckResult("5/3-norm comparison defect (50 random solves)", worst_norm,
                    "<= 0", worst_norm <= 0.0),
        CheckResult("min n_e positive on all solves", float(all_positive),
                    "== 1", all_positive),
    ]


def check_induction(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    g = PhaseSpaceGrid(L=1.0, Nx=24, v_max=4.0, Nv=4)
    cfg = _config(g, eta=0.2)
    x = g.x_centers
    from .moments import MomentSet

    def fields_with(by, bz, ne):
        fs = FieldState.uniform(g)
        fs.by, fs.bz = by, bz
        fs.n_e, fs.log_ne = ne, np.log(ne)
        fs.refresh_current(g)
        return fs

    # backward-Euler resistive identity
    fs = fields_with(np.sin(np.pi * x), 0.2 * np.sin(2 * np.pi * x), np.ones(g.Nx))
    moms = MomentSet(np.ones(g.Nx), np.zeros((g.Nx, 3)), np.zeros(g.Nx))
    res = solve_stage1(fs, moms, np.zeros((g.Nx, 3)), 0.02, cfg)
    em0 = 0.5 * ((fs.by ** 2 + fs.bz ** 2).sum()) * g.dx
    em1 = 0.5 * ((res.by ** 2 + res.bz ** 2).sum()) * g.dx
    dnorm = 0.5 * (((res.by - fs.by) ** 2 + (res.bz - fs.bz) ** 2).sum()) * g.dx
    ident = abs((em1 - em0) + 0.02 * res.dissipation_theta + dnorm)

    # superposition of the linear stage
    ne = 1.0 + 0.3 * rng.random(g.Nx)
    b_frozen = np.stack([np.full(g.Nx, 0.5),
                         0.3 * np.sin(np.pi * x), 0.1 * np.cos(np.pi * x)], axis=1)

    def run(by, bz, nuk):
        fs2 = fields_with(by, bz, ne)
        m2 = MomentSet(np.ones(g.Nx), nuk, np.zeros(g.Nx))
        r = solve_stage1(fs2, m2, b_frozen, 0.03, cfg)
        return np.concatenate([r.by, r.bz, r.m_final.ravel()])

    by1, bz1, by2, bz2 = rng.normal(size=(4, g.Nx))
    nu1, nu2 = rng.normal(size=(2, g.Nx, 3))
    combo = run(0.6 * by1 - 1.3 * by2, 0.6 * bz1 - 1.3 * bz2, 0.6 * nu1 - 1.3 * nu2)
    parts = 0.6 * run(by1, bz1, nu1) - 1.3 * run(by2, bz2, nu2)
    sup_err = np.abs(combo - parts).max()

    return [
        CheckResult("backward-Euler resistive energy identity", ident,
                    "<= 1e-13", ident <= 1e-13),
        CheckResult("stage-1 superposition defect", sup_err,
                    "<= 1e-10", sup_err <= 1e-10),
    ]


def check_vlasov(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    kernel = RemapKernel()
    g = PhaseSpaceGrid(L=1.0, Nx=16, v_max=6.0, Nv=16)
    f = make_maxwellian(g, 1.0 + 0.3 * np.cos(2 * np.pi * g.x_centers / g.L), 1.0)

    out = advect_x(f, 0.07, kernel)
    adv_mass = abs(out.total_mass() - f.total_mass()) / f.total_mass()

    dv = np.zeros((g.Nx, 3))
    dv[:, 0] = 0.01 * rng.normal(size=g.Nx)
    out2, lost2 = shift_v(f, dv, kernel)
    shift_mass = abs(out2.total_mass() + lost2 - f.total_mass()) / f.total_mass()

    b = np.column_stack([np.full(g.Nx, 0.3),
                         0.2 * np.sin(np.pi * g.x_centers), np.zeros(g.Nx)])
    out3, lost3 = rotate_v(f, b, None, 0.05, kernel)
    rot_mass = abs(out3.total_mass() + lost3 - f.total_mass()) / f.total_mass()
    min_f = min(out.values.min(), out2.values.min(), out3.values.min())

    return [
        CheckResult("advection mass defect (relative)", adv_mass,
                    "<= 1e-12", adv_mass <= 1e-12),
        CheckResult("velocity-shift mass defect (relative)", shift_mass,
                    "<= 1e-12", shift_mass <= 1e-12),
        CheckResult("rotation mass defect (relative)", rot_mass,
                    "<= 1e-12", rot_mass <= 1e-12),
        CheckResult("min f after transport", min_f, ">= 0", min_f >= 0.0),
    ]


def check_splitting(seed: int = 0) -> list[CheckResult]:
    g = PhaseSpaceGrid(L=1.0, Nx=16, v_max=6.0, Nv=16)
    cfg = _config(g, eta=0.1, dt=0.01)
    f = make_maxwellian(g, 1.0, 1.0)
    state = initialize_state(f, FieldState.uniform(g), cfg)
    r0 = state.ledger.rows[0]
    for _ in range(20):
        step(state, cfg.dt, cfg)
    drift = max(abs(r.E_tot - r0.E_tot) for r in state.ledger.rows)
    mass_drift = max(abs(r.mass + r.lost_mass - r0.mass) for r in state.ledger.rows)
    return [
        CheckResult("equilibrium fixed-point E_tot drift (20 steps)", drift,
                    "<= 1e-12", drift <= 1e-12),
        CheckResult("equilibrium mass drift (20 steps)", mass_drift,
                    "<= 1e-12", mass_drift <= 1e-12),
    ]


def check_energy(seed: int = 0) -> list[CheckResult]:
    g = PhaseSpaceGrid(L=1.0, Nx=32, v_max=6.0, Nv=24)
    cfg = _config(g, eta=0.1, dt=0.01, theta=1.0)
    f = make_maxwellian(g, 1.0, 1.0)
    fields = FieldState.uniform(g)
    fields.by = 0.1 * np.sin(np.pi * g.x_centers / g.L)
    state = initialize_state(f, fields, cfg)
    worst = -np.inf
    min_f = np.inf
    for _ in range(100):
        step(state, cfg.dt, cfg)
        rows = state.ledger.rows
        worst = max(worst, rows[-1].E_tot - rows[-2].E_tot)
        min_f = min(min_f, rows[-1].min_f)
    m0 = state.ledger.rows[0]
    mass_defect = abs(state.ledger.last.mass + state.ledger.last.lost_mass - m0.mass) / m0.mass
    return [
        CheckResult("worst per-step E_tot increase (100 steps)", worst,
                    "<= 1e-10", worst <= 1e-10),
        CheckResult("min f over run", min_f, ">= 0", min_f >= 0.0),
        CheckResult("relative mass defect (with reported loss)", mass_defect,
                    "<= 1e-12", mass_defect <= 1e-12),
    ]


def check_perturbed(seed: int = 0) -> list[CheckResult]:
    from .diagnostics import compute_perturbed_source
    from .grid import ImposedField

    g = PhaseSpaceGrid(L=1.0, Nx=24, v_max=6.0, Nv=16)
    cfg = _config(g, eta=0.1, dt=0.01, theta=1.0)

    # uniform imposed field: source exactly zero, perturbed energy monotone
    imp = ImposedField(by=np.full(g.Nx, 0.6), bz=np.zeros(g.Nx),
                       by_ghost=(0.6, 0.6), bz_ghost=(0.0, 0.0))
    imp.finalize(g)
    f = make_maxwellian(g, 1.0, 1.0)
    fields = FieldState.uniform(g)
    fields.by = 0.08 * np.sin(np.pi * g.x_centers / g.L)
    fields.imposed = imp
    state = initialize_state(f, fields, cfg)
    s0, _ = compute_perturbed_source(state, cfg)
    worst = -np.inf
    for _ in range(50):
        step(state, cfg.dt, cfg)
        rows = state.ledger.rows
        worst = max(worst, rows[-1].E_tot_pert - rows[-2].E_tot_pert)
        worst_s = abs(rows[-1].source)
    t_star = horizon_estimate(1.0, 1.0)
    return [
        CheckResult("source S with uniform imposed field", abs(s0) + worst_s,
                    "== 0", (abs(s0) + worst_s) == 0.0),
        CheckResult("worst perturbed-energy increase (J_imp = 0)", worst,
                    "<= 1e-10", worst <= 1e-10),
        CheckResult("horizon T*(1, 1) vs log 2", abs(t_star - np.log(2.0)),
                    "<= 1e-14", abs(t_star - np.log(2.0)) <= 1e-14),
    ]


_SUITE_FUNCS = {
    "moments": check_moments,
    "poisson": check_poisson,
    "induction": check_induction,
    "vlasov": check_vlasov,
    "splitting": check_splitting,
    "energy": check_energy,
    "perturbed": check_perturbed,
}


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name == "all":
        out: list[CheckResult] = []
        for key in _SUITE_FUNCS:
            out.extend(_SUITE_FUNCS[key](seed))
        return out
    if name not in _SUITE_FUNCS:
        raise KeyError(f"unknown suite {name!r}; choose from {SUITES}")
    return _SUITE_FUNCS[name](seed)
