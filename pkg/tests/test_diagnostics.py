"""Energy ledger, dissipation residual, perturbed source, horizon, momentum."""

import math

import numpy as np
import pytest

from hallkin import (
    FieldState,
    ImposedField,
    InvalidInput,
    PhaseSpaceGrid,
    make_maxwellian,
)
from hallkin.diagnostics import (
    compute_energies,
    compute_perturbed_source,
    horizon_estimate,
    momentum_residual,
    pressure_tensor_row,
)
from hallkin.splitting import initialize_state, step
from conftest import equilibrium_state, make_config, perturbed_state, small_grid


def _imposed_uniform(grid, by0=0.5, bz0=0.0):
    imp = ImposedField(
        by=np.full(grid.Nx, by0),
        bz=np.full(grid.Nx, bz0),
        by_ghost=(by0, by0),
        bz_ghost=(bz0, bz0),
    )
    imp.finalize(grid)
    return imp


def _imposed_profile(grid, amp=0.1):
    x = grid.x_centers
    L = grid.L
    prof = amp * np.sin(np.pi * x / L)
    gl = amp * math.sin(np.pi * (-0.5 * grid.dx) / L)
    gr = amp * math.sin(np.pi * (L + 0.5 * grid.dx) / L)
    imp = ImposedField(
        by=prof, bz=np.zeros(grid.Nx), by_ghost=(gl, gr), bz_ghost=(0.0, 0.0)
    )
    imp.finalize(grid)
    return imp


class TestEnergies:
    def test_free_energy_zero_at_unit_density(self):
        g = small_grid()
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        st.fields.n_e = np.ones(g.Nx)
        st.fields.log_ne = np.zeros(g.Nx)
        e = compute_energies(st, cfg)
        assert e["E_free"] == 0.0
        assert e["E_es"] == 0.0

    def test_kinetic_energy_of_maxwellian(self):
        g = PhaseSpaceGrid(L=2.0, Nx=8, v_max=6.0, Nv=32)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        e = compute_energies(st, cfg)
        # (3/2) n T per unit length
        assert e["E_I"] == pytest.approx(1.5 * g.L, rel=1e-5)

    def test_magnetic_energy_constant_field(self):
        g = small_grid(Nx=10)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        st.fields.by = np.full(g.Nx, 0.2)
        e = compute_energies(st, cfg)
        assert e["E_m"] == pytest.approx(0.02, rel=1e-13)

    def test_axial_component_included(self):
        g = small_grid(Nx=10)
        cfg = make_config(g, bx0=0.3)
        st = equilibrium_state(g, cfg, bx0=0.3)
        e = compute_energies(st, cfg)
        assert e["E_m"] == pytest.approx(0.5 * 0.3 ** 2 * g.L, rel=1e-13)

    def test_free_energy_nonnegative(self, rng):
        g = small_grid()
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        for _ in range(20):
            ne = rng.uniform(0.1, 3.0, size=g.Nx)
            st.fields.n_e = ne
            st.fields.log_ne = np.log(ne)
            assert compute_energies(st, cfg)["E_free"] >= 0.0


class TestDissipationResidual:
    def test_equilibrium_residual_zero(self):
        g = small_grid(Nx=8, Nv=8)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        for _ in range(3):
            step(st, cfg.dt, cfg)
        for row in st.ledger.rows[1:]:
            assert abs(row.residual) < 1e-12

    def test_resistive_residual_nonpositive(self):
        g = small_grid(Nx=24, Nv=24)
        cfg = make_config(g, eta=0.2, theta=1.0)
        st = perturbed_state(g, cfg, amp=0.2)
        for _ in range(5):
            step(st, cfg.dt, cfg)
        for row in st.ledger.rows[1:]:
            assert row.residual <= 1e-10
            assert row.dissipation_step > 0


class TestHorizon:
    def test_log_two(self):
        assert horizon_estimate(1.0, 1.0) == pytest.approx(math.log(2.0), abs=1e-14)

    def test_current_free_is_unbounded(self):
        assert horizon_estimate(0.0, 2.5) == math.inf

    def test_monotone_in_imposed_current(self):
        t1 = horizon_estimate(1.0, 1.0)
        t2 = horizon_estimate(0.5, 1.0)
        assert t2 > t1

    def test_invalid_constant(self):
        with pytest.raises(InvalidInput):
            horizon_estimate(1.0, 0.0)
        with pytest.raises(InvalidInput):
            horizon_estimate(-1.0, 1.0)


class TestPerturbedSource:
    def test_uniform_imposed_field_source_identically_zero(self):
        g = small_grid(Nx=12, Nv=8)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        st.fields.imposed = _imposed_uniform(g, by0=0.7)
        st.fields.by = 0.1 * np.sin(np.pi * g.x_centers)
        st.fields.refresh_current(g)
        s, parts = compute_perturbed_source(st, cfg)
        assert s == 0.0 and parts == (0.0, 0.0, 0.0)

    def test_no_perturbation_no_flow_source_zero(self):
        g = small_grid(Nx=12, Nv=8)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        st.fields.imposed = _imposed_profile(g)
        st.fields.by[:] = 0.0
        st.fields.refresh_current(g)
        s, _ = compute_perturbed_source(st, cfg)
        assert s == pytest.approx(0.0, abs=1e-15)

    def test_requires_imposed_mode(self):
        g = small_grid(Nx=8, Nv=8)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        with pytest.raises(InvalidInput):
            compute_perturbed_source(st, cfg)


class TestMomentumResidual:
    def test_uniform_equilibrium_residual_tiny(self):
        g = small_grid(Nx=12, Nv=12)
        cfg = make_config(g)
        st = equilibrium_state(g, cfg)
        before = st.copy()
        step(st, cfg.dt, cfg)
        r = momentum_residual(before, st, cfg.dt, cfg)
        assert np.abs(r).max() < 1e-12

    def test_quasineutral_rhs_shrinks_with_lambda(self):
        """The momentum-balance right side scales with n_e - n_I ~ lambda^2.

        The density perturbation must respect the zero-flux walls (cosine),
        otherwise an O(lambda) boundary layer hides the interior scaling.
        """
        g = PhaseSpaceGrid(L=1.0, Nx=64, v_max=6.0, Nv=12)
        norms = []
        for lam in (0.05, 0.025):
            cfg = make_config(g, lam=lam, dt=1e-3)
            prof = 1.0 + 0.2 * np.cos(2 * np.pi * g.x_centers)
            f = make_maxwellian(g, prof, 1.0)
            fields = FieldState.uniform(g)
            st = initialize_state(f, fields, cfg)
            norms.append(np.abs(st.fields.n_e - prof).max())
        assert norms[0] / norms[1] == pytest.approx(4.0, rel=0.3)

    def test_second_order_under_spatial_refinement(self):
        """One tiny step on a smooth state: the balance residual is dominated
        by the O(dx^2 + dv^2) discretization error."""

        def resid(nx, nv):
            g = PhaseSpaceGrid(L=1.0, Nx=nx, v_max=8.0, Nv=nv)
            cfg = make_config(g, dt=1e-4, eta=0.1)
            x = g.x_centers
            f = make_maxwellian(
                g,
                1.0 + 0.3 * np.sin(2 * np.pi * x),
                1.0,
                drift=np.column_stack([
                    0.2 * np.sin(2 * np.pi * x),
                    np.zeros(nx),
                    np.zeros(nx),
                ]),
            )
            fields = FieldState.uniform(g)
            fields.by = 0.2 * np.sin(np.pi * x)
            st = initialize_state(f, fields, cfg)
            before = st.copy()
            step(st, cfg.dt, cfg)
            r = momentum_residual(before, st, cfg.dt, cfg)
            return np.abs(r[2:-2]).max()

        r1 = resid(16, 12)
        r2 = resid(32, 24)
        assert r1 / r2 > 2.5


def test_pressure_tensor_of_maxwellian():
    g = PhaseSpaceGrid(L=1.0, Nx=4, v_max=7.0, Nv=32)
    cfg = make_config(g)
    f = make_maxwellian(g, 2.0, 0.8, drift=(0.3, 0.1, 0.0))
    fields = FieldState.uniform(g)
    st = initialize_state(f, fields, cfg)
    P = pressure_tensor_row(st)
    # P_xx = n T, off-diagonal zero for a drifting isotropic Maxwellian.
    np.testing.assert_allclose(P[:, 0], 2.0 * 0.8, rtol=1e-5)
    np.testing.assert_allclose(P[:, 1:], 0.0, atol=1e-8)


def test_dissipation_residual_accessor():
    from hallkin import InvalidInput
    from hallkin.diagnostics import dissipation_residual

    g = small_grid(Nx=8, Nv=12)
    cfg = make_config(g)
    st = equilibrium_state(g, cfg)
    with pytest.raises(InvalidInput):
        dissipation_residual(st.ledger)
    step(st, cfg.dt, cfg)
    assert dissipation_residual(st.ledger) == st.ledger.last.residual
