"""Grid, state containers, Maxwellian sampling, and state validation."""

import math

import numpy as np
import pytest

from hallkin import (
    FieldState,
    InvalidInput,
    PhaseSpaceGrid,
    TailTruncation,
    make_maxwellian,
    validate_state,
)
from conftest import equilibrium_state, make_config, small_grid


class TestPhaseSpaceGrid:
    def test_spacings_and_centers(self):
        g = PhaseSpaceGrid(L=2.0, Nx=10, v_max=5.0, Nv=8)
        assert g.dx == pytest.approx(0.2)
        assert g.dv == pytest.approx(1.25)
        np.testing.assert_allclose(g.x_centers, (np.arange(10) + 0.5) * 0.2)
        # v = 0 is a face: nodes symmetric, none at zero.
        assert np.all(g.v_nodes != 0.0)
        np.testing.assert_array_equal(g.v_nodes, -g.v_nodes[::-1])

    def test_odd_nv_rejected(self):
        with pytest.raises(InvalidInput):
            PhaseSpaceGrid(L=1.0, Nx=4, v_max=4.0, Nv=7)

    def test_positivity_required(self):
        with pytest.raises(InvalidInput):
            PhaseSpaceGrid(L=-1.0, Nx=4, v_max=4.0, Nv=4)


class TestMakeMaxwellian:
    def test_zero_density(self):
        g = small_grid()
        f = make_maxwellian(g, 0.0, 1.0)
        assert np.all(f.values == 0.0)

    def test_total_mass_matches_analytic(self):
        # Midpoint quadrature of a well-resolved Gaussian is accurate far
        # beyond the 1e-6 contract (Poisson-summation superconvergence).
        g = PhaseSpaceGrid(L=2.0, Nx=8, v_max=8.0, Nv=32)
        f = make_maxwellian(g, 1.0, 1.0)
        assert f.total_mass() == pytest.approx(g.L, rel=1e-6)

    def test_drift_momentum(self):
        g = PhaseSpaceGrid(L=1.0, Nx=4, v_max=8.0, Nv=32)
        u = 0.5
        f = make_maxwellian(g, 1.0, 1.0, drift=(u, 0.0, 0.0))
        from hallkin.moments import compute_moments

        moms = compute_moments(f)
        np.testing.assert_allclose(moms.nu_I[:, 0], u, rtol=1e-6)
        np.testing.assert_allclose(moms.nu_I[:, 1:], 0.0, atol=1e-12)

    def test_velocity_inversion_symmetry_exact(self):
        g = small_grid(Nx=3, Nv=8)
        f = make_maxwellian(g, 1.0, 0.8)
        flipped = f.values[:, ::-1, ::-1, ::-1]
        assert np.array_equal(f.values, flipped)

    def test_strictly_positive(self):
        g = small_grid(Nx=3, Nv=8, v_max=6.0)
        f = make_maxwellian(g, 1.0, 1.0)
        assert f.values.min() > 0.0

    def test_tail_truncation_raised(self):
        g = small_grid(v_max=3.0)
        with pytest.raises(TailTruncation):
            make_maxwellian(g, 1.0, 1.0)

    def test_drift_pushes_tail_out(self):
        g = small_grid(v_max=8.0)
        make_maxwellian(g, 1.0, 1.0, drift=(1.0, 0.0, 0.0))
        with pytest.raises(TailTruncation):
            make_maxwellian(g, 1.0, 1.0, drift=(5.0, 0.0, 0.0))

    def test_invalid_inputs(self):
        g = small_grid()
        with pytest.raises(InvalidInput):
            make_maxwellian(g, -1.0, 1.0)
        with pytest.raises(InvalidInput):
            make_maxwellian(g, 1.0, -0.5)


class TestValidateState:
    def test_clean_state_empty_report(self):
        g = small_grid()
        cfg = make_config(g)
        state = equilibrium_state(g, cfg)
        assert validate_state(state) == []

    def test_negative_f_reported(self):
        g = small_grid()
        cfg = make_config(g)
        state = equilibrium_state(g, cfg)
        state.f.values[2, 1, 1, 1] = -1.0
        report = validate_state(state)
        assert any("negative" in r for r in report)
        assert any("(2, 1, 1, 1)" in r for r in report)

    def test_nonpositive_ne_reported(self):
        g = small_grid()
        cfg = make_config(g)
        state = equilibrium_state(g, cfg)
        state.fields.n_e[0] = 0.0
        report = validate_state(state)
        assert any("n_e not positive" in r for r in report)

    def test_inconsistent_current_reported(self):
        g = small_grid()
        cfg = make_config(g)
        state = equilibrium_state(g, cfg)
        state.fields.j_z = state.fields.j_z + 1.0
        report = validate_state(state)
        assert any("current" in r for r in report)

    def test_nan_reported(self):
        g = small_grid()
        cfg = make_config(g)
        state = equilibrium_state(g, cfg)
        state.f.values[0, 0, 0, 0] = math.nan
        assert any("NaN" in r for r in validate_state(state))


class TestFieldState:
    def test_uniform_factory(self):
        g = small_grid()
        fs = FieldState.uniform(g, bx0=0.5)
        assert fs.bx0 == 0.5
        assert np.all(fs.n_e == 1.0)
        assert np.all(fs.log_ne == 0.0)

    def test_total_field_no_imposed(self):
        g = small_grid()
        fs = FieldState.uniform(g)
        fs.by = np.arange(g.Nx, dtype=float)
        np.testing.assert_array_equal(fs.total_by(), fs.by)
