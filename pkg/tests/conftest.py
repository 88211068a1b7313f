"""Shared builders for the test suite."""

import numpy as np
import pytest

from hallkin import (
    FieldState,
    PhaseSpaceGrid,
    RunConfig,
    make_maxwellian,
    uniform_resistivity,
)
from hallkin.splitting import initialize_state


def small_grid(Nx=8, Nv=12, v_max=6.0, L=1.0) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(L=L, Nx=Nx, v_max=v_max, Nv=Nv)


def make_config(grid, *, lam=0.5, T_e=1.0, eta=0.1, dt=0.01, theta=1.0,
                bx0=0.0, **kw) -> RunConfig:
    eta_n, eta_f = uniform_resistivity(grid, eta)
    return RunConfig(
        grid=grid, lambda_debye=lam, T_e=T_e, eta_node=eta_n, eta_face=eta_f,
        bx0=bx0, dt=dt, theta=theta, **kw,
    )


def equilibrium_state(grid, config, bx0=0.0):
    f = make_maxwellian(grid, 1.0, 1.0)
    fields = FieldState.uniform(grid, bx0=bx0)
    return initialize_state(f, fields, config)


def perturbed_state(grid, config, amp=0.1):
    f = make_maxwellian(grid, 1.0, 1.0)
    fields = FieldState.uniform(grid)
    fields.by = amp * np.sin(np.pi * grid.x_centers / grid.L)
    return initialize_state(f, fields, config)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
