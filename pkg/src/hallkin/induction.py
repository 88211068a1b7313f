"""Magnetic induction: discrete curl, Ohm's law, and the implicit stage solve.

In one space dimension with B = (Bx0, By(x), Bz(x)) the current is
J = (0, -Bz', By').  Three discrete currents coexist on purpose:

* the *reporting* current (``compute_current``): central differences with
  second-order one-sided closures at the wall nodes; this is what lands in
  FieldState and the CSV output.
* the *transport* current: central differences closed with odd ghost
  reflection (the conducting-wall condition By = Bz = 0).  It is the
  current that the frozen-field transport flux and the time-integrated
  current M use, so the Hall triple product (J x B_frozen) . J cancels
  node by node in the discrete energy balance exactly as it does in the
  continuous one.
* the *dissipation* current: face differences of the same odd-ghost
  extension.  The resistive operator is assembled in flux form from these
  faces, which makes summation by parts exact: a backward-Euler resistive
  step obeys ||B+||^2 - ||B||^2 = -2 dt D[B+] - ||B+ - B||^2 with D the
  face-quadrature dissipation (interior faces weighted dx, wall faces
  dx/2), so the implicit stage can only lose energy.

The stage solve freezes (n_I, n_e, B) and promotes the time integral of
the current, M = integral of J dt, to an unknown: the ion momentum during
the stage is nu_I(t) = nu_I(t_k) + M(t) x d with d = n_I B_frozen / n_e,
which closes a linear system for (By, Bz, My, Mz) - one banded solve of
size 4 Nx per step.  A theta scheme (backward Euler by default) keeps the
stiff resistive term unconditionally stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import SingularSystem
from .grid import FieldState, PhaseSpaceGrid, RunConfig
from .moments import MomentSet

_BAND = 11  # 4 vars/node, stencil reach two nodes: bandwidth 4*2+3


def compute_current(fields: FieldState, grid: PhaseSpaceGrid) -> tuple[np.ndarray, np.ndarray]:
    """Nodal current of the dynamic field: J_y = -D_x Bz, J_z = D_x By.

    Central differences in the interior, second-order one-sided stencils at
    the wall nodes (exact on linear fields end to end).
    """

    def ddx(a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        inv2dx = 1.0 / (2.0 * grid.dx)
        out[1:-1] = (a[2:] - a[:-2]) * inv2dx
        out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) * inv2dx
        out[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) * inv2dx
        return out

    return -ddx(fields.bz), ddx(fields.by)


def assemble_electric_field(
    fields: FieldState,
    moms: MomentSet,
    eta_node: np.ndarray,
    T_e: float,
    grid: PhaseSpaceGrid,
) -> np.ndarray:
    """Generalized Ohm's law, nodewise:

    E = -T_e grad(n_e)/n_e - (n_I u_I / n_e) x B + (J x B)/n_e + eta J.
    """
    ne = fields.n_e
    inv_ne = 1.0 / ne

    grad_ne = np.empty_like(ne)
    inv2dx = 1.0 / (2.0 * grid.dx)
    grad_ne[1:-1] = (ne[2:] - ne[:-2]) * inv2dx
    grad_ne[0] = (ne[1] - ne[0]) * inv2dx  # even ghost: zero-flux walls
    grad_ne[-1] = (ne[-1] - ne[-2]) * inv2dx

    B = np.stack([np.full(grid.Nx, fields.bx0), fields.total_by(), fields.total_bz()], axis=1)
    jy = fields.j_y + (fields.imposed.j_y if fields.imposed is not None else 0.0)
    jz = fields.j_z + (fields.imposed.j_z if fields.imposed is not None else 0.0)
    J = np.stack([np.zeros(grid.Nx), jy, jz], axis=1)

    E = np.zeros((grid.Nx, 3))
    E[:, 0] = -T_e * grad_ne * inv_ne
    E -= np.cross(moms.nu_I, B) * inv_ne[:, None]
    E += np.cross(J, B) * inv_ne[:, None]
    E += eta_node[:, None] * J
    return E


def _curl_current_odd(by: np.ndarray, bz: np.ndarray, dx: float,
                      ghosts_by=None, ghosts_bz=None) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference current with odd ghost reflection (tangential B = 0).

    Explicit ghost values override the reflection (imposed-field profiles).
    """
    inv2dx = 1.0 / (2.0 * dx)

    def dc(a, ghosts):
        gl, gr = (-a[0], -a[-1]) if ghosts is None else ghosts
        out = np.empty_like(a)
        out[1:-1] = (a[2:] - a[:-2]) * inv2dx
        out[0] = (a[1] - gl) * inv2dx
        out[-1] = (gr - a[-2]) * inv2dx
        return out

    return -dc(bz, ghosts_bz), dc(by, ghosts_by)


def _dc_even_extend(g: np.ndarray, dx: float) -> np.ndarray:
    """Central difference of a flux extended evenly past the walls.

    The even extension zeroes the boundary terms of the discrete
    summation by parts, which is what makes the transport curl skew.
    """
    inv2dx = 1.0 / (2.0 * dx)
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - g[:-2]) * inv2dx
    out[0] = (g[1] - g[0]) * inv2dx
    out[-1] = (g[-1] - g[-2]) * inv2dx
    return out


def _face_differences(b: np.ndarray, dx: float, ghosts=None) -> np.ndarray:
    """Differences of b at the Nx+1 faces; odd ghosts unless given."""
    gl, gr = (-b[0], -b[-1]) if ghosts is None else ghosts
    out = np.empty(b.shape[0] + 1)
    out[1:-1] = (b[1:] - b[:-1]) / dx
    out[0] = (b[0] - gl) / dx
    out[-1] = (gr - b[-1]) / dx
    return out


def face_weights(grid: PhaseSpaceGrid) -> np.ndarray:
    """Quadrature weights of face quantities: dx interior, dx/2 at the walls."""
    w = np.full(grid.Nx + 1, grid.dx)
    w[0] = 0.5 * grid.dx
    w[-1] = 0.5 * grid.dx
    return w


def face_dissipation(
    by: np.ndarray,
    bz: np.ndarray,
    eta_face: np.ndarray,
    grid: PhaseSpaceGrid,
    ghosts_by=None,
    ghosts_bz=None,
) -> float:
    """Resistive dissipation rate sum_f eta |J_f|^2 in the face quadrature."""
    dby = _face_differences(by, grid.dx, ghosts_by)
    dbz = _face_differences(bz, grid.dx, ghosts_bz)
    w = face_weights(grid)
    return float((eta_face * (dby * dby + dbz * dbz) * w).sum())


@dataclass
class Stage1Coefficients:
    """Frozen fields and constants defining the linear stage-1 operator."""

    grid: PhaseSpaceGrid
    n_e: np.ndarray        # frozen electron density
    inv_ne: np.ndarray
    nuk: np.ndarray        # (Nx, 3) ion momentum at stage entry
    d: np.ndarray          # (Nx, 3) = n_I B_frozen / n_e
    bf: np.ndarray         # (Nx, 3) frozen total field
    eta_face: np.ndarray   # (Nx+1,)
    j_imp: Optional[np.ndarray] = None       # (Nx, 2): imposed (J_y, J_z)
    imp_by: Optional[np.ndarray] = None      # imposed profiles, for the
    imp_bz: Optional[np.ndarray] = None      # resistive affine part
    imp_ghosts_by: Optional[tuple] = None
    imp_ghosts_bz: Optional[tuple] = None


def make_stage1_coefficients(
    fields: FieldState,
    moms: MomentSet,
    b_frozen: np.ndarray,
    config: RunConfig,
) -> Stage1Coefficients:
    inv_ne = 1.0 / fields.n_e
    d = moms.n_I[:, None] * b_frozen * inv_ne[:, None]
    imp = fields.imposed
    return Stage1Coefficients(
        grid=config.grid,
        n_e=fields.n_e,
        inv_ne=inv_ne,
        nuk=moms.nu_I,
        d=d,
        bf=b_frozen,
        eta_face=config.eta_face,
        j_imp=None if imp is None else np.stack([imp.j_y, imp.j_z], axis=1),
        imp_by=None if imp is None else imp.by,
        imp_bz=None if imp is None else imp.bz,
        imp_ghosts_by=None if imp is None else imp.by_ghost,
        imp_ghosts_bz=None if imp is None else imp.bz_ghost,
    )


def stage1_rhs(
    by: np.ndarray,
    bz: np.ndarray,
    my: np.ndarray,
    mz: np.ndarray,
    C: Stage1Coefficients,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Affine right-hand side of the frozen-coefficient stage-1 system.

    d(By)/dt = -d/dx[ u x B_frozen ]_z + d/dx( eta d(By_tot)/dx )
    d(Bz)/dt = +d/dx[ u x B_frozen ]_y + d/dx( eta d(Bz_tot)/dx )
    dM/dt    = J_total
    with u = (nu_k + M x d - J_total) / n_e.
    """
    g = C.grid
    dx = g.dx

    jy, jz = _curl_current_odd(by, bz, dx)
    if C.j_imp is not None:
        jy = jy + C.j_imp[:, 0]
        jz = jz + C.j_imp[:, 1]

    dvec = C.d
    nux = C.nuk[:, 0] + my * dvec[:, 2] - mz * dvec[:, 1]
    nuy = C.nuk[:, 1] + mz * dvec[:, 0]
    nuz = C.nuk[:, 2] - my * dvec[:, 0]

    ux = nux * C.inv_ne
    uy = (nuy - jy) * C.inv_ne
    uz = (nuz - jz) * C.inv_ne

    bfx, bfy, bfz = C.bf[:, 0], C.bf[:, 1], C.bf[:, 2]
    g_y = uz * bfx - ux * bfz
    g_z = ux * bfy - uy * bfx

    dby = -_dc_even_extend(g_z, dx)
    dbz = _dc_even_extend(g_y, dx)

    # Resistive flux of the total tangential field.
    if C.imp_by is not None:
        gh_by = (C.imp_ghosts_by[0] - by[0], C.imp_ghosts_by[1] - by[-1])
        gh_bz = (C.imp_ghosts_bz[0] - bz[0], C.imp_ghosts_bz[1] - bz[-1])
        q_by = C.eta_face * _face_differences(by + C.imp_by, dx, gh_by)
        q_bz = C.eta_face * _face_differences(bz + C.imp_bz, dx, gh_bz)
    else:
        q_by = C.eta_face * _face_differences(by, dx)
        q_bz = C.eta_face * _face_differences(bz, dx)
    dby += np.diff(q_by) / dx
    dbz += np.diff(q_bz) / dx

    return dby, dbz, jy, jz


@dataclass
class InductionSystem:
    """Assembled implicit system for one frozen-field magnetic stage."""

    b_frozen: np.ndarray
    d_stage1: np.ndarray
    theta: float
    dt: float
    matrix_banded: np.ndarray  # (2*_BAND+1, 4*Nx) diagonal-ordered storage
    rhs: np.ndarray
    coeffs: Stage1Coefficients


def _pack(by, bz, my, mz) -> np.ndarray:
    return np.stack([by, bz, my, mz], axis=1).ravel()


def _unpack(x: np.ndarray, n: int):
    m = x.reshape(n, 4)
    return m[:, 0].copy(), m[:, 1].copy(), m[:, 2].copy(), m[:, 3].copy()


def _apply_rhs_packed(x: np.ndarray, C: Stage1Coefficients) -> np.ndarray:
    by, bz, my, mz = _unpack(x, C.grid.Nx)
    return _pack(*stage1_rhs(by, bz, my, mz, C))


def assemble_stage1(
    C: Stage1Coefficients,
    x0: np.ndarray,
    theta: float,
    dt: float,
) -> InductionSystem:
    """Probe the affine operator into banded storage and form the theta system.

    Solving (I - theta dt A) x+ = x + (1-theta) dt A x + dt c with
    A x + c = stage1_rhs(x).  The operator couples each node to at most
    its two neighbors on each side, so columns a fixed stride apart can be
    probed together: 4 * (2*2 + 2) basis combs recover the full band.
    """
    n4 = 4 * C.grid.Nx
    c_aff = _apply_rhs_packed(np.zeros(n4), C)

    nb = 2 * _BAND + 1
    ab = np.zeros((nb, n4))  # diagonal-ordered: ab[_BAND + i - j, j] = A[i, j]
    stride = nb + 1
    for r in range(min(stride, n4)):
        probe = np.zeros(n4)
        probe[r::stride] = 1.0
        col = _apply_rhs_packed(probe, C) - c_aff
        for j in range(r, n4, stride):
            lo = max(0, j - _BAND)
            hi = min(n4, j + _BAND + 1)
            rows = np.arange(lo, hi)
            ab[_BAND + rows - j, j] = col[rows]

    # matrix = I - theta dt A in the same storage.
    mat = -theta * dt * ab
    mat[_BAND] += 1.0

    ax0 = _apply_rhs_packed(x0, C) - c_aff
    rhs = x0 + (1.0 - theta) * dt * ax0 + dt * c_aff

    by0, bz0, my0, mz0 = _unpack(x0, C.grid.Nx)
    if np.any(my0) or np.any(mz0):
        raise SingularSystem("stage-1 must start from M = 0")

    return InductionSystem(
        b_frozen=C.bf,
        d_stage1=C.d,
        theta=theta,
        dt=dt,
        matrix_banded=mat,
        rhs=rhs,
        coeffs=C,
    )


@dataclass
class Stage1Result:
    by: np.ndarray
    bz: np.ndarray
    m_final: np.ndarray        # (Nx, 2): time-integrated total current
    nu_new: np.ndarray         # (Nx, 3): nu_k + M x d
    delta_v: np.ndarray        # (Nx, 3): velocity shift (M x B_frozen)/n_e
    dissipation_theta: float   # sum_f eta |J_f(B^theta)|^2 (dynamic field)
    source_theta: Optional[float] = None  # imposed-field energy source S
    linear_residual: float = 0.0


def solve_stage1(
    fields: FieldState,
    moms: MomentSet,
    b_frozen: np.ndarray,
    dt: float,
    config: RunConfig,
) -> Stage1Result:
    """One implicit step of the frozen-field magnetic stage.

    Returns the new tangential field, the time-integrated current M, the
    analytically updated ion momentum, and the velocity shift that the
    kinetic half of the stage applies through the conservative remap.
    """
    C = make_stage1_coefficients(fields, moms, b_frozen, config)
    theta = config.theta
    g = config.grid

    x0 = _pack(fields.by, fields.bz, np.zeros(g.Nx), np.zeros(g.Nx))
    system = assemble_stage1(C, x0, theta, dt)

    try:
        x1 = solve_banded((_BAND, _BAND), system.matrix_banded, system.rhs)
    except Exception as exc:  # scipy raises LinAlgError on singular factors
        raise SingularSystem(f"stage-1 banded solve failed: {exc}") from exc
    if not np.all(np.isfinite(x1)):
        raise SingularSystem("stage-1 solve produced non-finite values")

    # Verify the banded solve actually solved the system.
    resid = _banded_matvec(system.matrix_banded, x1) - system.rhs
    scale = max(float(np.abs(system.rhs).max()), 1.0)
    lin_res = float(np.abs(resid).max()) / scale
    if lin_res > config.linear_tol:
        raise SingularSystem(
            f"stage-1 linear residual {lin_res:.3e} exceeds linear_tol"
        )

    by1, bz1, my1, mz1 = _unpack(x1, g.Nx)

    dvec = C.d
    m_cross_d = np.stack(
        [my1 * dvec[:, 2] - mz1 * dvec[:, 1], mz1 * dvec[:, 0], -my1 * dvec[:, 0]],
        axis=1,
    )
    nu_new = moms.nu_I + m_cross_d

    m3 = np.stack([np.zeros(g.Nx), my1, mz1], axis=1)
    delta_v = np.cross(m3, C.bf) * C.inv_ne[:, None]

    by_th = theta * by1 + (1.0 - theta) * fields.by
    bz_th = theta * bz1 + (1.0 - theta) * fields.bz
    dissipation = face_dissipation(by_th, bz_th, config.eta_face, g)

    source = None
    if fields.imposed is not None:
        source = _perturbed_source_theta(C, by_th, bz_th, my1, mz1, theta, config)

    return Stage1Result(
        by=by1,
        bz=bz1,
        m_final=np.stack([my1, mz1], axis=1),
        nu_new=nu_new,
        delta_v=delta_v,
        dissipation_theta=dissipation,
        source_theta=source,
        linear_residual=lin_res,
    )


def _banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y[i] = sum_j M[i, j] x[j] for diagonal-ordered banded storage."""
    n = x.shape[0]
    out = np.zeros_like(x)
    for off in range(-_BAND, _BAND + 1):
        # entries M[i, j] with i - j = off live in ab[_BAND + off, j]
        j = np.arange(max(0, -off), min(n, n - off))
        out[j + off] += ab[_BAND + off, j] * x[j]
    return out


def _perturbed_source_theta(
    C: Stage1Coefficients,
    by_th: np.ndarray,
    bz_th: np.ndarray,
    my1: np.ndarray,
    mz1: np.ndarray,
    theta: float,
    config: RunConfig,
) -> float:
    """Imposed-field energy source at the theta level of the implicit stage.

    S = - int eta J_imp . J_pert
        - int (1/n_e) J_imp x B_tot . J_pert
        + int (1/n_e) J_imp x B_tot . nu_I,
    evaluated with the stage's theta-averaged perturbation current and the
    analytic theta-level momentum nu_k + M^theta x d.  Every term carries a
    factor of J_imp, so a uniform imposed field gives S = 0 identically.
    """
    g = C.grid
    dx = g.dx
    jimp = C.j_imp
    if jimp is None or not np.any(jimp):
        return 0.0

    # Face form of the resistive cross term, matching the implicit operator.
    gh_by = (C.imp_ghosts_by[0], C.imp_ghosts_by[1])
    gh_bz = (C.imp_ghosts_bz[0], C.imp_ghosts_bz[1])
    dby_imp = _face_differences(C.imp_by, dx, gh_by)
    dbz_imp = _face_differences(C.imp_bz, dx, gh_bz)
    dby_p = _face_differences(by_th, dx)
    dbz_p = _face_differences(bz_th, dx)
    w = face_weights(g)
    s1 = -float((config.eta_face * (dbz_imp * dbz_p + dby_imp * dby_p) * w).sum())

    jy_p, jz_p = _curl_current_odd(by_th, bz_th, dx)
    b_tot = np.stack(
        [C.bf[:, 0], by_th + C.imp_by, bz_th + C.imp_bz], axis=1
    )
    jimp3 = np.stack([np.zeros(g.Nx), jimp[:, 0], jimp[:, 1]], axis=1)
    cross = np.cross(jimp3, b_tot) * C.inv_ne[:, None]

    jp3 = np.stack([np.zeros(g.Nx), jy_p, jz_p], axis=1)
    s2 = -float(((cross * jp3).sum(axis=1) * dx).sum())

    mth = theta
    nu_th = C.nuk + np.stack(
        [
            mth * (my1 * C.d[:, 2] - mz1 * C.d[:, 1]),
            mth * (mz1 * C.d[:, 0]),
            mth * (-my1 * C.d[:, 0]),
        ],
        axis=1,
    )
    s3 = float(((cross * nu_th).sum(axis=1) * dx).sum())
    return s1 + s2 + s3


def stage1_velocity_shift(
    m_final: np.ndarray,
    n_e: np.ndarray,
    b_frozen: np.ndarray,
) -> np.ndarray:
    """Velocity translation (M x B_frozen)/n_e applied to f after the solve.

    The stage-1 kinetic force is velocity-independent, so f translates; a
    divergence-free force in v leaves n_I untouched.
    """
    m3 = np.stack([np.zeros(m_final.shape[0]), m_final[:, 0], m_final[:, 1]], axis=1)
    return np.cross(m3, b_frozen) / np.asarray(n_e)[:, None]
