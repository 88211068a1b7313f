"""Nonlinear electron-density solve and its elliptic diagnostics.

The electron density obeys the screened Boltzmann balance

    -lambda^2 (ln n_e)'' + n_e = n_I,      n_e'(0) = n_e'(L) = 0,

solved for u = ln n_e so positivity is structural and the Newton Jacobian
-lambda^2 D2 + diag(e^u) is symmetric positive definite.  The second
difference D2 closes the Neumann walls by ghost-node reflection, which
makes its row sums exactly zero; integrating the converged residual then
forces discrete charge neutrality sum(n_e) dx = sum(n_I) dx to the Newton
tolerance, as a matter of linear algebra rather than approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidInput, NonConvergence

MAX_ITERS = 100


@dataclass
class PoissonSolution:
    log_ne: np.ndarray
    n_e: np.ndarray
    residual_norm: float
    newton_iters: int


def _neumann_d2(u: np.ndarray, dx: float) -> np.ndarray:
    """Three-point second difference with even ghost reflection at the walls."""
    out = np.empty_like(u)
    inv = 1.0 / (dx * dx)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv
    out[0] = (u[1] - u[0]) * inv
    out[-1] = (u[-2] - u[-1]) * inv
    return out


def _residual(u: np.ndarray, n_I: np.ndarray, lam2: float, dx: float) -> np.ndarray:
    return -lam2 * _neumann_d2(u, dx) + np.exp(u) - n_I


def solve_log_ne(
    n_I: np.ndarray,
    lam: float,
    newton_tol: float,
    dx: float,
    u0: Optional[np.ndarray] = None,
) -> PoissonSolution:
    """Damped Newton iteration for u = ln n_e.

    The tridiagonal Jacobian is solved directly; the step is halved until
    the max-norm residual decreases.  Raises NonConvergence after
    MAX_ITERS iterations (pathological n_I or an unreachable tolerance)
    and InvalidInput for negative or identically zero n_I.
    """
    n_I = np.asarray(n_I, dtype=float)
    if lam <= 0:
        raise InvalidInput("lambda must be > 0")
    if np.any(n_I < 0):
        raise InvalidInput("n_I must be nonnegative")
    if n_I.sum() <= 0:
        raise InvalidInput("n_I must carry positive total mass")

    n = n_I.shape[0]
    lam2 = lam * lam
    inv_dx2 = 1.0 / (dx * dx)

    u = np.full(n, np.log(n_I.mean())) if u0 is None else np.array(u0, dtype=float)
    F = _residual(u, n_I, lam2, dx)
    fnorm = float(np.abs(F).max())

    iters = 0
    while fnorm > newton_tol:
        if iters >= MAX_ITERS:
            raise NonConvergence(
                f"Newton stalled at |F|_inf = {fnorm:.3e} after {iters} iterations"
            )
        # Jacobian -lam^2 D2 + diag(e^u) in banded (1,1) storage.
        diag = lam2 * 2.0 * inv_dx2 + np.exp(u)
        diag[0] -= lam2 * inv_dx2
        diag[-1] -= lam2 * inv_dx2
        off = np.full(n - 1, -lam2 * inv_dx2)
        ab = np.zeros((3, n))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        step = solve_banded((1, 1), ab, -F)

        s = 1.0
        while True:
            u_try = u + s * step
            F_try = _residual(u_try, n_I, lam2, dx)
            fnorm_try = float(np.abs(F_try).max())
            if fnorm_try < fnorm or s < 1e-8:
                break
            s *= 0.5
        u, F, fnorm = u_try, F_try, fnorm_try
        iters += 1

    return PoissonSolution(log_ne=u, n_e=np.exp(u), residual_norm=fnorm, newton_iters=iters)


@dataclass
class TwoSidedReport:
    min_ne: float
    max_ne: float
    norm53_ne: float
    norm53_nI: float
    passed: bool


def check_two_sided_bound(sol: PoissonSolution, n_I: np.ndarray, dx: float) -> TwoSidedReport:
    """Positivity of n_e and the norm comparison ||n_e||_{5/3} <= ||n_I||_{5/3}.

    The comparison is the constructive first step behind the two-sided
    density control: multiplying the balance by n_e^{2/3} and summing by
    parts (the wall fluxes vanish) leaves the diffusion term nonnegative,
    so the 5/3 norm of n_e cannot exceed the 5/3 norm of its source.
    """
    ne = sol.n_e
    norm_ne = float((ne ** (5.0 / 3.0)).sum() * dx) ** 0.6
    norm_nI = float((np.asarray(n_I, float) ** (5.0 / 3.0)).sum() * dx) ** 0.6
    passed = float(ne.min()) > 0.0 and norm_ne <= norm_nI * (1.0 + 1e-10)
    return TwoSidedReport(
        min_ne=float(ne.min()),
        max_ne=float(ne.max()),
        norm53_ne=norm_ne,
        norm53_nI=norm_nI,
        passed=passed,
    )


def electrostatic_energy(log_ne: np.ndarray, lam: float, dx: float) -> float:
    """lambda^2/2 integral of |(ln n_e)'|^2 via face differences.

    Neumann walls carry zero flux, so only interior faces contribute.
    """
    du = np.diff(log_ne) / dx
    return 0.5 * lam * lam * float((du * du).sum() * dx)
