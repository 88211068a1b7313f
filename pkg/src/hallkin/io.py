"""Config files, checkpoints, and CSV output.

Config files are INI-style ``key = value`` sections.  Profile-valued keys
(initial density, drift, tangential field, resistivity, imposed field)
accept either a number or an expression in x; expressions are evaluated
with numpy on the cell centers (and on faces / ghost centers where the
discretization needs them).  Unknown sections or keys are hard errors:
silent misconfiguration is the dominant failure mode of simulation codes.

Checkpoints are a one-line JSON header (format version, grid descriptor,
time, array manifest) followed by raw little-endian float64 payloads, so a
round trip is bit-exact.  Energy history and field snapshots go to plain
CSV with full-precision (round-trippable) floats.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import LedgerRow
from .errors import ParseError, ValidationError
from .grid import (
    FieldState,
    ImposedField,
    PhaseSpaceGrid,
    RunConfig,
    SimulationState,
    make_maxwellian,
)
from .moments import compute_moments
from .remap import RemapKernel

CHECKPOINT_MAGIC = b"HKCHK\n"
CHECKPOINT_VERSION = 1

_SCHEMA = {
    "grid": {"L", "Nx", "Nv", "v_max"},
    "physics": {"lambda", "T_e", "eta_const", "eta_profile", "Bx0"},
    "initial": {"density", "temperature", "drift_x", "drift_y", "drift_z", "By", "Bz"},
    "imposed": {"By_imp", "Bz_imp"},
    "time": {"dt", "t_end", "splitting_order"},
    "solver": {"newton_tol", "linear_tol", "theta", "remap_order", "remap_limiter"},
    "output": {"cadence", "directory", "checkpoint_cadence", "seed"},
}
_REQUIRED = {
    "grid": {"L", "Nx", "Nv", "v_max"},
    "physics": {"lambda", "T_e"},
    "time": {"dt", "t_end"},
}


@dataclass
class InitialCondition:
    """Evaluated initial-state recipe: profiles on the grid."""

    density: np.ndarray
    temperature: float
    drift: np.ndarray  # (Nx, 3)
    by: np.ndarray
    bz: np.ndarray
    imposed: Optional[ImposedField] = None


def _eval_profile(expr: str, x: np.ndarray, L: float, key: str) -> np.ndarray:
    """Evaluate a numeric literal or an expression in x on the given nodes."""
    ns = {
        "x": x,
        "L": L,
        "pi": np.pi,
        "sin": np.sin,
        "cos": np.cos,
        "tan": np.tan,
        "exp": np.exp,
        "sqrt": np.sqrt,
        "tanh": np.tanh,
        "abs": np.abs,
        "where": np.where,
    }
    try:
        val = eval(expr, {"__builtins__": {}}, ns)  # config-owned expressions
    except Exception as exc:
        raise ValidationError(f"cannot evaluate [{key}] = {expr!r}: {exc}") from exc
    return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()


def parse_config(path) -> tuple[RunConfig, InitialCondition]:
    """Parse and validate a config file into a RunConfig and initial recipe."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    if not read:
        raise ParseError(f"cannot read config file {path}")

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - _SCHEMA[section]
        if unknown:
            raise ValidationError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}"
            )
    for section, keys in _REQUIRED.items():
        if section not in cp:
            raise ValidationError(f"missing required section [{section}]")
        missing = keys - set(cp[section])
        if missing:
            raise ValidationError(
                f"missing keys in [{section}]: {', '.join(sorted(missing))}"
            )

    def getnum(section, key, default=None, cast=float):
        if key not in cp[section]:
            return default
        try:
            return cast(cp[section][key])
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key}: {exc}") from exc

    L = getnum("grid", "L")
    Nx = getnum("grid", "Nx", cast=int)
    Nv = getnum("grid", "Nv", cast=int)
    v_max = getnum("grid", "v_max")
    if Nv is None or Nv % 2 != 0:
        raise ValidationError("Nv must be even (specular reflection symmetry)")
    try:
        grid = PhaseSpaceGrid(L=L, Nx=Nx, v_max=v_max, Nv=Nv)
    except Exception as exc:
        raise ValidationError(str(exc)) from exc

    x = grid.x_centers
    x_faces = np.arange(grid.Nx + 1) * grid.dx

    phys = cp["physics"]
    lam = getnum("physics", "lambda")
    T_e = getnum("physics", "T_e")
    if lam is None or lam <= 0:
        raise ValidationError("lambda must be > 0")
    if T_e is None or T_e <= 0:
        raise ValidationError("T_e must be > 0")
    if "eta_const" in phys and "eta_profile" in phys:
        raise ValidationError("give eta_const or eta_profile, not both")
    if "eta_profile" in phys:
        eta_node = _eval_profile(phys["eta_profile"], x, L, "physics/eta_profile")
        eta_face = _eval_profile(phys["eta_profile"], x_faces, L, "physics/eta_profile")
    else:
        eta0 = getnum("physics", "eta_const", default=None)
        if eta0 is None:
            raise ValidationError("resistivity required: eta_const or eta_profile")
        eta_node = np.full(grid.Nx, eta0)
        eta_face = np.full(grid.Nx + 1, eta0)
    if np.min(eta_node) <= 0 or np.min(eta_face) <= 0:
        raise ValidationError("eta_min must be > 0 (resistivity hypothesis)")
    bx0 = getnum("physics", "Bx0", default=0.0)

    order = cp.get("time", "splitting_order", fallback="lie").strip().lower()
    if order not in ("lie", "strang"):
        raise ValidationError("splitting_order must be LIE or STRANG")

    remap_order = getnum("solver", "remap_order", default=2, cast=int) if "solver" in cp else 2
    remap_limiter = (cp.get("solver", "remap_limiter", fallback="positive").strip()
                     if "solver" in cp else "positive")
    try:
        remap = RemapKernel(order=remap_order, limiter=remap_limiter)
    except Exception as exc:
        raise ValidationError(str(exc)) from exc

    def solver_num(key, default):
        return getnum("solver", key, default=default) if "solver" in cp else default

    def output_num(key, default, cast=int):
        return getnum("output", key, default=default, cast=cast) if "output" in cp else default

    try:
        config = RunConfig(
            grid=grid,
            lambda_debye=lam,
            T_e=T_e,
            eta_node=eta_node,
            eta_face=eta_face,
            bx0=bx0,
            dt=getnum("time", "dt"),
            t_end=getnum("time", "t_end"),
            splitting_order=order,
            theta=solver_num("theta", 1.0),
            newton_tol=solver_num("newton_tol", 1e-12),
            linear_tol=solver_num("linear_tol", 1e-10),
            remap=remap,
            output_cadence=output_num("cadence", 1),
            checkpoint_cadence=output_num("checkpoint_cadence", 0),
            seed=output_num("seed", 0),
        )
    except Exception as exc:
        raise ValidationError(str(exc)) from exc

    init = cp["initial"] if "initial" in cp else {}

    def init_profile(key, default):
        if key not in init:
            return np.full(grid.Nx, float(default))
        return _eval_profile(init[key], x, L, f"initial/{key}")

    density = init_profile("density", 1.0)
    if np.any(density < 0):
        raise ValidationError("initial density must be nonnegative")
    temperature = float(init["temperature"]) if "temperature" in init else 1.0
    if temperature <= 0:
        raise ValidationError("initial temperature must be > 0")
    drift = np.column_stack([
        init_profile("drift_x", 0.0),
        init_profile("drift_y", 0.0),
        init_profile("drift_z", 0.0),
    ])
    by0 = init_profile("By", 0.0)
    bz0 = init_profile("Bz", 0.0)

    imposed = None
    if "imposed" in cp:
        imp = cp["imposed"]
        xg = np.array([-0.5 * grid.dx, L + 0.5 * grid.dx])

        def imp_profile(key):
            expr = imp.get(key, "0.0")
            return (
                _eval_profile(expr, x, L, f"imposed/{key}"),
                _eval_profile(expr, xg, L, f"imposed/{key}"),
            )

        by_imp, by_g = imp_profile("By_imp")
        bz_imp, bz_g = imp_profile("Bz_imp")
        imposed = ImposedField(
            by=by_imp, bz=bz_imp,
            by_ghost=(float(by_g[0]), float(by_g[1])),
            bz_ghost=(float(bz_g[0]), float(bz_g[1])),
        )
        imposed.finalize(grid)
        sup = imposed.sup_norm_1inf(grid)
        if not math.isfinite(sup):
            raise ValidationError("imposed field must be W^{1,inf}-bounded")

    recipe = InitialCondition(
        density=density, temperature=temperature, drift=drift,
        by=by0, bz=bz0, imposed=imposed,
    )
    return config, recipe


def build_state(config: RunConfig, recipe: InitialCondition) -> SimulationState:
    """Construct the initial SimulationState from a parsed recipe."""
    from .splitting import initialize_state

    grid = config.grid
    f = make_maxwellian(grid, recipe.density, recipe.temperature, recipe.drift)
    fields = FieldState.uniform(grid, bx0=config.bx0)
    fields.by = recipe.by.copy()
    fields.bz = recipe.bz.copy()
    fields.imposed = recipe.imposed
    return initialize_state(f, fields, config)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(state: SimulationState, path) -> None:
    """Versioned header plus raw little-endian float64 arrays."""
    g = state.f.grid
    moms = compute_moments(state.f)
    arrays = [
        ("f", state.f.values),
        ("by", state.fields.by),
        ("bz", state.fields.bz),
        ("log_ne", state.fields.log_ne),
        ("m", np.zeros((g.Nx, 2))),  # stage-local integral; zero between steps
        ("nu_i", moms.nu_I),
    ]
    header = {
        "format_version": CHECKPOINT_VERSION,
        "t": state.t,
        "grid": {"L": g.L, "Nx": g.Nx, "v_max": g.v_max, "Nv": g.Nv},
        "bx0": state.fields.bx0,
        "lost_mass": state.lost_mass,
        "initial_mass": state.initial_mass,
        "arrays": [[name, list(a.shape)] for name, a in arrays],
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write((json.dumps(header) + "\n").encode())
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path, config: RunConfig,
                    imposed: Optional[ImposedField] = None) -> SimulationState:
    """Rebuild a SimulationState; the config must describe the same grid."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ParseError(f"{path} is not a checkpoint file")
        header = json.loads(fh.readline().decode())
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise ParseError(
                f"unsupported checkpoint version {header.get('format_version')}"
            )
        g = config.grid
        gd = header["grid"]
        if (gd["Nx"], gd["Nv"]) != (g.Nx, g.Nv) or gd["L"] != g.L or gd["v_max"] != g.v_max:
            raise ValidationError("checkpoint grid does not match the config grid")
        data = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ParseError(f"checkpoint truncated while reading {name}")
            data[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

    from .diagnostics import EnergyLedger, append_ledger_row
    from .grid import DistributionFunction

    f = DistributionFunction(g, data["f"])
    fields = FieldState.uniform(g, bx0=header["bx0"])
    fields.by = data["by"]
    fields.bz = data["bz"]
    # Restore the electron state verbatim instead of re-solving: the next
    # step's Newton warm start then sees the exact original iterate, which
    # keeps a resumed trajectory bit-identical to the uninterrupted one.
    fields.log_ne = data["log_ne"]
    fields.n_e = np.exp(data["log_ne"])
    fields.imposed = imposed
    fields.refresh_current(g)
    state = SimulationState(t=header["t"], f=f, fields=fields, ledger=EnergyLedger())
    state.lost_mass = header["lost_mass"]
    state.initial_mass = header["initial_mass"]
    append_ledger_row(state, config, dissipation_step=0.0)
    return state


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

ENERGY_COLUMNS = ["t", "E_I", "E_m", "E_es", "E_free", "E_tot",
                  "dissipation_step", "residual"]
ENERGY_COLUMNS_IMPOSED = ENERGY_COLUMNS + ["E_m_pert", "E_tot_pert", "S",
                                           "balance_residual"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class EnergyCsvWriter:
    """Appends one RFC-4180-style row per ledger entry, fixed header."""

    def __init__(self, path, imposed: bool):
        self.path = Path(path)
        self.columns = ENERGY_COLUMNS_IMPOSED if imposed else ENERGY_COLUMNS
        self.imposed = imposed
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(self.columns) + "\r\n")

    def write_row(self, row: LedgerRow) -> None:
        vals = [row.t, row.E_I, row.E_m, row.E_es, row.E_free, row.E_tot,
                row.dissipation_step, row.residual]
        if self.imposed:
            vals += [row.E_m_pert or 0.0, row.E_tot_pert or 0.0,
                     row.source or 0.0, row.balance_residual or 0.0]
        self._fh.write(",".join(_fmt(v) for v in vals) + "\r\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_fields_csv(state: SimulationState, config: RunConfig, path) -> None:
    g = config.grid
    fs = state.fields
    moms = compute_moments(state.f)
    u = moms.u_I()
    cols = {
        "x": g.x_centers,
        "n_I": moms.n_I,
        "n_e": fs.n_e,
        "uIx": u[:, 0],
        "uIy": u[:, 1],
        "uIz": u[:, 2],
        "By": fs.total_by(),
        "Bz": fs.total_bz(),
        "Jy": fs.j_y + (fs.imposed.j_y if fs.imposed is not None else 0.0),
        "Jz": fs.j_z + (fs.imposed.j_z if fs.imposed is not None else 0.0),
    }
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\r\n")
        for i in range(g.Nx):
            fh.write(",".join(_fmt(arr[i]) for arr in cols.values()) + "\r\n")
