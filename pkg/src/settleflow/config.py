"""Declarative run configuration.

Runs are described by a TOML file of nested tables.  Canonical spellings
(hyphens and underscores are interchangeable in every ``kind``):

Spatial fields (coefficients and rate-law profiles):

    {kind = "constant", value = v}
    {kind = "values",   values = [v0, v1, ...]}        # one per grid node
    {kind = "cosine",   base = b, amplitudes = [a1, a2, ...]}
                        # b + sum_k a_k cos(k pi x / L)

Age profiles: {kind = "constant", value}, {kind = "exponential", value,
decay}, {kind = "table", knots = [...], values = [...]}.

Density responses: {kind = "constant"}, {kind = "saturating", scale},
{kind = "exponential", rate}, {kind = "linear-threshold", rate, cap}.

Initial disperser data: {kind = "constant", value}, {kind = "cosine-bump",
amplitude, modes, base = 1.0}, {kind = "equilibrium", file}, {kind =
"eigenfunction", scale}.  Initial settled data: {kind = "constant", value},
{kind = "exp-decay", rate, amplitude = 1.0}, {kind = "file", path}.

Top-level tables: [model] (d, L, a_max, mu_lower, m, e, c, beta, mu, chi),
[grid] (n_x, dt, tail_tol), [simulate] (t_end, output_times, initial.u,
initial.w), [r0] (k_values, settlement), [equilibrium] (fp_tol), [verify]
(checks, seed, t_end_bounds), [output] (directory, plot).
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .grid import Discretization, build_grid
from .rates import AgeProfile, DensityResponse, ModelParams, RateLaw, SpatialField

__all__ = ["RunConfig", "load_config"]


@dataclass
class RunConfig:
    """Everything a subcommand needs, resolved from one TOML file."""

    params: ModelParams
    grid: Discretization
    simulate: dict
    r0: dict
    equilibrium: dict
    verify: dict
    output_dir: Path
    plot: bool
    config_hash: str
    base_dir: Path


def _norm_kind(node: dict, where: str) -> str:
    if "kind" not in node:
        raise ConfigError(f"{where}: missing 'kind'")
    return str(node["kind"]).replace("-", "_")


def _check_keys(node: dict, allowed: set, where: str) -> None:
    extra = set(node) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)} (allowed: {sorted(allowed)})")


def _spatial_field(node: dict, n_x: int, L: float, where: str) -> SpatialField:
    kind = _norm_kind(node, where)
    if kind == "constant":
        _check_keys(node, {"kind", "value"}, where)
        return SpatialField.constant(n_x, float(node.get("value", 1.0)))
    if kind == "values":
        _check_keys(node, {"kind", "values"}, where)
        vals = np.asarray(node["values"], dtype=float)
        if vals.size != n_x:
            raise ConfigError(f"{where}: expected {n_x} values, got {vals.size}")
        return SpatialField(vals)
    if kind == "cosine":
        _check_keys(node, {"kind", "base", "amplitudes"}, where)
        x = np.linspace(0.0, L, n_x)
        f = np.full(n_x, float(node.get("base", 1.0)))
        for k, amp in enumerate(node.get("amplitudes", []), start=1):
            f += float(amp) * np.cos(k * np.pi * x / L)
        return SpatialField(f)
    raise ConfigError(f"{where}: unknown spatial field kind {kind!r}")


def _age_profile(node: dict, where: str) -> AgeProfile:
    kind = _norm_kind(node, where)
    if kind == "constant":
        _check_keys(node, {"kind", "value"}, where)
        return AgeProfile.constant(float(node.get("value", 1.0)))
    if kind == "exponential":
        _check_keys(node, {"kind", "value", "decay"}, where)
        return AgeProfile.exponential(float(node.get("value", 1.0)), float(node.get("decay", 0.0)))
    if kind == "table":
        _check_keys(node, {"kind", "knots", "values"}, where)
        return AgeProfile.table(node["knots"], node["values"])
    raise ConfigError(f"{where}: unknown age profile kind {kind!r}")


def _density_response(node: dict, where: str) -> DensityResponse:
    kind = _norm_kind(node, where)
    if kind == "constant":
        _check_keys(node, {"kind"}, where)
        return DensityResponse.constant()
    if kind == "saturating":
        _check_keys(node, {"kind", "scale"}, where)
        return DensityResponse.saturating(float(node.get("scale", 1.0)))
    if kind == "exponential":
        _check_keys(node, {"kind", "rate"}, where)
        return DensityResponse.exponential(float(node.get("rate", 0.0)))
    if kind == "linear_threshold":
        _check_keys(node, {"kind", "rate", "cap"}, where)
        return DensityResponse.linear_threshold(float(node.get("rate", 0.0)), float(node.get("cap", 1.0)))
    raise ConfigError(f"{where}: unknown density response kind {kind!r}")


def _rate_law(node: dict, n_x: int, L: float, where: str, with_age: bool = True) -> RateLaw:
    allowed = {"spatial", "age", "response"} if with_age else {"spatial", "response"}
    _check_keys(node, allowed, where)
    if "spatial" not in node:
        raise ConfigError(f"{where}: missing 'spatial' table")
    spatial = _spatial_field(node["spatial"], n_x, L, f"{where}.spatial")
    age = _age_profile(node["age"], f"{where}.age") if "age" in node else AgeProfile.constant()
    resp = (
        _density_response(node["response"], f"{where}.response")
        if "response" in node
        else DensityResponse.constant()
    )
    return RateLaw(spatial=spatial, age=age, response=resp)


def _model_params(model: dict, n_x: int) -> ModelParams:
    _check_keys(
        model,
        {"d", "L", "a_max", "mu_lower", "m", "e", "c", "beta", "mu", "chi"},
        "[model]",
    )
    for key in ("d", "mu_lower", "m", "e", "c", "beta", "mu", "chi"):
        if key not in model:
            raise ConfigError(f"[model]: missing required key '{key}'")
    L = float(model.get("L", 1.0))
    a_max_raw = model.get("a_max", "inf")
    if isinstance(a_max_raw, str):
        if a_max_raw.strip().lower() not in ("inf", "infinite", "infinity"):
            raise ConfigError(f"[model]: a_max string must spell infinity, got {a_max_raw!r}")
        a_max = math.inf
    else:
        a_max = float(a_max_raw)
    return ModelParams(
        d=float(model["d"]),
        L=L,
        m=_spatial_field(model["m"], n_x, L, "[model.m]"),
        e=_spatial_field(model["e"], n_x, L, "[model.e]"),
        c=_spatial_field(model["c"], n_x, L, "[model.c]"),
        beta=_rate_law(model["beta"], n_x, L, "[model.beta]"),
        mu=_rate_law(model["mu"], n_x, L, "[model.mu]"),
        chi=_rate_law(model["chi"], n_x, L, "[model.chi]", with_age=False),
        a_max=a_max,
        mu_lower=float(model["mu_lower"]),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    _check_keys(
        cfg, {"model", "grid", "simulate", "r0", "equilibrium", "verify", "output"}, "config"
    )
    if "model" not in cfg or "grid" not in cfg:
        raise ConfigError("config needs [model] and [grid] tables")
    grid_node = cfg["grid"]
    _check_keys(grid_node, {"n_x", "dt", "tail_tol"}, "[grid]")
    if "n_x" not in grid_node or "dt" not in grid_node:
        raise ConfigError("[grid]: n_x and dt are required")
    n_x = int(grid_node["n_x"])
    params = _model_params(cfg["model"], n_x)
    grid = build_grid(params, n_x, float(grid_node["dt"]), float(grid_node.get("tail_tol", 1e-8)))

    out_node = cfg.get("output", {})
    _check_keys(out_node, {"directory", "plot"}, "[output]")
    output_dir = Path(out_node.get("directory", "."))
    if not output_dir.is_absolute():
        output_dir = path.parent / output_dir

    sim_node = cfg.get("simulate", {})
    _check_keys(sim_node, {"t_end", "t0", "output_times", "initial", "record_u"}, "[simulate]")
    r0_node = cfg.get("r0", {})
    _check_keys(r0_node, {"k_values", "settlement"}, "[r0]")
    eq_node = cfg.get("equilibrium", {})
    _check_keys(eq_node, {"fp_tol"}, "[equilibrium]")
    verify_node = cfg.get("verify", {})
    _check_keys(verify_node, {"checks", "seed", "t_end_bounds"}, "[verify]")

    return RunConfig(
        params=params,
        grid=grid,
        simulate=sim_node,
        r0=r0_node,
        equilibrium=eq_node,
        verify=verify_node,
        output_dir=output_dir,
        plot=bool(out_node.get("plot", False)),
        config_hash="sha256:" + hashlib.sha256(raw).hexdigest(),
        base_dir=path.parent,
    )


def read_table_csv(path: Path, expected_header: str) -> np.ndarray:
    """Read one of this package's own CSV exports back into an array."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header_seen = False
            for row in reader:
                if not row or row[0].startswith("#"):
                    continue
                if not header_seen:
                    if [c.strip() for c in row] != expected_header.split(","):
                        raise ConfigError(
                            f"{path}: expected header '{expected_header}', got {','.join(row)}"
                        )
                    header_seen = True
                    continue
                rows.append([float(c) for c in row])
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed numeric row: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def build_initial_u(node: dict, params: ModelParams, grid: Discretization, base_dir: Path) -> np.ndarray:
    kind = _norm_kind(node, "[simulate.initial.u]")
    where = "[simulate.initial.u]"
    if kind == "constant":
        _check_keys(node, {"kind", "value"}, where)
        value = float(node.get("value", 1.0))
        if value < 0:
            raise ConfigError(f"{where}: constant initial data must be >= 0")
        return np.full(grid.n_x, value)
    if kind == "cosine_bump":
        _check_keys(node, {"kind", "amplitude", "modes", "base"}, where)
        base = float(node.get("base", 1.0))
        amp = float(node.get("amplitude", 0.0))
        u = np.full(grid.n_x, base)
        for mode in node.get("modes", [1]):
            u += amp * np.cos(int(mode) * np.pi * grid.x / grid.L)
        return np.maximum(u, 0.0)
    if kind == "equilibrium":
        _check_keys(node, {"kind", "file"}, where)
        table = read_table_csv(base_dir / node["file"], "x,u")
        if table.shape[0] != grid.n_x or np.abs(table[:, 0] - grid.x).max() > 1e-9 * max(1.0, grid.L):
            raise ConfigError(f"{where}: file grid does not match the configured lattice")
        return table[:, 1].copy()
    if kind == "eigenfunction":
        _check_keys(node, {"kind", "scale"}, where)
        from .spectral import principal_eigenvalue

        _, phi, _, _ = principal_eigenvalue(params, grid, 0.0)
        return float(node.get("scale", 1.0)) * phi
    raise ConfigError(f"{where}: unknown initial data kind {kind!r}")


def build_initial_w(node: dict, params: ModelParams, grid: Discretization, base_dir: Path) -> np.ndarray:
    kind = _norm_kind(node, "[simulate.initial.w]")
    where = "[simulate.initial.w]"
    if kind == "constant":
        _check_keys(node, {"kind", "value"}, where)
        value = float(node.get("value", 1.0))
        if value < 0:
            raise ConfigError(f"{where}: constant initial data must be >= 0")
        return np.full((grid.n_x, grid.n_a), value)
    if kind == "exp_decay":
        _check_keys(node, {"kind", "rate", "amplitude"}, where)
        rate = float(node.get("rate", params.mu_lower))
        amp = float(node.get("amplitude", 1.0))
        if amp < 0 or rate < 0:
            raise ConfigError(f"{where}: amplitude and rate must be >= 0")
        return np.broadcast_to(amp * np.exp(-rate * grid.ages), (grid.n_x, grid.n_a)).copy()
    if kind == "file":
        _check_keys(node, {"kind", "path"}, where)
        table = read_table_csv(base_dir / node["path"], "x,a,w")
        if table.shape[0] != grid.n_x * grid.n_a:
            raise ConfigError(
                f"{where}: expected {grid.n_x * grid.n_a} rows (x-major lattice), got {table.shape[0]}"
            )
        w = table[:, 2].reshape(grid.n_x, grid.n_a)
        xs = table[:, 0].reshape(grid.n_x, grid.n_a)
        ages = table[:, 1].reshape(grid.n_x, grid.n_a)
        if (
            np.abs(xs - grid.x[:, None]).max() > 1e-9 * max(1.0, grid.L)
            or np.abs(ages - grid.ages[None, :]).max() > 1e-9 * max(1.0, grid.A)
        ):
            raise ConfigError(f"{where}: file lattice does not match the configured lattice")
        return w.copy()
    raise ConfigError(f"{where}: unknown initial data kind {kind!r}")
