"""Versioned JSON run configurations.

A config document fully determines an integration: grid, kernel, initial
data, source, and stepping plan.  Initial data and sources are named
registry entries with seeded parameters, so a document plus its seeds is
reproducible bit for bit.  ``resolve_config`` validates a document and
fills every default (idempotent); ``build_run_config`` turns the result
into a ready RunConfig carrying the resolved dict for hashing.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from kfplab.kernel import Kernel
from kfplab.phase import PhaseGrid, make_grid
from kfplab.solver import STEPPERS, RunConfig, plan_config

SCHEMA_VERSION = 1

# seed-stream tags so initial, source, and modulation draws never collide
_INIT_TAG, _SOURCE_TAG, _MOD_TAG = 11, 22, 33

MODULATION_PRESETS = {
    "gentle": (0.25, 1.0),
    "standard": (0.5, 1.0),
    "rapid": (0.5, 4.0),
}

_TOP_KEYS = {
    "schema_version", "seed", "grid", "kernel", "initial", "source",
    "source_r", "stepper", "c_stab", "dt", "record_every", "safety",
}
_GRID_KEYS = {"n", "x_period", "v_halfwidth", "nx", "nv", "t0", "t1", "nt"}
_KERNEL_KEYS = {"family", "s", "kappa", "c", "modulation"}
_DATA_KEYS = {"name", "seed", "params"}
_MOD_KEYS = {"id", "seed", "amplitude", "frequency"}


class ConfigError(ValueError):
    """Schema violation in a run config document, naming the field."""

    def __init__(self, field: str, why: str):
        self.field = field
        super().__init__(f"config field {field!r}: {why}")


# ---------------------------------------------------------------------------
# typed field access


def _as_int(val, path: str) -> int:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected an integer, got {val!r}")
    if isinstance(val, float):
        if not val.is_integer():
            raise ConfigError(path, f"expected an integer, got {val!r}")
        val = int(val)
    return val


def _as_float(val, path: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected a number, got {val!r}")
    return float(val)


def _as_str(val, path: str) -> str:
    if not isinstance(val, str):
        raise ConfigError(path, f"expected a string, got {val!r}")
    return val


def _as_dict(val, path: str) -> dict:
    if not isinstance(val, dict):
        raise ConfigError(path, f"expected an object, got {val!r}")
    return val


def _check_keys(block: dict, path: str, allowed: set) -> None:
    extra = sorted(set(block) - allowed)
    if extra:
        raise ConfigError(
            f"{path}.{extra[0]}" if path else extra[0],
            f"unknown key (allowed: {', '.join(sorted(allowed))})",
        )


# ---------------------------------------------------------------------------
# data registries


INITIAL_BUILDERS: dict = {}
SOURCE_BUILDERS: dict = {}


def _register(table: dict, name: str, **defaults):
    def deco(fn):
        fn.registry_name = name
        fn.defaults = defaults
        table[name] = fn
        return fn

    return deco


def _x_mesh(grid: PhaseGrid) -> list:
    out = []
    for i in range(grid.n):
        shp = [1] * (2 * grid.n)
        shp[i] = grid.nx
        out.append(grid.x_coords.reshape(shp))
    return out


def _v_mesh(grid: PhaseGrid) -> list:
    out = []
    for i in range(grid.n):
        shp = [1] * (2 * grid.n)
        shp[grid.n + i] = grid.nv
        out.append(grid.v_coords.reshape(shp))
    return out


def _torus_x2(grid: PhaseGrid, center: float):
    L = grid.x_period
    return sum(
        (np.mod(x - center + 0.5 * L, L) - 0.5 * L) ** 2 for x in _x_mesh(grid)
    )


def _v2(grid: PhaseGrid, center: float = 0.0):
    return sum((v - center) ** 2 for v in _v_mesh(grid))


@_register(INITIAL_BUILDERS, "zero")
def _init_zero(grid, rng):
    return np.zeros(grid.xshape + grid.vshape)


@_register(INITIAL_BUILDERS, "constant", value=1.0)
def _init_constant(grid, rng, value):
    return np.full(grid.xshape + grid.vshape, value)


@_register(
    INITIAL_BUILDERS, "gaussian-bump",
    amplitude=1.0, x_center=0.0, x_width=0.8, v_center=0.0, v_width=1.2,
)
def _init_gaussian(grid, rng, amplitude, x_center, x_width, v_center, v_width):
    f = amplitude * np.exp(
        -_torus_x2(grid, x_center) / (2.0 * x_width**2)
        - _v2(grid, v_center) / (2.0 * v_width**2)
    )
    return np.broadcast_to(f, grid.xshape + grid.vshape).copy()


@_register(
    INITIAL_BUILDERS, "plane-wave", amplitude=1.0, mode=1, phase=0.0, v_width=1.5
)
def _init_plane_wave(grid, rng, amplitude, mode, phase, v_width):
    k = 2.0 * np.pi * mode / grid.x_period
    arg = k * sum(_x_mesh(grid)) + phase
    f = amplitude * np.cos(arg) * np.exp(-_v2(grid) / v_width**2)
    return np.broadcast_to(f, grid.xshape + grid.vshape).copy()


def _fourier_sum(grid, rng, modes, decay, amplitude):
    """Mean-zero seeded cosine series with a gaussian velocity envelope."""
    xs, vs = _x_mesh(grid), _v_mesh(grid)
    kx = 2.0 * np.pi / grid.x_period
    f = np.zeros(grid.xshape + grid.vshape)
    for k in range(1, modes + 1):
        wave = amplitude * rng.normal() / k**decay
        for x in xs:
            wave = wave * np.cos(k * kx * x + rng.uniform(0.0, 2.0 * np.pi))
        for v in vs:
            wave = wave * np.cos(0.8 * k * v + rng.uniform(0.0, 2.0 * np.pi))
        f = f + wave
    return f * np.exp(-_v2(grid) / 6.0)


@_register(
    INITIAL_BUILDERS, "random-fourier", modes=8, decay=1.0, amplitude=0.2, offset=1.0
)
def _init_random_fourier(grid, rng, modes, decay, amplitude, offset):
    envelope = offset * np.exp(-_v2(grid) / 6.0)
    f = envelope + _fourier_sum(grid, rng, modes, decay, amplitude)
    return np.broadcast_to(f, grid.xshape + grid.vshape).copy()


@_register(SOURCE_BUILDERS, "zero")
def _src_zero(grid, rng):
    return None


@_register(
    SOURCE_BUILDERS, "gaussian-pulse",
    amplitude=1.0, t_center=0.0, t_width=0.5,
    x_center=0.0, x_width=0.8, v_center=0.0, v_width=1.2,
)
def _src_pulse(grid, rng, amplitude, t_center, t_width,
               x_center, x_width, v_center, v_width):
    profile = _init_gaussian(grid, rng, amplitude, x_center, x_width, v_center, v_width)

    def source(t):
        return profile * math.exp(-((t - t_center) ** 2) / (2.0 * t_width**2))

    return source


@_register(
    SOURCE_BUILDERS, "random-fourier",
    modes=6, decay=1.0, amplitude=0.1, omega=0.0, phase=0.0,
)
def _src_random_fourier(grid, rng, modes, decay, amplitude, omega, phase):
    base = _fourier_sum(grid, rng, modes, decay, amplitude)

    def source(t):
        return base * math.cos(omega * t + phase)

    return source


def _merge_params(given: dict, fn, path: str) -> dict:
    params = dict(fn.defaults)
    for key, val in given.items():
        if key not in params:
            takes = ", ".join(sorted(params)) or "no parameters"
            raise ConfigError(
                f"{path}.{key}",
                f"unknown parameter for {fn.registry_name!r} (takes: {takes})",
            )
        if isinstance(params[key], int) and not isinstance(params[key], bool):
            params[key] = _as_int(val, f"{path}.{key}")
        else:
            params[key] = _as_float(val, f"{path}.{key}")
    return params


# ---------------------------------------------------------------------------
# resolution


def _resolve_grid(doc: dict) -> dict:
    if "grid" not in doc:
        raise ConfigError("grid", "required block is missing")
    block = _as_dict(doc["grid"], "grid")
    _check_keys(block, "grid", _GRID_KEYS)
    missing = sorted(_GRID_KEYS - set(block))
    if missing:
        raise ConfigError(f"grid.{missing[0]}", "required field is missing")
    out = {
        "n": _as_int(block["n"], "grid.n"),
        "x_period": _as_float(block["x_period"], "grid.x_period"),
        "v_halfwidth": _as_float(block["v_halfwidth"], "grid.v_halfwidth"),
        "nx": _as_int(block["nx"], "grid.nx"),
        "nv": _as_int(block["nv"], "grid.nv"),
        "t0": _as_float(block["t0"], "grid.t0"),
        "t1": _as_float(block["t1"], "grid.t1"),
        "nt": _as_int(block["nt"], "grid.nt"),
    }
    try:
        make_grid(**out)
    except ValueError as e:
        raise ConfigError("grid", str(e)) from None
    return out


def _resolve_modulation(spec, master_seed: int, path: str) -> dict:
    if isinstance(spec, str):
        if spec not in MODULATION_PRESETS:
            raise ConfigError(
                path, f"unknown preset {spec!r} (presets: "
                f"{', '.join(sorted(MODULATION_PRESETS))})"
            )
        amp, freq = MODULATION_PRESETS[spec]
        return {"id": spec, "seed": None, "amplitude": amp, "frequency": freq}
    block = _as_dict(spec, path)
    _check_keys(block, path, _MOD_KEYS)
    mod_id = None if block.get("id") is None else _as_str(block["id"], f"{path}.id")
    mod_seed = None if block.get("seed") is None else _as_int(block["seed"], f"{path}.seed")
    has_amp = block.get("amplitude") is not None
    has_freq = block.get("frequency") is not None
    if has_amp != has_freq:
        raise ConfigError(path, "amplitude and frequency must be given together")
    if has_amp:
        amp = _as_float(block["amplitude"], f"{path}.amplitude")
        freq = _as_float(block["frequency"], f"{path}.frequency")
    elif mod_id is not None:
        if mod_id not in MODULATION_PRESETS:
            raise ConfigError(
                f"{path}.id", f"unknown preset {mod_id!r} (presets: "
                f"{', '.join(sorted(MODULATION_PRESETS))})"
            )
        amp, freq = MODULATION_PRESETS[mod_id]
    elif mod_seed is not None:
        rng = np.random.default_rng([master_seed, _MOD_TAG, mod_seed])
        amp = float(rng.uniform(0.2, 0.8))
        freq = float(rng.uniform(0.5, 4.0))
    else:
        raise ConfigError(path, "give id, seed, or amplitude and frequency")
    return {"id": mod_id, "seed": mod_seed, "amplitude": amp, "frequency": freq}


def _resolve_kernel(doc: dict, grid_n: int, master_seed: int):
    if "kernel" not in doc:
        raise ConfigError(
            "kernel", "required block is missing (use null for kernel-free transport)"
        )
    block = doc["kernel"]
    if block is None:
        return None
    block = _as_dict(block, "kernel")
    _check_keys(block, "kernel", _KERNEL_KEYS)
    for key in ("family", "s", "kappa"):
        if key not in block:
            raise ConfigError(f"kernel.{key}", "required field is missing")
    family = _as_str(block["family"], "kernel.family")
    out = {
        "family": family,
        "s": _as_float(block["s"], "kernel.s"),
        "kappa": _as_float(block["kappa"], "kernel.kappa"),
        "c": _as_float(block.get("c", 1.0), "kernel.c"),
        "modulation": None,
    }
    if block.get("modulation") is not None:
        if family != "modulated":
            raise ConfigError(
                "kernel.modulation", "only the modulated family takes a modulation block"
            )
        out["modulation"] = _resolve_modulation(
            block["modulation"], master_seed, "kernel.modulation"
        )
    elif family == "modulated":
        out["modulation"] = _resolve_modulation("standard", master_seed, "kernel.modulation")
    try:
        _kernel_from(out, grid_n)
    except ValueError as e:
        raise ConfigError("kernel", str(e)) from None
    return out


def _kernel_from(resolved: dict, grid_n: int) -> Kernel:
    kwargs = dict(
        n=grid_n,
        s=resolved["s"],
        kappa=resolved["kappa"],
        family=resolved["family"],
        c=resolved["c"],
    )
    mod = resolved.get("modulation")
    if mod is not None:
        kwargs["mod_amplitude"] = mod["amplitude"]
        kwargs["mod_frequency"] = mod["frequency"]
    return Kernel(**kwargs)


def _resolve_data(doc: dict, key: str, table: dict, required: bool):
    if key not in doc:
        if required:
            raise ConfigError(key, "required block is missing")
        return None
    block = doc[key]
    if block is None:
        if required:
            raise ConfigError(key, "block may not be null")
        return None
    block = _as_dict(block, key)
    _check_keys(block, key, _DATA_KEYS)
    if "name" not in block:
        raise ConfigError(f"{key}.name", "required field is missing")
    name = _as_str(block["name"], f"{key}.name")
    if name not in table:
        raise ConfigError(
            f"{key}.name", f"unknown entry {name!r} (registry: {', '.join(sorted(table))})"
        )
    params = _as_dict(block.get("params", {}), f"{key}.params")
    return {
        "name": name,
        "seed": _as_int(block.get("seed", 0), f"{key}.seed"),
        "params": _merge_params(params, table[name], f"{key}.params"),
    }


def resolve_config(doc: dict) -> dict:
    """Validate a config document and fill every default.

    Returns a new, JSON-serializable dict; resolving a resolved document
    reproduces it exactly.  Violations raise ConfigError naming the field.
    """
    doc = _as_dict(doc, "(document)")
    _check_keys(doc, "", _TOP_KEYS)
    if "schema_version" not in doc:
        raise ConfigError("schema_version", "required field is missing")
    version = _as_int(doc["schema_version"], "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version}")
    seed = _as_int(doc.get("seed", 0), "seed")
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")

    grid = _resolve_grid(doc)
    kernel = _resolve_kernel(doc, grid["n"], seed)
    initial = _resolve_data(doc, "initial", INITIAL_BUILDERS, required=True)
    source = _resolve_data(doc, "source", SOURCE_BUILDERS, required=False)

    source_r = _as_float(doc.get("source_r", 2.0), "source_r")
    if source_r <= 1.0:
        raise ConfigError("source_r", "must exceed 1")
    stepper = _as_str(doc.get("stepper", "imex"), "stepper")
    if stepper not in STEPPERS:
        raise ConfigError("stepper", f"unknown stepper (choose from {', '.join(STEPPERS)})")
    c_stab = _as_float(doc.get("c_stab", 0.25), "c_stab")
    if c_stab <= 0.0:
        raise ConfigError("c_stab", "must be positive")

    dt = doc.get("dt")
    if dt is not None:
        dt = _as_float(dt, "dt")
        if dt <= 0.0:
            raise ConfigError("dt", "must be positive")
        record_every = _as_int(doc.get("record_every", 1), "record_every")
        if record_every < 1:
            raise ConfigError("record_every", "must be >= 1")
        if doc.get("safety") is not None:
            raise ConfigError("safety", "only used when dt is omitted")
        safety = None
    else:
        if doc.get("record_every") is not None:
            raise ConfigError("record_every", "needs an explicit dt")
        record_every = None
        safety = _as_float(doc.get("safety", 0.9), "safety")
        if not 0.0 < safety <= 1.0:
            raise ConfigError("safety", "must lie in (0, 1]")

    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "grid": grid,
        "kernel": kernel,
        "initial": initial,
        "source": source,
        "source_r": source_r,
        "stepper": stepper,
        "c_stab": c_stab,
        "dt": dt,
        "record_every": record_every,
        "safety": safety,
    }


# ---------------------------------------------------------------------------
# building


def build_initial(grid: PhaseGrid, block: dict, master_seed: int) -> np.ndarray:
    """Materialize a resolved initial block on the grid."""
    fn = INITIAL_BUILDERS[block["name"]]
    rng = np.random.default_rng([master_seed, _INIT_TAG, block["seed"]])
    return fn(grid, rng, **block["params"])


def build_source(grid: PhaseGrid, block: dict | None, master_seed: int):
    """Materialize a resolved source block; None for absent or 'zero'."""
    if block is None:
        return None
    fn = SOURCE_BUILDERS[block["name"]]
    rng = np.random.default_rng([master_seed, _SOURCE_TAG, block["seed"]])
    src = fn(grid, rng, **block["params"])
    if src is not None:
        src.registry_name = block["name"]
    return src


def build_run_config(doc: dict) -> RunConfig:
    """Resolve a document and assemble the validated RunConfig.

    The resolved dict rides along as config_dict, so artifacts can embed
    the full configuration and its content hash.
    """
    resolved = resolve_config(doc)
    grid = make_grid(**resolved["grid"])
    kernel = None if resolved["kernel"] is None else _kernel_from(resolved["kernel"], grid.n)
    initial = build_initial(grid, resolved["initial"], resolved["seed"])
    source = build_source(grid, resolved["source"], resolved["seed"])
    try:
        if resolved["dt"] is not None:
            config = RunConfig(
                grid=grid,
                kernel=kernel,
                initial=initial,
                dt=resolved["dt"],
                record_every=resolved["record_every"],
                stepper=resolved["stepper"],
                source=source,
                source_r=resolved["source_r"],
                c_stab=resolved["c_stab"],
                config_dict=resolved,
            )
            config.validate()
        else:
            config = plan_config(
                grid,
                kernel,
                initial,
                stepper=resolved["stepper"],
                source=source,
                source_r=resolved["source_r"],
                c_stab=resolved["c_stab"],
                safety=resolved["safety"],
                config_dict=resolved,
            )
    except (ValueError, NotImplementedError) as e:
        raise ConfigError("(run)", str(e)) from None
    return config


# ---------------------------------------------------------------------------
# files


def load_config(path) -> dict:
    """Read a JSON config file and resolve it; parse errors carry the line."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            "(syntax)", f"line {e.lineno} column {e.colno}: {e.msg}"
        ) from None
    return resolve_config(doc)


def save_config(doc: dict, path) -> Path:
    """Write a config document as indented JSON; returns the path."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    return out


def default_config() -> dict:
    """Minimal valid document: small grid, homogeneous kernel, one bump."""
    return {
        "schema_version": SCHEMA_VERSION,
        "grid": {
            "n": 1,
            "x_period": 6.283185307179586,
            "v_halfwidth": 8.0,
            "nx": 32,
            "nv": 64,
            "t0": 0.0,
            "t1": 0.5,
            "nt": 9,
        },
        "kernel": {"family": "homogeneous", "s": 0.3, "kappa": 2.0},
        "initial": {"name": "gaussian-bump"},
    }
