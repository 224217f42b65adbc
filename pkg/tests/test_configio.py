"""Tests for JSON run configs: schema validation with field-naming errors,
registry determinism, modulation resolution, and file round trips."""

import math

import numpy as np
import pytest

from kfplab import config_hash, run
from kfplab.configio import (
    INITIAL_BUILDERS,
    MODULATION_PRESETS,
    SCHEMA_VERSION,
    SOURCE_BUILDERS,
    ConfigError,
    build_initial,
    build_run_config,
    default_config,
    load_config,
    resolve_config,
    save_config,
)

# frozen seeded-modulation draw for master seed 0, modulation seed 4
MOD_SEED4_AMPLITUDE = 0.5416795060059096
MOD_SEED4_FREQUENCY = 2.6602986099287538


def field_of(err: pytest.ExceptionInfo) -> str:
    return err.value.field


class TestResolve:
    def test_idempotent_with_defaults_filled(self):
        res = resolve_config(default_config())
        assert resolve_config(res) == res
        assert res["schema_version"] == SCHEMA_VERSION
        assert res["seed"] == 0
        assert res["stepper"] == "imex"
        assert res["source"] is None
        assert res["source_r"] == 2.0
        assert res["c_stab"] == 0.25
        assert res["dt"] is None and res["record_every"] is None
        assert res["safety"] == 0.9
        assert res["initial"]["params"]["v_width"] == 1.2

    def test_integer_valued_floats_coerce(self):
        doc = default_config()
        doc["grid"]["nx"] = 32.0
        assert resolve_config(doc)["grid"]["nx"] == 32

    @pytest.mark.parametrize(
        "mutate, field",
        [
            (lambda d: d.pop("schema_version"), "schema_version"),
            (lambda d: d.__setitem__("schema_version", 2), "schema_version"),
            (lambda d: d.__setitem__("extra", 1), "extra"),
            (lambda d: d.pop("kernel"), "kernel"),
            (lambda d: d.pop("initial"), "initial"),
            (lambda d: d.pop("grid"), "grid"),
            (lambda d: d["grid"].pop("nt"), "grid.nt"),
            (lambda d: d["grid"].__setitem__("slices", 4), "grid.slices"),
            (lambda d: d["grid"].__setitem__("nx", 31), "grid"),
            (lambda d: d["grid"].__setitem__("nx", True), "grid.nx"),
            (lambda d: d["grid"].__setitem__("nx", 32.5), "grid.nx"),
            (lambda d: d["kernel"].pop("s"), "kernel.s"),
            (lambda d: d["kernel"].__setitem__("s", 0.9), "kernel"),
            (lambda d: d["initial"].__setitem__("name", "vortex"), "initial.name"),
            (
                lambda d: d["initial"].__setitem__("params", {"volume": 2}),
                "initial.params.volume",
            ),
            (lambda d: d.__setitem__("stepper", "verlet"), "stepper"),
            (lambda d: d.__setitem__("seed", -1), "seed"),
            (lambda d: d.__setitem__("source_r", 1.0), "source_r"),
            (lambda d: d.__setitem__("c_stab", 0.0), "c_stab"),
            (lambda d: d.__setitem__("dt", -0.1), "dt"),
            (lambda d: d.__setitem__("record_every", 2), "record_every"),
            (lambda d: d.__setitem__("safety", 1.5), "safety"),
        ],
    )
    def test_violations_name_the_field(self, mutate, field):
        doc = default_config()
        mutate(doc)
        with pytest.raises(ConfigError) as err:
            resolve_config(doc)
        assert field_of(err) == field

    def test_unknown_registry_error_lists_entries(self):
        doc = default_config()
        doc["initial"]["name"] = "vortex"
        with pytest.raises(ConfigError, match="gaussian-bump"):
            resolve_config(doc)
        doc = default_config()
        doc["initial"]["params"] = {"volume": 2}
        with pytest.raises(ConfigError, match="takes: amplitude"):
            resolve_config(doc)

    def test_integer_parameter_stays_integer(self):
        doc = default_config()
        doc["initial"] = {"name": "plane-wave", "params": {"mode": 1.5}}
        with pytest.raises(ConfigError) as err:
            resolve_config(doc)
        assert field_of(err) == "initial.params.mode"

    def test_explicit_dt_excludes_safety(self):
        doc = default_config()
        doc["dt"] = 0.03125
        doc["safety"] = 0.8
        with pytest.raises(ConfigError) as err:
            resolve_config(doc)
        assert field_of(err) == "safety"
        del doc["safety"]
        res = resolve_config(doc)
        assert res["dt"] == 0.03125
        assert res["record_every"] == 1
        assert res["safety"] is None


class TestModulation:
    def base(self, modulation):
        doc = default_config()
        doc["kernel"] = {
            "family": "modulated",
            "s": 0.3,
            "kappa": 2.0,
            "modulation": modulation,
        }
        return resolve_config(doc)["kernel"]["modulation"]

    def test_preset_id(self):
        mod = self.base("rapid")
        assert mod == {"id": "rapid", "seed": None, "amplitude": 0.5, "frequency": 4.0}
        assert (mod["amplitude"], mod["frequency"]) == MODULATION_PRESETS["rapid"]

    def test_default_is_standard(self):
        doc = default_config()
        doc["kernel"] = {"family": "modulated", "s": 0.3, "kappa": 2.0}
        mod = resolve_config(doc)["kernel"]["modulation"]
        assert (mod["amplitude"], mod["frequency"]) == MODULATION_PRESETS["standard"]

    def test_seed_derived_frozen(self):
        mod = self.base({"seed": 4})
        assert mod["amplitude"] == pytest.approx(MOD_SEED4_AMPLITUDE, rel=1e-12)
        assert mod["frequency"] == pytest.approx(MOD_SEED4_FREQUENCY, rel=1e-12)
        assert 0.2 <= mod["amplitude"] <= 0.8
        assert 0.5 <= mod["frequency"] <= 4.0

    def test_explicit_values_win_over_id(self):
        mod = self.base({"id": "gentle", "amplitude": 0.6, "frequency": 2.0})
        assert mod["amplitude"] == 0.6 and mod["frequency"] == 2.0
        assert mod["id"] == "gentle"

    def test_validation(self):
        with pytest.raises(ConfigError, match="together"):
            self.base({"amplitude": 0.6})
        with pytest.raises(ConfigError, match="id, seed, or amplitude"):
            self.base({})
        with pytest.raises(ConfigError, match="presets"):
            self.base("chaotic")
        doc = default_config()
        doc["kernel"]["modulation"] = "standard"
        with pytest.raises(ConfigError) as err:
            resolve_config(doc)
        assert field_of(err) == "kernel.modulation"


class TestBuild:
    def test_default_runs_deterministically(self):
        cfg = build_run_config(default_config())
        traj = run(cfg)
        assert traj.fields.data.shape == (9, 32, 64)
        again = build_run_config(default_config())
        assert np.array_equal(cfg.initial, again.initial)
        assert config_hash(cfg.config_dict) == config_hash(again.config_dict)

    def test_master_seed_steers_random_fourier(self):
        doc = default_config()
        doc["initial"] = {"name": "random-fourier", "seed": 3}
        f1 = build_run_config(doc).initial
        f2 = build_run_config(doc).initial
        assert np.array_equal(f1, f2)
        doc["seed"] = 9
        assert not np.array_equal(f1, build_run_config(doc).initial)
        assert config_hash(resolve_config(doc)) != config_hash(
            resolve_config(default_config())
        )

    def test_kernel_free_transport(self):
        doc = default_config()
        doc["kernel"] = None
        cfg = build_run_config(doc)
        assert cfg.kernel is None

    def test_modulated_kernel_rejected_at_assembly(self):
        doc = default_config()
        doc["kernel"] = {"family": "modulated", "s": 0.3, "kappa": 2.0}
        with pytest.raises(ConfigError) as err:
            build_run_config(doc)
        assert field_of(err) == "(run)"

    def test_explicit_dt_honored(self):
        doc = default_config()
        doc["dt"] = 0.03125
        doc["record_every"] = 2
        cfg = build_run_config(doc)
        assert cfg.dt == 0.03125 and cfg.record_every == 2

    def test_mistimed_dt_rejected(self):
        doc = default_config()
        doc["dt"] = 0.03
        with pytest.raises(ConfigError) as err:
            build_run_config(doc)
        assert field_of(err) == "(run)"

    def test_gaussian_pulse_source(self):
        doc = default_config()
        doc["source"] = {
            "name": "gaussian-pulse",
            "params": {"amplitude": 0.3, "t_center": 0.0, "t_width": 0.5},
        }
        cfg = build_run_config(doc)
        assert cfg.source.registry_name == "gaussian-pulse"
        a0, a1 = cfg.source_at(0.0), cfg.source_at(1.0)
        assert a0.max() == pytest.approx(0.3, rel=1e-12)
        assert a1.max() / a0.max() == pytest.approx(math.exp(-2.0), rel=1e-12)

    def test_zero_source_is_none(self):
        doc = default_config()
        doc["source"] = {"name": "zero"}
        assert build_run_config(doc).source is None

    def test_plane_wave_closed_form(self):
        doc = default_config()
        doc["initial"] = {
            "name": "plane-wave",
            "params": {"amplitude": 0.7, "mode": 3, "phase": 0.25, "v_width": 2.0},
        }
        cfg = build_run_config(doc)
        g = cfg.grid
        x = g.x_coords[:, None]
        v = g.v_coords[None, :]
        want = 0.7 * np.cos(3 * x + 0.25) * np.exp(-(v**2) / 4.0)
        # x_period is 2 pi, so wavenumber mode*2pi/L is the integer mode
        assert np.allclose(cfg.initial, want, rtol=0, atol=1e-12)

    def test_trivial_builders(self):
        doc = default_config()
        doc["initial"] = {"name": "zero"}
        assert not build_run_config(doc).initial.any()
        doc["initial"] = {"name": "constant", "params": {"value": 2.5}}
        assert (build_run_config(doc).initial == 2.5).all()

    def test_two_dimensional_build(self):
        doc = default_config()
        doc["grid"] = {
            "n": 2,
            "x_period": 6.283185307179586,
            "v_halfwidth": 8.0,
            "nx": 8,
            "nv": 16,
            "t0": 0.0,
            "t1": 0.125,
            "nt": 2,
        }
        doc["stepper"] = "explicit-rk2"
        cfg = build_run_config(doc)
        assert cfg.initial.shape == (8, 8, 16, 16)

    def test_resolved_dict_rides_along(self):
        cfg = build_run_config(default_config())
        assert cfg.config_dict["initial"]["name"] == "gaussian-bump"
        assert cfg.config_dict == resolve_config(default_config())

    def test_registries_are_consistent(self):
        for name, fn in list(INITIAL_BUILDERS.items()) + list(SOURCE_BUILDERS.items()):
            assert fn.registry_name == name
            assert isinstance(fn.defaults, dict)

    def test_build_initial_helper(self):
        cfg = build_run_config(default_config())
        block = cfg.config_dict["initial"]
        assert np.array_equal(build_initial(cfg.grid, block, 0), cfg.initial)


class TestFiles:
    def test_round_trip(self, tmp_path):
        res = resolve_config(default_config())
        path = save_config(res, tmp_path / "cfg.json")
        assert load_config(path) == res

    def test_load_resolves_sparse_documents(self, tmp_path):
        path = save_config(default_config(), tmp_path / "sparse.json")
        assert load_config(path) == resolve_config(default_config())

    def test_syntax_error_names_the_line(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n "schema_version": 1,\n}\n')
        with pytest.raises(ConfigError, match="line 3"):
            load_config(bad)
