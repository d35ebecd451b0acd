"""Config validation, defaults, hashing, model building, and the CLI."""

import copy
import json
import os

import numpy as np
import pytest
import yaml

from randschrod.cli import main
from randschrod.config import (
    ConfigError,
    build_model,
    config_hash,
    resolve_config,
    validate_config,
)
from randschrod.hamiltonian import _cell_offsets


def _ids_config():
    return {
        "model": {
            "dimension": 1,
            "points_per_cell": 2,
            "v0": {"kind": "zero"},
            "single_site": {"kind": "box", "strength": 1.0, "diameter": 1.0},
            "disorder": {"omega_max": 1.0},
        },
        "experiment": {
            "kind": "ids",
            "half_width": 2,
            "theta_resolution": 3,
            "energy_min": 0.0,
            "energy_max": 4.2,
            "energy_points": 11,
        },
        "execution": {"master_seed": 7, "realizations": 3},
    }


def _msa_config(zeta=1.5):
    return {
        "model": {
            "dimension": 1,
            "points_per_cell": 2,
            "v0": {"kind": "zero"},
            "single_site": {"kind": "box", "strength": 1.0, "diameter": 1.0},
            "disorder": {"omega_max": 1.0},
        },
        "experiment": {"kind": "msa-schedule", "l0": 9, "m0": 1.0,
                       "q0": -2.0, "zeta": zeta},
        "execution": {"master_seed": 0},
    }


def _write(tmp_path, config, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return str(path)


class TestValidation:
    def test_valid_config_has_no_errors(self):
        assert validate_config(_ids_config()) == []

    def test_non_mapping_root(self):
        errors = validate_config([1, 2])
        assert len(errors) == 1
        assert "mapping" in errors[0]

    def test_missing_blocks_each_reported(self):
        errors = validate_config({})
        assert sorted(errors) == [
            "config.execution: required block is missing",
            "config.experiment: required block is missing",
            "config.model: required block is missing",
        ]

    def test_unknown_top_level_key(self):
        config = _ids_config()
        config["extra"] = 1
        assert "config.extra: unknown key" in validate_config(config)

    def test_unknown_model_key(self):
        config = _ids_config()
        config["model"]["boundary"] = "periodic"
        errors = validate_config(config)
        assert errors == ["model.boundary: unknown key"]

    def test_missing_omega_max_is_a_single_error(self):
        config = _ids_config()
        del config["model"]["disorder"]["omega_max"]
        errors = validate_config(config)
        assert errors == ["model.disorder.omega_max: required key is missing"]

    def test_zeta_range_message_names_the_open_interval(self):
        errors = validate_config(_msa_config(zeta=2.5))
        assert len(errors) == 1
        assert "experiment.zeta" in errors[0]
        assert "]1,2[" in errors[0]
        assert "2.5" in errors[0]

    def test_zeta_boundaries_rejected(self):
        assert validate_config(_msa_config(zeta=1.0))
        assert validate_config(_msa_config(zeta=2.0))
        assert validate_config(_msa_config(zeta=1.5)) == []

    def test_alpha_out_of_range_names_the_field(self):
        config = _ids_config()
        config["experiment"] = {"kind": "gap-prob", "sides": [5, 7], "alpha": 1.5}
        errors = validate_config(config)
        assert len(errors) == 1
        assert errors[0].startswith("experiment.alpha")
        assert "1.5" in errors[0]

    def test_sampled_kind_requires_realizations(self):
        config = _ids_config()
        del config["execution"]["realizations"]
        errors = validate_config(config)
        assert errors == ["execution.realizations: required key is missing"]

    def test_difference_experiment_needs_two_realizations(self):
        config = _ids_config()
        config["experiment"] = {"kind": "ids-diff", "half_widths": [2, 4],
                                "plateau_energy": 0.5}
        config["execution"]["realizations"] = 1
        errors = validate_config(config)
        assert len(errors) == 1
        assert "execution.realizations" in errors[0]
        assert ">= 2" in errors[0]

    def test_inverted_energy_window(self):
        config = _ids_config()
        config["experiment"]["energy_min"] = 5.0
        errors = validate_config(config)
        assert errors == ["experiment.energy_min: must be below energy_max"]

    def test_bool_is_not_an_integer(self):
        config = _ids_config()
        config["execution"]["master_seed"] = True
        errors = validate_config(config)
        assert len(errors) == 1
        assert "execution.master_seed" in errors[0]
        assert "expected an integer" in errors[0]

    def test_multiple_problems_all_collected(self):
        config = _ids_config()
        config["model"]["dimension"] = 3
        config["experiment"]["energy_points"] = 1
        config["stray"] = {}
        errors = validate_config(config)
        assert len(errors) == 3


class TestResolve:
    def test_defaults_made_explicit(self):
        config = _ids_config()
        del config["experiment"]["theta_resolution"]
        resolved = resolve_config(config)
        exp = resolved["experiment"]
        assert exp["method"] == "brillouin"
        assert exp["theta_resolution"] == 8
        assert resolved["model"]["align_edge"] is False
        assert resolved["model"]["disorder"]["law"] == "uniform"
        assert resolved["execution"]["output_dir"] == "runs"

    def test_threads_default_is_cpu_count(self):
        resolved = resolve_config(_ids_config())
        assert resolved["execution"]["threads"] == (os.cpu_count() or 1)

    def test_explicit_threads_kept(self):
        config = _ids_config()
        config["execution"]["threads"] = 2
        assert resolve_config(config)["execution"]["threads"] == 2

    def test_hs_check_scheme_defaults_to_gauss(self):
        config = _ids_config()
        config["experiment"] = {"kind": "hs-check", "plateau_energy": 0.3}
        del config["execution"]["realizations"]
        exp = resolve_config(config)["experiment"]
        assert exp["scheme"] == "gauss"
        assert exp["refine"] is True
        assert exp["eps_y"] == 0.0
        assert exp["plateau_order"] == 4

    def test_difference_reference_defaults_to_four_times_largest(self):
        config = _ids_config()
        config["experiment"] = {"kind": "ids-diff", "half_widths": [2, 4, 3],
                                "plateau_energy": 0.5}
        exp = resolve_config(config)["experiment"]
        assert exp["reference_half_width"] == 16

    def test_explicit_reference_kept(self):
        config = _ids_config()
        config["experiment"] = {"kind": "ids-diff", "half_widths": [2],
                                "reference_half_width": 10,
                                "plateau_energy": 0.5}
        exp = resolve_config(config)["experiment"]
        assert exp["reference_half_width"] == 10

    def test_exponential_tail_floor_default(self):
        config = _ids_config()
        config["model"]["single_site"] = {"kind": "exponential", "strength": 1.0,
                                          "diameter": 1.0, "decay_rate": 2.0}
        resolved = resolve_config(config)
        assert resolved["model"]["single_site"]["tail_floor"] == 1e-10

    def test_input_not_mutated(self):
        config = _ids_config()
        snapshot = copy.deepcopy(config)
        resolve_config(config)
        assert config == snapshot

    def test_invalid_config_raises_with_error_list(self):
        config = _ids_config()
        config["model"]["dimension"] = 3
        with pytest.raises(ConfigError) as info:
            resolve_config(config)
        assert any("model.dimension" in e for e in info.value.errors)


class TestHash:
    def test_execution_details_do_not_affect_the_hash(self):
        base = resolve_config(_ids_config())

        varied = _ids_config()
        varied["execution"]["threads"] = 5
        varied["execution"]["output_dir"] = "elsewhere"
        assert config_hash(resolve_config(varied)) == config_hash(base)

    def test_seed_and_realizations_do_affect_the_hash(self):
        base = config_hash(resolve_config(_ids_config()))

        seeded = _ids_config()
        seeded["execution"]["master_seed"] = 8
        assert config_hash(resolve_config(seeded)) != base

        repeated = _ids_config()
        repeated["execution"]["realizations"] = 4
        assert config_hash(resolve_config(repeated)) != base

    def test_key_order_does_not_affect_the_hash(self):
        config = _ids_config()
        shuffled = {
            "execution": dict(reversed(list(config["execution"].items()))),
            "experiment": dict(reversed(list(config["experiment"].items()))),
            "model": dict(reversed(list(config["model"].items()))),
        }
        assert (config_hash(resolve_config(shuffled))
                == config_hash(resolve_config(config)))

    def test_model_change_does_affect_the_hash(self):
        base = config_hash(resolve_config(_ids_config()))
        changed = _ids_config()
        changed["model"]["disorder"]["omega_max"] = 2.0
        assert config_hash(resolve_config(changed)) != base


class TestBuildModel:
    def test_cosine_potential_sampled_at_cell_offsets(self):
        config = _ids_config()
        config["model"]["points_per_cell"] = 4
        config["model"]["v0"] = {"kind": "cosine", "amplitude": 2.0}
        model = build_model(resolve_config(config))
        offs = _cell_offsets(4)
        expected = 1.0 - np.cos(2.0 * np.pi * offs)
        np.testing.assert_allclose(model.v0.cell_values, expected, atol=1e-14)

    def test_explicit_cell_values_round_trip(self):
        config = _ids_config()
        config["model"]["v0"] = {"kind": "values", "cell_values": [0.5, 1.5]}
        model = build_model(resolve_config(config))
        np.testing.assert_array_equal(model.v0.cell_values, [0.5, 1.5])

    def test_cell_values_shape_mismatch_rejected(self):
        config = _ids_config()
        config["model"]["v0"] = {"kind": "values", "cell_values": [0.1, 0.2, 0.3]}
        with pytest.raises(ConfigError) as info:
            build_model(resolve_config(config))
        assert any("cell_values" in e for e in info.value.errors)

    def test_align_edge_moves_band_minimum_to_zero(self):
        config = _ids_config()
        config["model"]["points_per_cell"] = 4
        config["model"]["v0"] = {"kind": "cosine", "amplitude": 1.0}

        raw = build_model(resolve_config(config))
        assert raw.band_minimum() > 0.1

        config["model"]["align_edge"] = True
        aligned = build_model(resolve_config(config))
        assert abs(aligned.band_minimum()) < 1e-12

    def test_disorder_wiring(self):
        config = _ids_config()
        config["model"]["disorder"] = {"law": "beta", "omega_max": 2.0,
                                       "a": 2.0, "b": 3.0}
        model = build_model(resolve_config(config))
        assert model.disorder.omega_max == 2.0
        assert model.disorder.law == "beta"
        assert model.disorder.master_seed == 7


class TestCli:
    def test_validate_only_exits_zero(self, tmp_path, capsys):
        path = _write(tmp_path, _ids_config())
        assert main(["ids", "--config", path, "--validate-only"]) == 0
        assert "config OK" in capsys.readouterr().out

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = main(["ids", "--config", str(tmp_path / "nope.yaml")])
        assert code == 2
        assert "config error:" in capsys.readouterr().err

    def test_empty_file_exits_two(self, tmp_path, capsys):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert main(["ids", "--config", str(path)]) == 2
        assert "empty" in capsys.readouterr().err

    def test_invalid_config_exits_two_listing_errors(self, tmp_path, capsys):
        config = _ids_config()
        del config["model"]["disorder"]["omega_max"]
        config["experiment"]["energy_points"] = 1
        path = _write(tmp_path, config)
        assert main(["ids", "--config", path]) == 2
        err = capsys.readouterr().err
        assert err.count("config error:") == 2
        assert "omega_max" in err

    def test_kind_mismatch_exits_two(self, tmp_path, capsys):
        path = _write(tmp_path, _ids_config())
        assert main(["bandstructure", "--config", path]) == 2
        err = capsys.readouterr().err
        assert "declares" in err
        assert "'ids'" in err

    def test_validate_only_catches_build_failures(self, tmp_path, capsys):
        config = _ids_config()
        config["model"]["v0"] = {"kind": "values", "cell_values": [1.0, 2.0, 3.0]}
        path = _write(tmp_path, config)
        assert main(["ids", "--config", path, "--validate-only"]) == 2
        assert "cell_values" in capsys.readouterr().err

    def test_empty_mass_window_exits_three_with_marker(self, tmp_path, capsys):
        config = _ids_config()
        config["experiment"] = {
            "kind": "lifshitz",
            "cells": 12,
            "energy_min": 0.05,
            "energy_max": 3.0,
            "energy_points": 12,
            "mass_low": 1e-12,
            "mass_high": 1e-11,
        }
        config["execution"]["realizations"] = 2
        path = _write(tmp_path, config)
        out = tmp_path / "runs"

        assert main(["lifshitz", "--config", path, "--out", str(out)]) == 3
        assert "numerical failure:" in capsys.readouterr().err

        markers = list(out.glob("*/FAILED"))
        assert len(markers) == 1
        assert not (markers[0].parent / "result.json").exists()

    def test_failing_check_exits_four(self, tmp_path, capsys):
        config = _ids_config()
        config["model"]["disorder"]["omega_max"] = 0.0
        config["experiment"] = {
            "kind": "theta-bounds",
            "half_width": 2,
            "energy": 4.1e-4,
            "theta_resolution": 2,
            "theta0": [0.02],
            "xi": 0.0,
        }
        config["execution"]["realizations"] = 1
        path = _write(tmp_path, config)
        out = tmp_path / "runs"

        assert main(["theta-bounds", "--config", path, "--out", str(out)]) == 4
        assert "check failed" in capsys.readouterr().err

    def _run_and_read(self, tmp_path, name, threads):
        path = _write(tmp_path, _ids_config(), name=f"{name}.yaml")
        out = tmp_path / name
        code = main(["ids", "--config", path, "--out", str(out),
                     "--threads", str(threads)])
        assert code == 0
        results = list(out.glob("*/result.json"))
        assert len(results) == 1
        return json.loads(results[0].read_text(encoding="ascii"))

    def test_thread_count_does_not_change_payloads(self, tmp_path, capsys):
        serial = self._run_and_read(tmp_path, "serial", threads=1)
        threaded = self._run_and_read(tmp_path, "threaded", threads=2)

        assert serial["payloads"] == threaded["payloads"]
        assert serial["config_hash"] == threaded["config_hash"]
        for name, entry in serial["payloads"].items():
            assert set(entry) == {"path", "sha256"}
            assert len(entry["sha256"]) == 64

    def test_result_envelope_fields(self, tmp_path, capsys):
        body = self._run_and_read(tmp_path, "envelope", threads=1)
        assert set(body) >= {"kind", "config_hash", "version", "wall_time_s",
                             "directory", "payloads", "summary", "check"}
        assert body["kind"] == "ids"
        assert body["wall_time_s"] >= 0.0
