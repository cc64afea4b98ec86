import json
from pathlib import Path

import pytest

from nhlattice.cli import main

FIGS = sorted(Path(__file__).resolve().parents[1].glob("configs/figs/*.json"))


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def spectrum_config(tmp_path, out="out", **overrides):
    # 40 sites: small enough to be fast, large enough for midgap modes
    cfg = {
        "run": "spectrum",
        "output_dir": str(tmp_path / out),
        "lattice": {
            "n_sites": 40,
            "hopping_J": 0.045,
            "spacing_d": 1.4,
            "re_beta": 0.0,
            "pattern": {"phase": "III", "g": 1.1},
        },
    }
    cfg.update(overrides)
    return cfg


def read_tree(root: Path):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestValidation:
    @pytest.mark.parametrize("path", FIGS, ids=[p.stem for p in FIGS])
    def test_shipped_configs_validate(self, path):
        assert main(["validate", str(path)]) == 0

    def test_malformed_json_is_status_2_without_outputs(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"run": "spectrum",,}')
        out_root = tmp_path / "out"
        code = main(["run", str(bad)])
        assert code == 2
        assert "line" in capsys.readouterr().err
        assert not out_root.exists()

    def test_unknown_field_reports_path(self, tmp_path, capsys):
        cfg = spectrum_config(tmp_path)
        cfg["lattice"]["pattern"]["g3"] = 1.0
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == 2
        assert "lattice.pattern.g3" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_missing_required_field(self, tmp_path, capsys):
        cfg = spectrum_config(tmp_path)
        del cfg["lattice"]["spacing_d"]
        assert main(["run", write_config(tmp_path, cfg)]) == 2
        assert "spacing_d" in capsys.readouterr().err

    def test_sweep_requires_grid(self, tmp_path):
        cfg = spectrum_config(tmp_path)
        assert main(["sweep", write_config(tmp_path, cfg)]) == 2

    def test_strict_params_per_run(self, tmp_path, capsys):
        cfg = spectrum_config(tmp_path, params={"z_max": 10.0})
        assert main(["run", write_config(tmp_path, cfg)]) == 2
        assert "params.z_max" in capsys.readouterr().err

    def test_validate_subcommand_runs_nothing(self, tmp_path):
        cfg = spectrum_config(tmp_path)
        assert main(["validate", write_config(tmp_path, cfg)]) == 0
        assert not (tmp_path / "out").exists()


class TestRun:
    def test_spectrum_outputs_and_manifest(self, tmp_path):
        cfg = spectrum_config(tmp_path)
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        out = tmp_path / "out"
        spectrum = (out / "spectrum.csv").read_text().splitlines()
        assert spectrum[0] == "index,ReE,ImE,condition_number"
        assert len(spectrum) == 41
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["run"] == "spectrum"
        assert len(manifest["config_sha256"]) == 64
        assert manifest["summary"]["n_zero_modes"] == 2

    def test_numerical_error_is_status_3_with_diagnostics(self, tmp_path, capsys):
        cfg = {
            "run": "winding",
            "output_dir": str(tmp_path / "out"),
            "lattice": {
                "hopping_J": 0.045,
                "spacing_d": 1.4,
                "pattern": {"phase": "I"},
            },
        }
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == 3
        diag = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
        assert diag["error_class"] == "GaplessSpectrumError"

    def test_interface_lattice_and_derived_parameters(self, tmp_path):
        cfg = {
            "run": "spectrum",
            "output_dir": str(tmp_path / "out"),
            "lattice": {
                "hopping_J": "auto",
                "spacing_d": 1.4,
                "interface": {"n_left_cells": 3, "n_right_cells": 3, "im_beta": 0.1},
            },
        }
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        derived = manifest["derived_parameters"]
        assert derived["lattice.hopping_J_from_spacing"] == pytest.approx(0.045, rel=1e-9)
        assert derived["lattice.interface.left.g_from_im_beta"] == pytest.approx(1.111, abs=1e-3)

    def test_run_is_deterministic(self, tmp_path):
        cfg = spectrum_config(tmp_path, out="out1")
        main(["run", write_config(tmp_path, cfg, "c1.json")])
        cfg2 = spectrum_config(tmp_path, out="out2")
        main(["run", write_config(tmp_path, cfg2, "c2.json")])
        t1 = read_tree(tmp_path / "out1")
        t2 = read_tree(tmp_path / "out2")
        assert list(t1) == list(t2)
        # manifests differ only through output_dir inside the hashed config
        assert t1["spectrum.csv"] == t2["spectrum.csv"]


class TestSweep:
    def test_single_point_grid_matches_plain_run(self, tmp_path):
        plain = spectrum_config(tmp_path, out="plain")
        main(["run", write_config(tmp_path, plain, "plain.json")])
        swept = spectrum_config(tmp_path, out="swept")
        swept["grid"] = [{"path": "lattice.pattern.g", "values": [1.1]}]
        main(["sweep", write_config(tmp_path, swept, "swept.json")])
        point = read_tree(tmp_path / "swept" / "point_000")
        assert point["spectrum.csv"] == read_tree(tmp_path / "plain")["spectrum.csv"]
        results = (tmp_path / "swept" / "results.csv").read_text().splitlines()
        assert len(results) == 2

    def test_two_parameter_grid_order(self, tmp_path):
        cfg = spectrum_config(tmp_path, out="sweep2")
        cfg["grid"] = [
            {"path": "lattice.pattern.g", "values": [0.7, 1.1]},
            {"path": "lattice.n_sites", "values": [12, 16]},
        ]
        main(["run", write_config(tmp_path, cfg)])
        rows = (tmp_path / "sweep2" / "results.csv").read_text().splitlines()
        assert len(rows) == 5
        assert rows[1].startswith("0,0.69999999999999996,12")
        assert rows[4].startswith("3,1.1000000000000001,16")

    def test_failed_point_recorded_not_fatal(self, tmp_path):
        cfg = {
            "run": "winding",
            "output_dir": str(tmp_path / "out"),
            "lattice": {
                "hopping_J": 0.045,
                "spacing_d": 1.4,
                "pattern": {"phase": "III", "g": 1.1},
            },
            "grid": [{"path": "lattice.pattern", "values": [
                {"phase": "III", "g": 1.1},
                {"phase": "I"},
            ]}],
        }
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        rows = (tmp_path / "out" / "results.csv").read_text().splitlines()
        assert rows[1].endswith(",")  # first point clean
        assert rows[2].endswith("GaplessSpectrumError")
        manifest = json.loads((tmp_path / "out" / "sweep_manifest.json").read_text())
        assert manifest["failed_points"] == [1]

    def test_worker_pool_output_identical(self, tmp_path, monkeypatch):
        cfg = spectrum_config(tmp_path, out="serial")
        cfg["grid"] = [{"path": "lattice.pattern.g", "values": [0.7, 0.9, 1.1]}]
        main(["run", write_config(tmp_path, cfg, "serial.json")])
        monkeypatch.setenv("NHLATTICE_WORKERS", "3")
        cfg2 = spectrum_config(tmp_path, out="parallel")
        cfg2["grid"] = [{"path": "lattice.pattern.g", "values": [0.7, 0.9, 1.1]}]
        main(["run", write_config(tmp_path, cfg2, "parallel.json")])
        serial = read_tree(tmp_path / "serial")
        parallel = read_tree(tmp_path / "parallel")
        assert {k: v for k, v in serial.items() if "manifest" not in k} == {
            k: v for k, v in parallel.items() if "manifest" not in k
        }

    def test_grid_path_must_exist(self, tmp_path):
        cfg = spectrum_config(tmp_path)
        cfg["grid"] = [{"path": "lattice.nonexistent", "values": [1]}]
        assert main(["run", write_config(tmp_path, cfg)]) == 2


class TestRunTypes:
    def test_calibrate_builtin(self, tmp_path):
        cfg = {
            "run": "calibrate",
            "output_dir": str(tmp_path / "out"),
            "params": {"kind": "J_vs_d", "points": "builtin", "predict_at": [1.4]},
        }
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        record = json.loads((tmp_path / "out" / "calibration.json").read_text())
        assert record["predictions"][0][1] == pytest.approx(0.045, rel=1e-9)

    def test_symmetry_run(self, tmp_path):
        cfg = {
            "run": "symmetry",
            "output_dir": str(tmp_path / "out"),
            "params": {"k_samples": 8},
        }
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        report = json.loads((tmp_path / "out" / "symmetry.json").read_text())
        assert report["nontrivial"]["class_label"] == "BDI"
        assert report["trivial"]["class_label"] == "BDI"

    def test_fit_run_decay(self, tmp_path):
        cfg = {
            "run": "fit",
            "output_dir": str(tmp_path / "out"),
            "lattice": {
                "hopping_J": 0.045,
                "spacing_d": 1.4,
                "re_beta": 0.0,
                "interface": {"n_left_cells": 3, "n_right_cells": 3, "im_beta": 0.1},
            },
            "excitation": {"kind": "interface"},
            "params": {"fit": "decay", "z_max": 40.0},
        }
        assert main(["run", write_config(tmp_path, cfg)]) == 0
        record = json.loads((tmp_path / "out" / "fit.json").read_text())
        assert record["fit"] == "decay"
        assert record["ell"] > 0
