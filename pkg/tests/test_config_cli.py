"""Config grammar, validation, CLI commands, and output reproducibility."""

import json
import os

import numpy as np
import pytest

from jjswitch.cli import main
from jjswitch.config import (
    apply_overrides,
    build_physics,
    config_text,
    effective_dimension,
    load_config,
    parse_config_text,
)
from jjswitch.errors import ConfigError
from jjswitch.output import extract_embedded_config

# Full physics but an artificially fast ramp: grids of a few thousand steps,
# so end-to-end command tests stay quick.
FAST_TELEGRAPH = """
[junction]
eta = 0.005
[drive]
rabi_MHz = 10.0
ramp_rate_uA_per_s = 2.0e5
dc_start_uA = 35.55
[engine]
ramps = 40
trajectories = 60
master_seed = 777
"""

FAST_BARE = """
[tls]
enabled = false
[drive]
rabi_MHz = 0.0
ramp_rate_uA_per_s = 2.0e5
dc_start_uA = 35.55
[engine]
trajectories = 80
master_seed = 777
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestConfigParsing:
    def test_empty_gives_reference_defaults(self):
        cfg = parse_config_text("")
        assert cfg.I0_uA == 35.9
        assert cfg.C_pF == 4.0
        assert cfg.R_kOhm == pytest.approx(416.6667, rel=1e-4)
        assert cfg.T_K == 0.018
        assert cfg.f_drive_GHz == 9.02
        assert cfg.f_TLS_GHz == 8.7
        assert cfg.coupling_MHz == 200.0
        assert cfg.rabi_MHz == 10.0
        assert cfg.ramp_rate_uA_per_s == 4.5e3
        assert cfg.tls_enabled is True
        assert effective_dimension(cfg) == 4
        assert "junction.I0_uA" in cfg.defaulted

    def test_gamma10_default_matches_paper_rate(self):
        cfg = parse_config_text("")
        p, _, _, _ = build_physics(cfg)
        from jjswitch.physics import relaxation_rate

        assert relaxation_rate(p, 35.6e-6) == pytest.approx(0.6e6, rel=1e-5)

    def test_parse_error_carries_line_number(self):
        with pytest.raises(ConfigError, match=":3"):
            parse_config_text("[junction]\nI0_uA = 35.9\nI0_uA 36\n")

    def test_unknown_key_and_section(self):
        with pytest.raises(ConfigError, match="unknown key junction.bogus"):
            parse_config_text("[junction]\nbogus = 1\n")
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config_text("[junk]\nx = 1\n")

    def test_validation_names_key(self):
        with pytest.raises(ConfigError, match="eta"):
            parse_config_text("[junction]\neta = -0.1\n")

    def test_rabi_and_amplitude_exclusive(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config_text("[drive]\nrabi_MHz = 10\nI_uw_nA = 0.4\n")

    def test_amplitude_only_accepted(self):
        cfg = parse_config_text("[drive]\nI_uw_nA = 0.43\n")
        assert cfg.rabi_MHz is None
        _, _, d, _ = build_physics(cfg)
        assert d.microwave_amplitude == pytest.approx(0.43e-9, rel=1e-12)

    def test_dimension_consistency(self):
        with pytest.raises(ConfigError, match="dimension"):
            parse_config_text("[tls]\nenabled = false\n[engine]\ndimension = 4\n")
        cfg = parse_config_text("[tls]\nenabled = false\n")
        assert effective_dimension(cfg) == 2

    def test_overrides(self):
        cfg = parse_config_text("")
        cfg = apply_overrides(cfg, ["junction.eta=0.002", "engine.ramps=5"])
        assert cfg.eta == 0.002 and cfg.ramps == 5
        with pytest.raises(ConfigError):
            apply_overrides(cfg, ["nope.key=1"])

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# top\n\n[junction]\nI0_uA = 36.0  # inline\n")
        assert cfg.I0_uA == 36.0

    def test_config_text_round_trip(self):
        cfg = parse_config_text(FAST_TELEGRAPH)
        again = parse_config_text(config_text(cfg))
        assert config_text(again) == config_text(cfg)
        assert again.ramp_rate_uA_per_s == cfg.ramp_rate_uA_per_s


class TestCliCommands:
    def test_simulate_outputs_and_determinism(self, tmp_path):
        cfg_path = write(tmp_path, "fast.cfg", FAST_TELEGRAPH)
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["simulate", "--config", cfg_path, "--out", out1]) == 0
        assert main(["simulate", "--config", cfg_path, "--out", out2]) == 0
        rec1 = open(os.path.join(out1, "records.csv"), "rb").read()
        rec2 = open(os.path.join(out2, "records.csv"), "rb").read()
        assert rec1 == rec2
        summary = json.load(open(os.path.join(out1, "summary.json")))
        assert summary["ramps"] == 40
        assert summary["config"]["engine"]["master_seed"] == 777

    def test_simulate_worker_invariance(self, tmp_path):
        cfg_path = write(tmp_path, "fast.cfg", FAST_TELEGRAPH)
        out1, out2 = str(tmp_path / "w1"), str(tmp_path / "w2")
        assert main(["simulate", "--config", cfg_path, "--out", out1, "--workers", "1"]) == 0
        assert main(["simulate", "--config", cfg_path, "--out", out2, "--workers", "2"]) == 0
        assert (
            open(os.path.join(out1, "records.csv"), "rb").read()
            == open(os.path.join(out2, "records.csv"), "rb").read()
        )

    def test_embedded_config_reproduces_run(self, tmp_path):
        cfg_path = write(tmp_path, "fast.cfg", FAST_TELEGRAPH)
        out1 = str(tmp_path / "orig")
        assert main(["simulate", "--config", cfg_path, "--out", out1]) == 0
        rec_path = os.path.join(out1, "records.csv")
        recovered = extract_embedded_config(rec_path)
        cfg2_path = write(tmp_path, "recovered.cfg", config_text(recovered))
        out2 = str(tmp_path / "redo")
        assert main(["simulate", "--config", cfg2_path, "--out", out2]) == 0
        assert (
            open(rec_path, "rb").read()
            == open(os.path.join(out2, "records.csv"), "rb").read()
        )

    def test_ensemble_outputs(self, tmp_path):
        cfg_path = write(tmp_path, "bare.cfg", FAST_BARE)
        out = str(tmp_path / "ens")
        assert main(["ensemble", "--config", cfg_path, "--out", out, "--workers", "2"]) == 0
        summary = json.load(open(os.path.join(out, "summary.json")))
        assert 0.0 <= summary["tv_distance"] <= 1.0
        hist_lines = [
            l
            for l in open(os.path.join(out, "histogram.csv")).read().splitlines()
            if l and not l.startswith("#")
        ]
        assert hist_lines[0] == "bin_lo_uA,bin_hi_uA,count"
        total = sum(int(l.split(",")[2]) for l in hist_lines[1:])
        assert total == 80
        master_lines = [
            l
            for l in open(os.path.join(out, "master.csv")).read().splitlines()
            if l and not l.startswith("#")
        ]
        assert master_lines[0] == "I_uA,density_per_uA,survival"

    def test_two_level_run_reports_unimodal(self, tmp_path):
        cfg_path = write(tmp_path, "bare.cfg", FAST_BARE)
        out = str(tmp_path / "uni")
        assert main(["simulate", "--config", cfg_path, "--out", out,
                     "--set", "engine.ramps=40"]) == 0
        summary = json.load(open(os.path.join(out, "summary.json")))
        assert summary["branches"]["bimodal"] is False
        assert not os.path.exists(os.path.join(out, "labels.csv"))

    def test_singleton_sweep_matches_simulate(self, tmp_path):
        from jjswitch import rng

        cfg_path = write(tmp_path, "fast.cfg", FAST_TELEGRAPH)
        out = str(tmp_path / "sweep")
        assert main(["sweep", "--config", cfg_path, "--out", out,
                     "--axis", "rabi_MHz", "--values", "10.0"]) == 0
        child_seed = rng.derive_seed(777, 0)
        out_sim = str(tmp_path / "sim")
        assert main(["simulate", "--config", cfg_path, "--out", out_sim,
                     "--seed", str(child_seed)]) == 0
        sweep_records = open(os.path.join(out, "rabi_MHz_10", "records.csv"), "rb").read()
        sim_records = open(os.path.join(out_sim, "records.csv"), "rb").read()
        assert sweep_records == sim_records
        lines = [
            l
            for l in open(os.path.join(out, "sweep.csv")).read().splitlines()
            if l and not l.startswith("#")
        ]
        assert lines[0].startswith("value,mean_dwell_upper,mean_dwell_lower,jumps")

    def test_lz_report(self, tmp_path, capsys):
        out = str(tmp_path / "lz")
        assert main(["lz", "--config", "configs/lz_midregime.cfg", "--out", out]) == 0
        summary = json.load(open(os.path.join(out, "summary.json")))
        assert summary["regime"] == "intermediate"
        assert abs(summary["p_lz_numeric"] - summary["p_lz_closed_form"]) < 0.02
        # no coupling: fully diabatic
        out2 = str(tmp_path / "lz0")
        assert main(["lz", "--config", "configs/lz_midregime.cfg", "--out", out2,
                     "--set", "tls.coupling_MHz=0"]) == 0
        summary2 = json.load(open(os.path.join(out2, "summary.json")))
        assert summary2["p_lz_closed_form"] == 1.0

    def test_exit_codes(self, tmp_path):
        bad = write(tmp_path, "bad.cfg", "[junction]\neta = 5\n")
        assert main(["simulate", "--config", bad, "--out", str(tmp_path / "x")]) == 2
        missing_bracket = write(tmp_path, "bad2.cfg", "[drive]\nf_drive_GHz = 200\n")
        assert main(["simulate", "--config", missing_bracket,
                     "--out", str(tmp_path / "y")]) == 3
