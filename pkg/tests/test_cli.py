"""CLI contract: exit codes, produced files, seed plumbing, determinism."""

import json

import pytest

from deamort.cli import main

TRIAL_CONFIG = {
    "schema_version": 1,
    "trial": {
        "n_ops": 2000,
        "op_mix": [50, 40, 10],
        "key_distribution": "uniform_random",
        "rng_seed": 3,
        "dictionary": {"capacity_n": 512, "epsilon": 0.1,
                       "move_budget_L": 3, "queue_constant_C": 4.0},
    },
}

SCALING_CONFIG = {
    "schema_version": 1,
    "scaling": {"n_list": [128, 512], "seeds": 2, "epsilon": 0.1,
                "move_budget_L": 3, "queue_constant_C": 4.0},
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def run(args):
    return main([str(a) for a in args])


def test_selftest_exits_zero(capsys):
    assert run(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("ok -") == 5


def test_usage_errors_exit_two(tmp_path):
    assert run(["bogus"]) == 2
    assert run(["trial"]) == 2  # --config missing
    assert run(["trial", "--config", tmp_path / "nope.json"]) == 2


def test_help_exits_zero():
    assert run(["--help"]) == 0


def test_bad_schema_version_exits_two(tmp_path):
    config = write_config(tmp_path, {"schema_version": 99, "trial": {}})
    assert run(["trial", "--config", config]) == 2


def test_unknown_section_keys_exit_two(tmp_path):
    payload = json.loads(json.dumps(TRIAL_CONFIG))
    payload["trial"]["typo_key"] = 1
    config = write_config(tmp_path, payload)
    assert run(["trial", "--config", config]) == 2


def test_missing_section_exits_two(tmp_path):
    config = write_config(tmp_path, {"schema_version": 1, "trial": TRIAL_CONFIG["trial"]})
    assert run(["scaling", "--config", config]) == 2


def test_adversarial_distribution_rejected_in_trial_config(tmp_path):
    payload = json.loads(json.dumps(TRIAL_CONFIG))
    payload["trial"]["key_distribution"] = "adversarial_replay"
    config = write_config(tmp_path, payload)
    assert run(["trial", "--config", config]) == 2


def test_invalid_dictionary_parameters_exit_two(tmp_path):
    payload = json.loads(json.dumps(TRIAL_CONFIG))
    payload["trial"]["dictionary"]["epsilon"] = -1.0
    config = write_config(tmp_path, payload)
    assert run(["trial", "--config", config]) == 2


def test_trial_writes_reports_and_exits_zero(tmp_path):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    assert run(["trial", "--config", config, "--out", out]) == 0
    run_dir = out / "trial"
    for name in ("trial.json", "probe_hist.csv", "move_hist.csv",
                 "queue_trace.csv", "queue_trace.png", "move_hist.png",
                 "manifest.json"):
        assert (run_dir / name).exists(), name
    payload = json.loads((run_dir / "trial.json").read_text())
    assert payload["outcome"]["oracle_mismatches"] == 0
    assert payload["outcome"]["max_move_excl_rehash"] <= 3
    header = (run_dir / "probe_hist.csv").read_text().splitlines()[0]
    assert header == "op_type,bucket,count"


def test_format_flag_controls_delimited_outputs(tmp_path):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    assert run(["trial", "--config", config, "--out", out, "--format", "json"]) == 0
    json_dir = out / "trial"
    assert (json_dir / "trial.json").exists()
    assert not (json_dir / "probe_hist.csv").exists()
    assert (json_dir / "manifest.json").exists()
    assert run(["trial", "--config", config, "--out", out, "--format", "csv"]) == 0
    csv_dir = out / "trial-2"
    assert not (csv_dir / "trial.json").exists()
    assert (csv_dir / "probe_hist.csv").exists()
    assert (csv_dir / "manifest.json").exists()


def test_run_dirs_never_overwrite(tmp_path):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    for expected in ("trial", "trial-2", "trial-3"):
        assert run(["trial", "--config", config, "--out", out]) == 0
        assert (out / expected / "manifest.json").exists()


def test_injected_oracle_fault_exits_one(tmp_path):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    assert run(["trial", "--config", config, "--out", out,
                "--inject-oracle-fault"]) == 1
    payload = json.loads((out / "trial" / "trial.json").read_text())
    assert payload["outcome"]["oracle_mismatches"] == 1


def test_seed_flag_sets_hash_material(tmp_path):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    assert run(["trial", "--config", config, "--out", out, "--seed", "1234abcd"]) == 0
    payload = json.loads((out / "trial" / "trial.json").read_text())
    assert payload["dictionary"]["seed_hex"] == f"{0x1234abcd:032x}"


def test_seed_env_var_and_flag_precedence(tmp_path, monkeypatch):
    config = write_config(tmp_path, TRIAL_CONFIG)
    out = tmp_path / "runs"
    monkeypatch.setenv("DEAMORT_SEED", "feed")
    assert run(["trial", "--config", config, "--out", out]) == 0
    env_payload = json.loads((out / "trial" / "trial.json").read_text())
    assert env_payload["dictionary"]["seed_hex"] == f"{0xfeed:032x}"
    # the flag wins over the environment
    assert run(["trial", "--config", config, "--out", out, "--seed", "beef"]) == 0
    flag_payload = json.loads((out / "trial-2" / "trial.json").read_text())
    assert flag_payload["dictionary"]["seed_hex"] == f"{0xbeef:032x}"


def test_toml_config_parses(tmp_path):
    toml = tmp_path / "w.toml"
    toml.write_text(
        "schema_version = 1\n"
        "[trial]\n"
        "n_ops = 500\n"
        "op_mix = [50, 40, 10]\n"
        'key_distribution = "uniform_random"\n'
        "rng_seed = 1\n"
        "[trial.dictionary]\n"
        "capacity_n = 128\n"
    )
    assert run(["trial", "--config", toml, "--out", tmp_path / "runs"]) == 0


def test_scaling_produces_expected_files(tmp_path):
    config = write_config(tmp_path, SCALING_CONFIG)
    out = tmp_path / "runs"
    assert run(["scaling", "--config", config, "--out", out]) == 0
    run_dir = out / "scaling"
    for name in ("scaling.csv", "scaling.json", "manifest.json", "scaling.png"):
        assert (run_dir / name).exists(), name
    report = json.loads((run_dir / "scaling.json").read_text())
    assert report["summary"]["oracle_mismatches_total"] == 0
    assert report["summary"]["deamortized_cap_violations"] == 0


def test_repeat_runs_are_byte_identical_modulo_timestamp(tmp_path):
    config = write_config(tmp_path, SCALING_CONFIG)
    out = tmp_path / "runs"
    assert run(["scaling", "--config", config, "--out", out]) == 0
    assert run(["scaling", "--config", config, "--out", out]) == 0
    first, second = out / "scaling", out / "scaling-2"
    assert (first / "scaling.csv").read_bytes() == (second / "scaling.csv").read_bytes()
    assert (first / "scaling.json").read_bytes() == (second / "scaling.json").read_bytes()
    manifests = []
    for run_dir in (first, second):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert "timestamp" in manifest
        del manifest["timestamp"]
        manifests.append(manifest)
    assert manifests[0] == manifests[1]


def test_calibrate_writes_consumable_recommendation(tmp_path):
    cal_config = write_config(
        tmp_path,
        {"schema_version": 1,
         "calibrate": {"n_range": [128, 256], "seeds": 4,
                       "l_values": [2, 3, 4], "c_values": [2, 4]}},
        name="cal.json",
    )
    out = tmp_path / "runs"
    assert run(["calibrate", "--config", cal_config, "--out", out]) == 0
    cal_dir = out / "calibrate"
    for name in ("calibration.csv", "calibration.json", "manifest.json", "calibration.png"):
        assert (cal_dir / name).exists(), name
    report = json.loads((cal_dir / "calibration.json").read_text())
    assert report["recommended"] is not None

    # the calibration report feeds defaults into another subcommand
    adv_config = write_config(
        tmp_path,
        {"schema_version": 1,
         "adversary": {"n": 256, "seeds": 2,
                       "calibration_file": str(cal_dir / "calibration.json")}},
        name="adv.json",
    )
    assert run(["adversary", "--config", adv_config, "--out", out]) == 0
    adv_dir = out / "adversary"
    for name in ("adversary.csv", "adversary.json", "manifest.json", "adversary.png"):
        assert (adv_dir / name).exists(), name
    manifest = json.loads((adv_dir / "manifest.json").read_text())
    assert manifest["config"]["section"]["move_budget_L"] == report["recommended"]["move_budget_L"]
    adv_report = json.loads((adv_dir / "adversary.json").read_text())
    assert adv_report["summary"]["deamortized_cap_violations"] == 0
