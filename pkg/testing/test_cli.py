import json
from dataclasses import replace
from pathlib import Path

import pytest

from main import main
from services import (
    RUNNERS,
    ConfigError,
    ConfigIOError,
    ConfigLoader,
    ExperimentError,
    ExperimentResult,
    format_float,
    run_experiment,
    write_report,
)
from services.reporting import config_digest

GOOD = """\
[experiment]
name = hardy
system = euclidean3
shape = ball(1.0)
h = 0.125
p = 2
x0 = 0,0,0
"""


def write_config(tmp_path, text, name="experiment.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_valid_config_has_no_diagnostics(tmp_path):
    assert ConfigLoader().diagnose(write_config(tmp_path, GOOD)) == []


def test_gamma_out_of_range_is_reported_with_its_line(tmp_path):
    path = write_config(tmp_path, GOOD + "gamma = 3\n")
    diagnostics = ConfigLoader().diagnose(path)
    assert [d.key for d in diagnostics] == ["gamma"]
    assert diagnostics[0].line == 8
    assert "0 <= gamma <= p" in diagnostics[0].message
    assert "delta^(gamma-p) d^-gamma" in diagnostics[0].message


def test_missing_system_and_unknown_key(tmp_path):
    text = GOOD.replace("system = euclidean3\n", "") + "foo = 1\n"
    diagnostics = ConfigLoader().diagnose(write_config(tmp_path, text))
    by_key = {d.key: d for d in diagnostics}
    assert by_key["foo"].message == "unknown key"
    assert "missing system" in by_key["system"].message


def test_unparseable_value(tmp_path):
    diagnostics = ConfigLoader().diagnose(write_config(tmp_path, GOOD.replace("h = 0.125", "h = fine")))
    assert [d.key for d in diagnostics] == ["h"]


def test_load_applies_overrides(tmp_path):
    config = ConfigLoader().load(write_config(tmp_path, GOOD), {"seed": 7, "out": None})
    assert config.seed == 7
    assert config.out == "results"
    assert config.x0 == (0.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        ConfigLoader().load(write_config(tmp_path, GOOD), {"threads": 0})


def test_load_rejects_bad_configs(tmp_path):
    with pytest.raises(ConfigError):
        ConfigLoader().load(write_config(tmp_path, GOOD + "p = 0.5\n", "dup.ini"))
    with pytest.raises(ConfigError):
        ConfigLoader().load(write_config(tmp_path, "[other]\nname = hardy\n", "nosection.ini"))
    with pytest.raises(ConfigIOError):
        ConfigLoader().load(tmp_path / "missing.ini")


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    out = capsys.readouterr().out
    assert "grushin-paper-example" in out
    assert "heisenberg1" in out


def test_validate_exit_codes(tmp_path):
    assert main(["validate", str(write_config(tmp_path, GOOD))]) == 0
    assert main(["validate", str(write_config(tmp_path, GOOD + "gamma = 3\n", "bad.ini"))]) == 1
    assert main(["validate", str(tmp_path / "missing.ini")]) == 2


def test_run_with_invalid_config_returns_two(tmp_path):
    assert main(["run", str(write_config(tmp_path, GOOD + "gamma = 3\n"))]) == 2


def test_format_float_round_trips():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1.0 / 3.0)) == 1.0 / 3.0


def test_config_digest_tracks_the_seed(tmp_path):
    config = ConfigLoader().load(write_config(tmp_path, GOOD))
    assert config_digest(config) == config_digest(replace(config))
    assert config_digest(config) != config_digest(replace(config, seed=1))
    assert config_digest(config).startswith("sha256:")


def test_write_report(tmp_path):
    config = ConfigLoader().load(write_config(tmp_path, GOOD))
    result = ExperimentResult(
        "hardy",
        rows=[{"weight": "d^-2", "best_ratio": 0.25, "bound": None}],
        payload={"best_ratio": 0.25, "excess": float("inf")},
        checks={"within bound": True},
        summary=["best ratio 0.25"],
    )
    out = tmp_path / "out"
    written = write_report(out, config, result)
    names = {p.name for p in written}
    assert names == {"hardy.csv", "hardy.json", "summary.txt", "manifest.json"}

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["config_digest"] == config_digest(config)
    assert "numpy" in manifest["versions"]
    assert json.loads((out / "hardy.json").read_text())["excess"] == "inf"
    assert (out / "hardy.csv").read_text().splitlines() == ["weight,best_ratio,bound", "d^-2,0.25,"]
    assert "[pass] within bound" in (out / "summary.txt").read_text()


@pytest.mark.slow
def test_sharp_run_end_to_end(tmp_path):
    text = "[experiment]\nname = sharp\nsystem = heisenberg1\np = 2\n"
    out = tmp_path / "sharp"
    assert main(["run", str(write_config(tmp_path, text)), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["files"] == [
        "corollary_witness.field",
        "corollary_witness.json",
        "sharp.csv",
        "sharp.json",
        "summary.txt",
        "theorem_witness.field",
        "theorem_witness.json",
    ]
    assert "pushforward density matches" in manifest["checks"]


def test_batch_run_records_config_errors(tmp_path):
    from batch_run import main as batch_main

    configs = tmp_path / "configs"
    configs.mkdir()
    write_config(configs, GOOD + "gamma = 3\n", "broken.ini")
    out = tmp_path / "batch"
    assert batch_main(["--config-dir", str(configs), "--output-dir", str(out), "--skip-errors"]) == 1
    lines = (out / "batch_summary.csv").read_text().splitlines()
    assert lines[0] == "config,experiment,status,failed_checks"
    assert lines[1].startswith("broken.ini,,error,")
    assert batch_main(["--config-dir", str(tmp_path / "nowhere")]) == 1


HARDY1D = "[experiment]\nname = hardy1d\np = 2\nn_grid = 10000\n"


def test_hardy1d_needs_no_system(tmp_path):
    assert ConfigLoader().diagnose(write_config(tmp_path, HARDY1D)) == []
    diagnostics = ConfigLoader().diagnose(write_config(tmp_path, HARDY1D.replace("10000", "500"), "small.ini"))
    assert [d.key for d in diagnostics] == ["n_grid"]


def test_reruns_are_byte_identical(tmp_path):
    config = write_config(tmp_path, HARDY1D)
    out = tmp_path / "hardy1d"
    outputs = []
    for _ in range(2):
        assert main(["run", str(config), "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert set(outputs[0]) == {"hardy1d.csv", "hardy1d.json", "summary.txt", "manifest.json"}
    assert json.loads(outputs[0]["hardy1d.json"])["n_grid"] == 10000


def test_unexpected_runner_failure_is_wrapped(tmp_path, monkeypatch):
    def broken(ws):
        raise KeyError("missing table")

    monkeypatch.setitem(RUNNERS, "hardy1d", broken)
    config = ConfigLoader().load(write_config(tmp_path, HARDY1D))
    with pytest.raises(ExperimentError) as info:
        run_experiment(config)
    assert isinstance(info.value.cause, KeyError)
    assert info.value.experiment == "hardy1d"
    assert main(["run", str(write_config(tmp_path, HARDY1D, "again.ini"))]) == 1


@pytest.mark.slow
def test_mazya_run_end_to_end(tmp_path):
    text = GOOD.replace("name = hardy", "name = mazya") + "weight = boundary\n"
    out = tmp_path / "mazya"
    assert main(["run", str(write_config(tmp_path, text)), "--out", str(out)]) == 0
    payload = json.loads((out / "mazya.json").read_text())
    assert 0.0 < payload["localized"] <= payload["global"]
    assert payload["lower_estimate"] is True


@pytest.mark.slow
def test_chain_on_the_heisenberg_cube(tmp_path):
    out = tmp_path / "chain"
    config = Path(__file__).parent.parent / "configs" / "chain_htype_cube.ini"
    assert main(["run", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["checks"]["fatness c0 > 0"] is True
    assert manifest["checks"]["self-improvement below p"] is True
