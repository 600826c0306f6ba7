import json

import numpy as np
import pytest

from railscope.cli import main
from railscope.dut_synth import load_scenario, save_scenario
from railscope.trace_codec import write_trace

from conftest import make_trace, two_rail_scenario


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Scenario + captured trace shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    scenario = root / "scenario.json"
    trace = root / "trace.ptrc"
    assert main(["synth", "--preset", "visual-servoing", "--out", str(scenario)]) == 0
    assert (
        main(
            [
                "capture",
                "--scenario", str(scenario),
                "--out", str(trace),
                "--pretrigger", "1.05",
                "--posttrigger", "0.1",
            ]
        )
        == 0
    )
    return root, scenario, trace


def test_synth_writes_valid_scenario(workspace):
    _, scenario_path, _ = workspace
    scenario = load_scenario(scenario_path)
    assert scenario.duration_s == 2.0


def test_analyze_frames_finds_all_events(workspace, capsys):
    _, _, trace = workspace
    assert main(["analyze", "frames", "--trace", str(trace), "--rail", "phy2-io"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t_start_ns,t_end_ns,duration_ns,peak_current_a"
    assert len(lines) == 1001


def test_analyze_energy(workspace, capsys):
    _, _, trace = workspace
    assert main(
        ["analyze", "energy", "--trace", str(trace), "--rail", "vccint",
         "--from", "0.1", "--to", "0.9"]
    ) == 0
    out = capsys.readouterr().out.splitlines()
    rail, t0, t1, joules = out[1].split(",")
    # 0.55 A at ~1 V for 0.8 s
    assert float(joules) == pytest.approx(0.44, rel=0.01)


def test_analyze_spectrum_alias_peak(workspace, capsys):
    _, _, trace = workspace
    assert main(
        ["analyze", "spectrum", "--trace", str(trace), "--rail", "phy1-core"]
    ) == 0
    rows = capsys.readouterr().out.splitlines()[2:]  # skip header and DC bin
    freqs, power = zip(*((float(a), float(b)) for a, b in (r.split(",") for r in rows)))
    assert freqs[int(np.argmax(power))] == pytest.approx(50_000, abs=2.0)


def test_analyze_compare(workspace, capsys):
    _, _, trace = workspace
    assert main(["analyze", "compare", "--trace", str(trace), "--rail", "phy2-io"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert row[2] == "false"


def test_analyze_plot_renders_svg(workspace, tmp_path):
    _, _, trace = workspace
    plot = tmp_path / "frames.svg"
    assert main(
        ["analyze", "frames", "--trace", str(trace), "--rail", "phy2-io",
         "--plot", str(plot)]
    ) == 0
    assert plot.stat().st_size > 0
    assert b"<svg" in plot.read_bytes()[:200]


def test_decode_to_csv_file(workspace, tmp_path):
    _, _, trace = workspace
    out = tmp_path / "trace.csv"
    assert main(["decode", str(trace), "--csv", str(out), "--rails", "phy2-io"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "timestamp_ns,phy2-io_vcode,phy2-io_icode"


def test_export_alias(workspace, tmp_path):
    _, _, trace = workspace
    out = tmp_path / "trace.csv"
    assert main(
        ["export", "--trace", str(trace), "--out", str(out), "--units"]
    ) == 0
    assert out.exists()


def test_decode_empty_trace(tmp_path, capsys):
    trace, _ = make_trace(np.empty(0, dtype=np.uint16))
    path = tmp_path / "empty.ptrc"
    write_trace(trace, path)
    assert main(["decode", str(path)]) == 0
    assert capsys.readouterr().out == "timestamp_ns,core_vcode,core_icode\n"


def test_capture_without_trigger_exits_2(tmp_path, capsys):
    import dataclasses

    scenario = dataclasses.replace(two_rail_scenario(), trigger=None)
    path = tmp_path / "no_trigger.json"
    save_scenario(scenario, path)
    out = tmp_path / "t.ptrc"
    assert main(["capture", "--scenario", str(path), "--out", str(out)]) == 2
    assert "no trigger" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert main(["analyze", "frames", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_rail_exits_2(workspace, capsys):
    _, _, trace = workspace
    assert main(["analyze", "frames", "--trace", str(trace), "--rail", "nope"]) == 2


def test_deterministic_outputs(tmp_path):
    s1, s2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["synth", "--out", str(s1)]) == 0
    assert main(["synth", "--out", str(s2)]) == 0
    assert s1.read_bytes() == s2.read_bytes()

    scenario = two_rail_scenario(duration_s=0.4)
    spath = tmp_path / "small.json"
    save_scenario(scenario, spath)
    t1, t2 = tmp_path / "a.ptrc", tmp_path / "b.ptrc"
    for out in (t1, t2):
        assert main(
            ["capture", "--scenario", str(spath), "--out", str(out),
             "--posttrigger", "0.05"]
        ) == 0
    assert t1.read_bytes() == t2.read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    spath = tmp_path / "s.json"
    assert main(["synth", "--seed", "1", "--out", str(spath)]) == 0
    assert load_scenario(spath).seed == 1
    monkeypatch.setenv("RAILSCOPE_SEED", "777")
    assert main(["synth", "--seed", "1", "--out", str(spath)]) == 0
    assert load_scenario(spath).seed == 777
