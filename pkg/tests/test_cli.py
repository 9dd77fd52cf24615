import json
import math
import os

import pytest

from conftest import carrier_pair
from slef import cli, io, synth

SMALL_GFB = ["--periods", "6", "9", "--orientations", "6"]


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def small_pair_spec(sigma=0.0, step=1.0):
    return synth.family_pair(0, sigma, step, 64, 64).to_dict()


def read_bytes(d):
    return {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d))}


def test_generate_single_is_byte_identical(tmp_path, capsys):
    spec = write(tmp_path / "p.json", small_pair_spec(0.5))
    assert cli.main(["generate", spec, str(tmp_path / "a")]) == 0
    assert cli.main(["generate", spec, str(tmp_path / "b")]) == 0
    a, b = read_bytes(tmp_path / "a"), read_bytes(tmp_path / "b")
    assert set(a) == {"frame1.pfm", "frame2.pfm", "truth_phase.pfm", "pair.json"}
    assert a == b
    meta = json.loads(a["pair.json"])
    assert meta["truth_step"] == 1.0
    assert cli.main(["generate", spec, str(tmp_path / "c"), "--seed", "5"]) == 0
    assert read_bytes(tmp_path / "c")["frame1.pfm"] != a["frame1.pfm"]


def test_generate_full_factorial(tmp_path, capsys):
    spec = write(tmp_path / "s.json", {"suite": {"width": 16, "height": 16}})
    assert cli.main(["generate", spec, str(tmp_path / "out")]) == 0
    dirs = sorted(os.listdir(tmp_path / "out"))
    assert len(dirs) == 250 and dirs[0] == "pair_0000"


def test_malformed_json_is_a_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"step": 1.0,\n "width": }')
    assert cli.main(["generate", str(bad), str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_invalid_spec_value(tmp_path, capsys):
    spec = write(tmp_path / "p.json", {"step": 4.0})
    assert cli.main(["generate", spec, str(tmp_path / "o")]) == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep"])
    assert exc.value.code == 1
    assert cli.main(["estimate-step"]) == 1


def test_missing_file_is_a_data_error(tmp_path, capsys):
    assert cli.main(["demodulate", str(tmp_path / "nope")]) == 2


def test_degenerate_pair_exit_code(tmp_path, capsys):
    f = carrier_pair(1.0).frame1
    io.save_field(f, tmp_path / "f.pfm")
    rc = cli.main(["estimate-step", "--frames", str(tmp_path / "f.pfm"), str(tmp_path / "f.pfm"),
                   "--skip-normalize"])
    assert rc == 3
    assert "fit:SLEF-LS" in capsys.readouterr().err


def test_demodulate_ideal_and_outputs(tmp_path, capsys):
    pair = carrier_pair(math.pi / 3)
    d = tmp_path / "pair"
    cli.write_pair(pair, d)
    out = tmp_path / "out"
    rc = cli.main(["demodulate", str(d), "--skip-normalize", "--method", "SLEF-LS", "--out", str(out),
                   "--dump-intermediates"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["delta_abs_error"] < 1e-6
    assert report["phase_mae"] < 1e-5
    assert {"phase.pfm", "phase.png", "report.json", "error_map.pfm", "normalized1.pfm",
            "add.pfm", "config.json"} <= set(os.listdir(out))


def test_estimate_step_all_methods(tmp_path, capsys):
    d = tmp_path / "pair"
    cli.write_pair(carrier_pair(1.2), d)
    assert cli.main(["estimate-step", str(d), "--skip-normalize"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"SLEF-LS", "SLEF-RE", "LEF-5term"}
    assert all(v["abs_error"] < 1e-6 for v in out.values())


def test_config_file_and_flag_overrides(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"methods": ["SLEF-RE"], "robust": {"kappa": 0.5}})
    args = cli.build_parser().parse_args(["estimate-step", "x", "--config", cfg, "--iterations", "5",
                                          "--kappa", "0.2", "--stride", "2", "--blend", *SMALL_GFB])
    c = cli.build_config(args)
    assert [m.value for m in c.methods] == ["SLEF-RE"]
    assert (c.robust.kappa, c.robust.max_iterations, c.stride) == (0.2, 5, 2)
    assert c.gfb.periods == (6.0, 9.0) and c.lowpass_sigma == 9.0


def test_normalize_command(tmp_path, capsys):
    pair = synth.generate_pair(synth.family_pair(1, 0.0, 1.0, 64, 64))
    io.save_field(pair.frame1, tmp_path / "f.pfm")
    rc = cli.main(["normalize", str(tmp_path / "f.pfm"), str(tmp_path / "n.pfm"),
                   "--dump-intermediates", *SMALL_GFB])
    assert rc == 0
    n = io.load_field(tmp_path / "n.pfm")
    assert n.shape == (64, 64) and n.stats().max <= 1.0
    assert os.path.exists(tmp_path / "n_filter011.pfm")
    assert os.path.exists(tmp_path / "n_magnitude.pfm")


def test_compare_command(tmp_path, capsys):
    d = tmp_path / "pair"
    spec = write(tmp_path / "p.json", small_pair_spec(0.25))
    cli.main(["generate", spec, str(d)])
    rc = cli.main(["compare", str(d), "--out", str(tmp_path / "cmp"), *SMALL_GFB])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6 and lines[2].startswith("LEF-5term+lef-piston")
    rows = json.load(open(tmp_path / "cmp" / "compare.json"))
    assert len(rows) == 4
    os.remove(d / "truth_phase.pfm")
    assert cli.main(["compare", str(d), *SMALL_GFB]) == 2


def test_sweep_command(tmp_path, capsys):
    suite = write(tmp_path / "s.json", {"suite": {"width": 64, "height": 64, "families": 2,
                                                  "noise_levels": [0.25], "steps": [1.0]}})
    a, b, s = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "s.csv"
    for path in (a, b):
        assert cli.main(["sweep", suite, "--out", str(path), "--no-timing", "--summary", str(s),
                         *SMALL_GFB]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 2 + 6
    assert s.read_text().startswith("# slef-sweep-summary v1")


def test_sweep_empty_suite(tmp_path, capsys):
    suite = write(tmp_path / "e.json", {"pairs": []})
    assert cli.main(["sweep", suite]) == 0
    assert capsys.readouterr().out.splitlines() == ["# slef-sweep-csv v1", ",".join(
        ["pattern_id", "noise_sigma", "true_delta", "method", "estimated_delta", "delta_abs_error",
         "phase_mae", "phase_mae_piston_removed", "iterations", "wall_time", "status"])]


def test_sweep_records_failures_and_continues(tmp_path, capsys):
    bad = synth.PairSpec(phase=synth.PhaseSpec(kind="linear-carrier"), width=64, height=64,
                         pattern_id=7).to_dict()
    suite = write(tmp_path / "s.json", {"pairs": [small_pair_spec(), bad]})
    assert cli.main(["sweep", suite, "--no-timing", *SMALL_GFB]) == 0
    captured = capsys.readouterr()
    rows = captured.out.splitlines()[2:]
    assert sum(",error:" in r for r in rows) == 3 and sum(r.endswith(",ok") for r in rows) == 3
    assert "3 of 6 rows failed" in captured.err
