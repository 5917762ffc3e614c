import csv
import io
import json
from pathlib import Path

import pytest

from sirefine.aux import parse_aux_spec
from sirefine.bounds import thm2_value
from sirefine.cli import main
from sirefine.optimize import SearchConfig, minimize_thm2
from sirefine.source import DistortionMeasure, doubly_symmetric_binary, load_source_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=1))
    return str(p)


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate(tmp_path, capsys):
    code, out, _ = _run(capsys, "validate", "--source", str(SPECS / "wz_binary.json"))
    assert code == 0 and "valid" in out
    bad = _write(tmp_path, "bad.json", {"t": 1, "alphabets": [2, 1], "pmf": [0.5, 0.6]})
    code, out, _ = _run(capsys, "validate", "--source", bad)
    assert code == 2 and "sum" in out


def test_counterexample(capsys):
    code, out, _ = _run(capsys, "counterexample")
    assert code == 0
    assert "R0 candidate (0.000000) < Slepian-Wolf rate (1.584963): counterexample CONFIRMED" in out
    assert "1.58496250072" in out
    assert "I(U13; U12 | X, U123) = 1.584963" in out


def test_bounds_trivial_optimize(tmp_path, capsys):
    spec = {"t": 1, "alphabets": [2, 2], "pmf": [0.5, 0, 0, 0.5], "distortion": [[[0, 1], [1, 0]]], "d": [0]}
    path = _write(tmp_path, "same.json", spec)
    cfg = _write(tmp_path, "cfg.json", {"restarts": 2, "max_iter": 30})
    code, out, _ = _run(capsys, "bounds", "--source", path, "--optimize", "--config", cfg)
    assert code == 0
    assert json.loads(out)["optimized"]["value"] == 0.0


def test_bounds_lossless_example3(capsys):
    code, out, _ = _run(capsys, "bounds", "--source", str(SPECS / "example3_source.json"), "--lossless")
    assert code == 0 and json.loads(out)["slepian_wolf"] == pytest.approx(1.584963, abs=1e-6)


def test_bounds_grid_matches_engine(tmp_path, capsys):
    cfg = _write(tmp_path, "cfg.json", {"grid_step": 1 / 16})
    code, out, _ = _run(capsys, "bounds", "--source", str(SPECS / "wz_binary.json"), "--optimize",
                        "--engine", "grid", "--config", cfg)
    got = json.loads(out)["optimized"]["value"]
    q = doubly_symmetric_binary(0.1)
    ref = minimize_thm2(q, [0.05], [DistortionMeasure.hamming(1, 2)],
                        cfg=SearchConfig(engine="grid", grid_step=1 / 16))[1]
    assert code == 0 and got == float(f"{ref:.12g}")


def test_dump_round_trip(tmp_path, capsys):
    out_path = tmp_path / "res.json"
    cfg = _write(tmp_path, "cfg.json", {"restarts": 2, "max_iter": 40})
    code, _, _ = _run(capsys, "bounds", "--source", str(SPECS / "wz_binary.json"), "--optimize",
                      "--config", cfg, "--out", str(out_path))
    assert code == 0
    res = json.loads(out_path.read_text())
    prob = load_source_spec(SPECS / "wz_binary.json")
    sys = parse_aux_spec(json.dumps(res["optimized"]["system"]), prob.source)
    assert f"{thm2_value(sys):.12g}" == f"{res['thm2']:.12g}"


def test_infeasible_exit_code(tmp_path, capsys):
    spec = {"t": 1, "alphabets": [2, 1], "pmf": [0.5, 0.5], "distortion": [[[0, 1], [1, 0]]], "d": [0]}
    path = _write(tmp_path, "nosi.json", spec)
    aux = _write(tmp_path, "aux.json", {"v": [[1]], "aux_sizes": [1], "channel": [1, 1]})
    code, _, err = _run(capsys, "bounds", "--source", path, "--aux", aux)
    assert code == 3 and "infeasible" in err


def test_region_degraded(capsys, tmp_path):
    cfg = _write(tmp_path, "cfg.json", {"aux_sizes": {"U12": 2, "U1": 1, "U2": 2}, "restarts": 2,
                                        "max_iter": 60, "lists": "canonical"})
    code, out, _ = _run(capsys, "region", "--source", str(SPECS / "degraded_t2.json"), "--weights", "1,0;1,1",
                        "--config", cfg)
    assert code == 0
    pts = json.loads(out)["boundary"]
    assert len(pts) == 2 and all(len(p["prefix_bounds"]) == 2 for p in pts)


def test_lossless_command(capsys):
    code, out, _ = _run(capsys, "lossless", "--source", str(SPECS / "lossless_t2.json"), "--w-sizes", "2,2")
    res = json.loads(out)
    assert code == 0 and res["prefix_bounds"] == [1.0, 2.0] and res["single_channel_rate"] == 2.0


def test_simulate_csv(tmp_path, capsys):
    out_path = tmp_path / "stats.csv"
    code, _, _ = _run(capsys, "simulate", "--source", str(SPECS / "sim_source.json"), "--aux",
                      str(SPECS / "sim_aux.json"), "--n", "100,200", "--trials", "50", "--seed", "7",
                      "--out", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_path.read_text())))
    assert set(rows[0]) == {"n", "event", "subset", "decoder", "empirical_rate", "trials"}
    assert {r["n"] for r in rows} == {"100", "200"}


def test_missing_file_is_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["validate", "--source", "/nonexistent.json"])
