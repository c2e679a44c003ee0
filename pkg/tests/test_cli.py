import json
from pathlib import Path

import pytest

from growthlab.cli import main, read_config
from growthlab.reporting import (CriterionOutcome, GoldenTable, OutputCollision, RunManifest, SchemaError,
                                 atomic_write, diff_golden, file_sha256)

GOLDEN = Path(__file__).parent / "data" / "census_perturbed_q8.csv"


# reporting -----------------------------------------------------------------

def test_atomic_write_refuses_to_clobber(tmp_path):
    target = tmp_path / "a" / "out.csv"
    atomic_write(target, "x\n")
    with pytest.raises(OutputCollision):
        atomic_write(target, "y\n")
    atomic_write(target, "y\n", force=True)
    assert target.read_text() == "y\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.csv"]


def test_golden_round_trip_and_hash_check():
    table = GoldenTable(["n", "value"], [["1", "0.5"], ["2", "0.25"]])
    again = GoldenTable.from_text(table.to_text())
    assert again == table
    tampered = table.to_text().replace("n,value", "n,val")
    with pytest.raises(SchemaError):
        GoldenTable.from_text(tampered)


def test_diff_identical_is_empty():
    g = GoldenTable.load(GOLDEN)
    assert diff_golden(g, g).clean


def test_diff_lists_integer_off_by_one():
    g = GoldenTable.load(GOLDEN)
    rows = [list(r) for r in g.rows]
    rows[6][1] = str(int(rows[6][1]) + 1)
    rep = diff_golden(GoldenTable(g.header, rows), g)
    assert [(d.row, d.column) for d in rep.diffs] == [(7, "N_eq")]


def test_diff_real_columns_use_tolerance():
    g = GoldenTable(["l", "N"], [["1.0", "1"]])
    out = GoldenTable(["l", "N"], [["1.0000001", "1"]])
    assert diff_golden(out, g, {"l": 1e-6}).clean
    assert not diff_golden(out, g, {"l": 1e-9}).clean


def test_diff_schema_mismatch_is_an_error():
    with pytest.raises(SchemaError):
        diff_golden(GoldenTable(["a"], []), GoldenTable(["b"], []))


def test_diff_reports_missing_rows():
    g = GoldenTable(["n"], [["1"], ["2"]])
    rep = diff_golden(GoldenTable(["n"], [["1"]]), g)
    assert rep.diffs[0].row == 2 and rep.diffs[0].got == "<missing>"


def test_manifest_round_trip():
    m = RunManifest("count", {"a": 1}, 7, ["count"])
    m.record(CriterionOutcome(1, "x", True, {"v": 1.0}, {"v": 2.0}))
    back = RunManifest.from_json(m.to_json())
    assert back.criteria == m.criteria and back.seed == 7 and back.passed


def test_criterion_line_format():
    line = CriterionOutcome(4, "liminf envelope", False, {"minimum": 0.3832}, {}).line()
    assert line.startswith("criterion  4 FAIL  liminf envelope") and "minimum=0.3832" in line


# command line --------------------------------------------------------------

def test_count_writes_one_row_per_denominator(tmp_path):
    assert main(["count", "--n-max", "1000", "--window", "0,1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "count.csv").read_text().splitlines()
    assert lines[0] == "n,phi,phi_window,Phi,Psi" and len(lines) == 1001
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"]["count.csv"] == file_sha256(tmp_path / "count.csv")
    assert manifest["params"]["geodesics"]["claim_tol"] == 1e-6
    assert manifest["seed"] is None and manifest["params"]["seeds"] == {}   # nothing random was run


def test_replay_reproduces_bytes(tmp_path):
    first = tmp_path / "first"
    assert main(["count", "--n-max", "200", "--window=-1/3,1/2", "--n0", "3", "--out", str(first)]) == 0
    assert main(["replay", str(first / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "count.csv").read_bytes() == (first / "count.csv").read_bytes()


def test_output_collision_needs_force(tmp_path):
    args = ["count", "--n-max", "10", "--out", str(tmp_path)]
    assert main(args) == 0
    assert main(args) == 2
    assert main(args + ["--force"]) == 0


def test_failing_check_sets_exit_code(tmp_path):
    assert main(["count", "--n-max", "10", "--out", str(tmp_path), "--check", "liminf"]) == 1
    m = RunManifest.load(tmp_path / "manifest.json")
    assert m.criteria[0]["number"] == 4 and not m.passed


def test_check_seeds_are_recorded(tmp_path):
    assert main(["count", "--n-max", "10", "--out", str(tmp_path / "a"), "--check", "window-scaling"]) == 0
    assert RunManifest.load(tmp_path / "a" / "manifest.json").seed == {"window-scaling": 2}
    assert main(["count", "--n-max", "10", "--seed", "9", "--out", str(tmp_path / "b"),
                 "--check", "window-scaling"]) == 0
    m = RunManifest.load(tmp_path / "b" / "manifest.json")
    assert m.seed == 9 and m.params["seeds"] == {"window-scaling": 9}


def test_unknown_check_rejected(tmp_path):
    assert main(["count", "--out", str(tmp_path), "--check", "nonsense"]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# counting run\nn-max = 25\nwindow = 0,1/2\norbits.tol = 1e-9\n")
    assert read_config(cfg)["n-max"] == "25"
    assert main(["count", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "count.csv").read_text().splitlines()) == 26
    assert RunManifest.load(tmp_path / "o" / "manifest.json").params["orbits"]["tol"] == 1e-9


def test_config_unknown_keys_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["count", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["count", "--set", "orbits.nope=1", "--out", str(tmp_path / "p")]) == 2


def test_so3check(tmp_path):
    assert main(["so3check", "--samples", "200", "--out", str(tmp_path), "--check", "battery"]) == 0
    assert (tmp_path / "so3.csv").exists()


def test_rotnum_rigid(tmp_path):
    assert main(["rotnum", "--family", "rigid", "--params", "alpha=0.25", "--seed", "0.1,0.5", "--seed", "0.7,0.2",
                 "--iters", "500", "--out", str(tmp_path)]) == 0
    est = json.loads((tmp_path / "rotnum.json").read_text())["estimates"]
    assert [e["value"] for e in est] == [0.25, 0.25]
    assert est[0]["exact_rational"] == [1, 4] and est[0]["seed"] == [0.1, 0.5]


def test_threads_flag_overrides_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GROWTHLAB_THREADS", "1")
    assert main(["count", "--n-max", "10", "--threads", "3", "--out", str(tmp_path)]) == 0
    import os
    assert os.environ["GROWTHLAB_THREADS"] == "3"


@pytest.mark.slow
def test_census_against_golden(tmp_path):
    assert main(["census", "--q-max", "8", "--golden", str(GOLDEN), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "census.csv").read_text().splitlines()
    assert lines == GOLDEN.read_text().splitlines()[1:]
