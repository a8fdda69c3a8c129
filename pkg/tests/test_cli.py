import json
import os

import pytest

from randtensor.cli import build_parser, main
from randtensor.runner import CSV_HEADER, Cell, RunError, cell_seed, parse_cell

PINNED_HEADER = ("family,d,k,N,p,samples,seed,lhs,stderr,rhs_max,"
                 "best_partition,ratio,runtime_ms")


def _write_yaml(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def sweep_yaml(tmp_path):
    out = tmp_path / "out"
    return _write_yaml(
        tmp_path / "exp.yaml",
        "command: bound-sweep\n"
        "seed: 424242\n"
        "grid: {d: 1, k: [1], N: [4], p: [2]}\n"
        "families: [diagonal-pairing, rank-one]\n"
        "samples: 8\n"
        f"output: {out}\n"), str(out)


def test_parser_pins_the_flag_names():
    parser = build_parser()
    args = parser.parse_args(["--config", "c.yaml", "--seed", "5", "--out", "o",
                              "--workers", "2", "--cell", "rank-one:d1:k1:N4:p2"])
    assert (args.config, args.seed, args.out, args.workers) == ("c.yaml", 5, "o", 2)
    assert args.cell == "rank-one:d1:k1:N4:p2"


def test_cell_id_round_trip():
    cell = Cell("dense-gaussian", 1, 2, 8, 4.0)
    assert cell.cell_id() == "dense-gaussian:d1:k2:N8:p4"
    assert parse_cell(cell.cell_id()) == cell
    assert parse_cell("rank-one:d1:k1:N4:p2.5").p == 2.5
    with pytest.raises(RunError):
        parse_cell("rank-one:k1:N4:p2")


def test_cell_seed_depends_on_every_coordinate():
    base = Cell("rank-one", 1, 2, 8, 4.0)
    seeds = {cell_seed(7, base)}
    seeds.add(cell_seed(8, base))
    seeds.add(cell_seed(7, Cell("rank-one", 1, 2, 8, 2.0)))
    seeds.add(cell_seed(7, Cell("rank-one", 1, 2, 16, 4.0)))
    assert len(seeds) == 4
    assert cell_seed(7, base) == cell_seed(7, Cell("rank-one", 1, 2, 8, 4.0))


def test_missing_config_exits_2(capsys):
    assert main(["--config", "/does/not/exist.yaml"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_workers_exits_2(sweep_yaml, capsys):
    config, _ = sweep_yaml
    assert main(["--config", config, "--workers", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bound_sweep_end_to_end(sweep_yaml, capsys):
    config, out = sweep_yaml
    code = main(["--config", config, "--workers", "1"])
    stdout = capsys.readouterr().out
    assert code == 0
    assert "gate ratios-finite: pass" in stdout

    csv_path = os.path.join(out, "results.csv")
    lines = open(csv_path).read().splitlines()
    assert lines[0] == PINNED_HEADER == ",".join(CSV_HEADER)
    assert len(lines) == 3  # header + 2 families

    sidecar = json.load(open(os.path.join(out, "results.json")))
    assert {"version", "config", "config_hash", "field_metadata",
            "gates", "records"} <= set(sidecar)
    assert len(sidecar["records"]) == 2
    assert all(rec["samples"] == 8 for rec in sidecar["records"])

    figures = [f for f in os.listdir(out) if f.endswith(".png")]
    assert figures, "report should render at least one figure"


def test_cell_flag_limits_the_run(sweep_yaml, capsys):
    config, out = sweep_yaml
    code = main(["--config", config, "--cell", "rank-one:d1:k1:N4:p2"])
    assert code == 0
    sidecar = json.load(open(os.path.join(out, "results.json")))
    assert [rec["family"] for rec in sidecar["records"]] == ["rank-one"]
    capsys.readouterr()


def test_unknown_cell_exits_2(sweep_yaml, capsys):
    config, _ = sweep_yaml
    assert main(["--config", config, "--cell", "rank-one:d1:k5:N4:p2"]) == 2
    capsys.readouterr()


def test_resume_completes_partial_output(sweep_yaml, capsys):
    config, out = sweep_yaml
    assert main(["--config", config, "--cell", "rank-one:d1:k1:N4:p2"]) == 0
    # second invocation picks up the remaining cell and keeps the first
    assert main(["--config", config]) == 0
    sidecar = json.load(open(os.path.join(out, "results.json")))
    families = sorted(rec["family"] for rec in sidecar["records"])
    assert families == ["diagonal-pairing", "rank-one"]
    capsys.readouterr()


def test_mismatched_resume_refuses(sweep_yaml, tmp_path, capsys):
    config, out = sweep_yaml
    assert main(["--config", config]) == 0
    other = _write_yaml(
        tmp_path / "other.yaml",
        "command: bound-sweep\n"
        "seed: 424242\n"
        "grid: {d: 1, k: [1], N: [4], p: [2]}\n"
        "families: [diagonal-pairing, rank-one]\n"
        "samples: 16\n"
        f"output: {out}\n")
    assert main(["--config", other]) == 2
    assert "different" in capsys.readouterr().err


def test_seed_override_changes_results(sweep_yaml, tmp_path, capsys):
    config, out = sweep_yaml
    assert main(["--config", config]) == 0
    out2 = str(tmp_path / "out2")
    assert main(["--config", config, "--seed", "99", "--out", out2]) == 0
    a = json.load(open(os.path.join(out, "results.json")))
    b = json.load(open(os.path.join(out2, "results.json")))
    assert a["config_hash"] != b["config_hash"]
    assert a["records"][0]["lhs"] != b["records"][0]["lhs"]
    capsys.readouterr()


def test_replay_command_round_trips(sweep_yaml, tmp_path, capsys):
    config, out = sweep_yaml
    assert main(["--config", config]) == 0
    replay = _write_yaml(
        tmp_path / "replay.yaml",
        "command: replay\n"
        "seed: 424242\n"
        f"replay_source: {out}\n"
        f"output: {tmp_path / 'replay_out'}\n")
    code = main(["--config", replay, "--workers", "2"])
    stdout = capsys.readouterr().out
    assert code == 0
    assert "gate replay-bit-identical: pass" in stdout
    doc = json.load(open(tmp_path / "replay_out" / "replay.json"))
    assert all(check["bit_identical"] for check in doc["checks"])


def test_verify_wick_cli(tmp_path, capsys):
    config = _write_yaml(
        tmp_path / "verify.yaml",
        "command: verify-wick\n"
        "seed: 1\n"
        f"output: {tmp_path / 'vout'}\n")
    code = main(["--config", config])
    stdout = capsys.readouterr().out
    assert code == 0
    assert "renormalization-table: pass" in stdout
    lines = open(tmp_path / "vout" / "results.csv").read().splitlines()
    assert lines == [PINNED_HEADER]
