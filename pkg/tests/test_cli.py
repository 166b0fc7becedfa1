import csv
import io
import json
import subprocess
import sys

import pytest

from diracred import cli
from diracred import scenarios as sc

CHEAP = "accept-12-circle-model"


def run_main(capsysbinary, *argv):
    code = cli.main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def test_list_names_every_scenario(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in sc.REGISTRY:
        assert name in out
    assert "op:beta-splitting" in out


def test_verify_single_scenario_passes(capsysbinary):
    code, out, err = run_main(capsysbinary, "verify", CHEAP)
    assert code == 0
    report = cli.load_report(out)
    assert report["checks"]
    assert all(c["name"].startswith(CHEAP + "/") for c in report["checks"])
    assert "0 fail" in err


def test_json_report_round_trips(capsysbinary):
    _, out, _ = run_main(capsysbinary, "verify", CHEAP, "--seed", "3")
    report = cli.load_report(out)
    assert report["schema"] == cli.SCHEMA and report["seed"] == 3
    assert cli.emit(report, "json") == out


def test_csv_columns_and_rows(capsysbinary):
    _, out, _ = run_main(capsysbinary, "verify", CHEAP, "--format", "csv")
    rows = list(csv.reader(io.StringIO(out.decode())))
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) > 1
    assert {r[-1] for r in rows[1:]} <= {"pass", "finding"}


def test_converge_reports_an_order(capsysbinary):
    code, out, _ = run_main(capsysbinary, "converge", "--op", "beta-splitting", "--n", "8,16,32")
    assert code == 0
    rows = cli.load_report(out)["checks"]
    orders = [r["order"] for r in rows if r["name"].endswith("-order")]
    assert orders and all(o is not None and o > 0.9 for o in orders)


def test_same_seed_is_deterministic_across_workers(capsysbinary):
    argv = ("verify", "holonomy", "--n", "4", "--seed", "11")
    _, one, _ = run_main(capsysbinary, *argv, "--workers", "1")
    _, two, _ = run_main(capsysbinary, *argv, "--workers", "2")
    assert one == two


def test_derived_seeds_differ_by_name():
    assert cli.derive_seed(0, "a") != cli.derive_seed(0, "b")
    assert cli.derive_seed(0, "a") == cli.derive_seed(0, "a")


def test_empty_config_gives_empty_report(tmp_path, capsysbinary):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenarios": []}))
    code, out, _ = run_main(capsysbinary, "report", "--config", str(cfg))
    assert code == 0
    assert cli.load_report(out)["checks"] == []


def test_config_selects_scenarios_and_ops(tmp_path, capsysbinary):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 2, "format": "json", "scenarios": [
        {"name": CHEAP}, {"op": "beta-splitting", "n": [8, 16]}]}))
    code, out, _ = run_main(capsysbinary, "report", "--config", str(cfg))
    assert code == 0
    names = {c["name"].split("/")[0] for c in cli.load_report(out)["checks"]}
    assert names == {CHEAP, "beta-splitting"}


@pytest.mark.parametrize("doc, needle", [
    ({"scenarios": [], "colour": 1}, "unknown key 'colour'"),
    ({"scenarios": [{"name": CHEAP, "typo": 1}]}, "scenarios[0]: unknown key 'typo'"),
    ({"scenarios": [{"name": "nope"}]}, "unknown scenario"),
    ({"scenarios": [{"op": "beta-splitting", "group": "e8"}]}, "unknown group"),
    ({"scenarios": [{"name": CHEAP, "op": "beta-splitting"}]}, "exactly one"),
])
def test_bad_config_exits_2(tmp_path, capsys, doc, needle):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    assert cli.main(["report", "--config", str(cfg)]) == 2
    assert needle in capsys.readouterr().err


def test_config_syntax_error_has_position(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "scenarios": [,]\n}\n')
    assert cli.main(["report", "--config", str(cfg)]) == 2
    assert f"{cfg}:2:" in capsys.readouterr().err


def test_bad_flags_exit_2(capsys):
    assert cli.main(["verify", "nonexistent-module"]) == 2
    assert cli.main(["verify", CHEAP, "--n", "1"]) == 2
    assert cli.main(["converge", "--op", "nope"]) == 2
    assert cli.main(["verify", CHEAP, "--chi", "cubic"]) == 2


def test_failing_check_exits_1(monkeypatch, capsysbinary):
    def broken(p, rng):
        return [sc.check("always", 1.0, 0.0)]

    monkeypatch.setitem(sc.REGISTRY, "zz-broken", sc.Scenario("zz-broken", "test", "fails", broken))
    code, out, err = run_main(capsysbinary, "verify", "zz-broken", "--format", "csv")
    assert code == 1
    assert out.decode().splitlines()[1].endswith(",fail")
    assert "1 fail" in err


def test_out_directory_from_environment(tmp_path, monkeypatch, capsysbinary):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    code, out, _ = run_main(capsysbinary, "verify", CHEAP)
    assert code == 0 and out == b""
    assert cli.load_report((tmp_path / "verify.json").read_bytes())["checks"]


def test_timing_only_when_requested(capsysbinary):
    _, out, _ = run_main(capsysbinary, "verify", CHEAP)
    assert all("wall_time" not in c for c in cli.load_report(out)["checks"])
    _, out, _ = run_main(capsysbinary, "verify", CHEAP, "--timing")
    assert all(c["wall_time"] >= 0 for c in cli.load_report(out)["checks"])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "diracred", "list"], capture_output=True, text=True)
    assert res.returncode == 0
    assert CHEAP in res.stdout
