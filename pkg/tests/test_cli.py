import json
import subprocess
import sys

import jsonschema
import pytest

from latticesir import cli
from latticesir.errors import QuadratureStall

BASE = {"d": 1, "n": 16, "kappa": 1.0, "beta": 0.4, "gamma": 0.6, "rho0": 1.0, "t": [0.5, 1.0]}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(path)


def run_cli(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.mark.parametrize(
    "sub, extra, report",
    [
        ("kernel-info", [], "kernel_info.json"),
        ("moments", ["--order", "1"], "moments1.json"),
        ("moments", ["--order", "2"], "moments2.json"),
        ("green", [], "green.json"),
        ("classify", [], "classify.json"),
        ("intermittency", [], "intermittency.json"),
    ],
)
def test_subcommands_write_reports(tmp_path, capsys, sub, extra, report):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "out"
    code, _, err = run_cli([sub, "--config", cfg, "--out", str(out)] + extra, capsys)
    assert code == 0, err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == sub
    assert report in [o["path"] for o in manifest["outputs"]]
    schema_key = {"moments1.json": "moments-1", "moments2.json": "moments-2",
                  "kernel_info.json": "kernel-info"}.get(report, sub)
    jsonschema.validate(json.loads((out / report).read_text()), cli.REPORT_SCHEMAS[schema_key])


def test_classify_example(tmp_path, capsys):
    cfg = write(tmp_path, {**BASE, "k": [1.5707963267948966]})
    out = tmp_path / "out"
    assert run_cli(["classify", "--config", cfg, "--out", str(out)], capsys)[0] == 0
    report = json.loads((out / "classify.json").read_text())
    assert report["first_moment"][0]["label"] == "vanish"


def test_moments_csv_columns(tmp_path, capsys):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "out"
    run_cli(["moments", "--order", "1", "--config", cfg, "--out", str(out)], capsys)
    header = (out / "moments1_t1.csv").read_text().splitlines()[0]
    assert header == "site_index,x0,m1_S,m1_I,m1_R"
    run_cli(["moments", "--order", "2", "--config", cfg, "--out", str(out)], capsys)
    assert (out / "moments2.csv").read_text().startswith("kind,v0,t,value,compartment_pair")


def test_outputs_are_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, {**BASE, "replicas": 100, "seed": 9})
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli(["simulate", "--config", cfg, "--out", str(out)], capsys)[0] == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"]
    assert ma["config_hash"] == mb["config_hash"]


def test_unicode_aliases(tmp_path):
    cfg = cli.build_config({"κ": 2.0, "β": 0.3, "γ": 0.1, "ρ₀": 2})
    assert (cfg.rates.kappa, cfg.rates.beta, cfg.rates.gamma, cfg.rates.rho0) == (2.0, 0.3, 0.1, 2.0)


def test_kernel_entries_config():
    cfg = cli.build_config({"kernel": {"entries": [[[1], 0.5], [[-1], 0.5]]}})
    assert cfg.kernel.weight((1,)) == 0.5


@pytest.mark.parametrize(
    "cfg, sub, field",
    [
        ({"bta": 0.4}, "green", "bta"),
        ({**BASE, "gamma": 0.0}, "classify", "gamma"),
        ({**BASE, "replicas": 0}, "simulate", "replicas"),
        ({**BASE, "kappa": -1}, "green", "kappa"),
        ({**BASE, "kernel": "levy"}, "green", "kernel"),
        ({**BASE, "mode": "fast"}, "simulate", "mode"),
    ],
)
def test_validation_errors_exit_3(tmp_path, capsys, cfg, sub, field):
    code, _, err = run_cli([sub, "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    payload = json.loads(err)
    assert payload["field"] == field


def test_parse_errors_exit_2(tmp_path, capsys):
    code, _, err = run_cli(["green", "--config", write(tmp_path, "{"), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "ConfigParseError"
    code, _, _ = run_cli(["green", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["nosuch"])
    assert exc.value.code == 2


def test_module_error_exit_1(tmp_path, capsys, monkeypatch):
    def boom(cfg, w, args):
        raise QuadratureStall("no convergence")

    monkeypatch.setitem(cli.HANDLERS, "green", boom)
    code, _, err = run_cli(["green", "--config", write(tmp_path, BASE), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert json.loads(err) == {"error": "QuadratureStall", "message": "no convergence", "exit_code": 1}


def test_console_script_runs(tmp_path):
    cfg = write(tmp_path, BASE)
    proc = subprocess.run([sys.executable, "-m", "latticesir.cli", "green", "--config", cfg,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    green = json.loads((tmp_path / "o" / "green.json").read_text())
    assert green["value"] == "infinite" and green["regime"] == "recurrent"


def test_tables_rows(tmp_path, capsys):
    out = tmp_path / "o"
    assert run_cli(["tables", "--config", write(tmp_path, BASE), "--out", str(out)], capsys)[0] == 0
    rows = (out / "table2.csv").read_text().splitlines()
    assert len(rows) == 5
    labels = [r.split(",")[-2] for r in rows[1:]]
    assert labels == ["vanish", "steady_delta", "grow_origin_only", "grow_everywhere"]
