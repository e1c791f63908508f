import csv
import json

import pytest

from reflectlab import cli
from reflectlab.errors import ConfigError, IoError, ScenarioError


def config(tmp_path, scenario, name="out", **params):
    return cli.ScenarioConfig.from_dict(
        {"scenario": scenario, "parameters": params, "output_path": str(tmp_path / name)}
    )


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# -- config ------------------------------------------------------------------------------------


def test_every_scenario_registered():
    assert set(cli.SCENARIOS) == {
        "sl2-positivity", "sl2-contraction", "sl2-dual-spectrum", "sl2-identities", "kernels-bergman",
        "cayley-table", "phillips", "heisenberg-rp", "heisenberg-uncorrelate", "axb-qfield",
        "axb-escape", "axb-deficiency", "axb-nogo",
    }


@pytest.mark.parametrize(
    "data",
    [
        {"scenario": "nope"},
        {"parameters": {}},
        {"scenario": "sl2-positivity", "parameters": {"colour": 1}},
        {"scenario": "sl2-positivity", "colour": 1},
        {"scenario": "sl2-positivity", "seed": "x"},
        {"scenario": "sl2-positivity", "parameters": {"bumps": "many"}},
        [],
    ],
)
def test_config_rejected(data):
    with pytest.raises(ConfigError):
        cli.ScenarioConfig.from_dict(data)


def test_inline_parameters_accepted():
    cfg = cli.ScenarioConfig.from_dict({"scenario": "sl2-positivity", "s": 0.5, "bumps": 12})
    assert cfg.parameters == {"s": 0.5, "bumps": 12}


# -- run -------------------------------------------------------------------------------------


def test_positivity_pass(tmp_path):
    rep = cli.run(config(tmp_path, "sl2-positivity", s=0.5, bumps=12))
    assert rep.passed and rep.verdicts == {"psd[s=0.5]": True}
    assert (tmp_path / "out" / "report.json").exists()
    assert rep.runtime_ms is None
    assert rep.parameters["seed"] == 0 and rep.parameters["bumps"] == 12


def test_positivity_fail_exit_nonzero(tmp_path, capsys):
    code = cli.main(["run", "sl2-positivity", "--param", "s=3", "--output", str(tmp_path / "o")])
    assert code == 1
    assert "FAIL psd[s=3.0]" in capsys.readouterr().out


def test_cayley_table_scenario(tmp_path):
    rep = cli.run(config(tmp_path, "cayley-table"))
    assert rep.passed
    rows = list(csv.reader((tmp_path / "out" / "cayley.csv").open()))
    assert rows[0][0] == "space"
    assert any(r[0].startswith("E7") for r in rows[1:])


def test_scenario_error_wrapped(tmp_path):
    with pytest.raises(ScenarioError):
        cli.run(config(tmp_path, "axb-deficiency", X=5))


def test_timing_flag(tmp_path):
    rep = cli.run(config(tmp_path, "axb-qfield", count=10), timing=True)
    assert rep.runtime_ms is not None and rep.runtime_ms >= 0


# -- emit ------------------------------------------------------------------------------------------


def empty_report():
    return cli.Report("x", {}, {}, {}, [], None, "0")


def test_emit_empty_metrics_header_only(tmp_path):
    path = cli.emit(empty_report(), "csv-summary", tmp_path / "s.csv")
    assert path.read_text() == "name,value\n"


def test_emit_json_round_trip(tmp_path):
    rep = cli.run(config(tmp_path, "axb-escape"))
    path = cli.emit(rep, "json", tmp_path / "r.json")
    back = cli.Report.from_json(path.read_text())
    assert back == rep
    assert back.to_json() == rep.to_json()


def test_emit_errors(tmp_path):
    with pytest.raises(ConfigError):
        cli.emit(empty_report(), "xml", tmp_path / "r")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        cli.emit(empty_report(), "json", blocker / "r.json")


# -- determinism -------------------------------------------------------------------------------------


@pytest.mark.parametrize("scenario", ["sl2-contraction", "phillips", "heisenberg-uncorrelate"])
def test_byte_identical_across_threads(tmp_path, monkeypatch, scenario):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("REFLECTLAB_THREADS", threads)
        cli.run(config(tmp_path, scenario, name=f"t{threads}"))
        outs.append(read_dir(tmp_path / f"t{threads}"))
    assert outs[0] == outs[1]


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("REFLECTLAB_THREADS", "lots")
    with pytest.raises(ConfigError):
        cli.pmap(lambda x: x, [1, 2])


def test_pmap_order(monkeypatch):
    monkeypatch.setenv("REFLECTLAB_THREADS", "3")
    assert cli.pmap(lambda x: x * x, range(20)) == [x * x for x in range(20)]


# -- main ---------------------------------------------------------------------------------------------


def test_main_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "axb-qfield", "count": 20, "output_path": str(tmp_path / "q")}))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    assert json.loads((tmp_path / "q" / "report.json").read_text())["parameters"]["count"] == 20


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", "sl2-positivity", "--param", "nokey"],
        ["run", "sl2-positivity", "--param", "colour=1"],
    ],
)
def test_main_config_errors(argv, tmp_path):
    assert cli.main(argv + ["--output", str(tmp_path / "o")]) == 2


def test_main_bad_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli.main(["run", "--config", str(cfg)]) == 2


def test_main_list(capsys):
    assert cli.main(["list"]) == 0
    assert "axb-nogo" in capsys.readouterr().out
