import json

import pytest
from click.testing import CliRunner

from chaingen.cli import main
from chaingen.event_chain import from_json, relabel_budget, to_json_model
from chaingen.chain_rules import resolve_term

from conftest import CASE_RULES, FIXTURES, REFINE_FEEDBACK, RULE_CONSTRAINTS, SCENARIO, load_chain

CONFIG = str(FIXTURES / "config.yaml")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def chain_json(tmp_path):
    path = tmp_path / "event_chain.json"
    path.write_text(to_json_model(load_chain("reference")), encoding="utf-8")
    return path


# --- stage subcommands ---------------------------------------------------------

def test_vss_parse_to_stdout(runner):
    result = runner.invoke(main, ["vss", "parse", "--catalog", str(FIXTURES / "vss_catalog.json")])
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert len(lines) == 64
    assert any(line.startswith("Vehicle.Body.Lights.Hazard,actuator,") for line in lines)


def test_vss_parse_to_file(runner, tmp_path):
    out = tmp_path / "kb.txt"
    result = runner.invoke(
        main, ["vss", "parse", "--catalog", str(FIXTURES / "vss_catalog.json"), "--out", str(out)]
    )
    assert result.exit_code == 0
    assert len(out.read_text().strip().splitlines()) == 64


def test_chain_transform(runner, tmp_path):
    out = tmp_path / "model.json"
    result = runner.invoke(
        main,
        ["chain", "transform", "--in", str(FIXTURES / "chains" / "reference.puml"), "--out", str(out)],
    )
    assert result.exit_code == 0
    model = json.loads(out.read_text())
    assert len(model["nodes"]) == 4


def test_chain_transform_rejects_bad_diagram(runner, tmp_path):
    bad = tmp_path / "bad.puml"
    bad.write_text("@startuml\nstart\nwhile (x)\n@enduml\n", encoding="utf-8")
    result = runner.invoke(main, ["chain", "transform", "--in", str(bad)])
    assert result.exit_code == 2


def test_retrieve_prints_hazard(runner):
    result = runner.invoke(main, ["retrieve", "--config", CONFIG, "--scenario", SCENARIO, "-k", "10"])
    assert result.exit_code == 0
    assert "Vehicle.Body.Lights.Hazard" in result.output


def test_signals_select_replay(runner, tmp_path):
    out = tmp_path / "signals.txt"
    result = runner.invoke(
        main, ["signals", "select", "--config", CONFIG, "--scenario", SCENARIO, "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert out.read_text().splitlines() == [
        "Vehicle.Body.Lights.Hazard",
        "Vehicle.ADAS.Camera.Front.IsActive",
        "Vehicle.ADAS.Lidar.IsActive",
    ]
    assert "rejected: Vehicle.Imaginary.PedestrianGuard" in result.output


def test_signals_validate_exit_codes(runner):
    ok = runner.invoke(
        main, ["signals", "validate", "--config", CONFIG, "--path", "Vehicle.Body.Lights.Hazard"]
    )
    assert ok.exit_code == 0
    mixed = runner.invoke(
        main,
        ["signals", "validate", "--config", CONFIG,
         "--path", "Vehicle.Body.Lights.Hazard", "--path", "Vehicle.Not.There"],
    )
    assert mixed.exit_code == 1
    assert "rejected: Vehicle.Not.There" in mixed.output


def test_chain_generate_replay(runner, tmp_path):
    out = tmp_path / "chain.puml"
    result = runner.invoke(
        main, ["chain", "generate", "--config", CONFIG, "--scenario", SCENARIO, "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert out.read_text().startswith("@startuml reference")


def test_rules_gen_replay(runner, tmp_path):
    out = tmp_path / "check_rules.sh"
    result = runner.invoke(
        main, ["rules", "gen", "--config", CONFIG, "--constraints", RULE_CONSTRAINTS, "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    script = out.read_text()
    assert script.count("event_chain_validator.py") == 3


def test_deploy_script_subcommand(runner, tmp_path):
    out = tmp_path / "deploy.sh"
    result = runner.invoke(
        main,
        ["deploy", "script", "--host", "zone-ecu", "--user", "ecu",
         "--remote-path", "/opt/adas/app", "--artifact", "main.cpp", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert "scp main.cpp ecu@zone-ecu:/opt/adas/app/" in out.read_text()


# --- validate subcommand ---------------------------------------------------------

def test_validate_all_rules_pass(runner, chain_json):
    args = ["validate", "--json", str(chain_json)]
    for rule in CASE_RULES:
        args += ["--rule", rule]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert result.output.count("PASS:") == 3


def test_validate_failing_rule_exits_1(runner, chain_json):
    result = runner.invoke(
        main, ["validate", "--json", str(chain_json), "--rule", "order:hazard before camera"]
    )
    assert result.exit_code == 1
    assert "FAIL: order:hazard before camera" in result.output


def test_validate_budget_failure(runner, tmp_path):
    chain = load_chain("reference")
    bumped = relabel_budget(chain, resolve_term(chain, "hazard"), 100)
    path = tmp_path / "bumped.json"
    path.write_text(to_json_model(bumped), encoding="utf-8")
    result = runner.invoke(main, ["validate", "--json", str(path), "--rule", "time:hazard <= 90"])
    assert result.exit_code == 1


def test_validate_bad_rule_syntax_exits_2(runner, chain_json):
    result = runner.invoke(main, ["validate", "--json", str(chain_json), "--rule", "order:x ??? y"])
    assert result.exit_code == 2
    assert "error:" in result.output


def test_validate_unresolvable_term_exits_2(runner, chain_json):
    result = runner.invoke(
        main, ["validate", "--json", str(chain_json), "--rule", "order:teleport before hazard"]
    )
    assert result.exit_code == 2


def test_validate_missing_file_exits_2(runner, tmp_path):
    result = runner.invoke(
        main, ["validate", "--json", str(tmp_path / "ghost.json"), "--rule", CASE_RULES[0]]
    )
    assert result.exit_code == 2


def test_validate_bad_model_exits_2(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{}", encoding="utf-8")
    result = runner.invoke(main, ["validate", "--json", str(path), "--rule", CASE_RULES[0]])
    assert result.exit_code == 2


# --- sim subcommand ---------------------------------------------------------------

def test_sim_run_with_budget(runner, chain_json):
    trace = str(FIXTURES / "traces" / "pedestrian_detected.json")
    result = runner.invoke(
        main, ["sim", "run", "--chain", str(chain_json), "--trace", trace, "--limit", "90"]
    )
    assert result.exit_code == 0, result.output
    assert "reaction: 80 ms (limit 90 ms)" in result.output


def test_sim_run_budget_violation(runner, chain_json):
    trace = str(FIXTURES / "traces" / "pedestrian_detected.json")
    result = runner.invoke(
        main, ["sim", "run", "--chain", str(chain_json), "--trace", trace, "--limit", "79"]
    )
    assert result.exit_code == 1


def test_sim_run_log_output(runner, chain_json, tmp_path):
    out = tmp_path / "log.json"
    trace = str(FIXTURES / "traces" / "pedestrian_detected.json")
    result = runner.invoke(
        main, ["sim", "run", "--chain", str(chain_json), "--trace", trace, "--out", str(out)]
    )
    assert result.exit_code == 0
    log = json.loads(out.read_text())
    assert log["actuations"][0]["t_end_ms"] == 80


def test_sim_run_no_actuation_with_limit(runner, chain_json):
    trace = str(FIXTURES / "traces" / "pedestrian_absent.json")
    result = runner.invoke(
        main, ["sim", "run", "--chain", str(chain_json), "--trace", trace, "--limit", "90"]
    )
    assert result.exit_code == 2


# --- codegen subcommands -----------------------------------------------------------

def _write_signals(tmp_path):
    signals = tmp_path / "signals.txt"
    signals.write_text(
        "Vehicle.Body.Lights.Hazard\nVehicle.ADAS.Camera.Front.IsActive\nVehicle.ADAS.Lidar.IsActive\n",
        encoding="utf-8",
    )
    return signals


def test_codegen_run_and_lint(runner, chain_json, tmp_path):
    signals = _write_signals(tmp_path)
    source = tmp_path / "main.cpp"
    result = runner.invoke(
        main,
        ["codegen", "run", "--config", CONFIG, "--chain", str(chain_json),
         "--signals", str(signals), "--out", str(source)],
    )
    assert result.exit_code == 0, result.output
    assert "set_is_signaling(true)" in source.read_text()

    lint = runner.invoke(
        main,
        ["codegen", "lint", "--config", CONFIG, "--chain", str(chain_json),
         "--signals", str(signals), "--source", str(source)],
    )
    assert lint.exit_code == 0, lint.output
    assert '"clean": true' in lint.output


def test_codegen_lint_flags_violations(runner, chain_json, tmp_path):
    signals = _write_signals(tmp_path)
    source = tmp_path / "dirty.cpp"
    source.write_text('subscribe("radar-detect");\nuse(Vehicle.Body.Lights.Strobe);\n', encoding="utf-8")
    result = runner.invoke(
        main,
        ["codegen", "lint", "--config", CONFIG, "--chain", str(chain_json),
         "--signals", str(signals), "--source", str(source)],
    )
    assert result.exit_code == 1
    assert "radar-detect" in result.output
    assert "Vehicle.Body.Lights.Strobe" in result.output


def test_codegen_run_rejects_unknown_signals_file(runner, chain_json, tmp_path):
    signals = tmp_path / "signals.txt"
    signals.write_text("Vehicle.Nope\n", encoding="utf-8")
    result = runner.invoke(
        main,
        ["codegen", "run", "--config", CONFIG, "--chain", str(chain_json), "--signals", str(signals)],
    )
    assert result.exit_code == 2


# --- full pipeline -----------------------------------------------------------------

def _run_args(tmp_path, *extra):
    args = ["run", "--config", CONFIG, "--scenario", SCENARIO,
            "--output-dir", str(tmp_path / "out")]
    for rule in CASE_RULES:
        args += ["--rule", rule]
    args += list(extra)
    return args


EXPECTED_ARTIFACTS = [
    "kb.txt", "signals.txt", "signals_report.json", "chain.puml", "event_chain.json",
    "validation_report.json", "main.cpp", "lint_report.json", "deploy.sh", "run_report.json",
]


def test_run_batch_success(runner, tmp_path):
    result = runner.invoke(main, _run_args(tmp_path))
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    for artifact in EXPECTED_ARTIFACTS:
        assert (out / artifact).is_file(), artifact
    report = json.loads((out / "run_report.json").read_text())
    assert report["rules_overall"] == "pass"
    assert report["lint_clean"] is True


def test_run_batch_rule_failure_exits_1(runner, tmp_path):
    args = ["run", "--config", CONFIG, "--scenario", SCENARIO,
            "--output-dir", str(tmp_path / "out"), "--rule", "order:hazard before camera"]
    result = runner.invoke(main, args)
    assert result.exit_code == 1
    out = tmp_path / "out"
    assert (out / "validation_report.json").is_file()
    assert not (out / "main.cpp").exists()
    report = json.loads((out / "validation_report.json").read_text())
    assert report["overall"] == "fail"


def test_run_interactive_accept(runner, tmp_path):
    result = runner.invoke(main, _run_args(tmp_path, "--interactive"), input="accept\n")
    assert result.exit_code == 0, result.output
    assert "@startuml reference" in result.output
    report = json.loads((tmp_path / "out" / "run_report.json").read_text())
    assert report["refine_iterations"] == 0


def test_run_interactive_abort(runner, tmp_path):
    result = runner.invoke(main, _run_args(tmp_path, "--interactive"), input="abort\n")
    assert result.exit_code == 2
    out = tmp_path / "out"
    assert not (out / "main.cpp").exists()
    assert not (out / "deploy.sh").exists()
    assert (out / "chain.puml").is_file()


def test_run_interactive_refine(runner, tmp_path):
    result = runner.invoke(
        main,
        _run_args(tmp_path, "--interactive"),
        input=f"refine {REFINE_FEEDBACK}\naccept\n",
    )
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    refined = from_json((out / "event_chain.json").read_text())
    continue_node = next(n for n in refined.nodes if n.label == "Continue normal operation")
    assert continue_node.params.time_budget_ms == 5
    report = json.loads((out / "run_report.json").read_text())
    assert report["refine_iterations"] == 1
