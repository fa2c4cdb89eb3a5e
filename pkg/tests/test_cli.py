import json

import pytest

from lstar_mdp import isomorphic, load_mdp
from lstar_mdp.cli import main
from lstar_mdp.experiment import ConfigError, ExperimentConfig, sample_budget, sampling_sul
from lstar_mdp.sul import builtin_model

FAST = ["--r-min", "5", "--r-max", "60"]


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timing.json"}


def test_learn_exact(tmp_path, capsys):
    assert main(["learn", "--model", "coffee", "--learner", "exact", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["states"] == 3 and summary["learner"] == "exact"
    assert isomorphic(load_mdp(tmp_path / "model.json"), builtin_model("coffee"))
    assert {"model.json", "model.dot", "rounds.json", "summary.json", "summary.csv", "config.json", "timing.json"} <= {
        p.name for p in tmp_path.iterdir()
    }


def test_learn_sampling_bundle_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["learn", "--model", "coffee", "--seed", "4", *FAST, "--out", str(out)]) == 0
    assert _files(a) == _files(b)
    assert "traces.jsonl" in _files(a)


def test_simulate_then_learn_alergia(tmp_path, capsys):
    traces = tmp_path / "t.jsonl"
    assert main(["simulate", "--model", "coffee", "--n-traces", "3000", "--out", str(traces)]) == 0
    assert main(["learn", "--learner", "alergia", "--traces", str(traces), "--eps", "0.05", "--out", str(tmp_path / "r")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["traces"] == 3000 and summary["states"] == 3


def test_eval_and_check(tmp_path, capsys):
    out = tmp_path / "r"
    main(["learn", "--model", "coffee", "--learner", "exact", "--out", str(out)])
    capsys.readouterr()
    assert main(["eval", "--model", "coffee", "--learned", str(out / "model.json"), "--prop", "F<=4 coffee"]) == 0
    text = capsys.readouterr().out
    assert "F<=4 coffee" in text and "0.96" in text
    assert main(["check", str(out / "model.json"), str(out / "model.json")]) == 0
    assert json.loads(capsys.readouterr().out) == {"equivalent": True, "counterexample": None}


def test_compare(tmp_path, capsys):
    argv = ["compare", "--model", "coffee", *FAST, "--prop", "F<=4 coffee", "--out", str(tmp_path / "c")]
    assert main(argv) == 0
    rows = json.loads((tmp_path / "c" / "comparison.json").read_text())
    assert [r["learner"] for r in rows] == ["true", "lstar_mdp", "ioalergia"]
    assert rows[1]["outputs"] == rows[2]["outputs"]
    assert "Pmax(F<=4 coffee)" in capsys.readouterr().out


def test_export_dot_and_minimize(tmp_path, capsys):
    model = tmp_path / "m.json"
    main(["learn", "--model", "coffee", "--learner", "exact", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["export-dot", str(model.with_name("model.json"))]) == 0
    assert capsys.readouterr().out.startswith("digraph")
    assert main(["minimize", str(tmp_path / "model.json"), "--out", str(model)]) == 0
    assert load_mdp(model).n_states == 3


@pytest.mark.parametrize(
    "argv, field",
    [
        (["learn", "--model", "nope"], "config.model"),
        (["learn", "--model", "coffee", "--r-min", "9", "--r-max", "3"], "config.learner"),
        (["eval", "--model", "coffee", "--learned", "missing.json"], "--learned"),
        (["compare", "--model", "coffee", "--prop", "F<=3 tea"], "config.props[0]"),
        (["learn", "--model", "gridworld", "--error-prob", "Q=0.1"], "config.error_prob.Q"),
        (["learn", "--model", "coffee", "--lambda", "1.5"], "config.lambda"),
    ],
)
def test_config_errors_exit_2(argv, field, capsys):
    assert main(argv) == 2
    assert field in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "coffee", "learner": "exact", "out": str(tmp_path / "x")}))
    assert main(["learn", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 0
    assert (tmp_path / "y" / "model.json").exists()
    cfg.write_text(json.dumps({"model": "coffee", "colour": "red"}))
    assert main(["learn", "--config", str(cfg)]) == 2
    assert "config.colour" in capsys.readouterr().err
    cfg.write_text("{oops")
    assert main(["learn", "--config", str(cfg)]) == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    bad = tmp_path / "t.jsonl"
    bad.write_text("not json\n")
    assert main(["learn", "--learner", "alergia", "--traces", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err


def test_config_validation_paths():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig(model="coffee", n_c="many").validate()
    assert info.value.field == "config.n_c"
    cfg = ExperimentConfig.from_dict({"model": "coffee", "lambda": 0.5})
    assert cfg.lam == 0.5 and "out" not in cfg.bundle_dict()


def test_sample_budget_is_exact(coffee):
    traces = sample_budget(sampling_sul(coffee, 0), 1001, 0.125)
    assert sum((len(t) + 1) // 2 for t in traces) == 1001
    assert all(len(t) % 2 == 1 for t in traces)
