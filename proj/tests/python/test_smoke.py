import itertools
import json

import pytest

import agcl

POGO = (
    "G((tree -> !rock & !pogo) & (rock -> !tree & !pogo) & (pogo -> !rock & !tree)) & "
    "(!pogo U (tree & X(!pogo U tree))) & (!pogo U rock) & F pogo"
)


def tiny_config():
    def p(name, lo, hi):
        return {"name": name, "kind": "integer", "range": [lo, hi]}

    return {
        "formula": POGO,
        "ap": ["tree", "rock", "pogo"],
        "oomdp": {
            "classes": [
                {"name": "world", "params": [p("width", 3, 4), p("height", 3, 4)]},
                {"name": "tree", "params": [p("trees_env", 0, 2), p("trees_inv", 0, 2)]},
                {"name": "rock", "params": [p("rocks_env", 0, 1), p("rocks_inv", 0, 1)]},
                {"name": "table", "params": [p("table_env", 0, 1)]},
            ],
            "bindings": [
                {"proposition": "tree", "env": "trees_env", "inv": "trees_inv"},
                {"proposition": "rock", "env": "rocks_env", "inv": "rocks_inv"},
                {"proposition": "pogo", "terminal": True, "requires": {"table_env": 1}},
            ],
        },
        "target": {
            "s0_oo": {"width": 4, "height": 4, "trees_env": 2, "trees_inv": 0,
                      "rocks_env": 1, "rocks_inv": 0, "table_env": 1},
            "sf_oo": {"width": 4, "height": 4, "trees_env": 0, "trees_inv": 2,
                      "rocks_env": 0, "rocks_inv": 1, "table_env": 1},
        },
        "learner": {"eval_every": 500, "eval_episodes": 3, "learning_starts": 100,
                    "replay_capacity": 2000, "batch": 16},
        "budget": 1500,
        "seeds": {"count": 2, "master": 3},
        "env": {"step_cap": 40},
    }


def test_version():
    assert agcl.__version__ == "0.1.0"


def test_two_proposition_dfa():
    dfa = agcl.compile("F(tree) & F(rock)", ["tree", "rock"])
    assert dfa.node_count == 4
    assert dfa.accepting_count == 1
    paths = agcl.trace_paths(dfa)
    assert sorted(tuple(tuple(l) for l in p["labels"]) for p in paths) == [
        (("rock",), ("tree",)),
        (("tree",), ("rock",)),
    ]
    assert dfa.accept_distance(dfa.initial) == 2


def test_dfa_agrees_with_formula_semantics():
    dfa = agcl.compile("!p U r", ["p", "r"])
    letters = [[], ["p"], ["r"], ["p", "r"]]
    for n in range(1, 5):
        for trace in itertools.product(letters, repeat=n):
            assert dfa.accepts(list(trace)) == dfa.formula_accepts(list(trace))


def test_parse_errors_raise():
    with pytest.raises(agcl.AgclError):
        agcl.compile("F(", ["p"])
    with pytest.raises(agcl.AgclError):
        agcl.compile("F q", ["p"])


def test_statistics_helpers():
    t, p, df = agcl.welch_t_test([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
    assert t == pytest.approx(-1.8973665961010275)
    assert p == pytest.approx(0.10753119493062718, rel=1e-8)
    assert agcl.time_to_threshold([(0, 0.0), (1000, 0.9)], 0.8, 50) == 1050
    assert agcl.time_to_threshold([(0, 0.0)], 0.8) is None


def test_plan_reports_both_curricula():
    manifest = agcl.plan(tiny_config())
    methods = [c["method"] for c in manifest["curricula"]]
    assert methods == ["agcl-sequence", "agcl-graph"]
    assert manifest["seeds"]["master"] == 3
    assert agcl.plan(tiny_config()) == manifest


def test_unknown_config_key_names_its_path():
    cfg = tiny_config()
    cfg["learner"]["gama"] = 0.9
    with pytest.raises(agcl.SchemaError, match="learner.gama"):
        agcl.plan(cfg)


def test_run_is_deterministic(tmp_path):
    a = agcl.run(tiny_config(), out_dir=tmp_path)
    b = agcl.run(tiny_config(), threads=2)
    assert a["summary_csv"] == b["summary_csv"]
    assert a["curves_csv"] == b["curves_csv"]
    assert {m["method"] for m in a["methods"]} == {"agcl-sequence", "agcl-graph", "scratch"}
    assert (tmp_path / "manifest.json").exists()
    assert json.loads((tmp_path / "stats.json").read_text())["budget"] == 1500


def test_default_learner_matches_documented_defaults():
    d = agcl.default_learner()
    assert d["gamma"] == 0.99
    assert d["batch"] == 64
    assert d["hidden"] == [64, 64]
