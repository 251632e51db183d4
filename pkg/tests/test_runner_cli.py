import json

import pytest

from mmconc.cli import main
from mmconc.exceptions import ValidationError
from mmconc.recipes import RECIPES, run_recipe
from mmconc.runner import config_from_text, load_config, parse_space, recipe_config, run

# reduced sizes so every recipe runs in seconds; full sizes live in the acceptance suite
QUICK = {
    "maurey-check": {"budget": 50, "probe_sizes": (5,)},
    "concauto-check": {},
    "weneed-check": {},
    "length-audit": {"max_k": 4},
    "cube-levy": {"trend_sizes": (4, 5, 6), "budget": 50},
    "scaled-family": {},
    "product-levy": {"sizes": (2, 3, 4), "budget": 50},
    "approx-lemma-suite": {"count": 6, "N": 12},
    "weak-vs-uniform": {},
    "gromov-demo": {"sizes": (1, 2, 3), "M": 64, "K": 12, "T": 5},
    "semidirect-nonlevy": {"sizes": (1, 2, 3), "budget": 50},
}


def test_every_recipe_has_quick_params():
    assert set(QUICK) == set(RECIPES) and len(RECIPES) == 11


@pytest.mark.parametrize("name", sorted(QUICK))
def test_recipe_runs_and_is_deterministic(name):
    a = run_recipe(name, seed=1, **QUICK[name])
    b = run_recipe(name, seed=1, **QUICK[name])
    assert [t.csv() for t in a.tables] == [t.csv() for t in b.tables]
    assert a.checks == b.checks and a.checks
    c = run_recipe(name, seed=2, **QUICK[name])
    assert [str(t.stable_view()) for t in a.tables] == [str(t.stable_view()) for t in c.tables]


def test_unknown_recipe_parameter():
    with pytest.raises(ValidationError):
        run_recipe("weak-vs-uniform", colour="red")


class TestSpaces:
    @pytest.mark.parametrize("spec,n", [("cube:3", 8), ("usym:4", 24), ("sym:0.5,0.3,0.2", 6), ("l1:0.5,0.5/3", 9),
                                        ("circle:8", 8), ("semidirect:8,2", 32), ("point", 1),
                                        ("scaled:2:cube:2", 4), ("product:circle:4|cube:2", 16)])
    def test_parse(self, spec, n):
        assert parse_space(spec).n == n

    @pytest.mark.parametrize("spec", ["cube", "torus:3", "sym:0.2,0.3", "scaled:x:cube:2"])
    def test_bad_specs(self, spec):
        with pytest.raises(ValidationError):
            parse_space(spec)


CONFIG = """
[experiment]
name = demo
seed = 7

[task.cube_alpha]
op = alpha
space = cube:3
method = exact

[task.maurey]
op = bound
kind = maurey
n = 6
eps_grid = 0.1,0.2

[task.gap]
recipe = weak-vs-uniform
"""


class TestRunner:
    def test_run_writes_outputs_and_manifest(self, tmp_path):
        cfg = config_from_text(CONFIG)
        manifest = run(cfg, out_dir=tmp_path)
        assert manifest.passed
        names = sorted(p.name for p in tmp_path.iterdir())
        assert "manifest.json" in names and "cube_alpha_profile.csv" in names and "gap_gap.csv" in names
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["seed"] == 7 and [t["name"] for t in doc["tasks"]] == ["cube_alpha", "maurey", "gap"]
        assert (tmp_path / "maurey_bound.csv").read_text().count("\n") == 4

    def test_byte_identical_rerun(self, tmp_path):
        cfg = config_from_text(CONFIG)
        run(cfg, out_dir=tmp_path / "a")
        run(cfg, out_dir=tmp_path / "b")
        for p in (tmp_path / "a").iterdir():
            if p.suffix == ".csv":
                assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()

    def test_empty_task_list(self, tmp_path):
        manifest = run(config_from_text("[experiment]\nname = empty\n"), out_dir=tmp_path)
        assert manifest.tasks == [] and (tmp_path / "manifest.json").exists()

    @pytest.mark.parametrize("text,key", [
        ("[experiment]\n[task.a]\nop = alpha\n", "task.a.space"),
        ("[experiment]\n[task.a]\nop = alpha\nspace = cube:2\nbudgett = 3\n", "task.a.budgett"),
        ("[experiment]\n[task.a]\nop = fly\n", "task.a.op"),
        ("[experiment]\n[task.a]\nrecipe = nope\n", "task.a.recipe"),
        ("[experiment]\n[task.a]\nop = alpha\nspace = torus:3\n", "task.a.space"),
        ("[experiment]\nseed = x\n", "experiment.seed"),
        ("[other]\n", "experiment"),
    ])
    def test_validation_names_the_key(self, text, key):
        with pytest.raises(ValidationError, match=key.replace(".", r"\.")):
            config_from_text(text)

    def test_recipe_config(self):
        assert recipe_config("weak-vs-uniform", 3).tasks[0].recipe == "weak-vs-uniform"
        with pytest.raises(ValidationError):
            recipe_config("nope")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(tmp_path / "none.ini")


class TestCli:
    def test_recipes_listing(self, capsys):
        assert main(["recipes"]) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in RECIPES)

    def test_run_config(self, tmp_path, capsys):
        cfg = tmp_path / "exp.ini"
        cfg.write_text(CONFIG)
        assert main(["validate", str(cfg)]) == 0
        assert main(["run", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_run_recipe(self, tmp_path):
        assert main(["run", "--recipe", "weak-vs-uniform", "--out-dir", str(tmp_path)]) == 0

    def test_alpha_and_bound(self, capsys):
        assert main(["alpha", "cube:2", "--method", "exact", "--eps-grid", "0.5"]) == 0
        assert "cube2" in capsys.readouterr().out
        assert main(["bound", "maurey", "--n", "32", "--eps-grid", "1.0"]) == 0
        assert capsys.readouterr().out.startswith("1,0.367879441171")

    def test_length_round_trip(self, tmp_path, capsys):
        assert main(["length", "--weights", "0.5,0.3,0.2", "--out-dir", str(tmp_path)]) == 0
        cert = tmp_path / "certificate.json"
        assert main(["length", "--weights", "0.5,0.3,0.2", "--verify", str(cert)]) == 0
        doc = json.loads(cert.read_text())
        doc["level_bounds"] = [b / 4 for b in doc["level_bounds"]]
        cert.write_text(json.dumps(doc))
        assert main(["length", "--weights", "0.5,0.3,0.2", "--verify", str(cert)]) == 3
        assert "failure: level=" in capsys.readouterr().out

    def test_gromov_and_approx(self, tmp_path):
        assert main(["gromov", "circle:4", "circle:4", "--M", "8", "--K", "4", "--T", "2"]) == 0
        assert main(["approx", "--N", "10", "--count", "2", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "trace_1.json").exists()

    def test_exit_code_validation(self, tmp_path, capsys):
        assert main(["alpha", "torus:3"]) == 2
        assert main(["bound", "maurey"]) == 2
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\n[task.a]\nop = alpha\n")
        assert main(["validate", str(bad)]) == 2
        assert "task.a.space" in capsys.readouterr().err

    def test_exit_code_failed_check(self, tmp_path):
        cfg = tmp_path / "fail.ini"
        cfg.write_text("[experiment]\n[task.trend]\nrecipe = cube-levy\nexact_sizes = (2,)\n"
                       "trend_sizes = (4, 5, 6, 7)\nbudget = 50\n")
        assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3
