"""Command-line behaviour: exit codes, outputs, manifests, determinism."""

import json
import subprocess
import sys
from pathlib import Path

from ndilemma.cli import main
from ndilemma.manifest import verify_manifest

REPO = Path(__file__).resolve().parents[1]


def write_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2))
    return path


def selfplay_config(**overrides) -> dict:
    doc = {
        "schema_version": 1,
        "seed": 5,
        "game": {"kind": "pgg", "k": 2.0, "rounds": 10},
        "group_sizes": [4],
        "samples_per_cell": 20,
        "pool_e": {
            "gene_tag": "t", "attitude": "exploitative",
            "source": {"type": "reference", "members": [{"kind": "alld", "count": 8}]},
        },
        "pool_c": {
            "gene_tag": "t", "attitude": "collective",
            "source": {"type": "reference", "members": [{"kind": "allc", "count": 8}]},
        },
    }
    doc.update(overrides)
    return doc


class TestBounds:
    def test_pgg_prints_min_and_max(self, capsys):
        assert main(["bounds", "pgg", "--n", "6", "--k", "2"]) == 0
        out = capsys.readouterr().out
        assert "min_mean_welfare 1.0" in out
        assert "max_mean_welfare 2.0" in out

    def test_cpr_beam_marked_approximate(self, capsys):
        assert main(["bounds", "cpr", "--n", "16", "--rounds", "20"]) == 0
        assert "approximate" in capsys.readouterr().out

    def test_bad_game_name(self, capsys):
        assert main(["bounds", "tictactoe", "--n", "4"]) == 1
        assert "unknown game" in capsys.readouterr().err

    def test_out_dir_gets_manifest(self, tmp_path):
        out = tmp_path / "bounds"
        assert main(["bounds", "pgg", "--n", "4", "--out", str(out)]) == 0
        assert (out / "bounds.json").exists()
        assert verify_manifest(out) == []


class TestSelfplay:
    def test_writes_grid_and_manifest(self, tmp_path, capsys):
        config = write_json(tmp_path / "cfg.json", selfplay_config())
        out = tmp_path / "run"
        assert main(["selfplay", "--config", str(config), "--out", str(out)]) == 0
        grid = (out / "grid.csv").read_text()
        assert grid.splitlines()[0].startswith("game,n,n_e")
        assert len(grid.splitlines()) == 1 + 5
        assert verify_manifest(out) == []

    def test_missing_config_exits_one(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        code = main(["selfplay", "--config", str(missing), "--out", str(tmp_path / "o")])
        assert code == 1
        assert str(missing) in capsys.readouterr().err

    def test_bad_schema_version_exits_one(self, tmp_path, capsys):
        config = write_json(tmp_path / "cfg.json", selfplay_config(schema_version=9))
        code = main(["selfplay", "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "schema_version" in capsys.readouterr().err

    def test_rerun_byte_identical_any_threads(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", selfplay_config())
        runs = {}
        for name, threads in (("a", "1"), ("b", "2"), ("c", "1")):
            out = tmp_path / name
            assert main([
                "selfplay", "--config", str(config), "--out", str(out),
                "--threads", threads,
            ]) == 0
            runs[name] = (out / "grid.csv").read_bytes()
        assert runs["a"] == runs["b"] == runs["c"]

    def test_k_flag_overrides_config(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", selfplay_config())
        out2 = tmp_path / "k2"
        out3 = tmp_path / "k3"
        assert main(["selfplay", "--config", str(config), "--out", str(out2)]) == 0
        assert main(["selfplay", "--config", str(config), "--out", str(out3), "--k", "3"]) == 0
        from ndilemma import read_grid_csv

        by_ne_k2 = {r.n_e: r.mean_welfare for r in read_grid_csv(out2 / "grid.csv")}
        by_ne_k3 = {r.n_e: r.mean_welfare for r in read_grid_csv(out3 / "grid.csv")}
        assert by_ne_k2[0] == 2.0
        assert by_ne_k3[0] == 3.0


class TestEvolve:
    def evolve_config(self, **overrides) -> dict:
        doc = {
            "schema_version": 1,
            "seed": 9,
            "game": {"kind": "pgg", "k": 2.0, "rounds": 10},
            "population": 16,
            "group_size": 4,
            "games_per_agent": 4,
            "elites": 2,
            "mutation_rate": 0.1,
            "dominance_threshold": 0.75,
            "max_generations": 1,
            "runs": 1,
            "genes": [
                {
                    "gene_tag": "t", "attitude": "exploitative",
                    "source": {"type": "reference", "members": [{"kind": "alld", "count": 16}]},
                },
                {
                    "gene_tag": "t", "attitude": "collective",
                    "source": {"type": "reference", "members": [{"kind": "allc", "count": 16}]},
                },
            ],
        }
        doc.update(overrides)
        return doc

    def test_single_generation_history(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", self.evolve_config())
        out = tmp_path / "run"
        assert main(["evolve", "--config", str(config), "--out", str(out)]) == 0
        rows = (out / "generations.csv").read_text().strip().splitlines()
        assert rows[0].startswith("generation,gene")
        assert len(rows) == 1 + 2  # one generation, two genes
        result = json.loads((out / "result.json").read_text())
        assert result["generations_run"] == 1
        assert verify_manifest(out) == []

    def test_multi_run_summary(self, tmp_path):
        config = write_json(
            tmp_path / "cfg.json", self.evolve_config(runs=3, max_generations=3)
        )
        out = tmp_path / "runs"
        assert main(["evolve", "--config", str(config), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert sum(w["wins"] for w in summary["winners"]) == 3
        assert len(summary["runs"]) == 3
        table = (out / "summary.csv").read_text()
        assert "threshold_reached" in table
        assert "average_generations" in table

    def test_rerun_byte_identical(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", self.evolve_config(max_generations=4))
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["evolve", "--config", str(config), "--out", str(out)]) == 0
            blobs.append((out / "generations.csv").read_bytes())
        assert blobs[0] == blobs[1]


class TestFingerprintCmd:
    def fingerprint_config(self) -> dict:
        return {
            "schema_version": 1,
            "seed": 2,
            "game": {"kind": "pgg", "n": 4, "rounds": 3, "k": 2.0},
            "rollouts": 10,
            "include_references": False,
            "pools": [
                {
                    "gene_tag": "mass", "attitude": "collective",
                    "source": {"type": "reference", "members": [{"kind": "allc", "count": 4}]},
                },
                {
                    "gene_tag": "mass", "attitude": "exploitative",
                    "source": {"type": "reference", "members": [{"kind": "alld", "count": 4}]},
                },
            ],
        }

    def test_point_mass_pools_mark_undefined(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", self.fingerprint_config())
        out = tmp_path / "fp"
        assert main(["fingerprint", "--config", str(config), "--out", str(out)]) == 0
        cohen = (out / "cohens_d.csv").read_text()
        assert "undefined" in cohen
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "pool,mpd,pr"
        assert len(metrics) == 3
        for name in ("fingerprints.csv", "nodes.csv", "pca.json", "projections.csv"):
            assert (out / name).exists()
        assert verify_manifest(out) == []

    def test_reference_overlay_projected(self, tmp_path):
        config = self.fingerprint_config()
        config["include_references"] = True
        path = write_json(tmp_path / "cfg.json", config)
        out = tmp_path / "fp"
        assert main(["fingerprint", "--config", str(path), "--out", str(out)]) == 0
        projections = (out / "projections.csv").read_text()
        assert "reference" in projections
        assert "CC(2)" in projections

    def test_rerun_identical_digests(self, tmp_path):
        config = write_json(tmp_path / "cfg.json", self.fingerprint_config())
        digests = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["fingerprint", "--config", str(config), "--out", str(out)]) == 0
            manifest = json.loads((out / "manifest.json").read_text())
            digests.append({e["path"]: e["sha256"] for e in manifest["outputs"]})
        assert digests[0] == digests[1]


class TestValidateCmd:
    def test_faulting_member_exits_two(self, tmp_path, capsys):
        pool = {
            "schema_version": 1,
            "gene_tag": "mixed",
            "attitude": "collective",
            "members": [
                {"label": "fine", "rules": [{"when": {"op": "always"}, "cooperate_prob": 1.0}],
                 "default_prob": 1.0},
                {"label": "last-round-divider",
                 "rules": [{"when": {"op": "ratio_ge", "num": "last_opp_coop",
                                     "den": "rounds_left_after", "value": 0.5},
                            "cooperate_prob": 1.0}],
                 "default_prob": 1.0},
            ],
        }
        path = write_json(tmp_path / "pool.json", pool)
        code = main(["validate", str(path), "--game", "pgg", "--n", "4", "--trials", "5"])
        out = capsys.readouterr().out
        assert code == 2
        assert "[FAIL] last-round-divider" in out
        assert "[PASS] fine" in out

    def test_clean_pool_exits_zero(self, tmp_path, capsys):
        code = main([
            "validate", str(REPO / "configs" / "pool_example.json"),
            "--game", "pgg", "--n", "4", "--trials", "10",
            "--out", str(tmp_path / "rep"),
        ])
        assert code == 0
        assert (tmp_path / "rep" / "validation.csv").exists()

    def test_schema_error_exits_one(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{notjson")
        assert main(["validate", str(path), "--game", "pgg", "--n", "4"]) == 1


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "ndilemma.cli", "--version"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "ndilemma" in proc.stdout


def test_shipped_demo_configs_run(tmp_path):
    assert main([
        "selfplay", "--config", str(REPO / "configs" / "selfplay_demo.json"),
        "--out", str(tmp_path / "sp"),
    ]) == 0
    assert main([
        "evolve", "--config", str(REPO / "configs" / "evolve_demo.json"),
        "--out", str(tmp_path / "ev"),
    ]) == 0
    assert main([
        "fingerprint", "--config", str(REPO / "configs" / "fingerprint_demo.json"),
        "--out", str(tmp_path / "fp"),
    ]) == 0
    # plain text numbers only; numpy scalar reprs must never leak into output
    for path in tmp_path.rglob("*.csv"):
        text = path.read_text()
        assert "np.float" not in text and "np.int" not in text
    for path in tmp_path.rglob("*.json"):
        json.loads(path.read_text())
