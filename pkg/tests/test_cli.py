"""Command-line surface: artifacts, manifests, exit codes, determinism."""

import json

import pytest

from renderopt.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from renderopt.diffusion import load_checkpoint
from renderopt.prerender import save_trace

FAST_DIFFUSION = {
    "diffusion": {"dataset_users": 48, "epochs": 3, "learning_rate": 0.003,
                  "d_model": 16, "heads": 2},
}
FAST_BENCH = {
    "bench": {"scenes": 4, "train": {"users": 48, "epochs": 3, "learning_rate": 0.003,
                                     "batch_size": 32, "patience": 5}},
    "diffusion": {"d_model": 16, "heads": 2},
}


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


class TestGameSolve:
    def test_writes_equilibrium_record(self, tmp_path):
        out = tmp_path / "out"
        assert main(["game-solve", "--out-dir", str(out)]) == EXIT_OK
        record = json.loads((out / "equilibrium.json").read_text())
        assert record["converged"] is True
        assert record["price"] > 0
        manifest = _manifest(out)
        assert manifest["outputs"] == ["equilibrium.json"]
        assert manifest["command"] == "game-solve"
        assert len(manifest["config_digest"]) == 64

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["game-solve", "--out-dir", str(a)])
        main(["game-solve", "--out-dir", str(b)])
        assert (a / "equilibrium.json").read_bytes() == (b / "equilibrium.json").read_bytes()


class TestPrerenderSim:
    def test_walk_artifacts(self, tmp_path):
        out = tmp_path / "out"
        assert main(["prerender-sim", "--out-dir", str(out)]) == EXIT_OK
        lines = (out / "walk_steps.csv").read_text().strip().splitlines()
        assert len(lines) == 501
        summary = json.loads((out / "walk_summary.json").read_text())
        assert summary["steps"] == 500
        assert summary["deadline_misses"] == 0

    def test_trace_replay(self, tmp_path):
        trace_path = tmp_path / "path.trace"
        save_trace(trace_path, [(0, 0), (1, 0), (2, 0), (2, 1)])
        out = tmp_path / "out"
        assert main(["prerender-sim", "--out-dir", str(out),
                     "--trace", str(trace_path)]) == EXIT_OK
        summary = json.loads((out / "walk_summary.json").read_text())
        assert summary["steps"] == 3

    def test_seed_changes_walk(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["prerender-sim", "--out-dir", str(a), "--seed", "1"])
        main(["prerender-sim", "--out-dir", str(b), "--seed", "2"])
        assert (a / "walk_steps.csv").read_text() != (b / "walk_steps.csv").read_text()


class TestDiffusionCommands:
    def test_train_then_infer(self, tmp_path):
        cfg = _write_config(tmp_path, FAST_DIFFUSION)
        out = tmp_path / "train"
        assert main(["diffusion-train", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
        assert (out / "checkpoint.npz").exists()
        curve = (out / "training_curve.csv").read_text().strip().splitlines()
        assert curve[0] == "epoch,train_loss,val_loss"
        model, schedule, standardizer = load_checkpoint(out / "checkpoint.npz")
        assert schedule.steps == 700
        assert standardizer is not None

        infer_out = tmp_path / "infer"
        assert main(["diffusion-infer", "--config", cfg, "--out-dir", str(infer_out),
                     "--checkpoint", str(out / "checkpoint.npz")]) == EXIT_OK
        rows = (infer_out / "probabilities.csv").read_text().strip().splitlines()
        assert rows[0] == "user,item,probability,interest_flag"
        assert len(rows) > 1

    def test_infer_requires_checkpoint(self, tmp_path):
        assert main(["diffusion-infer", "--out-dir", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_divergent_training_exits_numerical(self, tmp_path):
        import numpy as np
        payload = {"diffusion": {"dataset_users": 16, "epochs": 2,
                                 "learning_rate": 1e160, "d_model": 8, "heads": 2}}
        cfg = _write_config(tmp_path, payload)
        with np.errstate(all="ignore"):
            code = main(["diffusion-train", "--config", cfg,
                         "--out-dir", str(tmp_path / "x")])
        assert code == EXIT_NUMERICAL

    def test_checkpoint_roundtrip_preserves_weights(self, tmp_path):
        cfg = _write_config(tmp_path, FAST_DIFFUSION)
        out = tmp_path / "train"
        main(["diffusion-train", "--config", cfg, "--out-dir", str(out)])
        import numpy as np
        m1, _, _ = load_checkpoint(out / "checkpoint.npz")
        m2, _, _ = load_checkpoint(out / "checkpoint.npz")
        for key in m1.params:
            assert np.array_equal(m1.params[key], m2.params[key])


class TestBenchRun:
    def test_single_policy_run(self, tmp_path):
        cfg = _write_config(tmp_path, FAST_BENCH)
        out = tmp_path / "out"
        assert main(["bench-run", "--config", cfg, "--out-dir", str(out),
                     "--policies", "none"]) == EXIT_OK
        summary = json.loads((out / "bench_summary.json").read_text())
        assert len(summary["table"]) == 1
        assert summary["table"][0]["policy"] == "none"

    def test_plot_data_flag(self, tmp_path):
        cfg = _write_config(tmp_path, FAST_BENCH)
        out = tmp_path / "out"
        assert main(["bench-run", "--config", cfg, "--out-dir", str(out),
                     "--policies", "mdp,none", "--plot-data"]) == EXIT_OK
        assert (out / "plot_time_mdp.csv").exists()
        assert (out / "plot_time_none.csv").exists()
        assert (out / "plot_metrics.csv").exists()
        manifest = _manifest(out)
        assert "plot_metrics.csv" in manifest["outputs"]

    def test_unknown_policy_rejected(self, tmp_path):
        assert main(["bench-run", "--out-dir", str(tmp_path / "x"),
                     "--policies", "wizard"]) == EXIT_CONFIG

    def test_proposed_policy_from_checkpoint(self, tmp_path):
        cfg = _write_config(tmp_path, {**FAST_BENCH, **FAST_DIFFUSION})
        train_out = tmp_path / "train"
        assert main(["diffusion-train", "--config", cfg,
                     "--out-dir", str(train_out)]) == EXIT_OK
        out = tmp_path / "bench"
        assert main(["bench-run", "--config", cfg, "--out-dir", str(out),
                     "--policies", "proposed,none",
                     "--checkpoint", str(train_out / "checkpoint.npz")]) == EXIT_OK
        summary = json.loads((out / "bench_summary.json").read_text())
        assert {row["policy"] for row in summary["table"]} == {"proposed", "none"}
        proposed = next(r for r in summary["table"] if r["policy"] == "proposed")
        assert proposed["inference_denoiser_calls"] > 0


class TestErrorPaths:
    def test_bad_config_file_exit_code(self, tmp_path):
        cfg = _write_config(tmp_path, {"diffusoin": {}})
        assert main(["game-solve", "--config", cfg,
                     "--out-dir", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_missing_config_file_exit_code(self, tmp_path):
        assert main(["game-solve", "--config", str(tmp_path / "nope.json"),
                     "--out-dir", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_manifest_lists_every_output(self, tmp_path):
        out = tmp_path / "out"
        main(["prerender-sim", "--out-dir", str(out)])
        manifest = _manifest(out)
        on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
        assert set(manifest["outputs"]) == on_disk
