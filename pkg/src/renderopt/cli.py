"""Command-line surface tying the modules into reproducible experiments.

Subcommands: game-solve, prerender-sim, diffusion-train, diffusion-infer,
bench-run. Every run writes its artifacts plus a manifest.json listing them.
Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (CostModel, RenderPolicy, WorkloadConfig, compare,
                    generate_workload, run_policy, write_plot_data,
                    write_report_csv, write_summary_json)
from .config import ExperimentConfig, load_config
from .diffusion import (DEFAULT_GROUPS, AttentionGatedDenoiser, DenoiserConfig,
                        NoiseSchedule, TrainSettings, interaction_probabilities,
                        load_checkpoint, save_checkpoint, train, write_curve_csv)
from .diffusion.sampling import reconstruct_preferences
from .errors import ConfigError, NumericalError
from .game import CloudParams, EdgeNodeParams, SolverSettings, solve_stackelberg
from .prerender import (EncodingSpec, GridWorld, MobilitySpec, TimingModel,
                        load_trace, simulate_walk, write_walk_csv)
from .synthetic import PlantedConfig, build_training_set, make_population

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir: Path, config: ExperimentConfig, command: str,
                    seed: int, outputs: list[Path], started: str) -> Path:
    manifest = {
        "command": command,
        "code_version": __version__,
        "config_digest": config.digest(),
        "seed": seed,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(p.name for p in outputs),
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _game_inputs(config: ExperimentConfig):
    sec = config.section("game")
    nodes = [EdgeNodeParams(**n) for n in sec["nodes"]]
    cloud = CloudParams(**sec["cloud"])
    solver = SolverSettings(**sec["solver"])
    return cloud, nodes, solver


def cmd_game_solve(config: ExperimentConfig, seed: int, out_dir: Path,
                   args) -> list[Path]:
    cloud, nodes, solver = _game_inputs(config)
    result = solve_stackelberg(cloud, nodes, solver)
    path = out_dir / "equilibrium.json"
    _write_json(path, result.to_record())
    return [path]


def cmd_prerender_sim(config: ExperimentConfig, seed: int, out_dir: Path,
                      args) -> list[Path]:
    sec = config.section("prerender")
    world = GridWorld(width=sec["width"], height=sec["height"], spacing=sec["spacing"],
                      region_side=sec["region_side"], diagonal=sec["diagonal"])
    timing = TimingModel(**sec["timing"])
    encoding = EncodingSpec(**sec["encoding"])
    if args.trace:
        trace = load_trace(args.trace)
        mobility = MobilitySpec(kind="trace", trace=trace)
        horizon = len(trace) - 1
    else:
        mobility = MobilitySpec()
        horizon = sec["steps"]
    result = simulate_walk(world, timing, mobility, horizon, seed,
                           encoding=encoding, panorama_work=sec["panorama_work"])
    steps_path = out_dir / "walk_steps.csv"
    write_walk_csv(result, steps_path)
    summary_path = out_dir / "walk_summary.json"
    _write_json(summary_path, result.summary())
    return [steps_path, summary_path]


def _diffusion_pieces(config: ExperimentConfig):
    sec = config.section("diffusion")
    schedule = NoiseSchedule(steps=sec["steps"], beta_start=sec["beta_start"],
                             beta_end=sec["beta_end"])
    dconfig = DenoiserConfig(feature_dim=6, cond_dim=4, d_model=sec["d_model"],
                             heads=sec["heads"])
    return sec, schedule, dconfig


def cmd_diffusion_train(config: ExperimentConfig, seed: int, out_dir: Path,
                        args) -> list[Path]:
    sec, schedule, dconfig = _diffusion_pieces(config)
    planted = PlantedConfig(n_users=sec["dataset_users"], seq_len=sec["seq_len"])
    users = make_population(planted, seed=seed)
    dataset, standardizer = build_training_set(users, planted)
    settings = TrainSettings(learning_rate=sec["learning_rate"],
                             batch_size=sec["batch_size"], epochs=sec["epochs"],
                             patience=sec["patience"], seed=seed)
    model = AttentionGatedDenoiser(dconfig, seed=seed)
    result = train(dataset, schedule, settings, model=model)
    ckpt_path = out_dir / "checkpoint.npz"
    save_checkpoint(ckpt_path, result.model, schedule, standardizer)
    curve_path = out_dir / "training_curve.csv"
    write_curve_csv(result.history, curve_path)
    summary_path = out_dir / "train_summary.json"
    _write_json(summary_path, {
        "epochs_run": len(result.history) - 1,
        "stopped_early": result.stopped_early,
        "initial_train_loss": result.history[0].train_loss,
        "final_train_loss": result.history[-1].train_loss,
        "final_val_loss": result.history[-1].val_loss,
        "train_steps": result.model.step_count,
    })
    return [ckpt_path, curve_path, summary_path]


def cmd_diffusion_infer(config: ExperimentConfig, seed: int, out_dir: Path,
                        args) -> list[Path]:
    if not args.checkpoint:
        raise ConfigError("diffusion-infer requires --checkpoint")
    if args.users < 1:
        raise ConfigError("diffusion-infer: --users must be >= 1")
    model, schedule, standardizer = load_checkpoint(args.checkpoint)
    if standardizer is None:
        raise ConfigError("checkpoint carries no standardizer statistics")
    sec = config.section("diffusion")
    planted = PlantedConfig(n_users=args.users, seq_len=sec["seq_len"])
    eval_users = make_population(planted, seed=seed + 1_000_003)
    rng = np.random.default_rng(seed)
    t_noise, stride = sec["infer_noise_step"], sec["stride"]

    rows = []
    ranked_ok = 0
    for uid, user in enumerate(eval_users):
        feats = standardizer.transform(user.sequence_raw)
        noise = rng.standard_normal(feats.shape)
        m_hat = standardizer.inverse(
            reconstruct_preferences(model, schedule, feats, user.condition,
                                    t_noise, stride, noise))
        idx, probs = interaction_probabilities(m_hat, user.item_features,
                                               DEFAULT_GROUPS.interaction)
        flags = user.interest_flags[idx]
        if flags.any() and (~flags).any() and probs[flags].mean() > probs[~flags].mean():
            ranked_ok += 1
        for item, p, flag in zip(idx, probs, flags):
            rows.append((uid, int(item), float(p), int(flag)))

    probs_path = out_dir / "probabilities.csv"
    with open(probs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "probability", "interest_flag"])
        for row in rows:
            writer.writerow([row[0], row[1], repr(row[2]), row[3]])
    summary_path = out_dir / "infer_summary.json"
    _write_json(summary_path, {
        "users": len(eval_users),
        "users_ranked_correctly": ranked_ok,
        "t_noise": t_noise,
        "stride": stride,
        "denoiser_calls": model.call_count,
    })
    return [probs_path, summary_path]


def cmd_bench_run(config: ExperimentConfig, seed: int, out_dir: Path,
                  args) -> list[Path]:
    sec = config.section("bench")
    wconfig = WorkloadConfig(scenes=sec["scenes"], frames_per_scene=sec["frames_per_scene"],
                             fps=sec["fps"], regions_per_scene=sec["regions_per_scene"],
                             interest_fraction=sec["interest_fraction"])
    cost = CostModel(lod_high=sec["lod_high"], lod_low=sec["lod_low"],
                     throughput=sec["throughput"])
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in ("proposed", "mdp", "random_opt", "none"):
            raise ConfigError(f"bench-run: unknown policy {p!r}")
    if not policies:
        raise ConfigError("bench-run: --policies selected nothing")

    model = schedule = standardizer = None
    if "proposed" in policies:
        if args.checkpoint:
            model, schedule, standardizer = load_checkpoint(args.checkpoint)
            if standardizer is None:
                raise ConfigError("checkpoint carries no standardizer statistics")
        else:
            tsec = sec["train"]
            dsec, schedule, dconfig = _diffusion_pieces(config)
            planted = PlantedConfig(n_users=tsec["users"], seq_len=dsec["seq_len"])
            users = make_population(planted, seed=seed + 7_777)
            dataset, standardizer = build_training_set(users, planted)
            settings = TrainSettings(learning_rate=tsec["learning_rate"],
                                     batch_size=tsec["batch_size"],
                                     epochs=tsec["epochs"], patience=tsec["patience"],
                                     seed=seed)
            model = train(dataset, schedule, settings,
                          model=AttentionGatedDenoiser(dconfig, seed=seed)).model

    workload = generate_workload(wconfig, seed=seed)
    reports = []
    for name in policies:
        policy = RenderPolicy(variant=name, mdp_discount=sec["mdp_discount"],
                              mdp_cost_weight=sec["mdp_cost_weight"],
                              ro_samples=sec["ro_samples"], stride=sec["stride"],
                              t_noise=sec["t_noise"],
                              focus_quantile=sec["focus_quantile"])
        reports.append(run_policy(workload, policy, cost, model=model,
                                  schedule=schedule, standardizer=standardizer))

    metrics_path = out_dir / "metrics.csv"
    write_report_csv(reports, metrics_path)
    summary_path = out_dir / "bench_summary.json"
    write_summary_json(reports, summary_path)
    outputs = [metrics_path, summary_path]
    if args.plot_data:
        outputs.extend(write_plot_data(reports, out_dir))
    return outputs


_COMMANDS = {
    "game-solve": cmd_game_solve,
    "prerender-sim": cmd_prerender_sim,
    "diffusion-train": cmd_diffusion_train,
    "diffusion-infer": cmd_diffusion_infer,
    "bench-run": cmd_bench_run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renderopt",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file (defaults apply)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out-dir", default=None, help="override config output directory")
        if name == "prerender-sim":
            p.add_argument("--trace", default=None, help="replay a `step x y` trace file")
        if name in ("diffusion-infer", "bench-run"):
            p.add_argument("--checkpoint", default=None, help="trained model archive")
        if name == "diffusion-infer":
            p.add_argument("--users", type=int, default=5, help="planted users to score")
        if name == "bench-run":
            p.add_argument("--policies", default="proposed,mdp,random_opt,none")
            p.add_argument("--plot-data", action="store_true",
                           help="emit per-policy plot series files")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else config.seed
        out_dir = Path(args.out_dir if args.out_dir is not None else config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        started = datetime.now(timezone.utc).isoformat()
        outputs = _COMMANDS[args.command](config, seed, out_dir, args)
        _write_manifest(out_dir, config, args.command, seed, outputs, started)
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"{args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
