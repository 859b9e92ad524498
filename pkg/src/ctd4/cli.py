"""Command-line front end.

Subcommands: train, eval, ablate-fusion, ablate-ensemble, bias, plot.

Configuration is a flat JSON object whose keys match the RunConfig and
AgentConfig field names; command-line flags override file values, and the
fully resolved config is echoed into the output directory as config.json.
Exits 0 on success, nonzero with a one-line diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import envs, harness, plotting, seeding
from .agent import load_checkpoint
from .harness import RunConfig


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--env", help="environment id", choices=sorted(envs.ENV_IDS))
    p.add_argument("--seed", type=int, help="single training seed")
    p.add_argument("--seeds", help="comma-separated training seeds")
    p.add_argument("--steps", type=int, help="total environment steps per seed")
    p.add_argument(
        "--fusion", choices=["kalman", "min", "average"],
        help="ensemble fusion strategy",
    )
    p.add_argument("--critics", type=int, help="ensemble size N")
    p.add_argument("--out", help="output directory")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    flat: dict = {}
    if args.config:
        with open(args.config) as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        flat.update(loaded)
    if args.seed is not None and args.seeds is not None:
        raise ValueError("--seed and --seeds are mutually exclusive")
    if args.env is not None:
        flat["env_id"] = args.env
    if args.seed is not None:
        flat["seeds"] = [args.seed]
    if args.seeds is not None:
        flat["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
    if args.steps is not None:
        flat["total_steps"] = args.steps
    if args.fusion is not None:
        flat["fusion"] = args.fusion
    if args.critics is not None:
        flat["num_critics"] = args.critics
    if args.out is not None:
        flat["out_dir"] = args.out
    return RunConfig.from_flat_dict(flat)


def _cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    results = harness.run_many(config)
    for seed, (csv_path, ckpt_path) in zip(config.seeds, results):
        final = harness.final_eval_mean(csv_path)
        print(f"seed {seed}: final_eval_mean_return={final} "
              f"metrics={csv_path} checkpoint={ckpt_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    env = envs.make(config.env_id)
    agent = load_checkpoint(
        args.checkpoint, env.obs_dim, env.action_dim, config.agent
    )
    seed = args.seed if args.seed is not None else config.seeds[0]
    episodes = args.episodes or config.eval_episodes
    mean_ret, std_ret = harness.evaluate(
        agent, env, episodes, seeding.substream(seed, seeding.EVAL_ENV, 0)
    )
    print(f"mean_return={mean_ret} std_return={std_ret} episodes={episodes}")
    return 0


def _cmd_ablate_fusion(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    harness.ablate_fusion(config)
    print(f"summary={config.out_dir}/summary.csv")
    return 0


def _cmd_ablate_ensemble(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    harness.ablate_ensemble(config, sizes)
    print(f"summary={config.out_dir}/summary.csv")
    return 0


def _cmd_bias(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    out_path = args.report or "bias_report.csv"
    path = harness.bias_diagnostic(
        args.checkpoint, config.env_id, args.rollouts, seed,
        config.agent, out_path,
    )
    print(f"report={path}")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    path = plotting.plot_learning_curves(args.csvs, args.svg)
    print(f"plot={path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctd4",
        description="Distributional TD3 with Kalman-fused Gaussian critics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one or more seeds")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    _add_run_flags(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--episodes", type=int, help="evaluation episodes")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate-fusion", help="sweep the fusion strategies")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_ablate_fusion)

    p = sub.add_parser("ablate-ensemble", help="sweep the ensemble size")
    _add_run_flags(p)
    p.add_argument("--sizes", default="1,3,10",
                   help="comma-separated ensemble sizes (default 1,3,10)")
    p.set_defaults(fn=_cmd_ablate_ensemble)

    p = sub.add_parser("bias", help="critic estimate vs Monte-Carlo return")
    _add_run_flags(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--rollouts", type=int, default=10)
    p.add_argument("--report", help="output CSV path (default bias_report.csv)")
    p.set_defaults(fn=_cmd_bias)

    p = sub.add_parser("plot", help="aggregate metrics CSVs into an SVG")
    p.add_argument("csvs", nargs="+", help="metrics CSV paths")
    p.add_argument("--out", dest="svg", required=True, help="output SVG path")
    p.set_defaults(fn=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError, FloatingPointError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
