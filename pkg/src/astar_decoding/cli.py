"""Command line entry points: run, compare, replay, gen-fixtures.

Exit codes: 0 success, 1 usage or config problem, 2 backend failure,
3 invariant violation found by replay.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import yaml

from .errors import ConfigError, EmptyDataset, PolicyUnavailable, RewardUnavailable
from .harness import export_frontier, load_summary, run_benchmark
from .policy import HttpPolicy, Policy, SamplingParams, ScriptedPolicy
from .records import METHODS, load_dataset, write_dataset
from .reward import ConstantReward, HttpProcessReward, RewardModel
from .search import ScaleControls
from .synthetic import CodeTaskFamily
from .toyenv import random_maze
from .trace import TraceCorrupt, replay_trace

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BACKEND = 2
EXIT_INVARIANT = 3


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    return doc


def _build_policy(cfg: dict) -> Policy:
    backend = cfg.get("backend")
    if backend == "scripted":
        table = cfg.get("table")
        if not table:
            raise ConfigError("policy.table is required for the scripted backend")
        try:
            return ScriptedPolicy.load(table)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load scripted table {table}: {exc}") from exc
    if backend == "http":
        for key in ("base_url", "model"):
            if not cfg.get(key):
                raise ConfigError(f"policy.{key} is required for the http backend")
        return HttpPolicy(
            cfg["base_url"],
            cfg["model"],
            api_mode=cfg.get("api_mode", "completions"),
            api_key_env=cfg.get("api_key_env", "OPENAI_API_KEY"),
            timeout=float(cfg.get("timeout", 120.0)),
            parallel_requests=bool(cfg.get("parallel_requests", False)),
        )
    if backend == "code_task":
        return _code_family(cfg).policy()
    raise ConfigError(f"unknown policy.backend {backend!r}")


def _code_family(cfg: dict) -> CodeTaskFamily:
    kwargs: dict = {"seed": int(cfg.get("family_seed", 0))}
    if "length" in cfg:
        kwargs["length"] = int(cfg["length"])
    if "alphabet" in cfg:
        kwargs["alphabet"] = str(cfg["alphabet"])
    if "sample_accuracy" in cfg:
        kwargs["sample_accuracy"] = float(cfg["sample_accuracy"])
    if "greedy_accuracy" in cfg:
        kwargs["greedy_accuracy"] = float(cfg["greedy_accuracy"])
    return CodeTaskFamily(**kwargs)


def _build_reward(cfg: dict | None) -> RewardModel | None:
    if not cfg:
        return None
    backend = cfg.get("backend")
    if backend == "constant":
        return ConstantReward(float(cfg.get("value", 0.5)))
    if backend == "http":
        if not cfg.get("base_url"):
            raise ConfigError("reward.base_url is required for the http backend")
        return HttpProcessReward(
            cfg["base_url"],
            path=cfg.get("path", "/score"),
            timeout=float(cfg.get("timeout", 120.0)),
        )
    if backend == "code_oracle":
        return _code_family(cfg).oracle(noise_scale=float(cfg.get("noise_scale", 0.0)))
    raise ConfigError(f"unknown reward.backend {backend!r}")


def _build_controls(cfg: dict | None) -> ScaleControls:
    cfg = cfg or {}
    try:
        return ScaleControls(
            k=int(cfg.get("k", 16)),
            max_depth=int(cfg.get("max_depth", 40)),
            breadth_cap=int(cfg.get("breadth_cap", 5)),
            prune_threshold=float(cfg.get("prune_threshold", 1.0)),
            token_limit=int(cfg.get("token_limit", 2048)),
            global_token_budget=(
                int(cfg["global_token_budget"]) if cfg.get("global_token_budget") else None
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad controls: {exc}") from exc


def _build_params(cfg: dict | None) -> SamplingParams:
    cfg = cfg or {}
    try:
        return SamplingParams(
            temperature=float(cfg.get("temperature", 0.8)),
            top_p=float(cfg.get("top_p", 1.0)),
            max_tokens_per_step=int(cfg.get("max_tokens_per_step", 256)),
            stop_markers=tuple(cfg.get("stop_markers", ("\n## Step",))),
            seed=int(cfg["seed"]) if cfg.get("seed") is not None else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sampling params: {exc}") from exc


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    method = args.method or cfg.get("method")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}; got {method!r}")
    dataset = args.dataset or cfg.get("dataset")
    if not dataset:
        raise ConfigError("dataset is required (config key 'dataset' or --dataset)")
    try:
        problems = load_dataset(dataset)
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset not found: {dataset}") from exc
    except (EmptyDataset, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    output_dir = args.output_dir or cfg.get("output_dir")
    if not output_dir:
        raise ConfigError("output_dir is required (config key 'output_dir' or --output-dir)")
    policy_cfg = cfg.get("policy")
    if not isinstance(policy_cfg, dict):
        raise ConfigError("config needs a 'policy' mapping")
    policy = _build_policy(policy_cfg)
    reward = _build_reward(cfg.get("reward"))
    if method in ("astar", "best_of_n", "particle_filtering") and reward is None:
        raise ConfigError(f"method {method} needs a 'reward' mapping in the config")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))

    summary = run_benchmark(
        problems,
        method,
        policy=policy,
        reward=reward,
        controls=_build_controls(cfg.get("controls")),
        params=_build_params(cfg.get("sampling")),
        n=int(cfg.get("n", 64)),
        num_particles=int(cfg.get("num_particles", 16)),
        seed=seed,
        prompt_style=str(cfg.get("prompt_style", "plain")),
        output_dir=output_dir,
        resume=args.resume or bool(cfg.get("resume", False)),
        workers=int(cfg.get("workers", 1)),
        write_traces=bool(cfg.get("write_traces", False)),
    )
    print(summary.to_json())
    print(f"records and summary written to {output_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    summaries = []
    for run_dir in args.run_dirs:
        try:
            summaries.append(load_summary(run_dir))
        except FileNotFoundError as exc:
            raise ConfigError(f"no summary.json in {run_dir}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"unreadable summary in {run_dir}: {exc}") from exc
    try:
        table = export_frontier(summaries)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table)
        print(f"frontier written to {args.out}", file=sys.stderr)
    else:
        print(table, end="")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    paths: list[str] = []
    for target in args.paths:
        if os.path.isdir(target):
            paths.extend(
                os.path.join(target, name) for name in sorted(os.listdir(target))
                if name.endswith(".jsonl")
            )
        else:
            paths.append(target)
    if not paths:
        raise ConfigError("no trace files to replay")
    total = 0
    for path in paths:
        try:
            report = replay_trace(path)
        except FileNotFoundError as exc:
            raise ConfigError(f"trace not found: {path}") from exc
        except TraceCorrupt as exc:
            raise ConfigError(str(exc)) from exc
        print(report.describe())
        total += len(report.violations)
    print(f"total violations: {total}")
    return EXIT_OK if total == 0 else EXIT_INVARIANT


def cmd_gen_fixtures(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "codes":
        family = CodeTaskFamily(seed=args.seed)
        dataset_path = os.path.join(args.out, "problems.jsonl")
        write_dataset(dataset_path, family.problems(args.count))
        config = {
            "method": "astar",
            "dataset": dataset_path,
            "output_dir": os.path.join(args.out, "runs", "astar"),
            "seed": args.seed,
            "prompt_style": "plain",
            "write_traces": True,
            "policy": {"backend": "code_task", "family_seed": args.seed},
            "reward": {"backend": "code_oracle", "family_seed": args.seed, "noise_scale": 0.2},
            "controls": {"k": 16, "max_depth": 12, "breadth_cap": 5, "token_limit": 512},
        }
        config_path = os.path.join(args.out, "config.yaml")
        with open(config_path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(config, fh, sort_keys=False)
        print(f"wrote {dataset_path} ({args.count} problems) and {config_path}")
    elif args.kind == "mazes":
        specs = []
        for i in range(args.count):
            spec = random_maze(args.seed + i)
            specs.append(
                {
                    "width": spec.width,
                    "height": spec.height,
                    "walls": sorted(list(w) for w in spec.walls),
                    "start": list(spec.start),
                    "goal": list(spec.goal),
                }
            )
        path = os.path.join(args.out, "mazes.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"schema": 1, "mazes": specs}, fh, indent=2)
        print(f"wrote {path} ({args.count} mazes)")
    else:
        raise ConfigError(f"unknown fixture kind {args.kind!r}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; route them through ConfigError instead.
    def error(self, message: str):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="astar-decode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one method over a dataset")
    run.add_argument("--config", required=True, help="YAML or JSON run config")
    run.add_argument("--method", choices=METHODS, help="override the config's method")
    run.add_argument("--dataset", help="override the config's dataset path")
    run.add_argument("--output-dir", help="override the config's output directory")
    run.add_argument("--seed", type=int, help="override the config's seed")
    run.add_argument("--resume", action="store_true", help="skip problems already recorded")
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare", help="merge run summaries into a frontier CSV")
    compare.add_argument("run_dirs", nargs="+", help="run directories containing summary.json")
    compare.add_argument("--out", help="write CSV here instead of stdout")
    compare.set_defaults(func=cmd_compare)

    replay = sub.add_parser("replay", help="re-check invariants over stored traces")
    replay.add_argument("paths", nargs="+", help="trace files or directories of them")
    replay.set_defaults(func=cmd_replay)

    fixtures = sub.add_parser("gen-fixtures", help="write synthetic datasets and configs")
    fixtures.add_argument("--kind", choices=("codes", "mazes"), default="codes")
    fixtures.add_argument("--out", required=True, help="output directory")
    fixtures.add_argument("--seed", type=int, default=0)
    fixtures.add_argument("--count", type=int, default=20)
    fixtures.set_defaults(func=cmd_gen_fixtures)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("ASTAR_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PolicyUnavailable, RewardUnavailable) as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
