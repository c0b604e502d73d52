"""Command-line entry points: run, compare, replay-dump, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .feedback import (
    ExternalClientConfig,
    ExternalModelClient,
    ExternalParseError,
    NoFeedback,
    ScriptedProvider,
    parse_dsl,
    parse_external,
)
from .learning import RunResult, run_phased_training
from .reporting import (
    ReportMismatch,
    build_report,
    compare_runs,
    ensure_dir,
    load_report,
    metrics_csv,
    metrics_jsonl,
    render_comparison,
    write_report,
)
from .rewards import baseline_pools
from .rewards.templates import TemplateEngine
from .rollouts import write_replay_file
from .runconfig import ConfigError, RunConfig, config_from_dict, load_config

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_EXTERNAL = 3


def build_provider_parser_engine(cfg: RunConfig):
    """Wire the feedback provider, parser, and template engine for a config."""
    mode = cfg.feedback.mode
    provider = ScriptedProvider(cfg.feedback.schedule) if cfg.feedback.schedule else NoFeedback()

    if mode == "external":
        client = ExternalModelClient(ExternalClientConfig.from_env())
        fallback = cfg.feedback.fallback_to_dsl

        def parser(utterance, n_agents):
            try:
                return parse_external(utterance, n_agents, client)
            except ExternalParseError:
                if fallback:
                    return parse_dsl(utterance, n_agents)
                raise

        engine = TemplateEngine(mode="external", build_reward=client.build_reward)
        return provider, parser, engine

    return provider, parse_dsl, TemplateEngine(mode="dsl")


def run_single_seed(config_data: dict, seed: int, write_artifacts: bool = True) -> RunResult:
    """One complete run for one seed; writes replays and pool dumps when asked."""
    cfg = config_from_dict(config_data)
    provider, parser, engine = build_provider_parser_engine(cfg)
    pools = baseline_pools(3, alpha=cfg.alpha, beta=cfg.beta)
    result = run_phased_training(
        env_factory=cfg.env_factory(),
        cfg=cfg.generation_config(),
        generations=cfg.generations,
        pools=pools,
        provider=provider,
        parser=parser,
        template_engine=engine,
        seed=seed,
        eval_horizon=cfg.eval_horizon,
    )
    if write_artifacts:
        replay_dir = ensure_dir(os.path.join(cfg.output_dir, "replays"))
        for k, trajs in result.replays.items():
            write_replay_file(
                os.path.join(replay_dir, f"gen{k}_seed{seed}.jsonl"),
                trajs,
                layout_id=cfg.layout,
                recipe=cfg.recipe,
                generation=k,
            )
        with open(os.path.join(cfg.output_dir, f"pools_seed{seed}.txt"), "w", encoding="utf-8") as fh:
            for a in sorted(result.pools):
                fh.write(f"agent {a}\n{result.pools[a].describe()}\n\n")
    result.replays = {}
    return result


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        if args.desk:
            cfg.apply_desk_scale()
        if cfg.feedback.mode == "interactive":
            raise ConfigError("interactive mode runs through `marlcoach serve`")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    ensure_dir(cfg.output_dir)
    config_data = cfg.to_dict()
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [pool.submit(run_single_seed, config_data, s) for s in cfg.seeds]
                results = [f.result() for f in futures]
        else:
            results = [run_single_seed(config_data, s) for s in cfg.seeds]
    except ExternalParseError as e:
        print(f"external service failure: {e}", file=sys.stderr)
        return EXIT_EXTERNAL
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    with open(os.path.join(cfg.output_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(metrics_csv(results))
    with open(os.path.join(cfg.output_dir, "metrics.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(metrics_jsonl(results))
    write_report(os.path.join(cfg.output_dir, "report.json"), build_report(config_data, results))

    for res in results:
        print(f"seed {res.seed}: final original return {res.final_r_ori:.4f} "
              f"({res.feedback_phase_count} feedback phases)")
    print(f"artifacts in {cfg.output_dir}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    try:
        report_a = load_report(args.report_a)
        report_b = load_report(args.report_b)
        rows = compare_runs(report_a, report_b)
    except (OSError, ValueError, ReportMismatch) as e:
        print(f"compare failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"a = {args.report_a}")
    print(f"b = {args.report_b}")
    print(render_comparison(rows))
    return EXIT_OK


def _cmd_replay_dump(args: argparse.Namespace) -> int:
    replay_dir = os.path.join(args.run_dir, "replays")
    if not os.path.isdir(replay_dir):
        print(f"no replays directory under {args.run_dir}", file=sys.stderr)
        return EXIT_RUNTIME
    prefix = f"gen{args.generation}_"
    names = sorted(n for n in os.listdir(replay_dir) if n.startswith(prefix))
    if not names:
        print(f"no replays for generation {args.generation}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in names:
        with open(os.path.join(replay_dir, name), encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        if args.desk:
            cfg.apply_desk_scale()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(cfg), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="marlcoach", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a training run from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--desk", action="store_true", help="shrink training volume to laptop scale")
    p_run.add_argument("--jobs", type=int, default=1, help="seeds to run in parallel")
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare two run reports")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.set_defaults(fn=_cmd_compare)

    p_dump = sub.add_parser("replay-dump", help="print a generation's replay documents")
    p_dump.add_argument("run_dir")
    p_dump.add_argument("generation", type=int)
    p_dump.set_defaults(fn=_cmd_replay_dump)

    p_serve = sub.add_parser("serve", help="start the interactive session service")
    p_serve.add_argument("config")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8008)
    p_serve.add_argument("--desk", action="store_true")
    p_serve.set_defaults(fn=_cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
