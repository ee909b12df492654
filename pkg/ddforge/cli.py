"""Command-line entry point: ``ddforge <command> [options]``.

Data goes to the files named by ``--out``; run summaries go to stdout as
JSON; logs and ``ddforge:error:<code>: <message>`` lines go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np
import sentry_sdk
from pydantic import ValidationError

from . import __version__
from .config import Settings, load_settings
from .monitoring import get_prometheus_metrics, init_sentry
from .queue import create_pool
from .schemas import CacheStats, SamplerConfig, ThreeComponentParams
from .services import analysis
from .services.agent import EPISODE_HEADER
from .services.coherence import CSV_HEADER as COHERENCE_HEADER
from .services.coherence import coherence
from .services.fitting import datasets_from_csv, fit_nsd
from .services.noise_model import (
    EnvironmentSampler,
    GaussianNsd,
    ThreeComponentNsd,
    environments_from_records,
    environments_to_records,
    sample_environments,
)
from .services.sensing import CSV_HEADER as SENSITIVITY_HEADER
from .services.sensing import SUMMARY_HEADER as SENSITIVITY_SUMMARY_HEADER
from .services.sensing import compare_strategies
from .services.sequences import DdSequence, SegmentKind, segments_for_time
from .services.spectral import TransformCache, cache_load, cache_save
from .tasks import merge_entries, oracle_environment, oracle_environment_job, train_environment, train_environment_job
from .utils.errors import ConfigError, DdforgeError, UsageError, config_error_from_validation, format_error_line
from .utils.records import write_csv, write_json
from .utils.storage import resolve_output_path, write_metadata

logger = logging.getLogger("ddforge")

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------
def _read_json(path: str, field: str) -> Any:
    source = Path(path)
    if not source.is_file():
        raise ConfigError(f"{field} file {source} does not exist", field=field)
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{field} file {source} is not valid JSON: {exc}", field=field) from exc


def _load_environments(path: str, indices: Optional[Sequence[int]] = None) -> list[tuple[int, GaussianNsd]]:
    records = _read_json(path, "envs")
    if not isinstance(records, list) or not records:
        raise ConfigError("envs file must hold a non-empty JSON array of environments", field="envs")
    try:
        environments = environments_from_records(records)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"envs file has an invalid environment record: {exc}", field="envs") from exc
    pairs = list(enumerate(environments))
    if indices:
        bad = [i for i in indices if not 0 <= i < len(environments)]
        if bad:
            raise UsageError(f"--env-index out of range for {len(environments)} environments: {bad}")
        pairs = [pairs[i] for i in indices]
    return pairs


def _load_records(path: str) -> list[dict[str, Any]]:
    """Result records from one JSON file or every ``*.json`` file of a directory."""

    source = Path(path)
    files = sorted(p for p in source.glob("*.json") if not p.name.endswith(".meta.json")) if source.is_dir() else [source]
    records: list[dict[str, Any]] = []
    for file in files:
        payload = _read_json(str(file), "results")
        if not isinstance(payload, list):
            raise ConfigError(f"results file {file} must hold a JSON array of records", field="results")
        records.extend(payload)
    if not records:
        raise ConfigError(f"no result records found in {source}", field="results")
    return records


@contextmanager
def _transform_cache(settings: Settings, args: argparse.Namespace) -> Iterator[TransformCache]:
    """Cache for one run: loaded from and saved back to ``cache_path`` when configured.

    The save also runs when the command fails, so transforms computed before
    the failure are kept.
    """

    path = settings.cache_path
    if path:
        cache = cache_load(path, create_if_absent=bool(getattr(args, "create_cache", False)), quadrature=settings.quadrature())
    else:
        cache = TransformCache(settings.quadrature())
    try:
        yield cache
    finally:
        if path:
            cache_save(cache, path)


def _emit(summary: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")


def _finish(out: str, command: str, settings: Settings, cache: TransformCache | None = None) -> None:
    extra: dict[str, Any] = {"seed": settings.seed}
    if cache is not None:
        extra["cache"] = cache.stats()
    write_metadata(out, command, extra)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def cmd_sample_envs(args: argparse.Namespace, settings: Settings) -> int:
    if args.sampler:
        document = _read_json(args.sampler, "sampler")
        if not isinstance(document, dict):
            raise ConfigError("sampler config must be a JSON object", field="sampler")
    else:
        document = SamplerConfig.default().model_dump(exclude={"seed", "gamma", "include_two_pi"})
    document.setdefault("gamma", settings.gamma)
    document.setdefault("include_two_pi", settings.include_two_pi)
    if "seed" not in document or args.seed is not None:
        document["seed"] = settings.seed
    if args.count is not None:
        document["count"] = args.count
    try:
        config = SamplerConfig(**document)
    except ValidationError as exc:
        raise config_error_from_validation(exc) from exc
    environments = sample_environments(EnvironmentSampler.from_config(config))
    write_json(args.out, environments_to_records(environments))
    _finish(args.out, "sample-envs", settings)
    _emit({"count": len(environments), "seed": config.seed, "out": str(resolve_output_path(args.out))})
    return 0


def _eval_pairs(args: argparse.Namespace, settings: Settings) -> list[tuple[str, int, DdSequence, GaussianNsd]]:
    environments = _load_environments(args.envs, args.env_index)
    options = settings.sequence_options()
    if args.sequence:
        payload = _read_json(args.sequence, "sequence")
        if isinstance(payload, list):
            by_index = dict(environments)
            pairs = []
            for record in payload:
                if args.T is not None and abs(float(record["T"]) - args.T) > 1e-9:
                    continue
                env_id = int(record["env_id"])
                if env_id not in by_index:
                    continue
                sequence = DdSequence(
                    tuple(SegmentKind(code) for code in record["actions"]), options["delta_t"], options["pulses_per_segment"]
                )
                pairs.append((sequence.names, env_id, sequence, by_index[env_id]))
            if not pairs:
                raise UsageError("the sequence file holds no records matching the selected environments and T")
            return pairs
        sequence = DdSequence.from_json(payload, pulses_per_segment=settings.pulses_per_segment)
        label = sequence.names
    else:
        if args.T is None:
            raise UsageError("--T is required with --strategy")
        try:
            kind = SegmentKind.parse(args.strategy)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"unknown strategy {args.strategy!r}; expected FID, Hahn, CPMG or UDD") from exc
        sequence = DdSequence.pure(kind, segments_for_time(args.T, settings.delta_t), **options)
        label = kind.name
    return [(label, env_id, sequence, nsd) for env_id, nsd in environments]


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    pairs = _eval_pairs(args, settings)
    grid = settings.grid()
    with _transform_cache(settings, args) as cache:
        results = [
            coherence(sequence, nsd, grid, cache, sequence_id=label, nsd_id=env_id) for label, env_id, sequence, nsd in pairs
        ]
        write_csv(args.out, COHERENCE_HEADER, (r.csv_row() for r in results))
        _finish(args.out, "eval", settings, cache)
        values = np.array([r.w for r in results])
        _emit(
            {
                "rows": len(results),
                "mean": float(values.mean()),
                "min": float(values.min()),
                "max": float(values.max()),
                "cache": cache.stats(),
            }
        )
    return 0


def _payload(env_id: int, nsd: GaussianNsd, max_time: float, settings: Settings, **extra: Any) -> dict[str, Any]:
    return {
        "env_index": env_id,
        "environment": environments_to_records([nsd])[0],
        "max_time": max_time,
        "grid": {"omega_min": settings.omega_min, "omega_max": settings.omega_max, "n_points": settings.n_points},
        "quadrature": {
            "nodes_per_segment": settings.nodes_per_segment,
            "end_correction": settings.quadrature_end_correction,
        },
        "cache_path": str(resolve_output_path(settings.cache_path)) if settings.cache_path else None,
        **extra,
    }


def _run_per_environment(
    settings: Settings,
    environments: list[tuple[int, GaussianNsd]],
    cache: TransformCache,
    local: Callable[..., list[dict[str, Any]]],
    job: Callable[[dict[str, Any]], dict[str, Any]],
    payload_extra: dict[str, Any],
    max_time: float,
) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Records sorted by (env_id, T), plus the stats of the pool that produced them."""

    pool = create_pool(settings.workers, settings.redis_url)
    try:
        if pool.in_process:
            runner = partial(local, grid=settings.grid(), cache=cache)
            chunks = pool.map_ordered(lambda pair: runner(pair[0], pair[1], max_time), environments)
        else:
            payloads = [_payload(env_id, nsd, max_time, settings, **payload_extra) for env_id, nsd in environments]
            responses = pool.map_ordered(job, payloads)
            chunks = []
            for response in responses:
                merge_entries(cache, response["entries"])
                chunks.append(response["records"])
        pool_stats = pool.stats()
    finally:
        pool.shutdown()
    logger.info("Finished %d environments on %s", len(environments), pool_stats["backend"])
    records = [record for chunk in chunks for record in chunk]
    return sorted(records, key=lambda r: (r["env_id"], r["T"])), pool_stats


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    overrides = _read_json(args.train_config, "train_config") if args.train_config else {}
    if not isinstance(overrides, dict):
        raise ConfigError("train config must be a JSON object", field="train_config")
    try:
        config = settings.train_config(**overrides)
    except ValidationError as exc:
        raise config_error_from_validation(exc, prefix="train_config") from exc
    segments_for_time(args.T_max, config.delta_t)
    environments = _load_environments(args.envs, args.env_index)
    with_episodes = bool(args.episode_log)

    def local(env_id: int, nsd: GaussianNsd, max_time: float, *, grid, cache) -> list[dict[str, Any]]:
        return train_environment(env_id, nsd, max_time, config, grid, cache, with_episodes=with_episodes)

    extra = {"config": config.model_dump(), "with_episodes": with_episodes}
    with _transform_cache(settings, args) as cache:
        records, pool_stats = _run_per_environment(
            settings, environments, cache, local, train_environment_job, extra, args.T_max
        )
        if with_episodes:
            episode_rows = [row for record in records for row in record.pop("episode_log")]
            write_csv(args.episode_log, EPISODE_HEADER, episode_rows)
        write_json(args.out, records)
        _finish(args.out, "train", settings, cache)
        final = [r["coherence"] for r in records if abs(r["T"] - args.T_max) < 1e-9]
        _emit(
            {
                "environments": len(environments),
                "records": len(records),
                "mean_final_coherence": float(np.mean(final)) if final else None,
                "cache": cache.stats(),
                "pool": pool_stats,
            }
        )
    return 0


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> int:
    if args.N is not None:
        max_time = args.N * settings.delta_t
    elif args.T is not None:
        max_time = args.T
    else:
        raise UsageError("oracle needs --T or --N")
    segments_for_time(max_time, settings.delta_t)
    options = {
        "mode": None if args.mode == "auto" else args.mode,
        "depth": args.depth or settings.incremental_depth,
        "limit": settings.exhaustive_limit,
        "exhaustive_max_time": settings.oracle_exhaustive_max_time,
        **settings.sequence_options(),
    }
    environments = _load_environments(args.envs, args.env_index)

    def local(env_id: int, nsd: GaussianNsd, max_time: float, *, grid, cache) -> list[dict[str, Any]]:
        return oracle_environment(env_id, nsd, max_time, options, grid, cache, ladder=args.ladder)

    with _transform_cache(settings, args) as cache:
        records, pool_stats = _run_per_environment(
            settings,
            environments,
            cache,
            local,
            oracle_environment_job,
            {"options": options, "ladder": args.ladder},
            max_time,
        )
        write_json(args.out, records)
        _finish(args.out, "oracle", settings, cache)
        _emit(
            {"environments": len(environments), "records": len(records), "cache": cache.stats(), "pool": pool_stats}
        )
    return 0


def cmd_sensitivity(args: argparse.Namespace, settings: Settings) -> int:
    environments = _load_environments(args.envs, args.env_index)
    n_segments = segments_for_time(args.T, settings.delta_t)
    options = settings.sequence_options()
    strategies: dict[str, Any] = {}
    for name in args.strategy or []:
        try:
            kind = SegmentKind.parse(name)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"unknown strategy {name!r}") from exc
        strategies[kind.name] = DdSequence.pure(kind, n_segments, **options)
    if args.sequences:
        by_env: dict[int, DdSequence] = {}
        for record in _load_records(args.sequences):
            if abs(float(record["T"]) - args.T) < 1e-9:
                by_env[int(record["env_id"])] = DdSequence(
                    tuple(SegmentKind(code) for code in record["actions"]), options["delta_t"], options["pulses_per_segment"]
                )
        missing = [env_id for env_id, _ in environments if env_id not in by_env]
        if missing:
            raise UsageError(f"--sequences has no record at T={args.T} for environments {missing}")
        strategies[args.label] = [by_env[env_id] for env_id, _ in environments]
    if not strategies:
        raise UsageError("give at least one --strategy or --sequences")

    omega_s = args.omega_s if args.omega_s is not None else settings.omega_s
    with _transform_cache(settings, args) as cache:
        comparison = compare_strategies(
            strategies,
            [nsd for _, nsd in environments],
            omega_s,
            settings.grid(),
            cache,
            blind_floor=settings.filter_blind_floor,
        )
        env_ids = [env_id for env_id, _ in environments]
        rows = [(name, env_ids[index], *rest) for name, index, *rest in comparison.rows]
        write_csv(args.out, SENSITIVITY_HEADER, rows)
        _finish(args.out, "sensitivity", settings, cache)
        if args.summary:
            write_csv(args.summary, SENSITIVITY_SUMMARY_HEADER, comparison.summary_rows())
        _emit(
            {
                "omega_s": omega_s,
                "strategies": {
                    s.strategy: {"geometric_mean_M": s.geometric_mean, "ratio_to_best": s.ratio_to_best}
                    for s in comparison.summaries
                },
            }
        )
    return 0


def _parse_bounds(document: Any) -> dict[str, tuple[float, float]]:
    if not isinstance(document, dict):
        raise ConfigError("bounds must be a JSON object of [low, high] pairs", field="bounds")
    bounds = {}
    for name, pair in document.items():
        if name not in ThreeComponentParams.model_fields:
            raise ConfigError(f"bounds names unknown parameter {name!r}", field=f"bounds.{name}")
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"bounds.{name} must be [low, high]", field=f"bounds.{name}")
        bounds[name] = (float(pair[0]), float(pair[1]))
    return bounds


def cmd_fit_nsd(args: argparse.Namespace, settings: Settings) -> int:
    data = Path(args.data)
    if not data.is_file():
        raise ConfigError(f"data file {data} does not exist", field="data")
    datasets = datasets_from_csv(data.read_text(encoding="utf-8"))
    try:
        init = ThreeComponentParams(**_read_json(args.init, "init"))
    except ValidationError as exc:
        raise config_error_from_validation(exc, prefix="init") from exc
    bounds = _parse_bounds(_read_json(args.bounds, "bounds")) if args.bounds else None
    vary = {name: False for name in args.fix or []}
    with _transform_cache(settings, args) as cache:
        result = fit_nsd(
            datasets,
            ThreeComponentNsd(**init.model_dump()),
            settings.grid(),
            cache,
            bounds=bounds,
            vary=vary,
            restarts=args.restarts,
        )
        write_json(args.out, result.to_record().model_dump())
        _finish(args.out, "fit-nsd", settings, cache)
        _emit({"sse": result.sse, "converged": result.converged, "params": result.params.to_dict()})
    return 0


def cmd_analyze(args: argparse.Namespace, settings: Settings) -> int:
    records = _load_records(args.results)
    if args.T is not None:
        at_time = [r for r in records if abs(float(r["T"]) - args.T) < 1e-9]
    else:
        at_time = records

    if args.kind == "proportions":
        header, rows = analysis.PROPORTION_HEADER, analysis.proportions_by_time(records)
    elif args.kind == "by-parameter":
        if not args.envs or args.T is None:
            raise UsageError("by-parameter needs --envs and --T")
        environments = dict(_load_environments(args.envs))
        selected = sorted(at_time, key=lambda r: r["env_id"])
        values = [getattr(environments[int(r["env_id"])], args.parameter) for r in selected]
        rows = analysis.proportions_by_parameter(values, [r["actions"] for r in selected], args.parameter, args.bins)
        header = analysis.PARAMETER_HEADER
    elif args.kind == "autocorrelation":
        header = analysis.AUTOCORRELATION_HEADER
        sequences = [r["actions"] for r in at_time if len(r["actions"]) > args.max_lag]
        rows = [(lag, value, len(sequences)) for lag, value in analysis.sequence_autocorrelation(sequences, args.max_lag)]
    elif args.kind == "normalized":
        if not args.oracle:
            raise UsageError("normalized needs --oracle")
        header = analysis.NORMALIZED_HEADER
        rows = analysis.normalized_coherence(records, _load_records(args.oracle))
    elif args.kind == "cdf":
        if args.T is None:
            raise UsageError("cdf needs --T")
        header, rows = analysis.CDF_HEADER, analysis.coherence_cdf(records, args.T)
    else:
        header, rows = analysis.SUMMARY_HEADER, analysis.mean_coherence_by_time(records)

    write_csv(args.out, header, rows)
    _finish(args.out, f"analyze {args.kind}", settings)
    _emit({"kind": args.kind, "rows": len(rows), "records": len(records)})
    return 0


def cmd_cache_stats(args: argparse.Namespace, settings: Settings) -> int:
    path = settings.cache_path
    if not path:
        raise UsageError("cache-stats needs --cache or cache_path in the config")
    cache = cache_load(path, create_if_absent=bool(args.create_cache))
    target = Path(path)
    stats = CacheStats(
        **cache.stats(), file_size=target.stat().st_size if target.exists() else None, path=str(target)
    )
    _emit(stats.model_dump())
    if args.metrics:
        if settings.metrics_enabled:
            sys.stdout.write(get_prometheus_metrics().decode("utf-8"))
        else:
            logger.warning("metrics_enabled is false; not printing metrics")
    return 0


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------
def _global_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("global options")
    group.add_argument("--config", help="JSON settings file (flags override it)")
    group.add_argument("--seed", type=int)
    group.add_argument("--grid", nargs=3, metavar=("OMEGA_MIN", "OMEGA_MAX", "N_POINTS"))
    group.add_argument("--delta-t", type=float, dest="delta_t")
    group.add_argument("--pulses-per-segment", type=int, dest="pulses_per_segment")
    group.add_argument("--cache", dest="cache_path", help="transform cache file")
    group.add_argument("--create-cache", action="store_true", help="start an empty cache when the file is absent")
    group.add_argument("--workers", type=int)
    group.add_argument("--log-level")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _global_options()
    parser = _ArgumentParser(prog="ddforge", description="Dynamical-decoupling sequence discovery and evaluation")
    parser.add_argument("--version", action="version", version=f"ddforge {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    sample = commands.add_parser("sample-envs", parents=[parent], help="sample noise environments")
    sample.add_argument("--sampler", help="sampler config JSON (ranges, count, seed, gamma)")
    sample.add_argument("--count", type=int)
    sample.add_argument("--out", required=True)
    sample.set_defaults(handler=cmd_sample_envs)

    evaluate = commands.add_parser("eval", parents=[parent], help="coherence of a strategy per environment")
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--strategy", help="FID, Hahn, CPMG or UDD repeated to fill T")
    source.add_argument("--sequence", help="sequence JSON or a train/oracle results file")
    evaluate.add_argument("--envs", required=True)
    evaluate.add_argument("--T", type=float)
    evaluate.add_argument("--env-index", type=int, nargs="+")
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(handler=cmd_eval)

    train = commands.add_parser("train", parents=[parent], help="warm-started Q-learning ladder per environment")
    train.add_argument("--envs", required=True)
    train.add_argument("--T-max", type=float, required=True, dest="T_max")
    train.add_argument("--train-config", help="JSON with TrainConfig fields")
    train.add_argument("--parallel", type=int, dest="workers", help="worker count")
    train.add_argument("--env-index", type=int, nargs="+")
    train.add_argument("--episode-log", help="CSV of env_id, T, episode, epsilon, reward")
    train.add_argument("--out", required=True)
    train.set_defaults(handler=cmd_train)

    brute = commands.add_parser("oracle", parents=[parent], help="brute-force reference optimum")
    brute.add_argument("--envs", required=True)
    horizon = brute.add_mutually_exclusive_group(required=True)
    horizon.add_argument("--T", type=float)
    horizon.add_argument("--N", type=int)
    brute.add_argument("--mode", choices=("auto", "exhaustive", "incremental"), default="auto")
    brute.add_argument("--depth", type=int)
    brute.add_argument("--ladder", action="store_true", help="one record per T = Δt … T")
    brute.add_argument("--env-index", type=int, nargs="+")
    brute.add_argument("--out", required=True)
    brute.set_defaults(handler=cmd_oracle)

    sense = commands.add_parser("sensitivity", parents=[parent], help="relative AC-magnetometry sensitivity")
    sense.add_argument("--envs", required=True)
    sense.add_argument("--T", type=float, required=True)
    sense.add_argument("--strategy", action="append", help="pure strategy name; repeatable")
    sense.add_argument("--sequences", help="train/oracle results providing one sequence per environment")
    sense.add_argument("--label", default="trained")
    sense.add_argument(
        "--omega-s",
        type=float,
        dest="omega_s",
        help="target angular frequency in rad/µs (default 1.0); 2π rad/µs is blind for 4 µs segments",
    )
    sense.add_argument("--env-index", type=int, nargs="+")
    sense.add_argument("--summary", help="per-strategy summary CSV")
    sense.add_argument("--out", required=True)
    sense.set_defaults(handler=cmd_sensitivity)

    fit = commands.add_parser("fit-nsd", parents=[parent], help="joint Ramsey/CPMG noise-spectrum fit")
    fit.add_argument("--data", required=True, help="CSV: label,time_us,coherence[,weight]")
    fit.add_argument("--init", required=True, help="JSON initial parameters y0, a_g, v_g, w_g, a_1f")
    fit.add_argument("--bounds", help="JSON {name: [low, high]}")
    fit.add_argument("--fix", nargs="+", choices=ThreeComponentParams.model_fields.keys())
    fit.add_argument("--restarts", type=int, default=3)
    fit.add_argument("--out", required=True)
    fit.set_defaults(handler=cmd_fit_nsd)

    analyze = commands.add_parser("analyze", parents=[parent], help="post-hoc statistics over results")
    analyze.add_argument(
        "kind", choices=("proportions", "by-parameter", "autocorrelation", "normalized", "cdf", "summary")
    )
    analyze.add_argument("--results", required=True, help="results JSON file or directory of them")
    analyze.add_argument("--oracle", help="oracle results for normalisation")
    analyze.add_argument("--envs")
    analyze.add_argument("--parameter", choices=("y0", "a", "v_L", "w1"), default="v_L")
    analyze.add_argument("--bins", type=int, default=5)
    analyze.add_argument("--max-lag", type=int, default=10)
    analyze.add_argument("--T", type=float)
    analyze.add_argument("--out", required=True)
    analyze.set_defaults(handler=cmd_analyze)

    stats = commands.add_parser("cache-stats", parents=[parent], help="transform cache summary")
    stats.add_argument("--metrics", action="store_true", help="also print Prometheus metrics")
    stats.set_defaults(handler=cmd_cache_stats)
    return parser


def _settings_from_args(args: argparse.Namespace) -> Settings:
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "delta_t": args.delta_t,
        "pulses_per_segment": args.pulses_per_segment,
        "cache_path": args.cache_path,
        "workers": getattr(args, "workers", None),
        "log_level": args.log_level,
    }
    if args.grid:
        try:
            overrides.update(omega_min=float(args.grid[0]), omega_max=float(args.grid[1]), n_points=int(args.grid[2]))
        except ValueError as exc:
            raise UsageError(f"--grid expects OMEGA_MIN OMEGA_MAX N_POINTS: {exc}") from exc
    return load_settings(args.config, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = _settings_from_args(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except DdforgeError as exc:
        sys.stderr.write(format_error_line(exc) + "\n")
        return exc.exit_code

    logging.basicConfig(level=getattr(logging, settings.log_level), format=LOG_FORMAT, stream=sys.stderr)
    init_sentry(settings.sentry_dsn)
    try:
        return int(args.handler(args, settings))
    except DdforgeError as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        sys.stderr.write(format_error_line(exc) + "\n")
        return exc.exit_code
    except ValidationError as exc:
        error = config_error_from_validation(exc)
        sys.stderr.write(format_error_line(error) + "\n")
        return error.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failure path
        logger.exception("Unhandled error in %s", args.command)
        sentry_sdk.capture_exception(exc)
        sys.stderr.write(f"ddforge:error:internal_error: {' '.join(str(exc).split()) or type(exc).__name__}\n")
        return 1


__all__ = ["build_parser", "main"]
