"""
HSTJPS - 缓存辅助星地混合网络的联合探测与调度

命令：
+ solve    : 离线求解 η*
+ simulate : 单点仿真一个或多个策略
+ sweep    : 参数扫描并输出 CSV
+ validate : 仅校验配置，并检查中继 CDF
"""

import argparse
import asyncio
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .core.catalog import validate_cache_profile
from .core.channel import check_relay_cdf
from .core.errors import ConfigError, HstjpsError
from .core.experiment import (
    build_network,
    load_config,
    make_row,
    parse_policy,
    point_key,
    run_sweep,
    solve_point,
    write_csv,
)
from .core.models import ExperimentConfig
from .core.sim import run_experiment
from .log import logger, setup_logging
from .storage.results_db import ResultsDB
from .utils.utils import format_rate

# validate 命令检查中继 CDF 的用户位置 (h_sq, d/R)
CHECK_POSITIONS = ((0.05, 0.25), (0.3, 0.5), (1.0, 0.9))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hstjps", description="缓存辅助星地混合网络的联合探测与调度")
    parser.add_argument("verb", choices=("solve", "simulate", "sweep", "validate"))
    parser.add_argument("--config", type=Path, help="JSON 配置文件，缺省使用默认场景")
    parser.add_argument("--frames", type=int, help="仿真帧数")
    parser.add_argument("--seed", type=int, help="随机种子")
    parser.add_argument("--policy", help="策略名，逗号分隔")
    parser.add_argument("--out", type=Path, help="CSV 输出路径，缺省输出到标准输出")
    parser.add_argument("--axis", choices=("p_ts_dbm", "p_tr_dbm", "tau_s"), help="扫描轴")
    parser.add_argument("--grid", help="扫描网格，逗号分隔（tau_s 以毫秒计）")
    parser.add_argument("--workers", type=int, help="并发进程数")
    parser.add_argument("--db", type=Path, help="结果数据库路径")
    parser.add_argument("--debug", action="store_true", help="输出调试日志")
    return parser


def _split(text: str | None) -> tuple[str, ...] | None:
    if not text:
        return None
    return tuple(part.strip() for part in text.split(",") if part.strip())


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """读取配置并应用命令行覆盖项"""
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.frames is not None:
        overrides["frames"] = args.frames
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.policy:
        overrides["policies"] = _split(args.policy)
    if args.axis:
        overrides["sweep_axis"] = args.axis
    if args.grid:
        try:
            overrides["sweep_grid"] = tuple(float(x) for x in _split(args.grid))
        except ValueError:
            raise ConfigError("sweep_grid", f"无法解析网格 {args.grid!r}") from None
    if not overrides:
        return config
    return ExperimentConfig.model_validate({**config.model_dump(), **overrides})


async def _solve(config: ExperimentConfig, db: ResultsDB | None) -> float:
    key = point_key(config)
    stored = await db.get_solution(key) if db is not None else None
    if stored is not None:
        return stored.eta_star
    solution = await asyncio.to_thread(solve_point, config)
    if db is not None:
        await db.put_solution(key, solution)
    return solution.eta_star


async def cmd_solve(config: ExperimentConfig, args: argparse.Namespace, db: ResultsDB | None):
    eta_star = await _solve(config, db)
    print(f"eta_star_bps={eta_star:.10g}")
    logger.info(f"[HSTJPS] η* = {format_rate(eta_star)}")


async def cmd_simulate(config: ExperimentConfig, args: argparse.Namespace, db: ResultsDB | None):
    env = build_network(config)
    kinds = [parse_policy(p) for p in config.policies]
    eta_star = await _solve(config, db)

    rows = []
    for policy in kinds:
        estimate = await asyncio.to_thread(
            run_experiment, policy, env, config.frames, config.seed,
            eta_star=eta_star,
            quad=config.quadrature(),
            reading=config.latency_reading,
            method=config.relay_cdf_method,
            batches=config.batches,
            workers=config.workers,
            max_users=config.max_users_per_frame,
        )
        rows.append(make_row(config, policy, eta_star, estimate.throughput, estimate.ci95_halfwidth))
    _emit(rows, args.out)


async def cmd_sweep(config: ExperimentConfig, args: argparse.Namespace, db: ResultsDB | None):
    rows = await run_sweep(config, db=db)
    _emit(rows, args.out)


async def cmd_validate(config: ExperimentConfig, args: argparse.Namespace, db: ResultsDB | None):
    env = build_network(config)
    print(f"cache: {validate_cache_profile(env.cache, env.catalog)}")
    rng = np.random.default_rng(config.seed)
    failed = 0
    for h_sq, frac in CHECK_POSITIONS:
        d = frac * env.cell_radius
        check = await asyncio.to_thread(
            check_relay_cdf, h_sq, d, env, rng, config.relay_check_samples, config.relay_cdf_method,
        )
        failed += not check.passed
        print(f"relay_cdf h_sq={h_sq:g} d={d:g}m sup_gap={check.sup_gap:.4f} passed={check.passed}")
    if failed:
        logger.warning(f"[HSTJPS] {failed} 个位置的中继 CDF 校验未通过")


def _emit(rows: list[dict], out: Path | None):
    if out is None:
        write_csv(rows, sys.stdout)
    else:
        write_csv(rows, out)
        logger.info(f"[HSTJPS] 已写入 {len(rows)} 行到 {out}")


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


async def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    command = COMMANDS[args.verb]
    if args.db is None or args.verb == "validate":
        await command(config, args, None)
        return 0
    async with ResultsDB(args.db) as db:
        await command(config, args, db)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.debug)
    try:
        return asyncio.run(run(args))
    except HstjpsError as e:
        logger.error(f"[HSTJPS] {e}")
        return 1
    except ValidationError as e:
        logger.error(f"[HSTJPS] 配置无效: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
