"""
Configuration loading, sweep orchestration and CSV output
"""

import asyncio
import csv
import io
import json
from concurrent.futures import Executor, ProcessPoolExecutor
from pathlib import Path
from typing import IO

from pydantic import ValidationError

from ..log import logger
from ..storage.results_db import ROW_COLUMNS, ResultsDB
from ..utils.utils import format_rate
from .catalog import validate_cache_profile
from .errors import ConfigError, HstjpsError, SweepError
from .models import ExperimentConfig, NetworkConfig
from .policy import PolicyKind
from .sim import run_experiment
from .solver import EtaSolution, scenario_key, solve_eta_star

CSV_COLUMNS = ROW_COLUMNS


def _config_error(err: ValidationError) -> ConfigError:
    first = err.errors()[0]
    key = ".".join(str(part) for part in first["loc"]) or "config"
    return ConfigError(key, first["msg"])


def build_network(config: ExperimentConfig) -> NetworkConfig:
    """换算并校验场景，缓存容量等式不成立时报告具体约束"""
    try:
        env = config.network()
    except ValidationError as err:
        raise _config_error(err) from err
    report = validate_cache_profile(env.cache, env.catalog)
    if not report.ok:
        first = report.violations[0]
        raise ConfigError(first.key, first.message)
    return env


def load_config(path: str | Path) -> ExperimentConfig:
    """
    读取 JSON 配置

    未知键、非法取值和缓存容量约束都会以 ConfigError 报告，并指明键名
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"文件不存在: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"JSON 解析失败: {err}") from err

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise _config_error(err) from err
    build_network(config)
    for name in config.policies:
        parse_policy(name)
    return config


def parse_policy(name: str) -> PolicyKind:
    try:
        return PolicyKind(name)
    except ValueError:
        valid = ", ".join(p.value for p in PolicyKind)
        raise ConfigError("policies", f"未知策略 {name!r}，可选: {valid}") from None


def solve_point(config: ExperimentConfig) -> EtaSolution:
    """求解一个配置点的 η*"""
    return solve_eta_star(
        build_network(config),
        config.quadrature(),
        reading=config.latency_reading,
        method=config.relay_cdf_method,
    )


def point_key(config: ExperimentConfig) -> str:
    return scenario_key(build_network(config), config.quadrature(), config.latency_reading, config.relay_cdf_method)


def make_row(config: ExperimentConfig, policy: PolicyKind, eta_star: float, throughput: float, ci95: float) -> dict:
    return {
        "policy": policy.value,
        "p_ts_dbm": config.p_ts_dbm,
        "p_tr_dbm": config.p_tr_dbm,
        "tau_s_s": config.tau_s_ms / 1e3,
        "frames": config.frames,
        "seed": config.seed,
        "eta_star_bps": eta_star,
        "throughput_bps": throughput,
        "ci95_bps": ci95,
    }


def run_point(
    config: ExperimentConfig,
    axis: str,
    value: float,
    policies: tuple[PolicyKind, ...],
    eta_star: float | None = None,
    frame_workers: int = 1,
) -> tuple[EtaSolution | None, list[dict]]:
    """
    一个扫描点：离线求 η*（未给定时），再逐策略仿真

    Returns:
        (新求得的解或 None, 按策略顺序的结果行)
    """
    solution = None
    try:
        env = build_network(config)
        if eta_star is None:
            solution = solve_point(config)
            eta_star = solution.eta_star
    except HstjpsError as err:
        raise SweepError(axis, value, "*", err) from err

    rows = []
    for policy in policies:
        try:
            estimate = run_experiment(
                policy, env, config.frames, config.seed,
                eta_star=eta_star,
                quad=config.quadrature(),
                reading=config.latency_reading,
                method=config.relay_cdf_method,
                batches=config.batches,
                workers=frame_workers,
                max_users=config.max_users_per_frame,
            )
        except HstjpsError as err:
            raise SweepError(axis, value, policy.value, err) from err
        rows.append(make_row(config, policy, eta_star, estimate.throughput, estimate.ci95_halfwidth))
    return solution, rows


async def run_sweep(
    config: ExperimentConfig,
    axis: str | None = None,
    grid: tuple[float, ...] | None = None,
    *,
    policies: tuple[str, ...] | None = None,
    workers: int | None = None,
    db: ResultsDB | None = None,
) -> list[dict]:
    """
    参数扫描

    每个网格点重新求解 η* 并仿真全部策略；网格点可并发执行，结果行始终按网格顺序返回。

    Args:
        config: 基础配置
        axis: 扫描轴 p_ts_dbm | p_tr_dbm | tau_s（tau_s 以毫秒计）
        grid: 网格取值
        policies: 策略名列表
        workers: 并发进程数
        db: 结果数据库，命中相同场景指纹时复用 η*
    """
    axis = axis or config.sweep_axis
    if axis not in ("p_ts_dbm", "p_tr_dbm", "tau_s"):
        raise ConfigError("sweep_axis", f"不支持的扫描轴 {axis!r}")
    grid = tuple(config.sweep_grid if grid is None else grid)
    if not grid:
        raise ConfigError("sweep_grid", "扫描网格不能为空")
    kinds = tuple(parse_policy(p) for p in (policies or config.policies))
    workers = workers or config.workers

    points = [config.with_axis(axis, v) for v in grid]
    known: list[float | None] = [None] * len(points)
    keys = [point_key(p) for p in points]
    if db is not None:
        for i, key in enumerate(keys):
            stored = await db.get_solution(key)
            known[i] = stored.eta_star if stored else None

    logger.info(f"[HSTJPS] 开始扫描 {axis}: {len(grid)} 个点 × {len(kinds)} 个策略，{workers} 个进程")
    loop = asyncio.get_running_loop()
    executor: Executor | None = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        jobs = [
            loop.run_in_executor(executor, run_point, point, axis, value, kinds, eta)
            for point, value, eta in zip(points, grid, known)
        ]
        results = await asyncio.gather(*jobs, return_exceptions=True)
    finally:
        if executor is not None:
            executor.shutdown()

    failures = [r for r in results if isinstance(r, BaseException)]
    if failures:
        for err in failures:
            logger.error(f"[HSTJPS] 扫描点失败: {err}")
        raise failures[0]

    rows = []
    run_id = await db.create_run(axis) if db is not None else None
    for key, (solution, point_rows) in zip(keys, results):
        if db is not None and solution is not None:
            await db.put_solution(key, solution)
        for row in point_rows:
            if run_id is not None:
                db.add_row(run_id, len(rows), row)
            rows.append(row)
            logger.info(
                f"[HSTJPS] {axis}={row['tau_s_s'] * 1e3 if axis == 'tau_s' else row[axis]:g} "
                f"{row['policy']}: {format_rate(row['throughput_bps'])} (η* = {format_rate(row['eta_star_bps'])})"
            )
    if db is not None:
        await db.flush()
    return rows


def _format(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(rows: list[dict], out: str | Path | IO[str] | None = None) -> str:
    """
    按固定列顺序输出 CSV，浮点数统一格式化，相同输入得到逐字节相同的输出

    Returns:
        CSV 文本
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_format(row[c]) for c in CSV_COLUMNS])
    text = buffer.getvalue()

    if isinstance(out, (str, Path)):
        Path(out).write_text(text, encoding="utf-8", newline="")
    elif out is not None:
        out.write(text)
    return text
