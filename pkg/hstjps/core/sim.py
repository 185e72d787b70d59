"""
Renewal-reward simulation of the scheduling frame loop

每个帧从上一次调度结束开始，逐个处理到达用户直到某个用户被调度。
每个帧使用独立的随机流 SeedSequence(seed, spawn_key=(frame,))，
因此结果与执行顺序和进程数无关；每个到达用户按固定顺序采样全部观测量，
不同策略在同一种子下看到相同的用户序列。
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from ..log import logger
from ..utils.utils import format_duration, format_rate
from .catalog import Request, draw_requests, sample_cache_states
from .channel import draw_channel
from .errors import DomainError, SimulationError
from .models import LatencyReading, NetworkConfig, QuadratureSpec, RelayCdfMethod
from .policy import (
    Decision,
    ObservationPath,
    PolicyKind,
    Stage1Obs,
    Stage2Obs,
    baseline_decide,
    probe_rates,
    stage1_decisions,
    stage2_rule,
)
from .rates import assisted_latency, direct_latency, rate_from_snr

# 每次成批采样的用户数
USER_BLOCK = 64

DEFAULT_MAX_USERS = 1_000_000


@dataclass(frozen=True, slots=True)
class FrameOutcome:
    """一个更新周期（帧）的结果"""

    reward: float
    """被调度用户的文件大小 V_N (bit)"""

    time: float
    """帧时长 T_N (s)"""

    users_seen: int
    probes: int
    mode: Decision
    """终止动作"""

    waiting_time: float
    """到达间隔之和 (s)"""

    probing_time: float
    """探测开销之和 (s)"""

    delivery_time: float
    """传输时延 (s)"""

    path: ObservationPath


@dataclass(frozen=True, slots=True)
class ThroughputEstimate:
    """吞吐量估计（比值估计 + 批均值置信区间）"""

    throughput: float
    """Σ reward / Σ time (bit/s)"""

    ci95_halfwidth: float
    """95% 置信区间半宽 (bit/s)，批数不足 2 时为 nan"""

    frames: int
    seed: int
    std_error: float = float("nan")
    users: int = 0
    probes: int = 0
    batches: int = 0

    @property
    def probe_fraction(self) -> float:
        return self.probes / self.users if self.users else 0.0


class SimClock:
    """独立的仿真时钟，用于核对帧时长之和"""

    def __init__(self):
        self.now = 0.0
        self.events = 0

    def advance(self, dt: float):
        if dt < 0:
            raise DomainError("SimClock.advance", dt)
        self.now += dt
        self.events += 1


@dataclass(slots=True)
class FrameTotals:
    """一段连续帧的汇总数组"""

    rewards: np.ndarray
    times: np.ndarray
    users: np.ndarray
    probes: np.ndarray
    clock: float


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    """第 frame 帧的独立随机源"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame,)))


@dataclass(slots=True)
class _UserBlock:
    """一批到达用户的完整观测，按固定顺序采样"""

    file_index: np.ndarray
    size: np.ndarray
    gap: np.ndarray
    beta_s: np.ndarray
    beta_r: np.ndarray
    cell: np.ndarray
    d: np.ndarray
    h_sq: np.ndarray
    alpha_sq: np.ndarray
    g_sq: np.ndarray

    @classmethod
    def draw(cls, env: NetworkConfig, rng: np.random.Generator, size: int) -> "_UserBlock":
        file_index, sizes, gaps = draw_requests(env.catalog, env.tau_s, rng, size)
        beta_s, beta_r = sample_cache_states(env.cache, file_index, rng)
        cell = rng.integers(1, env.cells + 1, size)
        # 圆盘内均匀分布，1 - U ∈ (0, 1] 保证 d > 0
        d = env.cell_radius * np.sqrt(1.0 - rng.random(size))
        h_sq, alpha_sq, g_sq = draw_channel(env, rng, size)
        return cls(file_index, sizes, gaps, beta_s, beta_r, cell, d, h_sq, alpha_sq, g_sq)

    def stage1(self, i: int) -> Stage1Obs:
        request = Request(int(self.file_index[i]), float(self.size[i]), float(self.gap[i]))
        return Stage1Obs(request, int(self.beta_s[i]), float(self.h_sq[i]), int(self.cell[i]), float(self.d[i]))

    def stage2(self, i: int) -> Stage2Obs:
        return Stage2Obs(int(self.beta_r[i]), float(self.alpha_sq[i]), float(self.g_sq[i]))


def _stage1_codes(users: _UserBlock, policy: PolicyKind, eta_star: float, env: NetworkConfig,
                  method: RelayCdfMethod, nodes: int, direct_rate: np.ndarray) -> np.ndarray:
    if policy is PolicyKind.HSTJPS:
        ts_prob = np.asarray(env.cache.ts_probs)[users.file_index - 1]
        return stage1_decisions(
            users.size, users.beta_s, users.h_sq, users.d, ts_prob, eta_star, env, method=method, nodes=nodes,
        )
    if policy is PolicyKind.NO_WAIT_DIRECT:
        return np.where(direct_rate > 0, Decision.DIRECT.value, Decision.WAIT.value)
    return np.full(len(users.size), Decision.PROBE.value)


def run_frame(
    policy: PolicyKind,
    eta_star: float,
    env: NetworkConfig,
    rng: np.random.Generator,
    *,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
    max_users: int = DEFAULT_MAX_USERS,
    clock: SimClock | None = None,
) -> FrameOutcome:
    """
    仿真一个帧，直到某个用户被调度

    Args:
        policy: 调度策略
        eta_star: 阈值 η*，基线策略忽略
        env: 场景
        rng: 本帧随机源
        method: 中继 CDF 求值方式
        nodes: 中继积分节点数
        max_users: 单帧用户数上限
        clock: 外部仿真时钟
    """
    t = env.timing
    path = ObservationPath()
    waiting = probing = 0.0
    users_seen = probes = 0

    while True:
        users = _UserBlock.draw(env, rng, USER_BLOCK)
        direct_rate = rate_from_snr(env.gbar_s * users.h_sq, env.rates)
        codes = _stage1_codes(users, policy, eta_star, env, method, nodes, direct_rate)

        mode = None
        stop = len(codes)
        probed = codes == Decision.PROBE.value
        for i in np.flatnonzero(codes != Decision.WAIT.value):
            if codes[i] == Decision.DIRECT.value:
                mode, stop = Decision.DIRECT, i + 1
                break
            obs1, obs2 = users.stage1(i), users.stage2(i)
            rate_cache, rate_relay = probe_rates(obs2, obs1.h_sq, obs1.d, env)
            if policy is PolicyKind.HSTJPS:
                decision = stage2_rule(obs2.beta_r, rate_cache, rate_relay, obs1.request.size, eta_star, t.t1)
            else:
                decision = baseline_decide(policy, obs1, obs2, env)
            if decision.delivers:
                mode, stop = decision, i + 1
                if decision is not Decision.DIRECT:
                    cached = decision is Decision.ASSISTED_CACHE
                    assisted = assisted_latency(obs1.request.size, int(cached), rate_cache, rate_relay, t)
                break

        if users_seen + stop > max_users:
            raise SimulationError(users_seen + stop, max_users)

        gaps = float(np.sum(users.gap[:stop]))
        block_probes = int(np.count_nonzero(probed[:stop]))
        waiting += gaps
        probing += block_probes * t.tau_p
        users_seen += stop
        probes += block_probes
        path.extend(probed[:stop])
        if clock is not None:
            clock.advance(gaps)
            clock.advance(block_probes * t.tau_p)

        if mode is not None:
            i = stop - 1
            b = float(users.size[i])
            if mode is Decision.DIRECT:
                latency = direct_latency(b, float(direct_rate[i]), int(users.beta_s[i]), t)
            else:
                latency = assisted
            path.close()
            if clock is not None:
                clock.advance(latency)
            return FrameOutcome(
                reward=b,
                time=waiting + probing + latency,
                users_seen=users_seen,
                probes=probes,
                mode=mode,
                waiting_time=waiting,
                probing_time=probing,
                delivery_time=latency,
                path=path,
            )


def simulate_frames(
    policy: PolicyKind,
    eta_star: float,
    env: NetworkConfig,
    seed: int,
    start: int,
    stop: int,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
    max_users: int = DEFAULT_MAX_USERS,
) -> FrameTotals:
    """仿真 [start, stop) 编号的帧"""
    count = stop - start
    rewards, times = np.empty(count), np.empty(count)
    users, probes = np.empty(count, dtype=np.int64), np.empty(count, dtype=np.int64)
    clock = SimClock()
    for k, frame in enumerate(range(start, stop)):
        outcome = run_frame(
            policy, eta_star, env, frame_rng(seed, frame), method=method, nodes=nodes, max_users=max_users, clock=clock,
        )
        rewards[k], times[k] = outcome.reward, outcome.time
        users[k], probes[k] = outcome.users_seen, outcome.probes
    return FrameTotals(rewards, times, users, probes, clock.now)


def ratio_estimate(rewards: ArrayLike, times: ArrayLike, seed: int = 0, batches: int = 30) -> ThroughputEstimate:
    """
    比值估计 Σr / Σt 与批均值置信区间

    残差 D_j = r_j - θ·t_j 的批均值给出比值估计的标准误差
    """
    rewards = np.asarray(rewards, dtype=float)
    times = np.asarray(times, dtype=float)
    frames = len(rewards)
    if frames < 1:
        raise DomainError("ratio_estimate.frames", frames)

    theta = math.fsum(rewards) / math.fsum(times)
    count = min(batches, frames)
    if count < 2:
        return ThroughputEstimate(throughput=theta, ci95_halfwidth=float("nan"), frames=frames, seed=seed, batches=count)

    r_batches = np.array([chunk.sum() for chunk in np.array_split(rewards, count)])
    t_batches = np.array([chunk.sum() for chunk in np.array_split(times, count)])
    residual = r_batches - theta * t_batches
    std_error = float(np.sqrt(np.var(residual, ddof=1) / count) / np.mean(t_batches))
    half = float(stats.t.ppf(0.975, count - 1) * std_error)
    return ThroughputEstimate(
        throughput=theta, ci95_halfwidth=half, frames=frames, seed=seed, std_error=std_error, batches=count,
    )


def _chunks(frames: int, workers: int) -> list[tuple[int, int]]:
    bounds = np.linspace(0, frames, min(workers, frames) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]


def run_experiment(
    policy: PolicyKind,
    env: NetworkConfig,
    frames: int,
    seed: int,
    *,
    eta_star: float | None = None,
    quad: QuadratureSpec | None = None,
    reading: LatencyReading = LatencyReading.DELIVERY,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    batches: int = 30,
    workers: int = 1,
    max_users: int = DEFAULT_MAX_USERS,
) -> ThroughputEstimate:
    """
    独立帧上的长期吞吐量估计

    Args:
        policy: 调度策略
        env: 场景
        frames: 帧数
        seed: 随机种子
        eta_star: 最优策略阈值，缺省时先离线求解
        quad: 求解 η* 的积分参数
        reading: 求解 η* 的直传时延取法
        method: 中继 CDF 求值方式
        batches: 批均值的批数
        workers: 进程数，结果与串行执行一致
        max_users: 单帧用户数上限
    """
    if frames < 1:
        raise DomainError("run_experiment.frames", frames)
    quad = quad or QuadratureSpec()
    if policy is PolicyKind.HSTJPS and eta_star is None:
        from .solver import solve_eta_star

        eta_star = solve_eta_star(env, quad, reading=reading, method=method).eta_star
    eta = 0.0 if eta_star is None else eta_star

    args = (policy, eta, env, seed)
    tail = (method, quad.relay_nodes, max_users)
    chunks = _chunks(frames, workers)
    if len(chunks) == 1:
        parts = [simulate_frames(*args, 0, frames, *tail)]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(simulate_frames, *args, a, b, *tail) for a, b in chunks]
            parts = [f.result() for f in futures]

    rewards = np.concatenate([p.rewards for p in parts])
    times = np.concatenate([p.times for p in parts])
    users = int(sum(int(p.users.sum()) for p in parts))
    probes = int(sum(int(p.probes.sum()) for p in parts))
    clock = math.fsum(p.clock for p in parts)
    if not math.isclose(clock, math.fsum(times), rel_tol=1e-9):
        logger.warning(f"[HSTJPS] 仿真时钟 {clock:.9g} s 与帧时长之和 {math.fsum(times):.9g} s 不一致")

    estimate = ratio_estimate(rewards, times, seed, batches)
    estimate = ThroughputEstimate(
        throughput=estimate.throughput,
        ci95_halfwidth=estimate.ci95_halfwidth,
        frames=frames,
        seed=seed,
        std_error=estimate.std_error,
        users=users,
        probes=probes,
        batches=estimate.batches,
    )
    logger.info(
        f"[HSTJPS] {policy.value}: {frames} 帧, 吞吐量 {format_rate(estimate.throughput)} "
        f"± {format_rate(estimate.ci95_halfwidth)}, 仿真时长 {format_duration(clock)}"
    )
    return estimate
