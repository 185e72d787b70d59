"""
Threshold scheduling policy and no-wait baselines

最优策略（两阶段阈值规则）：
+ 第一阶段：直传奖励 B - η*T_{k,1} ≥ max{Ω, 0} 时直传，max{B - η*T_{k,1}, Ω} < 0 时跳过，否则探测 TS
+ 第二阶段：TS 缓存命中且 R_{r,1} ≥ η* 时缓存传输；未命中且 R_{r,2} ≥ η*B/(B - η*T_1) 时中继传输；否则跳过
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike

from .catalog import Request
from .channel import ChannelDraw, combined_relay_snr
from .errors import DomainError
from .models import NetworkConfig, RelayCdfMethod
from .rates import assisted_latency, direct_latency, rate_from_snr
from .reward import omega_reward, omega_upper_bound


class Decision(Enum):
    """
    调度动作
    + DIRECT           : 卫星直传
    + WAIT             : 跳过当前用户，等待下一次到达
    + PROBE            : 探测用户所在小区的 TS
    + ASSISTED_CACHE   : TS 从本地缓存传输
    + ASSISTED_RELAY   : TS 中继卫星信号
    + WAIT_AFTER_PROBE : 探测后仍跳过
    """
    DIRECT = 1
    WAIT = 2
    PROBE = 3
    ASSISTED_CACHE = 4
    ASSISTED_RELAY = 5
    WAIT_AFTER_PROBE = 6

    @property
    def delivers(self) -> bool:
        return self in (Decision.DIRECT, Decision.ASSISTED_CACHE, Decision.ASSISTED_RELAY)


class PolicyKind(Enum):
    """
    调度策略
    + HSTJPS              : 两阶段最优阈值策略
    + NO_WAIT_DIRECT      : 只用卫星直传，不等待
    + NO_WAIT_ASSISTED    : 总是探测 TS，选时延最小的可用方式
    + NO_WAIT_NO_TS_CACHE : 同上但忽略 TS 缓存
    """
    HSTJPS = "hstjps"
    NO_WAIT_DIRECT = "no_wait_direct"
    NO_WAIT_ASSISTED = "no_wait_assisted"
    NO_WAIT_NO_TS_CACHE = "no_wait_no_ts_cache"


@dataclass(frozen=True, slots=True)
class Stage1Obs:
    """卫星观测 X_k"""

    request: Request
    beta_s: int
    h_sq: float
    cell: int
    """所在小区 ω_k，1..L"""

    d: float
    """到小区 TS 的距离 d_k (m)"""


@dataclass(frozen=True, slots=True)
class Stage2Obs:
    """TS 探测结果 Y_k"""

    beta_r: int
    alpha_sq: float
    g_sq: float


@dataclass(slots=True)
class ObservationPath:
    """
    观测路径：每个到达用户贡献 (a_{2k-1}, a_{2k})，a_{2k-1} 恒为 1，a_{2k} 表示是否探测
    """

    probed: list[bool] = field(default_factory=list)
    closed: bool = False

    def record(self, probed: bool):
        if self.closed:
            raise DomainError("ObservationPath.record", "路径已结束")
        self.probed.append(bool(probed))

    def extend(self, flags: ArrayLike):
        if self.closed:
            raise DomainError("ObservationPath.extend", "路径已结束")
        self.probed.extend(bool(x) for x in np.asarray(flags).ravel())

    def close(self):
        self.closed = True

    @property
    def terminal_index(self) -> int:
        """终止时刻 N（从 1 开始）"""
        return len(self.probed)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(bit for p in self.probed for bit in (1, int(p)))


def stage1_rule(immediate: float, omega: float) -> Decision:
    """第一阶段比较：Λ_1 = 直传奖励，Λ_2 = Ω，Λ_3 = 0"""
    if immediate >= max(omega, 0.0):
        return Decision.DIRECT
    if max(immediate, omega) < 0:
        return Decision.WAIT
    return Decision.PROBE


def stage2_rule(beta_r: int, rate_cache: float, rate_relay: float, b: float, eta: float, t1: float) -> Decision:
    """第二阶段比较：Γ_1 = B - η*T_{k,2}，Γ_2 = 0"""
    if beta_r:
        return Decision.ASSISTED_CACHE if rate_cache > 0 and rate_cache >= eta else Decision.WAIT_AFTER_PROBE
    budget = b - eta * t1
    if budget > 0 and rate_relay > 0 and rate_relay >= eta * b / budget:
        return Decision.ASSISTED_RELAY
    return Decision.WAIT_AFTER_PROBE


def min_latency_rule(t_direct: float | None, t_assisted: float | None, beta_r: int) -> Decision:
    """无等待基线：在可用方式中选时延最小者，相等时选直传，全部不可用时跳过"""
    assisted = Decision.ASSISTED_CACHE if beta_r else Decision.ASSISTED_RELAY
    if t_direct is None and t_assisted is None:
        return Decision.WAIT_AFTER_PROBE
    if t_assisted is None:
        return Decision.DIRECT
    if t_direct is None:
        return assisted
    return Decision.DIRECT if t_direct <= t_assisted else assisted


def immediate_rewards(b: ArrayLike, beta_s: ArrayLike, direct_rate: ArrayLike, eta: float, env: NetworkConfig) -> np.ndarray:
    """B - η*T_{k,1}，直传不可用处为 -inf"""
    b = np.asarray(b, dtype=float)
    rate = np.asarray(direct_rate, dtype=float)
    t = env.timing
    overhead = t.t1 + np.where(np.asarray(beta_s) == 1, 0.0, t.t2)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = b - eta * (b / rate + overhead)
    return np.where(rate > 0, value, -np.inf)


def immediate_reward(obs: Stage1Obs, eta: float, env: NetworkConfig) -> float:
    rate = rate_from_snr(env.gbar_s * obs.h_sq, env.rates)
    return float(immediate_rewards(obs.request.size, obs.beta_s, rate, eta, env))


def stage1_decisions(
    b: ArrayLike,
    beta_s: ArrayLike,
    h_sq: ArrayLike,
    d: ArrayLike,
    ts_prob: ArrayLike,
    eta: float,
    env: NetworkConfig,
    *,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
) -> np.ndarray:
    """
    批量第一阶段判决，返回 Decision 取值数组

    先用 Ω 的闭式上界筛选，只有上界无法判定的用户才计算精确 Ω
    """
    b, beta_s, h_sq, d, ts_prob = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (b, beta_s, h_sq, d, ts_prob)))
    immediate = immediate_rewards(b, beta_s, rate_from_snr(env.gbar_s * h_sq, env.rates), eta, env)
    bound = np.atleast_1d(omega_upper_bound(b, h_sq, d, eta, env, ts_prob))

    codes = np.full(b.shape, Decision.PROBE.value)
    direct = immediate >= np.maximum(bound, 0.0)
    wait = ~direct & (np.maximum(immediate, bound) < 0)
    codes[direct] = Decision.DIRECT.value
    codes[wait] = Decision.WAIT.value

    unsure = ~direct & ~wait
    if np.any(unsure):
        omega = np.atleast_1d(omega_reward(
            b[unsure], beta_s[unsure], h_sq[unsure], d[unsure], eta, env,
            ts_prob=ts_prob[unsure], method=method, nodes=nodes,
        ))
        imm = immediate[unsure]
        exact = np.where(imm >= np.maximum(omega, 0.0), Decision.DIRECT.value,
                         np.where(np.maximum(imm, omega) < 0, Decision.WAIT.value, Decision.PROBE.value))
        codes[unsure] = exact
    return codes


def decide_stage1(
    obs: Stage1Obs,
    eta_star: float,
    env: NetworkConfig,
    *,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
) -> Decision:
    """
    最优策略第一阶段判决

    Args:
        obs: 卫星观测
        eta_star: 最大吞吐量 η*
        env: 场景
        method: 中继 CDF 求值方式
        nodes: 中继积分节点数
    """
    ts_prob = env.cache.ts_probs[obs.request.file_index - 1]
    codes = stage1_decisions(
        obs.request.size, obs.beta_s, obs.h_sq, obs.d, ts_prob, eta_star, env, method=method, nodes=nodes,
    )
    return Decision(int(codes[0]))


def probe_rates(obs: Stage2Obs, h_sq: float, d: float, env: NetworkConfig) -> tuple[float, float]:
    """探测后可得的 (R_{r,1}, R_{r,2})"""
    gbar_u = env.gbar_u(d)
    rate_cache = rate_from_snr(gbar_u * obs.g_sq, env.rates)
    gamma_2 = combined_relay_snr(ChannelDraw(h_sq, obs.alpha_sq, obs.g_sq), env.gbar_s, env.gbar_t, gbar_u)
    return rate_cache, rate_from_snr(gamma_2, env.rates)


def decide_stage2(obs: Stage2Obs, request: Request, d: float, eta_star: float, env: NetworkConfig, *, h_sq: float) -> Decision:
    """最优策略第二阶段判决，h_sq 用于合成中继 SNR"""
    rate_cache, rate_relay = probe_rates(obs, h_sq, d, env)
    return stage2_rule(obs.beta_r, rate_cache, rate_relay, request.size, eta_star, env.timing.t1)


def baseline_decide(kind: PolicyKind, obs1: Stage1Obs, obs2: Stage2Obs | None, env: NetworkConfig) -> Decision:
    """
    无等待基线的判决

    NO_WAIT_DIRECT 直传不可用时跳过；两种探测基线在探测结果上按最小时延选择，
    NO_WAIT_NO_TS_CACHE 把 β_r 视为 0
    """
    t = env.timing
    b = obs1.request.size
    direct_rate = rate_from_snr(env.gbar_s * obs1.h_sq, env.rates)
    t_direct = direct_latency(b, direct_rate, obs1.beta_s, t)

    if kind is PolicyKind.NO_WAIT_DIRECT:
        return Decision.DIRECT if t_direct is not None else Decision.WAIT
    if kind is PolicyKind.HSTJPS:
        raise DomainError("baseline_decide.kind", kind.value)
    if obs2 is None:
        raise DomainError("baseline_decide.obs2", None)

    beta_r = obs2.beta_r if kind is PolicyKind.NO_WAIT_ASSISTED else 0
    rate_cache, rate_relay = probe_rates(obs2, obs1.h_sq, obs1.d, env)
    t_assisted = assisted_latency(b, beta_r, rate_cache, rate_relay, t)
    return min_latency_rule(t_direct, t_assisted, beta_r)
