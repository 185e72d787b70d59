"""
Probe-expected reward Ω and the Bellman right-hand side Λ(η)

价格变换后，最优策略只需要在 Z* = 0 处计算 Ω；Λ(η) 对用户位置 r 与直连 SNR 做二重积分。
积分节点、直连速率和各速率档位的 CDF 差分只与场景有关，预先算好后每个 η 只需一次向量化归约。
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike

from ..log import logger
from .channel import RelayIntegrator, cdf_snr_terrestrial, pdf_snr_direct, relay_cdf_from_gap, snr_quantile_direct
from .errors import DomainError, NumericFailure
from .models import LatencyReading, NetworkConfig, QuadratureSpec, RelayCdfMethod
from .rates import rate_from_snr

# 每个 SNR 分段至少的节点数
MIN_PANEL_NODES = 4


@dataclass(frozen=True, slots=True)
class PricedReward:
    """价格变换后的效用 Z = V - η·T"""

    value: float
    """奖励 V (bit)"""

    time_cost: float
    """时间开销 T (s)"""

    priced: float
    """V - η·T (bit)"""


@dataclass(frozen=True, slots=True)
class DecisionProbabilities:
    """单个到达用户在阈值规则下各动作的概率"""

    direct: float
    probe: float
    wait: float


def priced(value: float, time_cost: float, eta: float) -> PricedReward:
    """构造价格变换后的效用"""
    return PricedReward(value=value, time_cost=time_cost, priced=value - eta * time_cost)


def _bracket_probs(cdf_at_thresholds: np.ndarray) -> np.ndarray:
    """F(γ_{m+1}) - F(γ_m)，γ_{M+1} = ∞"""
    ones = np.ones(cdf_at_thresholds.shape[:-1] + (1,))
    return np.diff(np.concatenate([cdf_at_thresholds, ones], axis=-1), axis=-1)


def _mode_weights(b: ArrayLike, eta: float, env: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """
    各速率档位的价格化奖励（负值截为 0）

    缓存命中：max(b - η·b/R_m, 0)，即 R_m ≥ η 的档位
    中继转发：max(b - η·(T_1 + b/R_m), 0)，即 R_m ≥ η·b/(b - η·T_1) 的档位，η·T_1 ≥ b 时全为 0
    """
    rates = np.asarray(env.rates.rates)
    b = np.asarray(b, dtype=float)[..., None]
    cache_hit = np.maximum(b - eta * b / rates, 0.0)
    relay = np.maximum(b - eta * (env.timing.t1 + b / rates), 0.0)
    return cache_hit, relay


def _mean_ts_prob(env: NetworkConfig) -> float:
    return math.fsum(p * q for p, q in zip(env.catalog.popularity, env.cache.ts_probs))


def omega_reward(
    b: ArrayLike,
    beta_s: ArrayLike,
    h_sq: ArrayLike,
    d: ArrayLike,
    eta: float,
    env: NetworkConfig,
    *,
    ts_prob: ArrayLike | None = None,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
):
    """
    探测 TS 后的期望价格化奖励 Ω（Z* = 0）

    Ω = p^t·Σ_m ΔF_{γ₁}·max(b - ηb/R_m, 0) + (1 - p^t)·Σ_m ΔF_{γ₂}·max(b - η(T_1 + b/R_m), 0) - η·τ_p

    β_s 不进入 Ω（TS 辅助时延不含 T_2），保留以对应卫星观测。参数可为等长数组，逐用户计算。

    Args:
        b: 文件大小 (bit)
        beta_s: 卫星缓存状态
        h_sq: 直连信道功率增益
        d: 用户到 TS 的距离 (m)，取值 (0, R]
        eta: 价格 η (bit/s)
        env: 场景
        ts_prob: 该文件的 TS 缓存概率 p_i^t，缺省为按流行度加权的平均值
        method: 中继 CDF 求值方式
        nodes: 中继积分节点数
    """
    if eta < 0:
        raise DomainError("omega_reward.eta", eta)
    if ts_prob is None:
        ts_prob = _mean_ts_prob(env)
    b, _, h_sq, d, p_t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, beta_s, h_sq, d, ts_prob)))
    if np.any(d <= 0):
        raise DomainError("omega_reward.d", float(np.min(d)))

    thresholds = np.asarray(env.rates.thresholds)
    gbar_u = env.gbar_u(d)[..., None]
    hit = _bracket_probs(cdf_snr_terrestrial(thresholds, gbar_u))
    gap = thresholds - env.gbar_s * h_sq[..., None]
    miss = _bracket_probs(relay_cdf_from_gap(gap, env.gbar_t, gbar_u, env.ts_fading, method, nodes))

    w_hit, w_relay = _mode_weights(b, eta, env)
    omega = np.asarray(
        p_t * np.sum(hit * w_hit, axis=-1) + (1 - p_t) * np.sum(miss * w_relay, axis=-1) - eta * env.timing.tau_p
    )
    if not np.all(np.isfinite(omega)):
        raise NumericFailure("omega_reward", float(omega[~np.isfinite(omega)][0]))
    return float(omega) if omega.ndim == 0 else omega


def omega_upper_bound(
    b: ArrayLike,
    h_sq: ArrayLike,
    d: ArrayLike,
    eta: float,
    env: NetworkConfig,
    ts_prob: ArrayLike | None = None,
):
    """
    Ω 的闭式上界

    中继项 XY/(X+Y) ≤ Y，以 ḡ_s|h|² + ḡ_u|g|² 代替 γ₂ 得到随机意义上更大的 SNR，
    而档位奖励随速率单调不减，因此上界成立且只需指数分布 CDF
    """
    if ts_prob is None:
        ts_prob = _mean_ts_prob(env)
    b, h_sq, d, p_t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, h_sq, d, ts_prob)))

    thresholds = np.asarray(env.rates.thresholds)
    gbar_u = env.gbar_u(d)[..., None]
    hit = _bracket_probs(cdf_snr_terrestrial(thresholds, gbar_u))
    gap = thresholds - env.gbar_s * h_sq[..., None]
    miss = _bracket_probs(cdf_snr_terrestrial(gap, gbar_u))

    w_hit, w_relay = _mode_weights(b, eta, env)
    bound = np.asarray(
        p_t * np.sum(hit * w_hit, axis=-1) + (1 - p_t) * np.sum(miss * w_relay, axis=-1) - eta * env.timing.tau_p
    )
    return float(bound) if bound.ndim == 0 else bound


def _gauss_legendre(lo: float, hi: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = np.polynomial.legendre.leggauss(nodes)
    half = (hi - lo) / 2
    return lo + half * (u + 1), half * w


class RewardGrid:
    """
    Λ(η) 的积分网格

    径向节点 r ∈ [0, R]（密度 2r/R²），直连 SNR 节点按速率门限分段并截断在给定分位点。
    缓存命中与中继两种 CDF 差分表与 η 无关，构建一次后对任意 η 复用。
    """

    def __init__(self, env: NetworkConfig, quad: QuadratureSpec, method: RelayCdfMethod):
        self.env = env
        self.quad = quad
        self.method = method

        radius = env.cell_radius
        self.r, w = _gauss_legendre(0.0, radius, quad.radial_nodes)
        self.r_weights = w * 2 * self.r / radius ** 2

        gbar_s = env.gbar_s
        x_max = snr_quantile_direct(quad.snr_truncation_quantile, gbar_s, env.sat_fading)
        edges = [0.0, *(g for g in env.rates.thresholds if g < x_max), x_max]
        xs, ws = [], []
        for lo, hi in zip(edges, edges[1:]):
            count = max(MIN_PANEL_NODES, round(quad.snr_nodes * (hi - lo) / x_max))
            x, wx = _gauss_legendre(lo, hi, count)
            xs.append(x)
            ws.append(wx)
        self.snr = np.concatenate(xs)
        self.snr_weights = np.concatenate(ws) * pdf_snr_direct(self.snr, gbar_s, env.sat_fading)
        self.h_sq = self.snr / gbar_s
        self.direct_rate = rate_from_snr(self.snr, env.rates)

        thresholds = np.asarray(env.rates.thresholds)
        gbar_u = env.gbar_u(self.r)
        self.hit = _bracket_probs(cdf_snr_terrestrial(thresholds, gbar_u[:, None]))

        gap = thresholds[None, :] - self.snr[:, None]
        integrator = RelayIntegrator(gap, env.gbar_t, env.ts_fading, quad.relay_nodes) if method is RelayCdfMethod.INTEGRAL else None
        self.miss = np.empty((len(self.r), len(self.snr), len(thresholds)))
        for j, g in enumerate(gbar_u):
            if integrator is not None:
                cdf = np.where(gap > 0, integrator.cdf(g), 0.0)
            else:
                cdf = relay_cdf_from_gap(gap, env.gbar_t, g, env.ts_fading, method)
            self.miss[j] = _bracket_probs(cdf)

        logger.debug(
            f"[HSTJPS] 积分网格: {len(self.r)} 个径向节点, {len(self.snr)} 个 SNR 节点, "
            f"截断 SNR {x_max:.4g}, 覆盖概率 {self.snr_weights.sum():.8f}"
        )

    def branches(self, eta: float, reading: LatencyReading):
        """
        逐 (文件, 卫星缓存状态) 产出 (权重, 直传奖励, Ω)

        直传奖励形状为 (Nh,)，η > 0 时中断处为 -inf；Ω 形状为 (Nr, Nh)
        """
        env = self.env
        t = env.timing
        extra = 2 if reading is LatencyReading.STACKED else 1
        with np.errstate(divide="ignore"):
            inv_rate = np.where(self.direct_rate > 0, 1.0 / self.direct_rate, np.inf)

        for b, p, p_s, p_t in zip(env.catalog.sizes, env.catalog.popularity, env.cache.sat_probs, env.cache.ts_probs):
            w_hit, w_relay = _mode_weights(b, eta, env)
            omega = p_t * (self.hit @ w_hit)[:, None] + (1 - p_t) * (self.miss @ w_relay) - eta * t.tau_p
            # η = 0 时时间不计价，直传中断项按 0·∞ = 0 取 b
            outage = -np.inf if eta > 0 else b
            for beta_s, weight in ((1, p * p_s), (0, p * (1 - p_s))):
                if weight == 0:
                    continue
                overhead = extra * (t.t1 + (0.0 if beta_s else t.t2))
                with np.errstate(invalid="ignore"):
                    immediate = np.where(np.isfinite(inv_rate), b - eta * (b * inv_rate + overhead), outage)
                yield weight, immediate, omega

    def integrate(self, values: np.ndarray) -> float:
        """对 (Nr, Nh) 的被积值做二重积分"""
        return float(self.r_weights @ values @ self.snr_weights)


@lru_cache(maxsize=32)
def reward_grid(env: NetworkConfig, quad: QuadratureSpec, method: RelayCdfMethod = RelayCdfMethod.INTEGRAL) -> RewardGrid:
    """按场景缓存的积分网格"""
    return RewardGrid(env, quad, method)


def lambda_of_eta(
    eta: float,
    env: NetworkConfig,
    quad: QuadratureSpec | None = None,
    reading: LatencyReading = LatencyReading.DELIVERY,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
) -> float:
    """
    Bellman 方程右端 Λ(η)

    Σ_i p_i Σ_β π_iβ ∫∫ max{b_i - η·T_{k,1}, 0, Ω} · (2r/R²) f(h) dr dh

    Args:
        eta: 价格 η (bit/s)
        env: 场景
        quad: 积分参数
        reading: 直传时延取法
        method: 中继 CDF 求值方式
    """
    if eta < 0:
        raise DomainError("lambda_of_eta.eta", eta)
    grid = reward_grid(env, quad or QuadratureSpec(), method)

    total = 0.0
    for weight, immediate, omega in grid.branches(eta, reading):
        total += weight * grid.integrate(np.maximum(np.maximum(immediate[None, :], omega), 0.0))

    if not math.isfinite(total):
        raise NumericFailure("lambda_of_eta", total)
    return total


def decision_probabilities(
    eta: float,
    env: NetworkConfig,
    quad: QuadratureSpec | None = None,
    reading: LatencyReading = LatencyReading.DELIVERY,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
) -> DecisionProbabilities:
    """
    价格 η 下单个到达用户被直传、探测、跳过的概率

    与 Λ(η) 使用同一积分网格，判决规则同第一阶段阈值规则
    """
    grid = reward_grid(env, quad or QuadratureSpec(), method)

    direct = probe = wait = 0.0
    for weight, immediate, omega in grid.branches(eta, reading):
        imm = np.broadcast_to(immediate[None, :], omega.shape)
        is_direct = imm >= np.maximum(omega, 0.0)
        is_wait = ~is_direct & (np.maximum(imm, omega) < 0)
        is_probe = ~is_direct & ~is_wait
        direct += weight * grid.integrate(is_direct.astype(float))
        wait += weight * grid.integrate(is_wait.astype(float))
        probe += weight * grid.integrate(is_probe.astype(float))

    return DecisionProbabilities(direct=direct, probe=probe, wait=wait)
