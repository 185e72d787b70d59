"""
Link budgets, fading samplers and SNR distributions

卫星链路采用阴影莱斯 (LMS) 衰落，地面 TS-用户链路为单位均值瑞利功率增益。
仿真器与奖励计算共用这里的分布函数。
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln, xlogy

from ..log import logger
from ..utils.specialfn import DEFAULT_SERIES, SeriesControl, hyp_2f2, kummer_1f1
from .errors import DomainError, NumericFailure
from .models import FadingParams, LinkBudget, NetworkConfig, RelayCdfMethod

# 中继积分的尾部截断分位点
RELAY_TAIL_QUANTILE = 1 - 1e-10


@dataclass(frozen=True, slots=True)
class ChannelDraw:
    """一次用户到达的信道功率增益"""

    h_sq: float
    """Sat-User |h_k|²"""

    alpha_sq: float
    """Sat-TS |α|²"""

    g_sq: float
    """TS-User |g|²"""


@dataclass(frozen=True, slots=True)
class CdfCheck:
    """解析 CDF 与蒙特卡洛经验 CDF 的比较结果"""

    sup_gap: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.sup_gap <= self.tolerance


def avg_snr(link: LinkBudget, d: float) -> float:
    """
    平均 SNR（线性）= P·G_tx·G_rx·PL(d) / N

    Args:
        link: 链路预算
        d: 距离 (m)，必须为正
    """
    if not d > 0:
        raise DomainError("avg_snr.d", d)
    return link.mean_snr(d)


def sample_shadowed_rician(params: FadingParams, rng: np.random.Generator, size: int | None = None):
    """
    阴影莱斯功率增益采样

    视距功率服从 Gamma(m, Ω/m)，在其条件下叠加功率为 2b 的复高斯散射分量
    """
    los = rng.gamma(params.m, params.omega / params.m, size) if params.omega > 0 else np.zeros(size or ())
    sigma = math.sqrt(params.b)
    re = np.sqrt(los) + sigma * rng.standard_normal(size)
    im = sigma * rng.standard_normal(size)
    power = re * re + im * im
    return float(power) if size is None else power


def _mixture_constants(params: FadingParams) -> tuple[float, float]:
    """(α, δ)：α = (2bm/(2bm+Ω))^m，δ = Ω/(2bm+Ω)"""
    two_bm = 2 * params.b * params.m
    return (two_bm / (two_bm + params.omega)) ** params.m, params.omega / (two_bm + params.omega)


@lru_cache(maxsize=64)
def _mixture_weights(params: FadingParams, ctl: SeriesControl) -> np.ndarray:
    """
    负二项混合权重 c_k = α·(m)_k δ^k / k!

    γ/(2bḡ) 是以 c_k 为权重、形状 k+1 的 Gamma 分布混合，截断到剩余质量不超过 rel_tol
    """
    alpha, delta = _mixture_constants(params)
    coef = alpha
    weights = [coef]
    mass = coef
    for k in range(1, ctl.max_terms):
        if 1.0 - mass <= ctl.rel_tol:
            break
        coef *= (params.m + k - 1) * delta / k
        mass += coef
        weights.append(coef)
    else:
        raise NumericFailure("shadowed_rician_mixture", mass, ctl.max_terms)
    return np.asarray(weights)


def pdf_snr_direct(x: ArrayLike, gbar: float, params: FadingParams, ctl: SeriesControl = DEFAULT_SERIES):
    """
    γ = ḡ·|h|² 的概率密度

    等价于 α / (2bḡ) · exp(-x / (2bḡ)) · 1F1(m; 1; δx / (2bḡ))，
    按 Gamma 混合在对数域逐项求值，尾部不会溢出；截断误差不超过 rel_tol 乘以峰值密度
    """
    scale = 2 * params.b * gbar
    x_arr = np.asarray(x, dtype=float)
    y = np.clip(x_arr, 0.0, None) / scale

    dens = np.zeros_like(y)
    for k, coef in enumerate(_mixture_weights(params, ctl)):
        dens = dens + coef * np.exp(xlogy(k, y) - y - gammaln(k + 1.0))
    dens = np.where(x_arr < 0, 0.0, dens / scale)
    return float(dens) if dens.ndim == 0 else dens


def cdf_snr_direct(x: ArrayLike, gbar: float, params: FadingParams, ctl: SeriesControl = DEFAULT_SERIES):
    """
    γ = ḡ·|h|² 的 CDF

    负二项混合形式 α·Σ_k (m)_k δ^k / k! · P(k+1, x/(2bḡ))，P 为正则化下不完全 Gamma 函数
    """
    x_arr = np.asarray(x, dtype=float)
    y = np.clip(x_arr, 0.0, None) / (2 * params.b * gbar)

    total = np.zeros_like(y)
    for k, coef in enumerate(_mixture_weights(params, ctl)):
        total = total + coef * gammainc(k + 1.0, y)

    total = np.clip(total, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


@lru_cache(maxsize=256)
def _quantile(q: float, gbar: float, m: float, b: float, omega: float) -> float:
    params = FadingParams(m=m, b=b, omega=omega)
    hi = gbar * params.mean_power() * 4
    while cdf_snr_direct(hi, gbar, params) < q:
        hi *= 2
        if hi > 1e6 * gbar * params.mean_power():
            raise NumericFailure("snr_quantile_direct", hi)
    return brentq(lambda x: cdf_snr_direct(x, gbar, params) - q, 0.0, hi, xtol=1e-12 * hi, rtol=1e-12)


def snr_quantile_direct(q: float, gbar: float, params: FadingParams) -> float:
    """γ = ḡ·|h|² 的 q 分位点"""
    if not 0 < q < 1:
        raise DomainError("snr_quantile_direct.q", q)
    return _quantile(float(q), float(gbar), params.m, params.b, params.omega)


def cdf_snr_terrestrial(x: ArrayLike, gbar_u: ArrayLike):
    """TS-用户 SNR（指数分布）的 CDF：1 - exp(-x / ḡ_u)"""
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cdf = -np.expm1(-np.clip(x_arr, 0.0, None) / np.asarray(gbar_u, dtype=float))
    cdf = np.nan_to_num(cdf, nan=0.0)
    return float(cdf) if np.ndim(cdf) == 0 else cdf


def combined_relay_snr(draw: ChannelDraw, gbar_s: float, gbar_t: float, gbar_u: float) -> float:
    """
    直连与两跳中继合并 SNR

    γ₂ = ḡ_s|h|² + X·Y / (X + Y)，X = ḡ_t|α|²，Y = ḡ_u|g|²，两跳均为 0 时中继项取 0
    """
    x = gbar_t * draw.alpha_sq
    y = gbar_u * draw.g_sq
    relay = x * y / (x + y) if x + y > 0 else 0.0
    return gbar_s * draw.h_sq + relay


@lru_cache(maxsize=8)
def _unit_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = np.polynomial.legendre.leggauss(nodes)
    return (u + 1) / 2, w / 2


class RelayIntegrator:
    """
    中继项 Z = XY/(X+Y) 的条件生存函数积分器

    P(Z > z) = ∫_z^∞ f_X(t)·exp(-z·t / ((t - z)·ḡ_u)) dt，X = ḡ_t|α|²。
    t = z + s，s = S·u² 把节点压向积分下限；被积函数中与 ḡ_u 无关的部分预先算好，
    同一组 z 可对多个 ḡ_u（多个用户距离）复用。
    """

    def __init__(self, z: ArrayLike, gbar_t: float, params: FadingParams, nodes: int = 96):
        self.z = np.clip(np.asarray(z, dtype=float), 0.0, None)
        t_max = snr_quantile_direct(RELAY_TAIL_QUANTILE, gbar_t, params)
        u, w = _unit_legendre(nodes)
        span = np.clip(t_max - self.z, 0.0, None)[..., None]
        self._s = span * u ** 2
        self._t = self.z[..., None] + self._s
        # z 超过截断点时积分区间为空，生存概率按 0 计
        inside = np.broadcast_to(span > 0, self._t.shape)
        dens = np.zeros_like(self._t)
        dens[inside] = pdf_snr_direct(self._t[inside], gbar_t, params)
        self._weights = dens * span * 2 * u * w

    def survival(self, gbar_u: ArrayLike) -> np.ndarray:
        """P(Z > z)，形状同 z；gbar_u 为标量或可与 z 广播的数组"""
        g = np.asarray(gbar_u, dtype=float)[..., None]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            expo = np.exp(-self.z[..., None] * self._t / (self._s * g))
        expo = np.nan_to_num(expo, nan=0.0)
        return np.clip(np.sum(self._weights * expo, axis=-1), 0.0, 1.0)

    def cdf(self, gbar_u: ArrayLike) -> np.ndarray:
        return 1.0 - self.survival(gbar_u)


def _relay_closed_form(z: np.ndarray, gbar_t: float, gbar_u: float, params: FadingParams) -> np.ndarray:
    m, b, omega = params.m, params.b, params.omega
    alpha = (2 * b * m / (2 * b * m + omega)) ** m
    arg = omega ** 2 * z / (2 * gbar_t * b * (2 * b * m + omega))
    first = omega * z * alpha / (2 * b * gbar_t) * kummer_1f1(m, 2.0, arg)
    second = omega ** 2 / (8 * b ** 2) * alpha * (z / gbar_t) ** 2 * hyp_2f2(2.0, m, 3.0, 1.0, arg)
    cdf = 1.0 - np.exp(-z / gbar_u) * (1.0 - first + second)
    return np.clip(cdf, 0.0, 1.0)


def relay_cdf_from_gap(
    z: ArrayLike,
    gbar_t: float,
    gbar_u: ArrayLike,
    params_t: FadingParams,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
) -> np.ndarray:
    """
    以 z = x - ḡ_s|h|² 表示的中继合并 SNR 条件 CDF，z ≤ 0 时为 0

    gbar_u 为标量或可与 z 广播的数组，便于一次计算一批用户
    """
    z = np.asarray(z, dtype=float)
    if method is RelayCdfMethod.INTEGRAL:
        cdf = RelayIntegrator(z, gbar_t, params_t, nodes).cdf(gbar_u)
    else:
        cdf = _relay_closed_form(np.clip(z, 0.0, None), gbar_t, np.asarray(gbar_u, dtype=float), params_t)
    return np.where(z > 0, cdf, 0.0)


def cdf_snr_relay(
    x: ArrayLike,
    gbar_s: float,
    gbar_t: float,
    gbar_u: float,
    h_sq: float,
    params_t: FadingParams,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    nodes: int = 96,
):
    """
    给定 |h_k|² = h_sq 与 TS-用户平均 SNR ḡ_u(d) 时中继合并 SNR γ₂ 的条件 CDF

    Args:
        x: SNR 取值（标量或数组）
        gbar_s: 卫星-用户平均 SNR
        gbar_t: 卫星-TS 平均 SNR
        gbar_u: TS-用户平均 SNR
        h_sq: 直连信道功率增益
        params_t: 卫星-TS 衰落参数
        method: 求值方式，默认精确积分
        nodes: 积分节点数
    """
    z = np.asarray(x, dtype=float) - gbar_s * h_sq
    cdf = relay_cdf_from_gap(z, gbar_t, gbar_u, params_t, method, nodes)
    return float(cdf) if cdf.ndim == 0 else cdf


def draw_channel(env: NetworkConfig, rng: np.random.Generator, size: int | None = None):
    """按固定顺序采样 (|h|², |α|², |g|²)"""
    h_sq = sample_shadowed_rician(env.sat_fading, rng, size)
    alpha_sq = sample_shadowed_rician(env.ts_fading, rng, size)
    g_sq = rng.exponential(1.0, size)
    return h_sq, alpha_sq, g_sq


def check_relay_cdf(
    h_sq: float,
    d: float,
    env: NetworkConfig,
    rng: np.random.Generator,
    samples: int = 1_000_000,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    tol: float = 0.02,
    points: int = 200,
) -> CdfCheck:
    """
    用蒙特卡洛经验 CDF 校验解析中继 CDF，差距超过 tol 时记录警告

    Args:
        h_sq: 直连信道功率增益
        d: 用户到 TS 的距离 (m)
        env: 场景
        rng: 随机源
        samples: 蒙特卡洛样本数
        method: 被校验的求值方式
        tol: sup 范数容差
        points: 比较网格点数
    """
    gbar_s, gbar_t, gbar_u = env.gbar_s, env.gbar_t, avg_snr(env.ts_user, d)
    x_sq = gbar_t * sample_shadowed_rician(env.ts_fading, rng, samples)
    y_sq = gbar_u * rng.exponential(1.0, samples)
    with np.errstate(invalid="ignore"):
        relay = np.where(x_sq + y_sq > 0, x_sq * y_sq / (x_sq + y_sq), 0.0)
    empirical = np.sort(gbar_s * h_sq + relay)

    grid = np.quantile(empirical, np.linspace(0.001, 0.999, points))
    ecdf = np.searchsorted(empirical, grid, side="right") / samples
    analytic = cdf_snr_relay(grid, gbar_s, gbar_t, gbar_u, h_sq, env.ts_fading, method)
    check = CdfCheck(sup_gap=float(np.max(np.abs(analytic - ecdf))), tolerance=tol, samples=samples)
    if not check.passed:
        logger.warning(
            f"[HSTJPS] 中继 CDF ({method.value}) 与蒙特卡洛不一致: "
            f"sup 差距 {check.sup_gap:.4f} > {tol} (h_sq={h_sq:.4g}, d={d:.1f} m)"
        )
    else:
        logger.debug(f"[HSTJPS] 中继 CDF ({method.value}) 校验通过: sup 差距 {check.sup_gap:.4f}")
    return check
