"""
Content catalog, Zipf popularity and probabilistic caching
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError, DomainError
from .models import CacheProfile, Catalog

# 缓存容量等式的相对容差
CAPACITY_RTOL = 1e-9


@dataclass(frozen=True, slots=True)
class Request:
    """一次用户请求"""

    file_index: int
    """请求文件编号（从 1 开始）"""

    size: float
    """文件大小 B_k (bit)"""

    arrival_gap: float
    """距上一次到达的时间间隔 τ_k (s)"""


@dataclass(frozen=True, slots=True)
class Violation:
    """一条违反的约束"""

    key: str
    message: str


@dataclass(frozen=True, slots=True)
class CacheValidation:
    """缓存配置校验结果"""

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(f"{v.key}: {v.message}" for v in self.violations)


def zipf_popularity(count: int, zeta: float) -> tuple[float, ...]:
    """
    归一化 Zipf 权重 p_i = i^{-ζ} / Σ u^{-ζ}

    Args:
        count: 文件数 I
        zeta: 偏斜度 ζ
    """
    if count < 1:
        raise DomainError("zipf_popularity.count", count)
    weights = [i ** (-zeta) for i in range(1, count + 1)]
    total = math.fsum(weights)
    return tuple(w / total for w in weights)


def validate_cache_profile(profile: CacheProfile, catalog: Catalog) -> CacheValidation:
    """
    检查缓存概率范围与容量等式 Σ p_i^s b_i = C_s，Σ p_i^t b_i = C_t

    长度不匹配直接视为配置错误，其余问题以违规列表形式返回
    """
    count = len(catalog.sizes)
    for key, probs in (("sat_cache_probs", profile.sat_probs), ("ts_cache_probs", profile.ts_probs)):
        if len(probs) != count:
            raise ConfigError(key, f"长度 {len(probs)} 与文件数 {count} 不一致")

    violations = []
    for key, cap_key, probs, capacity in (
        ("sat_cache_probs", "sat_cache_mbit", profile.sat_probs, profile.sat_capacity),
        ("ts_cache_probs", "ts_cache_mbit", profile.ts_probs, profile.ts_capacity),
    ):
        for i, p in enumerate(probs, start=1):
            if not 0.0 <= p <= 1.0:
                violations.append(Violation(key, f"第 {i} 个概率 {p} 超出 [0, 1]"))
        stored = math.fsum(p * b for p, b in zip(probs, catalog.sizes))
        if abs(stored - capacity) > CAPACITY_RTOL * max(abs(capacity), 1.0):
            violations.append(Violation(
                cap_key, f"Σ p_i b_i = {stored:.6g} bit 与容量 {capacity:.6g} bit 相差 {stored - capacity:.3g}"
            ))

    return CacheValidation(violations=tuple(violations))


def draw_requests(catalog: Catalog, tau_s: float, rng: np.random.Generator, size: int):
    """
    成批采样请求

    Returns:
        (file_index, size, arrival_gap) 三个数组，file_index 从 1 开始
    """
    if not tau_s > 0:
        raise DomainError("draw_requests.tau_s", tau_s)
    gaps = rng.exponential(tau_s, size)
    index = rng.choice(len(catalog.popularity), size=size, p=np.asarray(catalog.popularity))
    return index + 1, np.asarray(catalog.sizes)[index], gaps


def sample_request(catalog: Catalog, tau_s: float, rng: np.random.Generator) -> Request:
    """采样单个请求：文件按流行度抽取，到达间隔服从均值 τ_s 的指数分布"""
    index, sizes, gaps = draw_requests(catalog, tau_s, rng, 1)
    return Request(file_index=int(index[0]), size=float(sizes[0]), arrival_gap=float(gaps[0]))


def sample_cache_states(profile: CacheProfile, file_index: ArrayLike, rng: np.random.Generator):
    """
    独立采样卫星缓存状态 β_s 与 TS 缓存状态 β_r

    file_index 可为标量或数组（从 1 开始）
    """
    idx = np.asarray(file_index) - 1
    p_s = np.asarray(profile.sat_probs)[idx]
    p_t = np.asarray(profile.ts_probs)[idx]
    beta_s = (rng.random(np.shape(idx)) < p_s).astype(int)
    beta_r = (rng.random(np.shape(idx)) < p_t).astype(int)
    if np.ndim(idx) == 0:
        return int(beta_s), int(beta_r)
    return beta_s, beta_r
