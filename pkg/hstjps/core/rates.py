"""
Discrete rate adaptation and per-mode delivery latency
"""

import numpy as np
from numpy.typing import ArrayLike

from .models import RateTable, TimingConstants


def level_index(gamma: ArrayLike, table: RateTable):
    """SNR 所在速率档位 0..M，0 表示中断"""
    idx = np.searchsorted(np.asarray(table.thresholds), np.asarray(gamma, dtype=float), side="right")
    return int(idx) if np.ndim(idx) == 0 else idx


def rate_from_snr(gamma: ArrayLike, table: RateTable):
    """
    R = Σ 𝕀[γ_m ≤ γ < γ_{m+1}] R_m，低于 γ_1 时为 0

    支持标量与数组输入
    """
    levels = np.concatenate(([0.0], np.asarray(table.rates)))
    rate = levels[level_index(gamma, table)]
    return float(rate) if np.ndim(rate) == 0 else rate


def direct_latency(b: float, rate: float, beta_s: int, t: TimingConstants) -> float | None:
    """
    卫星直传时延 T_{k,1} = B/R_s + T_1 + 𝕀[β_s=0]·T_2

    速率为 0 时返回 None（不可用）
    """
    if rate <= 0:
        return None
    return b / rate + t.t1 + (0.0 if beta_s else t.t2)


def assisted_latency(b: float, beta_r: int, rate_cache: float, rate_relay: float, t: TimingConstants) -> float | None:
    """
    TS 辅助时延：缓存命中为 B/R_{r,1}，未命中为 B/R_{r,2} + T_1

    所选分支速率为 0 时返回 None（不可用）
    """
    if beta_r:
        return b / rate_cache if rate_cache > 0 else None
    return b / rate_relay + t.t1 if rate_relay > 0 else None
