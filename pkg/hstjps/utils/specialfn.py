"""
Confluent and generalized hypergeometric series

只实现非负实参数下的幂级数，信道模型中的参数规模（z 不超过百量级）不需要渐近展开。
"""

import math

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import DomainError, NumericFailure


class SeriesControl(BaseModel):
    """级数求和控制参数"""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-12, gt=0)
    """相邻项相对误差阈值"""

    max_terms: int = Field(default=500, ge=1)
    """最大求和项数"""


DEFAULT_SERIES = SeriesControl()


def _check_denominator(name: str, value: float):
    if value <= 0 and float(value).is_integer():
        raise DomainError(name, value)


def _pfq_series(numer: tuple[float, ...], denom: tuple[float, ...], z: ArrayLike, ctl: SeriesControl, what: str):
    """
    通用超几何幂级数 Σ Π(a)_n / Π(b)_n · z^n / n!

    对标量返回 float，对数组逐元素求和
    """
    for i, b in enumerate(denom):
        _check_denominator(f"{what}.b{i + 1}", b)

    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)

    term = np.ones_like(z_arr)
    total = np.ones_like(z_arr)

    for n in range(ctl.max_terms):
        ratio = 1.0
        for a in numer:
            ratio *= a + n
        for b in denom:
            ratio /= b + n
        term = term * (ratio / (n + 1)) * z_arr
        total = total + term
        if np.all(np.abs(term) <= ctl.rel_tol * np.abs(total)):
            break
    else:
        worst = int(np.argmax(np.abs(term) / np.maximum(np.abs(total), np.finfo(float).tiny)))
        raise NumericFailure(what, float(total[worst]), ctl.max_terms)

    if not np.all(np.isfinite(total)):
        raise NumericFailure(what, float(total[~np.isfinite(total)][0]), n + 1)

    return float(total[0]) if scalar else total


def kummer_1f1(a: float, b: float, z: ArrayLike, ctl: SeriesControl = DEFAULT_SERIES):
    """
    Kummer 合流超几何函数 1F1(a; b; z)

    Args:
        a: 分子参数
        b: 分母参数，不能是非正整数
        z: 自变量（标量或数组）
        ctl: 级数控制参数
    """
    return _pfq_series((a,), (b,), z, ctl, "kummer_1f1")


def hyp_2f2(a1: float, a2: float, b1: float, b2: float, z: ArrayLike, ctl: SeriesControl = DEFAULT_SERIES):
    """广义超几何函数 2F2(a1, a2; b1, b2; z)，整函数，级数总收敛"""
    return _pfq_series((a1, a2), (b1, b2), z, ctl, "hyp_2f2")


def kummer_1f1_integer(m: int, z: float) -> float:
    """
    正整数 m 时 1F1(m; 1; z) 的闭式 e^z · L_{m-1}(-z)

    终止形式，作为一般级数的校验基准
    """
    if m < 1:
        raise DomainError("kummer_1f1_integer.m", m)
    n = m - 1
    laguerre = sum(math.comb(n, k) * z ** k / math.factorial(k) for k in range(n + 1))
    return math.exp(z) * laguerre
