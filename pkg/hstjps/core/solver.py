"""
Offline computation of the maximal throughput η*

η* 是 g(η) = Λ(η) - η·τ_s 的唯一零点；g(0) = Σ p_i b_i > 0 且 g 严格递减，
以 [0, R_M] 为初始区间二分求解。
"""

import hashlib
import json
from collections.abc import Callable
from dataclasses import dataclass

from scipy.optimize import bisect

from ..log import logger
from ..utils.utils import format_rate
from .errors import ConfigError
from .models import LatencyReading, NetworkConfig, QuadratureSpec, RelayCdfMethod
from .reward import lambda_of_eta


@dataclass(frozen=True, slots=True)
class EtaSolution:
    """η* 求解结果"""

    eta_star: float
    """最大吞吐量 η* (bit/s)"""

    residual: float
    """|Λ(η*) - η*·τ_s| (bit)"""

    iterations: int
    """二分迭代次数"""

    bracket: tuple[float, float]
    """验证过符号变化的初始区间 (bit/s)"""

    tau_s: float
    """平均请求间隔 (s)"""

    @property
    def relative_residual(self) -> float:
        scale = self.eta_star * self.tau_s
        return self.residual / scale if scale > 0 else float("inf")


def scenario_key(
    env: NetworkConfig,
    quad: QuadratureSpec,
    reading: LatencyReading = LatencyReading.DELIVERY,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
) -> str:
    """场景指纹（SHA-256），相同指纹的 η* 可直接复用"""
    payload = json.dumps(
        {
            "env": env.model_dump(mode="json"),
            "quad": quad.model_dump(mode="json"),
            "reading": reading.value,
            "method": method.value,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def solve_eta_star(
    env: NetworkConfig,
    quad: QuadratureSpec | None = None,
    tol_rel: float = 1e-6,
    *,
    reading: LatencyReading = LatencyReading.DELIVERY,
    method: RelayCdfMethod = RelayCdfMethod.INTEGRAL,
    lambda_fn: Callable[[float], float] | None = None,
) -> EtaSolution:
    """
    求解 Λ(η*) = η*·τ_s

    Args:
        env: 场景
        quad: 积分参数
        tol_rel: 相对残差容差
        reading: 直传时延取法
        method: 中继 CDF 求值方式
        lambda_fn: 替代 Λ 的函数，缺省使用积分实现
    """
    quad = quad or QuadratureSpec()
    if lambda_fn is None:
        def lambda_fn(eta: float) -> float:
            return lambda_of_eta(eta, env, quad, reading, method)

    def gap(eta: float) -> float:
        return lambda_fn(eta) - eta * env.tau_s

    low, high = 0.0, env.rates.top_rate
    g_low, g_high = gap(low), gap(high)
    if not g_low > 0:
        raise ConfigError("catalog", f"Λ(0) = {g_low:.6g} 必须为正")
    if g_high >= 0:
        raise ConfigError(
            "tau_s_ms",
            f"g(η) 在 η ≤ R_M = {high:.6g} 内没有变号: g(0) = {g_low:.6g}, g(R_M) = {g_high:.6g}",
        )

    eta_star, info = bisect(gap, low, high, xtol=1e-12 * high, rtol=4.5e-15, full_output=True)
    residual = abs(gap(eta_star))
    solution = EtaSolution(
        eta_star=float(eta_star),
        residual=residual,
        iterations=info.iterations,
        bracket=(low, high),
        tau_s=env.tau_s,
    )

    if solution.relative_residual > tol_rel:
        logger.warning(f"[HSTJPS] η* 残差偏大: 相对残差 {solution.relative_residual:.3g} > {tol_rel}")
    logger.info(
        f"[HSTJPS] η* = {format_rate(solution.eta_star)}，{solution.iterations} 次二分，"
        f"相对残差 {solution.relative_residual:.2e}"
    )
    return solution
