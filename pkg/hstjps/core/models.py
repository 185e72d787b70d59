"""
Pydantic configuration models for the HSTJPS scenario
"""

import math
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.constants import c as SPEED_OF_LIGHT

from ..utils.utils import db_to_linear, dbm_to_watts, noise_power


class LatencyReading(Enum):
    """
    Λ(η) 中直接传输时延的取法
    + DELIVERY : 与仿真一致的直传时延 B/R_s + T_1 + 𝕀[β_s=0]T_2
    + STACKED  : 在完整时延之上再叠加 T_1（卫星未缓存时再加 T_2）
    """
    DELIVERY = "delivery"
    STACKED = "stacked"


class RelayCdfMethod(Enum):
    """
    中继 SNR 条件 CDF 的求值方式
    + INTEGRAL    : 精确的一维数值积分
    + CLOSED_FORM : 超几何函数闭式（负指数修正并截断到 [0, 1]）
    """
    INTEGRAL = "integral"
    CLOSED_FORM = "closed_form"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class FadingParams(_Frozen):
    """阴影莱斯 (shadowed-Rician) 衰落参数"""

    m: float = Field(ge=0.5)
    """Nakagami 衰落阶数"""

    b: float = Field(gt=0)
    """散射分量平均功率的一半"""

    omega: float = Field(ge=0)
    """视距分量平均功率"""

    @classmethod
    def default(cls) -> "FadingParams":
        return FadingParams(m=5, b=0.126, omega=0.279)

    def mean_power(self) -> float:
        """E|h|² = 2b + Ω"""
        return 2 * self.b + self.omega

    def second_moment(self) -> float:
        """E|h|⁴ = Ω²(1 + 1/m) + 8bΩ + 8b²"""
        return self.omega ** 2 * (1 + 1 / self.m) + 8 * self.b * self.omega + 8 * self.b ** 2


class FreeSpacePathLoss(_Frozen):
    """自由空间路损 (c / (4π f_c d))²，指数为 2"""

    kind: Literal["free_space"] = "free_space"

    carrier_hz: float = Field(gt=0)
    """载波频率"""

    def gain(self, d: float) -> float:
        return (SPEED_OF_LIGHT / (4 * math.pi * self.carrier_hz * d)) ** 2


class TerrestrialPathLoss(_Frozen):
    """地面路损：1 m 处参考损耗，功率随 d^{-β0} 衰减"""

    kind: Literal["terrestrial"] = "terrestrial"

    ref_loss_db: float = -40.0
    """1 m 处参考路损 (dB)"""

    beta0: float = Field(default=3.76, gt=0)
    """路损指数"""

    def gain(self, d: float) -> float:
        return db_to_linear(self.ref_loss_db) * d ** (-self.beta0)


class LinkBudget(_Frozen):
    """单跳链路预算（全部为线性值，SI 单位）"""

    p_tx: float = Field(gt=0)
    """发射功率 (W)"""

    g_tx: float = Field(gt=0)
    """发射天线增益"""

    g_rx: float = Field(gt=0)
    """接收天线增益"""

    noise_power: float = Field(gt=0)
    """噪声功率 (W)"""

    pathloss: FreeSpacePathLoss | TerrestrialPathLoss = Field(discriminator="kind")
    """路损模型"""

    def mean_snr(self, d):
        """距离 d 处的平均 SNR（线性），d 可为数组"""
        return self.p_tx * self.g_tx * self.g_rx * self.pathloss.gain(d) / self.noise_power


class RateTable(_Frozen):
    """离散速率表，R_0 = 0 隐含为中断"""

    rates: tuple[float, ...]
    """R_1..R_M (bit/s)，严格递增"""

    thresholds: tuple[float, ...]
    """γ_1..γ_M（线性 SNR），严格递增"""

    @model_validator(mode="after")
    def _check(self) -> "RateTable":
        if len(self.rates) < 1 or len(self.rates) != len(self.thresholds):
            raise ValueError("rates 与 thresholds 长度必须相同且不少于 1")
        for name, seq in (("rates", self.rates), ("thresholds", self.thresholds)):
            if any(x <= 0 for x in seq):
                raise ValueError(f"{name} 必须为正")
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} 必须严格递增")
        return self

    @classmethod
    def from_db(cls, rates_bps: tuple[float, ...], thresholds_db: tuple[float, ...]) -> "RateTable":
        return RateTable(rates=tuple(rates_bps), thresholds=tuple(db_to_linear(x) for x in thresholds_db))

    @classmethod
    def default(cls) -> "RateTable":
        return cls.from_db(
            tuple(r * 1e6 for r in (43.3, 57.8, 86.7, 115.6, 130.0, 144.0)),
            (5.4, 8.1, 12.8, 17.3, 19.5, 21.6),
        )

    @property
    def top_rate(self) -> float:
        return self.rates[-1]


class TimingConstants(_Frozen):
    """时延常数 (s)"""

    t1: float = Field(default=0.002, ge=0)
    """星地链路时延"""

    t2: float = Field(default=0.002, ge=0)
    """卫星未缓存时从网关取文件的时间"""

    tau_p: float = Field(default=0.002, ge=0)
    """TS 探测时长"""


class Catalog(_Frozen):
    """内容目录与 Zipf 请求流行度"""

    sizes: tuple[float, ...]
    """文件大小 b_i (bit)"""

    popularity: tuple[float, ...]
    """请求概率 p_i"""

    zeta: float = Field(ge=0)
    """Zipf 偏斜度"""

    @model_validator(mode="after")
    def _check(self) -> "Catalog":
        if len(self.sizes) < 1 or len(self.sizes) != len(self.popularity):
            raise ValueError("sizes 与 popularity 长度必须相同且不少于 1")
        if any(b <= 0 for b in self.sizes):
            raise ValueError("文件大小必须为正")
        if abs(math.fsum(self.popularity) - 1.0) > 1e-9:
            raise ValueError("popularity 之和必须为 1")
        if self.zeta > 0 and any(q >= p for p, q in zip(self.popularity, self.popularity[1:])):
            raise ValueError("ζ > 0 时 popularity 必须严格递减")
        return self

    @classmethod
    def zipf(cls, sizes: tuple[float, ...], zeta: float) -> "Catalog":
        from .catalog import zipf_popularity

        return Catalog(sizes=tuple(sizes), popularity=zipf_popularity(len(sizes), zeta), zeta=zeta)

    @property
    def mean_size(self) -> float:
        return math.fsum(p * b for p, b in zip(self.popularity, self.sizes))


class CacheProfile(_Frozen):
    """概率缓存配置"""

    sat_probs: tuple[float, ...]
    """卫星缓存概率 p_i^s"""

    ts_probs: tuple[float, ...]
    """TS 缓存概率 p_i^t"""

    sat_capacity: float = Field(ge=0)
    """卫星缓存容量 C_s (bit)"""

    ts_capacity: float = Field(ge=0)
    """TS 缓存容量 C_t (bit)"""


class QuadratureSpec(_Frozen):
    """Λ(η) 数值积分参数"""

    radial_nodes: int = Field(default=48, ge=1)
    """径向 Gauss–Legendre 节点数"""

    snr_nodes: int = Field(default=256, ge=1)
    """直连 SNR 积分节点总数（按速率门限分段）"""

    snr_truncation_quantile: float = Field(default=1 - 1e-7, gt=0, lt=1)
    """直连 SNR 积分截断分位点"""

    relay_nodes: int = Field(default=96, ge=1)
    """中继 CDF 积分节点数"""

    def doubled(self) -> "QuadratureSpec":
        return self.model_copy(update={
            "radial_nodes": 2 * self.radial_nodes,
            "snr_nodes": 2 * self.snr_nodes,
            "relay_nodes": 2 * self.relay_nodes,
        })


class NetworkConfig(_Frozen):
    """不可变的场景描述，内部全部为 SI 单位与线性值"""

    sat_user: LinkBudget
    """卫星-用户链路 (P_ts, G_s, G_u)"""

    sat_ts: LinkBudget
    """卫星-TS 链路 (P_ts, G_s, G_t)"""

    ts_user: LinkBudget
    """TS-用户链路 (P_tr, G_t, G_u)"""

    altitude: float = Field(gt=0)
    """卫星到地面距离 d_0 (m)"""

    cell_radius: float = Field(gt=0)
    """小区半径 R (m)"""

    cells: int = Field(ge=1)
    """小区数 L"""

    sat_fading: FadingParams
    """卫星-用户链路衰落"""

    ts_fading: FadingParams
    """卫星-TS 链路衰落"""

    catalog: Catalog
    cache: CacheProfile
    rates: RateTable
    timing: TimingConstants

    tau_s: float = Field(gt=0)
    """平均请求间隔 (s)"""

    @property
    def gbar_s(self) -> float:
        """卫星-用户平均 SNR"""
        return self.sat_user.mean_snr(self.altitude)

    @property
    def gbar_t(self) -> float:
        """卫星-TS 平均 SNR"""
        return self.sat_ts.mean_snr(self.altitude)

    def gbar_u(self, d):
        """TS-用户平均 SNR，d 可为数组"""
        return self.ts_user.mean_snr(d)

    @classmethod
    def default(cls) -> "NetworkConfig":
        """默认场景"""
        return ExperimentConfig().network()


class ExperimentConfig(BaseModel):
    """
    实验配置（扁平键值文档，键名带单位）

    字段默认值即默认场景
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # 发射功率与天线
    p_ts_dbm: float = 40.0
    """卫星发射功率 P_ts (dBm)"""

    p_tr_dbm: float = 33.0
    """TS 发射功率 P_tr (dBm)"""

    g_s_dbi: float = 25.0
    g_t_dbi: float = 10.0
    g_u_dbi: float = 0.0

    # 射频与几何
    carrier_hz: float = Field(default=2e9, gt=0)
    bandwidth_hz: float = Field(default=2e7, gt=0)
    noise_density_dbm_hz: float = -174.0
    altitude_m: float = Field(default=600e3, gt=0)
    cell_radius_m: float = Field(default=1000.0, gt=0)
    cells: int = Field(default=7, ge=1)

    # 衰落
    sat_fading_m: float = Field(default=5.0, ge=0.5)
    sat_fading_b: float = Field(default=0.126, gt=0)
    sat_fading_omega: float = Field(default=0.279, ge=0)
    ts_fading_m: float = Field(default=5.0, ge=0.5)
    ts_fading_b: float = Field(default=0.126, gt=0)
    ts_fading_omega: float = Field(default=0.279, ge=0)
    ts_ref_loss_db: float = -40.0
    ts_pathloss_exponent: float = Field(default=3.76, gt=0)

    # 内容与缓存
    zipf_skew: float = Field(default=1.5, ge=0)
    file_sizes_mbit: tuple[float, ...] = (100.0,) * 8
    sat_cache_mbit: float = Field(default=300.0, ge=0)
    ts_cache_mbit: float = Field(default=100.0, ge=0)
    sat_cache_probs: tuple[float, ...] = (3 / 8,) * 8
    ts_cache_probs: tuple[float, ...] = (1 / 8,) * 8

    # 速率表
    rates_mbps: tuple[float, ...] = (43.3, 57.8, 86.7, 115.6, 130.0, 144.0)
    thresholds_db: tuple[float, ...] = (5.4, 8.1, 12.8, 17.3, 19.5, 21.6)

    # 时间
    t1_ms: float = Field(default=2.0, ge=0)
    t2_ms: float = Field(default=2.0, ge=0)
    tau_p_ms: float = Field(default=2.0, ge=0)
    tau_s_ms: float = Field(default=0.5, gt=0)

    # 运行控制
    frames: int = Field(default=100_000, ge=1)
    seed: int = Field(default=2025, ge=0)
    policies: tuple[str, ...] = ("hstjps", "no_wait_direct", "no_wait_assisted", "no_wait_no_ts_cache")
    sweep_axis: Literal["p_ts_dbm", "p_tr_dbm", "tau_s"] = "p_ts_dbm"
    sweep_grid: tuple[float, ...] = (36.0, 38.0, 40.0, 42.0, 44.0, 46.0)
    radial_nodes: int = Field(default=48, ge=1)
    snr_nodes: int = Field(default=256, ge=1)
    snr_truncation_quantile: float = Field(default=1 - 1e-7, gt=0, lt=1)
    relay_nodes: int = Field(default=96, ge=1)
    latency_reading: LatencyReading = LatencyReading.DELIVERY
    relay_cdf_method: RelayCdfMethod = RelayCdfMethod.INTEGRAL
    max_users_per_frame: int = Field(default=1_000_000, ge=1)
    batches: int = Field(default=30, ge=2)
    workers: int = Field(default=1, ge=1)
    relay_check_samples: int = Field(default=200_000, ge=1000)
    """validate 命令中继 CDF 蒙特卡洛校验的样本数"""

    @field_validator("file_sizes_mbit", "rates_mbps")
    @classmethod
    def _positive(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v or any(x <= 0 for x in v):
            raise ValueError("必须为非空正数序列")
        return v

    @field_validator("rates_mbps", "thresholds_db")
    @classmethod
    def _increasing(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("必须严格递增")
        return v

    @field_validator("sat_cache_probs", "ts_cache_probs")
    @classmethod
    def _probabilities(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        bad = [x for x in v if not 0.0 <= x <= 1.0]
        if bad:
            raise ValueError(f"缓存概率必须在 [0, 1] 内: {bad}")
        return v

    @field_validator("sweep_grid")
    @classmethod
    def _non_empty(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v:
            raise ValueError("扫描网格不能为空")
        return v

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            radial_nodes=self.radial_nodes,
            snr_nodes=self.snr_nodes,
            snr_truncation_quantile=self.snr_truncation_quantile,
            relay_nodes=self.relay_nodes,
        )

    def with_axis(self, axis: str, value: float) -> "ExperimentConfig":
        """返回扫描轴取值替换后的配置，tau_s 轴以毫秒计"""
        key = "tau_s_ms" if axis == "tau_s" else axis
        return self.model_copy(update={key: float(value)})

    def network(self) -> NetworkConfig:
        """单位换算为 SI 与线性值，构建 NetworkConfig（不含跨字段缓存校验）"""
        noise = noise_power(self.noise_density_dbm_hz, self.bandwidth_hz)
        g_s, g_t, g_u = (db_to_linear(x) for x in (self.g_s_dbi, self.g_t_dbi, self.g_u_dbi))
        free_space = FreeSpacePathLoss(carrier_hz=self.carrier_hz)
        terrestrial = TerrestrialPathLoss(ref_loss_db=self.ts_ref_loss_db, beta0=self.ts_pathloss_exponent)
        p_ts = dbm_to_watts(self.p_ts_dbm)
        p_tr = dbm_to_watts(self.p_tr_dbm)

        sizes = tuple(x * 1e6 for x in self.file_sizes_mbit)
        return NetworkConfig(
            sat_user=LinkBudget(p_tx=p_ts, g_tx=g_s, g_rx=g_u, noise_power=noise, pathloss=free_space),
            sat_ts=LinkBudget(p_tx=p_ts, g_tx=g_s, g_rx=g_t, noise_power=noise, pathloss=free_space),
            ts_user=LinkBudget(p_tx=p_tr, g_tx=g_t, g_rx=g_u, noise_power=noise, pathloss=terrestrial),
            altitude=self.altitude_m,
            cell_radius=self.cell_radius_m,
            cells=self.cells,
            sat_fading=FadingParams(m=self.sat_fading_m, b=self.sat_fading_b, omega=self.sat_fading_omega),
            ts_fading=FadingParams(m=self.ts_fading_m, b=self.ts_fading_b, omega=self.ts_fading_omega),
            catalog=Catalog.zipf(sizes, self.zipf_skew),
            cache=CacheProfile(
                sat_probs=self.sat_cache_probs,
                ts_probs=self.ts_cache_probs,
                sat_capacity=self.sat_cache_mbit * 1e6,
                ts_capacity=self.ts_cache_mbit * 1e6,
            ),
            rates=RateTable.from_db(tuple(r * 1e6 for r in self.rates_mbps), self.thresholds_db),
            timing=TimingConstants(t1=self.t1_ms / 1e3, t2=self.t2_ms / 1e3, tau_p=self.tau_p_ms / 1e3),
            tau_s=self.tau_s_ms / 1e3,
        )
