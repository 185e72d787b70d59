"""
Unit conversion and formatting helpers
"""

import math


def db_to_linear(db: float) -> float:
    """dB 转线性倍数"""
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    """dBm 转瓦特"""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """热噪声功率 N0·B（瓦特）"""
    return dbm_to_watts(density_dbm_hz + 10.0 * math.log10(bandwidth_hz))


def format_rate(bps: float) -> str:
    """格式化速率"""
    if not math.isfinite(bps):
        return str(bps)
    if abs(bps) >= 1e6:
        return f"{bps / 1e6:.3f} Mbps"
    if abs(bps) >= 1e3:
        return f"{bps / 1e3:.3f} kbps"
    return f"{bps:.3f} bps"


def format_duration(seconds: float) -> str:
    """格式化耗时"""
    minute, second = divmod(seconds, 60)
    hour, minute = divmod(int(minute), 60)

    parts = []
    if hour > 0:
        parts.append(f"{hour}时")
    if minute > 0:
        parts.append(f"{minute}分")
    if second > 0 or not parts:
        parts.append(f"{second:.1f}秒")

    return " ".join(parts)
