"""
HSTJPS - 缓存辅助星地混合网络的联合探测与调度
"""

__version__ = "1.0.0"
