"""
Package logger
"""

import logging

logger = logging.getLogger("hstjps")


def setup_logging(debug: bool = False):
    """配置包日志输出，debug 为真时输出详细调试日志"""
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s", "%H:%M:%S"))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
