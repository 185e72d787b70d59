import numpy as np
import pytest

from hstjps.core.models import ExperimentConfig, NetworkConfig, QuadratureSpec

# 快速测试用的粗积分网格
FAST_QUAD = QuadratureSpec(radial_nodes=16, snr_nodes=64, relay_nodes=48)


@pytest.fixture(scope="session")
def env() -> NetworkConfig:
    return NetworkConfig.default()


@pytest.fixture(scope="session")
def fast_quad() -> QuadratureSpec:
    return FAST_QUAD


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def fast_config() -> ExperimentConfig:
    """粗积分网格、少量帧的实验配置"""
    return ExperimentConfig(
        frames=40,
        radial_nodes=FAST_QUAD.radial_nodes,
        snr_nodes=FAST_QUAD.snr_nodes,
        relay_nodes=FAST_QUAD.relay_nodes,
        batches=4,
    )
