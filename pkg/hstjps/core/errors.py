"""
Exception hierarchy for the HSTJPS solver and simulator

异常携带结构化字段，可跨进程传递
"""


class HstjpsError(Exception):
    """所有本项目异常的基类"""


class NumericFailure(HstjpsError):
    """数值计算失败（级数不收敛、积分结果非有限值等）"""

    def __init__(self, what: str, partial: float = float("nan"), terms: int = 0):
        self.what = what
        self.partial = partial
        self.terms = terms
        super().__init__(f"Numeric failure in {what}: partial={partial!r} after {terms} terms")

    def __reduce__(self):
        return type(self), (self.what, self.partial, self.terms)


class DomainError(HstjpsError, ValueError):
    """参数超出定义域"""

    def __init__(self, what: str, value: object):
        self.what = what
        self.value = value
        super().__init__(f"Domain error in {what}: {value!r}")

    def __reduce__(self):
        return type(self), (self.what, self.value)


class ConfigError(HstjpsError, ValueError):
    """配置项缺失或违反约束"""

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"Config error [{key}]: {constraint}")

    def __reduce__(self):
        return type(self), (self.key, self.constraint)


class SimulationError(HstjpsError):
    """仿真帧超过用户上限，通常意味着策略永不调度"""

    def __init__(self, users: int, limit: int):
        self.users = users
        self.limit = limit
        super().__init__(f"Frame exceeded {limit} users without scheduling (seen {users})")

    def __reduce__(self):
        return type(self), (self.users, self.limit)


class SweepError(HstjpsError):
    """参数扫描中某个网格点失败"""

    def __init__(self, axis: str, value: float, policy: str, cause: Exception):
        self.axis = axis
        self.value = value
        self.policy = policy
        self.cause = cause
        super().__init__(f"Sweep point {axis}={value} policy={policy} failed: {cause}")

    def __reduce__(self):
        return type(self), (self.axis, self.value, self.policy, self.cause)
