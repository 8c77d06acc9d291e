class RcdError(Exception):
    """rcdopt所有异常的基类"""


class DimensionError(RcdError, ValueError):
    pass


class ConfigError(RcdError, ValueError):
    pass


class InfeasibleError(RcdError):
    """初始点不可行，或者子问题的可行域为空"""


class UnboundedError(RcdError):
    """一维子问题无下界"""


class ConformalityError(RcdError, ValueError):
    pass


class InvariantError(RcdError, AssertionError):
    """内部不变量被破坏，只在debug检查中抛出"""


class UnsupportedConfigurationError(RcdError):
    pass


class DatasetParseError(RcdError, ValueError):
    def __init__(self, message, line_number=None, path=None):
        self.line_number = line_number
        self.path = path
        if line_number is not None:
            message = f'{path or "<stream>"}:{line_number}: {message}'
        super().__init__(message)


class NonConvergedError(RcdError):
    pass


class RateFitError(RcdError, ValueError):
    pass
