import sys

from loguru import logger


def setup_logger(log_level="info"):
    """重新设置日志输出

    :param log_level: 打印的日志等级，可选值有："debug", "info", "warning", "error"
    :return: 大写的日志等级
    """
    log_level = log_level.upper()
    logger.remove()
    logger.add(sink=sys.stdout, level=log_level)
    return log_level
