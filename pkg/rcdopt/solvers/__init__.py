import importlib

from loguru import logger

from .base import SolverConfig, ConvergenceTrace, PlateauWindow, GapToReference, BaseSolver, TRACE_COLUMNS
from .cgd import CGD, cgd_solve
from .gm import GM, gm_solve
from .rcd import RCD, rcd_solve
from .rcd_n import RCD_N, rcd_n_solve

__all__ = ['build_solver', 'solve', 'SolverConfig', 'ConvergenceTrace', 'PlateauWindow', 'GapToReference',
           'rcd_solve', 'rcd_n_solve', 'cgd_solve', 'gm_solve']


def build_solver(config):
    """根据config.algorithm创建求解器"""
    mod = importlib.import_module(__name__)
    solver = getattr(mod, config.algorithm)(config)
    logger.info(f'成功创建求解器：{config.algorithm}，epsilon={config.epsilon}，alpha={config.alpha}，'
                f'seed={config.seed}')
    return solver


def solve(problem, x0, config):
    return build_solver(config).solve(problem, x0)
