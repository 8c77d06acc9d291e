import numpy as np
from loguru import logger

from rcdopt.problem import grad_block, apply_update
from rcdopt.solvers.base import BaseSolver
from rcdopt.solvers.rcd import draw_tuples, chunk_sizes, maybe_refresh
from rcdopt.subsolvers.directions import tuple_direction
from rcdopt.utils.errors import ConfigError, UnsupportedConfigurationError
from rcdopt.utils.rng import SAMPLING_STREAM, AUX_STREAM

# 元组对应的子矩阵秩亏时最多重新抽样的次数
MAX_RESAMPLE = 20


class RCD_N(BaseSolver):
    """一般耦合约束Ax = b下的随机(m+1)块坐标下降

    每次迭代抽取m+1个不同的标量块，在A_T s = 0的一维零空间上精确求解，曲率为L_N = sum L_i。
    """
    name = 'RCD_N'

    def validate(self, problem):
        m = problem.coupling.num_constraints
        if not problem.partition.is_scalar:
            raise UnsupportedConfigurationError('RCD_N只支持标量块')
        if problem.num_blocks < m + 1:
            raise ConfigError(f'RCD_N需要至少m+1={m + 1}个块，当前只有{problem.num_blocks}个')
        if self.config.alpha != 0.0:
            logger.warning('RCD_N的子问题使用欧氏范数，alpha不起作用')

    def iterations_per_full(self, problem):
        return problem.num_blocks / (problem.coupling.num_constraints + 1.0)

    def setup(self, problem, state):
        self.rng = self.streams[SAMPLING_STREAM]
        self.aux = self.streams[AUX_STREAM]
        self.tuple_size = problem.coupling.num_constraints + 1
        self.resamples = 0
        self.skipped = 0

    def _direction(self, problem, state, blocks):
        for _ in range(MAX_RESAMPLE + 1):
            g = np.array([grad_block(problem, state, int(b))[0] for b in blocks])
            d = tuple_direction(problem, state, blocks, g=g)
            if d is not None:
                return blocks, d
            self.resamples += 1
            blocks = self.aux.choice(problem.num_blocks, size=self.tuple_size, replace=False)
        self.skipped += 1
        logger.debug(f'连续{MAX_RESAMPLE}次抽到秩亏的元组，跳过本次迭代')
        return blocks, None

    def advance(self, problem, state, num_iterations):
        for size in chunk_sizes(problem.num_blocks, self.tuple_size, num_iterations):
            tuples = draw_tuples(self.rng, problem.num_blocks, self.tuple_size, size)
            for blocks in tuples:
                blocks, d = self._direction(problem, state, blocks)
                if d is None or not np.any(d):
                    continue
                blocks = [int(b) for b in blocks]
                apply_update(problem, state, blocks, {b: d[k] for k, b in enumerate(blocks)})
            maybe_refresh(problem, state)
        return num_iterations, False


def rcd_n_solve(problem, x0, config):
    """随机(m+1)块坐标下降：rcd_n_solve(problem, x0, config) -> (x_final, ConvergenceTrace)"""
    return RCD_N(config).solve(problem, x0)
