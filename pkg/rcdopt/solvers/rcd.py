import numpy as np
from loguru import logger

from rcdopt.problem import REFRESH_FACTOR, refresh_state, check_residual, grad_block, apply_update
from rcdopt.solvers.base import BaseSolver
from rcdopt.solvers.kernels import rcd_scalar_chunk
from rcdopt.subsolvers.directions import two_block_direction, pair_curvature, model_value
from rcdopt.subsolvers.pw1d import STATUS_UNBOUNDED
from rcdopt.utils.errors import ConfigError, UnsupportedConfigurationError, UnboundedError, InfeasibleError, \
    InvariantError
from rcdopt.utils.rng import SAMPLING_STREAM


def draw_tuples(rng, num_blocks, size, count):
    """一次抽取count个互不相同的size元组，每个元组在所有有序元组上均匀分布

    逐列抽取：第k列在剩下的N-k个块中均匀选一个，再跳过同一行前面已经选过的块。
    size=2时就是i ~ U{0..N-1}，j' ~ U{0..N-2}，j = j' + (j' >= i)。
    :return: 形状(count, size)的int64数组
    """
    columns = []
    for k in range(size):
        value = rng.integers(0, num_blocks - k, size=count).astype(np.int64)
        if columns:
            chosen = np.sort(np.stack(columns, axis=1), axis=1)
            for c in range(chosen.shape[1]):
                value += (value >= chosen[:, c])
        columns.append(value)
    return np.stack(columns, axis=1)


def chunk_sizes(num_blocks, updates_per_iteration, num_iterations):
    """把num_iterations次迭代切成若干段，每段最多REFRESH_FACTOR*N次块更新

    分段只依赖问题规模，相同的seed得到相同的抽样序列
    """
    limit = max(REFRESH_FACTOR * num_blocks // updates_per_iteration, 1)
    remaining = num_iterations
    while remaining > 0:
        size = min(remaining, limit)
        yield size
        remaining -= size


def maybe_refresh(problem, state):
    if state.updates_since_refresh >= REFRESH_FACTOR * problem.num_blocks:
        refresh_state(problem, state)
        logger.debug(f'第{state.refreshes}次重算残差')


class RCD(BaseSolver):
    """随机两块坐标下降

    每次迭代均匀抽取一对块(i, j)，在a_i^T s_i + a_j^T s_j = 0上精确求解两块子问题。
    标量块且use_numba时使用编译好的内层循环。
    """
    name = 'RCD'

    def validate(self, problem):
        if not problem.coupling.is_single:
            raise UnsupportedConfigurationError('RCD只支持单个耦合约束，多约束请使用RCD_N')
        if problem.num_blocks < 2:
            raise ConfigError('RCD至少需要两个块')

    def iterations_per_full(self, problem):
        return problem.num_blocks / 2.0

    def setup(self, problem, state):
        self.rng = self.streams[SAMPLING_STREAM]
        self.fast = self.config.use_numba and problem.partition.is_scalar
        if self.fast:
            Z = problem.smooth.Z
            h = problem.nonsmooth
            self.arrays = (Z.data, Z.indices.astype(np.int64), Z.indptr.astype(np.int64), problem.smooth.q,
                           problem.coupling.a.copy(), h.lam, h.lo, h.hi, problem.lipschitz, float(problem.alpha))

    def advance(self, problem, state, num_iterations):
        for size in chunk_sizes(problem.num_blocks, 2, num_iterations):
            pairs = draw_tuples(self.rng, problem.num_blocks, 2, size)
            if self.fast:
                self._run_compiled(problem, state, pairs)
            else:
                self._run_python(problem, state, pairs)
            maybe_refresh(problem, state)
        return num_iterations, False

    def _run_compiled(self, problem, state, pairs):
        data, indices, indptr, q, a, lam, lo, hi, lipschitz, alpha = self.arrays
        total, touches, status, failed = rcd_scalar_chunk(data, indices, indptr, q, a, lam, lo, hi, lipschitz,
                                                          alpha, state.x, state.residual,
                                                          np.ascontiguousarray(pairs[:, 0]),
                                                          np.ascontiguousarray(pairs[:, 1]))
        state.objective += total
        state.touches += int(touches)
        if status != 0:
            i, j = pairs[failed]
            if status == STATUS_UNBOUNDED:
                raise UnboundedError(f'坐标对({i}, {j})的子问题无下界')
            raise InfeasibleError(f'坐标对({i}, {j})的子问题不可行')
        state.updates_since_refresh += 2 * pairs.shape[0]
        state.coupling_value = problem.coupling.A @ state.x
        state.feasibility_defect = problem.coupling.defect(ax=state.coupling_value)
        if state.debug:
            check_residual(problem, state)

    def _run_python(self, problem, state, pairs):
        part = problem.partition
        for i, j in pairs:
            i, j = int(i), int(j)
            g = np.concatenate([grad_block(problem, state, i), grad_block(problem, state, j)])
            d_i, d_j = two_block_direction(problem, state, i, j, g=g)
            if state.debug:
                idx = np.r_[part.block_slice(i), part.block_slice(j)]
                model = model_value(problem, state.x, idx, g, pair_curvature(problem, i, j),
                                    np.concatenate([d_i, d_j]))
                if model > 1e-12 * (1.0 + abs(state.objective)):
                    raise InvariantError(f'坐标对({i}, {j})的模型没有下降：{model:.3e}')
            apply_update(problem, state, [i, j], {i: d_i, j: d_j})


def rcd_solve(problem, x0, config):
    """随机两块坐标下降：rcd_solve(problem, x0, config) -> (x_final, ConvergenceTrace)"""
    return RCD(config).solve(problem, x0)
