import numpy as np
from loguru import logger

from rcdopt.problem import grad_full, apply_update
from rcdopt.solvers.base import BaseSolver
from rcdopt.subsolvers.conformal import conformal_realization
from rcdopt.subsolvers.directions import knapsack_direction, two_block_direction, coordinate_step
from rcdopt.utils.errors import UnsupportedConfigurationError

# Armijo回溯线搜索的参数
ARMIJO_INITIAL = 1.0
ARMIJO_FACTOR = 0.5
ARMIJO_SIGMA = 0.01
ARMIJO_MAX_HALVINGS = 30
# 投影方向的无穷范数小于此值（相对）时认为已经最优
DIRECTION_TOL = 1e-14


def piece_model_decrease(pieces, g, curvature, lam, x):
    """每一片的模型值 <g, v> + 1/2*sum H v^2 + lam*(|x + v| - |x|)，越小下降越多"""
    coo = pieces.tocoo()
    v = coo.data
    k = coo.col
    contrib = g[k] * v + 0.5 * curvature[k] * v * v + lam[k] * (np.abs(x[k] + v) - np.abs(x[k]))
    return np.bincount(coo.row, weights=contrib, minlength=pieces.shape[0])


class CGD(BaseSolver):
    """坐标梯度下降（Gauss-Southwell规则选工作集）

    每次迭代：计算完整梯度，在H = diag(L)下求解投影方向，做共形分解，
    选模型下降最多的那一片作为工作集，在该坐标对上精确求解后做Armijo线搜索。
    """
    name = 'CGD'

    def validate(self, problem):
        if not problem.coupling.is_single:
            raise UnsupportedConfigurationError('CGD只支持单个耦合约束')
        if not problem.partition.is_scalar:
            raise UnsupportedConfigurationError('CGD按坐标选工作集，只支持标量块')

    def setup(self, problem, state):
        self.curvature = problem.coordinate_lipschitz()
        self.all_idx = np.arange(problem.dim)
        self.line_search_failures = 0

    def _pair_delta(self, problem, state, idx, step):
        """F(x + step) - F(x)，只访问idx对应的列"""
        Z = problem.smooth.Z[:, idx]
        zd = np.asarray(Z @ step).ravel()
        df = float(state.residual @ zd) + 0.5 * float(zd @ zd) + float(problem.smooth.q[idx] @ step)
        h = problem.nonsmooth
        new = h.value(state.x[idx] + step, idx)
        if not np.isfinite(new):
            return np.inf
        return df + new - h.value(state.x[idx], idx)

    def _iterate(self, problem, state):
        x = state.x
        g = grad_full(problem, state)
        s = knapsack_direction(problem, x, self.all_idx, g, self.curvature)
        if np.max(np.abs(s), initial=0.0) <= DIRECTION_TOL * (1.0 + np.max(np.abs(x), initial=0.0)):
            return True
        decomposition = conformal_realization(s, problem.coupling.a, strict=False)
        if decomposition.num_pieces == 0:
            return True
        values = piece_model_decrease(decomposition.pieces, g, self.curvature, problem.nonsmooth.lam, x)
        pieces = decomposition.pieces
        sizes = np.diff(pieces.indptr)
        # 单坐标片只有在a_k = 0时才能单独移动
        first = pieces.indices[np.minimum(pieces.indptr[:-1], pieces.nnz - 1)]
        lone = (sizes == 1) & (problem.coupling.a[first] != 0.0)
        values[lone] = np.inf
        if not np.isfinite(np.min(values)):
            return True
        best = int(np.argmin(values))
        idx, _ = decomposition.piece(best)
        idx = np.sort(idx)
        if idx.size == 2:
            d_i, d_j = two_block_direction(problem, state, int(idx[0]), int(idx[1]), g=g[idx],
                                           curvature=self.curvature[idx])
            d = np.concatenate([d_i, d_j])
        else:
            d = np.array([coordinate_step(problem, x, int(idx[0]), g[idx[0]], self.curvature[idx[0]])])
        h = problem.nonsmooth
        model = float(g[idx] @ d) + h.value(x[idx] + d, idx) - h.value(x[idx], idx)
        if not model < 0.0:
            return True
        beta = ARMIJO_INITIAL
        for _ in range(ARMIJO_MAX_HALVINGS):
            if self._pair_delta(problem, state, idx, beta * d) <= ARMIJO_SIGMA * beta * model:
                break
            beta *= ARMIJO_FACTOR
        else:
            self.line_search_failures += 1
            logger.debug('Armijo线搜索达到最大回溯次数，本次迭代不更新')
            return False
        apply_update(problem, state, [int(k) for k in idx], {int(k): beta * d[n] for n, k in enumerate(idx)})
        return False

    def advance(self, problem, state, num_iterations):
        for done in range(num_iterations):
            if self._iterate(problem, state):
                return done, True
        return num_iterations, False


def cgd_solve(problem, x0, config):
    """坐标梯度下降：cgd_solve(problem, x0, config) -> (x_final, ConvergenceTrace)"""
    return CGD(config).solve(problem, x0)
