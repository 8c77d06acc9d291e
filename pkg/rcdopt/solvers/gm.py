import numpy as np
from loguru import logger

from rcdopt.problem import grad_full, apply_full_update
from rcdopt.solvers.base import BaseSolver
from rcdopt.subsolvers.directions import knapsack_direction
from rcdopt.subsolvers.knapsack import simplex_projection
from rcdopt.utils.errors import UnsupportedConfigurationError

POWER_ITERATIONS = 30
POWER_SAFETY = 1.01
DIRECTION_TOL = 1e-14


def estimate_smooth_lipschitz(smooth, iterations=POWER_ITERATIONS, safety=POWER_SAFETY):
    """用幂迭代估计Z^T Z的最大特征值，乘以safety，并且不超过||Z||_F^2"""
    n = smooth.dim
    v = np.ones(n) / np.sqrt(max(n, 1))
    est = 0.0
    for _ in range(iterations):
        w = smooth.Z.T @ (smooth.Z @ v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            break
        v = w / est
    frobenius = float(smooth.Z.multiply(smooth.Z).sum())
    return max(min(safety * est, frobenius), 1e-12)


def is_simplex_problem(problem):
    """h是[0, inf)的指示函数且约束为e^T x = 1"""
    h = problem.nonsmooth
    coupling = problem.coupling
    return (coupling.is_single and not h.has_l1 and np.all(h.lo == 0.0) and np.all(np.isinf(h.hi))
            and np.all(coupling.a == 1.0) and coupling.b[0] == 1.0)


class GM(BaseSolver):
    """投影（复合）梯度法

    x+ = argmin_y <grad f(x), y - x> + L_f/2 * ||y - x||^2 + h(y)  s.t. a^T y = b
    Chebyshev问题直接用单纯形投影，其余情况用（两倍规模的）二次背包问题。
    """
    name = 'GM'

    def validate(self, problem):
        if not problem.coupling.is_single:
            raise UnsupportedConfigurationError('GM只支持单个耦合约束')

    def setup(self, problem, state):
        self.lipschitz = estimate_smooth_lipschitz(problem.smooth)
        self.simplex = is_simplex_problem(problem)
        self.all_idx = np.arange(problem.dim)
        logger.info(f'GM步长1/L_f，L_f={self.lipschitz:.6g}，单纯形投影：{self.simplex}')

    def _direction(self, problem, state, g):
        x = state.x
        if self.simplex:
            return simplex_projection(x - g / self.lipschitz) - x
        return knapsack_direction(problem, x, self.all_idx, g, np.full(problem.dim, self.lipschitz))

    def advance(self, problem, state, num_iterations):
        for done in range(num_iterations):
            g = grad_full(problem, state)
            while True:
                d = self._direction(problem, state, g)
                if np.max(np.abs(d), initial=0.0) <= DIRECTION_TOL * (1.0 + np.max(np.abs(state.x), initial=0.0)):
                    return done, True
                # 幂迭代可能低估L_f，沿d的实际曲率更大时放大L_f重新求解
                zd = problem.smooth.residual(d)
                curvature = float(zd @ zd) / float(d @ d)
                if curvature <= self.lipschitz * (1.0 + 1e-12):
                    break
                self.lipschitz = max(2.0 * self.lipschitz, POWER_SAFETY * curvature)
                logger.warning(f'L_f估计偏小，调整为{self.lipschitz:.6g}')
            apply_full_update(problem, state, d)
        return num_iterations, False


def gm_solve(problem, x0, config):
    """投影梯度法：gm_solve(problem, x0, config) -> (x_final, ConvergenceTrace)"""
    return GM(config).solve(problem, x0)
