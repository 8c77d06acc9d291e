from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy import sparse

from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem
from rcdopt.utils.errors import DimensionError, NonConvergedError, ConfigError
from rcdopt.utils.rng import make_generator, GENERATOR_STREAM

# 半径平方的负值在此相对误差内视为舍入误差
RADICAND_TOL = 1e-10


@dataclass
class ChebyshevInstance(object):
    """点集z_1..z_n，按列存放在形状(m_dim, n)的矩阵中"""
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise DimensionError(f'points的形状必须是(m_dim, n)，n >= 1：{points.shape}')
        self.points = points

    @property
    def n(self):
        return int(self.points.shape[1])

    @property
    def m_dim(self):
        return int(self.points.shape[0])

    def squared_norms(self):
        return np.sum(self.points ** 2, axis=0)


@dataclass
class BallSolution(object):
    center: np.ndarray
    radius: float

    def distances(self, points):
        return np.linalg.norm(np.asarray(points) - self.center.reshape(-1, 1), axis=0)

    def contains(self, points, tol=1e-6):
        scale = 1.0 + self.radius
        return bool(np.all(self.distances(points) <= self.radius + tol * scale))


def initial_point(n, kind='uniform'):
    """可选的初始点：zero为0，e1为第一个单位向量，uniform为e/n"""
    if kind == 'zero':
        return np.zeros(n)
    if kind == 'e1':
        x0 = np.zeros(n)
        x0[0] = 1.0
        return x0
    if kind == 'uniform':
        return np.full(n, 1.0 / n)
    raise ConfigError(f'未知的初始点：{kind}，可选值有：zero, e1, uniform')


def build_chebyshev(points, x0='uniform'):
    """最小包围球（Chebyshev中心）的对偶问题

    min ||Px||^2 - sum_i ||z_i||^2 x_i + 1_[0, inf)(x)  s.t. e^T x = 1

    光滑部分写成1/2 x^T Z^T Z x + q^T x，Z = sqrt(2) * P，q_i = -||z_i||^2。
    :param points: ChebyshevInstance或形状(m_dim, n)的点集
    :param x0: 'e1'或者'uniform'
    :return: (CompositeProblem, x0)
    """
    instance = points if isinstance(points, ChebyshevInstance) else ChebyshevInstance(points)
    n = instance.n
    smooth = StructuredSmooth(sparse.csc_matrix(np.sqrt(2.0) * instance.points), -instance.squared_norms())
    problem = CompositeProblem(smooth=smooth,
                               nonsmooth=SeparableTerm.box(n, 0.0, np.inf),
                               coupling=Coupling.single(np.ones(n), 1.0),
                               partition=BlockPartition.scalar(n),
                               name='chebyshev')
    logger.info(f'Chebyshev问题：n={n}个点，维度m={instance.m_dim}，初始点：{x0}')
    return problem, initial_point(n, x0)


def recover_ball(instance, x):
    """由对偶解恢复球心z_c = Px和半径r = (-||Px||^2 + sum_i ||z_i||^2 x_i)^(1/2)"""
    instance = instance if isinstance(instance, ChebyshevInstance) else ChebyshevInstance(instance)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != instance.n:
        raise DimensionError(f'x的长度{x.size}与点数{instance.n}不一致')
    if abs(float(np.sum(x)) - 1.0) > 1e-6 or np.any(x < -1e-12):
        logger.warning('x不在单纯形上，恢复的球可能不准确')
    center = instance.points @ x
    weighted = float(instance.squared_norms() @ x)
    radicand = weighted - float(center @ center)
    if radicand < 0:
        if radicand < -RADICAND_TOL * (1.0 + abs(weighted)):
            raise NonConvergedError(f'半径平方为负：{radicand:.3e}，对偶解可能还没有收敛')
        radicand = 0.0
    return BallSolution(center=center, radius=float(np.sqrt(radicand)))


def random_points(n, m_dim, seed=0):
    """[0, 1]^m_dim内均匀分布的n个点"""
    rng = make_generator(seed, GENERATOR_STREAM)
    return ChebyshevInstance(rng.uniform(0.0, 1.0, size=(m_dim, n)))
