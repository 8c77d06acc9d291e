import numpy as np
from loguru import logger
from scipy import sparse

from rcdopt.apps.chebyshev import initial_point
from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem
from rcdopt.utils.errors import ConfigError
from rcdopt.utils.rng import make_generator, GENERATOR_STREAM


def build_l1_random(n, m_dim, lam, seed=0, x0='uniform'):
    """带l1正则和盒约束的随机二次问题

    min 1/2 x^T Z^T Z x + q^T x + lam * ||x||_1 + 1_[-1, 1](x)  s.t. e^T x = 1

    Z和q的元素在[0, 1]上独立均匀分布。lam = 0时h退化为纯盒约束。
    :param n: 变量维度
    :param m_dim: Z的行数
    :param lam: l1正则系数，非负
    :param seed: 随机种子
    :param x0: 'e1'或者'uniform'
    :return: (CompositeProblem, x0)
    """
    if not lam >= 0:
        raise ConfigError(f'lam必须非负：{lam}')
    if n < 1 or m_dim < 1:
        raise ConfigError(f'n和m_dim必须为正：n={n}，m_dim={m_dim}')
    rng = make_generator(seed, GENERATOR_STREAM)
    Z = rng.uniform(0.0, 1.0, size=(m_dim, n))
    q = rng.uniform(0.0, 1.0, size=n)
    problem = CompositeProblem(smooth=StructuredSmooth(sparse.csc_matrix(Z), q),
                               nonsmooth=SeparableTerm.l1_box(n, float(lam), -1.0, 1.0),
                               coupling=Coupling.single(np.ones(n), 1.0),
                               partition=BlockPartition.scalar(n),
                               name='l1')
    logger.info(f'l1正则问题：n={n}，m={m_dim}，lam={lam}，seed={seed}，初始点：{x0}')
    return problem, initial_point(n, x0)


def count_nonzeros(x, tol=1e-6):
    """|x_i| > tol的坐标个数"""
    return int(np.sum(np.abs(np.asarray(x)) > tol))
