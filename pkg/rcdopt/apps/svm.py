from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy import sparse

from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem, \
    block_lipschitz
from rcdopt.utils.errors import ConfigError, DimensionError
from rcdopt.utils.rng import make_generator, GENERATOR_STREAM


@dataclass
class SvmInstance(object):
    """线性SVM的数据：Z的每一列是一个样本，labels为+1/-1"""
    Z: sparse.csc_matrix
    labels: np.ndarray
    C: float = 1.0
    relabeled: int = 0
    source: str = None

    def __post_init__(self):
        self.Z = sparse.csc_matrix(self.Z, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if self.labels.size != self.Z.shape[1]:
            raise DimensionError(f'标签个数{self.labels.size}与样本数{self.Z.shape[1]}不一致')
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ConfigError('SVM的标签只能是+1或-1')
        if not self.C > 0:
            raise ConfigError(f'惩罚参数C必须为正：{self.C}')

    @property
    def n(self):
        return int(self.Z.shape[1])

    @property
    def m_dim(self):
        return int(self.Z.shape[0])

    @property
    def sparsity(self):
        return self.Z.nnz / max(self.n, 1)


def build_svm(instance, block_size=None, power_iterations=0):
    """线性SVM对偶问题

    min 1/2 x^T Z^T Z x - e^T x + 1_[0, C](x)  s.t. a^T x = 0

    其中Z的第i列为a_i * z_i。初始点x0 = 0可行。
    :param instance: SvmInstance
    :param block_size: 块大小，为None时每个坐标一个块
    :param power_iterations: 多维块用幂迭代收紧Lipschitz常数的次数
    :return: (CompositeProblem, x0)
    """
    n = instance.n
    Z = instance.Z @ sparse.diags(instance.labels)
    smooth = StructuredSmooth(Z, -np.ones(n))
    partition = BlockPartition.scalar(n) if block_size in (None, 1) else BlockPartition.uniform(n, block_size)
    problem = CompositeProblem(smooth=smooth,
                               nonsmooth=SeparableTerm.box(n, 0.0, instance.C),
                               coupling=Coupling.single(instance.labels, 0.0),
                               partition=partition,
                               lipschitz=block_lipschitz(smooth, partition, power_iterations=power_iterations),
                               name='svm')
    logger.info(f'SVM对偶问题：n={n}，N={partition.num_blocks}，C={instance.C}，L={problem.max_lipschitz:.4g}')
    return problem, np.zeros(n)


def generate_sparse_svm(n, m_dim, p, seed=0, C=1.0):
    """随机稀疏SVM数据：每列约p个[0, 1]均匀分布的非零元，标签由随机超平面决定

    :param n: 样本数
    :param m_dim: 特征数
    :param p: 平均每列非零元个数
    :param seed: 随机种子
    :return: SvmInstance
    """
    if not 1 <= p <= m_dim:
        raise ConfigError(f'p必须在[1, m_dim]之间：{p}')
    rng = make_generator(seed, GENERATOR_STREAM)
    rows = rng.integers(0, m_dim, size=(n, int(p))).ravel()
    cols = np.repeat(np.arange(n), int(p))
    vals = rng.uniform(0.0, 1.0, size=rows.size)
    Z = sparse.csc_matrix((vals, (rows, cols)), shape=(m_dim, n))
    Z.sum_duplicates()
    w = rng.uniform(-1.0, 1.0, size=m_dim)
    score = np.asarray(Z.T @ w).ravel()
    labels = np.where(score > np.median(score), 1.0, -1.0)
    return SvmInstance(Z=Z, labels=labels, C=C, source=f'random(n={n}, m={m_dim}, p={p}, seed={seed})')
