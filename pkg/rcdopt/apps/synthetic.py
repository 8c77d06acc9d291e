import os

import numpy as np
from loguru import logger
from scipy import sparse

from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem, \
    eval_objective
from rcdopt.utils.errors import ConfigError, DatasetParseError, UnsupportedConfigurationError
from rcdopt.utils.rng import make_generator, GENERATOR_STREAM


def _random_coupling(rng, n, num_constraints):
    if num_constraints == 1:
        return Coupling.single(np.ones(n), 0.0)
    A = rng.standard_normal((num_constraints, n))
    return Coupling.general(A, np.zeros(num_constraints))


def build_random_qp(n, m_rows=None, density=0.1, seed=0, num_constraints=1):
    """秩亏的随机稀疏二次问题，用于验证非强凸情形的次线性收敛

    Z为m_rows x n的稀疏矩阵（m_rows < n时Z^T Z奇异），非零元在[0, 1]上均匀分布，
    q为标准正态分布，h为[-1, 1]上的盒约束。num_constraints=1时约束为e^T x = 0，
    否则A为随机高斯矩阵，b = 0。x0 = 0可行。
    :return: (CompositeProblem, x0)
    """
    m_rows = n // 2 if m_rows is None else int(m_rows)
    if n < 2 or m_rows < 1:
        raise ConfigError(f'n必须不小于2，m_rows必须为正：n={n}，m_rows={m_rows}')
    if not 0 < density <= 1:
        raise ConfigError(f'density必须在(0, 1]之间：{density}')
    rng = make_generator(seed, GENERATOR_STREAM)
    Z = sparse.random(m_rows, n, density=density, format='csc', random_state=rng,
                      data_rvs=lambda size: rng.uniform(0.0, 1.0, size=size))
    q = rng.standard_normal(n)
    problem = CompositeProblem(smooth=StructuredSmooth(Z, q),
                               nonsmooth=SeparableTerm.box(n, -1.0, 1.0),
                               coupling=_random_coupling(rng, n, int(num_constraints)),
                               partition=BlockPartition.scalar(n),
                               name='random_qp')
    logger.info(f'随机二次问题：n={n}，m_rows={m_rows}，density={density}，非零元{Z.nnz}个，seed={seed}')
    return problem, np.zeros(n)


def build_graded_qp(n, rank=None, cond=1e6, seed=0):
    """秩亏的稠密二次问题，h = 0，用于观察O(1/k)的期望间隙

    Z = diag(s) V^T，V为n x rank的随机正交矩阵，Z^T Z的非零特征值s_j^2在[1/cond, 1]上按对数均匀分布，
    其余n - rank个特征值为0。q = -Z^T c，c_j = ±s_j，使x0 - x*在每个特征方向上的分量都是±1，
    此时f* = -||c||^2 / 2。约束为e^T x = 0，x0 = 0可行。
    :return: (CompositeProblem, x0)
    """
    rank = n // 2 if rank is None else int(rank)
    if n < 2 or not 1 <= rank < n:
        raise ConfigError(f'rank必须在[1, n)之间：n={n}，rank={rank}')
    if not cond > 1:
        raise ConfigError(f'cond必须大于1：{cond}')
    rng = make_generator(seed, GENERATOR_STREAM)
    V, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    s = np.sqrt(float(cond) ** (-np.arange(rank) / max(rank - 1, 1)))
    Z = sparse.csc_matrix(s[:, None] * V.T)
    c = s * rng.choice([-1.0, 1.0], size=rank)
    problem = CompositeProblem(smooth=StructuredSmooth(Z, -(Z.T @ c)),
                               nonsmooth=SeparableTerm.zero(n),
                               coupling=_random_coupling(rng, n, 1),
                               partition=BlockPartition.scalar(n),
                               name='graded_qp')
    logger.info(f'特征值分级的二次问题：n={n}，rank={rank}，cond={cond:.3g}，seed={seed}')
    return problem, np.zeros(n)


def build_strongly_convex_qp(n, seed=0, perturbation=0.1, num_constraints=1):
    """强凸的随机二次问题，h = 0，用于验证线性收敛

    Z = diag(d) + E，d在[1, 2]上均匀分布，E为每列约一个非零元的小扰动。
    耦合约束的系数a在[0.5, 1.5]上均匀分布，b = 0，x0 = 0可行。
    strong_convexity记录Z^T Z的最小特征值（欧氏范数下的强凸参数）。
    """
    if n < 2:
        raise ConfigError(f'n必须不小于2：{n}')
    rng = make_generator(seed, GENERATOR_STREAM)
    diag = rng.uniform(1.0, 2.0, size=n)
    rows = rng.integers(0, n, size=n)
    E = sparse.csc_matrix((rng.uniform(-perturbation, perturbation, size=n), (rows, np.arange(n))), shape=(n, n))
    Z = sparse.diags(diag, format='csc') + E
    q = rng.standard_normal(n)
    if num_constraints == 1:
        coupling = Coupling.single(rng.uniform(0.5, 1.5, size=n), 0.0)
    else:
        coupling = _random_coupling(rng, n, int(num_constraints))
    singular = np.linalg.svd(Z.toarray(), compute_uv=False)
    sigma = float(singular[-1] ** 2)
    problem = CompositeProblem(smooth=StructuredSmooth(Z, q),
                               nonsmooth=SeparableTerm.zero(n),
                               coupling=coupling,
                               partition=BlockPartition.scalar(n),
                               strong_convexity=sigma,
                               name='strong_qp')
    logger.info(f'强凸二次问题：n={n}，sigma={sigma:.4g}，L={problem.max_lipschitz:.4g}，seed={seed}')
    return problem, np.zeros(n)


def solve_equality_qp(problem):
    """h = 0时用稠密KKT方程求精确解

    [Z^T Z  A^T] [x ]   [-q]
    [A      0  ] [mu] = [ b]
    :return: (x*, F*)
    """
    if problem.nonsmooth.has_l1 or problem.nonsmooth.has_box:
        raise UnsupportedConfigurationError('KKT参考解只支持h = 0的问题')
    Z = problem.smooth.Z.toarray()
    A = problem.coupling.A
    n, m = problem.dim, problem.coupling.num_constraints
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = Z.T @ Z
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.concatenate([-problem.smooth.q, problem.coupling.b])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    x = sol[:n]
    return x, eval_objective(problem, x)


def save_problem(path, problem, x0=None):
    """把问题保存为npz文件，可以用custom类型重新读取"""
    Z = problem.smooth.Z
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    arrays = dict(Z_data=Z.data, Z_indices=Z.indices, Z_indptr=Z.indptr, Z_shape=np.asarray(Z.shape),
                  q=problem.smooth.q, A=problem.coupling.A, b=problem.coupling.b,
                  lam=problem.nonsmooth.lam, lo=problem.nonsmooth.lo, hi=problem.nonsmooth.hi,
                  block_sizes=problem.partition.sizes, name=np.asarray(problem.name))
    if x0 is not None:
        arrays['x0'] = np.asarray(x0, dtype=np.float64)
    np.savez(path, **arrays)
    logger.info(f'问题已保存：{path}')


def load_problem(path):
    """读取save_problem保存的npz文件

    :return: (CompositeProblem, x0)，文件中没有x0时x0为None
    """
    if not os.path.exists(path):
        raise DatasetParseError(f'问题文件不存在：{path}', path=path)
    with np.load(path, allow_pickle=False) as data:
        required = ('Z_data', 'Z_indices', 'Z_indptr', 'Z_shape', 'q', 'A', 'b', 'lam', 'lo', 'hi')
        missing = [k for k in required if k not in data.files]
        if missing:
            raise DatasetParseError(f'问题文件缺少字段：{missing}', path=path)
        Z = sparse.csc_matrix((data['Z_data'], data['Z_indices'], data['Z_indptr']),
                              shape=tuple(int(s) for s in data['Z_shape']))
        n = Z.shape[1]
        sizes = data['block_sizes'] if 'block_sizes' in data.files else np.ones(n, dtype=np.int64)
        A = data['A']
        coupling = Coupling.single(A[0], float(data['b'][0])) if A.shape[0] == 1 else Coupling.general(A, data['b'])
        name = str(data['name']) if 'name' in data.files else 'custom'
        problem = CompositeProblem(smooth=StructuredSmooth(Z, data['q']),
                                   nonsmooth=SeparableTerm(data['lam'], data['lo'], data['hi']),
                                   coupling=coupling,
                                   partition=BlockPartition(sizes),
                                   name=name)
        x0 = np.array(data['x0']) if 'x0' in data.files else None
    logger.info(f'读取问题：{path}，n={problem.dim}，N={problem.num_blocks}，m={coupling.num_constraints}')
    return problem, x0
