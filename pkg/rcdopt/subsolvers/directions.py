import numpy as np
from scipy.linalg import null_space

from rcdopt.problem import grad_block
from rcdopt.subsolvers.knapsack import quadratic_knapsack, split_l1_knapsack
from rcdopt.subsolvers.pw1d import PiecewiseQuadratic1D, Term, pw1d_minimize
from rcdopt.utils.errors import UnsupportedConfigurationError, ConfigError, DimensionError


def pair_curvature(problem, i, j):
    """两块模型的逐坐标曲率 L_ij^alpha * L_i^alpha 和 L_ij^alpha * L_j^alpha"""
    lij = problem.pair_lipschitz(i, j)
    alpha = problem.alpha
    ni = problem.partition.sizes[i]
    nj = problem.partition.sizes[j]
    return np.concatenate([np.full(ni, lij * problem.lipschitz[i] ** alpha),
                           np.full(nj, lij * problem.lipschitz[j] ** alpha)])


def _terms(h, idx, x, v):
    return [Term(v=float(v[k]), u=float(x[c]), lam=float(h.lam[c]), lo=float(h.lo[c]), hi=float(h.hi[c]))
            for k, c in enumerate(idx)]


def line_direction(problem, x, idx, g, v, c2):
    """沿方向v的精确一维搜索：min_t t*<g, v> + 1/2*c2*t^2 + h(x + t*v)

    :param idx: v对应的坐标
    :return: t*v
    """
    v = np.asarray(v, dtype=np.float64)
    phi = PiecewiseQuadratic1D(c2=float(c2), c1=float(np.dot(g, v)), terms=_terms(problem.nonsmooth, idx, x, v))
    t, _ = pw1d_minimize(phi)
    return t * v


def coordinate_step(problem, x, k, g_k, curvature):
    """单个坐标的精确步长：min_t g_k*t + 1/2*curvature*t^2 + h_k(x_k + t)"""
    return float(line_direction(problem, x, [k], [g_k], [1.0], curvature)[0])


def knapsack_direction(problem, x, idx, g, curvature, rhs=0.0):
    """在坐标idx上求解 min <g, s> + 1/2*sum c_k s_k^2 + h(x + s) s.t. a^T s = rhs

    没有l1项时直接是二次背包问题，有l1项时转化成两倍规模的背包问题。
    """
    h = problem.nonsmooth
    a = problem.coupling.a[idx]
    xs = x[idx]
    if h.has_l1 and np.any(h.lam[idx] > 0):
        return split_l1_knapsack(g, curvature, a, rhs, h.lam[idx], h.lo[idx], h.hi[idx], xs)
    return quadratic_knapsack(g, curvature, a, rhs, h.lo[idx] - xs, h.hi[idx] - xs)


def two_block_direction(problem, state, i, j, g=None, curvature=None):
    """随机选中的两个块(i, j)上的精确方向

    min <grad_ij f(x), s> + L_ij^alpha / 2 * ||s||_alpha^2 + h(x + s)
    s.t. a_i^T s_i + a_j^T s_j = 0

    标量块时约束是一条直线s = t*(a_j, -a_i)，化为一维问题；多维块用二次背包问题求解。
    :param g: 已经计算好的(grad_i, grad_j)拼接，为None时从残差计算
    :param curvature: 逐坐标曲率，默认使用pair_curvature
    :return: (d_i, d_j)
    """
    if i == j:
        raise ConfigError('两块方向需要两个不同的块')
    if not problem.coupling.is_single:
        raise UnsupportedConfigurationError('两块方向只适用于单约束')
    part = problem.partition
    si, sj = part.block_slice(i), part.block_slice(j)
    idx = np.r_[si, sj]
    ni = si.stop - si.start
    if g is None:
        g = np.concatenate([grad_block(problem, state, i), grad_block(problem, state, j)])
    g = np.asarray(g, dtype=np.float64)
    c = pair_curvature(problem, i, j) if curvature is None else np.asarray(curvature, dtype=np.float64)
    if g.size != idx.size or c.size != idx.size:
        raise DimensionError('梯度或曲率的维度与两个块的维度不一致')
    x = state.x
    if idx.size == 2:
        a = problem.coupling.a[idx]
        if a[0] == 0.0 and a[1] == 0.0:
            d = np.array([coordinate_step(problem, x, idx[0], g[0], c[0]),
                          coordinate_step(problem, x, idx[1], g[1], c[1])])
        else:
            v = np.array([a[1], -a[0]])
            v /= np.linalg.norm(v)
            d = line_direction(problem, x, idx, g, v, c[0] * v[0] ** 2 + c[1] * v[1] ** 2)
    else:
        d = knapsack_direction(problem, x, idx, g, c)
    return d[:ni], d[ni:]


def tuple_direction(problem, state, blocks, g=None):
    """(m+1)个标量块上的方向：A_T s = 0，s在元组外为0

    A限制到元组的列后零空间为一维时沿基向量v做一维精确搜索，曲率为
    L_N = sum L_i；零空间为零维时返回零方向；维数大于1时返回None，由调用方重新抽样。
    """
    part = problem.partition
    blocks = np.asarray(blocks, dtype=np.int64)
    A = problem.coupling.A
    if blocks.size != A.shape[0] + 1:
        raise DimensionError(f'元组大小{blocks.size}必须等于m+1={A.shape[0] + 1}')
    if np.any(part.sizes[blocks] != 1):
        raise UnsupportedConfigurationError('(m+1)块方向只支持标量块')
    idx = part.offsets[blocks]
    if g is None:
        g = np.array([grad_block(problem, state, int(b))[0] for b in blocks])
    basis = null_space(A[:, idx])
    if basis.shape[1] == 0:
        return np.zeros(blocks.size)
    if basis.shape[1] > 1:
        return None
    v = basis[:, 0]
    lead = v[np.flatnonzero(v)[0]]
    v = v / np.linalg.norm(v) * np.sign(lead)
    lipschitz_sum = float(np.sum(problem.lipschitz[blocks]))
    return line_direction(problem, state.x, idx, g, v, lipschitz_sum * float(v @ v))


def model_value(problem, x, idx, g, curvature, d):
    """子问题目标函数 <g, d> + 1/2*sum c_k d_k^2 + h(x + d) - h(x)，用于检查模型下降"""
    h = problem.nonsmooth
    d = np.asarray(d, dtype=np.float64)
    new = h.value(x[idx] + d, idx)
    if not np.isfinite(new):
        return np.inf
    return float(np.dot(g, d) + 0.5 * np.sum(curvature * d * d) + new - h.value(x[idx], idx))
