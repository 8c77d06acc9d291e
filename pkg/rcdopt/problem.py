import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from rcdopt.utils.errors import DimensionError, ConfigError, InvariantError

# 盒约束被破坏时目标函数的取值，比任何有限值都大
INFINITE_OBJECTIVE = math.inf
# 每10*N次块更新从头重算一次残差
REFRESH_FACTOR = 10
LIPSCHITZ_FLOOR = 1e-12


class BlockPartition(object):
    """把n维空间按顺序切分成N个块

    :param sizes: 每个块的维度n_1..n_N
    """

    def __init__(self, sizes):
        sizes = np.asarray(sizes, dtype=np.int64).ravel()
        if sizes.size < 1:
            raise ConfigError('至少需要一个块')
        if np.any(sizes <= 0):
            raise ConfigError(f'块的维度必须为正整数：{sizes.tolist()}')
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @classmethod
    def scalar(cls, n):
        return cls(np.ones(int(n), dtype=np.int64))

    @classmethod
    def uniform(cls, n, block_size):
        """块大小为block_size，最后一个块放剩余的坐标"""
        n, block_size = int(n), int(block_size)
        if block_size <= 0:
            raise ConfigError(f'block_size必须为正：{block_size}')
        sizes = [block_size] * (n // block_size)
        if n % block_size:
            sizes.append(n % block_size)
        return cls(sizes)

    @property
    def num_blocks(self):
        return int(self.sizes.size)

    @property
    def dim(self):
        return int(self.offsets[-1])

    @property
    def is_scalar(self):
        return bool(np.all(self.sizes == 1))

    def block_slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def block_of(self):
        """每个坐标所属的块编号"""
        return np.repeat(np.arange(self.num_blocks), self.sizes)

    def __eq__(self, other):
        return isinstance(other, BlockPartition) and np.array_equal(self.sizes, other.sizes)

    def __repr__(self):
        return f'BlockPartition(N={self.num_blocks}, n={self.dim})'


class StructuredSmooth(object):
    """光滑部分 f(x) = 1/2 x^T Z^T Z x + q^T x，Z按列压缩存储

    :param Z: 稀疏矩阵或者稠密矩阵，形状为(m_rows, n)
    :param q: 长度为n的向量
    """

    def __init__(self, Z, q):
        Z = sparse.csc_matrix(Z, dtype=np.float64)
        Z.sum_duplicates()
        Z.sort_indices()
        q = np.asarray(q, dtype=np.float64).ravel()
        if q.size != Z.shape[1]:
            raise DimensionError(f'q的长度{q.size}与Z的列数{Z.shape[1]}不一致')
        self.Z = Z
        self.q = q

    @property
    def dim(self):
        return int(self.Z.shape[1])

    @property
    def num_rows(self):
        return int(self.Z.shape[0])

    @property
    def column_sparsity(self):
        """平均每列的非零元个数p"""
        return self.Z.nnz / max(self.dim, 1)

    def column_nnz(self):
        return np.diff(self.Z.indptr)

    def column_sq_norms(self):
        return np.asarray(self.Z.multiply(self.Z).sum(axis=0)).ravel()

    def residual(self, x):
        return np.asarray(self.Z @ x).ravel()

    def value(self, x, residual=None):
        r = self.residual(x) if residual is None else residual
        return 0.5 * float(r @ r) + float(self.q @ x)

    def gradient(self, residual):
        return np.asarray(self.Z.T @ residual).ravel() + self.q


class SeparableTerm(object):
    """可分的非光滑部分 h(x) = sum_i lam_i*|x_i| + 1_[lo_i, hi_i](x_i)

    Zero、L1、Box、L1Box四种类型统一用(lam, lo, hi)三个数组表示。
    """

    def __init__(self, lam, lo, hi):
        lam, lo, hi = np.broadcast_arrays(np.asarray(lam, dtype=np.float64),
                                          np.asarray(lo, dtype=np.float64),
                                          np.asarray(hi, dtype=np.float64))
        self.lam = np.array(lam, dtype=np.float64).ravel()
        self.lo = np.array(lo, dtype=np.float64).ravel()
        self.hi = np.array(hi, dtype=np.float64).ravel()
        if np.any(self.lam < 0) or np.any(np.isnan(self.lam)):
            raise ConfigError('lambda必须非负')
        if np.any(self.lo > self.hi):
            raise ConfigError('盒约束要求l <= u')

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def l1(cls, n, lam):
        return cls(np.broadcast_to(lam, (n,)), np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def box(cls, n, lo, hi):
        return cls(np.zeros(n), np.broadcast_to(lo, (n,)), np.broadcast_to(hi, (n,)))

    @classmethod
    def l1_box(cls, n, lam, lo, hi):
        return cls(np.broadcast_to(lam, (n,)), np.broadcast_to(lo, (n,)), np.broadcast_to(hi, (n,)))

    @property
    def dim(self):
        return int(self.lam.size)

    @property
    def has_l1(self):
        return bool(np.any(self.lam > 0))

    @property
    def has_box(self):
        return bool(np.any(np.isfinite(self.lo)) or np.any(np.isfinite(self.hi)))

    def kinds(self):
        """每个坐标的类型：Zero / L1 / Box / L1Box"""
        boxed = np.isfinite(self.lo) | np.isfinite(self.hi)
        l1 = self.lam > 0
        return np.where(l1 & boxed, 'L1Box', np.where(l1, 'L1', np.where(boxed, 'Box', 'Zero')))

    def contains(self, x, idx=None):
        lo = self.lo if idx is None else self.lo[idx]
        hi = self.hi if idx is None else self.hi[idx]
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def value(self, x, idx=None):
        """h在x处的值，idx不为None时只计算这些坐标"""
        lam = self.lam if idx is None else self.lam[idx]
        if not self.contains(x, idx):
            return INFINITE_OBJECTIVE
        return float(np.sum(lam * np.abs(x)))

    def project(self, x, idx=None):
        lo = self.lo if idx is None else self.lo[idx]
        hi = self.hi if idx is None else self.hi[idx]
        return np.minimum(np.maximum(x, lo), hi)


class Coupling(object):
    """线性耦合约束 Ax = b，m = 1时为单约束a^T x = b

    :param A: 形状(m, n)的稠密矩阵，单约束时可以直接传入向量a
    :param b: 长度为m的右端项
    :param kind: 'single'或'general'
    """

    def __init__(self, A, b, kind=None):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(b, dtype=np.float64)).ravel()
        if A.shape[0] != b.size:
            raise DimensionError(f'A的行数{A.shape[0]}与b的长度{b.size}不一致')
        if kind is None:
            kind = 'single' if A.shape[0] == 1 else 'general'
        if kind not in ('single', 'general'):
            raise ConfigError(f'未知的耦合约束类型：{kind}')
        if kind == 'single' and A.shape[0] != 1:
            raise ConfigError('单约束只能有一行')
        if A.shape[0] > A.shape[1]:
            raise ConfigError(f'约束个数m={A.shape[0]}不能大于维度n={A.shape[1]}')
        self.A = A
        self.b = b
        self.kind = kind

    @classmethod
    def single(cls, a, b=0.0):
        return cls(np.asarray(a, dtype=np.float64).reshape(1, -1), [b], kind='single')

    @classmethod
    def general(cls, A, b):
        return cls(A, b, kind='general')

    @property
    def is_single(self):
        return self.kind == 'single'

    @property
    def num_constraints(self):
        return int(self.A.shape[0])

    @property
    def a(self):
        if self.A.shape[0] != 1:
            raise ConfigError('多约束没有向量a')
        return self.A[0]

    def defect(self, x=None, ax=None):
        """可行性误差 |a^T x - b| 或者 ||Ax - b||_inf"""
        ax = self.A @ x if ax is None else ax
        return float(np.max(np.abs(ax - self.b)))

    def scale(self, x):
        """可行性误差的相对尺度 1 + |b| + ||A||*||x||"""
        return 1.0 + float(np.max(np.abs(self.b))) + float(np.linalg.norm(self.A) * np.linalg.norm(x))


def block_lipschitz(smooth, partition, power_iterations=0, seed=0):
    """计算每个块的Lipschitz常数

    标量块取||z_i||^2；多维块取列块的Frobenius范数平方（上界），
    power_iterations>0时用幂迭代收紧为谱范数平方的估计再乘1.01。
    """
    sq = smooth.column_sq_norms()
    lipschitz = np.add.reduceat(sq, partition.offsets[:-1]) if sq.size else np.zeros(partition.num_blocks)
    if power_iterations > 0 and not partition.is_scalar:
        rng = np.random.default_rng(seed)
        for i in np.flatnonzero(partition.sizes > 1):
            block = smooth.Z[:, partition.block_slice(i)]
            v = rng.standard_normal(block.shape[1])
            est = 0.0
            for _ in range(power_iterations):
                w = block.T @ (block @ v)
                est = float(np.linalg.norm(w))
                if est == 0.0:
                    break
                v = w / est
            lipschitz[i] = min(lipschitz[i], 1.01 * est)
    floor = LIPSCHITZ_FLOOR * max(1.0, float(np.max(lipschitz)) if lipschitz.size else 1.0)
    return np.maximum(lipschitz, floor)


@dataclass(frozen=True, eq=False)
class CompositeProblem(object):
    """min f(x) + h(x) s.t. Ax = b

    构造完成后不再修改，可以在多个求解过程中共享。
    """
    smooth: StructuredSmooth
    nonsmooth: SeparableTerm
    coupling: Coupling
    partition: BlockPartition
    lipschitz: np.ndarray = None
    alpha: float = 0.0
    strong_convexity: float = None
    name: str = 'custom'

    def __post_init__(self):
        n = self.smooth.dim
        if self.nonsmooth.dim != n:
            raise DimensionError(f'h的维度{self.nonsmooth.dim}与f的维度{n}不一致')
        if self.coupling.A.shape[1] != n:
            raise DimensionError(f'耦合约束的列数{self.coupling.A.shape[1]}与维度{n}不一致')
        if self.partition.dim != n:
            raise DimensionError(f'块划分的总维度{self.partition.dim}与维度{n}不一致')
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f'alpha必须在[0, 1]之间：{self.alpha}')
        if self.coupling.is_single and self.partition.num_blocks >= 2:
            active = np.add.reduceat(np.abs(self.coupling.a), self.partition.offsets[:-1]) > 0
            if np.count_nonzero(active) < 2:
                raise ConfigError('耦合约束的a至少要在两个块上非零，否则不存在可行的坐标对方向')
        if self.lipschitz is None:
            object.__setattr__(self, 'lipschitz', block_lipschitz(self.smooth, self.partition))
        lipschitz = np.asarray(self.lipschitz, dtype=np.float64).ravel()
        if lipschitz.size != self.partition.num_blocks:
            raise DimensionError('Lipschitz常数的个数必须等于块数N')
        if np.any(lipschitz <= 0):
            raise ConfigError('Lipschitz常数必须为正')
        object.__setattr__(self, 'lipschitz', lipschitz)

    @property
    def dim(self):
        return self.smooth.dim

    @property
    def num_blocks(self):
        return self.partition.num_blocks

    @property
    def max_lipschitz(self):
        return float(np.max(self.lipschitz))

    def with_alpha(self, alpha):
        """返回只修改了alpha的问题"""
        return CompositeProblem(smooth=self.smooth, nonsmooth=self.nonsmooth, coupling=self.coupling,
                                partition=self.partition, lipschitz=self.lipschitz, alpha=float(alpha),
                                strong_convexity=self.strong_convexity, name=self.name)

    def coordinate_lipschitz(self):
        """每个坐标所属块的L_i"""
        return np.repeat(self.lipschitz, self.partition.sizes)

    def pair_lipschitz(self, i, j):
        """L_ij^alpha = L_i^(1-alpha) + L_j^(1-alpha)"""
        return self.lipschitz[i] ** (1.0 - self.alpha) + self.lipschitz[j] ** (1.0 - self.alpha)

    def is_feasible(self, x, tol=1e-9):
        return (self.coupling.defect(x) <= tol * self.coupling.scale(x)
                and self.nonsmooth.contains(x))


@dataclass
class SolverState(object):
    """一次求解过程独占的迭代状态，残差r = Zx随x增量维护"""
    x: np.ndarray
    residual: np.ndarray
    objective: float
    feasibility_defect: float
    coupling_value: np.ndarray
    updates_since_refresh: int = 0
    touches: int = 0
    refreshes: int = 0
    debug: bool = False
    extra: dict = field(default_factory=dict)


def _check_dim(problem, x, name='x'):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != problem.dim:
        raise DimensionError(f'{name}的维度{x.shape}与问题维度{problem.dim}不一致')
    return x


def eval_objective(problem, x):
    """F(x) = f(x) + h(x)，违反盒约束时返回INFINITE_OBJECTIVE"""
    x = _check_dim(problem, x)
    h = problem.nonsmooth.value(x)
    if h == INFINITE_OBJECTIVE:
        return INFINITE_OBJECTIVE
    return problem.smooth.value(x) + h


def build_state(problem, x, debug=False):
    """从x出发计算残差、目标函数值和可行性误差"""
    x = np.array(_check_dim(problem, x), dtype=np.float64)
    residual = problem.smooth.residual(x)
    coupling_value = problem.coupling.A @ x
    state = SolverState(x=x,
                        residual=residual,
                        objective=0.0,
                        feasibility_defect=problem.coupling.defect(ax=coupling_value),
                        coupling_value=coupling_value,
                        debug=debug)
    state.objective = objective_from_residual(problem, state)
    return state


def objective_from_residual(problem, state):
    h = problem.nonsmooth.value(state.x)
    if h == INFINITE_OBJECTIVE:
        return INFINITE_OBJECTIVE
    return 0.5 * float(state.residual @ state.residual) + float(problem.smooth.q @ state.x) + h


def refresh_state(problem, state):
    """从头重算r = Zx，控制浮点误差的累积"""
    state.residual = problem.smooth.residual(state.x)
    state.coupling_value = problem.coupling.A @ state.x
    state.feasibility_defect = problem.coupling.defect(ax=state.coupling_value)
    state.objective = objective_from_residual(problem, state)
    state.updates_since_refresh = 0
    state.refreshes += 1
    return state


def check_residual(problem, state, tol=1e-8):
    exact = problem.smooth.residual(state.x)
    scale = 1.0 + (float(np.max(np.abs(exact))) if exact.size else 0.0)
    err = float(np.max(np.abs(state.residual - exact))) if exact.size else 0.0
    if err > tol * scale:
        raise InvariantError(f'残差已过期：误差{err:.3e}，容许{tol * scale:.3e}')
    return err


def grad_block(problem, state, i):
    """第i个块的偏导数 Z_i^T r + q_i，只访问第i块的列"""
    if state.debug:
        check_residual(problem, state)
    sl = problem.partition.block_slice(i)
    Z = problem.smooth.Z
    start, stop = Z.indptr[sl.start], Z.indptr[sl.stop]
    state.touches += int(stop - start)
    if sl.stop - sl.start == 1:
        rows = Z.indices[start:stop]
        return np.array([Z.data[start:stop] @ state.residual[rows] + problem.smooth.q[sl.start]])
    block = Z[:, sl]
    return np.asarray(block.T @ state.residual).ravel() + problem.smooth.q[sl]


def grad_full(problem, state):
    """完整梯度 Z^T r + q"""
    state.touches += int(problem.smooth.Z.nnz)
    return problem.smooth.gradient(state.residual)


def apply_update(problem, state, blocks, d):
    """x <- x + sum_i U_i d_i，增量更新残差、目标函数值和约束值

    :param blocks: 需要更新的块编号
    :param d: 字典{块编号: 该块的方向向量}
    :return: 更新后的state
    """
    Z = problem.smooth.Z
    h = problem.nonsmooth
    delta = 0.0
    touched = 0
    for i in blocks:
        step = np.asarray(d.get(i, 0.0), dtype=np.float64)
        sl = problem.partition.block_slice(i)
        if step.ndim == 0:
            step = np.full(sl.stop - sl.start, float(step))
        if step.size != sl.stop - sl.start:
            raise DimensionError(f'块{i}的方向维度{step.size}与块维度{sl.stop - sl.start}不一致')
        if not np.any(step):
            continue
        old = state.x[sl].copy()
        # 舍入误差可能让新点越过盒约束一个ulp，这里贴回边界
        new = h.project(old + step, sl)
        step = new - old
        delta += h.value(new, sl) - h.value(old, sl)
        start, stop = Z.indptr[sl.start], Z.indptr[sl.stop]
        block = Z[:, sl]
        zd = np.asarray(block @ step).ravel()
        rows = np.flatnonzero(zd)
        r_old = state.residual[rows]
        r_new = r_old + zd[rows]
        delta += 0.5 * float(r_new @ r_new - r_old @ r_old) + float(problem.smooth.q[sl] @ step)
        state.residual[rows] = r_new
        state.x[sl] = new
        state.coupling_value = state.coupling_value + problem.coupling.A[:, sl] @ step
        touched += int(stop - start)
        state.updates_since_refresh += 1
    state.touches += touched
    state.objective += delta
    state.feasibility_defect = problem.coupling.defect(ax=state.coupling_value)
    if state.updates_since_refresh >= REFRESH_FACTOR * problem.num_blocks:
        refresh_state(problem, state)
    if state.debug:
        check_residual(problem, state)
    return state


def apply_full_update(problem, state, d):
    """x <- x + d，d是稠密的完整方向，用于全梯度类方法"""
    d = _check_dim(problem, d, 'd')
    h = problem.nonsmooth
    new = h.project(state.x + d)
    step = new - state.x
    zd = problem.smooth.residual(step)
    r_new = state.residual + zd
    delta = 0.5 * float(r_new @ r_new - state.residual @ state.residual) + float(problem.smooth.q @ step)
    delta += h.value(new) - h.value(state.x)
    state.x = new
    state.residual = r_new
    state.objective += delta
    state.coupling_value = state.coupling_value + problem.coupling.A @ step
    state.feasibility_defect = problem.coupling.defect(ax=state.coupling_value)
    state.touches += int(problem.smooth.Z.nnz)
    state.updates_since_refresh += problem.num_blocks
    if state.updates_since_refresh >= REFRESH_FACTOR * problem.num_blocks:
        refresh_state(problem, state)
    if state.debug:
        check_residual(problem, state)
    return state


def alpha_norm(problem, x):
    """||x||_alpha = (sum_i L_i^alpha ||x_i||^2)^(1/2)"""
    x = _check_dim(problem, x)
    weights = problem.coordinate_lipschitz() ** problem.alpha
    return float(np.sqrt(np.sum(weights * x * x)))


def alpha_dual_norm(problem, y):
    """||y||_alpha^* = (sum_i L_i^(-alpha) ||y_i||^2)^(1/2)"""
    y = _check_dim(problem, y, 'y')
    weights = problem.coordinate_lipschitz() ** (-problem.alpha)
    return float(np.sqrt(np.sum(weights * y * y)))


def estimate_level_radius(problem, x0, x_best):
    """R_alpha的诊断估计：x0到目前最好解的alpha范数距离"""
    return alpha_norm(problem, np.asarray(x0) - np.asarray(x_best))
