import itertools

import numpy as np
import pytest
from loguru import logger
from scipy import sparse

from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem


@pytest.fixture(autouse=True)
def quiet_logger():
    """测试时只保留WARNING以上的日志"""
    import sys
    logger.remove()
    logger.add(sys.stderr, level='WARNING')
    yield
    # 被测代码可能已经重新设置过日志输出
    logger.remove()


def random_problem(n=8, m_rows=5, kind='box', seed=0, density=0.6, block_size=None, alpha=0.0):
    """小规模随机问题和一个可行的初始点

    :param kind: zero / l1 / box / l1_box
    """
    rng = np.random.default_rng(seed)
    Z = sparse.random(m_rows, n, density=density, format='csc', random_state=rng)
    q = rng.standard_normal(n)
    if kind == 'zero':
        h = SeparableTerm.zero(n)
    elif kind == 'l1':
        h = SeparableTerm.l1(n, 0.5)
    elif kind == 'box':
        h = SeparableTerm.box(n, -1.0, 1.0)
    else:
        h = SeparableTerm.l1_box(n, 0.5, -1.0, 1.0)
    a = rng.uniform(0.5, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    x0 = rng.uniform(-0.5, 0.5, size=n)
    partition = BlockPartition.scalar(n) if block_size is None else BlockPartition.uniform(n, block_size)
    problem = CompositeProblem(smooth=StructuredSmooth(Z, q), nonsmooth=h,
                               coupling=Coupling.single(a, float(a @ x0)),
                               partition=partition, alpha=alpha, name=kind)
    return problem, x0


def dense_objective(problem, x):
    Z = problem.smooth.Z.toarray()
    h = problem.nonsmooth
    if np.any(x < h.lo) or np.any(x > h.hi):
        return np.inf
    return 0.5 * x @ Z.T @ Z @ x + problem.smooth.q @ x + float(np.sum(h.lam * np.abs(x)))


def enumerate_separable_qp(g, L, a, b, lo, hi, lam=None, x=None, tol=1e-9):
    """穷举每个坐标的状态求解

    min <g, s> + 1/2*sum L s^2 + sum lam*|x + s|  s.t. a^T s = b, lo <= x + s <= hi

    lam = 0时每个坐标有三种状态（下界、上界、自由），否则再加上x + s = 0以及
    自由区间的两种符号，共五种，每种组合下乘子由等式约束唯一确定。
    """
    g, L, a = (np.asarray(v, dtype=np.float64) for v in (g, L, a))
    d = g.size
    L = np.broadcast_to(L, (d,))
    lam = np.zeros(d) if lam is None else np.broadcast_to(np.asarray(lam, dtype=np.float64), (d,))
    x = np.zeros(d) if x is None else np.asarray(x, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (d,))
    states = ('lo', 'hi', 'free') if not np.any(lam > 0) else ('lo', 'hi', 'zero', 'pos', 'neg')

    def objective(s):
        return float(g @ s + 0.5 * np.sum(L * s * s) + np.sum(lam * np.abs(x + s)))

    best_s, best_val = None, np.inf
    for pattern in itertools.product(states, repeat=d):
        s = np.zeros(d)
        free = np.zeros(d, dtype=bool)
        c = np.zeros(d)
        ok = True
        for k, state in enumerate(pattern):
            if state == 'lo':
                ok &= bool(np.isfinite(lo[k]))
                s[k] = lo[k] - x[k] if np.isfinite(lo[k]) else 0.0
            elif state == 'hi':
                ok &= bool(np.isfinite(hi[k]))
                s[k] = hi[k] - x[k] if np.isfinite(hi[k]) else 0.0
            elif state == 'zero':
                s[k] = -x[k]
            else:
                free[k] = True
                shift = lam[k] if state == 'pos' else (-lam[k] if state == 'neg' else 0.0)
                c[k] = (-g[k] - shift) / L[k]
        if not ok:
            continue
        weight = float(np.sum(a[free] ** 2 / L[free]))
        fixed_part = float(a[~free] @ s[~free])
        if weight > 0:
            mu = (float(a[free] @ c[free]) + fixed_part - b) / weight
        else:
            mu = 0.0
        s[free] = c[free] - mu * a[free] / L[free]
        y = x + s
        if abs(float(a @ s) - b) > tol * (1.0 + abs(b)):
            continue
        if np.any(y < lo - tol) or np.any(y > hi + tol):
            continue
        signs_ok = all((pattern[k] != 'pos' or y[k] >= -tol) and (pattern[k] != 'neg' or y[k] <= tol)
                       for k in range(d))
        if not signs_ok:
            continue
        value = objective(s)
        if value < best_val:
            best_s, best_val = s, value
    return best_s, best_val


def ternary_minimize(phi, t_lo, t_hi, iterations=300):
    """凸函数在[t_lo, t_hi]上的三分搜索"""
    for _ in range(iterations):
        m1 = t_lo + (t_hi - t_lo) / 3.0
        m2 = t_hi - (t_hi - t_lo) / 3.0
        if phi(m1) <= phi(m2):
            t_hi = m2
        else:
            t_lo = m1
    t = 0.5 * (t_lo + t_hi)
    return t, phi(t)


def enclosing_ball_oracle(points):
    """穷举2到d+1个点的外接球，取包含所有点的最小球，返回(球心, 半径)"""
    m_dim, n = points.shape
    best_center, best_radius = points[:, 0].copy(), np.inf
    if n == 1:
        return best_center, 0.0
    for size in range(2, min(m_dim + 1, n) + 1):
        for subset in itertools.combinations(range(n), size):
            p0 = points[:, subset[0]]
            D = np.array([points[:, k] - p0 for k in subset[1:]])
            gram = D @ D.T
            if abs(np.linalg.det(gram)) < 1e-12:
                continue
            lam = np.linalg.solve(2.0 * gram, np.diag(gram))
            center = p0 + D.T @ lam
            radius = float(np.linalg.norm(center - p0))
            if radius >= best_radius:
                continue
            if np.all(np.linalg.norm(points - center[:, None], axis=0) <= radius * (1 + 1e-9) + 1e-12):
                best_center, best_radius = center, radius
    return best_center, best_radius


@pytest.fixture
def hand_problem():
    """min 1/2 (x1^2 + x2^2)  s.t. x1 + x2 = 1，最优解(0.5, 0.5)"""
    problem = CompositeProblem(smooth=StructuredSmooth(np.eye(2), np.zeros(2)),
                               nonsmooth=SeparableTerm.zero(2),
                               coupling=Coupling.single(np.ones(2), 1.0),
                               partition=BlockPartition.scalar(2),
                               name='hand')
    return problem, np.array([1.0, 0.0])
