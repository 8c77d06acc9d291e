import numpy as np

from rcdopt.utils.errors import InfeasibleError, DimensionError, ConfigError

# 可行性判定的相对容差
_FEAS_TOL = 1e-12
# 乘子精修的次数
_REFINE_STEPS = 2


def _prepare(g, L, a, lo, hi):
    g = np.asarray(g, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64).ravel()
    d = g.size
    L = np.broadcast_to(np.asarray(L, dtype=np.float64), (d,)).astype(np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (d,)).astype(np.float64)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (d,)).astype(np.float64)
    if a.size != d:
        raise DimensionError(f'a的长度{a.size}与g的长度{d}不一致')
    if np.any(L <= 0):
        raise ConfigError('二次项系数L必须为正')
    if np.any(lo > hi):
        raise ConfigError('盒约束要求lo <= hi')
    return g, L, a, lo, hi


def _clip_at(mu, g, L, a, lo, hi):
    return np.minimum(np.maximum((-g - mu * a) / L, lo), hi)


def _psi(mu, g, L, a, lo, hi):
    """psi(mu) = a^T s(mu)，关于mu单调不增"""
    return float(a @ _clip_at(mu, g, L, a, lo, hi))


def _free_slope(mu, g, L, a, lo, hi):
    raw = (-g - mu * a) / L
    free = (raw > lo) & (raw < hi) & (a != 0)
    return -float(np.sum(a[free] ** 2 / L[free]))


def _psi_limits(a, lo, hi):
    """mu趋于+inf和-inf时psi的极限"""
    with np.errstate(invalid='ignore'):
        low_end = np.where(a > 0, a * lo, np.where(a < 0, a * hi, 0.0))
        high_end = np.where(a > 0, a * hi, np.where(a < 0, a * lo, 0.0))
    return float(np.sum(low_end)), float(np.sum(high_end))


def _breakpoints(g, L, a, lo, hi):
    nz = a != 0
    with np.errstate(invalid='ignore', divide='ignore'):
        bp_lo = (-g[nz] - L[nz] * lo[nz]) / a[nz]
        bp_hi = (-g[nz] - L[nz] * hi[nz]) / a[nz]
    bps = np.concatenate([bp_lo, bp_hi])
    return np.unique(bps[np.isfinite(bps)])


def _solve_multiplier(g, L, a, b, lo, hi):
    bps = _breakpoints(g, L, a, lo, hi)
    if bps.size == 0:
        slope = _free_slope(0.0, g, L, a, lo, hi)
        value = _psi(0.0, g, L, a, lo, hi)
        return 0.0 if slope == 0.0 else (b - value) / slope
    first = _psi(bps[0], g, L, a, lo, hi)
    if b >= first:
        slope = _free_slope(bps[0] - 1.0, g, L, a, lo, hi)
        return float(bps[0]) if slope == 0.0 else float(bps[0] + (b - first) / slope)
    last = _psi(bps[-1], g, L, a, lo, hi)
    if b <= last:
        slope = _free_slope(bps[-1] + 1.0, g, L, a, lo, hi)
        return float(bps[-1]) if slope == 0.0 else float(bps[-1] + (b - last) / slope)
    # 二分查找区间[bps[k], bps[k+1]]，使psi(bps[k]) >= b > psi(bps[k+1])
    left, right = 0, bps.size - 1
    psi_left, psi_right = first, last
    while right - left > 1:
        mid = (left + right) // 2
        value = _psi(bps[mid], g, L, a, lo, hi)
        if value >= b:
            left, psi_left = mid, value
        else:
            right, psi_right = mid, value
    if psi_left == psi_right:
        return float(bps[left])
    ratio = (psi_left - b) / (psi_left - psi_right)
    return float(bps[left] + ratio * (bps[right] - bps[left]))


def quadratic_knapsack(g, L, a, b, lo, hi, return_multiplier=False):
    """连续二次背包问题

    min <g, s> + 1/2 * sum_i L_i * s_i^2  s.t.  a^T s = b, lo <= s <= hi

    对偶乘子mu满足s(mu) = clip((-g - mu*a) / L, lo, hi)且a^T s(mu) = b，
    对断点排序后二分查找，在区间内线性插值得到mu。
    :param g: 线性项
    :param L: 正的二次项系数，标量或向量
    :param a: 约束向量
    :param b: 约束右端项
    :param lo: 下界，可以是-inf
    :param hi: 上界，可以是inf
    :param return_multiplier: 是否同时返回mu
    :return: 最优解s，或者(s, mu)
    """
    g, L, a, lo, hi = _prepare(g, L, a, lo, hi)
    b = float(b)
    psi_min, psi_max = _psi_limits(a, lo, hi)
    scale = 1.0 + abs(b) + float(np.sum(np.abs(a) * np.where(np.isfinite(lo), np.abs(lo), 0.0))) \
        + float(np.sum(np.abs(a) * np.where(np.isfinite(hi), np.abs(hi), 0.0)))
    tol = _FEAS_TOL * scale
    if b < psi_min - tol or b > psi_max + tol:
        raise InfeasibleError(f'背包问题不可行：b={b:.6g}不在[{psi_min:.6g}, {psi_max:.6g}]内')
    mu = _solve_multiplier(g, L, a, b, lo, hi)
    s = _clip_at(mu, g, L, a, lo, hi)
    # 插值的舍入误差用牛顿步修正
    for _ in range(_REFINE_STEPS):
        err = b - float(a @ s)
        if abs(err) <= 1e-15 * scale:
            break
        slope = _free_slope(mu, g, L, a, lo, hi)
        if slope == 0.0:
            break
        mu += err / slope
        s = _clip_at(mu, g, L, a, lo, hi)
    if return_multiplier:
        return s, mu
    return s


def knapsack_kkt_residual(g, L, a, b, lo, hi, s, mu):
    """KKT残差：原始可行性、驻点条件和互补松弛的最大违反量"""
    g, L, a, lo, hi = _prepare(g, L, a, lo, hi)
    s = np.asarray(s, dtype=np.float64)
    r = g + L * s + mu * a
    at_lo = s <= lo
    at_hi = s >= hi
    interior = ~(at_lo | at_hi)
    viol = np.zeros_like(r)
    viol[interior] = np.abs(r[interior])
    viol[at_lo & ~at_hi] = np.maximum(-r[at_lo & ~at_hi], 0.0)
    viol[at_hi & ~at_lo] = np.maximum(r[at_hi & ~at_lo], 0.0)
    bound = np.maximum(lo - s, 0.0) + np.maximum(s - hi, 0.0)
    return float(max(np.max(viol, initial=0.0), np.max(bound, initial=0.0), abs(float(a @ s) - b)))


def split_l1_knapsack(g, L, a, b, lam, lo, hi, x):
    """带l1项的二次背包问题

    min <g, s> + 1/2 * sum_i L_i * s_i^2 + sum_i lam_i * |x_i + s_i|
    s.t. a^T s = b, lo <= x + s <= hi

    令y = x + s = p - m，p, m >= 0，转化为两倍规模的二次背包问题。
    最优解处p_i * m_i = 0，因此舍去交叉项后仍然是精确解。
    """
    g, L, a, lo, hi = _prepare(g, L, a, lo, hi)
    d = g.size
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (d,))
    x = np.asarray(x, dtype=np.float64).ravel()
    lx = L * x
    g2 = np.concatenate([g - lx + lam, -g + lx + lam])
    L2 = np.concatenate([L, L])
    a2 = np.concatenate([a, -a])
    b2 = float(b) + float(a @ x)
    p_lo = np.where(lo > 0, lo, 0.0)
    p_hi = np.where(hi < 0, 0.0, hi)
    m_lo = np.where(hi < 0, -hi, 0.0)
    m_hi = np.where(lo > 0, 0.0, -lo)
    lo2 = np.concatenate([p_lo, m_lo])
    hi2 = np.concatenate([p_hi, m_hi])
    pm = quadratic_knapsack(g2, L2, a2, b2, lo2, hi2)
    y = pm[:d] - pm[d:]
    return y - x


def simplex_projection(y):
    """y在单纯形{x >= 0, e^T x = 1}上的欧氏投影"""
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    return quadratic_knapsack(-y, 1.0, np.ones(n), 1.0, np.zeros(n), np.full(n, np.inf))
