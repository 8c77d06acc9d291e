import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from rcdopt.utils.errors import UnboundedError, InfeasibleError

STATUS_OK = 0
STATUS_UNBOUNDED = 1
STATUS_INFEASIBLE = 2
# 定义域端点因为舍入误差交错时允许的相对宽度
_DOMAIN_SLACK = 1e-12
# 目标值相同（在此相对误差内）时取|t|最小的点
_TIE_TOL = 1e-14


@dataclass
class Term(object):
    """h_k(u + v*t)，其中h_k(y) = lam*|y| + 1_[lo, hi](y)"""
    v: float
    u: float
    lam: float = 0.0
    lo: float = -math.inf
    hi: float = math.inf


@dataclass
class PiecewiseQuadratic1D(object):
    """phi(t) = 1/2*c2*t^2 + c1*t + sum_k h_k(u_k + v_k*t)，t属于[t_lo, t_hi]"""
    c2: float
    c1: float
    terms: list = field(default_factory=list)
    t_lo: float = -math.inf
    t_hi: float = math.inf

    def arrays(self):
        """转换成_pw1d_core需要的数组，定义域作为一个v=1的盒约束项"""
        k = len(self.terms) + 1
        v, u, lam = np.zeros(k), np.zeros(k), np.zeros(k)
        lo, hi = np.zeros(k), np.zeros(k)
        for idx, term in enumerate(self.terms):
            v[idx], u[idx], lam[idx], lo[idx], hi[idx] = term.v, term.u, term.lam, term.lo, term.hi
        v[-1], u[-1], lam[-1], lo[-1], hi[-1] = 1.0, 0.0, 0.0, self.t_lo, self.t_hi
        return v, u, lam, lo, hi

    def __call__(self, t):
        value = 0.5 * self.c2 * t * t + self.c1 * t
        if t < self.t_lo or t > self.t_hi:
            return math.inf
        for term in self.terms:
            y = term.u + term.v * t
            if y < term.lo or y > term.hi:
                return math.inf
            value += term.lam * abs(y)
        return value

    def subgradient(self, t):
        """phi在t处的次梯度区间(左导数, 右导数)，端点处定义域外一侧为无穷"""
        left = right = self.c2 * t + self.c1
        for term in self.terms:
            if term.lam <= 0.0 or term.v == 0.0:
                continue
            y = term.u + term.v * t
            slope = term.lam * abs(term.v)
            if y > 0:
                s = term.lam * term.v
                left, right = left + s, right + s
            elif y < 0:
                s = -term.lam * term.v
                left, right = left + s, right + s
            else:
                left, right = left - slope, right + slope
        lo, hi = self.domain()
        if t <= lo:
            left = -math.inf
        if t >= hi:
            right = math.inf
        return left, right

    def domain(self):
        lo, hi = self.t_lo, self.t_hi
        for term in self.terms:
            if term.v > 0:
                lo = max(lo, (term.lo - term.u) / term.v)
                hi = min(hi, (term.hi - term.u) / term.v)
            elif term.v < 0:
                lo = max(lo, (term.hi - term.u) / term.v)
                hi = min(hi, (term.lo - term.u) / term.v)
        return lo, hi


@njit(cache=True)
def _sign(w):
    if w > 0.0:
        return 1.0
    if w < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def _phi(t, c2, c1, v, u, lam, nterms):
    value = 0.5 * c2 * t * t + c1 * t
    for k in range(nterms):
        if lam[k] > 0.0:
            value += lam[k] * abs(u[k] + v[k] * t)
    return value


@njit(cache=True)
def _pw1d_core(c2, c1, v, u, lam, lo, hi, nterms, work):
    """精确求解一维凸分段二次问题

    断点来自每个l1项的拐点-u/v，定义域来自各项的盒约束；在每个断点区间上
    二次函数有闭式极小点，比较所有候选点。work长度至少为nterms+2。
    :return: (t, phi(t), status)
    """
    t_lo = -np.inf
    t_hi = np.inf
    for k in range(nterms):
        vk = v[k]
        if vk > 0.0:
            a = (lo[k] - u[k]) / vk
            b = (hi[k] - u[k]) / vk
        elif vk < 0.0:
            a = (hi[k] - u[k]) / vk
            b = (lo[k] - u[k]) / vk
        else:
            if u[k] < lo[k] or u[k] > hi[k]:
                return 0.0, np.inf, STATUS_INFEASIBLE
            continue
        if a > t_lo:
            t_lo = a
        if b < t_hi:
            t_hi = b
    if t_lo > t_hi:
        if t_lo - t_hi <= _DOMAIN_SLACK * (1.0 + abs(t_lo) + abs(t_hi)):
            mid = 0.5 * (t_lo + t_hi)
            t_lo = mid
            t_hi = mid
        else:
            return 0.0, np.inf, STATUS_INFEASIBLE

    # 无穷远处的斜率
    if c2 <= 0.0:
        s_inf = 0.0
        for k in range(nterms):
            if lam[k] > 0.0 and v[k] != 0.0:
                s_inf += lam[k] * abs(v[k])
        if t_lo == -np.inf and c1 - s_inf > 0.0:
            return 0.0, -np.inf, STATUS_UNBOUNDED
        if t_hi == np.inf and c1 + s_inf < 0.0:
            return 0.0, -np.inf, STATUS_UNBOUNDED

    # 收集定义域内部的断点
    nb = 0
    for k in range(nterms):
        if lam[k] > 0.0 and v[k] != 0.0:
            bp = -u[k] / v[k]
            if t_lo < bp < t_hi:
                work[nb] = bp
                nb += 1
    bps = np.sort(work[:nb])

    best_t = 0.0
    best_val = np.inf
    # 每个区间[seg_lo, seg_hi]上的极小点，最后额外考虑离0最近的可行点
    for s in range(nb + 2):
        if s <= nb:
            seg_lo = t_lo if s == 0 else bps[s - 1]
            seg_hi = t_hi if s == nb else bps[s]
            if seg_lo == -np.inf and seg_hi == np.inf:
                mid = 0.0
            elif seg_lo == -np.inf:
                mid = seg_hi - 1.0
            elif seg_hi == np.inf:
                mid = seg_lo + 1.0
            else:
                mid = 0.5 * (seg_lo + seg_hi)
            slope = c1
            for k in range(nterms):
                if lam[k] > 0.0 and v[k] != 0.0:
                    slope += lam[k] * v[k] * _sign(u[k] + v[k] * mid)
            if c2 > 0.0:
                t = -slope / c2
            elif slope > 0.0:
                t = seg_lo
            elif slope < 0.0:
                t = seg_hi
            else:
                t = 0.0
        else:
            seg_lo = t_lo
            seg_hi = t_hi
            t = 0.0
        if t < seg_lo:
            t = seg_lo
        if t > seg_hi:
            t = seg_hi
        if not np.isfinite(t):
            continue
        val = _phi(t, c2, c1, v, u, lam, nterms)
        tol = _TIE_TOL * (1.0 + abs(best_val)) if np.isfinite(best_val) else 0.0
        if val < best_val - tol:
            best_t = t
            best_val = val
        elif val <= best_val + tol and abs(t) < abs(best_t):
            best_t = t
            best_val = min(val, best_val)
    return best_t, best_val, STATUS_OK


def pw1d_minimize(phi):
    """求一维凸分段二次函数的全局极小点

    :param phi: PiecewiseQuadratic1D
    :return: (t*, phi(t*))，有多个极小点时返回|t*|最小的那个
    """
    v, u, lam, lo, hi = phi.arrays()
    work = np.empty(v.size + 2)
    t, value, status = _pw1d_core(float(phi.c2), float(phi.c1), v, u, lam, lo, hi, v.size, work)
    if status == STATUS_UNBOUNDED:
        raise UnboundedError(f'一维子问题无下界：c2={phi.c2}, c1={phi.c1}')
    if status == STATUS_INFEASIBLE:
        raise InfeasibleError('一维子问题的定义域为空')
    # 端点处舍入可能让phi(t)越出盒约束，此时退回核心算出的值
    full = phi(t)
    return float(t), float(full if math.isfinite(full) else value)
