import numpy as np
from numba import njit

from rcdopt.subsolvers.pw1d import _pw1d_core, STATUS_OK


@njit(cache=True)
def _column_dot(data, indices, indptr, col, r):
    value = 0.0
    for p in range(indptr[col], indptr[col + 1]):
        value += data[p] * r[indices[p]]
    return value


@njit(cache=True)
def _column_update(data, indices, indptr, col, r, step):
    """r += step * z_col，返回1/2*(||r_new||^2 - ||r_old||^2)"""
    delta = 0.0
    for p in range(indptr[col], indptr[col + 1]):
        k = indices[p]
        old = r[k]
        new = old + data[p] * step
        delta += 0.5 * (new * new - old * old)
        r[k] = new
    return delta


@njit(cache=True)
def _load_term(buf_v, buf_u, buf_lam, buf_lo, buf_hi, k, v, u, lam, lo, hi):
    buf_v[k] = v
    buf_u[k] = u
    buf_lam[k] = lam
    buf_lo[k] = lo
    buf_hi[k] = hi


@njit(cache=True)
def _single_step(g, c, x, lam, lo, hi, buf_v, buf_u, buf_lam, buf_lo, buf_hi, work):
    _load_term(buf_v, buf_u, buf_lam, buf_lo, buf_hi, 0, 1.0, x, lam, lo, hi)
    t, _, status = _pw1d_core(c, g, buf_v, buf_u, buf_lam, buf_lo, buf_hi, 1, work)
    return t, status


@njit(cache=True)
def rcd_scalar_chunk(data, indices, indptr, q, a, lam, lo, hi, lipschitz, alpha, x, r, pairs_i, pairs_j):
    """标量块RCD的内层循环，依次处理预先抽好的坐标对

    每次迭代只访问两列：由残差计算两个偏导数，一维精确求解，增量更新残差和目标函数值。
    :return: (目标函数值的增量, 访问的非零元个数, 状态码, 出错的迭代序号)
    """
    buf_v = np.zeros(2)
    buf_u = np.zeros(2)
    buf_lam = np.zeros(2)
    buf_lo = np.zeros(2)
    buf_hi = np.zeros(2)
    work = np.zeros(4)
    total = 0.0
    touches = 0
    for k in range(pairs_i.size):
        i = pairs_i[k]
        j = pairs_j[k]
        gi = _column_dot(data, indices, indptr, i, r) + q[i]
        gj = _column_dot(data, indices, indptr, j, r) + q[j]
        nnz = (indptr[i + 1] - indptr[i]) + (indptr[j + 1] - indptr[j])
        lij = lipschitz[i] ** (1.0 - alpha) + lipschitz[j] ** (1.0 - alpha)
        ci = lij * lipschitz[i] ** alpha
        cj = lij * lipschitz[j] ** alpha
        ai = a[i]
        aj = a[j]
        if ai == 0.0 and aj == 0.0:
            di, status = _single_step(gi, ci, x[i], lam[i], lo[i], hi[i],
                                      buf_v, buf_u, buf_lam, buf_lo, buf_hi, work)
            if status != STATUS_OK:
                return total, touches, status, k
            dj, status = _single_step(gj, cj, x[j], lam[j], lo[j], hi[j],
                                      buf_v, buf_u, buf_lam, buf_lo, buf_hi, work)
        else:
            norm = np.sqrt(ai * ai + aj * aj)
            vi = aj / norm
            vj = -ai / norm
            _load_term(buf_v, buf_u, buf_lam, buf_lo, buf_hi, 0, vi, x[i], lam[i], lo[i], hi[i])
            _load_term(buf_v, buf_u, buf_lam, buf_lo, buf_hi, 1, vj, x[j], lam[j], lo[j], hi[j])
            t, _, status = _pw1d_core(ci * vi * vi + cj * vj * vj, gi * vi + gj * vj,
                                      buf_v, buf_u, buf_lam, buf_lo, buf_hi, 2, work)
            di = t * vi
            dj = t * vj
        if status != STATUS_OK:
            return total, touches, status, k
        new_i = min(max(x[i] + di, lo[i]), hi[i])
        new_j = min(max(x[j] + dj, lo[j]), hi[j])
        di = new_i - x[i]
        dj = new_j - x[j]
        if di != 0.0:
            total += _column_update(data, indices, indptr, i, r, di)
            total += q[i] * di + lam[i] * (abs(new_i) - abs(x[i]))
            x[i] = new_i
        if dj != 0.0:
            total += _column_update(data, indices, indptr, j, r, dj)
            total += q[j] * dj + lam[j] * (abs(new_j) - abs(x[j]))
            x[j] = new_j
        touches += 2 * nnz
    return total, touches, STATUS_OK, -1
