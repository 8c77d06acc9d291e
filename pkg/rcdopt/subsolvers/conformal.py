from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import sparse

from rcdopt.utils.errors import ConformalityError, InvariantError

# a^T d = 0的相对容差
NULL_TOL = 1e-10


@njit(cache=True)
def _greedy_pairs(d, a, tol):
    """贪心配对P = {a_i d_i > 0}和M = {a_i d_i < 0}

    每一片只有两个非零元，并且至少用完其中一个坐标；a_i = 0的坐标单独成片。
    :return: (片的编号, 坐标, 值, 片数)
    """
    n = d.size
    piece = np.empty(2 * n, dtype=np.int64)
    coord = np.empty(2 * n, dtype=np.int64)
    value = np.empty(2 * n, dtype=np.float64)
    pos = np.empty(n, dtype=np.int64)
    neg = np.empty(n, dtype=np.int64)
    n_pos = 0
    n_neg = 0
    nnz = 0
    s = 0
    for i in range(n):
        if d[i] == 0.0:
            continue
        w = a[i] * d[i]
        if a[i] == 0.0:
            piece[nnz] = s
            coord[nnz] = i
            value[nnz] = d[i]
            nnz += 1
            s += 1
        elif w > 0.0:
            pos[n_pos] = i
            n_pos += 1
        else:
            neg[n_neg] = i
            n_neg += 1

    rem = d.copy()
    p = 0
    m = 0
    while p < n_pos and m < n_neg:
        i = pos[p]
        j = neg[m]
        wi = a[i] * rem[i]
        wj = -a[j] * rem[j]
        if abs(wi - wj) <= tol:
            vi = rem[i]
            vj = rem[j]
            p += 1
            m += 1
        elif wi < wj:
            vi = rem[i]
            vj = -wi / a[j]
            p += 1
        else:
            vi = wj / a[i]
            vj = rem[j]
            m += 1
        rem[i] -= vi
        rem[j] -= vj
        piece[nnz] = s
        coord[nnz] = i
        value[nnz] = vi
        piece[nnz + 1] = s
        coord[nnz + 1] = j
        value[nnz + 1] = vj
        nnz += 2
        s += 1
    # 舍入留下的零头并入最后一片里的同一个坐标，其余没有配对的坐标单独成片
    while p < n_pos or m < n_neg:
        k = pos[p] if p < n_pos else neg[m]
        if p < n_pos:
            p += 1
        else:
            m += 1
        if rem[k] == 0.0:
            continue
        merged = False
        for t in range(nnz - 1, -1, -1):
            if piece[t] != s - 1:
                break
            if coord[t] == k:
                value[t] += rem[k]
                merged = True
        if not merged:
            piece[nnz] = s
            coord[nnz] = k
            value[nnz] = rem[k]
            nnz += 1
            s += 1
        rem[k] = 0.0
    return piece[:nnz], coord[:nnz], value[:nnz], s


@dataclass
class ElementaryDecomposition(object):
    """d = sum_t d^t，每一片d^t保存为稀疏矩阵pieces的一行"""
    pieces: sparse.csr_matrix

    @property
    def num_pieces(self):
        return int(self.pieces.shape[0])

    def piece(self, t):
        row = self.pieces.getrow(t)
        return row.indices.copy(), row.data.copy()

    def to_dense(self):
        return self.pieces.toarray()

    def total(self):
        return np.asarray(self.pieces.sum(axis=0)).ravel()

    def check(self, a, d, tol=NULL_TOL):
        """检查所有不变量：共形、属于零空间、求和等于d、每片最多两个非零元"""
        a = np.asarray(a, dtype=np.float64).ravel()
        d = np.asarray(d, dtype=np.float64).ravel()
        scale = 1.0 + float(np.linalg.norm(d))
        dense = self.to_dense()
        if np.max(np.abs(dense.sum(axis=0) - d), initial=0.0) > tol * scale:
            raise InvariantError('各片之和不等于d')
        for t in range(self.num_pieces):
            row = dense[t]
            support = np.flatnonzero(row)
            if support.size > 2:
                raise InvariantError(f'第{t}片有{support.size}个非零元')
            if np.any(d[support] == 0.0) or np.any(row[support] * d[support] < 0.0):
                raise InvariantError(f'第{t}片与d不共形')
            if abs(float(a @ row)) > tol * (1.0 + float(np.linalg.norm(a)) * float(np.linalg.norm(row))):
                raise InvariantError(f'第{t}片不在a的零空间内')
        support = int(np.count_nonzero(d))
        if np.any(a[d != 0] != 0) and self.num_pieces > support - 1:
            raise InvariantError(f'片数{self.num_pieces}超过|supp(d)|-1={support - 1}')
        return True


def conformal_realization(d, a, debug=False, strict=True):
    """把a^T d = 0的向量分解成共形的初等向量之和

    单约束时初等向量最多两个非零元，贪心配对的片数不超过|supp(d)|-1，
    只有当d全部落在a_i = 0的坐标上时片数等于|supp(d)|。
    :param d: 零空间中的向量
    :param a: 约束向量，也可以传入Coupling
    :param debug: 是否检查输出的所有不变量
    :param strict: 为False时不检查a^T d = 0，只用于选取工作集，余量单独成片
    :return: ElementaryDecomposition
    """
    if hasattr(a, 'a'):
        a = a.a
    d = np.asarray(d, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64).ravel()
    if a.size != d.size:
        raise ConformalityError(f'a的长度{a.size}与d的长度{d.size}不一致')
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(d))
    if strict and abs(float(a @ d)) > NULL_TOL * max(norm, 1e-300):
        raise ConformalityError(f'd不在a的零空间内：a^T d = {float(a @ d):.3e}')
    tol = NULL_TOL * norm
    rows, cols, vals, s = _greedy_pairs(d, a, tol)
    pieces = sparse.csr_matrix((vals, (rows, cols)), shape=(s, d.size))
    decomposition = ElementaryDecomposition(pieces=pieces)
    if debug:
        decomposition.check(a, d)
    return decomposition
