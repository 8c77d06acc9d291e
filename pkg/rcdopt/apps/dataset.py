import math
import os
import re

import numpy as np
from loguru import logger
from scipy import sparse

from rcdopt.apps.svm import SvmInstance
from rcdopt.utils.errors import DatasetParseError

_FEATURE = re.compile(r'^(\d+):(\S+)$')
# 每读取多少行打印一次进度
LOG_EVERY = 5000


def _parse_line(line, line_number, path):
    """解析一行 <label> <index>:<value> ...，返回(标签, 下标列表, 值列表)"""
    tokens = line.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise DatasetParseError(f'标签不是数字：{tokens[0]!r}', line_number, path) from None
    if not math.isfinite(label):
        raise DatasetParseError(f'标签不是有限值：{tokens[0]!r}', line_number, path)
    indices, values = [], []
    last = 0
    for token in tokens[1:]:
        if token.startswith('qid:'):
            continue
        match = _FEATURE.match(token)
        if match is None:
            raise DatasetParseError(f'无法解析的特征：{token!r}', line_number, path)
        index = int(match.group(1))
        try:
            value = float(match.group(2))
        except ValueError:
            raise DatasetParseError(f'特征值不是数字：{token!r}', line_number, path) from None
        if index < 1:
            raise DatasetParseError(f'特征下标从1开始：{token!r}', line_number, path)
        if index <= last:
            raise DatasetParseError(f'特征下标必须严格递增：{last}之后是{index}', line_number, path)
        if not math.isfinite(value):
            raise DatasetParseError(f'特征值不是有限值：{token!r}', line_number, path)
        indices.append(index - 1)
        values.append(value)
        last = index
    return label, indices, values


def parse_sparse_lines(lines, path=None, num_features=None, C=1.0):
    """解析svmlight/LIBSVM格式的文本行，每个样本作为Z的一列

    :param lines: 可迭代的文本行
    :param path: 出错时报告的文件名
    :param num_features: 特征维度，为None时取出现过的最大下标
    :param C: SVM的惩罚参数
    :return: SvmInstance
    """
    labels, rows, cols, vals = [], [], [], []
    relabeled = 0
    for line_number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        label, indices, values = _parse_line(line, line_number, path)
        if label not in (-1.0, 1.0):
            relabeled += 1
        labels.append(1.0 if label > 0 else -1.0)
        rows.extend(indices)
        cols.extend([len(labels) - 1] * len(indices))
        vals.extend(values)
        if len(labels) % LOG_EVERY == 0:
            logger.debug(f'已读取{len(labels)}个样本')
    n = len(labels)
    max_index = max(rows) + 1 if rows else 0
    if num_features is None:
        num_features = max_index
    elif num_features < max_index:
        raise DatasetParseError(f'特征下标{max_index}超过指定的维度{num_features}', path=path)
    if relabeled:
        logger.warning(f'有{relabeled}个标签不在{{-1, +1}}中，已按符号映射（非正数为-1）')
    Z = sparse.csc_matrix((np.asarray(vals, dtype=np.float64),
                           (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                          shape=(num_features, n))
    instance = SvmInstance(Z=Z, labels=np.asarray(labels, dtype=np.float64), C=C, relabeled=relabeled,
                           source=path)
    logger.info(f'读取数据完成：{path or "<stream>"}，样本数n={instance.n}，特征数m={instance.m_dim}，'
                f'平均每列非零元p={instance.sparsity:.2f}，正样本{int(np.sum(instance.labels > 0))}个')
    return instance


def parse_sparse_dataset(path, num_features=None, C=1.0):
    """读取svmlight/LIBSVM格式的数据文件"""
    if not os.path.exists(path):
        raise DatasetParseError(f'数据文件不存在：{path}', path=path)
    with open(path, 'r', encoding='utf-8') as f:
        return parse_sparse_lines(f, path=path, num_features=num_features, C=C)
