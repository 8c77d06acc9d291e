import importlib
import inspect

from loguru import logger

from .chebyshev import ChebyshevInstance, BallSolution, build_chebyshev, recover_ball, random_points, initial_point
from .dataset import parse_sparse_dataset, parse_sparse_lines
from .l1 import build_l1_random, count_nonzeros
from .svm import SvmInstance, build_svm, generate_sparse_svm
from .synthetic import build_random_qp, build_graded_qp, build_strongly_convex_qp, solve_equality_qp, save_problem, \
    load_problem
from rcdopt.utils.errors import ConfigError

__all__ = ['build_problem', 'FAMILIES']

FAMILIES = ('svm', 'chebyshev', 'l1', 'custom', 'random_qp', 'graded_qp', 'strong_qp')


def build_svm_problem(data=None, n=None, m_dim=None, p=None, C=1.0, seed=0, block_size=None, power_iterations=0,
                      num_features=None):
    """data不为None时读取svmlight文件，否则随机生成"""
    if data is not None:
        instance = parse_sparse_dataset(data, num_features=num_features, C=C)
    elif None not in (n, m_dim, p):
        instance = generate_sparse_svm(n, m_dim, p, seed=seed, C=C)
    else:
        raise ConfigError('svm问题需要指定data，或者同时指定n、m_dim、p')
    problem, x0 = build_svm(instance, block_size=block_size, power_iterations=power_iterations)
    return problem, x0, {'instance': instance}


def build_chebyshev_problem(n=100, m_dim=2, seed=0, x0='uniform'):
    instance = random_points(n, m_dim, seed=seed)
    problem, start = build_chebyshev(instance, x0=x0)
    return problem, start, {'instance': instance}


def build_l1_problem(n=100, m_dim=20, lam=1.0, seed=0, x0='uniform'):
    problem, start = build_l1_random(n, m_dim, lam, seed=seed, x0=x0)
    return problem, start, {}


def build_custom_problem(data=None):
    if data is None:
        raise ConfigError('custom问题需要指定data（save_problem保存的npz文件）')
    problem, x0 = load_problem(data)
    if x0 is None:
        raise ConfigError(f'问题文件中没有初始点x0：{data}')
    return problem, x0, {}


def build_random_qp_problem(n=500, m_rows=None, density=0.1, seed=0, num_constraints=1):
    problem, x0 = build_random_qp(n, m_rows=m_rows, density=density, seed=seed, num_constraints=num_constraints)
    return problem, x0, {}


def build_graded_qp_problem(n=500, rank=None, cond=1e6, seed=0):
    problem, x0 = build_graded_qp(n, rank=rank, cond=cond, seed=seed)
    return problem, x0, {}


def build_strong_qp_problem(n=200, seed=0, perturbation=0.1, num_constraints=1):
    problem, x0 = build_strongly_convex_qp(n, seed=seed, perturbation=perturbation, num_constraints=num_constraints)
    return problem, x0, {}


def build_problem(problem_conf):
    """根据problem_conf中的family创建问题

    :param problem_conf: 字典，family为问题类型，其余为该类型的参数
    :return: (CompositeProblem, x0, 上下文字典)
    """
    conf = dict(problem_conf or {})
    family = str(conf.pop('family', 'svm')).lower()
    if family not in FAMILIES:
        raise ConfigError(f'未知的问题类型：{family}，可选值有：{FAMILIES}')
    mod = importlib.import_module(__name__)
    builder = getattr(mod, f'build_{family}_problem')
    try:
        inspect.signature(builder).bind(**conf)
    except TypeError as e:
        raise ConfigError(f'{family}问题的参数有误：{e}') from None
    problem, x0, context = builder(**conf)
    logger.info(f'成功创建问题：{family}，参数为：{conf}')
    return problem, x0, context
