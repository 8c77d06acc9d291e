import argparse
import functools
import os
import sys

import numpy as np
from loguru import logger

from rcdopt.apps import build_problem, recover_ball, initial_point, count_nonzeros
from rcdopt.benchmark import run_experiment, ExperimentManifest, write_trace_csv
from rcdopt.solvers import build_solver, SolverConfig
from rcdopt.utils.errors import RcdError, DatasetParseError, ConfigError
from rcdopt.utils.logger import setup_logger
from rcdopt.utils.utils import add_arguments, print_arguments, load_configs, apply_overwrites

EXIT_OK = 0
EXIT_PARSE_ERROR = 2
EXIT_SOLVER_ERROR = 3
# 问题类型自带初始点参数的builder
_X0_FAMILIES = ('chebyshev', 'l1')


def add_solve_arguments(parser):
    add_arg = functools.partial(add_arguments, argparser=parser)
    add_arg('family',         str,    'svm',      '问题类型，可选值有：svm, chebyshev, l1, custom, random_qp, graded_qp, strong_qp')
    add_arg('data',           str,    None,       'svm为svmlight格式的数据文件，custom为npz问题文件')
    add_arg('algo',           str,    'rcd',      '求解算法，可选值有：rcd, rcdn, cgd, gm')
    add_arg('alpha',          float,  None,       '范数参数alpha，0或1，为None时使用配置文件中的值')
    add_arg('eps',            float,  None,       '停止准则的epsilon，为None时使用配置文件中的值')
    add_arg('seed',           int,    None,       '随机种子')
    add_arg('max-full-iters', int,    None,       '最大完整迭代次数')
    add_arg('x0',             str,    None,       '初始点，可选值有：zero, e1, uniform，为None时使用问题的默认初始点')
    add_arg('n',              int,    None,       '随机问题的维度')
    add_arg('m-dim',          int,    None,       '随机问题的行数或点的维度')
    add_arg('lam',            float,  None,       'l1问题的正则系数')
    add_arg('p',              int,    None,       '随机SVM数据每列的非零元个数')
    add_arg('out',            str,    'output/',  '保存轨迹和解的目录')
    add_arg('configs',        str,    None,       '配置文件路径或名称，为None时按算法使用默认配置')
    add_arg('overwrites',     str,    None,       '覆盖配置文件中的参数，比如"solver_conf.epsilon=1e-6"，多个用逗号隔开')
    add_arg('log-level',      str,    'info',     '日志等级，可选值有：debug, info, warning, error')
    return parser


def add_bench_arguments(parser):
    add_arg = functools.partial(add_arguments, argparser=parser)
    add_arg('manifest',       str,    'configs/manifests/chebyshev_small.yml', '实验清单文件')
    add_arg('overwrites',     str,    None,       '覆盖清单中的参数，比如"jobs=4"，多个用逗号隔开')
    add_arg('log-level',      str,    'info',     '日志等级，可选值有：debug, info, warning, error')
    return parser


def _problem_conf(args):
    conf = {'family': args.family}
    for key in ('data', 'n', 'm_dim', 'lam', 'p'):
        value = getattr(args, key)
        if value is not None:
            conf[key] = value
    if args.family == 'random_qp' and 'm_dim' in conf:
        conf['m_rows'] = conf.pop('m_dim')
    if args.family == 'graded_qp' and 'm_dim' in conf:
        conf['rank'] = conf.pop('m_dim')
    if args.seed is not None and args.family != 'custom' and args.data is None:
        conf['seed'] = args.seed
    if args.x0 is not None and args.family in _X0_FAMILIES:
        conf['x0'] = args.x0
    return conf


def run_solve(args):
    """解一个问题，把轨迹、解和汇总写到args.out"""
    config_name = args.configs or args.algo.lower().replace('_', '')
    configs = apply_overwrites(load_configs(config_name), args.overwrites)
    print_arguments(configs=configs)
    config = SolverConfig.from_configs(configs.get('solver_conf', {}), algorithm=args.algo, alpha=args.alpha,
                                       epsilon=args.eps, seed=args.seed,
                                       max_full_iterations=args.max_full_iters)
    problem, x0, context = build_problem(_problem_conf(args))
    if args.x0 is not None and args.family not in _X0_FAMILIES:
        x0 = initial_point(problem.dim, args.x0)
    x, trace = build_solver(config).solve(problem, x0)
    os.makedirs(args.out, exist_ok=True)
    write_trace_csv(os.path.join(args.out, f'trace_{config.algorithm}_seed{config.seed}.csv'), trace)
    np.save(os.path.join(args.out, 'solution.npy'), x)
    final = trace.final
    logger.info(f'最终目标函数值：{final["objective"]:.10f}，可行性误差：{final["feasibility_defect"]:.3e}，'
                f'完整迭代：{final["full_iteration"]:.1f}，用时：{final["elapsed_seconds"]:.2f}s')
    if args.family == 'chebyshev':
        ball = recover_ball(context['instance'], x)
        logger.info(f'包围球半径：{ball.radius:.10f}，球心：{np.array2string(ball.center, precision=6)}')
    elif args.family == 'l1':
        logger.info(f'|x_i| > 1e-6的坐标个数：{count_nonzeros(x)}')
    return x, trace


def run_bench(args):
    manifest = ExperimentManifest.from_file(args.manifest, overwrites=args.overwrites)
    return run_experiment(manifest)


def run_command(command, args):
    """执行命令并把异常转换成退出码"""
    setup_logger(args.log_level)
    try:
        command(args)
    except (DatasetParseError, ConfigError) as e:
        logger.error(f'{type(e).__name__}: {e}')
        return EXIT_PARSE_ERROR
    except RcdError as e:
        logger.error(f'{type(e).__name__}: {e}')
        return EXIT_SOLVER_ERROR
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog='rcdopt', description='带线性耦合约束的随机坐标下降求解器')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    solve_parser = add_solve_arguments(subparsers.add_parser('solve', help='求解一个问题'))
    solve_parser.set_defaults(func=run_solve)
    bench_parser = add_bench_arguments(subparsers.add_parser('bench', help='按清单运行基准实验'))
    bench_parser.set_defaults(func=run_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run_command(args.func, args)


if __name__ == '__main__':
    sys.exit(main())
