import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
import yaml
from loguru import logger
from scipy import stats
from tqdm import tqdm

from rcdopt.apps import build_problem, solve_equality_qp
from rcdopt.problem import estimate_level_radius
from rcdopt.solvers import build_solver, SolverConfig, PlateauWindow
from rcdopt.solvers.theory import expected_gap_bound, tuple_gap_bound
from rcdopt.utils.errors import ConfigError, RcdError, RateFitError
from rcdopt.utils.utils import load_configs, apply_overwrites, dict_to_object

# 轨迹文件不记录墙钟时间，相同的清单重复运行得到完全相同的文件
TRACE_HEADER = ('full_iteration', 'raw_iterations', 'objective', 'feasibility_defect')
SUMMARY_HEADER = ('algorithm', 'seed', 'full_iterations', 'raw_iterations', 'objective', 'feasibility',
                  'elapsed_seconds', 'status', 'label', 'stop_reason', 'touches', 'level_radius',
                  'gap_bound')
AGGREGATE_HEADER = ('full_iteration', 'mean_objective', 'min_objective', 'max_objective', 'mean_gap', 'num_seeds')
FLOAT_FORMAT = '%.17g'
# 计算参考值f*时CGD的停止参数
REFERENCE_EPSILON = 1e-5
REFERENCE_MAX_FULL_ITERATIONS = 100000
# h = 0且维度不超过这个值时直接解KKT方程
REFERENCE_KKT_MAX_DIM = 5000


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return value


@dataclass
class ExperimentManifest(object):
    """一次实验的清单：问题、求解器列表、随机种子和输出目录

    solvers中每一项形如{'configs': 'rcd', 'label': 'RCD', 'solver_conf': {'alpha': 1.0}}，
    configs为默认配置名称或配置文件路径，solver_conf覆盖其中的solver_conf部分。
    """
    problem: dict
    solvers: list
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = 'output/'
    jobs: int = 1
    reference: dict = None
    fit_window: list = None

    def __post_init__(self):
        if not self.problem or 'family' not in self.problem:
            raise ConfigError('清单中的problem必须指定family')
        if not self.solvers:
            raise ConfigError('清单中至少需要一个求解器')
        if not self.seeds:
            raise ConfigError('清单中的seeds不能为空')
        self.seeds = [int(s) for s in self.seeds]
        self.jobs = max(int(self.jobs), 1)
        data = self.problem.get('data')
        if data is not None and not os.path.exists(data):
            raise ConfigError(f'数据文件不存在：{data}')
        labels = [self.solver_label(entry) for entry in self.solvers]
        if len(set(labels)) != len(labels):
            raise ConfigError(f'求解器的label不能重复：{labels}')

    @staticmethod
    def solver_label(entry):
        if entry.get('label'):
            return str(entry['label'])
        return str(entry.get('configs', 'rcd')).upper()

    @classmethod
    def from_file(cls, path, overwrites=None):
        """读取YAML格式的清单文件，overwrites形如"jobs=4,problem.seed=3" """
        if not os.path.exists(path):
            raise ConfigError(f'清单文件不存在：{path}')
        with open(path, 'r', encoding='utf-8') as f:
            conf = yaml.load(f.read(), Loader=yaml.FullLoader)
        if not isinstance(conf, dict):
            raise ConfigError(f'清单文件格式有误：{path}')
        conf = apply_overwrites(dict_to_object(conf), overwrites)
        known = set(cls.__dataclass_fields__)
        unknown = set(conf) - known
        if unknown:
            raise ConfigError(f'清单中有未知的字段：{sorted(unknown)}')
        return cls(**conf)


def build_solver_config(entry, seed, f_star=None):
    """把清单中的一个求解器条目转换成SolverConfig"""
    configs = load_configs(entry.get('configs', 'rcd'))
    solver_conf = dict(configs.get('solver_conf', {}))
    solver_conf.update(entry.get('solver_conf') or {})
    stop_rule = solver_conf.get('stop_rule')
    if isinstance(stop_rule, dict) and stop_rule.get('name') in ('GapToReference', 'gap'):
        stop_rule = dict(stop_rule)
        if stop_rule.get('f_star') is None:
            if f_star is None:
                raise ConfigError('GapToReference需要f*，请在清单中配置reference')
            stop_rule['f_star'] = f_star
        solver_conf['stop_rule'] = stop_rule
    solver_conf['log_dir'] = None
    return SolverConfig.from_configs(solver_conf, seed=seed)


def compute_reference(problem, x0, epsilon=REFERENCE_EPSILON, max_full_iterations=REFERENCE_MAX_FULL_ITERATIONS):
    """求f*的参考值，h = 0的小问题直接解KKT方程，否则用CGD求一个高精度解"""
    nonsmooth = problem.nonsmooth
    if not nonsmooth.has_l1 and not nonsmooth.has_box and problem.dim <= REFERENCE_KKT_MAX_DIM:
        _, f_star = solve_equality_qp(problem)
        logger.info(f'参考值f* = {f_star:.17g}，由KKT方程求得')
        return f_star
    config = SolverConfig(algorithm='CGD', epsilon=epsilon, max_full_iterations=max_full_iterations,
                          stop_rule=PlateauWindow(window=1), log_interval=1000)
    _, trace = build_solver(config).solve(problem, x0)
    f_star = trace.final_objective
    logger.info(f'参考值f* = {f_star:.17g}，停止原因：{trace.stop_reason}')
    return f_star


def write_trace_csv(path, trace):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for full, raw, objective, feasibility, _ in trace.rows:
            writer.writerow([_fmt(full), raw, _fmt(objective), _fmt(feasibility)])


def read_trace_csv(path):
    """读取轨迹文件，返回{列名: numpy数组}"""
    with open(path, 'r', encoding='utf-8') as f:
        rows = list(csv.DictReader(f))
    return {name: np.array([float(row[name]) for row in rows]) for name in TRACE_HEADER}


def _run_cell(problem, x0, config):
    """运行一个(求解器, seed)组合，出错时只记录状态"""
    try:
        x, trace = build_solver(config).solve(problem, x0)
    except RcdError as e:
        logger.error(f'求解失败：{config.algorithm}，seed={config.seed}，{type(e).__name__}: {e}')
        return None, None, f'failed:{type(e).__name__}'
    except Exception as e:
        logger.exception(f'求解出现意外错误：{config.algorithm}，seed={config.seed}')
        return None, None, f'failed:{type(e).__name__}'
    return x, trace, 'ok'


def aggregate_traces(traces, f_star=None):
    """同一个求解器多个seed的轨迹按行对齐，提前停止的轨迹沿用最后的目标函数值

    :return: AGGREGATE_HEADER对应的行列表
    """
    longest = max(traces, key=len)
    num_rows = len(longest)
    objectives = np.full((len(traces), num_rows), np.nan)
    for k, trace in enumerate(traces):
        obj = trace.objectives
        objectives[k, :obj.size] = obj
        objectives[k, obj.size:] = obj[-1]
    rows = []
    for r in range(num_rows):
        col = objectives[:, r]
        mean = float(np.mean(col))
        gap = mean - f_star if f_star is not None else float('nan')
        rows.append((longest.rows[r][0], mean, float(np.min(col)), float(np.max(col)), gap, len(traces)))
    return rows


def fit_rate(full_iterations, gaps, window=None):
    """拟合收敛速度

    :param full_iterations: 完整迭代次数k
    :param gaps: 对应的期望间隙phi^k - f*
    :param window: (k_start, k_stop)，只使用这个范围内的点，为None时使用k > 0的所有点
    :return: (log(gap)对log(k)的斜率, log(gap)对k线性拟合的R^2)
    """
    k = np.asarray(full_iterations, dtype=np.float64)
    gaps = np.asarray(gaps, dtype=np.float64)
    mask = k > 0
    if window is not None:
        mask &= (k >= window[0]) & (k <= window[1])
    k, gaps = k[mask], gaps[mask]
    if k.size < 2:
        raise RateFitError(f'拟合窗口内的点太少：{k.size}')
    if np.any(~(gaps > 0)):
        raise RateFitError('间隙必须严格为正，请使用更精确的f*参考值')
    log_gap = np.log(gaps)
    slope = stats.linregress(np.log(k), log_gap).slope
    linear = stats.linregress(k, log_gap)
    return float(slope), float(linear.rvalue ** 2)


def theoretical_gap_bound(problem, config, raw_iterations, radius, gap0):
    """随机坐标下降在raw_iterations次迭代后的期望间隙上界，CGD和GM没有对应的界，返回空"""
    if config.algorithm == 'RCD':
        lipschitz = float(np.max(problem.lipschitz))
        return expected_gap_bound(raw_iterations, problem.num_blocks, lipschitz, config.alpha, radius, gap0)
    if config.algorithm == 'RCD_N':
        return tuple_gap_bound(raw_iterations, problem.num_blocks, problem.coupling.num_constraints,
                               float(np.max(problem.lipschitz)), radius, gap0)
    return ''


def run_experiment(manifest):
    """运行清单中所有(求解器, seed)组合，写出轨迹、汇总和聚合文件

    :param manifest: ExperimentManifest或者清单文件路径
    :return: 汇总行列表，每一行是SUMMARY_HEADER对应的字典
    """
    if isinstance(manifest, str):
        manifest = ExperimentManifest.from_file(manifest)
    os.makedirs(manifest.output_dir, exist_ok=True)
    problem, x0, _ = build_problem(manifest.problem)
    f_star = None
    if manifest.reference is not None:
        reference = dict(manifest.reference)
        if reference.get('f_star') is not None:
            f_star = float(reference['f_star'])
        else:
            f_star = compute_reference(problem, x0, **reference)
    cells = []
    for entry in manifest.solvers:
        label = ExperimentManifest.solver_label(entry)
        for seed in manifest.seeds:
            cells.append((label, build_solver_config(entry, seed, f_star)))
    logger.info(f'共有{len(cells)}个实验组合，并行数：{manifest.jobs}，输出目录：{manifest.output_dir}')
    start = time.time()
    results = [None] * len(cells)
    if manifest.jobs == 1:
        for k, (_, config) in enumerate(tqdm(cells, desc='benchmark')):
            results[k] = _run_cell(problem, x0, config)
    else:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as executor:
            futures = {executor.submit(_run_cell, problem, x0, config): k for k, (_, config) in enumerate(cells)}
            for future in tqdm(as_completed(futures), total=len(futures), desc='benchmark'):
                results[futures[future]] = future.result()

    summary = []
    traces_by_label = {}
    for (label, config), (x, trace, status) in zip(cells, results):
        row = {'algorithm': config.algorithm, 'seed': config.seed, 'status': status, 'label': label}
        if trace is not None:
            write_trace_csv(os.path.join(manifest.output_dir, f'trace_{label}_seed{config.seed}.csv'), trace)
            final = trace.final
            radius = estimate_level_radius(problem.with_alpha(config.alpha), x0, x)
            row.update({'full_iterations': final['full_iteration'], 'raw_iterations': final['raw_iterations'],
                        'objective': final['objective'], 'feasibility': final['feasibility_defect'],
                        'elapsed_seconds': final['elapsed_seconds'], 'stop_reason': trace.stop_reason,
                        'touches': trace.touches, 'level_radius': radius})
            if f_star is not None:
                row['gap_bound'] = theoretical_gap_bound(problem, config, final['raw_iterations'], radius,
                                                         trace.objectives[0] - f_star)
            traces_by_label.setdefault(label, []).append(trace)
        summary.append(row)
    with open(os.path.join(manifest.output_dir, 'summary.csv'), 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_HEADER, restval='')
        writer.writeheader()
        for row in summary:
            writer.writerow({k: _fmt(v) for k, v in row.items()})

    for label, traces in traces_by_label.items():
        if len(manifest.seeds) < 2:
            continue
        rows = aggregate_traces(traces, f_star)
        with open(os.path.join(manifest.output_dir, f'aggregate_{label}.csv'), 'w', encoding='utf-8',
                  newline='') as f:
            writer = csv.writer(f)
            writer.writerow(AGGREGATE_HEADER)
            for r in rows:
                writer.writerow([_fmt(v) for v in r])
        if f_star is not None and manifest.fit_window is not None:
            k = np.array([r[0] for r in rows])
            gaps = np.array([r[4] for r in rows])
            try:
                slope, r2 = fit_rate(k, gaps, manifest.fit_window)
                logger.info(f'{label}：log-log斜率 = {slope:.4f}，线性R^2 = {r2:.4f}')
            except RateFitError as e:
                logger.warning(f'{label}：无法拟合收敛速度，{e}')
    failed = sum(row['status'] != 'ok' for row in summary)
    logger.info(f'实验结束，失败{failed}个，总用时：{time.time() - start:.2f}s')
    return summary
