import math
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np
from loguru import logger

from rcdopt.problem import build_state, refresh_state, eval_objective, INFINITE_OBJECTIVE
from rcdopt.utils.errors import ConfigError, InfeasibleError
from rcdopt.utils.rng import make_streams

ALGORITHMS = ('RCD', 'RCD_N', 'CGD', 'GM')
# 配置文件和命令行中可以使用的别名
ALGORITHM_ALIASES = {'rcd': 'RCD', 'rcdn': 'RCD_N', 'rcd_n': 'RCD_N', 'cgd': 'CGD', 'gm': 'GM'}
# 初始点可行性的相对容差
FEASIBILITY_TOL = 1e-9


def _coerce(name, value, cast):
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f'{name}的值无法转换为{cast.__name__}：{value!r}')


class PlateauWindow(object):
    '''最近window+1次相邻下降量都不超过epsilon时停止，即f(x^{k-j}) - f(x^{k-j+1}) <= epsilon, j = 0..window'''

    def __init__(self, window=10):
        window = _coerce('window', window, int)
        if window < 1:
            raise ConfigError(f'window必须大于等于1：{window}')
        self.window = window
        self.decreases = deque(maxlen=self.window + 1)
        self.last = None

    def fresh(self):
        return PlateauWindow(self.window)

    def update(self, objective, epsilon):
        if self.last is not None:
            self.decreases.append(self.last - objective)
        self.last = objective
        return len(self.decreases) == self.window + 1 and max(self.decreases) <= epsilon

    def __repr__(self):
        return f'PlateauWindow(window={self.window})'


class GapToReference(object):
    '''f(x^k) - f* <= gap时停止'''

    def __init__(self, f_star, gap):
        if f_star is None or not math.isfinite(_coerce('f_star', f_star, float)):
            raise ConfigError('GapToReference需要有限的f_star')
        gap = _coerce('gap', gap, float)
        if gap <= 0:
            raise ConfigError(f'gap必须为正：{gap}')
        self.f_star = float(f_star)
        self.gap = gap

    def fresh(self):
        return GapToReference(self.f_star, self.gap)

    def update(self, objective, epsilon):
        return objective - self.f_star <= self.gap

    def __repr__(self):
        return f'GapToReference(f_star={self.f_star}, gap={self.gap})'


def build_stop_rule(conf):
    """根据配置构建停止准则

    :param conf: None、停止准则对象，或者形如{'name': 'PlateauWindow', 'window': 10}的字典
    """
    if conf is None:
        return PlateauWindow()
    if isinstance(conf, (PlateauWindow, GapToReference)):
        return conf
    conf = dict(conf)
    name = conf.pop('name', 'PlateauWindow')
    try:
        if name in ('PlateauWindow', 'plateau'):
            return PlateauWindow(**conf)
        if name in ('GapToReference', 'gap'):
            return GapToReference(**conf)
    except TypeError as e:
        raise ConfigError(f'停止准则{name}的参数有误：{e}')
    raise ConfigError(f'未知的停止准则：{name}')


@dataclass
class SolverConfig(object):
    algorithm: str = 'RCD'
    alpha: float = 0.0
    epsilon: float = 1e-5
    max_full_iterations: int = 1000
    seed: int = 0
    stop_rule: object = field(default_factory=PlateauWindow)
    trace_every: int = 1
    log_interval: int = 10
    use_numba: bool = True
    debug: bool = False
    log_dir: str = None

    def __post_init__(self):
        name = str(self.algorithm)
        self.algorithm = ALGORITHM_ALIASES.get(name.lower(), name)
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f'未知的算法：{name}，可选值有：{ALGORITHMS}')
        self.alpha = _coerce('alpha', self.alpha, float)
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f'alpha必须在[0, 1]之间：{self.alpha}')
        self.epsilon = _coerce('epsilon', self.epsilon, float)
        if not self.epsilon > 0:
            raise ConfigError(f'epsilon必须为正：{self.epsilon}')
        self.max_full_iterations = _coerce('max_full_iterations', self.max_full_iterations, int)
        if self.max_full_iterations < 1:
            raise ConfigError(f'max_full_iterations必须为正：{self.max_full_iterations}')
        self.seed = _coerce('seed', self.seed, int)
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f'seed必须在[0, 2^64)之间：{self.seed}')
        self.trace_every = _coerce('trace_every', self.trace_every, int)
        if self.trace_every < 1:
            raise ConfigError(f'trace_every必须为正：{self.trace_every}')
        self.log_interval = max(_coerce('log_interval', self.log_interval, int), 1)
        self.stop_rule = build_stop_rule(self.stop_rule)

    @classmethod
    def from_configs(cls, solver_conf, **kwargs):
        """从配置文件的solver_conf部分创建，kwargs覆盖配置中的值"""
        conf = dict(solver_conf or {})
        conf.update({k: v for k, v in kwargs.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        unknown = set(conf) - known
        if unknown:
            raise ConfigError(f'solver_conf中有未知的参数：{sorted(unknown)}')
        return cls(**conf)

    def replace(self, **kwargs):
        conf = {k: getattr(self, k) for k in self.__dataclass_fields__}
        conf['stop_rule'] = self.stop_rule.fresh()
        conf.update(kwargs)
        return SolverConfig(**conf)


TRACE_COLUMNS = ('full_iteration', 'raw_iterations', 'objective', 'feasibility_defect', 'elapsed_seconds')


class ConvergenceTrace(object):
    """求解过程的收敛轨迹，每一行是(full_iteration, raw_iterations, objective, feasibility_defect, elapsed_seconds)"""

    def __init__(self, algorithm, seed):
        self.algorithm = algorithm
        self.seed = seed
        self.rows = []
        self.stop_reason = None
        self.touches = 0
        self.refreshes = 0
        self.metadata = {}

    def append(self, full_iteration, raw_iterations, objective, feasibility_defect, elapsed_seconds):
        self.rows.append((float(full_iteration), int(raw_iterations), float(objective),
                          float(feasibility_defect), float(elapsed_seconds)))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        k = TRACE_COLUMNS.index(name)
        return np.array([row[k] for row in self.rows])

    @property
    def objectives(self):
        return self.column('objective')

    @property
    def full_iterations(self):
        return self.column('full_iteration')

    @property
    def final(self):
        return dict(zip(TRACE_COLUMNS, self.rows[-1]))

    @property
    def final_objective(self):
        return self.rows[-1][2]

    def is_monotone(self, tol=1e-12):
        obj = self.objectives
        scale = 1.0 + np.abs(obj)
        return bool(np.all(obj[1:] <= obj[:-1] + tol * scale[:-1]))

    def touches_per_iteration(self):
        raw = self.rows[-1][1] if self.rows else 0
        return self.touches / raw if raw else 0.0


class BaseSolver(object):
    """求解器的公共流程：检查初始点、推进迭代、记录轨迹、判断停止

    子类实现setup()和advance()，advance()每次推进trace_every个完整迭代
    """
    name = None

    def __init__(self, config):
        self.config = config
        self.streams = None

    def validate(self, problem):
        pass

    def setup(self, problem, state):
        pass

    def iterations_per_full(self, problem):
        """一个完整迭代对应的原始迭代次数"""
        return 1.0

    def advance(self, problem, state, num_iterations):
        """执行num_iterations次原始迭代

        :return: (实际执行的次数, 是否已经达到最优)
        """
        raise NotImplementedError

    def check_start(self, problem, x0):
        x0 = np.asarray(x0, dtype=np.float64)
        if eval_objective(problem, x0) == INFINITE_OBJECTIVE:
            raise InfeasibleError('初始点不满足盒约束')
        defect = problem.coupling.defect(x0)
        if defect > FEASIBILITY_TOL * problem.coupling.scale(x0):
            raise InfeasibleError(f'初始点不满足耦合约束：误差{defect:.3e}')

    def solve(self, problem, x0):
        """从可行点x0出发求解

        :param problem: CompositeProblem
        :param x0: 可行的初始点
        :return: (x_final, ConvergenceTrace)
        """
        config = self.config
        if problem.alpha != config.alpha:
            problem = problem.with_alpha(config.alpha)
        self.validate(problem)
        self.check_start(problem, x0)
        state = build_state(problem, x0, debug=config.debug)
        self.streams = make_streams(config.seed)
        self.setup(problem, state)
        stop_rule = config.stop_rule.fresh()
        stop_rule.update(state.objective, config.epsilon)
        trace = ConvergenceTrace(self.name, config.seed)
        trace.append(0, 0, state.objective, state.feasibility_defect, 0.0)
        writer = None
        if config.log_dir:
            from visualdl import LogWriter
            writer = LogWriter(logdir=config.log_dir)
        per_full = self.iterations_per_full(problem)
        stride = max(int(math.ceil(config.trace_every * per_full)), 1)
        max_raw = int(math.ceil(config.max_full_iterations * per_full))
        raw, row = 0, 0
        start = time.time()
        logger.info(f'开始求解：{self.name}，n={problem.dim}，N={problem.num_blocks}，'
                    f'F(x0)={state.objective:.10g}，停止准则：{config.stop_rule}')
        while True:
            done, optimal = self.advance(problem, state, min(stride, max_raw - raw))
            raw += done
            row += 1
            elapsed = time.time() - start
            full = raw / per_full
            trace.append(full, raw, state.objective, state.feasibility_defect, elapsed)
            if row % config.log_interval == 0:
                speed = raw / max(elapsed, 1e-9)
                eta_str = str(timedelta(seconds=int((max_raw - raw) / max(speed, 1e-9))))
                logger.info(f'Solve [{self.name}] full iteration: [{full:.1f}/{config.max_full_iterations}], '
                            f'raw: {raw}, objective: {state.objective:.10f}, '
                            f'feasibility: {state.feasibility_defect:.3e}, '
                            f'speed: {speed:.2f} iter/sec, eta: {eta_str}')
            if writer is not None:
                writer.add_scalar('Solve/Objective', state.objective, row)
                writer.add_scalar('Solve/Feasibility', state.feasibility_defect, row)
            if optimal:
                trace.stop_reason = 'optimal'
            elif stop_rule.update(state.objective, config.epsilon):
                trace.stop_reason = 'stop_rule'
            elif raw >= max_raw:
                trace.stop_reason = 'max_iterations'
            if trace.stop_reason is not None:
                break
        # 结束时从头重算残差，最后一行使用重算后的值
        refresh_state(problem, state)
        full, raw_last, _, _, elapsed = trace.rows[-1]
        trace.rows[-1] = (full, raw_last, state.objective, state.feasibility_defect, elapsed)
        trace.touches = state.touches
        trace.refreshes = state.refreshes
        trace.metadata.update({'algorithm': self.name, 'seed': config.seed, 'stop_reason': trace.stop_reason,
                               'touches': state.touches, 'alpha': problem.alpha})
        if writer is not None:
            writer.close()
        logger.info(f'求解结束：{self.name}，停止原因：{trace.stop_reason}，完整迭代：{full:.1f}，'
                    f'目标函数值：{state.objective:.10f}，用时：{timedelta(seconds=time.time() - start)}')
        return state.x, trace
