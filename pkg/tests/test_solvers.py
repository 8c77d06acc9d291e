import os

import numpy as np
import pytest

from conftest import random_problem
from rcdopt.apps import build_chebyshev, random_points, build_l1_random, build_svm, generate_sparse_svm, \
    build_random_qp, parse_sparse_dataset
from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem, \
    eval_objective
from rcdopt.solvers import build_solver, solve, SolverConfig, PlateauWindow, GapToReference, rcd_solve, \
    rcd_n_solve, cgd_solve, gm_solve
from rcdopt.solvers.base import build_stop_rule
from rcdopt.solvers.rcd import draw_tuples, chunk_sizes
from rcdopt.utils.errors import ConfigError, InfeasibleError, UnsupportedConfigurationError


def _config(algorithm, **kwargs):
    conf = dict(algorithm=algorithm, epsilon=1e-12, max_full_iterations=2000, log_interval=1000)
    conf.update(kwargs)
    return SolverConfig(**conf)


def test_config_aliases_and_validation():
    assert SolverConfig(algorithm='rcdn').algorithm == 'RCD_N'
    assert SolverConfig(algorithm='cgd').algorithm == 'CGD'
    with pytest.raises(ConfigError):
        SolverConfig(algorithm='sgd')
    with pytest.raises(ConfigError):
        SolverConfig(alpha=2.0)
    with pytest.raises(ConfigError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ConfigError):
        SolverConfig.from_configs({'algorithm': 'RCD', 'learning_rate': 0.1})
    with pytest.raises(ConfigError):
        SolverConfig.from_configs({'algorithm': 'RCD', 'max_full_iterations': 'abc'})
    with pytest.raises(ConfigError):
        SolverConfig(seed=None)
    with pytest.raises(ConfigError):
        SolverConfig(stop_rule={'name': 'gap', 'f_star': 0.0, 'gap': 'small'})
    with pytest.raises(ConfigError):
        SolverConfig(stop_rule={'name': 'PlateauWindow', 'width': 3})
    config = SolverConfig.from_configs({'algorithm': 'RCD', 'epsilon': 1e-3}, epsilon=1e-6, seed=None)
    assert config.epsilon == 1e-6 and config.seed == 0


def test_stop_rules():
    rule = build_stop_rule({'name': 'PlateauWindow', 'window': 2})
    assert isinstance(rule, PlateauWindow)
    assert not rule.update(10.0, 0.1)
    assert not rule.update(5.0, 0.1)
    assert not rule.update(4.95, 0.1)
    assert not rule.update(4.9, 0.1)
    assert rule.update(4.89, 0.1)
    gap = build_stop_rule({'name': 'gap', 'f_star': 1.0, 'gap': 0.5})
    assert isinstance(gap, GapToReference)
    assert not gap.update(2.0, 0.0) and gap.update(1.4, 0.0)
    with pytest.raises(ConfigError):
        build_stop_rule({'name': 'never'})


def test_draw_tuples_are_distinct_and_pairs_match_formula():
    rng = np.random.default_rng(0)
    tuples = draw_tuples(rng, 7, 3, 500)
    assert tuples.shape == (500, 3)
    assert all(len(set(row)) == 3 for row in tuples.tolist())
    assert tuples.min() >= 0 and tuples.max() <= 6
    pairs = draw_tuples(np.random.default_rng(5), 6, 2, 100)
    ref = np.random.default_rng(5)
    i = ref.integers(0, 6, size=100)
    j = ref.integers(0, 5, size=100)
    j = j + (j >= i)
    np.testing.assert_array_equal(pairs[:, 0], i)
    np.testing.assert_array_equal(pairs[:, 1], j)


def test_chunk_sizes_cover_all_iterations():
    sizes = list(chunk_sizes(10, 2, 123))
    assert sum(sizes) == 123
    assert max(sizes) <= 50


def test_build_solver_resolves_by_name():
    assert type(build_solver(SolverConfig(algorithm='GM'))).__name__ == 'GM'
    assert type(build_solver(SolverConfig(algorithm='rcd_n'))).__name__ == 'RCD_N'


@pytest.mark.parametrize('algorithm,use_numba', [('RCD', True), ('RCD', False), ('RCD_N', False),
                                                 ('CGD', False), ('GM', False)])
def test_hand_problem_converges(hand_problem, algorithm, use_numba):
    problem, x0 = hand_problem
    x, trace = solve(problem, x0, _config(algorithm, use_numba=use_numba, max_full_iterations=100))
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-6)
    assert trace.final_objective == pytest.approx(0.25, abs=1e-10)
    assert trace.final['full_iteration'] < 100


@pytest.mark.parametrize('algorithm', ['RCD', 'RCD_N', 'GM'])
def test_optimal_start_keeps_objective(hand_problem, algorithm):
    problem, _ = hand_problem
    x, trace = solve(problem, np.array([0.5, 0.5]), _config(algorithm, max_full_iterations=30))
    assert np.all(trace.objectives == trace.objectives[0])
    np.testing.assert_array_equal(x, [0.5, 0.5])


def test_cgd_stops_immediately_at_optimum(hand_problem):
    problem, _ = hand_problem
    _, trace = cgd_solve(problem, np.array([0.5, 0.5]), _config('CGD'))
    assert trace.stop_reason == 'optimal'
    assert trace.rows[-1][1] == 0


def test_infeasible_start_is_rejected(hand_problem):
    problem, _ = hand_problem
    with pytest.raises(InfeasibleError):
        rcd_solve(problem, np.array([1.0, 1.0]), _config('RCD'))
    box_problem, x0 = random_problem(n=5, kind='box')
    x_out = x0.copy()
    x_out[0] = 3.0
    with pytest.raises(InfeasibleError):
        rcd_solve(box_problem, x_out, _config('RCD'))


def test_unsupported_configurations():
    problem, x0 = random_problem(n=6, block_size=2)
    with pytest.raises(UnsupportedConfigurationError):
        cgd_solve(problem, x0, _config('CGD'))
    with pytest.raises(UnsupportedConfigurationError):
        rcd_n_solve(problem, x0, _config('RCD_N'))
    general = CompositeProblem(smooth=StructuredSmooth(np.eye(4), np.zeros(4)), nonsmooth=SeparableTerm.zero(4),
                               coupling=Coupling.general(np.eye(2, 4), np.zeros(2)),
                               partition=BlockPartition.scalar(4))
    with pytest.raises(UnsupportedConfigurationError):
        rcd_solve(general, np.zeros(4), _config('RCD'))
    with pytest.raises(UnsupportedConfigurationError):
        gm_solve(general, np.zeros(4), _config('GM'))


def _families():
    svm, svm_x0 = build_svm(generate_sparse_svm(60, 20, 4, seed=1))
    cheb, cheb_x0 = build_chebyshev(random_points(40, 3, seed=2), x0='e1')
    l1, l1_x0 = build_l1_random(40, 10, 0.5, seed=3, x0='uniform')
    qp, qp_x0 = build_random_qp(40, m_rows=20, density=0.2, seed=4)
    return [(svm, svm_x0), (cheb, cheb_x0), (l1, l1_x0), (qp, qp_x0)]


@pytest.mark.parametrize('algorithm', ['RCD', 'RCD_N', 'CGD', 'GM'])
def test_monotone_and_feasible_on_all_families(algorithm):
    for problem, x0 in _families():
        config = _config(algorithm, epsilon=1e-8, max_full_iterations=200,
                         stop_rule=PlateauWindow(window=1 if algorithm in ('CGD', 'GM') else 10))
        x, trace = solve(problem, x0, config)
        scale = 1.0 + np.abs(trace.objectives)
        assert trace.is_monotone(tol=1e-12), problem.name
        assert np.all(trace.column('feasibility_defect') <= 1e-9 * (1.0 + np.abs(x).sum())), problem.name
        assert problem.is_feasible(x), problem.name
        assert trace.final_objective == pytest.approx(eval_objective(problem, x), abs=1e-9 * scale[-1])
        assert trace.touches > 0


def test_cgd_skips_lone_coupled_coordinates(monkeypatch):
    problem, x0 = build_random_qp(20, m_rows=10, density=0.3, seed=7)

    # 不带耦合约束的投影方向，贪心配对后会剩下a_k != 0的单坐标片
    def uncoupled_direction(problem, x, idx, g, curvature, **kwargs):
        return np.clip(x - g / curvature, -1.0, 1.0) - x

    monkeypatch.setattr('rcdopt.solvers.cgd.knapsack_direction', uncoupled_direction)
    x, trace = cgd_solve(problem, x0, _config('CGD', max_full_iterations=50, stop_rule=PlateauWindow(window=1)))
    assert trace.is_monotone(tol=1e-12)
    assert np.all(trace.column('feasibility_defect') <= 1e-9 * (1.0 + np.abs(x).sum()))
    assert problem.is_feasible(x)
    assert trace.final_objective < trace.objectives[0]


def test_seed_determinism():
    problem, x0 = build_random_qp(50, m_rows=20, density=0.2, seed=0)
    config = _config('RCD', max_full_iterations=30, seed=7)
    x1, t1 = rcd_solve(problem, x0, config)
    x2, t2 = rcd_solve(problem, x0, config.replace())
    np.testing.assert_array_equal(x1, x2)
    np.testing.assert_array_equal(t1.objectives, t2.objectives)
    _, t3 = rcd_solve(problem, x0, config.replace(seed=8))
    assert not np.array_equal(t1.objectives, t3.objectives)


def test_compiled_and_python_paths_agree():
    problem, x0 = build_l1_random(30, 10, 0.3, seed=1)
    config = _config('RCD', max_full_iterations=20, stop_rule=PlateauWindow(window=100))
    x_fast, t_fast = rcd_solve(problem, x0, config)
    x_slow, t_slow = rcd_solve(problem, x0, config.replace(use_numba=False))
    np.testing.assert_allclose(x_fast, x_slow, atol=1e-9)
    np.testing.assert_allclose(t_fast.objectives, t_slow.objectives, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize('seed', range(20))
def test_tuple_solver_with_one_constraint_follows_pair_solver(seed):
    problem, x0 = build_random_qp(30, m_rows=15, density=0.3, seed=seed)
    config = _config('RCD', seed=seed, max_full_iterations=20, stop_rule=PlateauWindow(window=100),
                     use_numba=False)
    x_pair, t_pair = rcd_solve(problem, x0, config)
    x_tuple, t_tuple = rcd_n_solve(problem, x0, config.replace(algorithm='RCD_N'))
    np.testing.assert_allclose(x_pair, x_tuple, atol=1e-8)
    assert t_tuple.final_objective == pytest.approx(t_pair.final_objective, abs=1e-8)


@pytest.mark.parametrize('seed', range(20))
def test_tuple_solver_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 4 + seed % 5
    Z = rng.standard_normal((n + 2, n))
    q = rng.standard_normal(n) * 0.1
    A = rng.standard_normal((2, n))
    # 最优解在盒子内部时是等式约束二次规划的解
    Q = Z.T @ Z
    kkt = np.block([[Q, A.T], [A, np.zeros((2, 2))]])
    x_ref = np.linalg.solve(kkt, np.concatenate([-q, np.zeros(2)]))[:n]
    bound = 2.0 * np.max(np.abs(x_ref)) + 1.0
    problem = CompositeProblem(smooth=StructuredSmooth(Z, q), nonsmooth=SeparableTerm.box(n, -bound, bound),
                               coupling=Coupling.general(A, np.zeros(2)), partition=BlockPartition.scalar(n))
    _, trace = rcd_n_solve(problem, np.zeros(n), _config('RCD_N', seed=seed, max_full_iterations=5000))
    assert trace.final_objective == pytest.approx(eval_objective(problem, x_ref), abs=1e-5)
    assert trace.final['feasibility_defect'] <= 1e-9 * (1.0 + bound * n)


def test_block_svm_reaches_scalar_reference():
    instance = generate_sparse_svm(80, 30, 5, seed=3)
    scalar, x0 = build_svm(instance)
    block, _ = build_svm(instance, block_size=4, power_iterations=20)
    _, ref = cgd_solve(scalar, x0, _config('CGD', stop_rule=PlateauWindow(window=1), max_full_iterations=20000))
    x, trace = rcd_solve(block, x0, _config('RCD', epsilon=1e-10, max_full_iterations=3000))
    assert trace.final_objective == pytest.approx(ref.final_objective, rel=1e-3)
    assert np.all(x >= 0) and np.all(x <= instance.C)
    assert abs(instance.labels @ x) <= 1e-9 * instance.n


def test_alpha_one_also_converges():
    problem, x0 = build_l1_random(30, 10, 0.3, seed=5)
    _, ref = cgd_solve(problem, x0, _config('CGD', stop_rule=PlateauWindow(window=1), max_full_iterations=20000))
    _, trace = rcd_solve(problem, x0, _config('RCD', alpha=1.0, epsilon=1e-12, max_full_iterations=3000))
    assert trace.final_objective == pytest.approx(ref.final_objective, abs=1e-5)
    assert trace.metadata['alpha'] == 1.0


def test_gm_and_rcd_agree_on_chebyshev():
    problem, x0 = build_chebyshev(random_points(100, 5, seed=11), x0='uniform')
    _, ref = cgd_solve(problem, x0, _config('CGD', epsilon=1e-13, stop_rule=PlateauWindow(window=1),
                                            max_full_iterations=100000))
    f_star = ref.final_objective
    stop = GapToReference(f_star, 1e-5)
    _, t_rcd = rcd_solve(problem, x0, _config('RCD', stop_rule=stop, max_full_iterations=5000))
    _, t_gm = gm_solve(problem, x0, _config('GM', stop_rule=stop, max_full_iterations=5000))
    assert t_rcd.final_objective >= f_star - 1e-6 and t_gm.final_objective >= f_star - 1e-6
    assert t_rcd.final_objective == pytest.approx(t_gm.final_objective, abs=1e-3)
    assert t_rcd.objectives[0] == t_gm.objectives[0]


def test_debug_checks_pass_on_python_path():
    problem, x0 = random_problem(n=10, kind='l1_box', seed=12)
    _, trace = rcd_solve(problem, x0, _config('RCD', use_numba=False, debug=True, max_full_iterations=20))
    assert trace.is_monotone()


def test_trace_rows_and_touches():
    problem, x0 = build_random_qp(40, m_rows=20, density=0.2, seed=6)
    _, trace = rcd_solve(problem, x0, _config('RCD', max_full_iterations=10, stop_rule=PlateauWindow(window=100)))
    assert trace.stop_reason == 'max_iterations'
    assert len(trace) == 11
    np.testing.assert_allclose(trace.full_iterations, np.arange(11))
    assert trace.rows[-1][1] == 200
    # 每次迭代读两列再写两列，约4p，另外加上重算残差的开销
    per_iteration = trace.touches_per_iteration()
    assert per_iteration == pytest.approx(4 * problem.smooth.column_sparsity, rel=0.4)


def test_touches_scale_with_column_sparsity():
    per_iteration = {}
    for p in (5, 20):
        problem, x0 = build_svm(generate_sparse_svm(2000, 500, p, seed=0))
        _, trace = rcd_solve(problem, x0, _config('RCD', max_full_iterations=5, stop_rule=PlateauWindow(window=100)))
        per_iteration[p] = trace.touches_per_iteration()
    # 每次迭代只访问两列，开销与p成正比
    assert per_iteration[20] / per_iteration[5] == pytest.approx(4.0, rel=0.3)


def test_visualdl_scalars(tmp_path):
    pytest.importorskip('visualdl')
    problem, x0 = build_random_qp(20, m_rows=10, density=0.3, seed=0)
    _, trace = rcd_solve(problem, x0, _config('RCD', max_full_iterations=5, log_dir=str(tmp_path)))
    assert len(trace) > 1
    assert any(tmp_path.iterdir())


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get('RCDOPT_A7A'), reason='需要设置RCDOPT_A7A为a7a数据文件路径')
@pytest.mark.parametrize('algorithm,expected', [('RCD', -5698.02), ('CGD', -5698.25)])
def test_svm_a7a_objective(algorithm, expected):
    instance = parse_sparse_dataset(os.environ['RCDOPT_A7A'], C=1.0)
    assert instance.n == 16100 and instance.m_dim == 122
    problem, x0 = build_svm(instance)
    window = 10 if algorithm == 'RCD' else 1
    config = _config(algorithm, epsilon=1e-5, max_full_iterations=100000, stop_rule=PlateauWindow(window=window))
    x, trace = solve(problem, x0, config)
    assert trace.final_objective == pytest.approx(expected, rel=3e-3)
    assert np.all(x >= 0) and np.all(x <= 1.0)
